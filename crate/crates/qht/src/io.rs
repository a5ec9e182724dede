//! CSV and JSON persistence.
//!
//! Floats are written with 17 significant digits so every value reads back
//! to the same bits.

use std::fs;
use std::path::Path;

use serde::Serialize;

use qht_core::scenarios::{BlochSample, RobustnessReport, SweepRow};
use qht_core::{ControlField, TimeGrid};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, IoError>;

/// `{:.16e}`: one digit before the point and sixteen after.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| IoError::Fs { path: display(path), source })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| IoError::Fs { path: display(path), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: display(path), source })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Fs { path: display(path), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: display(path), source })
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let wrap = |source| IoError::Csv { path: display(path), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::Fs { path: display(path), source })
}

/// Columns `slice,t_start,u_<label>...`.
pub fn write_pulse(path: &Path, grid: &TimeGrid, controls: &ControlField) -> Result<()> {
    let labels: Vec<String> = controls.labels().iter().map(|l| format!("u_{l}")).collect();
    let mut header = vec!["slice", "t_start"];
    header.extend(labels.iter().map(String::as_str));
    let rows = (0..controls.slices()).map(|n| {
        let mut row = vec![n.to_string(), fmt(grid.slice_start(n))];
        row.extend((0..controls.channels()).map(|k| fmt(controls.get(k, n))));
        row
    });
    write_table(path, &header, rows)
}

/// Reads a pulse file written by [`write_pulse`].
pub fn read_pulse(path: &Path) -> Result<ControlField> {
    let wrap = |source| IoError::Csv { path: display(path), source };
    let format = |reason: String| IoError::Format { path: display(path), reason };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    let header = r.headers().map_err(wrap)?.clone();
    if header.len() < 2 || &header[0] != "slice" || &header[1] != "t_start" {
        return Err(format("expected columns slice,t_start,u_...".into()));
    }
    let labels: Vec<String> = header
        .iter()
        .skip(2)
        .map(|h| h.strip_prefix("u_").map(str::to_string).ok_or_else(|| format(format!("bad column {h}"))))
        .collect::<Result<_>>()?;
    let mut columns = vec![Vec::new(); labels.len()];
    for (n, record) in r.records().enumerate() {
        let record = record.map_err(wrap)?;
        if record.get(0) != Some(n.to_string().as_str()) {
            return Err(format(format!("slice {n} out of order")));
        }
        for (k, col) in columns.iter_mut().enumerate() {
            let v: f64 = record[k + 2].parse().map_err(|_| format(format!("bad number in row {n}")))?;
            col.push(v);
        }
    }
    let slices = columns.first().map_or(0, Vec::len);
    ControlField::new(labels, slices, columns.concat()).map_err(|e| format(e.to_string()))
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    write_table(path, &["iteration", "objective"], trace.iter().enumerate().map(|(i, f)| vec![i.to_string(), fmt(*f)]))
}

pub fn write_trajectory(path: &Path, samples: &[BlochSample]) -> Result<()> {
    let rows = samples.iter().map(|s| vec![fmt(s.time), fmt(s.bloch.x), fmt(s.bloch.y), fmt(s.bloch.z)]);
    write_table(path, &["t", "x", "y", "z"], rows)
}

/// `controls_file` is empty for rows without a stored pulse.
pub fn write_sweep(path: &Path, rows: &[(SweepRow, String)]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|(r, file)| vec![fmt(r.value), fmt(r.pe_helstrom), fmt(r.pe_fixed), file.clone()]);
    write_table(path, &["value", "pe_helstrom", "pe_fixed", "controls_file"], rows)
}

pub fn write_robustness(path: &Path, report: &RobustnessReport) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .map(|r| vec![fmt(r.detuning), fmt(r.uncontrolled), fmt(r.optimal), fmt(r.robust)]);
    write_table(path, &["detuning", "pe_uncontrolled", "pe_optimal", "pe_robust"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn pulse_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pulse.csv");
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let u = ControlField::new(vec!["x".into(), "y".into()], 3, vec![0.1, -0.2, 1.0 / 3.0, 4.0, 5.5, -6.25])
            .unwrap();
        write_pulse(&path, &grid, &u).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("slice,t_start,u_x,u_y\n"));
        assert_eq!(read_pulse(&path).unwrap(), u);
    }
}
