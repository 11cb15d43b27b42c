//! CSV tables written by the subcommands and a reader for them.
//!
//! Floats carry 12 significant digits. Every file starts with a header row
//! whose columns are fixed per table kind.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub const ENSEMBLE_COLUMNS: [&str; 4] = ["event_index", "mean_eta", "std_eta", "mean_zbar"];
pub const ODE_COLUMNS: [&str; 4] = ["t", "z", "x", "eta"];
pub const TAG_COLUMNS: [&str; 4] = ["belief", "weight", "replications", "final_mean_eta"];
pub const SWEEP_COLUMNS: [&str; 4] = ["lambda", "predicted_eta", "simulated_eta", "std_error"];
pub const SUPPORT_COLUMNS: [&str; 2] = ["belief", "weight"];
pub const EQUILIBRIUM_COLUMNS: [&str; 11] = [
    "k",
    "lambda_bar",
    "lambda_star",
    "sender_value",
    "ic_residual",
    "plausibility_gap",
    "psi",
    "phi",
    "rho",
    "curvature",
    "oracle_grid_size",
];

const SIG_DIGITS: usize = 12;

/// `x` with 12 significant digits; positional notation for moderate
/// magnitudes, exponent notation otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (SIG_DIGITS as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = SIG_DIGITS - 1)
    }
}

/// One table cell.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    Int(u64),
    Float(f64),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => fmt_sig(*x),
        }
    }
}

pub fn write_table<I>(path: &Path, columns: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<Value>>,
{
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns)?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        w.write_record(row.iter().map(Value::render))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct EnsembleRow {
    pub event_index: u64,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub mean_zbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct OdeRow {
    pub t: f64,
    pub z: f64,
    pub x: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct TagRow {
    pub belief: f64,
    pub weight: f64,
    pub replications: u64,
    pub final_mean_eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub predicted_eta: f64,
    pub simulated_eta: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SupportRow {
    pub belief: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct EquilibriumRow {
    pub k: f64,
    pub lambda_bar: f64,
    pub lambda_star: f64,
    pub sender_value: f64,
    pub ic_residual: f64,
    pub plausibility_gap: f64,
    pub psi: f64,
    pub phi: f64,
    pub rho: f64,
    pub curvature: f64,
    pub oracle_grid_size: u64,
}

/// Reads a table, checking that its header is exactly `columns`.
pub fn read_table<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != columns {
        return Err(CliError::Runtime(format!(
            "{}: header {header:?}, expected {columns:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn read_ensemble(path: &Path) -> Result<Vec<EnsembleRow>, CliError> {
    read_table(path, &ENSEMBLE_COLUMNS)
}

pub fn read_ode(path: &Path) -> Result<Vec<OdeRow>, CliError> {
    read_table(path, &ODE_COLUMNS)
}

pub fn read_tags(path: &Path) -> Result<Vec<TagRow>, CliError> {
    read_table(path, &TAG_COLUMNS)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    read_table(path, &SWEEP_COLUMNS)
}

pub fn read_support(path: &Path) -> Result<Vec<SupportRow>, CliError> {
    read_table(path, &SUPPORT_COLUMNS)
}

pub fn read_equilibrium(path: &Path) -> Result<Vec<EquilibriumRow>, CliError> {
    read_table(path, &EQUILIBRIUM_COLUMNS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.500000000000");
        assert_eq!(fmt_sig(24.066), "24.0660000000");
        assert_eq!(fmt_sig(-1.0 / 3.0), "-0.333333333333");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.25e-9), "1.25000000000e-9");
        assert_eq!(fmt_sig(1500.0), "1500.00000000");
    }

    #[test]
    fn formatted_values_parse_back_within_precision() {
        for x in [1.0 / 3.0, 2.0f64.sqrt() * 1e7, -7.123456789012345e-3, 5e-300, 9.99999999999999e-6] {
            let y: f64 = fmt_sig(x).parse().unwrap();
            assert!((x - y).abs() <= 1e-11 * x.abs(), "{x} -> {y}");
        }
    }

    #[test]
    fn ensemble_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        let rows: Vec<(u64, f64, f64, f64)> =
            (0..5).map(|i| (i, 0.1 * i as f64 + 1e-13, 1.0 / (i + 3) as f64, 24.0 + i as f64)).collect();
        write_table(
            &path,
            &ENSEMBLE_COLUMNS,
            rows.iter().map(|&(i, a, b, c)| vec![Value::Int(i), Value::Float(a), Value::Float(b), Value::Float(c)]),
        )
        .unwrap();
        let back = read_ensemble(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (r, &(i, a, b, c)) in back.iter().zip(&rows) {
            assert_eq!(r.event_index, i);
            for (x, y) in [(r.mean_eta, a), (r.std_eta, b), (r.mean_zbar, c)] {
                assert!((x - y).abs() <= 1e-11 * y.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn header_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ode.csv");
        write_table(&path, &ODE_COLUMNS, [vec![Value::Float(0.0); 4]]).unwrap();
        assert_eq!(read_ode(&path).unwrap().len(), 1);
        assert!(read_ensemble(&path).is_err());
    }
}
