//! CSV writers. Floats use 17 significant digits so values round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nondipole_core::hydrogen::PopulationTable;
use nondipole_core::observables::{Sample, Spectrum, TimeSeries};

pub const TIME_SERIES: &str = "time_series.csv";
pub const SPECTRA: &str = "spectra.csv";
pub const POPULATIONS: &str = "populations.csv";
pub const MANIFEST: &str = "manifest.json";

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(run_id: &str, partial: bool) -> String {
    let mut s = format!("# run_id={run_id}\n");
    if partial {
        s.push_str("# partial=true\n");
    }
    s
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(float).collect::<Vec<_>>().join(",")
}

pub fn time_series_csv(series: &TimeSeries, run_id: &str, partial: bool) -> String {
    let mut s = header(run_id, partial);
    s.push_str(&Sample::COLUMNS.join(","));
    s.push('\n');
    for sample in series.samples() {
        s.push_str(&row(sample.to_row()));
        s.push('\n');
    }
    s
}

/// The `energy` column is `omega + axis_offset`.
pub fn spectra_csv(spectrum: &Spectrum, axis_offset: f64, run_id: &str) -> String {
    let mut s = header(run_id, false);
    s.push_str("omega,energy");
    for slice in &spectrum.slices {
        let _ = write!(s, ",{}", slice.channel.name());
    }
    s.push('\n');
    for (i, w) in spectrum.omega.iter().enumerate() {
        s.push_str(&row([*w, w + axis_offset].into_iter().chain(spectrum.slices.iter().map(|sl| sl.density[i]))));
        s.push('\n');
    }
    s
}

pub fn populations_csv(table: &PopulationTable, run_id: &str) -> String {
    let mut s = header(run_id, false);
    let _ = writeln!(s, "# t={} residual={}", float(table.t), float(table.residual));
    s.push_str("n,W_n\n");
    for (n, w) in &table.shells {
        let _ = writeln!(s, "{n},{}", float(*w));
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    fs::write(dir.join(name), contents)
}

/// Parses a CSV written by this module, skipping comment lines. Returns
/// the column names and the numeric rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().ok_or("missing header")?;
    let names: Vec<String> = head.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let r = l
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if r.len() != names.len() {
            return Err(format!("row {} has {} fields, expected {}", i + 1, r.len(), names.len()));
        }
        rows.push(r);
    }
    Ok((names, rows))
}
