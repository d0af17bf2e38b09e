//! Side-by-side comparison of two run manifests.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::run::SCHEMA;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl Row {
    pub fn difference(&self) -> Option<f64> {
        Some(self.b? - self.a?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub run_a: String,
    pub run_b: String,
    pub rows: Vec<Row>,
    /// `(channel, state in a, state in b)` with states "constant" or "varying".
    pub cm_channels: Vec<(String, String, String)>,
}

impl Comparison {
    pub fn row(&self, quantity: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn max_abs_difference(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(Row::difference)
            .fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn render(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.9e}"));
        let mut s = format!("a: {}\nb: {}\n\n", self.run_a, self.run_b);
        let _ = writeln!(s, "{:<26} {:>17} {:>17} {:>17}", "quantity", "a", "b", "b - a");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<26} {:>17} {:>17} {:>17}",
                r.quantity,
                cell(r.a),
                cell(r.b),
                cell(r.difference())
            );
        }
        s.push_str("\ncenter-of-mass channels\n");
        for (ch, a, b) in &self.cm_channels {
            let flag = if a != b { "  <- differs" } else { "" };
            let _ = writeln!(s, "{ch:<6} a: {a:<9} b: {b:<9}{flag}");
        }
        s
    }
}

fn load(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn check(v: &Value, name: &str) -> Result<(), CliError> {
    match v.get("schema").and_then(Value::as_str) {
        Some(SCHEMA) => {}
        Some(other) => return Err(CliError::Schema(format!("{name} has schema {other}, expected {SCHEMA}"))),
        None => return Err(CliError::Schema(format!("{name} has no schema field"))),
    }
    if v.get("status").and_then(Value::as_str) != Some("complete") {
        return Err(CliError::Schema(format!("{name} is not a completed run")));
    }
    if !v.get("results").is_some_and(Value::is_object) {
        return Err(CliError::Schema(format!("{name} has no results section")));
    }
    Ok(())
}

fn num(v: &Value, pointer: &str) -> Option<f64> {
    v.pointer(pointer).and_then(Value::as_f64)
}

fn shells(v: &Value) -> Vec<(u64, f64)> {
    v.pointer("/results/populations/shells")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(|s| Some((s.get("n")?.as_u64()?, s.get("W")?.as_f64()?)))
                .collect()
        })
        .unwrap_or_default()
}

pub fn compare_values(a: &Value, b: &Value) -> Result<Comparison, CliError> {
    check(a, "manifest a")?;
    check(b, "manifest b")?;
    let mut rows = Vec::new();
    let row = |quantity: &str, pointer: &str| Row {
        quantity: quantity.to_string(),
        a: num(a, pointer),
        b: num(b, pointer),
    };
    let mut push = |quantity: &str, pointer: &str| rows.push(row(quantity, pointer));
    push("omega", "/parameters/omega");
    push("e0", "/parameters/e0");
    for (i, ax) in ["x", "y", "z"].iter().enumerate() {
        push(&format!("final P_{ax}"), &format!("/results/final_cm/P/{i}"));
    }
    for (i, ax) in ["X", "Y", "Z"].iter().enumerate() {
        push(&format!("final {ax}"), &format!("/results/final_cm/R/{i}"));
    }
    for key in ["cm_trapezoid", "electron_trapezoid", "cm_spectral", "electron_spectral"] {
        push(&format!("KE {key}"), &format!("/results/kinetic_energy/{key}"));
    }
    push("correlation", "/results/correlation/value");
    push("correlation lag", "/results/correlation/lag");
    let residual = row("population residual", "/results/populations/residual");
    let (sa, sb) = (shells(a), shells(b));
    let ns: BTreeSet<u64> = sa.iter().chain(&sb).map(|(n, _)| *n).collect();
    for n in ns {
        let find = |s: &[(u64, f64)]| s.iter().find(|(m, _)| *m == n).map(|(_, w)| *w);
        rows.push(Row {
            quantity: format!("W_{n}"),
            a: find(&sa),
            b: find(&sb),
        });
    }
    rows.push(residual);

    let tag = |v: &Value, ch: &str| {
        v.pointer(&format!("/results/cm_channels/{ch}"))
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_string()
    };
    let cm_channels = ["X", "Y", "Z", "P_x", "P_y", "P_z"]
        .iter()
        .map(|ch| (ch.to_string(), tag(a, ch), tag(b, ch)))
        .collect();
    let id = |v: &Value| v.get("run_id").and_then(Value::as_str).unwrap_or("?").to_string();
    Ok(Comparison {
        run_a: id(a),
        run_b: id(b),
        rows,
        cm_channels,
    })
}

/// Compares two `manifest.json` files.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Comparison, CliError> {
    compare_values(&load(a)?, &load(b)?)
}
