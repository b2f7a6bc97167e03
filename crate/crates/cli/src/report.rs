//! JSON report assembly and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use s2wb_core::verify::{CheckStats, SuiteReport};
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: &str = "1";

/// JSON has no infinities; non-finite values are written as strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(|v| num(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    fn write_csv(&self, path: &Path) -> Result<(), String> {
        let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
        w.write_record(&self.columns).map_err(|e| e.to_string())?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:?}"))).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub command: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub checks: Vec<CheckStats>,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    pub tables: BTreeMap<String, Table>,
    pub errors: Vec<String>,
}

pub enum Status {
    Pass,
    Violation,
    Error,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        Self { command: command.into(), seed, config, ..Default::default() }
    }

    /// Takes the checks and diagnostics of a suite, prefixing names.
    pub fn absorb(&mut self, prefix: &str, suite: SuiteReport) {
        for mut c in suite.checks.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        for (k, v) in suite.diagnostics {
            self.diagnostics.insert(format!("{prefix}{k}"), v);
        }
        for (name, h) in suite.histograms {
            let mut t = Table::new(&["decade", "count"]);
            let mut keyed: Vec<(f64, u64)> = h
                .bins
                .iter()
                .map(|(k, v)| {
                    let d = match k.as_str() {
                        "negative" => f64::NEG_INFINITY,
                        "zero" => -1000.0,
                        other => other.trim_start_matches("1e").parse().unwrap_or(f64::NAN),
                    };
                    (d, *v)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            t.rows = keyed.into_iter().map(|(d, c)| vec![d, c as f64]).collect();
            self.tables.insert(format!("{prefix}{name}_histogram"), t);
        }
    }

    /// A single-item check.
    pub fn check(&mut self, name: &str, strict: bool, margin: f64, note: &str) {
        let mut c = CheckStats::new(name, true, strict);
        c.record(margin, 0, || (vec![], note.to_string()));
        self.checks.push(c);
    }

    pub fn status(&self) -> Status {
        if !self.errors.is_empty() {
            Status::Error
        } else if self.checks.iter().any(|c| c.hard && !c.ok()) {
            Status::Violation
        } else {
            Status::Pass
        }
    }

    pub fn to_json(&self, wall_time: f64) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let witness = c.witness.as_ref().map(|w| {
                    json!({
                        "item": w.item,
                        "values": w.values.iter().map(|v| num(*v)).collect::<Vec<_>>(),
                        "note": w.note,
                    })
                });
                json!({
                    "name": c.name,
                    "hard": c.hard,
                    "strict": c.strict,
                    "count": c.count,
                    "passed": c.passed,
                    "violations": c.count - c.passed,
                    "worst_margin": num(c.worst_margin),
                    "witness": witness,
                })
            })
            .collect();
        let diagnostics: Map<String, Value> = self.diagnostics.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
        let tables: Map<String, Value> = self.tables.iter().map(|(k, t)| (k.clone(), t.to_json())).collect();
        let status = match self.status() {
            Status::Pass => "pass",
            Status::Violation => "violation",
            Status::Error => "error",
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
            "status": status,
            "checks": checks,
            "diagnostics": diagnostics,
            "notes": self.notes,
            "tables": tables,
            "errors": self.errors,
            "wall_time_seconds": wall_time,
        })
    }

    /// `checks.csv` plus one file per table.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<(), String> {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let path = dir.join("checks.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        w.write_record(["name", "hard", "count", "passed", "worst_margin"]).map_err(|e| e.to_string())?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.hard.to_string(),
                c.count.to_string(),
                c.passed.to_string(),
                format!("{:?}", c.worst_margin),
            ])
            .map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
        for (name, t) in &self.tables {
            t.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }
}
