//! Seeded batch suites. Every check records a signed margin per item
//! (negative means the contract failed), and partial results are folded in
//! chunk order, so reports do not depend on the number of threads.

mod jacobi_suite;
mod transform_suite;

pub use jacobi_suite::{run_jacobi_suite, run_remark_ratio, JacobiSuiteConfig};
pub use transform_suite::{run_transform_suite, TransformSuiteConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// The item behind a worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub item: u64,
    pub values: Vec<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStats {
    pub name: String,
    /// Hard checks decide the exit status; the rest are diagnostics.
    pub hard: bool,
    /// Pass requires `margin > 0` instead of `margin >= 0`.
    pub strict: bool,
    pub count: u64,
    pub passed: u64,
    pub worst_margin: f64,
    pub witness: Option<Witness>,
}

impl CheckStats {
    pub fn new(name: &str, hard: bool, strict: bool) -> Self {
        Self {
            name: name.to_string(),
            hard,
            strict,
            count: 0,
            passed: 0,
            worst_margin: f64::INFINITY,
            witness: None,
        }
    }

    pub fn passes(&self, margin: f64) -> bool {
        if self.strict {
            margin > 0.0
        } else {
            margin >= 0.0
        }
    }

    /// Records one margin; the witness closure runs only for a new worst.
    pub fn record(&mut self, margin: f64, item: u64, witness: impl FnOnce() -> (Vec<f64>, String)) {
        self.count += 1;
        if self.passes(margin) {
            self.passed += 1;
        }
        // NaN margins count as failures and always become the witness.
        if margin < self.worst_margin || (margin.is_nan() && !self.worst_margin.is_nan()) {
            self.worst_margin = margin;
            let (values, note) = witness();
            self.witness = Some(Witness { item, values, note });
        }
    }

    /// Folds a later partial into this one; ties keep the earlier witness.
    pub fn merge(&mut self, other: CheckStats) {
        self.count += other.count;
        self.passed += other.passed;
        if other.worst_margin < self.worst_margin || (other.worst_margin.is_nan() && !self.worst_margin.is_nan()) {
            self.worst_margin = other.worst_margin;
            self.witness = other.witness;
        }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.count
    }
}

/// Ordered set of checks keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSet {
    pub checks: Vec<CheckStats>,
}

impl CheckSet {
    pub fn get_mut(&mut self, name: &str, hard: bool, strict: bool) -> &mut CheckStats {
        if let Some(pos) = self.checks.iter().position(|c| c.name == name) {
            return &mut self.checks[pos];
        }
        self.checks.push(CheckStats::new(name, hard, strict));
        self.checks.last_mut().unwrap()
    }

    pub fn get(&self, name: &str) -> Option<&CheckStats> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(&mut self, other: CheckSet) {
        for c in other.checks {
            let (hard, strict) = (c.hard, c.strict);
            self.get_mut(&c.name.clone(), hard, strict).merge(c);
        }
    }

    pub fn all_hard_ok(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(CheckStats::ok)
    }
}

/// Counts of values per decade, for margin distributions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Keys are `floor(log10(v))` clamped to `[-16, 8]`; `"negative"` and
    /// `"zero"` hold the rest.
    pub bins: BTreeMap<String, u64>,
}

impl Histogram {
    pub fn add(&mut self, v: f64) {
        let key = if v < 0.0 || v.is_nan() {
            "negative".to_string()
        } else if v == 0.0 {
            "zero".to_string()
        } else {
            format!("1e{}", (v.log10().floor() as i32).clamp(-16, 8))
        };
        *self.bins.entry(key).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: Histogram) {
        for (k, v) in other.bins {
            *self.bins.entry(k).or_insert(0) += v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: CheckSet,
    /// Descriptive quantities that are not contracts.
    pub diagnostics: BTreeMap<String, f64>,
    pub histograms: BTreeMap<String, Histogram>,
}

impl SuiteReport {
    pub fn all_hard_ok(&self) -> bool {
        self.checks.all_hard_ok()
    }
}
