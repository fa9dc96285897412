//! Check records and the report document.

use std::io::Write;
use std::path::Path;

use flowlab::Complex64;
use serde::{Deserialize, Serialize};

/// One numerical check: `computed` against `expected` within `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Topic of the underlying identity.
    pub paper_anchor: String,
    pub computed: Complex64,
    pub expected: Complex64,
    pub tolerance: f64,
    pub pass: bool,
    /// Compare `|computed - expected| / |expected|` instead of the absolute gap.
    #[serde(skip)]
    pub relative: bool,
    /// Error text of a check that could not be evaluated.
    #[serde(skip)]
    pub breakdown: Option<String>,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl CheckRecord {
    /// `|computed - expected| <= tol`.
    pub fn close(name: impl Into<String>, anchor: &str, computed: Complex64, expected: Complex64, tol: f64) -> Self {
        let gap = (computed - expected).norm();
        CheckRecord {
            name: name.into(),
            paper_anchor: anchor.into(),
            computed,
            expected,
            tolerance: tol,
            relative: false,
            pass: gap.is_finite() && gap <= tol,
            breakdown: None,
        }
    }

    /// `|computed - expected| <= tol |expected|`.
    pub fn relative(name: impl Into<String>, anchor: &str, computed: Complex64, expected: Complex64, tol: f64) -> Self {
        let gap = (computed - expected).norm() / expected.norm();
        CheckRecord { relative: true, pass: gap.is_finite() && gap <= tol, ..Self::close(name, anchor, computed, expected, tol) }
    }

    /// `value <= bound`, recorded as a gap from zero.
    pub fn bound(name: impl Into<String>, anchor: &str, value: f64, bound: f64) -> Self {
        CheckRecord { pass: value.is_finite() && value <= bound, ..Self::close(name, anchor, re(value), re(0.0), bound) }
    }

    /// Exact equality of integers.
    pub fn integer(name: impl Into<String>, anchor: &str, computed: i64, expected: i64) -> Self {
        CheckRecord { pass: computed == expected, ..Self::close(name, anchor, re(computed as f64), re(expected as f64), 0.0) }
    }

    /// A boolean property.
    pub fn flag(name: impl Into<String>, anchor: &str, holds: bool) -> Self {
        let v = if holds { 1.0 } else { 0.0 };
        CheckRecord { pass: holds, ..Self::close(name, anchor, re(v), re(1.0), 0.0) }
    }

    /// A check that could not be evaluated; the error text goes into the name
    /// so that the report stays self-describing.
    pub fn error(name: impl Into<String>, anchor: &str, err: &flowlab::Error) -> Self {
        let name = name.into();
        CheckRecord {
            name: format!("{name} [error: {err}]"),
            paper_anchor: anchor.into(),
            computed: Complex64::new(f64::NAN, f64::NAN),
            expected: Complex64::new(f64::NAN, f64::NAN),
            tolerance: 0.0,
            pass: false,
            relative: false,
            breakdown: err.is_breakdown().then(|| err.to_string()),
        }
    }

    /// Absolute or relative gap, as used for the verdict.
    pub fn gap(&self) -> f64 {
        let g = (self.computed - self.expected).norm();
        if self.relative {
            g / self.expected.norm()
        } else {
            g
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub flowlab: String,
    pub lab: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions { flowlab: flowlab::VERSION.to_string(), lab: env!("CARGO_PKG_VERSION").to_string() }
    }
}

/// Outcome of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub config: crate::config::ScenarioConfig,
    pub checks: Vec<CheckRecord>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub timing: f64,
    pub versions: Versions,
}

impl Report {
    /// True when some check failed because the numerics broke down.
    pub fn breakdown(&self) -> bool {
        self.checks.iter().any(|c| c.breakdown.is_some())
    }

    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// The JSON document with the timing field zeroed, for determinism checks.
    pub fn to_json_untimed(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&Report { timing: 0.0, ..self.clone() })
    }

    pub fn write_json(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Flat table: scenario, check, computed_re, computed_im, expected_re, expected_im, tol, pass.
    pub fn write_csv<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scenario", "check", "computed_re", "computed_im", "expected_re", "expected_im", "tol", "pass"])?;
        for c in &self.checks {
            out.write_record([
                self.scenario.clone(),
                c.name.clone(),
                c.computed.re.to_string(),
                c.computed.im.to_string(),
                c.expected.re.to_string(),
                c.expected.im.to_string(),
                c.tolerance.to_string(),
                c.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
