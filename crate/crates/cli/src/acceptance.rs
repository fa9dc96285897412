//! The thirteen acceptance criteria, each run under its scenario's default
//! configuration.

use std::time::{Duration, Instant};

use crate::catalog::scenario_for_criterion;
use crate::checks;
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

pub const CRITERIA: std::ops::RangeInclusive<u32> = 1..=13;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub number: u32,
    pub title: &'static str,
    pub records: Vec<CheckRecord>,
    pub elapsed: Duration,
    /// Wall-clock budget of the criterion, when it has one.
    pub budget: Option<Duration>,
}

impl CriterionOutcome {
    pub fn pass(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.pass) && self.budget.is_none_or(|b| self.elapsed <= b)
    }

    /// The record with the largest gap relative to its tolerance.
    pub fn worst(&self) -> Option<&CheckRecord> {
        let score = |r: &CheckRecord| {
            let g = r.gap();
            if !r.pass || !g.is_finite() {
                f64::INFINITY
            } else if r.tolerance > 0.0 {
                g / r.tolerance
            } else {
                0.0
            }
        };
        self.records.iter().max_by(|a, b| score(a).total_cmp(&score(b)))
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let failed = self.records.iter().filter(|r| !r.pass).count();
        let worst = self
            .worst()
            .map(|r| format!("worst: {} gap {:.3e} (tol {:.1e})", r.name, r.gap(), r.tolerance))
            .unwrap_or_else(|| "no checks".into());
        let budget = match self.budget {
            Some(b) => format!(" / budget {:.0}s", b.as_secs_f64()),
            None => String::new(),
        };
        format!(
            "criterion {:>2} {verdict}  {:<38} {}/{} checks  {:.1}s{budget}  {worst}{}",
            self.number,
            self.title,
            self.records.len() - failed,
            self.records.len(),
            self.elapsed.as_secs_f64(),
            if failed > 0 { format!("  [{failed} failed]") } else { String::new() }
        )
    }
}

pub fn title(n: u32) -> &'static str {
    match n {
        1 => "odd Chern residue = 1, k = 1, 2, 3",
        2 => "circle identity, n = 1..5",
        3 => "weighted supertrace identity",
        4 => "CP^n residue and curvature at [0:1]",
        5 => "top Chern transgression over S^2",
        6 => "Chern-Gauss-Bonnet",
        7 => "Maslov spark equation",
        8 => "unitary and Grassmannian flows",
        9 => "superconnection localization",
        10 => "Mathai-Quillen form",
        11 => "blow-up local model identities",
        12 => "transgression boundary identity",
        13 => "atomicity volumes",
        _ => "unknown criterion",
    }
}

fn budget(n: u32) -> Option<Duration> {
    match n {
        // 1 s + 30 s + 5 min for k = 1, 2, 3.
        1 => Some(Duration::from_secs(331)),
        2 => Some(Duration::from_secs(1)),
        _ => None,
    }
}

/// Runs criterion `n` under the default configuration of its scenario.
pub fn run_criterion(n: u32) -> CriterionOutcome {
    let start = Instant::now();
    let records = match scenario_for_criterion(n) {
        Some(id) => checks::criterion(n, &ScenarioConfig::default_for(id)),
        None => Vec::new(),
    };
    CriterionOutcome { number: n, title: title(n), records, elapsed: start.elapsed(), budget: budget(n) }
}
