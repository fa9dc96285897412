//! Scenario runner for flowlab: configuration, checks, reports and the
//! acceptance suite shared by the `lab` binary and the test harness.

pub mod acceptance;
pub mod catalog;
pub mod checks;
pub mod config;
pub mod report;

use std::time::Instant;

pub use catalog::{list_scenarios, ScenarioId};
pub use config::{ConfigError, ScenarioConfig};
pub use report::{CheckRecord, Report, Versions};

/// Process exit codes of `lab`.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BREAKDOWN: i32 = 3;
}

/// Runs every check of the configured scenario. Failures are recorded, never raised.
pub fn run(cfg: &ScenarioConfig) -> Report {
    let start = Instant::now();
    let checks = checks::scenario_checks(cfg);
    Report {
        scenario: cfg.scenario.to_string(),
        config: cfg.clone(),
        checks,
        timing: start.elapsed().as_secs_f64(),
        versions: Versions::default(),
    }
}

/// Exit code for a finished report.
pub fn exit_code(report: &Report) -> i32 {
    if report.pass() {
        exit::PASS
    } else if report.breakdown() {
        exit::BREAKDOWN
    } else {
        exit::FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowlab::Complex64;

    fn report(checks: Vec<CheckRecord>) -> Report {
        let cfg = ScenarioConfig::default_for(ScenarioId::BlowupModels);
        Report { scenario: cfg.scenario.to_string(), config: cfg, checks, timing: 0.0, versions: Versions::default() }
    }

    #[test]
    fn exit_codes_distinguish_failure_from_breakdown() {
        let one = Complex64::new(1.0, 0.0);
        let ok = CheckRecord::close("a", "x", one, one, 1e-9);
        let bad = CheckRecord::close("b", "x", one, one * 2.0, 1e-9);
        let broke = CheckRecord::error("c", "x", &flowlab::Error::FlowBreakdown { t: 1.0 });
        let plain = CheckRecord::error("d", "x", &flowlab::Error::Domain("outside".into()));
        assert_eq!(exit_code(&report(vec![ok.clone()])), exit::PASS);
        assert_eq!(exit_code(&report(vec![ok.clone(), bad.clone()])), exit::FAILED);
        assert_eq!(exit_code(&report(vec![ok.clone(), plain])), exit::FAILED);
        assert_eq!(exit_code(&report(vec![bad, broke])), exit::BREAKDOWN);
        assert_eq!(exit_code(&report(Vec::new())), exit::FAILED);
    }

    #[test]
    fn run_is_deterministic_given_the_seed() {
        let mut cfg = ScenarioConfig::default_for(ScenarioId::BlowupModels);
        cfg.seed = 7;
        let a = run(&cfg).to_json_untimed().unwrap();
        let b = run(&cfg).to_json_untimed().unwrap();
        assert_eq!(a, b);
    }
}
