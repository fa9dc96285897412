//! Numerical checks, grouped by acceptance criterion.
//!
//! Each criterion function reads its parameters from a validated
//! [`ScenarioConfig`] and returns one record per check. Numerical errors
//! become failing records; nothing here panics on bad numerics.

use flowlab::currents::ConvergenceReport;
use flowlab::Complex64;

use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

mod chern;
mod euler;
mod maslov;
mod models;
mod residue;
mod stokes;
mod superconn;
mod thom;
mod unitary;
mod volumes;

pub use residue::odd_chern_residue;

/// Records of acceptance criterion `n` (1 to 13) under `cfg`.
pub fn criterion(n: u32, cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    match n {
        1 => residue::criterion_1(cfg),
        2 => residue::criterion_2(cfg),
        3 => residue::criterion_3(cfg),
        4 => chern::criterion_4(cfg),
        5 => chern::criterion_5(cfg),
        6 => euler::criterion_6(cfg),
        7 => maslov::criterion_7(cfg),
        8 => unitary::criterion_8(cfg),
        9 => superconn::criterion_9(cfg),
        10 => thom::criterion_10(cfg),
        11 => models::criterion_11(cfg),
        12 => stokes::criterion_12(cfg),
        13 => volumes::criterion_13(cfg),
        _ => Vec::new(),
    }
}

/// All records of the scenario selected by `cfg`.
pub fn scenario_checks(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    cfg.info().criteria.iter().flat_map(|&n| criterion(n, cfg)).collect()
}

pub(crate) fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Turns a fallible check into a record, failing it on error.
pub(crate) fn guarded(name: &str, anchor: &str, f: impl FnOnce() -> flowlab::Result<CheckRecord>) -> CheckRecord {
    f().unwrap_or_else(|e| CheckRecord::error(name, anchor, &e))
}

/// Like [`guarded`] for checks producing several records.
pub(crate) fn guarded_many(name: &str, anchor: &str, f: impl FnOnce() -> flowlab::Result<Vec<CheckRecord>>) -> Vec<CheckRecord> {
    f().unwrap_or_else(|e| vec![CheckRecord::error(name, anchor, &e)])
}

/// Per test function: the pairing at the last time against the prediction,
/// and whether its gap settled over the last step.
pub(crate) fn weak_records(report: &ConvergenceReport, predicted: &[Complex64], label: &str, anchor: &str) -> Vec<CheckRecord> {
    let m = report.t_schedule.len();
    let t_end = report.t_schedule[m - 1];
    let mut recs = Vec::new();
    for (i, gaps) in report.gaps.iter().enumerate() {
        let last = gaps[m - 1];
        let prev = if m > 1 { gaps[m - 2] } else { f64::INFINITY };
        recs.push(CheckRecord::close(
            format!("{label} paired with g_{i} at t = {t_end}"),
            anchor,
            report.values[i][m - 1],
            predicted[i],
            report.tol,
        ));
        recs.push(CheckRecord::flag(
            format!("gap for g_{i} settled at the last step ({prev:.2e} -> {last:.2e})"),
            anchor,
            report.settled(i),
        ));
    }
    recs
}
