//! Maslov spark equation for random loops in `U(2)`: the integral of the
//! Maslov form against signed crossings of `{ker(1 + U) != 0}`.

use std::sync::Arc;

use flowlab::charforms::maslov_form;
use flowlab::currents::{det_winding, find_maslov_crossings, CrossingOptions, PointCurrent};
use flowlab::integrate::{integrate_form_cells, Scheme};
use flowlab::models::{circle, RandomLoop};
use flowlab::spaces::{BundleWithConnection, MatMap};
use flowlab::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{guarded_many, re};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "Maslov spark equation";
/// Largest accepted `1 / |ds/dtheta|` at a crossing; beyond it the loop is redrawn.
const MAX_CROSSING_CONDITION: f64 = 1e3;
const MAX_DRAWS: usize = 100;

/// Draws loops until one has only simple, transversal crossings.
pub(crate) fn draw_loop(rng: &mut ChaCha8Rng) -> Result<(RandomLoop, PointCurrent)> {
    let mut last = Error::DegenerateCrossing { theta: f64::NAN };
    for _ in 0..MAX_DRAWS {
        let l = RandomLoop::random(rng);
        let u = |t: f64| Ok(l.eval(t));
        match find_maslov_crossings(&u, &CrossingOptions::default()) {
            Ok(c) => match c.points.iter().find(|p| p.condition > MAX_CROSSING_CONDITION) {
                None => return Ok((l, c)),
                Some(p) => last = Error::DegenerateCrossing { theta: p.point.coords[0] },
            },
            Err(e @ Error::DegenerateCrossing { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

pub fn criterion_7(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tol("integer");
    let mut out = Vec::new();
    for i in 0..cfg.dim("loops") {
        let drawn = draw_loop(&mut rng);
        out.extend(guarded_many(&format!("loop {i}"), ANCHOR, || {
            let (l, crossings) = drawn?;
            let ev = l.clone();
            let u: MatMap = Arc::new(move |x: &[f64]| Ok(ev.eval(x[0])));
            let form = maslov_form(u, &BundleWithConnection::trivial(1, 2));
            let p = circle();
            let cells = p.domain.grid(32);
            let integral = integrate_form_cells(&p, &form, &cells, &Scheme::gauss(cfg.points()))?.value;
            let count = crossings.signed_count() as i64;
            let nearest = integral.re.round();
            let winding = det_winding(&|t| Ok(l.eval(t)), 4096)?;
            Ok(vec![
                CheckRecord::close(format!("loop {i}: (1/2 pi i) int tr U^-1 dU is an integer"), ANCHOR, integral, re(nearest), tol),
                CheckRecord::integer(
                    format!("loop {i}: quadrature against {} signed crossings", crossings.points.len()),
                    ANCHOR,
                    nearest as i64,
                    count,
                ),
                CheckRecord::integer(
                    format!("loop {i}: signed crossings against the winding of det U"),
                    ANCHOR,
                    count,
                    winding.round() as i64,
                ),
            ])
        }));
    }
    out
}
