//! Odd Chern character of `nabla + i t A sigma` over `S^1`: concentration at
//! the kernel point of `A`, and vanishing mass for invertible `A`.

use std::f64::consts::PI;
use std::sync::Arc;

use flowlab::algebra::{c, CMatrix};
use flowlab::charforms::{chern_character_form, FormField, Parity};
use flowlab::currents::{find_signed_zeros, weak_convergence_report, NewtonOptions};
use flowlab::integrate::{integrate_cells, integrate_form_cells, Scheme};
use flowlab::models::{cayley_circle_datum, circle};
use flowlab::spaces::{BoxDomain, BundleWithConnection, MatMap};
use flowlab::{Complex64, Result};

use super::{guarded, guarded_many, re, weak_records};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "superconnection Chern character";
const BUMP_CENTERS: [f64; 3] = [PI, PI + 0.5, 2.5];
const CELLS: usize = 32;

fn bump(i: usize, theta: f64) -> f64 {
    ((theta - BUMP_CENTERS[i]).cos() - 1.0).exp()
}

fn scalar_datum(f: fn(f64) -> f64) -> MatMap {
    Arc::new(move |x: &[f64]| Ok(CMatrix::from_element(1, 1, c(f(x[0]), 0.0))))
}

fn degree_one(a: MatMap, t: f64) -> FormField {
    chern_character_form(&BundleWithConnection::trivial(1, 1), a, t, Parity::Odd).part(1)
}

pub fn criterion_9(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let scheme = Scheme::gauss(cfg.points());
    let cells = circle().domain.grid(CELLS);
    let mut out = guarded_many("concentration at the kernel point", ANCHOR, || {
        // Oracle: the signed zeros of A, away from its pole at theta = 0.
        let f = |x: &[f64]| Ok(vec![cayley_circle_datum(x[0])]);
        let zeros =
            find_signed_zeros(&f, &BoxDomain::new(vec![0.1], vec![2.0 * PI - 0.1])?, "S1", "angle", 32, &NewtonOptions::default(), 1.0)?;
        let predicted: Vec<Complex64> = (0..3).map(|i| zeros.pair(&|p| Ok(re(bump(i, p.coords[0]))))).collect::<Result<_>>()?;
        let pairing = |t: f64, i: usize| -> Result<Complex64> {
            let g = degree_one(scalar_datum(cayley_circle_datum), t).times_function(move |x| re(bump(i, x[0])));
            Ok(integrate_form_cells(&circle(), &g, &cells, &scheme)?.value)
        };
        let report = weak_convergence_report(&pairing, &predicted, &cfg.schedule(), cfg.tol("weak"))?;
        let mut recs = vec![CheckRecord::integer(
            format!("signed kernel points of A = -cot(theta/2), {} found", zeros.points.len()),
            ANCHOR,
            zeros.signed_count() as i64,
            1,
        )];
        recs.extend(weak_records(&report, &predicted, "ch_1(nabla + i t A sigma)", ANCHOR));
        Ok(recs)
    });
    let t_end = *cfg.schedule().last().expect("validated schedule");
    out.push(guarded("mass for invertible A", ANCHOR, || {
        let form = degree_one(scalar_datum(|theta| 2.0 + theta.cos()), t_end);
        let density = |x: &[f64]| Ok(re(form.evaluate(x)?.coeff(&[0]).norm()));
        let mass = integrate_cells(&cells, &density, &scheme)?.value.re;
        Ok(CheckRecord::bound(format!("L1 mass of ch_1 for A = 2 + cos(theta) at t = {t_end}"), ANCHOR, mass, cfg.tol("mass")))
    }));
    out
}
