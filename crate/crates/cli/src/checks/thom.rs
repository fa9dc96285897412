//! Mathai-Quillen form: Gaussian fiber integral, closedness on `TS^2`, and
//! concentration of `s* mu_t` on the zeros of a section.

use flowlab::charforms::mathai_quillen_form;
use flowlab::currents::{find_signed_zeros, weak_convergence_report, NewtonOptions};
use flowlab::integrate::{box_parametrization, integrate_form_cells, Scheme};
use flowlab::models::{height_gradient_section, polar_of, polar_plane, sphere_polar, sphere_tangent_bundle, vector_section_embedding};
use flowlab::spaces::{BoxDomain, BundleWithConnection};
use flowlab::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chern::{polar_cells, sphere_test_function};
use super::euler::random_direction;
use super::{guarded, guarded_many, re, weak_records};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "Mathai-Quillen form";
const CLOSED_SAMPLES: usize = 12;

/// Refinement depth for a Gaussian of width `1 / t` from cells of size about 0.4.
fn levels_for(t: f64) -> usize {
    (t.log2().ceil().max(0.0) as usize) + 3
}

pub fn criterion_10(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let name = format!("fiber integral of mu_t over R^2 at t = {t}");
        out.push(guarded(&name, ANCHOR, || {
            let mu = mathai_quillen_form(&BundleWithConnection::trivial(0, 2).real(), t)?;
            // The Gaussian reaches the compactified boundary for small t; split the box.
            let p = polar_plane(1);
            let r = integrate_form_cells(&p, &mu, &p.domain.grid(4), &Scheme::gauss(cfg.points()))?;
            Ok(CheckRecord::close(name.clone(), ANCHOR, r.value, re(1.0), cfg.tol("fiber_integral")))
        }));
    }
    out.push(guarded("closedness of mu_t on TS^2", ANCHOR, || {
        let mu = mathai_quillen_form(&sphere_tangent_bundle(2)?, 1.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let points: Vec<Vec<f64>> = (0..CLOSED_SAMPLES).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let worst = points.iter().map(|p| mu.closedness_residual(p)).collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max);
        Ok(CheckRecord::bound(format!("max |d mu_1| on TS^2 over {CLOSED_SAMPLES} points"), ANCHOR, worst, cfg.tol("closed")))
    }));
    out.extend(guarded_many("concentration of s* mu_t", ANCHOR, || concentration(cfg)));
    out
}

fn concentration(cfg: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = random_direction(&mut rng);
    let xi = height_gradient_section(a);
    let f = {
        let xi = xi.clone();
        move |x: &[f64]| Ok(xi(x))
    };
    let zeros = find_signed_zeros(&f, &BoxDomain::cube(2, -4.0, 4.0), "S2", "stereo", 24, &NewtonOptions::default(), 1.0)?;
    let predicted: Vec<Complex64> = (0..3).map(|i| zeros.pair(&|p| Ok(re(sphere_test_function(i, &p.coords))))).collect::<Result<_>>()?;
    let centers: Vec<Vec<f64>> = zeros.points.iter().map(|p| polar_of(p.point.coords[0], p.point.coords[1])).collect();
    let bundle = sphere_tangent_bundle(2)?;
    let embedding = vector_section_embedding("grad <a, p>", "TS2-total", xi);
    let scheme = Scheme::gauss(8);
    let pairing = |t: f64, i: usize| -> Result<Complex64> {
        let pulled = mathai_quillen_form(&bundle, t)?.pullback(&embedding)?;
        let base = sphere_polar();
        let g = pulled.times_function(move |u| re(sphere_test_function(i, &base.eval(u).unwrap_or_else(|_| vec![f64::NAN; 2]))));
        let cells = polar_cells(&embedding.domain, &centers, levels_for(t));
        Ok(integrate_form_cells(&box_parametrization(&embedding.domain, "polar(S^2)", 1.0), &g, &cells, &scheme)?.value)
    };
    let report = weak_convergence_report(&pairing, &predicted, &cfg.schedule(), cfg.tol("weak"))?;
    let mut recs = vec![CheckRecord::integer(
        format!("signed zeros of grad <a, p>, a = ({:.3}, {:.3}, {:.3})", a[0], a[1], a[2]),
        ANCHOR,
        zeros.signed_count() as i64,
        2,
    )];
    recs.extend(weak_records(&report, &predicted, "s* mu_t", ANCHOR));
    Ok(recs)
}
