//! Chern-Gauss-Bonnet: Euler integrals over `S^2` and signed zeros of a
//! gradient field.

use flowlab::charforms::pfaffian_form;
use flowlab::currents::{find_signed_zeros, NewtonOptions};
use flowlab::integrate::{integrate_form, Scheme};
use flowlab::models::{conformal_sphere_tangent_bundle, height_gradient_section, sphere_polar, sphere_tangent_bundle};
use flowlab::spaces::BoxDomain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{guarded, re};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "Chern-Gauss-Bonnet scenario";

/// Unit vector with `|a_0| < 1/2`, so both zeros `+-a` of the height
/// gradient sit well inside the north-pole stereographic chart.
pub(crate) fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let a0: f64 = rng.gen_range(-0.5..0.5);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - a0 * a0).sqrt();
    [a0, r * phi.cos(), r * phi.sin()]
}

pub fn criterion_6(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let n = cfg.dim("n");
    let expected = re(1.0 + if n.is_multiple_of(2) { 1.0 } else { -1.0 });
    let scheme = Scheme::gauss(cfg.points());
    let mut out = Vec::new();
    out.push(guarded("sphere-fiber residue", ANCHOR, || {
        let e = sphere_tangent_bundle(n)?;
        let r = integrate_form(&sphere_polar(), &pfaffian_form(&e)?, &scheme)?;
        Ok(CheckRecord::close(format!("Euler residue of the vertical bundle over S^{n}"), ANCHOR, r.value, expected, cfg.tol("residue")))
    }));
    out.push(guarded("Euler integral of TS^2", ANCHOR, || {
        let r = integrate_form(&sphere_polar(), &pfaffian_form(&conformal_sphere_tangent_bundle())?, &scheme)?;
        Ok(CheckRecord::close(
            "(2 pi)^-1 int Pf over S^2, Levi-Civita in the coordinate frame",
            ANCHOR,
            r.value,
            re(2.0),
            cfg.tol("euler_integral"),
        ))
    }));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = random_direction(&mut rng);
    out.push(guarded("signed zeros of a gradient field on S^2", ANCHOR, || {
        let xi = height_gradient_section(a);
        let f = move |x: &[f64]| Ok(xi(x));
        let zeros = find_signed_zeros(&f, &BoxDomain::cube(2, -4.0, 4.0), "S2", "stereo", 24, &NewtonOptions::default(), 1.0)?;
        Ok(CheckRecord::integer(
            format!("signed zeros of grad <a, p> on S^2, a = ({:.3}, {:.3}, {:.3}), {} zeros", a[0], a[1], a[2], zeros.points.len()),
            ANCHOR,
            zeros.signed_count() as i64,
            2,
        ))
    }));
    out
}
