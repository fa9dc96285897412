//! Boundary identity of the transgression: `int d(phi* omega ^ eta)` over the
//! flow tube against `phi_t* omega ^ eta - phi_0* omega ^ eta` on the section.

use flowlab::charforms::{pfaffian_form, top_chern_form, FormField};
use flowlab::currents::{find_signed_zeros, NewtonOptions};
use flowlab::exterior::AlternatingForm;
use flowlab::flows::FlowSpec;
use flowlab::integrate::{boundary_check_cells, Scheme};
use flowlab::models::{
    fiberwise_scaling_flow, height_gradient_section, hyperplane_section_embedding, hyperplane_total_bundle, polar_of,
    projective_total_flow, sphere_bundle_vertical, sphere_polar, sphere_tangent_bundle, vector_section_embedding, HyperplaneSection,
};
use flowlab::spaces::{BoxDomain, Parametrization};
use flowlab::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::chern::{find_zeros, polar_cells, sphere_test_function};
use super::euler::random_direction;
use super::guarded_many;
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "transgression operator";
const TUBE_GRID: usize = 4;
const END_LEVELS: usize = 3;

/// Bump test function times `((1 + p_0) / 2)^2`, as a 0-form on the polar
/// parameter box of `S^2`. It vanishes at the south pole, the point at
/// infinity of the stereographic chart: the face `theta = pi` of the tube
/// does not collapse in the total chart (the frame winds around the pole),
/// so test forms must be supported inside the chart.
fn base_bump() -> FormField {
    let base = sphere_polar();
    FormField::new("g", "polar(S^2)", "polar", 2, Some(0), move |u| {
        let x = base.eval(u)?;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let cutoff = (1.0 / (1.0 + r2)).powi(2);
        Ok(AlternatingForm::scalar(2, flowlab::Complex64::new(sphere_test_function(2, &x) * cutoff, 0.0)))
    })
}

/// Uniform cells for the tube; cells graded toward the zeros of the section
/// (where `phi_t` concentrates) for the two ends.
fn records(
    label: &str,
    cfg: &ScenarioConfig,
    flow: &FlowSpec<Vec<f64>>,
    section: &Parametrization,
    omega: &FormField,
    zeros: &[Vec<f64>],
) -> Result<Vec<CheckRecord>> {
    let eta = base_bump();
    let scheme = Scheme::gauss(cfg.points());
    let tube_cells = section.domain.grid(TUBE_GRID);
    let end_cells = polar_cells(&section.domain, zeros, END_LEVELS);
    let mut recs = Vec::new();
    for t in cfg.schedule() {
        let (lhs, rhs) = boundary_check_cells(flow, section, omega, &eta, t, &tube_cells, &end_cells, &scheme)?;
        recs.push(CheckRecord::close(
            format!("{label}: int d(phi* omega ^ eta) over the tube against the end difference, t = {t}"),
            ANCHOR,
            lhs.value,
            rhs.value,
            cfg.tol("boundary"),
        ));
    }
    Ok(recs)
}

pub fn criterion_12(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let section = HyperplaneSection::random(&mut rng);
    let a = random_direction(&mut rng);
    let polar = |z: flowlab::currents::PointCurrent| -> Vec<Vec<f64>> {
        z.points.iter().map(|p| polar_of(p.point.coords[0], p.point.coords[1])).collect()
    };
    let mut out = guarded_many("top Chern transgression", ANCHOR, || {
        let omega = top_chern_form(&hyperplane_total_bundle()?);
        let zeros = polar(find_zeros(&section)?);
        let flow = projective_total_flow(2, 1, 1.0);
        records("c_1(tau_perp) on P(O(1) + C)", cfg, &flow, &hyperplane_section_embedding(section), &omega, &zeros)
    });
    out.extend(guarded_many("Euler transgression", ANCHOR, || {
        let omega = pfaffian_form(&sphere_bundle_vertical(&sphere_tangent_bundle(2)?, true)?)?;
        let xi = height_gradient_section(a);
        let f = {
            let xi = xi.clone();
            move |x: &[f64]| Ok(xi(x))
        };
        let zeros = polar(find_signed_zeros(&f, &BoxDomain::cube(2, -4.0, 4.0), "S2", "stereo", 24, &NewtonOptions::default(), 1.0)?);
        let embedding = vector_section_embedding("grad <a, p>", "S(R+TS2)", xi);
        records("Pf of the vertical bundle of S(R + TS^2)", cfg, &fiberwise_scaling_flow("S(R+TS2)", 2, 2, 1.0), &embedding, &omega, &zeros)
    }));
    out
}
