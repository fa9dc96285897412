//! Top Chern class: the residue over `CP^n`, the curvature of `tau^perp` at
//! `[0:1]`, and the flowed section of `O(1)` over `S^2`.

use std::f64::consts::PI;

use flowlab::charforms::{top_chern_form, FormField};
use flowlab::currents::{find_signed_zeros, weak_convergence_report, NewtonOptions, PointCurrent};
use flowlab::integrate::{flowed_section, integrate_form, integrate_form_cells, refine_around, Integral, Scheme};
use flowlab::models::{
    dz, dzbar, hyperplane_bundle, hyperplane_section_embedding, hyperplane_total_bundle, polar_of, polar_plane, projective_total_flow,
    sphere_polar, tau_perp_bundle, HyperplaneSection,
};
use flowlab::spaces::{curvature, BoxDomain};
use flowlab::{Complex64, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{guarded, guarded_many, re, weak_records};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const RESIDUE: &str = "top Chern class scenario: residue = 1";
const CURVATURE: &str = "top Chern class scenario: curvature at [0:1]";
const TRANSGRESSION: &str = "top Chern class scenario: transgression identity";

/// `int_{CP^n} c_n(tau^perp)` over the polar compactification.
pub fn cpn_residue(n: usize, scheme: &Scheme) -> Result<Integral> {
    let e = tau_perp_bundle(n)?;
    integrate_form(&polar_plane(n), &top_chern_form(&e), scheme)
}

pub fn criterion_4(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for n in 1..=cfg.dim("n") {
        let name = format!("int c_{n}(tau_perp) over CP^{n}");
        let scheme = if n == 1 { Scheme::gauss(cfg.points()) } else { Scheme::monte_carlo(cfg.samples(), cfg.seed) };
        let tol = cfg.tol(&format!("residue_n{n}"));
        out.push(guarded(&name, RESIDUE, || {
            let r = cpn_residue(n, &scheme)?;
            let label = if n == 1 { name.clone() } else { format!("{name} (Monte-Carlo)") };
            Ok(CheckRecord::close(label, RESIDUE, r.value, re(1.0), tol))
        }));
        let tol = cfg.tol("curvature");
        out.extend(guarded_many(&format!("curvature of tau_perp at [0:1] on CP^{n}"), CURVATURE, || {
            let e = tau_perp_bundle(n)?;
            let dim = 2 * n;
            let f = curvature(&e, &vec![0.0; dim])?;
            let mut recs = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let expected = dz(dim, i).wedge(&dzbar(dim, j))?;
                    let defect = (f.get(i, j) - &expected).max_abs();
                    recs.push(CheckRecord::bound(
                        format!("CP^{n} curvature entry ({i}, {j}) - dz_{i} ^ dzbar_{j}"),
                        CURVATURE,
                        defect,
                        tol,
                    ));
                }
            }
            Ok(recs)
        }));
    }
    out
}

/// Smooth test functions on `S^2`, in the stereographic chart.
pub(crate) fn sphere_test_function(i: usize, x: &[f64]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let p = [(1.0 - r2) / (1.0 + r2), 2.0 * x[0] / (1.0 + r2), 2.0 * x[1] / (1.0 + r2)];
    match i {
        0 => 1.0,
        1 => p[0],
        _ => (-(p[0] * p[0] + (p[1] - 0.6).powi(2) + (p[2] + 0.8).powi(2))).exp(),
    }
}

/// Graded cells around polar points, with copies across the seam `phi = 0 = 2 pi`.
pub(crate) fn polar_cells(domain: &BoxDomain, centers: &[Vec<f64>], levels: usize) -> Vec<BoxDomain> {
    let mut all = Vec::new();
    for c in centers {
        for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
            all.push(vec![c[0], c[1] + shift]);
        }
    }
    refine_around(domain, 8, &all, levels)
}

/// Refinement depth resolving a concentration of width `e^{-t}` from cells of size about 0.4.
pub(crate) fn levels_for(t: f64) -> usize {
    ((t / std::f64::consts::LN_2).ceil() as usize).max(2) + 1
}

pub fn criterion_5(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let section = HyperplaneSection::random(&mut rng);
    let mut out = Vec::new();
    let integral = guarded("int c_1(O(1)) over S^2", TRANSGRESSION, || {
        let r = integrate_form(&sphere_polar(), &top_chern_form(&hyperplane_bundle()), &Scheme::gauss(cfg.points()))?;
        Ok(CheckRecord::close("int c_1(O(1)) over S^2", TRANSGRESSION, r.value, re(1.0), cfg.tol("chern_integral")))
    });
    let zeros = find_zeros(&section);
    match &zeros {
        Ok(z) => {
            let count = z.signed_count() as i64;
            out.push(CheckRecord::close(
                "int c_1(O(1)) against the signed zero count",
                TRANSGRESSION,
                integral.computed,
                re(count as f64),
                cfg.tol("chern_integral"),
            ));
            out.push(CheckRecord::integer("signed zeros of a random section of O(1)", TRANSGRESSION, count, 1));
        }
        Err(e) => out.push(CheckRecord::error("signed zeros of a random section of O(1)", TRANSGRESSION, e)),
    }
    out.insert(0, integral);
    if let Ok(z) = zeros {
        out.extend(guarded_many("weak convergence of the flowed section", TRANSGRESSION, || flowed_section_records(cfg, section, &z)));
    }
    out
}

pub(crate) fn find_zeros(section: &HyperplaneSection) -> Result<PointCurrent> {
    let s = *section;
    let f = move |x: &[f64]| Ok(s.real_components(x));
    find_signed_zeros(&f, &BoxDomain::cube(2, -4.0, 4.0), "CP1", "graph[0:1]", 16, &NewtonOptions::default(), 1.0)
}

fn flowed_section_records(cfg: &ScenarioConfig, section: HyperplaneSection, zeros: &PointCurrent) -> Result<Vec<CheckRecord>> {
    let omega = top_chern_form(&hyperplane_total_bundle()?);
    let embedding = hyperplane_section_embedding(section);
    let flow = projective_total_flow(2, 1, 1.0);
    let centers: Vec<Vec<f64>> = zeros.points.iter().map(|p| polar_of(p.point.coords[0], p.point.coords[1])).collect();
    let predicted: Vec<Complex64> = (0..3).map(|i| zeros.pair(&|p| Ok(re(sphere_test_function(i, &p.coords))))).collect::<Result<_>>()?;
    let scheme = Scheme::gauss(8);
    let pairing = |t: f64, i: usize| -> Result<Complex64> {
        let g: FormField = omega.times_function(move |x| re(sphere_test_function(i, x)));
        let p = flowed_section(&flow, &embedding, t);
        let cells = polar_cells(&p.domain, &centers, levels_for(t));
        Ok(integrate_form_cells(&p, &g, &cells, &scheme)?.value)
    };
    let schedule = cfg.schedule();
    let report = weak_convergence_report(&pairing, &predicted, &schedule, cfg.tol("weak"))?;
    Ok(weak_records(&report, &predicted, "s_t* c_1(tau_perp)", TRANSGRESSION))
}
