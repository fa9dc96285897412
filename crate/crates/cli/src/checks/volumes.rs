//! Flow-tube volumes: bounded tails for the tanh flow on `U(2)` and the
//! Grassmannian flow on `CP^1`, divergence for the radial flow on `R^2`.

use std::f64::consts::PI;

use flowlab::algebra::{c, CMatrix};
use flowlab::currents::{find_maslov_crossings, CrossingOptions};
use flowlab::flows::{grassmann_linear_flow, projector, radial_flow, unitary_tanh_flow_spectral, FlowSpec};
use flowlab::integrate::{flow_tube_volume_between, refine_around, Scheme, TubeData};
use flowlab::spaces::BoxDomain;
use flowlab::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maslov::draw_loop;
use super::{guarded_many, re};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "geometric atomicity";
const TIME_STEP: f64 = 1e-5;
const BASE_STEP: f64 = 1e-6;
const BASE_GRID: usize = 32;

fn circle_domain() -> BoxDomain {
    BoxDomain::new(vec![0.0], vec![2.0 * PI]).expect("nonempty interval")
}

/// Real and imaginary parts of the entries, column-major.
fn embed_matrix(m: &CMatrix) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Base step for a cell: about a hundredth of its width, and on the finest
/// cells a power of two no smaller than two ulps, so that the difference
/// points `theta +- h` and `theta +- h / 2` are exact.
fn cell_step(cell: &BoxDomain, cap: f64) -> f64 {
    let width = cell.hi[0] - cell.lo[0];
    let target = 1e-2 * width;
    if target >= cap {
        return cap;
    }
    let scale = cell.lo[0].abs().max(cell.hi[0].abs());
    let ulp = if scale > 0.0 { f64::EPSILON * 2f64.powi(scale.log2().floor() as i32) } else { f64::MIN_POSITIVE };
    2f64.powi(target.log2().floor() as i32).max(2.0 * ulp)
}

/// Tube volume over `[t0, t1]`, summed over base cells; each cell uses a
/// base step matched to its width.
fn tube_increment<P>(data: &TubeData<'_, P>, t0: f64, t1: f64, cells: &[BoxDomain], scheme: &Scheme) -> Result<f64> {
    let mut total = 0.0;
    for cell in cells {
        let step = cell_step(cell, data.step);
        let local = TubeData { step, ..*data };
        total += flow_tube_volume_between(&local, t0, t1, cell, scheme)?.value.re;
    }
    Ok(total)
}

fn window_records<P>(
    data: &TubeData<'_, P>,
    label: &str,
    schedule: &[f64],
    cells: &[BoxDomain],
    scheme: &Scheme,
    tol: f64,
) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for w in schedule.windows(2) {
        let v = tube_increment(data, w[0], w[1], cells, scheme)?;
        out.push(CheckRecord::bound(format!("{label}: tube volume over [{}, {}]", w[0], w[1]), ANCHOR, v, tol));
    }
    Ok(out)
}

/// The tanh flow on a random loop in `U(2)` crossing `{ker(1 + U) != 0}`.
///
/// Near a crossing at `theta_c` the eigenvalue close to `-1` leaves it at
/// time `t` for `|theta - theta_c|` about `2 e^{-2t} / |crossing speed|`; the
/// base cells are graded down to that scale at the last scheduled time.
/// The section is known to absolute precision about `1e-16`, so the computed
/// increments carry a rounding floor growing like `1e-16 e^{2t}`; the
/// spectral flow keeps that floor along the eigenvalue circle.
fn tanh_records(cfg: &ScenarioConfig, schedule: &[f64], scheme: &Scheme) -> Result<Vec<CheckRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (l, _) = draw_loop(&mut rng)?;
    let opts = CrossingOptions { tol: 1e-15, ..CrossingOptions::default() };
    let crossings = find_maslov_crossings(&|t| Ok(l.eval(t)), &opts)?;
    let t_last = schedule.last().copied().unwrap_or(0.0);
    let finest = crossings.points.iter().map(|p| 2.0 * (-2.0 * t_last).exp() * p.condition).fold(f64::INFINITY, f64::min);
    let base = 2.0 * PI / BASE_GRID as f64;
    let levels = if crossings.points.is_empty() { 0 } else { ((4.0 * base / finest).log2().ceil() as usize).min(60) };
    let centers: Vec<Vec<f64>> =
        crossings.points.iter().flat_map(|p| [-2.0 * PI, 0.0, 2.0 * PI].map(|s| vec![p.point.coords[0] + s])).collect();
    let cells = refine_around(&circle_domain(), BASE_GRID, &centers, levels);
    let flow = FlowSpec::new("U(2)", 4, |t, u: &CMatrix| unitary_tanh_flow_spectral(t, u), |u: &CMatrix| u.trace().re);
    let section = |x: &[f64]| Ok(l.eval(x[0]));
    let embed = |u: &CMatrix| Ok(embed_matrix(u));
    let mut out = Vec::new();
    for strong in [false, true] {
        let data = TubeData { flow: &flow, section: &section, embed: &embed, strong, step: BASE_STEP, time_step: TIME_STEP };
        let label =
            format!("tanh flow, loop in U(2) with {} crossings, {}", crossings.points.len(), if strong { "strong" } else { "weak" });
        out.extend(window_records(&data, &label, schedule, &cells, scheme, cfg.tol("increment"))?);
    }
    Ok(out)
}

/// Lines `[1 : w(theta)]` with `w = a + b e^{i theta}`, `|a| > |b|`: the
/// loop never meets `E- = [0 : 1]`.
fn grassmann_records(cfg: &ScenarioConfig, schedule: &[f64], scheme: &Scheme) -> Result<Vec<CheckRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let b = Complex64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..2.0 * PI));
    let a = Complex64::from_polar(b.norm() + rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0 * PI));
    let flow = FlowSpec::new(
        "CP1",
        2,
        |t, f: &CMatrix| grassmann_linear_flow(t, f, 1),
        |f: &CMatrix| projector(f).map(|p| 2.0 * p[(0, 0)].re - 1.0).unwrap_or(f64::NAN),
    );
    let section = move |x: &[f64]| Ok(CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), a + b * Complex64::from_polar(1.0, x[0])]));
    let embed = |f: &CMatrix| Ok(embed_matrix(&projector(f)?));
    let cells = circle_domain().grid(BASE_GRID);
    let mut out = Vec::new();
    for strong in [false, true] {
        let data = TubeData { flow: &flow, section: &section, embed: &embed, strong, step: BASE_STEP, time_step: TIME_STEP };
        let label = format!("Grassmannian flow, loop in CP^1 missing E-, {}", if strong { "strong" } else { "weak" });
        out.extend(window_records(&data, &label, schedule, &cells, scheme, cfg.tol("increment"))?);
    }
    Ok(out)
}

/// `int e^t sqrt(e^{2t} + 1) dt = (u sqrt(u^2 + 1) + asinh u) / 2` with `u = e^t`.
fn strong_radial_primitive(t: f64) -> f64 {
    let u = t.exp();
    0.5 * (u * (u * u + 1.0).sqrt() + u.asinh())
}

/// The unit circle under `v -> e^t v`: the weak tube over `[t0, t1]` is the
/// annulus of area `pi (e^{2 t1} - e^{2 t0})`; the strong tube adds the fixed
/// circle, giving `2 pi` times the primitive above.
fn radial_records(cfg: &ScenarioConfig, schedule: &[f64], scheme: &Scheme) -> Result<Vec<CheckRecord>> {
    let flow = FlowSpec::new("R2", 2, |t, v: &Vec<f64>| Ok(radial_flow(t, v)), |v: &Vec<f64>| 0.5 * (v[0] * v[0] + v[1] * v[1]));
    let section = |x: &[f64]| Ok(vec![x[0].cos(), x[0].sin()]);
    let embed = |v: &Vec<f64>| Ok(v.clone());
    let cells = circle_domain().grid(BASE_GRID);
    let tol = cfg.tol("divergence");
    let mut out = Vec::new();
    for strong in [false, true] {
        let data = TubeData { flow: &flow, section: &section, embed: &embed, strong, step: BASE_STEP, time_step: TIME_STEP };
        let kind = if strong { "strong" } else { "weak" };
        for w in schedule.windows(2) {
            let v = tube_increment(&data, w[0], w[1], &cells, scheme)?;
            let exact = if strong {
                2.0 * PI * (strong_radial_primitive(w[1]) - strong_radial_primitive(w[0]))
            } else {
                PI * ((2.0 * w[1]).exp() - (2.0 * w[0]).exp())
            };
            out.push(CheckRecord::relative(
                format!("radial flow, {kind}: tube volume over [{}, {}]", w[0], w[1]),
                ANCHOR,
                re(v),
                re(exact),
                tol,
            ));
            // The flowed circle has length at least 2 pi and moves at speed at least 1.
            let floor = 2.0 * PI * (w[1] - w[0]);
            out.push(CheckRecord::flag(
                format!("radial flow, {kind}: tube volume over [{}, {}] at least {floor:.4}", w[0], w[1]),
                ANCHOR,
                v >= floor,
            ));
        }
    }
    Ok(out)
}

pub fn criterion_13(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let schedule = cfg.schedule();
    let scheme = Scheme::gauss(cfg.points());
    let mut out = guarded_many("tanh flow tube", ANCHOR, || tanh_records(cfg, &schedule, &scheme));
    out.extend(guarded_many("Grassmannian flow tube", ANCHOR, || grassmann_records(cfg, &schedule, &scheme)));
    out.extend(guarded_many("radial flow tube", ANCHOR, || radial_records(cfg, &schedule, &scheme)));
    out
}
