//! Blow-up local models: exact identities of `psi` and `Psi`, flowline level
//! points against time stepping, and continuity of `theta_delta` at `lambda = 0`.

use flowlab::flows::local_model_flow;
use flowlab::resolution::{flowline_level_point, level, psi, LocalModel, ModelPoint};
use flowlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::guarded_many;
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "blow-up local model";
const DELTA: f64 = 0.5;
const EPSILON: f64 = 0.8;
const FLOWLINE_SAMPLES: usize = 200;
const THETA_SAMPLES: usize = 50;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 0.1 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn distance(a: &ModelPoint, b: &ModelPoint) -> f64 {
    let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    d(&a.0, &b.0).max(d(&a.1, &b.1)).max(d(&a.2, &b.2))
}

pub fn criterion_11(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    guarded_many("blow-up model suite", ANCHOR, || records(cfg))
}

/// Time-stepping oracle: bisect `s` with `f(gamma(s, x, y, z)) = t`, then flow.
fn flow_to_level(x: &[f64], y: &[f64], z: &[f64], t: f64) -> ModelPoint {
    let f = |s: f64| {
        let (a, b, _) = local_model_flow(s, x, y, z);
        level(&a, &b) - t
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) > 0.0 {
        lo *= 2.0;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    local_model_flow(0.5 * (lo + hi), x, y, z)
}

fn records(cfg: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let (k, m, p) = (cfg.dim("k"), cfg.dim("m"), cfg.dim("p"));
    let model = LocalModel::new(k, m, p, DELTA, EPSILON)?;
    let samples = cfg.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (mut psi_q, mut psi_t, mut big_level, mut big_q) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut inside = true;
    for _ in 0..samples {
        let t = rng.gen_range(-DELTA..DELTA);
        let q = rng.gen_range(0.0..EPSILON);
        let (r, s) = psi(t, q)?;
        psi_q = psi_q.max((r * s - q).abs());
        psi_t = psi_t.max((0.5 * (r * r - s * s) - t).abs());
        let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, y, _) = model.family_blowup(t, q, &unit(&mut rng, k), &unit(&mut rng, m), &z)?;
        big_level = big_level.max((level(&x, &y) - t).abs());
        big_q = big_q.max((norm(&x) * norm(&y) - q).abs());
        inside &= model.contains(&x, &y, 1e-12);
    }

    let (mut flowline, mut invariant) = (0.0f64, 0.0f64);
    for _ in 0..FLOWLINE_SAMPLES {
        let x: Vec<f64> = unit(&mut rng, k).iter().map(|v| v * rng.gen_range(0.2..1.2)).collect();
        let y: Vec<f64> = unit(&mut rng, m).iter().map(|v| v * rng.gen_range(0.2..1.2)).collect();
        let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = rng.gen_range(-DELTA..DELTA);
        let got = flowline_level_point(&x, &y, &z, t)?;
        flowline = flowline.max(distance(&got, &flow_to_level(&x, &y, &z, t)));
        invariant = invariant.max((norm(&got.0) * norm(&got.1) - norm(&x) * norm(&y)).abs());
    }

    // Section phi_0(a, b) = (a, alpha(a, b), beta(a, b)) with b in R^p.
    let c0 = unit(&mut rng, m).iter().map(|v| v * 0.4).collect::<Vec<f64>>();
    let lin: Vec<Vec<f64>> = (0..m).map(|_| (0..k + p).map(|_| rng.gen_range(-0.2..0.2)).collect()).collect();
    let alpha = move |a: &[f64], b: &[f64]| -> Vec<f64> {
        let ab: Vec<f64> = a.iter().chain(b).copied().collect();
        (0..m).map(|i| c0[i] + lin[i].iter().zip(&ab).map(|(l, v)| l * v).sum::<f64>() + 0.1 * (ab.iter().sum::<f64>()).sin()).collect()
    };
    let beta = |a: &[f64], b: &[f64]| -> Vec<f64> { b.iter().enumerate().map(|(i, v)| v + 0.3 * a[i % a.len().max(1)].powi(2)).collect() };
    let (mut level_defect, mut composition, mut origin, mut continuity, mut one_sided) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..THETA_SAMPLES {
        let v = unit(&mut rng, k);
        let b: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let at = |lambda: f64| model.theta_delta(lambda, &v, &b, &alpha, &beta);
        let zero = at(0.0)?;
        let expected: ModelPoint = (v.iter().map(|x| x * (2.0 * DELTA).sqrt()).collect(), vec![0.0; m], beta(&vec![0.0; k], &b));
        origin = origin.max(distance(&zero, &expected));
        let lambda = rng.gen_range(0.05..1.0);
        let th = at(lambda)?;
        level_defect = level_defect.max((level(&th.0, &th.1) - DELTA).abs());
        let a: Vec<f64> = v.iter().map(|x| x * lambda).collect();
        composition = composition.max(distance(&th, &flowline_level_point(&a, &alpha(&a, &b), &beta(&a, &b), DELTA)?));
        // Continuity and a one-sided derivative at the corner lambda = 0.
        let h = 1e-6;
        let (p1, p2) = (at(h)?, at(0.5 * h)?);
        continuity = continuity.max(distance(&p1, &zero));
        let quotient = |q: &ModelPoint, step: f64| -> Vec<f64> {
            [(&q.0, &zero.0), (&q.1, &zero.1), (&q.2, &zero.2)]
                .iter()
                .flat_map(|(u, w)| u.iter().zip(w.iter()).map(|(a, b)| (a - b) / step).collect::<Vec<_>>())
                .collect()
        };
        let (d1, d2) = (quotient(&p1, h), quotient(&p2, 0.5 * h));
        one_sided = one_sided.max(d1.iter().zip(&d2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }

    let identity = cfg.tol("identity");
    let continuity_tol = cfg.tol("continuity");
    Ok(vec![
        CheckRecord::bound(format!("psi: max |r s - q| over {samples} samples"), ANCHOR, psi_q, identity),
        CheckRecord::bound(format!("psi: max |(r^2 - s^2)/2 - t| over {samples} samples"), ANCHOR, psi_t, identity),
        CheckRecord::bound(
            format!("Psi: max |f(Psi) - t| over {samples} samples (k, m, p) = ({k}, {m}, {p})"),
            ANCHOR,
            big_level,
            identity,
        ),
        CheckRecord::bound(format!("Psi: max ||x| |y| - q| over {samples} samples"), ANCHOR, big_q, identity),
        CheckRecord::flag("Psi lands in the local model V", ANCHOR, inside),
        CheckRecord::bound(
            format!("flowline level point against bisected time stepping, {FLOWLINE_SAMPLES} samples"),
            ANCHOR,
            flowline,
            cfg.tol("flowline"),
        ),
        CheckRecord::bound("flowline level point preserves |x| |y|", ANCHOR, invariant, identity),
        CheckRecord::bound("theta_delta at lambda = 0 against (v sqrt(2 delta), 0, beta(0, b))", ANCHOR, origin, identity),
        CheckRecord::bound("f(theta_delta) - delta", ANCHOR, level_defect, identity),
        CheckRecord::bound("theta_delta against the flowline level point of phi_0(lambda v, b)", ANCHOR, composition, cfg.tol("flowline")),
        CheckRecord::bound("theta_delta continuity: |theta(1e-6) - theta(0)|", ANCHOR, continuity, continuity_tol),
        CheckRecord::bound("theta_delta one-sided difference defect at lambda = 0 (steps 1e-6, 5e-7)", ANCHOR, one_sided, continuity_tol),
    ])
}
