//! Unitary and Grassmannian flows: semigroup law, unitarity, monotone
//! potentials and limit classification.

use flowlab::algebra::{self, c, CMatrix};
use flowlab::flows::{
    chordal_distance, classify_unitary_stratum, fa_flow, grassmann_limit, grassmann_linear_flow, grassmann_potential, reflection,
    unitary_potential, unitary_tanh_flow, STRATUM_TOL,
};
use flowlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::guarded_many;
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const ANCHOR: &str = "tanh flow on U(E)";
const LIMIT_TIME: f64 = 20.0;
/// `ker(1 + U)` is repelling: rounding there grows like `e^{2t}`, while the
/// attracting eigenvalues converge like `e^{-2t}`. Both stay below 1e-7 at t = 9.
const KERNEL_LIMIT_TIME: f64 = 9.0;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = random_matrix(rng, n, n);
    let h = (&m + m.adjoint()).scale(0.5 * std::f64::consts::PI);
    algebra::expm(&h.map(|z| z * c(0.0, 1.0)))
}

/// Hermitian `A = W diag(a) W*` with eigenvalues of both signs, `0.5 <= |a| <= 2`,
/// pairwise separated, and the eigenbasis `W`.
fn random_mixed_sign_hermitian(rng: &mut ChaCha8Rng, n: usize) -> (CMatrix, CMatrix, Vec<f64>) {
    let mut values: Vec<f64> = Vec::new();
    while values.len() < n {
        let mag: f64 = rng.gen_range(0.5..2.0);
        let v = if values.len().is_multiple_of(2) { -mag } else { mag };
        if values.iter().all(|w| (w - v).abs() > 0.2) {
            values.push(v);
        }
    }
    values.sort_by(f64::total_cmp);
    let w = random_unitary(rng, n);
    let a = &w * algebra::diag_real(&values) * w.adjoint();
    (algebra::symmetrize(&a), w, values)
}

fn unitarity_defect(u: &CMatrix) -> f64 {
    algebra::max_norm(&(u.adjoint() * u - algebra::identity(u.nrows())))
}

pub fn criterion_8(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    out.extend(guarded_many("unitary flow suite", ANCHOR, || unitary_records(cfg)));
    out.extend(guarded_many("Grassmann flow suite", ANCHOR, || grassmann_records(cfg)));
    out
}

fn unitary_records(cfg: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let n = cfg.dim("n");
    let samples = cfg.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (a, basis, values) = random_mixed_sign_hermitian(&mut rng, n);
    let negative: Vec<usize> = (0..n).filter(|&i| values[i] < 0.0).collect();
    let target = reflection(&basis, &negative);

    let (mut semi_tanh, mut semi_fa, mut unit_tanh, mut unit_fa, mut reduce) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut monotone = true;
    let (mut limit_gap, mut classified) = (0.0f64, true);
    for _ in 0..samples {
        let u = random_unitary(&mut rng, n);
        let s: f64 = rng.gen_range(0.0..2.0);
        let t: f64 = rng.gen_range(0.0..2.0);
        let direct = unitary_tanh_flow(s + t, &u)?;
        let composed = unitary_tanh_flow(s, &unitary_tanh_flow(t, &u)?)?;
        semi_tanh = semi_tanh.max(algebra::max_norm(&(direct - composed)));
        let direct = fa_flow(s + t, &u, &a)?;
        let inner = fa_flow(t, &u, &a)?;
        semi_fa = semi_fa.max(algebra::max_norm(&(&direct - fa_flow(s, &inner, &a)?)));
        unit_tanh = unit_tanh.max(unitarity_defect(&unitary_tanh_flow(s + t, &u)?));
        unit_fa = unit_fa.max(unitarity_defect(&direct));
        let id = algebra::identity(n);
        let th = c(0.7f64.tanh(), 0.0);
        let closed = (id.map(|z| z * th) + &u) * algebra::inverse(&(&id + u.map(|z| z * th)))?;
        reduce = reduce.max(algebra::max_norm(&(closed - fa_flow(0.7, &u, &id)?)));
        // The potential is non-decreasing along the sampled trajectory.
        let p0 = unitary_potential(&u, &a);
        let p1 = unitary_potential(&inner, &a);
        let p2 = unitary_potential(&direct, &a);
        monotone &= p1 >= p0 - 1e-12 && p2 >= p1 - 1e-12;
        let limit = fa_flow(LIMIT_TIME, &u, &a)?;
        limit_gap = limit_gap.max(algebra::max_norm(&(&limit - &target)));
        let rec = classify_unitary_stratum(&limit, Some(&basis), STRATUM_TOL)?;
        classified &= rec.k == negative.len() && rec.nodes == negative.iter().map(|i| i + 1).collect::<Vec<_>>();
    }

    // Critical reflections U_I are fixed points of the f_A flow.
    let mut fixed = 0.0f64;
    for mask in 0..(1usize << n) {
        let indices: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let r = reflection(&basis, &indices);
        for t in [0.25, 0.5, 1.0] {
            fixed = fixed.max(algebra::max_norm(&(fa_flow(t, &r, &a)? - &r)));
        }
    }

    // tanh flow limit: -1 on ker(1 + U), +1 on its complement.
    let w = random_unitary(&mut rng, n);
    let mut phases = vec![c(-1.0, 0.0)];
    phases.extend((1..n).map(|_| c(0.0, rng.gen_range(-2.5..2.5)).exp()));
    let u = &w * algebra::diag(&phases) * w.adjoint();
    let tanh_target = reflection(&w, &[0]);
    let tanh_limit = algebra::max_norm(&(unitary_tanh_flow(KERNEL_LIMIT_TIME, &u)? - tanh_target));
    let kernel_dim = classify_unitary_stratum(&u, None, STRATUM_TOL)?.k;
    let scalar = (unitary_tanh_flow(LIMIT_TIME, &CMatrix::from_element(1, 1, c(0.0, 1.0)))?[(0, 0)] - 1.0).norm();

    let semigroup = cfg.tol("semigroup");
    let unitarity = cfg.tol("unitarity");
    let limit = cfg.tol("limit");
    Ok(vec![
        CheckRecord::bound(format!("tanh flow semigroup defect over {samples} samples"), ANCHOR, semi_tanh, semigroup),
        CheckRecord::bound(format!("f_A flow semigroup defect over {samples} samples"), ANCHOR, semi_fa, semigroup),
        CheckRecord::bound("tanh flow unitarity defect", ANCHOR, unit_tanh, unitarity),
        CheckRecord::bound("f_A flow unitarity defect", ANCHOR, unit_fa, unitarity),
        CheckRecord::bound("f_A flow with A = I against (tanh t + U)(1 + U tanh t)^-1 at t = 0.7", ANCHOR, reduce, unitarity),
        CheckRecord::flag("Re Tr(A U) non-decreasing along sampled trajectories", ANCHOR, monotone),
        CheckRecord::bound(
            format!("f_A flow at t = {LIMIT_TIME} against the reflection on the negative eigenspace of A"),
            ANCHOR,
            limit_gap,
            limit,
        ),
        CheckRecord::flag("f_A limits classified into the stratum of the negative eigenspace", ANCHOR, classified),
        CheckRecord::bound("critical reflections fixed by the f_A flow for t <= 1", ANCHOR, fixed, cfg.tol("reflection")),
        CheckRecord::integer("dim ker(1 + U) of the tanh-flow fixture", ANCHOR, kernel_dim as i64, 1),
        CheckRecord::bound(
            format!("tanh flow at t = {KERNEL_LIMIT_TIME} against -1 on ker(1 + U), +1 elsewhere"),
            ANCHOR,
            tanh_limit,
            limit,
        ),
        CheckRecord::bound(format!("tanh flow of U = i at t = {LIMIT_TIME} against 1"), ANCHOR, scalar, limit),
    ])
}

fn grassmann_records(cfg: &ScenarioConfig) -> Result<Vec<CheckRecord>> {
    let n = cfg.dim("n").max(2);
    let samples = cfg.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let (mut semi, mut limit_gap) = (0.0f64, 0.0f64);
    let mut monotone = true;
    for i in 0..samples {
        let p = rng.gen_range(1..n);
        let k = rng.gen_range(1..n);
        let mut frame = random_matrix(&mut rng, n, k);
        // Every third sample has a column inside E-, exercising the kernel part of the limit.
        if i % 3 == 0 {
            for r in 0..p {
                frame[(r, 0)] = c(0.0, 0.0);
            }
        }
        let s: f64 = rng.gen_range(0.0..2.0);
        let t: f64 = rng.gen_range(0.0..2.0);
        let direct = grassmann_linear_flow(s + t, &frame, p)?;
        let inner = grassmann_linear_flow(t, &frame, p)?;
        semi = semi.max(chordal_distance(&direct, &grassmann_linear_flow(s, &inner, p)?)?);
        let (f0, f1, f2) = (grassmann_potential(&frame, p)?, grassmann_potential(&inner, p)?, grassmann_potential(&direct, p)?);
        monotone &= f1 >= f0 - 1e-12 && f2 >= f1 - 1e-12;
        let flowed = grassmann_linear_flow(LIMIT_TIME, &frame, p)?;
        limit_gap = limit_gap.max(chordal_distance(&flowed, &grassmann_limit(&frame, p, 1e-9)?)?);
    }
    Ok(vec![
        CheckRecord::bound(format!("Grassmann flow semigroup defect (chordal) over {samples} samples"), ANCHOR, semi, cfg.tol("semigroup")),
        CheckRecord::flag("Re Tr(eps P_L) non-decreasing along sampled trajectories", ANCHOR, monotone),
        CheckRecord::bound(
            format!("Grassmann flow at t = {LIMIT_TIME} against the predicted critical subspace (chordal)"),
            ANCHOR,
            limit_gap,
            cfg.tol("limit"),
        ),
    ])
}
