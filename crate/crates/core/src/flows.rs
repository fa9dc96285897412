//! Closed-form Morse-Bott gradient flows on the model spaces and the
//! spectral classifiers of their critical strata.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{self, c, CMatrix, MatrixTag, ScalarFn, Tolerances};
use crate::error::{Error, Result};

/// Default tolerance for spectral stratum membership.
pub const STRATUM_TOL: f64 = 1e-7;

/// Where a point sits relative to a critical stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Critical,
    Stable,
    Unstable,
    Neither,
}

/// Critical stratum with its spectral classifier.
#[derive(Clone)]
pub struct CriticalStratum<P> {
    pub name: String,
    pub codim_stable: usize,
    pub dim_unstable: usize,
    pub classifier: Arc<dyn Fn(&P) -> Membership + Send + Sync>,
}

impl<P> fmt::Debug for CriticalStratum<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CriticalStratum")
            .field("name", &self.name)
            .field("codim_stable", &self.codim_stable)
            .field("dim_unstable", &self.dim_unstable)
            .finish()
    }
}

type FlowFn<P> = Arc<dyn Fn(f64, &P) -> Result<P> + Send + Sync>;
type PotentialFn<P> = Arc<dyn Fn(&P) -> f64 + Send + Sync>;

/// A closed-form flow with its potential and critical strata.
#[derive(Clone)]
pub struct FlowSpec<P> {
    pub space: String,
    pub dim: usize,
    flow: FlowFn<P>,
    potential: PotentialFn<P>,
    pub strata: Vec<CriticalStratum<P>>,
}

impl<P> fmt::Debug for FlowSpec<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowSpec").field("space", &self.space).field("dim", &self.dim).field("strata", &self.strata).finish()
    }
}

impl<P> FlowSpec<P> {
    pub fn new(
        space: impl Into<String>,
        dim: usize,
        flow: impl Fn(f64, &P) -> Result<P> + Send + Sync + 'static,
        potential: impl Fn(&P) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FlowSpec { space: space.into(), dim, flow: Arc::new(flow), potential: Arc::new(potential), strata: Vec::new() }
    }

    pub fn with_stratum(mut self, s: CriticalStratum<P>) -> Self {
        self.strata.push(s);
        self
    }

    pub fn apply(&self, t: f64, p: &P) -> Result<P> {
        (self.flow)(t, p)
    }

    pub fn potential(&self, p: &P) -> f64 {
        (self.potential)(p)
    }
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    algebra::validate(u, MatrixTag::Unitary, &Tolerances::default())
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    algebra::validate(a, MatrixTag::Hermitian, &Tolerances::default())
}

/// Smallest singular value relative to the largest.
fn relative_conditioning(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// `(tanh t + U)(1 + U tanh t)^{-1}`, the gradient flow of `Re Tr U`.
pub fn unitary_tanh_flow(t: f64, u: &CMatrix) -> Result<CMatrix> {
    fa_flow(t, u, &algebra::identity(u.nrows()))
}

/// The tanh flow by spectral calculus: an eigenvalue `e^{i alpha}` moves to
/// `e^{i alpha_t}` with `tan(alpha_t / 2) = e^{-2t} tan(alpha / 2)`.
///
/// The result is unitary to rounding for every `t`, so perturbations of `U`
/// near `ker(1 + U) != 0` are amplified only along the eigenvalue circle;
/// the stepped flow also amplifies departures from `U(n)`.
pub fn unitary_tanh_flow_spectral(t: f64, u: &CMatrix) -> Result<CMatrix> {
    check_unitary(u)?;
    if !t.is_finite() {
        return Err(Error::FlowBreakdown { t });
    }
    let n = u.nrows();
    let (q, tri) = nalgebra::Schur::try_new(u.clone(), 1e-15, 10_000).ok_or(Error::FlowBreakdown { t })?.unpack();
    let decay = (-2.0 * t).exp();
    let moved: Vec<Complex64> = (0..n)
        .map(|j| {
            // A multiple of (sin, cos)(alpha / 2) with cos >= 0, free of
            // cancellation on either side of the circle.
            let z = tri[(j, j)];
            let (s, co) = if z.re >= 0.0 {
                (z.im, 1.0 + z.re)
            } else if z.im >= 0.0 {
                (1.0 - z.re, z.im)
            } else {
                (z.re - 1.0, -z.im)
            };
            Complex64::from_polar(1.0, 2.0 * (decay * s).atan2(co))
        })
        .collect();
    let d = CMatrix::from_fn(n, n, |i, j| if i == j { moved[i] } else { c(0.0, 0.0) });
    Ok(&q * d * q.adjoint())
}

/// `(sinh(At) + cosh(At) U)(cosh(At) + sinh(At) U)^{-1}`, the gradient flow
/// of `Re Tr(A U)`.
///
/// Evaluated as a composition of short steps: the one-shot denominator has
/// condition number of order `e^{2 |A| t}` near the attracting reflections.
pub fn fa_flow(t: f64, u: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    check_unitary(u)?;
    check_hermitian(a)?;
    if !t.is_finite() {
        return Err(Error::FlowBreakdown { t });
    }
    let norm = algebra::hermitian_eigen(a)?.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let steps = if norm == 0.0 { 1 } else { ((t.abs() * norm) / 0.5).ceil().max(1.0) as usize };
    let h = t / steps as f64;
    let ah = a.scale(h);
    let sh = algebra::matrix_func(&ah, ScalarFn::Sinh)?;
    let ch = algebra::matrix_func(&ah, ScalarFn::Cosh)?;
    let mut cur = u.clone();
    for k in 0..steps {
        let num = &sh + &ch * &cur;
        let den = &ch + &sh * &cur;
        if relative_conditioning(&den) < 1e-12 {
            return Err(Error::FlowBreakdown { t: h * k as f64 });
        }
        cur = num * algebra::inverse(&den).map_err(|_| Error::FlowBreakdown { t: h * k as f64 })?;
    }
    Ok(cur)
}

/// `Re Tr(A U)`.
pub fn unitary_potential(u: &CMatrix, a: &CMatrix) -> f64 {
    (a * u).trace().re
}

/// The reflection `-id_V + id_{V^perp}` for `V` spanned by the basis vectors
/// `basis[:, i]`, `i` in `indices` (0-based).
pub fn reflection(basis: &CMatrix, indices: &[usize]) -> CMatrix {
    let n = basis.nrows();
    let mut d = vec![c(1.0, 0.0); n];
    for &i in indices {
        d[i] = c(-1.0, 0.0);
    }
    basis * algebra::diag(&d) * basis.adjoint()
}

/// Flow of the Grassmannian `Gr_k(E+ + E-)` induced by the grading
/// `eps = diag(1_p, -1_q)`: `span[X; Y] -> span[e^t X; e^{-t} Y]`,
/// returned with orthonormal columns.
pub fn grassmann_linear_flow(t: f64, frame: &CMatrix, p: usize) -> Result<CMatrix> {
    let n = frame.nrows();
    if p > n {
        return Err(Error::Dimension(format!("grading split {p} exceeds ambient dimension {n}")));
    }
    if !t.is_finite() {
        return Err(Error::FlowBreakdown { t });
    }
    // Unit-length steps keep each rescaling well conditioned.
    let steps = t.abs().ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut cur = algebra::orthonormalize(frame)?;
    for _ in 0..steps {
        for i in 0..n {
            let s = if i < p { h.exp() } else { (-h).exp() };
            for j in 0..cur.ncols() {
                cur[(i, j)] *= s;
            }
        }
        cur = algebra::orthonormalize(&cur).map_err(|e| Error::Frame(format!("rank loss along the Grassmann flow at t = {t}: {e}")))?;
    }
    Ok(cur)
}

/// Frame `[I; A]` of the graph of `A: E+ -> E-`.
pub fn graph_frame(a: &CMatrix) -> CMatrix {
    let (q, p) = a.shape();
    CMatrix::from_fn(p + q, p, |i, j| {
        if i < p {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        } else {
            a[(i - p, j)]
        }
    })
}

/// Graph coordinate `A = Y X^{-1}` of `span[X; Y]`.
pub fn graph_coordinate(frame: &CMatrix, p: usize) -> Result<CMatrix> {
    let x = frame.rows(0, p).into_owned();
    let y = frame.rows(p, frame.nrows() - p).into_owned();
    Ok(y * algebra::inverse(&x)?)
}

/// Orthogonal projector onto the column span.
pub fn projector(frame: &CMatrix) -> Result<CMatrix> {
    let q = algebra::orthonormalize(frame)?;
    Ok(&q * q.adjoint())
}

/// `Re Tr(eps P_L)` with `eps = diag(1_p, -1_q)`.
pub fn grassmann_potential(frame: &CMatrix, p: usize) -> Result<f64> {
    let proj = projector(frame)?;
    Ok((0..proj.nrows()).map(|i| if i < p { proj[(i, i)].re } else { -proj[(i, i)].re }).sum())
}

/// Chordal distance `|P_1 - P_2|_max` between two subspaces.
pub fn chordal_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    Ok(algebra::max_norm(&(projector(a)? - projector(b)?)))
}

/// Predicted `t -> +inf` limit of [`grassmann_linear_flow`]: the projection
/// of `L` to `E+` plus the part of `L` inside `E-`.
pub fn grassmann_limit(frame: &CMatrix, p: usize, tol: f64) -> Result<CMatrix> {
    let n = frame.nrows();
    let q = algebra::orthonormalize(frame)?;
    let x = q.rows(0, p).into_owned();
    // Rank from the singular values of X; the eigenbasis of X* X (ascending)
    // completes the right singular vectors with the kernel when dim L > p.
    let rank = x.singular_values().iter().filter(|&&s| s > tol).count();
    let eig = algebra::hermitian_eigen(&algebra::symmetrize(&(x.adjoint() * &x)))?;
    let k = q.ncols();
    let mut m = CMatrix::zeros(n, k);
    for j in 0..k {
        let vec = &q * eig.vectors.column(j);
        let rows = if j + rank >= k { 0..p } else { p..n };
        for i in rows {
            m[(i, j)] = vec[i];
        }
    }
    algebra::orthonormalize(&m)
}

/// Flow of P(E + C) in the graph chart centred at [0:1] (`v -> e^{rate t} v`).
/// The Grassmann flow gives `rate = 2`; any positive rate is a time
/// reparametrization of the same gradient flow.
pub fn projective_chart_flow(t: f64, v: &[Complex64], rate: f64) -> Vec<Complex64> {
    let s = (rate * t).exp();
    v.iter().map(|z| z * s).collect()
}

/// `Re Tr(eps P_L)` for the line spanned by `(v, 1)`: `(|v|^2 - 1) / (|v|^2 + 1)`.
pub fn projective_potential(v: &[Complex64]) -> f64 {
    let r2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (r2 - 1.0) / (r2 + 1.0)
}

/// Height flow on S(R + E) in the stereographic chart centred at [0]: `v -> e^t v`.
pub fn sphere_height_flow(t: f64, v: &[f64]) -> Vec<f64> {
    let s = t.exp();
    v.iter().map(|x| x * s).collect()
}

/// Minus the first ambient coordinate of the stereographic point.
pub fn sphere_potential(v: &[f64]) -> f64 {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    (r2 - 1.0) / (r2 + 1.0)
}

/// Radial flow `v -> e^t v` of `|v|^2 / 2`.
pub fn radial_flow(t: f64, v: &[f64]) -> Vec<f64> {
    sphere_height_flow(t, v)
}

/// Local model `(x, y, z) -> (e^t x, e^{-t} y, z)`.
pub fn local_model_flow(t: f64, x: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (a, b) = (t.exp(), (-t).exp());
    (x.iter().map(|v| v * a).collect(), y.iter().map(|v| v * b).collect(), z.to_vec())
}

/// `(|x|^2 - |y|^2) / 2`.
pub fn local_model_potential(x: &[f64], y: &[f64]) -> f64 {
    0.5 * (x.iter().map(|v| v * v).sum::<f64>() - y.iter().map(|v| v * v).sum::<f64>())
}

/// Spectral record of a unitary matrix relative to a flag
/// `W_m = span(e_{m+1}, .., e_n)` of basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumRecord {
    /// `dim ker(1 + U)`.
    pub k: usize,
    /// `dim ker(1 - U)`.
    pub fixed_dim: usize,
    /// `dim(ker(1 + U) cap W_m)` for `m = 0..=n`.
    pub minus_flag_dims: Vec<usize>,
    /// `dim(ker(1 - U) cap W_m)` for `m = 0..=n`.
    pub plus_flag_dims: Vec<usize>,
    /// Flag nodes `i_1 < .. < i_k` (1-based) where the `-1` intersection drops.
    pub nodes: Vec<usize>,
    /// Codimension `sum (2 i - 1)` of the stable stratum of `U_I`.
    pub codimension: usize,
}

/// Orthonormal basis of `ker(M)` using singular values `<= tol`; errors when
/// a singular value falls in the ambiguous band `(tol, 10 tol)`.
fn numerical_kernel(m: &CMatrix, tol: f64, target: f64) -> Result<CMatrix> {
    let n = m.ncols();
    let svd = m.clone().svd(true, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("SVD failed".into()))?;
    let mut cols = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            cols.push(v_t.row(j).adjoint());
        } else if s < 10.0 * tol {
            return Err(Error::AmbiguousStratum { distance: s, target });
        }
    }
    Ok(CMatrix::from_fn(n, cols.len(), |i, j| cols[j][(i, 0)]))
}

/// Codimension `N_I = sum_{i in I} (2 i - 1)` for 1-based nodes.
pub fn schubert_codimension(nodes: &[usize]) -> usize {
    nodes.iter().map(|&i| 2 * i - 1).sum()
}

/// Classify `U` by its `-1` and `+1` eigenspaces against the flag built from
/// the columns of `basis` (an eigenbasis of `A`, identity by default).
pub fn classify_unitary_stratum(u: &CMatrix, basis: Option<&CMatrix>, tol: f64) -> Result<StratumRecord> {
    check_unitary(u)?;
    let n = u.nrows();
    let id = algebra::identity(n);
    let e = basis.cloned().unwrap_or_else(|| id.clone());
    let minus = numerical_kernel(&(&id + u), tol, -1.0)?;
    let plus = numerical_kernel(&(&id - u), tol, 1.0)?;
    let flag = |m: usize| e.columns(m, n - m).into_owned();
    let dims = |space: &CMatrix| -> Vec<usize> {
        (0..=n).map(|m| if m == n || space.ncols() == 0 { 0 } else { algebra::intersection_dim(space, &flag(m), tol.sqrt()) }).collect()
    };
    let minus_flag_dims = dims(&minus);
    let plus_flag_dims = dims(&plus);
    let nodes: Vec<usize> = (1..=n).filter(|&m| minus_flag_dims[m] < minus_flag_dims[m - 1]).collect();
    Ok(StratumRecord {
        k: minus.ncols(),
        fixed_dim: plus.ncols(),
        codimension: schubert_codimension(&nodes),
        nodes,
        minus_flag_dims,
        plus_flag_dims,
    })
}

/// Flow of `Re Tr(A U)` packaged with its critical reflections.
pub fn fa_flow_spec(a: &CMatrix) -> Result<FlowSpec<CMatrix>> {
    check_hermitian(a)?;
    let eig = algebra::hermitian_eigen(a)?;
    let n = a.nrows();
    let a1 = a.clone();
    let a2 = a.clone();
    let mut spec = FlowSpec::new("U(n)", n * n, move |t, u: &CMatrix| fa_flow(t, u, &a1), move |u| unitary_potential(u, &a2));
    for mask in 0..(1usize << n) {
        let indices: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let nodes: Vec<usize> = indices.iter().map(|i| i + 1).collect();
        let codim = schubert_codimension(&nodes);
        let basis = eig.vectors.clone();
        let target = reflection(&basis, &indices);
        let name = format!("U_{nodes:?}");
        let classifier = move |u: &CMatrix| {
            if algebra::max_norm(&(u - &target)) < STRATUM_TOL {
                return Membership::Critical;
            }
            match classify_unitary_stratum(u, Some(&basis), STRATUM_TOL) {
                Ok(rec) if rec.nodes == nodes => Membership::Stable,
                _ => Membership::Neither,
            }
        };
        spec = spec.with_stratum(CriticalStratum { name, codim_stable: codim, dim_unstable: codim, classifier: Arc::new(classifier) });
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        algebra::orthonormalize(&m).unwrap()
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        algebra::symmetrize(&m)
    }

    /// Distinct eigenvalues, well separated.
    fn spread_hermitian(n: usize, rng: &mut impl Rng) -> (CMatrix, CMatrix) {
        let q = random_unitary(n, rng);
        let vals: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 + rng.gen_range(0.0..0.3)).collect();
        (&q * algebra::diag_real(&vals) * q.adjoint(), q)
    }

    fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
        algebra::max_norm(&(a - b))
    }

    #[test]
    fn tanh_flow_fixed_points_and_limit() {
        let id = algebra::identity(3);
        assert!(dist(&unitary_tanh_flow(2.0, &id).unwrap(), &id) < 1e-14);
        let minus = CMatrix::from_element(1, 1, c(-1.0, 0.0));
        // -1 is repelling: rounding grows like e^{2t}.
        assert!(dist(&unitary_tanh_flow(5.0, &minus).unwrap(), &minus) < 1e-10);
        let i = CMatrix::from_element(1, 1, c(0.0, 1.0));
        let out = unitary_tanh_flow(20.0, &i).unwrap();
        assert!((out[(0, 0)] - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn tanh_flow_matches_eigenvalue_mobius_map() {
        // On each eigenvalue e^{i a} the flow acts by the Mobius map (th + z)/(1 + z th).
        let z = c(0.3f64.cos(), 0.3f64.sin());
        let t: f64 = 0.8;
        let th = t.tanh();
        let expected = (c(th, 0.0) + z) / (c(1.0, 0.0) + z * th);
        let out = unitary_tanh_flow(t, &CMatrix::from_element(1, 1, z)).unwrap();
        assert!((out[(0, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn spectral_tanh_flow_agrees_with_the_stepped_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=4 {
            let u = random_unitary(n, &mut rng);
            for t in [0.1, 1.0, 3.0] {
                let a = unitary_tanh_flow(t, &u).unwrap();
                let b = unitary_tanh_flow_spectral(t, &u).unwrap();
                assert!(dist(&a, &b) < 1e-11, "n = {n}, t = {t}: {}", dist(&a, &b));
            }
        }
        // A diagonal with eigenvalue -1 stays fixed there.
        let d = CMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                c(0.0, 0.0)
            } else if i == 0 {
                c(-1.0, 0.0)
            } else {
                c(0.0, 1.0)
            }
        });
        let out = unitary_tanh_flow_spectral(30.0, &d).unwrap();
        assert!((out[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15 && (out[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tanh_flow_limit_splits_along_the_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_unitary(3, &mut rng);
        let u = &q * algebra::diag(&[c(-1.0, 0.0), c(0.2f64.cos(), 0.2f64.sin()), c((-2.5f64).cos(), (-2.5f64).sin())]) * q.adjoint();
        // Attraction in Cayley coordinates is e^{-2t}; the -1 eigenvector is
        // repelling, so the horizon balances both effects.
        let lim = unitary_tanh_flow(10.0, &u).unwrap();
        let expected = reflection(&q, &[0]);
        assert!(dist(&lim, &expected) < 1e-6);
    }

    #[test]
    fn fa_flow_reduces_to_tanh_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(3, &mut rng);
        let a = fa_flow(0.7, &u, &algebra::identity(3)).unwrap();
        let b = unitary_tanh_flow(0.7, &u).unwrap();
        assert!(dist(&a, &b) < 1e-10);
        let (h, _) = spread_hermitian(3, &mut rng);
        assert!(dist(&fa_flow(0.0, &u, &h).unwrap(), &u) < 1e-14);
    }

    #[test]
    fn fa_critical_reflections_are_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, q) = spread_hermitian(3, &mut rng);
        for mask in 0..8usize {
            let idx: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let r = reflection(&q, &idx);
            // Unstable directions amplify rounding, so keep |t| short.
            for t in [0.5, -0.5] {
                assert!(dist(&fa_flow(t, &r, &a).unwrap(), &r) < 1e-10);
            }
        }
    }

    #[test]
    fn fa_flow_rejects_bad_input_and_stays_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(3, &mut rng);
        let u = random_unitary(3, &mut rng);
        assert!(matches!(fa_flow(f64::NAN, &u, &a), Err(Error::FlowBreakdown { .. })));
        assert!(fa_flow(1.0, &u.scale(2.0), &a).is_err());
        let out = fa_flow(30.0, &u, &a).unwrap();
        assert!(algebra::max_norm(&(out.adjoint() * &out - algebra::identity(3))) < 1e-9);
    }

    #[test]
    fn fa_flow_is_a_positive_multiple_of_the_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, _) = spread_hermitian(3, &mut rng);
        let u = random_unitary(3, &mut rng);
        let h = 1e-6;
        let vel = (fa_flow(h, &u, &a).unwrap() - fa_flow(-h, &u, &a).unwrap()).scale(0.5 / h);
        // Riemannian gradient of Re Tr(AU) for the metric Re Tr(X* Y).
        let grad = (&a - &u * &a * &u).scale(0.5);
        let ratio = vel.iter().zip(grad.iter()).map(|(v, g)| (v * g.conj()).re).sum::<f64>() / grad.norm_squared();
        assert!(ratio > 0.0);
        assert!(algebra::max_norm(&(vel - grad.scale(ratio))) < 1e-7);
    }

    #[test]
    fn fa_trajectories_converge_to_classified_reflections() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, q) = spread_hermitian(3, &mut rng);
        for _ in 0..5 {
            let u = random_unitary(3, &mut rng);
            let lim = fa_flow(40.0, &u, &a).unwrap();
            let rec = classify_unitary_stratum(&lim, Some(&q), 1e-6).unwrap();
            let idx: Vec<usize> = rec.nodes.iter().map(|i| i - 1).collect();
            assert!(dist(&lim, &reflection(&q, &idx)) < 1e-6);
        }
    }

    #[test]
    fn classifier_examples() {
        let rec = classify_unitary_stratum(&algebra::diag_real(&[-1.0, -1.0, -1.0]), None, 1e-7).unwrap();
        assert_eq!(rec.k, 3);
        assert_eq!(rec.nodes, vec![1, 2, 3]);
        let rec = classify_unitary_stratum(&algebra::diag_real(&[-1.0, 1.0, 1.0]), None, 1e-7).unwrap();
        assert_eq!(rec.k, 1);
        assert_eq!(rec.fixed_dim, 2);
        assert_eq!(rec.plus_flag_dims, vec![2, 2, 1, 0]);
        assert_eq!(rec.nodes, vec![1]);
        assert_eq!(rec.codimension, 1);
    }

    #[test]
    fn classifier_reads_reflection_nodes() {
        let id = algebra::identity(4);
        for idx in [vec![1usize], vec![0, 2], vec![1, 2, 3]] {
            let rec = classify_unitary_stratum(&reflection(&id, &idx), None, 1e-7).unwrap();
            let nodes: Vec<usize> = idx.iter().map(|i| i + 1).collect();
            assert_eq!(rec.nodes, nodes);
            assert_eq!(rec.codimension, schubert_codimension(&nodes));
        }
        assert_eq!(schubert_codimension(&[1, 3]), 6);
    }

    #[test]
    fn classifier_flags_ambiguous_eigenvalues() {
        let theta = std::f64::consts::PI - 3e-7;
        let u = algebra::diag(&[c(theta.cos(), theta.sin()), c(1.0, 0.0)]);
        assert!(matches!(classify_unitary_stratum(&u, None, 1e-7), Err(Error::AmbiguousStratum { .. })));
    }

    #[test]
    fn grassmann_flow_examples() {
        let e_plus = graph_frame(&CMatrix::zeros(1, 2));
        let out = grassmann_linear_flow(3.0, &e_plus, 2).unwrap();
        assert!(chordal_distance(&out, &e_plus).unwrap() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = CMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let out = grassmann_linear_flow(2f64.ln(), &graph_frame(&a), 2).unwrap();
        let a_t = graph_coordinate(&out, 2).unwrap();
        assert!(algebra::max_norm(&(a_t - a.scale(0.25))) < 1e-13);
    }

    #[test]
    fn projective_chart_flow_is_the_grassmann_flow() {
        // The line (v, 1) in C + C with grading diag(1, -1).
        let v = c(0.4, -0.3);
        let t = 0.35;
        let frame = CMatrix::from_column_slice(2, 1, &[v, c(1.0, 0.0)]);
        let out = grassmann_linear_flow(t, &frame, 1).unwrap();
        let w = out[(0, 0)] / out[(1, 0)];
        assert!((w - projective_chart_flow(t, &[v], 2.0)[0]).norm() < 1e-13);
    }

    #[test]
    fn projective_flow_is_a_positive_multiple_of_the_gradient() {
        // Fubini-Study metric |dv|^2 / (1 + |v|^2)^2 on the chart of CP^1.
        let v = [c(0.6, 0.2)];
        let h = 1e-6;
        let f = |z: Complex64| projective_potential(&[z]);
        let grad_euclid =
            c((f(v[0] + c(h, 0.0)) - f(v[0] - c(h, 0.0))) / (2.0 * h), (f(v[0] + c(0.0, h)) - f(v[0] - c(0.0, h))) / (2.0 * h));
        let g = (1.0 + v[0].norm_sqr()).powi(2);
        let grad = grad_euclid * g;
        let vel = (projective_chart_flow(h, &v, 2.0)[0] - projective_chart_flow(-h, &v, 2.0)[0]) / (2.0 * h);
        let ratio = (vel * grad.conj()).re / grad.norm_sqr();
        assert!(ratio > 0.0);
        assert!((vel - grad * ratio).norm() < 1e-7);
    }

    #[test]
    fn grassmann_flow_limit_matches_kernel_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // A 2-plane in C^2 + C^2 meeting E- in a line.
        let e_minus = CMatrix::from_column_slice(4, 1, &[c(0.0, 0.0), c(0.0, 0.0), c(0.6, 0.1), c(-0.3, 0.5)]);
        let other = CMatrix::from_fn(4, 1, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let frame = CMatrix::from_fn(4, 2, |i, j| if j == 0 { e_minus[(i, 0)] } else { other[(i, 0)] });
        let lim = grassmann_limit(&frame, 2, 1e-9).unwrap();
        let flowed = grassmann_linear_flow(20.0, &frame, 2).unwrap();
        assert!(chordal_distance(&flowed, &lim).unwrap() < 1e-6);
        let generic = CMatrix::from_fn(4, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let flowed = grassmann_linear_flow(20.0, &generic, 2).unwrap();
        assert!(chordal_distance(&flowed, &grassmann_limit(&generic, 2, 1e-9).unwrap()).unwrap() < 1e-6);
    }

    #[test]
    fn sphere_and_radial_flows() {
        assert_eq!(sphere_height_flow(3.0, &[0.0, 0.0]), vec![0.0, 0.0]);
        let v = [0.3, -0.4];
        let w = radial_flow(1.5, &v);
        assert!((w[0].hypot(w[1]) - 1.5f64.exp() * 0.5).abs() < 1e-15);
        assert!(sphere_potential(&sphere_height_flow(0.2, &v)) > sphere_potential(&v));
    }

    #[test]
    fn sphere_flow_commutes_with_rotations_fixing_the_poles() {
        let v = [0.3, -0.4, 0.9];
        let q = crate::algebra::RMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let rv: Vec<f64> = (&q * crate::algebra::RMatrix::from_column_slice(3, 1, &v)).iter().copied().collect();
        let a = sphere_height_flow(0.7, &rv);
        let b: Vec<f64> = (&q * crate::algebra::RMatrix::from_column_slice(3, 1, &sphere_height_flow(0.7, &v))).iter().copied().collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_flow_is_a_positive_multiple_of_the_gradient() {
        // Round metric in the chart: 4 |dv|^2 / (1 + |v|^2)^2.
        let v = [0.5, -0.2];
        let h = 1e-6;
        let grad_e: Vec<f64> = (0..2)
            .map(|k| {
                let mut p = v;
                let mut m = v;
                p[k] += h;
                m[k] -= h;
                (sphere_potential(&p) - sphere_potential(&m)) / (2.0 * h)
            })
            .collect();
        let r2 = v[0] * v[0] + v[1] * v[1];
        let g = (1.0 + r2).powi(2) / 4.0;
        let vel: Vec<f64> = (0..2).map(|k| (sphere_height_flow(h, &v)[k] - sphere_height_flow(-h, &v)[k]) / (2.0 * h)).collect();
        let ratio = (vel[0] * grad_e[0] + vel[1] * grad_e[1]) / (g * (grad_e[0].powi(2) + grad_e[1].powi(2)));
        assert!(ratio > 0.0);
        for k in 0..2 {
            assert!((vel[k] - ratio * g * grad_e[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn local_model_examples() {
        let (x, y, z) = local_model_flow(2f64.ln(), &[1.0], &[1.0], &[]);
        assert!((x[0] - 2.0).abs() < 1e-15 && (y[0] - 0.5).abs() < 1e-15 && z.is_empty());
        let (x0, y0) = ([0.3, 0.1], [0.7]);
        let t = 0.9;
        let (x1, y1, _) = local_model_flow(t, &x0, &y0, &[]);
        let expected = 0.5 * ((2.0 * t).exp() * (0.09 + 0.01) - (-2.0 * t).exp() * 0.49);
        assert!((local_model_potential(&x1, &y1) - expected).abs() < 1e-15);
    }

    #[test]
    fn fa_flow_spec_strata() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (a, q) = spread_hermitian(2, &mut rng);
        let spec = fa_flow_spec(&a).unwrap();
        assert_eq!(spec.strata.len(), 4);
        let r = reflection(&q, &[1]);
        let hits: Vec<Membership> = spec.strata.iter().map(|s| (s.classifier)(&r)).collect();
        assert_eq!(hits.iter().filter(|m| **m == Membership::Critical).count(), 1);
        let total: usize = spec.strata.iter().map(|s| s.codim_stable).max().unwrap();
        assert_eq!(total, 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn tanh_flow_semigroup_and_unitarity(seed in 0u64..10_000, s in -2.0f64..2.0, t in -2.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = random_unitary(3, &mut rng);
                let a = unitary_tanh_flow(s, &unitary_tanh_flow(t, &u).unwrap()).unwrap();
                let b = unitary_tanh_flow(s + t, &u).unwrap();
                prop_assert!(dist(&a, &b) < 1e-9);
                prop_assert!(algebra::max_norm(&(b.adjoint() * &b - algebra::identity(3))) < 1e-10);
            }

            #[test]
            fn fa_flow_semigroup_and_monotone_potential(seed in 0u64..10_000, s in 0.0f64..1.5, t in 0.01f64..1.5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (a, _) = spread_hermitian(3, &mut rng);
                let u = random_unitary(3, &mut rng);
                let ab = fa_flow(s, &fa_flow(t, &u, &a).unwrap(), &a).unwrap();
                prop_assert!(dist(&ab, &fa_flow(s + t, &u, &a).unwrap()) < 1e-9);
                prop_assert!(unitary_potential(&fa_flow(t, &u, &a).unwrap(), &a) > unitary_potential(&u, &a));
            }

            #[test]
            fn grassmann_flow_semigroup(seed in 0u64..10_000, s in -2.0f64..2.0, t in -2.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = CMatrix::from_fn(4, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let a = grassmann_linear_flow(s, &grassmann_linear_flow(t, &f, 2).unwrap(), 2).unwrap();
                let b = grassmann_linear_flow(s + t, &f, 2).unwrap();
                prop_assert!(chordal_distance(&a, &b).unwrap() < 1e-9);
            }

            #[test]
            fn grassmann_potential_increases(seed in 0u64..10_000, t in 0.01f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = CMatrix::from_fn(4, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let g = grassmann_linear_flow(t, &f, 2).unwrap();
                prop_assert!(grassmann_potential(&g, 2).unwrap() > grassmann_potential(&f, 2).unwrap());
            }

            #[test]
            fn chart_flows_semigroup(x in -3.0f64..3.0, y in -3.0f64..3.0, s in -2.0f64..2.0, t in -2.0f64..2.0) {
                let v = [x, y];
                let a = sphere_height_flow(s, &sphere_height_flow(t, &v));
                let b = sphere_height_flow(s + t, &v);
                prop_assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() <= 1e-9 * (1.0 + b[0].abs() + b[1].abs()));
                let (x1, y1, _) = local_model_flow(s, &local_model_flow(t, &v, &[y], &[]).0, &local_model_flow(t, &v, &[y], &[]).1, &[]);
                let (x2, y2, _) = local_model_flow(s + t, &v, &[y], &[]);
                prop_assert!((x1[0] - x2[0]).abs() + (y1[0] - y2[0]).abs() <= 1e-9 * (1.0 + x2[0].abs() + y2[0].abs()));
            }

            #[test]
            fn sphere_potential_increases_off_the_poles(x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.01f64..2.0) {
                prop_assume!(x * x + y * y > 1e-6);
                prop_assert!(sphere_potential(&sphere_height_flow(t, &[x, y])) > sphere_potential(&[x, y]));
            }
        }
    }
}
