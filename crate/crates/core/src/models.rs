//! Model bundles, parametrizations and symbolic blocks shared by the
//! scenarios: projectivized and sphere bundles with their vertical
//! connections, compactified polar charts, the resolution family of the
//! unitary group and the one-form calculus of the residue computation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{self, c, CMatrix, RMatrix};
use crate::charforms::FormField;
use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, FormMatrix};
use crate::flows::{sphere_height_flow, sphere_potential, FlowSpec};
use crate::spaces::{
    deinterleave, projected_connection, sphere_tangent_frame, sphere_tangent_frame_partials, tau_perp_unitary_frame,
    tau_perp_unitary_frame_partials, BoxDomain, BundleWithConnection, Frame, MatrixFamily, Parametrization,
};

/// `dz_j = dx_j + i dy_j` over interleaved real coordinates of dimension `dim`.
pub fn dz(dim: usize, j: usize) -> AlternatingForm {
    let mut f = AlternatingForm::zero(dim);
    f.set_mask(1 << (2 * j), c(1.0, 0.0));
    f.set_mask(1 << (2 * j + 1), c(0.0, 1.0));
    f
}

/// `dzbar_j = dx_j - i dy_j`.
pub fn dzbar(dim: usize, j: usize) -> AlternatingForm {
    dz(dim, j).conj()
}

/// `(i / 2 pi) sum_j dz_j ^ dzbar_j` on `C^n`.
pub fn kahler_origin(n: usize) -> AlternatingForm {
    let dim = 2 * n;
    let mut out = AlternatingForm::zero(dim);
    for j in 0..n {
        out += &dz(dim, j).wedge(&dzbar(dim, j)).expect("common chart");
    }
    out.scale(c(0.0, 1.0 / (2.0 * PI)))
}

/// Fubini-Study form `(i / 2 pi) d d^c log(1 + |v|^2)` in the graph chart of `CP^n`.
pub fn fubini_study_at(x: &[f64]) -> Result<AlternatingForm> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!("interleaved chart of odd dimension {}", x.len())));
    }
    let dim = x.len();
    let n = dim / 2;
    let v = deinterleave(x);
    let s = 1.0 + v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut first = AlternatingForm::zero(dim);
    let mut a = AlternatingForm::zero(dim);
    let mut b = AlternatingForm::zero(dim);
    for j in 0..n {
        first += &dz(dim, j).wedge(&dzbar(dim, j))?;
        a += &dz(dim, j).scale(v[j].conj());
        b += &dzbar(dim, j).scale(v[j]);
    }
    let form = &first.scale_real(1.0 / s) - &a.wedge(&b)?.scale_real(1.0 / (s * s));
    Ok(form.scale(c(0.0, 1.0 / (2.0 * PI))))
}

/// The Fubini-Study form as a closed 2-form field on the chart of `CP^n`.
pub fn fubini_study(n: usize) -> FormField {
    FormField::new("fubini-study", format!("CP{n}"), "graph[0:1]", 2 * n, Some(2), fubini_study_at).claim_closed()
}

/// Connection of `E + C` (or `C + E` when `scalar_first`) pulled to a total
/// chart `(x, fiber)` of dimension `base_dim + fiber_dim`.
fn direct_sum_connection(e: &BundleWithConnection, fiber_dim: usize, scalar_first: bool) -> BundleWithConnection {
    let m = e.base_dim;
    let n = e.rank;
    let e2 = e.clone();
    let mut out = BundleWithConnection::new(format!("{}+1", e.name), m + fiber_dim, n + 1, move |xv| {
        let comps = e2.connection_components(&xv[..m])?;
        let off = if scalar_first { 1 } else { 0 };
        let full: Vec<CMatrix> = (0..m + fiber_dim)
            .map(|k| {
                let mut big = CMatrix::zeros(n + 1, n + 1);
                if k < m {
                    big.view_mut((off, off), (n, n)).copy_from(&comps[k]);
                }
                big
            })
            .collect();
        Ok(FormMatrix::from_one_form_components(&full))
    });
    out.metric_compatible = e.metric_compatible;
    out.real = e.real;
    out
}

/// `tau^perp` over the total chart `(x, v)` of `P(E + C)`, with the
/// connection projected from `E + C` in the unitary frame of `tau^perp`.
/// The bundle `E` is taken in a unitary frame (standard metric).
pub fn projective_tau_perp(e: &BundleWithConnection, analytic_frame: bool) -> Result<BundleWithConnection> {
    let m = e.base_dim;
    let n = e.rank;
    let ambient = direct_sum_connection(e, 2 * n, false);
    let frame = Frame::new(move |xv: &[f64]| Ok(tau_perp_unitary_frame(&deinterleave(&xv[m..]))));
    let frame = if analytic_frame {
        frame.with_derivative(move |xv: &[f64]| {
            let mut out = vec![CMatrix::zeros(n + 1, n); m];
            out.extend(tau_perp_unitary_frame_partials(&deinterleave(&xv[m..])));
            Ok(out)
        })
    } else {
        frame
    };
    let mut b = projected_connection(&ambient, frame)?;
    b.name = format!("tau_perp(P({}+C))", e.name);
    Ok(b)
}

/// `tau^perp` over the graph chart of `CP^n` (the fiber over a point).
pub fn tau_perp_bundle(n: usize) -> Result<BundleWithConnection> {
    projective_tau_perp(&BundleWithConnection::trivial(0, n).metric_compatible(true), true)
}

/// Vertical tangent bundle of `S(R + E)` over the total chart `(x, v)`, `v`
/// the stereographic coordinate centred at `[0]`, with the connection
/// projected from `R + E`. The bundle `E` is taken in an orthonormal frame.
pub fn sphere_bundle_vertical(e: &BundleWithConnection, analytic_frame: bool) -> Result<BundleWithConnection> {
    let m = e.base_dim;
    let n = e.rank;
    let ambient = direct_sum_connection(e, n, true);
    let frame = Frame::new(move |xv: &[f64]| Ok(algebra::to_complex(&sphere_tangent_frame(&xv[m..]))));
    let frame = if analytic_frame {
        frame.with_derivative(move |xv: &[f64]| {
            let mut out = vec![CMatrix::zeros(n + 1, n); m];
            out.extend(sphere_tangent_frame_partials(&xv[m..]).iter().map(algebra::to_complex));
            Ok(out)
        })
    } else {
        frame
    };
    let mut b = projected_connection(&ambient, frame)?.real();
    b.name = format!("T_v(S(R+{}))", e.name);
    Ok(b)
}

/// Tangent bundle of the round `S^n` in the stereographic chart, with its
/// Levi-Civita connection.
pub fn sphere_tangent_bundle(n: usize) -> Result<BundleWithConnection> {
    sphere_bundle_vertical(&BundleWithConnection::trivial(0, n).real(), true)
}

/// Unitary connection `i (y dx - x dy) / (1 + |z|^2)` of the hyperplane
/// bundle of `CP^1` in the chart `z = x + i y`; its first Chern form is
/// `dx ^ dy / (pi (1 + |z|^2)^2)`.
pub fn hyperplane_bundle() -> BundleWithConnection {
    BundleWithConnection::new("O(1)", 2, 1, |x: &[f64]| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        let comps = [CMatrix::from_element(1, 1, c(0.0, x[1] / s)), CMatrix::from_element(1, 1, c(0.0, -x[0] / s))];
        Ok(FormMatrix::from_one_form_components(&comps))
    })
    .metric_compatible(true)
}

/// First Chern form density of [`hyperplane_bundle`] (coefficient of `dx ^ dy`).
pub fn hyperplane_chern_density(x: &[f64]) -> f64 {
    let s = 1.0 + x[0] * x[0] + x[1] * x[1];
    1.0 / (PI * s * s)
}

/// Polar compactification of `C^n`: `(theta_j, phi_j) -> tan(theta_j / 2) e^{i phi_j}`
/// on `([0, pi] x [0, 2 pi])^n`, orientation-preserving for the complex
/// orientation. For `n = 1` this is also the spherical parametrization of
/// `S^2` in the stereographic chart.
pub fn polar_plane(n: usize) -> Parametrization {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for _ in 0..n {
        lo.extend([0.0, 0.0]);
        hi.extend([PI, 2.0 * PI]);
    }
    let domain = BoxDomain::new(lo, hi).expect("valid box");
    Parametrization::new(format!("polar(C^{n})"), domain, format!("C^{n}"), 2 * n, move |u: &[f64]| {
        Ok(u.chunks(2)
            .flat_map(|p| {
                let r = (0.5 * p[0]).tan();
                [r * p[1].cos(), r * p[1].sin()]
            })
            .collect())
    })
    .with_jacobian(move |u: &[f64]| {
        let mut j = RMatrix::zeros(2 * n, 2 * n);
        for (k, p) in u.chunks(2).enumerate() {
            let r = (0.5 * p[0]).tan();
            let dr = 0.5 / (0.5 * p[0]).cos().powi(2);
            let (cs, sn) = (p[1].cos(), p[1].sin());
            j[(2 * k, 2 * k)] = dr * cs;
            j[(2 * k, 2 * k + 1)] = -r * sn;
            j[(2 * k + 1, 2 * k)] = dr * sn;
            j[(2 * k + 1, 2 * k + 1)] = r * cs;
        }
        Ok(j)
    })
}

/// Spherical parametrization of `S^2` into the stereographic chart.
pub fn sphere_polar() -> Parametrization {
    let mut p = polar_plane(1);
    p.name = "polar(S^2)".into();
    p
}

/// The circle `[0, 2 pi]` as an identity parametrization of the angle chart.
pub fn circle() -> Parametrization {
    Parametrization::new("S^1", BoxDomain::new(vec![0.0], vec![2.0 * PI]).expect("valid box"), "S^1", 1, |u: &[f64]| Ok(u.to_vec()))
        .with_jacobian(|_| Ok(RMatrix::identity(1, 1)))
}

/// Orthogonal projector onto the line through `(1, w)`.
pub fn line_projector(w: &[Complex64]) -> CMatrix {
    let k = w.len() + 1;
    let l = CMatrix::from_fn(k, 1, |i, _| if i == 0 { c(1.0, 0.0) } else { w[i - 1] });
    let s = 1.0 + w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (&l * l.adjoint()).scale(1.0 / s)
}

/// Resolution of the closure of the top stratum of `U(k)`:
/// `(lambda, L) -> 1 + (lambda - 1) P_L` on `S^1 x CP^{k-1}`, parametrized by
/// `(phi, polar chart of CP^{k-1})` with `lambda = e^{i phi}`.
pub fn bs_resolution_family(k: usize) -> Result<MatrixFamily> {
    if k == 0 {
        return Err(Error::Dimension("resolution family needs k >= 1".into()));
    }
    let chart = polar_plane(k - 1);
    let mut lo = vec![0.0];
    let mut hi = vec![2.0 * PI];
    lo.extend(chart.domain.lo.iter());
    hi.extend(chart.domain.hi.iter());
    let domain = BoxDomain::new(lo, hi)?;
    Ok(MatrixFamily::new(format!("BS(U({k}))"), domain, move |u: &[f64]| {
        let w = deinterleave(&chart.eval(&u[1..])?);
        let lambda = c(u[0].cos(), u[0].sin());
        Ok(algebra::identity(k) + line_projector(&w) * (lambda - c(1.0, 0.0)))
    }))
}

/// One-form blocks of the residue computation at the base line `L_0` of
/// `CP^{n-1}`, over abstract generators `theta = lambda^{-1} d lambda`
/// (index 0), `dz_j` (index `1 + 2 j`) and `dzbar_j` (index `2 + 2 j`).
#[derive(Debug, Clone)]
pub struct ResidueBlocks {
    pub n: usize,
    pub alpha: Complex64,
    /// `[[theta, -conj(alpha) dS*], [alpha dS, 0]]`.
    pub omega: FormMatrix,
    /// Off-diagonal part of `omega`.
    pub b: FormMatrix,
    /// `diag(theta, 0)`.
    pub c: FormMatrix,
    /// `diag(0, -theta id)`.
    pub c1: FormMatrix,
}

/// Generator count `1 + 2 (n - 1)` of [`ResidueBlocks`].
pub fn residue_dim(n: usize) -> usize {
    1 + 2 * (n - 1)
}

fn gen(dim: usize, i: usize) -> AlternatingForm {
    let mut f = AlternatingForm::zero(dim);
    f.set_mask(1 << i, c(1.0, 0.0));
    f
}

/// Blocks for `lambda` on the unit circle.
pub fn residue_blocks(n: usize, lambda: Complex64) -> Result<ResidueBlocks> {
    if n < 1 || residue_dim(n) > crate::exterior::MAX_DIM {
        return Err(Error::Dimension(format!("residue blocks for n = {n}")));
    }
    let dim = residue_dim(n);
    let alpha = lambda - c(1.0, 0.0);
    let theta = gen(dim, 0);
    let zero = AlternatingForm::zero(dim);
    let b = FormMatrix::from_fn(n, dim, |i, j| match (i, j) {
        (0, j) if j > 0 => gen(dim, 2 + 2 * (j - 1)).scale(-alpha.conj()),
        (i, 0) if i > 0 => gen(dim, 1 + 2 * (i - 1)).scale(alpha),
        _ => zero.clone(),
    })?;
    let cm = FormMatrix::from_fn(n, dim, |i, j| if i == 0 && j == 0 { theta.clone() } else { zero.clone() })?;
    let c1 = FormMatrix::from_fn(n, dim, |i, j| if i == j && i > 0 { theta.scale_real(-1.0) } else { zero.clone() })?;
    let omega = b.try_add(&cm)?;
    Ok(ResidueBlocks { n, alpha, omega, b, c: cm, c1 })
}

/// `D = diag(dS* ^ dS, dS ^ dS*)` with grading split `(1, n - 1)`.
pub fn residue_d_matrix(n: usize) -> Result<FormMatrix> {
    let dim = residue_dim(n);
    let dzj = |j: usize| gen(dim, 1 + 2 * j);
    let dzbj = |j: usize| gen(dim, 2 + 2 * j);
    let mut top = AlternatingForm::zero(dim);
    for j in 0..n - 1 {
        top += &dzbj(j).wedge(&dzj(j))?;
    }
    let d = FormMatrix::from_fn(n, dim, |i, j| match (i, j) {
        (0, 0) => top.clone(),
        (i, j) if i > 0 && j > 0 => dzj(i - 1).wedge(&dzbj(j - 1)).expect("common chart"),
        _ => AlternatingForm::zero(dim),
    })?;
    d.with_split(1, n - 1)
}

/// `eta_0 = (i / 2 pi) sum dz_j ^ dzbar_j` in the abstract generators.
pub fn residue_eta(n: usize) -> Result<AlternatingForm> {
    let dim = residue_dim(n);
    let mut out = AlternatingForm::zero(dim);
    for j in 0..n - 1 {
        out += &gen(dim, 1 + 2 * j).wedge(&gen(dim, 2 + 2 * j))?;
    }
    Ok(out.scale(c(0.0, 1.0 / (2.0 * PI))))
}

/// Polar parameters `(theta, phi)` of a point `z = x + i y` under [`polar_plane`]`(1)`.
pub fn polar_of(x: f64, y: f64) -> Vec<f64> {
    let r = x.hypot(y);
    vec![2.0 * r.atan(), y.atan2(x).rem_euclid(2.0 * PI)]
}

/// Total-space flow `(x, v) -> (x, e^{rate t} v)` on a bundle chart whose
/// first `base_dim` coordinates are the base.
pub fn fiberwise_scaling_flow(space: &str, base_dim: usize, fiber_dim: usize, rate: f64) -> FlowSpec<Vec<f64>> {
    FlowSpec::new(
        space,
        base_dim + fiber_dim,
        move |t, p: &Vec<f64>| {
            if !t.is_finite() {
                return Err(Error::FlowBreakdown { t });
            }
            let mut out = p.clone();
            out[base_dim..].copy_from_slice(&sphere_height_flow(rate * t, &p[base_dim..]));
            Ok(out)
        },
        move |p: &Vec<f64>| sphere_potential(&p[base_dim..]),
    )
}

/// The flow of `P(E + C)` in the graph chart: `v -> e^{rate t} v`, attracted
/// to the section at infinity and repelled by the zero section. On
/// interleaved real coordinates this is the fiberwise scaling, and the
/// potential `(|v|^2 - 1) / (|v|^2 + 1)` agrees with the projective one.
pub fn projective_total_flow(base_dim: usize, rank: usize, rate: f64) -> FlowSpec<Vec<f64>> {
    fiberwise_scaling_flow("P(E+C)", base_dim, 2 * rank, rate)
}

/// Section `z -> (a z + b + c |z|^2 / (1 + |z|^2)) e_0` of the hyperplane
/// bundle, written in the unitary frame `e_0 sqrt(1 + |z|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperplaneSection {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl HyperplaneSection {
    /// Random coefficients with `0.4 <= |b / a| <= 1` and `|c / a| <= 1/4`:
    /// the zeros lie in the annulus `0.15 <= |z| <= 1.25`, away from both
    /// poles of the polar chart.
    pub fn random(rng: &mut impl Rng) -> Self {
        let a = Complex64::from_polar(rng.gen_range(0.8..1.2), rng.gen_range(0.0..2.0 * PI));
        let b = a * Complex64::from_polar(rng.gen_range(0.4..1.0), rng.gen_range(0.0..2.0 * PI));
        let c0 = a * Complex64::from_polar(rng.gen_range(0.0..0.25), rng.gen_range(0.0..2.0 * PI));
        HyperplaneSection { a, b, c: c0 }
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        let z = c(x[0], x[1]);
        let r2 = z.norm_sqr();
        (self.a * z + self.b + self.c * (r2 / (1.0 + r2))) / (1.0 + r2).sqrt()
    }

    /// Real and imaginary parts, for the zero finder.
    pub fn real_components(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        vec![v.re, v.im]
    }
}

/// `tau^perp` over the chart `(x, y, Re v, Im v)` of `P(O(1) + C)` over `CP^1`.
pub fn hyperplane_total_bundle() -> Result<BundleWithConnection> {
    projective_tau_perp(&hyperplane_bundle(), true)
}

/// `b -> (z(b), s(z(b)))` from the polar parameters of `S^2` into the total chart.
pub fn hyperplane_section_embedding(section: HyperplaneSection) -> Parametrization {
    let base = sphere_polar();
    let b2 = base.clone();
    Parametrization::new("s(S^2)", base.domain.clone(), "P(O(1)+C)", 4, move |u: &[f64]| {
        let x = b2.eval(u)?;
        let v = section.value(&x);
        Ok(vec![x[0], x[1], v.re, v.im])
    })
    .with_chart("graph[0:1]")
}

/// Vector field `a - <a, p> p` on `S^2` (the gradient of the height `<a, p>`),
/// in the orthonormal stereographic frame. Its zeros are `p = +-a`.
pub fn height_gradient_section(a: [f64; 3]) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + Clone {
    move |v: &[f64]| {
        let e = sphere_tangent_frame(v);
        (0..e.ncols()).map(|j| (0..3).map(|i| a[i] * e[(i, j)]).sum()).collect()
    }
}

/// Stereographic coordinate of a unit vector `p` (north-pole chart).
pub fn stereographic_inverse(p: &[f64]) -> Vec<f64> {
    p[1..].iter().map(|x| x / (1.0 + p[0])).collect()
}

/// `b -> (x(b), xi(x(b)))` into the total chart of a rank-2 bundle over `S^2`.
pub fn vector_section_embedding(name: &str, space: &str, xi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Parametrization {
    let base = sphere_polar();
    let b2 = base.clone();
    Parametrization::new(name.to_string(), base.domain.clone(), space.to_string(), 4, move |u: &[f64]| {
        let x = b2.eval(u)?;
        let mut out = x.clone();
        out.extend(xi(&x));
        Ok(out)
    })
}

/// Tangent bundle of the round `S^2` in the coordinate frame `d/dx, d/dy` of
/// the stereographic chart, with metric `4 / (1 + r^2)^2` and its Levi-Civita
/// connection `Gamma^k_ij = delta_ik f_j + delta_jk f_i - delta_ij f_k`,
/// `f = log 2 - log(1 + r^2)`.
pub fn conformal_sphere_tangent_bundle() -> BundleWithConnection {
    BundleWithConnection::new("TS2(coordinate frame)", 2, 2, |x: &[f64]| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        let df = [-2.0 * x[0] / s, -2.0 * x[1] / s];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        // Component along dx_j: matrix (k, i) -> Gamma^k_{ij}.
        let comps: Vec<CMatrix> = (0..2)
            .map(|j| CMatrix::from_fn(2, 2, |k, i| c(delta(i, k) * df[j] + delta(j, k) * df[i] - delta(i, j) * df[k], 0.0)))
            .collect();
        Ok(FormMatrix::from_one_form_components(&comps))
    })
    .with_metric(|x: &[f64]| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        Ok(algebra::identity(2).scale(4.0 / (s * s)))
    })
    .real()
    .metric_compatible(true)
}

/// Random smooth loop `W(theta) diag(e^{i k1 theta}, e^{i k2 theta}) W(theta)* exp(i K(theta))`
/// in `U(2)`, with `W = exp(i H(theta))` and `H`, `K` Hermitian
/// trigonometric polynomials of degree one. The winding of `det U` is `k1 + k2`.
#[derive(Debug, Clone)]
pub struct RandomLoop {
    pub k: [i32; 2],
    h: [CMatrix; 3],
    kk: [CMatrix; 2],
}

fn random_hermitian2(rng: &mut impl Rng, scale: f64) -> CMatrix {
    let m = CMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()).scale(0.5 * scale)
}

impl RandomLoop {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut k = [0i32; 2];
        while k[0] + k[1] == 0 {
            k = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
        }
        RandomLoop {
            k,
            h: [random_hermitian2(rng, 1.0), random_hermitian2(rng, 1.0), random_hermitian2(rng, 1.0)],
            kk: [random_hermitian2(rng, 0.3), random_hermitian2(rng, 0.3)],
        }
    }

    pub fn winding(&self) -> i32 {
        self.k[0] + self.k[1]
    }

    pub fn eval(&self, theta: f64) -> CMatrix {
        let (cs, sn) = (theta.cos(), theta.sin());
        let i = c(0.0, 1.0);
        let w = algebra::expm(&(&self.h[0] + self.h[1].scale(cs) + self.h[2].scale(sn)).map(|z| z * i));
        let d =
            algebra::diag(&[Complex64::from_polar(1.0, self.k[0] as f64 * theta), Complex64::from_polar(1.0, self.k[1] as f64 * theta)]);
        let k = algebra::expm(&(self.kk[0].scale(cs) + self.kk[1].scale(sn)).map(|z| z * i));
        &w * d * w.adjoint() * k
    }
}

/// Self-adjoint datum `A(theta) = -cot(theta / 2)` whose Cayley transform is
/// `e^{i theta}`; it vanishes only at `theta = pi`, increasing.
pub fn cayley_circle_datum(theta: f64) -> f64 {
    -1.0 / (0.5 * theta).tan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::SupertraceMode;
    use crate::spaces::{curvature, fd_jacobian};

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn factorial(n: u64) -> f64 {
        (1..=n).product::<u64>() as f64
    }

    #[test]
    fn kahler_origin_and_fubini_study_agree_at_zero() {
        for n in 1..=3 {
            let fs = fubini_study_at(&vec![0.0; 2 * n]).unwrap();
            assert!((&fs - &kahler_origin(n)).max_abs() < 1e-15);
        }
        // dz ^ dzbar = -2i dx ^ dy.
        let w = dz(2, 0).wedge(&dzbar(2, 0)).unwrap();
        assert!((w.coeff(&[0, 1]) - c(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn fubini_study_on_cp1_matches_closed_form() {
        for x in [[0.3, -0.2], [1.5, 2.0], [-4.0, 0.1]] {
            let fs = fubini_study_at(&x).unwrap();
            let s = 1.0 + x[0] * x[0] + x[1] * x[1];
            assert!((fs.coeff(&[0, 1]) - c(1.0 / (PI * s * s), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn polar_plane_jacobian_matches_finite_differences() {
        let p = polar_plane(2);
        let u = [0.7, 1.1, 2.0, 4.0];
        let a = p.jacobian(&u).unwrap();
        let f = |y: &[f64]| p.eval(y);
        let b = fd_jacobian(&f, &u, 1e-6).unwrap();
        assert!(algebra::max_norm_real(&(a - b)) < 1e-8);
        assert!(p.jacobian(&u).unwrap().determinant() > 0.0);
    }

    #[test]
    fn hyperplane_curvature_matches_chern_density() {
        let e = hyperplane_bundle();
        for x in [[0.0, 0.0], [0.5, -1.2], [3.0, 2.0]] {
            let f = curvature(&e, &x).unwrap();
            let c1 = f.get(0, 0).scale(c(0.0, 1.0 / (2.0 * PI)));
            assert!((c1.coeff(&[0, 1]) - c(hyperplane_chern_density(&x), 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn tau_perp_routes_agree_over_a_curved_base() {
        let e = hyperplane_bundle();
        let a = projective_tau_perp(&e, true).unwrap();
        let b = projective_tau_perp(&e, false).unwrap();
        let x = [0.3, -0.4, 0.8, 0.1];
        let fa = curvature(&a, &x).unwrap();
        let fb = curvature(&b, &x).unwrap();
        assert!(fa.try_sub(&fb).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn sphere_bundle_over_point_is_round() {
        let t = sphere_tangent_bundle(2).unwrap();
        let f = curvature(&t, &[0.0, 0.0]).unwrap();
        assert!((f.get(0, 1).coeff(&[0, 1]) - c(4.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn bs_family_is_unitary_with_the_right_kernel() {
        let fam = bs_resolution_family(3).unwrap();
        let u = fam.eval(&[PI, 0.9, 0.3, 1.7, 5.0]).unwrap();
        assert!(algebra::max_norm(&(u.adjoint() * &u - algebra::identity(3))) < 1e-14);
        // lambda = -1: a reflection in a line, so tr U = k - 2.
        assert!((u.trace() - c(1.0, 0.0)).norm() < 1e-14);
        let one = fam.eval(&[0.0, 0.9, 0.3, 1.7, 5.0]).unwrap();
        assert!(algebra::max_norm(&(one - algebra::identity(3))) < 1e-14);
    }

    #[test]
    fn residue_block_relations() {
        for n in 2..=4 {
            let lambda = c(0.4f64.cos(), 0.4f64.sin());
            let r = residue_blocks(n, lambda).unwrap();
            assert!(r.c.product(&r.c).unwrap().is_zero());
            assert!(r.c1.product(&r.c1).unwrap().is_zero());
            let bcb = r.b.product(&r.c).unwrap().product(&r.b).unwrap();
            let bbc1 = r.b.power(2).unwrap().product(&r.c1).unwrap();
            assert!(bcb.try_sub(&bbc1).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn wedge_power_lemma() {
        for n in 2..=3 {
            let lambda = c(1.3f64.cos(), 1.3f64.sin());
            let r = residue_blocks(n, lambda).unwrap();
            let lhs = r.omega.power(2 * n - 1).unwrap();
            let b_pow = r.b.power(2 * n - 2).unwrap();
            let bracket = r.c.scale(c(n as f64, 0.0)).try_add(&r.c1.scale(c((n - 1) as f64, 0.0))).unwrap();
            let rhs = b_pow.product(&bracket).unwrap().try_add(&r.b.power(2 * n - 1).unwrap()).unwrap();
            assert!(lhs.try_sub(&rhs).unwrap().max_abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn trace_of_odd_power_reduces_to_weighted_supertrace() {
        for n in 2..=4 {
            let lambda = c(2.1f64.cos(), 2.1f64.sin());
            let r = residue_blocks(n, lambda).unwrap();
            let dim = residue_dim(n);
            let lhs = r.omega.power(2 * n - 1).unwrap().trace();
            let d = residue_d_matrix(n).unwrap();
            let w = d.power(n - 1).unwrap().with_split(1, n - 1).unwrap().supertrace(SupertraceMode::Wstr).unwrap();
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let rhs = gen(dim, 0).wedge(&w).unwrap().scale_real(sign * r.alpha.norm_sqr().powi(n as i32 - 1));
            assert!((&lhs - &rhs).max_abs() < 1e-12 * (1.0 + lhs.max_abs()), "n = {n}");
        }
    }

    #[test]
    fn weighted_supertrace_of_d_power() {
        for n in 2..=4 {
            let d = residue_d_matrix(n).unwrap();
            let w = d.power(n - 1).unwrap().with_split(1, n - 1).unwrap().supertrace(SupertraceMode::Wstr).unwrap();
            let eta = residue_eta(n).unwrap();
            let mut eta_pow = AlternatingForm::scalar(residue_dim(n), c(1.0, 0.0));
            for _ in 0..n - 1 {
                eta_pow = eta_pow.wedge(&eta).unwrap();
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let factor = c(0.0, -2.0 * PI).powi(n as i32 - 1) * sign * (2 * n - 1) as f64;
            assert!((&w - &eta_pow.scale(factor)).max_abs() < 1e-12 * (1.0 + w.max_abs()));
            // Equivalently (-1)^{n-1} (2n-1) (n-1)! times the volume monomial.
            let mask: Vec<usize> = (1..residue_dim(n)).collect();
            let expected = sign * (2 * n - 1) as f64 * factorial(n as u64 - 1);
            assert!((w.coeff(&mask) - c(expected, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_integral_closed_form() {
        // int_0^{2 pi} (2 - 2 cos phi)^{n-1} dphi = 2 pi binom(2n-2, n-1), by the binomial oracle.
        for n in 1..=5u64 {
            let m = 4096;
            let h = 2.0 * PI / m as f64;
            let s: f64 = (0..m).map(|i| (2.0 - 2.0 * (i as f64 * h).cos()).powi(n as i32 - 1)).sum::<f64>() * h;
            assert!((s - 2.0 * PI * binom(2 * n - 2, n - 1)).abs() < 1e-9 * s);
        }
    }

    #[test]
    fn polar_of_inverts_polar_plane() {
        let p = polar_plane(1);
        for u in [[0.4, 0.3], [2.5, 5.9], [1.2, 3.1]] {
            let x = p.eval(&u).unwrap();
            let back = polar_of(x[0], x[1]);
            assert!((back[0] - u[0]).abs() < 1e-13 && (back[1] - u[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn random_hyperplane_section_has_one_zero() {
        use crate::currents::{find_signed_zeros, NewtonOptions};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let s = HyperplaneSection::random(&mut rng);
            let f = move |x: &[f64]| Ok(s.real_components(x));
            let dom = BoxDomain::cube(2, -4.0, 4.0);
            let zeros = find_signed_zeros(&f, &dom, "CP1", "graph[0:1]", 16, &NewtonOptions::default(), 1.0).unwrap();
            assert_eq!(zeros.points.len(), 1);
            assert_eq!(zeros.signed_count(), 1);
        }
    }

    #[test]
    fn height_gradient_zeros_are_both_positive() {
        use crate::currents::{find_signed_zeros, NewtonOptions};
        let a = [0.2, 0.6, -0.77];
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let xi = height_gradient_section(a);
        let f = move |x: &[f64]| Ok(xi(x));
        let dom = BoxDomain::cube(2, -6.0, 6.0);
        let zeros = find_signed_zeros(&f, &dom, "S2", "stereo", 24, &NewtonOptions::default(), 1.0).unwrap();
        assert_eq!(zeros.points.len(), 2);
        assert_eq!(zeros.signed_count(), 2);
        for s in [1.0, -1.0] {
            let target = stereographic_inverse(&a.map(|x| s * x / norm));
            assert!(zeros.points.iter().any(|z| (z.point.coords[0] - target[0]).hypot(z.point.coords[1] - target[1]) < 1e-8));
        }
    }

    #[test]
    fn conformal_tangent_bundle_has_round_curvature() {
        // Gaussian curvature 1: R(d_x, d_y) d_y = g(d_y, d_y) d_x, so R^0_1 = -R^1_0 = 4 / s^2 dx ^ dy.
        let e = conformal_sphere_tangent_bundle();
        for x in [[0.0, 0.0], [0.7, -0.3], [2.0, 1.5]] {
            let f = curvature(&e, &x).unwrap();
            let s = 1.0 + x[0] * x[0] + x[1] * x[1];
            assert!((f.get(0, 1).coeff(&[0, 1]) - c(4.0 / (s * s), 0.0)).norm() < 1e-6);
            assert!((f.get(1, 0).coeff(&[0, 1]) - c(-4.0 / (s * s), 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn random_loops_are_unitary_with_prescribed_winding() {
        use crate::currents::det_winding;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let l = RandomLoop::random(&mut rng);
            let u = l.eval(1.3);
            assert!(algebra::max_norm(&(u.adjoint() * &u - algebra::identity(2))) < 1e-12);
            assert!(algebra::max_norm(&(l.eval(0.0) - l.eval(2.0 * PI))) < 1e-12);
            let f = |th: f64| Ok(l.eval(th));
            let w = det_winding(&f, 2048).unwrap();
            assert!((w - l.winding() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn projective_flow_raises_the_potential() {
        let flow = projective_total_flow(2, 1, 1.0);
        let p = vec![0.1, 0.2, 0.3, -0.4];
        let mut last = flow.potential(&p);
        for t in [0.5, 1.0, 2.0] {
            let q = flow.apply(t, &p).unwrap();
            assert_eq!(&q[..2], &p[..2]);
            let r = (q[2] * q[2] + q[3] * q[3]).sqrt();
            assert!((r - 0.5 * t.exp()).abs() < 1e-12);
            let v = flow.potential(&q);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn cayley_datum_recovers_the_circle() {
        for th in [0.3, 1.0, 2.5, 4.0, 6.0] {
            let u = algebra::cayley(&CMatrix::from_element(1, 1, c(cayley_circle_datum(th), 0.0))).unwrap();
            assert!((u[(0, 0)] - Complex64::from_polar(1.0, th)).norm() < 1e-12, "theta = {th}");
        }
    }
}
