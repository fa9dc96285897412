//! Characteristic forms: Chern forms of projected connections, the Euler
//! (Pfaffian) form, the odd forms `c_{k-1/2}`, the Maslov form, superconnection
//! Chern characters and the Mathai-Quillen form.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{self, c, CMatrix, MatrixTag, Tolerances};
use crate::error::{Error, Result};
use crate::exterior::{berezin, form_exp, AlternatingForm, FormMatrix, SupertraceMode};
use crate::integrate::exterior_derivative;
use crate::spaces::{self, curvature, maurer_cartan_pullback, BundleWithConnection, ChartPoint, MatMap, MatrixFamily, Parametrization};

/// Default outer step for finite-difference exterior derivatives of fields
/// that are themselves computed with finite differences.
pub const FIELD_STEP: f64 = 1e-3;

/// Relative tolerance of the closedness test.
pub const CLOSED_TOL: f64 = 1e-5;

type FormMap = Arc<dyn Fn(&[f64]) -> Result<AlternatingForm> + Send + Sync>;

/// A differential form over a chart, evaluated pointwise.
#[derive(Clone)]
pub struct FormField {
    pub name: String,
    pub space: String,
    pub chart: String,
    pub dim: usize,
    /// Declared degree; `None` for mixed-degree fields.
    pub degree: Option<usize>,
    pub closedness_claimed: bool,
    pub step: f64,
    eval: FormMap,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormField")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("chart", &self.chart)
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("closedness_claimed", &self.closedness_claimed)
            .finish()
    }
}

impl FormField {
    pub fn new(
        name: impl Into<String>,
        space: impl Into<String>,
        chart: impl Into<String>,
        dim: usize,
        degree: Option<usize>,
        eval: impl Fn(&[f64]) -> Result<AlternatingForm> + Send + Sync + 'static,
    ) -> Self {
        FormField {
            name: name.into(),
            space: space.into(),
            chart: chart.into(),
            dim,
            degree,
            closedness_claimed: false,
            step: FIELD_STEP,
            eval: Arc::new(eval),
        }
    }

    pub fn claim_closed(mut self) -> Self {
        self.closedness_claimed = true;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// Evaluate at chart coordinates, checking dimension, finiteness and the
    /// declared degree.
    pub fn evaluate(&self, x: &[f64]) -> Result<AlternatingForm> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!("{}: point of dimension {} in a chart of dimension {}", self.name, x.len(), self.dim)));
        }
        let f = (self.eval)(x)?;
        if f.dim() != self.dim {
            return Err(Error::Dimension(format!("{}: form over {} generators in a chart of dimension {}", self.name, f.dim(), self.dim)));
        }
        if f.terms().iter().any(|(_, z)| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { location: x.to_vec() });
        }
        if let Some(k) = self.degree {
            let tol = 1e-9 * (1.0 + f.max_abs());
            if let Some(&bad) = f.degrees_above(tol).iter().find(|&&d| d != k) {
                return Err(Error::Degree { expected: k, found: bad });
            }
        }
        Ok(f)
    }

    /// Evaluate at a chart point of the same space and chart.
    pub fn evaluate_point(&self, p: &ChartPoint) -> Result<AlternatingForm> {
        if p.space != self.space || p.chart != self.chart {
            return Err(Error::Domain(format!("{} lives on {}/{}, not {}/{}", self.name, self.space, self.chart, p.space, p.chart)));
        }
        self.evaluate(&p.coords)
    }

    /// Degree-`k` component as a field of that degree.
    pub fn part(&self, k: usize) -> FormField {
        let this = self.clone();
        let mut out = FormField::new(format!("{}[{k}]", self.name), self.space.clone(), self.chart.clone(), self.dim, Some(k), move |x| {
            Ok(this.evaluate(x)?.part(k))
        });
        out.closedness_claimed = self.closedness_claimed;
        out.step = self.step;
        out
    }

    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("wedge of fields over {} and {}", self.dim, other.dim)));
        }
        let (a, b) = (self.clone(), other.clone());
        let degree = match (self.degree, other.degree) {
            (Some(p), Some(q)) => Some(p + q),
            _ => None,
        };
        let mut out =
            FormField::new(format!("{}^{}", self.name, other.name), self.space.clone(), self.chart.clone(), self.dim, degree, move |x| {
                a.evaluate(x)?.wedge(&b.evaluate(x)?)
            });
        out.closedness_claimed = self.closedness_claimed && other.closedness_claimed;
        out.step = self.step.max(other.step);
        Ok(out)
    }

    /// Product with a smooth function (closedness is not preserved).
    pub fn times_function(&self, g: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> FormField {
        let this = self.clone();
        let mut out = FormField::new(format!("g*{}", self.name), self.space.clone(), self.chart.clone(), self.dim, self.degree, move |x| {
            Ok(this.evaluate(x)?.scale(g(x)))
        });
        out.step = self.step;
        out
    }

    pub fn scale(&self, s: Complex64) -> FormField {
        let this = self.clone();
        let mut out = FormField::new(self.name.clone(), self.space.clone(), self.chart.clone(), self.dim, self.degree, move |x| {
            Ok(this.evaluate(x)?.scale(s))
        });
        out.closedness_claimed = self.closedness_claimed;
        out.step = self.step;
        out
    }

    /// Pullback to the parameter box of `p`.
    pub fn pullback(&self, p: &Parametrization) -> Result<FormField> {
        if p.target_dim() != self.dim {
            return Err(Error::Dimension(format!(
                "pulling back {} (dim {}) through {} (target dim {})",
                self.name,
                self.dim,
                p.name,
                p.target_dim()
            )));
        }
        let (this, par) = (self.clone(), p.clone());
        let mut out = FormField::new(format!("{}*{}", p.name, self.name), p.name.clone(), "parameters", p.dim(), self.degree, move |u| {
            this.evaluate(&par.eval(u)?)?.pullback(&par.jacobian(u)?)
        });
        out.closedness_claimed = self.closedness_claimed;
        out.step = self.step;
        Ok(out)
    }

    /// Central-difference exterior derivative with Richardson extrapolation.
    pub fn exterior_derivative(&self, x: &[f64]) -> Result<AlternatingForm> {
        let f = |y: &[f64]| self.evaluate(y);
        exterior_derivative(&f, x, self.step, true)
    }

    /// `|d omega| / max(|omega|, |partial omega|)` at `x`.
    pub fn closedness_residual(&self, x: &[f64]) -> Result<f64> {
        let f = |y: &[f64]| self.evaluate(y);
        let d = exterior_derivative(&f, x, self.step, true)?;
        let parts = spaces::partials(&f, x, self.step, true)?;
        let scale = parts.iter().map(|p| p.max_abs()).fold(f(x)?.max_abs(), f64::max);
        if scale < 1e-300 {
            return Ok(0.0);
        }
        Ok(d.max_abs() / scale)
    }

    /// Largest closedness residual over the sample points; errors above `tol`.
    pub fn check_closed(&self, points: &[Vec<f64>], tol: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in points {
            let r = self.closedness_residual(p)?;
            worst = worst.max(r);
            if r > tol {
                return Err(Error::Validation { what: "closed form", defect: r, tol });
            }
        }
        Ok(worst)
    }
}

fn i_over_2pi() -> Complex64 {
    c(0.0, 1.0 / (2.0 * PI))
}

/// `c_n = (i / 2 pi)^n det F` for the connection of a rank-`n` bundle.
pub fn top_chern_form(conn: &BundleWithConnection) -> FormField {
    let e = conn.clone();
    let n = conn.rank;
    FormField::new(format!("c_{n}({})", conn.name), conn.name.clone(), "default", conn.base_dim, Some(2 * n), move |x| {
        let f = curvature(&e, x)?;
        Ok(f.det()?.scale(i_over_2pi().powi(n as i32)))
    })
    .claim_closed()
}

/// Principal square root and its inverse of a positive Hermitian matrix.
fn sqrt_pair(g: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let eig = algebra::hermitian_eigen(&algebra::symmetrize(g))?;
    if eig.values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Frame("metric is not positive definite".into()));
    }
    Ok((eig.apply(|v| c(v.sqrt(), 0.0)), eig.apply(|v| c(1.0 / v.sqrt(), 0.0))))
}

fn is_identity(g: &CMatrix) -> bool {
    algebra::max_norm(&(g - algebra::identity(g.nrows()))) <= 1e-12
}

/// Euler form `(2 pi)^{-n/2} Pf F` at `x`, computed in the orthonormal frame
/// obtained from the bundle frame by `G^{-1/2}`.
pub fn pfaffian_at(conn: &BundleWithConnection, x: &[f64]) -> Result<AlternatingForm> {
    let n = conn.rank;
    if n % 2 == 1 {
        return Err(Error::Dimension(format!("Pfaffian form needs even rank, got {n}")));
    }
    let f = curvature(conn, x)?;
    let g = conn.metric_at(x)?;
    let f = if is_identity(&g) {
        f
    } else {
        let (s, s_inv) = sqrt_pair(&g)?;
        f.sandwich(&s, &s_inv)?
    };
    let adj = FormMatrix::from_fn(n, f.dim(), |i, j| f.get(j, i).clone())?;
    let defect = f.try_add(&adj)?.max_abs();
    let tol = 1e-6 * (1.0 + f.max_abs());
    if defect > tol {
        return Err(Error::Validation { what: "antisymmetric curvature", defect, tol });
    }
    Ok(f.pfaffian()?.scale_real((2.0 * PI).powf(-(n as f64) / 2.0)))
}

/// The Euler form as a field.
pub fn pfaffian_form(conn: &BundleWithConnection) -> Result<FormField> {
    if conn.rank % 2 == 1 {
        return Err(Error::Dimension(format!("Pfaffian form needs even rank, got {}", conn.rank)));
    }
    let e = conn.clone();
    Ok(FormField::new(format!("Pf({})", conn.name), conn.name.clone(), "default", conn.base_dim, Some(conn.rank), move |x| {
        pfaffian_at(&e, x)
    })
    .claim_closed())
}

/// Normalization `-(i / 2 pi)^k ((k-1)!)^2 / (2k-1)!` of `c_{k-1/2}`.
pub fn odd_chern_constant(k: usize) -> Complex64 {
    let fact = |m: usize| (1..=m).map(|v| v as f64).product::<f64>();
    -i_over_2pi().powi(k as i32) * (fact(k - 1).powi(2) / fact(2 * k - 1))
}

/// `c_{k-1/2} = const * tr (g^{-1} dg)^{2k-1}` pulled back through a family.
pub fn odd_chern_form(k: usize, phi: &MatrixFamily) -> Result<FormField> {
    if k == 0 {
        return Err(Error::Dimension("odd Chern forms start at k = 1".into()));
    }
    let fam = phi.clone();
    let constant = odd_chern_constant(k);
    let deg = 2 * k - 1;
    Ok(FormField::new(format!("c_{k}-1/2"), phi.name.clone(), "parameters", phi.dim(), Some(deg), move |u| {
        let w = maurer_cartan_pullback(&fam, u)?;
        if deg > w.dim() {
            return Ok(AlternatingForm::zero(w.dim()));
        }
        Ok(w.power(deg)?.trace().scale(constant))
    })
    .claim_closed())
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    algebra::validate(u, MatrixTag::Unitary, &Tolerances::default())
}

/// Components `tr U^{-1} dU` and `tr U^{-1} [Theta, U]` along each direction.
fn maslov_components(u: &MatMap, conn: &BundleWithConnection, x: &[f64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let ux = u(x)?;
    check_unitary(&ux)?;
    let inv = ux.adjoint();
    let f = |y: &[f64]| u(y);
    let du = spaces::partials(&f, x, conn.step, false)?;
    let theta = conn.connection_components(x)?;
    let plain = du.iter().map(|d| (&inv * d).trace()).collect();
    let twist = theta.iter().map(|t| (&inv * (t * &ux - &ux * t)).trace()).collect();
    Ok((plain, twist))
}

/// `(1 / 2 pi i) tr U^{-1} (nabla U)` with `nabla U = dU + [Theta, U]`.
pub fn maslov_form(u: MatMap, conn: &BundleWithConnection) -> FormField {
    let e = conn.clone();
    let m = conn.base_dim;
    FormField::new(format!("maslov({})", conn.name), conn.name.clone(), "default", m, Some(1), move |x| {
        let (plain, twist) = maslov_components(&u, &e, x)?;
        let coeffs: Vec<Complex64> = plain.iter().zip(&twist).map(|(a, b)| (a + b) / c(0.0, 2.0 * PI)).collect();
        Ok(AlternatingForm::one_form(&coeffs))
    })
    .claim_closed()
}

/// Largest `|tr U^{-1} [Theta, U]|`, which vanishes identically.
pub fn maslov_connection_defect(u: &MatMap, conn: &BundleWithConnection, x: &[f64]) -> Result<f64> {
    let (_, twist) = maslov_components(u, conn, x)?;
    Ok(twist.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Parity of a superconnection datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `E = E+ + E-` with the given ranks and `A` odd.
    Even { p: usize, q: usize },
    /// Ungraded `E`, realized on `E + E` with the Clifford generator off the diagonal.
    Odd,
}

/// Calibration of the odd Chern character: the degree-one component of the
/// rank-one Cayley datum integrates to the winding number.
pub const ODD_CALIBRATION: Complex64 = Complex64 { re: 0.0, im: 0.564_189_583_547_756_3 };

fn block_split(m: &CMatrix, p: usize) -> (f64, f64) {
    let n = m.nrows();
    let mut diag = 0.0f64;
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)].norm();
            if (i < p) == (j < p) {
                diag = diag.max(v);
            } else {
                off = off.max(v);
            }
        }
    }
    (diag, off)
}

/// Curvature of the superconnection `nabla + i t A` (or `nabla + i t A sigma`),
/// realized in ungraded form matrices:
///
/// * even: `F - t^2 A^2 + i t eps nabla A`,
/// * odd: blocks `F - t^2 A^2` on the diagonal and `+- i t nabla A` off it,
///
/// where `nabla A = dA + [Theta, A]` by central differences. The factor `eps`
/// on odd-degree terms implements the sign rule of the graded tensor product.
pub fn superconnection_curvature(conn: &BundleWithConnection, a: &MatMap, t: f64, parity: Parity, x: &[f64]) -> Result<FormMatrix> {
    let n = conn.rank;
    let m = conn.base_dim;
    let ax = a(x)?;
    if ax.nrows() != n || ax.ncols() != n {
        return Err(Error::Dimension(format!("endomorphism of size {} on a bundle of rank {n}", ax.nrows())));
    }
    algebra::validate(&ax, MatrixTag::Hermitian, &Tolerances::default())?;
    let f = curvature(conn, x)?;
    let theta = conn.connection_components(x)?;
    let fa = |y: &[f64]| a(y);
    let da = spaces::partials(&fa, x, conn.step, false)?;
    let nabla_a: Vec<CMatrix> = da.iter().zip(&theta).map(|(d, th)| d + th * &ax - &ax * th).collect();
    let a2 = (&ax * &ax).scale(-t * t);
    let it = c(0.0, t);
    match parity {
        Parity::Even { p, q } => {
            if p + q != n {
                return Err(Error::Grading(format!("split ({p},{q}) of a bundle of rank {n}")));
            }
            let scale = algebra::max_norm(&ax).max(1.0);
            let (diag, _) = block_split(&ax, p);
            if diag > 1e-12 * scale {
                return Err(Error::Grading(format!("endomorphism is not odd: diagonal blocks of size {diag:.3e}")));
            }
            for th in &theta {
                let (_, off) = block_split(th, p);
                if off > 1e-12 * algebra::max_norm(th).max(1.0) {
                    return Err(Error::Grading("connection does not preserve the grading".into()));
                }
            }
            let eps: Vec<f64> = (0..n).map(|i| if i < p { 1.0 } else { -1.0 }).collect();
            let odd: Vec<CMatrix> = nabla_a.iter().map(|na| CMatrix::from_fn(n, n, |i, j| na[(i, j)] * it * eps[i])).collect();
            let out = f.try_add(&FormMatrix::from_scalar(&a2, m))?.try_add(&FormMatrix::from_one_form_components(&odd))?;
            out.with_split(p, q)
        }
        Parity::Odd => {
            let big = |tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix| {
                let mut out = CMatrix::zeros(2 * n, 2 * n);
                out.view_mut((0, 0), (n, n)).copy_from(tl);
                out.view_mut((0, n), (n, n)).copy_from(tr);
                out.view_mut((n, 0), (n, n)).copy_from(bl);
                out.view_mut((n, n), (n, n)).copy_from(br);
                out
            };
            let zero = CMatrix::zeros(n, n);
            let doubled_f =
                FormMatrix::from_fn(
                    2 * n,
                    m,
                    |i, j| {
                        if (i < n) == (j < n) {
                            f.get(i % n, j % n).clone()
                        } else {
                            AlternatingForm::zero(m)
                        }
                    },
                )?;
            let scalar = big(&a2, &zero, &zero, &a2);
            let odd: Vec<CMatrix> =
                nabla_a.iter().map(|na| big(&zero, &na.scale(t).map(|z| z * c(0.0, 1.0)), &na.map(|z| -z * it), &zero)).collect();
            let out = doubled_f.try_add(&FormMatrix::from_scalar(&scalar, m))?.try_add(&FormMatrix::from_one_form_components(&odd))?;
            out.with_split(n, n)
        }
    }
}

/// Chern character of a superconnection curvature.
///
/// Even: `str e^{F}` with the degree-`2j` part scaled by `(i / 2 pi)^j`.
/// Odd: the Clifford coefficient of `e^{F}` (bottom-left block trace), with
/// the degree-`(2j+1)` part scaled by `ODD_CALIBRATION (i / 2 pi)^j`.
pub fn chern_character(fm: &FormMatrix, parity: Parity) -> Result<AlternatingForm> {
    let e = form_exp(fm, None)?;
    match parity {
        Parity::Even { .. } => {
            let s = e.supertrace(SupertraceMode::Even)?;
            Ok(s.rescale_by_degree(|d| if d % 2 == 0 { i_over_2pi().powi((d / 2) as i32) } else { c(0.0, 0.0) }))
        }
        Parity::Odd => {
            let s = e.supertrace(SupertraceMode::Odd)?;
            Ok(s.rescale_by_degree(|d| if d % 2 == 1 { ODD_CALIBRATION * i_over_2pi().powi((d / 2) as i32) } else { c(0.0, 0.0) }))
        }
    }
}

/// The Chern character as a mixed-degree closed field on the base.
pub fn chern_character_form(conn: &BundleWithConnection, a: MatMap, t: f64, parity: Parity) -> FormField {
    let e = conn.clone();
    FormField::new(format!("ch({}, t={t})", conn.name), conn.name.clone(), "default", conn.base_dim, None, move |x| {
        chern_character(&superconnection_curvature(&e, &a, t, parity, x)?, parity)
    })
    .claim_closed()
}

/// Same bundle in the orthonormal frame `e G^{-1/2}`:
/// `Theta' = S Theta S^{-1} - dS S^{-1}` with `S = G^{1/2}`.
pub fn orthonormal_gauge(conn: &BundleWithConnection) -> BundleWithConnection {
    let e = conn.clone();
    let rank = conn.rank;
    let mut out = BundleWithConnection::new(format!("on({})", conn.name), conn.base_dim, rank, move |x| {
        let g = e.metric_at(x)?;
        let theta = e.connection_components(x)?;
        if theta.is_empty() {
            // Over a point there is nothing to gauge.
            return Ok(FormMatrix::zeros(rank, 0));
        }
        if is_identity(&g) {
            return Ok(FormMatrix::from_one_form_components(&theta));
        }
        let (s, s_inv) = sqrt_pair(&g)?;
        let sq = |y: &[f64]| Ok(sqrt_pair(&e.metric_at(y)?)?.0);
        let ds = spaces::partials(&sq, x, e.step, false)?;
        let comps: Vec<CMatrix> = theta.iter().zip(&ds).map(|(th, d)| &s * th * &s_inv - d * &s_inv).collect();
        Ok(FormMatrix::from_one_form_components(&comps))
    });
    out.real = conn.real;
    out.metric_compatible = conn.metric_compatible;
    out.domain = conn.domain.clone();
    out.step = conn.step;
    out
}

/// Mathai-Quillen form `(-1)^{n(n-1)/2} (2 pi)^{-n/2} B(e^{-omega_t})` with
/// `omega_t = t^2 |xi|^2 / 2 + t nabla xi + F` at base point `x` and fiber
/// vector `xi`, over the total chart `(x, xi)`.
///
/// The bundle must be real, of even rank, in an orthonormal frame (see
/// [`orthonormal_gauge`]). Grassmann generators of the bundle are placed after
/// all chart generators and removed by the Berezin integral.
pub fn mathai_quillen_at(conn: &BundleWithConnection, t: f64, x: &[f64], xi: &[f64]) -> Result<AlternatingForm> {
    let n = conn.rank;
    let m = conn.base_dim;
    if n % 2 == 1 {
        return Err(Error::Dimension(format!("Mathai-Quillen form needs even rank, got {n}")));
    }
    if xi.len() != n || x.len() != m {
        return Err(Error::Dimension(format!("point ({}, {}) on a rank-{n} bundle over dimension {m}", x.len(), xi.len())));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("Mathai-Quillen parameter t = {t} must be non-negative")));
    }
    let total = m + 2 * n;
    if total > crate::exterior::MAX_DIM {
        return Err(Error::Dimension(format!("{total} generators exceed the exterior algebra limit")));
    }
    let f = curvature(conn, x)?;
    let theta = conn.connection_components(x)?;
    let gen = |i: usize| {
        let mut g = AlternatingForm::zero(total);
        g.set_mask(1 << i, c(1.0, 0.0));
        g
    };
    let mut w = AlternatingForm::zero(total);
    for a in 0..n {
        // (nabla xi)_a = d xi_a + sum_b Theta_ab xi_b
        let mut one = gen(m + a);
        for (k, th) in theta.iter().enumerate() {
            let coeff: Complex64 = (0..n).map(|b| th[(a, b)] * xi[b]).sum();
            one += &gen(k).scale(coeff);
        }
        w += &one.wedge(&gen(m + n + a))?.scale_real(t);
    }
    for a in 0..n {
        for b in 0..n {
            let fab = f.get(a, b).extend(total, 0)?;
            w += &fab.wedge(&gen(m + n + a))?.wedge(&gen(m + n + b))?.scale_real(0.5);
        }
    }
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    let e = (-&w).exp().scale_real((-0.5 * t * t * r2).exp());
    let sign = if (n * (n - 1) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(berezin(&e, n, 1.0)?.scale_real(sign * (2.0 * PI).powf(-(n as f64) / 2.0)))
}

/// The Mathai-Quillen form as a closed `n`-form on the total chart `(x, xi)`.
pub fn mathai_quillen_form(conn: &BundleWithConnection, t: f64) -> Result<FormField> {
    if conn.rank % 2 == 1 {
        return Err(Error::Dimension(format!("Mathai-Quillen form needs even rank, got {}", conn.rank)));
    }
    let e = orthonormal_gauge(conn);
    let m = conn.base_dim;
    let n = conn.rank;
    Ok(FormField::new(format!("MQ({}, t={t})", conn.name), format!("{}-total", conn.name), "default", m + n, Some(n), move |y| {
        mathai_quillen_at(&e, t, &y[..m], &y[m..])
    })
    .claim_closed())
}
