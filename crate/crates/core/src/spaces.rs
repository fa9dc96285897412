//! Model spaces: chart points, parameter boxes, parametrizations, matrix
//! families and bundles with connection, plus the finite-difference
//! calculus used to differentiate them.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{self, c, CMatrix, RMatrix};
use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, FormMatrix};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative skew-adjointness defect of a metric curvature that triggers the
/// Richardson retry.
const CURVATURE_SKEW_TOL: f64 = 1e-6;

/// A point in a named chart of a model space. Complex coordinates are stored
/// as interleaved (re, im) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub space: String,
    pub chart: String,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(space: impl Into<String>, chart: impl Into<String>, coords: Vec<f64>) -> Self {
        ChartPoint { space: space.into(), chart: chart.into(), coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Closed rectangular box `prod [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!("box bounds of lengths {} and {}", lo.len(), hi.len())));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Domain(format!("degenerate box {lo:?} x {hi:?}")));
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The cube `[a, b]^d`.
    pub fn cube(d: usize, a: f64, b: f64) -> Self {
        BoxDomain { lo: vec![a; d], hi: vec![b; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Distance to the nearest face, negative outside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (a, b))| (v - a).min(b - v)).fold(f64::INFINITY, f64::min)
    }

    /// Affine image of a point of the unit cube.
    pub fn from_unit(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(self.lo.iter().zip(&self.hi)).map(|(t, (a, b))| a + t * (b - a)).collect()
    }

    /// Cartesian product `self x other`, coordinates of `self` first.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        BoxDomain { lo: self.lo.iter().chain(&other.lo).copied().collect(), hi: self.hi.iter().chain(&other.hi).copied().collect() }
    }

    /// The `2^d` congruent sub-boxes obtained by halving every side.
    pub fn bisect_all(&self) -> Vec<BoxDomain> {
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| {
                let mut lo = self.lo.clone();
                let mut hi = self.hi.clone();
                for k in 0..d {
                    let mid = 0.5 * (self.lo[k] + self.hi[k]);
                    if mask & (1 << k) == 0 {
                        hi[k] = mid;
                    } else {
                        lo[k] = mid;
                    }
                }
                BoxDomain { lo, hi }
            })
            .collect()
    }

    /// Split along every axis into `n` equal pieces.
    pub fn grid(&self, n: usize) -> Vec<BoxDomain> {
        let d = self.dim();
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for k in 0..d {
                    let i = idx % n;
                    idx /= n;
                    let w = (self.hi[k] - self.lo[k]) / n as f64;
                    lo.push(self.lo[k] + i as f64 * w);
                    hi.push(self.lo[k] + (i + 1) as f64 * w);
                }
                BoxDomain { lo, hi }
            })
            .collect()
    }
}

/// Values that finite differences can combine linearly.
pub trait Linear: Clone {
    /// `a * self + b * other`.
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl Linear for f64 {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl Linear for Complex64 {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl Linear for Vec<f64> {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| a * x + b * y).collect()
    }
}

impl Linear for Vec<Complex64> {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| x * a + y * b).collect()
    }
}

impl Linear for CMatrix {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(a) + other.scale(b)
    }
}

impl Linear for RMatrix {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(a) + other.scale(b)
    }
}

impl Linear for AlternatingForm {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        &self.scale_real(a) + &other.scale_real(b)
    }
}

impl Linear for FormMatrix {
    fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(c(a, 0.0)).try_add(&other.scale(c(b, 0.0))).expect("finite differences of equal shapes")
    }
}

/// Central difference `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn central_difference<T: Linear>(f: &dyn Fn(&[f64]) -> Result<T>, x: &[f64], k: usize, h: f64) -> Result<T> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += h;
    xm[k] -= h;
    let fp = f(&xp)?;
    let fm = f(&xm)?;
    Ok(fp.axpby(0.5 / h, &fm, -0.5 / h))
}

/// Richardson-extrapolated central difference from steps `h` and `h/2`.
pub fn richardson_difference<T: Linear>(f: &dyn Fn(&[f64]) -> Result<T>, x: &[f64], k: usize, h: f64) -> Result<T> {
    let coarse = central_difference(f, x, k, h)?;
    let fine = central_difference(f, x, k, 0.5 * h)?;
    Ok(fine.axpby(4.0 / 3.0, &coarse, -1.0 / 3.0))
}

/// All partial derivatives at `x`.
pub fn partials<T: Linear>(f: &dyn Fn(&[f64]) -> Result<T>, x: &[f64], h: f64, richardson: bool) -> Result<Vec<T>> {
    (0..x.len()).map(|k| if richardson { richardson_difference(f, x, k, h) } else { central_difference(f, x, k, h) }).collect()
}

/// Jacobian (rows = outputs) of a vector map by central differences.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<RMatrix> {
    let cols = partials(f, x, h, false)?;
    let m = cols.first().map_or(0, |v| v.len());
    Ok(RMatrix::from_fn(m, x.len(), |i, k| cols[k][i]))
}

pub type VecMap = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type JacMap = Arc<dyn Fn(&[f64]) -> Result<RMatrix> + Send + Sync>;
pub type MatMap = Arc<dyn Fn(&[f64]) -> Result<CMatrix> + Send + Sync>;
pub type MatListMap = Arc<dyn Fn(&[f64]) -> Result<Vec<CMatrix>> + Send + Sync>;
pub type ConnMap = Arc<dyn Fn(&[f64]) -> Result<FormMatrix> + Send + Sync>;
pub type MetricMap = Arc<dyn Fn(&[f64]) -> Result<CMatrix> + Send + Sync>;

/// How a parametrization supplies its derivative.
#[derive(Clone)]
pub enum JacobianMode {
    Analytic(JacMap),
    FiniteDifference { step: f64 },
}

/// Smooth map from a closed box into chart coordinates of a model space.
///
/// The map must be defined on a neighbourhood of the box so that central
/// differences at points near the faces are meaningful.
#[derive(Clone)]
pub struct Parametrization {
    pub name: String,
    pub domain: BoxDomain,
    pub target: ChartPoint,
    map: VecMap,
    pub orientation: f64,
    pub jacobian_mode: JacobianMode,
}

impl fmt::Debug for Parametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Parametrization")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("target_space", &self.target.space)
            .field("target_dim", &self.target.coords.len())
            .field("orientation", &self.orientation)
            .finish()
    }
}

impl Parametrization {
    /// `target_dim` is the chart dimension of the image; the map uses central
    /// differences until an analytic Jacobian is attached.
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        space: impl Into<String>,
        target_dim: usize,
        map: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Parametrization {
            name: name.into(),
            domain,
            target: ChartPoint::new(space, "default", vec![0.0; target_dim]),
            map: Arc::new(map),
            orientation: 1.0,
            jacobian_mode: JacobianMode::FiniteDifference { step: DEFAULT_STEP },
        }
    }

    pub fn with_chart(mut self, chart: impl Into<String>) -> Self {
        self.target.chart = chart.into();
        self
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Result<RMatrix> + Send + Sync + 'static) -> Self {
        self.jacobian_mode = JacobianMode::Analytic(Arc::new(jac));
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.jacobian_mode = JacobianMode::FiniteDifference { step };
        self
    }

    pub fn with_orientation(mut self, orientation: f64) -> Self {
        self.orientation = orientation.signum();
        self
    }

    /// Same map with the opposite orientation.
    pub fn flipped(&self) -> Self {
        let mut p = self.clone();
        p.orientation = -p.orientation;
        p
    }

    /// Same map, finite-difference Jacobian.
    pub fn without_analytic_jacobian(&self) -> Self {
        let mut p = self.clone();
        p.jacobian_mode = JacobianMode::FiniteDifference { step: DEFAULT_STEP };
        p
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.target.coords.len()
    }

    pub fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let x = (self.map)(u)?;
        if x.len() != self.target_dim() {
            return Err(Error::Dimension(format!("{} returned {} coordinates, expected {}", self.name, x.len(), self.target_dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { location: u.to_vec() });
        }
        Ok(x)
    }

    pub fn point(&self, u: &[f64]) -> Result<ChartPoint> {
        Ok(ChartPoint::new(self.target.space.clone(), self.target.chart.clone(), self.eval(u)?))
    }

    /// Jacobian of the map, `target_dim x dim`.
    pub fn jacobian(&self, u: &[f64]) -> Result<RMatrix> {
        match &self.jacobian_mode {
            JacobianMode::Analytic(j) => j(u),
            JacobianMode::FiniteDifference { step } => {
                let f = |x: &[f64]| self.eval(x);
                fd_jacobian(&f, u, *step)
            }
        }
    }

    /// Composite `outer o self`, with the chain rule for the Jacobian.
    pub fn then(&self, name: impl Into<String>, outer: Parametrization) -> Result<Parametrization> {
        if outer.dim() != self.target_dim() {
            return Err(Error::Dimension(format!("composing {} into {}", self.name, outer.name)));
        }
        let inner = self.clone();
        let inner2 = self.clone();
        let outer2 = outer.clone();
        let map = move |u: &[f64]| outer.eval(&inner.eval(u)?);
        let orientation = self.orientation * outer2.orientation;
        Ok(Parametrization::new(name, self.domain.clone(), outer2.target.space.clone(), outer2.target_dim(), map)
            .with_chart(outer2.target.chart.clone())
            .with_orientation(orientation)
            .with_jacobian(move |u| {
                let x = inner2.eval(u)?;
                Ok(outer2.jacobian(&x)? * inner2.jacobian(u)?)
            }))
    }
}

/// Smooth map from a parameter box into square complex matrices (typically U(n)).
#[derive(Clone)]
pub struct MatrixFamily {
    pub name: String,
    pub domain: BoxDomain,
    map: MatMap,
    pub orientation: f64,
    pub step: f64,
}

impl fmt::Debug for MatrixFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixFamily").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl MatrixFamily {
    pub fn new(name: impl Into<String>, domain: BoxDomain, map: impl Fn(&[f64]) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        MatrixFamily { name: name.into(), domain, map: Arc::new(map), orientation: 1.0, step: DEFAULT_STEP }
    }

    pub fn with_orientation(mut self, orientation: f64) -> Self {
        self.orientation = orientation.signum();
        self
    }

    pub fn eval(&self, u: &[f64]) -> Result<CMatrix> {
        let m = (self.map)(u)?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { location: u.to_vec() });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Partial derivatives by central differences.
    pub fn partials(&self, u: &[f64]) -> Result<Vec<CMatrix>> {
        let f = |x: &[f64]| self.eval(x);
        partials(&f, u, self.step, false)
    }
}

/// `U^{-1} dU` on the parameter box: entries are 1-forms in the parameters.
pub fn maurer_cartan_pullback(phi: &MatrixFamily, u: &[f64]) -> Result<FormMatrix> {
    if phi.domain.margin(u) < 0.0 {
        return Err(Error::Boundary { point: u.to_vec(), margin: phi.domain.margin(u) });
    }
    let inv = algebra::inverse(&phi.eval(u)?)?;
    let comps: Vec<CMatrix> = phi.partials(u)?.iter().map(|d| &inv * d).collect();
    Ok(FormMatrix::from_one_form_components(&comps))
}

/// Vector bundle over a chart, trivialized, with a local connection form.
#[derive(Clone)]
pub struct BundleWithConnection {
    pub name: String,
    pub base_dim: usize,
    pub rank: usize,
    /// Real bundle (the structure group is orthogonal when metric compatible).
    pub real: bool,
    /// Whether the connection is declared compatible with the metric.
    pub metric_compatible: bool,
    /// Region of the chart where the trivialization is valid.
    pub domain: Option<BoxDomain>,
    pub step: f64,
    metric: MetricMap,
    connection: ConnMap,
}

impl fmt::Debug for BundleWithConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BundleWithConnection")
            .field("name", &self.name)
            .field("base_dim", &self.base_dim)
            .field("rank", &self.rank)
            .field("real", &self.real)
            .field("metric_compatible", &self.metric_compatible)
            .finish()
    }
}

impl BundleWithConnection {
    /// Bundle with the standard metric and the given connection form.
    pub fn new(
        name: impl Into<String>,
        base_dim: usize,
        rank: usize,
        connection: impl Fn(&[f64]) -> Result<FormMatrix> + Send + Sync + 'static,
    ) -> Self {
        BundleWithConnection {
            name: name.into(),
            base_dim,
            rank,
            real: false,
            metric_compatible: false,
            domain: None,
            step: DEFAULT_STEP,
            metric: Arc::new(move |_| Ok(algebra::identity(rank))),
            connection: Arc::new(connection),
        }
    }

    /// Product bundle with the trivial connection `d`.
    pub fn trivial(base_dim: usize, rank: usize) -> Self {
        let mut b = Self::new("trivial", base_dim, rank, move |_| Ok(FormMatrix::zeros(rank, base_dim)));
        b.metric_compatible = true;
        b
    }

    pub fn with_metric(mut self, metric: impl Fn(&[f64]) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        self.metric = Arc::new(metric);
        self
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn real(mut self) -> Self {
        self.real = true;
        self
    }

    pub fn metric_compatible(mut self, yes: bool) -> Self {
        self.metric_compatible = yes;
        self
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<CMatrix> {
        (self.metric)(x)
    }

    /// Local connection form at `x`, validated to be an `rank x rank` matrix of 1-forms.
    pub fn connection_form(&self, x: &[f64]) -> Result<FormMatrix> {
        if x.len() != self.base_dim {
            return Err(Error::Dimension(format!(
                "{}: point of dimension {} on a base of dimension {}",
                self.name,
                x.len(),
                self.base_dim
            )));
        }
        let theta = (self.connection)(x)?;
        if theta.size() != self.rank || theta.dim() != self.base_dim {
            return Err(Error::Dimension(format!(
                "{}: connection form is {}x{} over {}, expected {}x{} over {}",
                self.name,
                theta.size(),
                theta.size(),
                theta.dim(),
                self.rank,
                self.rank,
                self.base_dim
            )));
        }
        if !theta.is_zero()
            && (0..self.rank * self.rank).any(|k| {
                let e = theta.get(k / self.rank, k % self.rank);
                e.degrees_above(0.0).iter().any(|&d| d != 1)
            })
        {
            return Err(Error::Degree { expected: 1, found: 0 });
        }
        Ok(theta)
    }

    /// Components `Theta_k` (scalar matrices) of the connection form.
    pub fn connection_components(&self, x: &[f64]) -> Result<Vec<CMatrix>> {
        let theta = self.connection_form(x)?;
        Ok((0..self.base_dim).map(|k| theta.component(1 << k)).collect())
    }

    /// Connection on the pullback through a parametrization (analytic or
    /// finite-difference Jacobian of the parametrization).
    pub fn pullback(&self, p: &Parametrization) -> Result<BundleWithConnection> {
        if p.target_dim() != self.base_dim {
            return Err(Error::Dimension(format!("pulling back {} through {}", self.name, p.name)));
        }
        let this = self.clone();
        let this2 = self.clone();
        let par = p.clone();
        let par2 = p.clone();
        let rank = self.rank;
        let mut out = BundleWithConnection::new(format!("{}*{}", p.name, self.name), p.dim(), rank, move |u| {
            let x = par.eval(u)?;
            let j = par.jacobian(u)?;
            let comps = this.connection_components(&x)?;
            let pulled: Vec<CMatrix> = (0..j.ncols())
                .map(|a| comps.iter().enumerate().fold(CMatrix::zeros(rank, rank), |acc, (k, m)| acc + m.scale(j[(k, a)])))
                .collect();
            Ok(FormMatrix::from_one_form_components(&pulled))
        })
        .with_metric(move |u| this2.metric_at(&par2.eval(u)?));
        out.real = self.real;
        out.metric_compatible = self.metric_compatible;
        Ok(out)
    }
}

/// Curvature `dTheta + Theta ^ Theta` at `x`, with the default step policy.
pub fn curvature(e: &BundleWithConnection, x: &[f64]) -> Result<FormMatrix> {
    if let Some(dom) = &e.domain {
        let m = dom.margin(x);
        if m < e.step {
            return Err(Error::Boundary { point: x.to_vec(), margin: m });
        }
    }
    let first = curvature_with(e, x, e.step, false)?;
    if !e.metric_compatible {
        return Ok(first);
    }
    let h = e.metric_at(x)?;
    let defect = skew_defect(&first, &h)?;
    let scale = 1.0 + first.max_abs();
    if defect <= CURVATURE_SKEW_TOL * scale {
        return Ok(first);
    }
    let refined = curvature_with(e, x, e.step, true)?;
    let defect = skew_defect(&refined, &h)?;
    if defect <= CURVATURE_SKEW_TOL * scale {
        Ok(refined)
    } else {
        Err(Error::Validation { what: "skew-adjoint curvature", defect, tol: CURVATURE_SKEW_TOL * scale })
    }
}

/// Curvature with an explicit step and differencing rule.
pub fn curvature_with(e: &BundleWithConnection, x: &[f64], h: f64, richardson: bool) -> Result<FormMatrix> {
    let m = e.base_dim;
    let theta = e.connection_form(x)?;
    let comps = |y: &[f64]| e.connection_components(y);
    let flat = comps_as_vec(&comps);
    // The step grows with the coordinate: far out in a chart the components
    // vary on the scale |x| and carry rounding of relative size eps |x|.
    let derivs: Vec<Vec<CMatrix>> = (0..x.len())
        .map(|k| {
            let hk = h * x[k].abs().max(1.0);
            let d = if richardson { richardson_difference(&flat, x, k, hk) } else { central_difference(&flat, x, k, hk) }?;
            Ok(unflatten(&d, e.rank, m))
        })
        .collect::<Result<_>>()?;
    let mut d_theta = FormMatrix::zeros(e.rank, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let coeff = &derivs[i][j] - &derivs[j][i];
            let mask = (1u32 << i) | (1u32 << j);
            for a in 0..e.rank {
                for b in 0..e.rank {
                    let entry = d_theta.get_mut(a, b);
                    let v = entry.coeff_mask(mask) + coeff[(a, b)];
                    entry.set_mask(mask, v);
                }
            }
        }
    }
    d_theta.try_add(&theta.product(&theta)?)
}

fn comps_as_vec<'a>(f: &'a dyn Fn(&[f64]) -> Result<Vec<CMatrix>>) -> impl Fn(&[f64]) -> Result<Vec<Complex64>> + 'a {
    move |y| Ok(f(y)?.iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect())
}

fn unflatten(flat: &[Complex64], n: usize, count: usize) -> Vec<CMatrix> {
    (0..count).map(|k| CMatrix::from_column_slice(n, n, &flat[k * n * n..(k + 1) * n * n])).collect()
}

/// Skew-adjointness defect `max |G + G^dagger|` of `G = H^{1/2} F H^{-1/2}`,
/// the curvature in an orthonormalized frame, with `G^dagger_{ij} = conj(G_{ji})`.
/// Measuring in the orthonormal frame keeps the defect independent of the
/// conditioning of the metric.
pub fn skew_defect(f: &FormMatrix, h: &CMatrix) -> Result<f64> {
    let eig = algebra::hermitian_eigen(h)?;
    if eig.values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Validation {
            what: "positive definite metric",
            defect: eig.values.iter().cloned().fold(f64::INFINITY, f64::min),
            tol: 0.0,
        });
    }
    let root = eig.apply(|v| Complex64::new(v.sqrt(), 0.0));
    let root_inv = eig.apply(|v| Complex64::new(1.0 / v.sqrt(), 0.0));
    let g = f.left_scalar(&root)?.right_scalar(&root_inv)?;
    let n = g.size();
    let adj = FormMatrix::from_fn(n, g.dim(), |i, j| g.get(j, i).conj())?;
    Ok(g.try_add(&adj)?.max_abs())
}

/// Frame of a subbundle: columns spanning it, with an optional analytic
/// derivative (one matrix per chart direction).
#[derive(Clone)]
pub struct Frame {
    value: MatMap,
    derivative: Option<MatListMap>,
    pub step: f64,
}

impl Frame {
    pub fn new(value: impl Fn(&[f64]) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        Frame { value: Arc::new(value), derivative: None, step: DEFAULT_STEP }
    }

    pub fn with_derivative(mut self, d: impl Fn(&[f64]) -> Result<Vec<CMatrix>> + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// Same frame, derivative by central differences.
    pub fn finite_difference(&self) -> Self {
        Frame { value: self.value.clone(), derivative: None, step: self.step }
    }

    pub fn eval(&self, x: &[f64]) -> Result<CMatrix> {
        (self.value)(x)
    }

    pub fn partials(&self, x: &[f64]) -> Result<Vec<CMatrix>> {
        match &self.derivative {
            Some(d) => d(x),
            None => {
                let f = |y: &[f64]| self.eval(y);
                partials(&f, x, self.step, false)
            }
        }
    }
}

/// Orthogonal projection of an ambient connection onto the span of a frame:
/// `theta = G^{-1} F* H (dF + Theta F)` with `G = F* H F`, which becomes the
/// metric of the subbundle in that frame.
pub fn projected_connection(ambient: &BundleWithConnection, frame: Frame) -> Result<BundleWithConnection> {
    let amb = ambient.clone();
    let amb2 = ambient.clone();
    let fr = frame.clone();
    let fr2 = frame.clone();
    let rank = {
        let probe = vec![0.0; ambient.base_dim];
        let f0 = frame.eval(&probe)?;
        if f0.nrows() != ambient.rank {
            return Err(Error::Dimension(format!("frame has {} rows for an ambient bundle of rank {}", f0.nrows(), ambient.rank)));
        }
        f0.ncols()
    };
    let base_dim = ambient.base_dim;
    let mut out = BundleWithConnection::new(format!("proj({})", ambient.name), base_dim, rank, move |x| {
        let f = fr.eval(x)?;
        let h = amb.metric_at(x)?;
        let fh = f.adjoint() * &h;
        let g = &fh * &f;
        check_frame(&g)?;
        let g_inv = algebra::inverse(&g)?;
        let left = &g_inv * &fh;
        let df = fr.partials(x)?;
        let theta = amb.connection_components(x)?;
        let comps: Vec<CMatrix> = df.iter().zip(&theta).map(|(d, t)| &left * (d + t * &f)).collect();
        Ok(FormMatrix::from_one_form_components(&comps))
    })
    .with_metric(move |x| {
        let f = fr2.eval(x)?;
        let g = f.adjoint() * amb2.metric_at(x)? * &f;
        check_frame(&g)?;
        Ok(g)
    });
    out.real = ambient.real;
    out.metric_compatible = ambient.metric_compatible;
    out.domain = ambient.domain.clone();
    out.step = ambient.step;
    Ok(out)
}

fn check_frame(g: &CMatrix) -> Result<()> {
    let eig = algebra::hermitian_eigen(&algebra::symmetrize(g))?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let bottom = eig.values.first().copied().unwrap_or(0.0);
    if !(bottom > 1e-12 * top.max(1e-300)) {
        return Err(Error::Frame(format!("Gram matrix eigenvalues in [{bottom:.3e}, {top:.3e}]")));
    }
    Ok(())
}

/// Interleave complex coordinates as (re, im) pairs.
pub fn interleave(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inverse of [`interleave`].
pub fn deinterleave(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|p| c(p[0], p[1])).collect()
}

/// Graph chart of P(E + C) centred at [0:1]: the line spanned by (v, 1).
pub fn projective_bundle_chart(v: &[Complex64]) -> ChartPoint {
    ChartPoint::new("P(E+C)", "graph[0:1]", interleave(v))
}

/// Column spanning the tautological line at chart point `v`.
pub fn tautological_line(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n + 1, 1, |i, _| if i < n { v[i] } else { c(1.0, 0.0) })
}

/// Frame of the orthogonal complement of the tautological line:
/// columns `(e_j, -conj(v_j))`.
pub fn tau_perp_frame(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n + 1, n, |i, j| {
        if i < n {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        } else {
            -v[j].conj()
        }
    })
}

/// Derivatives of [`tau_perp_frame`] along the interleaved real coordinates.
pub fn tau_perp_frame_partials(n: usize) -> Vec<CMatrix> {
    (0..2 * n)
        .map(|k| {
            let j = k / 2;
            let d = if k % 2 == 0 { c(-1.0, 0.0) } else { c(0.0, 1.0) };
            CMatrix::from_fn(n + 1, n, |r, col| if r == n && col == j { d } else { c(0.0, 0.0) })
        })
        .collect()
}

/// `phi(s)` with `(I + v v^*)^{-1/2} = I + phi(|v|^2) v v^*`, and its derivative.
fn inverse_sqrt_coefficient(s: f64) -> (f64, f64) {
    let q = (1.0 + s).sqrt();
    let phi = -1.0 / (q * (q + 1.0));
    let dphi = (2.0 * q + 1.0) / ((q * q + q).powi(2) * 2.0 * q);
    (phi, dphi)
}

/// Unitary frame of `tau^perp`: [`tau_perp_frame`] times the inverse square
/// root of its Gram matrix `I + v v^*`. Well conditioned for all `v`.
pub fn tau_perp_unitary_frame(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let (phi, _) = inverse_sqrt_coefficient(s);
    let q = (1.0 + s).sqrt();
    // Rows `I + phi v v^*` over `-v^* / q`; the last row is formed directly
    // because `-v^* (I + phi v v^*)` cancels badly for large `|v|`.
    CMatrix::from_fn(n + 1, n, |i, j| {
        if i < n {
            let delta = if i == j { 1.0 } else { 0.0 };
            c(delta, 0.0) + v[i] * v[j].conj() * phi
        } else {
            -v[j].conj() / q
        }
    })
}

/// Derivatives of [`tau_perp_unitary_frame`] along the interleaved real coordinates.
pub fn tau_perp_unitary_frame_partials(v: &[Complex64]) -> Vec<CMatrix> {
    let n = v.len();
    let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let (phi, dphi) = inverse_sqrt_coefficient(s);
    let col = CMatrix::from_fn(n, 1, |i, _| v[i]);
    let vv = &col * col.adjoint();
    let q = (1.0 + s).sqrt();
    (0..2 * n)
        .map(|idx| {
            let j = idx / 2;
            let unit = if idx % 2 == 0 { c(1.0, 0.0) } else { c(0.0, 1.0) };
            let ds = 2.0 * (v[j].conj() * unit).re;
            let dv = CMatrix::from_fn(n, 1, |i, _| if i == j { unit } else { c(0.0, 0.0) });
            let dk = &vv * c(dphi * ds, 0.0) + (&dv * col.adjoint() + &col * dv.adjoint()) * c(phi, 0.0);
            CMatrix::from_fn(
                n + 1,
                n,
                |i, m| {
                    if i < n {
                        dk[(i, m)]
                    } else {
                        -dv[(m, 0)].conj() / q + v[m].conj() * (ds / (2.0 * q * q * q))
                    }
                },
            )
        })
        .collect()
}

/// Stereographic inclusion `v -> (1 - |v|^2, 2v) / (1 + |v|^2)` centred at the north pole.
pub fn stereographic(v: &[f64]) -> Vec<f64> {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push((1.0 - r2) / (1.0 + r2));
    out.extend(v.iter().map(|x| 2.0 * x / (1.0 + r2)));
    out
}

/// Stereographic chart centred at the south pole: `w -> (|w|^2 - 1, 2w) / (1 + |w|^2)`.
pub fn stereographic_south(w: &[f64]) -> Vec<f64> {
    let mut p = stereographic(w);
    p[0] = -p[0];
    p
}

/// Orthonormal oriented tangent frame of the sphere at the stereographic
/// point `v`: the normalized coordinate vectors `(1 + |v|^2)/2 dS/dv_j`.
pub fn sphere_tangent_frame(v: &[f64]) -> RMatrix {
    let n = v.len();
    let r2: f64 = v.iter().map(|x| x * x).sum();
    let s = 1.0 + r2;
    RMatrix::from_fn(n + 1, n, |i, j| {
        if i == 0 {
            -2.0 * v[j] / s
        } else {
            let k = i - 1;
            (if k == j { 1.0 } else { 0.0 }) - 2.0 * v[k] * v[j] / s
        }
    })
}

/// Derivatives of [`sphere_tangent_frame`] along each coordinate.
pub fn sphere_tangent_frame_partials(v: &[f64]) -> Vec<RMatrix> {
    let n = v.len();
    let r2: f64 = v.iter().map(|x| x * x).sum();
    let s = 1.0 + r2;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    (0..n)
        .map(|m| {
            RMatrix::from_fn(n + 1, n, |i, j| {
                if i == 0 {
                    -2.0 * delta(j, m) / s + 4.0 * v[j] * v[m] / (s * s)
                } else {
                    let k = i - 1;
                    -2.0 * (delta(k, m) * v[j] + v[k] * delta(j, m)) / s + 4.0 * v[k] * v[j] * v[m] / (s * s)
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::AlternatingForm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmatrix(n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_skew(n: usize, rng: &mut impl Rng) -> CMatrix {
        let a = random_cmatrix(n, rng);
        (&a - a.adjoint()).scale(0.5)
    }

    #[test]
    fn box_geometry() {
        let b = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.volume(), 4.0);
        assert!(b.contains(&[1.0, 0.0]));
        assert!((b.margin(&[1.9, 0.0]) - 0.1).abs() < 1e-15);
        assert!(b.margin(&[3.0, 0.0]) < 0.0);
        let total: f64 = b.bisect_all().iter().map(|c| c.volume()).sum();
        assert!((total - 4.0).abs() < 1e-15);
        assert_eq!(b.grid(3).len(), 9);
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn richardson_improves_on_central_difference() {
        let f = |x: &[f64]| Ok(x[0].exp());
        let exact = 1.0f64.exp();
        let plain: f64 = central_difference(&f, &[1.0], 0, 1e-2).unwrap();
        let rich: f64 = richardson_difference(&f, &[1.0], 0, 1e-2).unwrap();
        assert!((rich - exact).abs() < 1e-3 * (plain - exact).abs());
    }

    #[test]
    fn projective_chart_examples() {
        assert_eq!(projective_bundle_chart(&[c(0.0, 0.0)]).coords, vec![0.0, 0.0]);
        let line = tautological_line(&[c(1.0, 0.0)]);
        assert_eq!(line[(0, 0)], line[(1, 0)]);
    }

    #[test]
    fn tau_perp_is_orthogonal_to_the_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..4 {
            let v: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
            let line = tautological_line(&v);
            let frame = tau_perp_frame(&v);
            let w: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let wv: Complex64 = w.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
            let vec = CMatrix::from_fn(n + 1, 1, |i, _| if i < n { w[i] } else { -wv });
            assert!((line.adjoint() * &vec)[(0, 0)].norm() < 1e-14);
            assert!(algebra::max_norm(&(line.adjoint() * &frame)) < 1e-14);
            // The vector (w, -<w, v>) lies in the span of the frame columns.
            let coeffs = CMatrix::from_fn(n, 1, |i, _| w[i]);
            assert!(algebra::max_norm(&(&frame * coeffs - vec)) < 1e-14);
        }
    }

    #[test]
    fn tau_perp_partials_match_finite_differences() {
        let x = [0.3, -0.2, 0.5, 0.1];
        let f = |y: &[f64]| Ok(tau_perp_frame(&deinterleave(y)));
        let fd = partials(&f, &x, 1e-6, false).unwrap();
        for (a, b) in fd.iter().zip(tau_perp_frame_partials(2)) {
            assert!(algebra::max_norm(&(a - b)) < 1e-9);
        }
    }

    #[test]
    fn unitary_tau_perp_frame_is_orthonormal_and_matches_derivatives() {
        for x in [[0.3, -0.2, 0.5, 0.1], [4.0e3, -1.0e3, 2.5e3, 7.0e2]] {
            let v = deinterleave(&x);
            let u = tau_perp_unitary_frame(&v);
            let scale = 1.0 + x.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(algebra::max_norm(&(u.adjoint() * &u - CMatrix::identity(2, 2))) < 1e-13);
            assert!(algebra::max_norm(&(tautological_line(&v).adjoint() * &u)) < 1e-12 * scale);
            let f = |y: &[f64]| Ok(tau_perp_unitary_frame(&deinterleave(y)));
            let fd = partials(&f, &x, 1e-6 * scale, true).unwrap();
            for (a, b) in fd.iter().zip(tau_perp_unitary_frame_partials(&v)) {
                let d = algebra::max_norm(&(a - b));
                assert!(d < 1e-8 / scale, "{d}");
            }
        }
    }

    #[test]
    fn sphere_frame_is_orthonormal_tangent_and_matches_derivatives() {
        let v = [0.4, -0.7];
        let f = sphere_tangent_frame(&v);
        let p = stereographic(&v);
        assert!(((f.transpose() * &f) - RMatrix::identity(2, 2)).abs().max() < 1e-14);
        let pos = RMatrix::from_column_slice(3, 1, &p);
        assert!((pos.transpose() * &f).abs().max() < 1e-14);
        let g = |y: &[f64]| Ok(sphere_tangent_frame(y));
        let fd = partials(&g, &v, 1e-6, false).unwrap();
        for (a, b) in fd.iter().zip(sphere_tangent_frame_partials(&v)) {
            assert!((a - b).abs().max() < 1e-9);
        }
        // Positive multiple of the coordinate vectors, so the frame is oriented.
        let map = |y: &[f64]| Ok(stereographic(y));
        let j = fd_jacobian(&map, &v, 1e-6).unwrap();
        let gram = f.transpose() * j;
        assert!(gram[(0, 0)] > 0.0 && (gram[(0, 1)]).abs() < 1e-8);
    }

    #[test]
    fn stereographic_charts_agree_on_overlap() {
        let v = [0.3, 1.2];
        let r2 = v[0] * v[0] + v[1] * v[1];
        let w = [v[0] / r2, v[1] / r2];
        let a = stereographic(&v);
        let b = stereographic_south(&w);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn curvature_of_trivial_and_constant_connections() {
        let triv = BundleWithConnection::trivial(3, 2);
        assert!(curvature(&triv, &[0.1, 0.2, 0.3]).unwrap().is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let comps: Vec<CMatrix> = (0..3).map(|_| random_cmatrix(2, &mut rng)).collect();
        let theta = FormMatrix::from_one_form_components(&comps);
        let t2 = theta.clone();
        let e = BundleWithConnection::new("const", 3, 2, move |_| Ok(t2.clone()));
        let f = curvature(&e, &[0.0, 0.0, 0.0]).unwrap();
        let expected = theta.product(&theta).unwrap();
        assert!(f.try_sub(&expected).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn curvature_of_linear_connection_is_exact() {
        // Theta = x0 M dx1 has dTheta = M dx0 ^ dx1 and Theta ^ Theta = 0.
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(2.0, 0.0), c(-2.0, 0.0), c(0.0, -1.0)]);
        let m2 = m.clone();
        let e = BundleWithConnection::new("lin", 2, 2, move |x| {
            Ok(FormMatrix::from_one_form_components(&[CMatrix::zeros(2, 2), m2.scale(x[0])]))
        });
        let f = curvature(&e, &[0.3, 0.4]).unwrap();
        assert!(algebra::max_norm(&(f.component(0b11) - &m)) < 1e-9);
    }

    #[test]
    fn curvature_transforms_by_constant_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cmatrix(2, &mut rng);
        let b = random_cmatrix(2, &mut rng);
        let conn = move |x: &[f64]| Ok(FormMatrix::from_one_form_components(&[a.scale(x[1]), b.scale(x[0] * x[0])]));
        let g = random_cmatrix(2, &mut rng) + algebra::identity(2).scale(2.0);
        let g_inv = algebra::inverse(&g).unwrap();
        let e = BundleWithConnection::new("e", 2, 2, conn.clone());
        let (g1, gi1) = (g.clone(), g_inv.clone());
        let e2 = BundleWithConnection::new("e'", 2, 2, move |x| conn(x)?.sandwich(&gi1, &g1));
        let x = [0.2, -0.5];
        let f = curvature(&e, &x).unwrap().sandwich(&g_inv, &g).unwrap();
        let f2 = curvature(&e2, &x).unwrap();
        assert!(f.try_sub(&f2).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn curvature_rejects_points_near_the_boundary() {
        let e = BundleWithConnection::trivial(1, 1).with_domain(BoxDomain::cube(1, 0.0, 1.0));
        assert!(matches!(curvature(&e, &[1.0 - 1e-7]), Err(Error::Boundary { .. })));
    }

    #[test]
    fn maurer_cartan_examples() {
        let circle =
            MatrixFamily::new("e^{i theta}", BoxDomain::cube(1, 0.0, 6.3), |u| Ok(CMatrix::from_element(1, 1, c(0.0, u[0]).exp())));
        let mc = maurer_cartan_pullback(&circle, &[1.0]).unwrap();
        assert!((mc.get(0, 0).coeff(&[0]) - c(0.0, 1.0)).norm() < 1e-9);
        let constant = MatrixFamily::new("const", BoxDomain::cube(2, 0.0, 1.0), |_| Ok(algebra::identity(3)));
        assert!(maurer_cartan_pullback(&constant, &[0.5, 0.5]).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn maurer_cartan_of_a_circle_is_flat() {
        let circle =
            MatrixFamily::new("e^{i theta}", BoxDomain::cube(1, 0.0, 6.3), |u| Ok(CMatrix::from_element(1, 1, c(0.0, u[0]).exp())));
        let fam = circle.clone();
        let e = BundleWithConnection::new("mc", 1, 1, move |u| maurer_cartan_pullback(&fam, u));
        assert!(curvature(&e, &[2.0]).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn projected_trivial_connection_on_constant_frame_vanishes() {
        let amb = BundleWithConnection::trivial(2, 3);
        let frame = Frame::new(|_| Ok(CMatrix::from_fn(3, 2, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })));
        let sub = projected_connection(&amb, frame).unwrap();
        assert!(sub.connection_form(&[0.1, 0.2]).unwrap().is_zero());
    }

    #[test]
    fn projected_connection_rejects_degenerate_frames() {
        let amb = BundleWithConnection::trivial(1, 2);
        let frame = Frame::new(|_| Ok(CMatrix::from_element(2, 2, c(1.0, 0.0))));
        let sub = projected_connection(&amb, frame).unwrap();
        assert!(matches!(sub.connection_form(&[0.0]), Err(Error::Frame(_))));
    }

    fn tau_perp_bundle(n: usize, analytic: bool) -> BundleWithConnection {
        let amb = BundleWithConnection::trivial(2 * n, n + 1).metric_compatible(true);
        let mut frame = Frame::new(|x| Ok(tau_perp_frame(&deinterleave(x))));
        if analytic {
            frame = frame.with_derivative(move |_| Ok(tau_perp_frame_partials(n)));
        }
        projected_connection(&amb, frame).unwrap()
    }

    /// `dz_i ^ dzbar_j` in the interleaved real basis.
    fn dz_dzbar(n: usize, i: usize, j: usize) -> AlternatingForm {
        let dz = AlternatingForm::one_form(
            &(0..2 * n)
                .map(|k| {
                    if k == 2 * i {
                        c(1.0, 0.0)
                    } else if k == 2 * i + 1 {
                        c(0.0, 1.0)
                    } else {
                        c(0.0, 0.0)
                    }
                })
                .collect::<Vec<_>>(),
        );
        let dzb = AlternatingForm::one_form(
            &(0..2 * n)
                .map(|k| {
                    if k == 2 * j {
                        c(1.0, 0.0)
                    } else if k == 2 * j + 1 {
                        c(0.0, -1.0)
                    } else {
                        c(0.0, 0.0)
                    }
                })
                .collect::<Vec<_>>(),
        );
        dz.wedge(&dzb).unwrap()
    }

    #[test]
    fn chern_curvature_at_the_origin_is_dz_wedge_dzbar() {
        for n in 1..=3 {
            for analytic in [true, false] {
                let e = tau_perp_bundle(n, analytic);
                let f = curvature(&e, &vec![0.0; 2 * n]).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let defect = (f.get(i, j) - &dz_dzbar(n, i, j)).max_abs();
                        assert!(defect < 1e-6, "n={n} analytic={analytic} ({i},{j}): {defect}");
                    }
                }
            }
        }
    }

    #[test]
    fn projected_connection_is_metric_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let comps: Vec<CMatrix> = (0..2).map(|_| random_skew(2, &mut rng)).collect();
        let amb = BundleWithConnection::new("skew", 2, 2, move |x| {
            Ok(FormMatrix::from_one_form_components(&[comps[0].scale(1.0 + x[1]), comps[1].scale(x[0])]))
        })
        .metric_compatible(true);
        let sub = projected_connection(&amb, Frame::new(|x| Ok(tau_perp_frame(&deinterleave(x))))).unwrap();
        let x = [0.3, -0.4];
        // d G = theta* G + G theta for a metric connection in a non-orthonormal frame.
        let theta = sub.connection_components(&x).unwrap();
        let g = |y: &[f64]| sub.metric_at(y);
        let dg = partials(&g, &x, 1e-6, false).unwrap();
        let gx = sub.metric_at(&x).unwrap();
        for k in 0..2 {
            let rhs = theta[k].adjoint() * &gx + &gx * &theta[k];
            assert!(algebra::max_norm(&(&dg[k] - rhs)) < 1e-8);
        }
    }

    #[test]
    fn round_sphere_curvature_at_the_north_pole() {
        let amb = BundleWithConnection::trivial(2, 3).real().metric_compatible(true);
        let frame = Frame::new(|v| Ok(algebra::to_complex(&sphere_tangent_frame(v))))
            .with_derivative(|v| Ok(sphere_tangent_frame_partials(v).iter().map(algebra::to_complex).collect()));
        let e = projected_connection(&amb, frame).unwrap();
        let f = curvature(&e, &[0.0, 0.0]).unwrap();
        // F(X ^ Y) Z = <Y, Z> X - <X, Z> Y with the chart identification dS = 2 dv at the pole.
        let expected = 4.0;
        assert!((f.get(0, 1).coeff(&[0, 1]).re - expected).abs() < 1e-6);
        assert!((f.get(1, 0).coeff(&[0, 1]).re + expected).abs() < 1e-6);
        assert!(f.get(0, 0).max_abs() < 1e-8);
    }

    #[test]
    fn pullback_bundle_matches_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_cmatrix(2, &mut rng);
        let b = random_cmatrix(2, &mut rng);
        let e = BundleWithConnection::new("e", 2, 2, move |x| Ok(FormMatrix::from_one_form_components(&[a.scale(x[1]), b.clone()])));
        let p = Parametrization::new("polar", BoxDomain::cube(2, 0.1, 1.0), "R2", 2, |u| Ok(vec![u[0] * u[1].cos(), u[0] * u[1].sin()]));
        let pe = e.pullback(&p).unwrap();
        let u = [0.5, 0.7];
        let f_pulled = curvature(&pe, &u).unwrap();
        let f = curvature(&e, &p.eval(&u).unwrap()).unwrap();
        let j = p.jacobian(&u).unwrap();
        let det = j.determinant();
        assert!((f_pulled.component(0b11) - f.component(0b11).scale(det)).iter().all(|z| z.norm() < 1e-6));
    }

    #[test]
    fn parametrization_jacobians_agree() {
        let map = |u: &[f64]| Ok(vec![u[0] * u[1].cos(), u[0] * u[1].sin()]);
        let p = Parametrization::new("polar", BoxDomain::cube(2, 0.1, 1.0), "R2", 2, map);
        let q = p
            .clone()
            .with_jacobian(|u| Ok(RMatrix::from_row_slice(2, 2, &[u[1].cos(), -u[0] * u[1].sin(), u[1].sin(), u[0] * u[1].cos()])));
        let u = [0.4, 0.9];
        assert!((p.jacobian(&u).unwrap() - q.jacobian(&u).unwrap()).abs().max() < 1e-9);
        assert_eq!(p.flipped().orientation, -1.0);
        let comp = p.then("twice", q.clone()).unwrap();
        let fd = fd_jacobian(&|x: &[f64]| comp.eval(x), &u, 1e-6).unwrap();
        assert!((comp.jacobian(&u).unwrap() - fd).abs().max() < 1e-8);
    }
}
