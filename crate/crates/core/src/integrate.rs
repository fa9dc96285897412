//! Oriented integration of forms over parametrized boxes: tensor Gauss and
//! Monte-Carlo quadrature, fiber integrals, transgression pairings and
//! flow-tube volumes.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{c, RMatrix};
use crate::charforms::FormField;
use crate::error::{Error, Result};
use crate::exterior::{berezin, AlternatingForm};
use crate::flows::FlowSpec;
use crate::spaces::{self, BoxDomain, Parametrization};

/// `d omega = sum_k dx_k ^ d_k omega` by central differences.
pub fn exterior_derivative(f: &dyn Fn(&[f64]) -> Result<AlternatingForm>, x: &[f64], h: f64, richardson: bool) -> Result<AlternatingForm> {
    let dim = x.len();
    let parts = spaces::partials(f, x, h, richardson)?;
    let mut out = AlternatingForm::zero(dim);
    for (k, p) in parts.iter().enumerate() {
        out += &AlternatingForm::basis(dim, &[k])?.wedge(p)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    GaussTensor { points: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    None,
    /// `|Q_n - Q_m|` against a coarser tensor rule.
    Richardson,
    /// Sample standard error of the Monte-Carlo mean.
    McStderr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub error_mode: ErrorMode,
}

impl Scheme {
    pub fn gauss(points: usize) -> Self {
        Scheme { kind: SchemeKind::GaussTensor { points }, error_mode: ErrorMode::Richardson }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Scheme { kind: SchemeKind::MonteCarlo { samples, seed }, error_mode: ErrorMode::McStderr }
    }

    pub fn with_error_mode(mut self, mode: ErrorMode) -> Self {
        self.error_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.error_mode) {
            (SchemeKind::GaussTensor { points }, _) if points < 2 => {
                Err(Error::Usage(format!("Gauss rule needs at least 2 points per axis, got {points}")))
            }
            (SchemeKind::MonteCarlo { samples, .. }, _) if samples < 100 => {
                Err(Error::Usage(format!("Monte-Carlo needs at least 100 samples, got {samples}")))
            }
            (SchemeKind::GaussTensor { .. }, ErrorMode::McStderr) => Err(Error::Usage("standard error is a Monte-Carlo estimate".into())),
            (SchemeKind::MonteCarlo { .. }, ErrorMode::Richardson) => Err(Error::Usage("Richardson estimates need a tensor rule".into())),
            _ => Ok(()),
        }
    }
}

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

/// Vector-valued integral; `error` is the largest componentwise estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct VecIntegral {
    pub values: Vec<Complex64>,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrand returning a fixed-length vector.
pub type VecIntegrand<'a> = dyn Fn(&[f64]) -> Result<Vec<Complex64>> + Sync + 'a;

fn add_into(acc: &mut [Complex64], v: &[Complex64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Pairwise sum of equal-length vectors, independent of thread scheduling.
pub fn pairwise_sum(vs: &[Vec<Complex64>], len: usize) -> Vec<Complex64> {
    if vs.len() <= 8 {
        let mut acc = vec![c(0.0, 0.0); len];
        for v in vs {
            add_into(&mut acc, v);
        }
        return acc;
    }
    let (a, b) = vs.split_at(vs.len() / 2);
    let mut left = pairwise_sum(a, len);
    add_into(&mut left, &pairwise_sum(b, len));
    left
}

fn gauss_rule(n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 1 {
        return Ok(vec![(0.0, 2.0)]);
    }
    let rule = GaussLegendre::new(n).map_err(|e| Error::Usage(format!("Gauss-Legendre rule of degree {n}: {e}")))?;
    Ok(rule.as_node_weight_pairs().to_vec())
}

fn check_values(v: &[Complex64], len: usize, at: &[f64]) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dimension(format!("integrand returned {} components, expected {len}", v.len())));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { location: at.to_vec() });
    }
    Ok(())
}

fn gauss_tensor(domain: &BoxDomain, n: usize, f: &VecIntegrand, len: usize) -> Result<Vec<Complex64>> {
    let rule = gauss_rule(n)?;
    let d = domain.dim();
    let total = n.checked_pow(d as u32).ok_or_else(|| Error::Usage("tensor rule too large".into()))?;
    let half: Vec<f64> = (0..d).map(|k| 0.5 * (domain.hi[k] - domain.lo[k])).collect();
    let terms: Vec<Vec<Complex64>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = Vec::with_capacity(d);
            let mut w = 1.0;
            for k in 0..d {
                let (node, weight) = rule[idx % n];
                idx /= n;
                x.push(domain.lo[k] + half[k] * (node + 1.0));
                w *= weight * half[k];
            }
            let v = f(&x)?;
            check_values(&v, len, &x)?;
            Ok(v.into_iter().map(|z| z * w).collect())
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms, len))
}

const MC_CHUNK: usize = 4096;

fn monte_carlo(domain: &BoxDomain, samples: usize, seed: u64, f: &VecIntegrand, len: usize) -> Result<(Vec<Complex64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let vol = domain.volume();
    let mut sums = Vec::new();
    let mut squares = Vec::new();
    let mut done = 0;
    while done < samples {
        let m = MC_CHUNK.min(samples - done);
        let pts: Vec<Vec<f64>> = (0..m).map(|_| domain.from_unit(&(0..d).map(|_| rng.gen::<f64>()).collect::<Vec<_>>())).collect();
        let vals: Vec<Vec<Complex64>> = pts
            .par_iter()
            .map(|x| {
                let v = f(x)?;
                check_values(&v, len, x)?;
                Ok(v)
            })
            .collect::<Result<_>>()?;
        sums.push(pairwise_sum(&vals, len));
        let sq: Vec<Vec<Complex64>> = vals.iter().map(|v| v.iter().map(|z| c(z.norm_sqr(), 0.0)).collect()).collect();
        squares.push(pairwise_sum(&sq, len));
        done += m;
    }
    let n = samples as f64;
    let sum = pairwise_sum(&sums, len);
    let sq = pairwise_sum(&squares, len);
    let mut err = 0.0f64;
    let mean: Vec<Complex64> = sum.iter().map(|s| s / n).collect();
    for (m, s2) in mean.iter().zip(&sq) {
        let var = (s2.re / n - m.norm_sqr()).max(0.0) * n / (n - 1.0);
        err = err.max(vol * (var / n).sqrt());
    }
    Ok((mean.into_iter().map(|m| m * vol).collect(), err))
}

/// Integrate a vector-valued function over a box.
pub fn integrate_vec(domain: &BoxDomain, f: &VecIntegrand, len: usize, scheme: &Scheme) -> Result<VecIntegral> {
    scheme.validate()?;
    match scheme.kind {
        SchemeKind::GaussTensor { points } => {
            let values = gauss_tensor(domain, points, f, len)?;
            let d = domain.dim() as u32;
            let mut evaluations = points.pow(d);
            let error = if scheme.error_mode == ErrorMode::Richardson {
                let coarse_n = if points >= 4 { points.div_ceil(2) } else { points + 1 };
                evaluations += coarse_n.pow(d);
                let coarse = gauss_tensor(domain, coarse_n, f, len)?;
                values.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            } else {
                0.0
            };
            Ok(VecIntegral { values, error, evaluations })
        }
        SchemeKind::MonteCarlo { samples, seed } => {
            let (values, stderr) = monte_carlo(domain, samples, seed, f, len)?;
            let error = if scheme.error_mode == ErrorMode::McStderr { stderr } else { 0.0 };
            Ok(VecIntegral { values, error, evaluations: samples })
        }
    }
}

/// Integrate a scalar function over a box.
pub fn integrate_scalar(domain: &BoxDomain, f: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync), scheme: &Scheme) -> Result<Integral> {
    let g = |x: &[f64]| Ok(vec![f(x)?]);
    let r = integrate_vec(domain, &g, 1, scheme)?;
    Ok(Integral { value: r.values[0], error: r.error, evaluations: r.evaluations })
}

/// `int_P F`: top coefficient of the pullback, times the orientation of `P`.
pub fn integrate_form(p: &Parametrization, form: &FormField, scheme: &Scheme) -> Result<Integral> {
    let d = p.dim();
    if form.degree != Some(d) {
        return Err(Error::Degree { expected: d, found: form.degree.unwrap_or(usize::MAX) });
    }
    if form.dim != p.target_dim() {
        return Err(Error::Dimension(format!("{} lives in dimension {}, {} maps into {}", form.name, form.dim, p.name, p.target_dim())));
    }
    let orientation = p.orientation;
    let f = |u: &[f64]| {
        let w = form.evaluate(&p.eval(u)?)?;
        Ok(w.pullback_top(&p.jacobian(u)?)? * orientation)
    };
    integrate_scalar(&p.domain, &f, scheme)
}

/// Uniform grid of `grid^d` cells, with every cell within one cell width of
/// a center split `levels` more times. The refinement is fixed in advance
/// (it does not look at the integrand).
pub fn refine_around(domain: &BoxDomain, grid: usize, centers: &[Vec<f64>], levels: usize) -> Vec<BoxDomain> {
    let near = |b: &BoxDomain| {
        centers.iter().any(|p| {
            (0..b.dim()).all(|k| {
                let w = b.hi[k] - b.lo[k];
                p[k] >= b.lo[k] - w && p[k] <= b.hi[k] + w
            })
        })
    };
    let mut cells = domain.grid(grid.max(1));
    for _ in 0..levels {
        let mut next = Vec::with_capacity(cells.len());
        for b in cells {
            if near(&b) {
                next.extend(b.bisect_all());
            } else {
                next.push(b);
            }
        }
        cells = next;
    }
    cells
}

/// Sum of per-cell integrals; errors add.
pub fn integrate_cells(cells: &[BoxDomain], f: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync), scheme: &Scheme) -> Result<Integral> {
    let parts: Vec<Integral> = cells.iter().map(|b| integrate_scalar(b, f, scheme)).collect::<Result<_>>()?;
    let values: Vec<Vec<Complex64>> = parts.iter().map(|p| vec![p.value]).collect();
    Ok(Integral {
        value: pairwise_sum(&values, 1)[0],
        error: parts.iter().map(|p| p.error).sum(),
        evaluations: parts.iter().map(|p| p.evaluations).sum(),
    })
}

/// [`integrate_form`] over a cell decomposition of the parameter box.
pub fn integrate_form_cells(p: &Parametrization, form: &FormField, cells: &[BoxDomain], scheme: &Scheme) -> Result<Integral> {
    let d = p.dim();
    if form.degree != Some(d) {
        return Err(Error::Degree { expected: d, found: form.degree.unwrap_or(usize::MAX) });
    }
    let orientation = p.orientation;
    let f = |u: &[f64]| {
        let w = form.evaluate(&p.eval(u)?)?;
        Ok(w.pullback_top(&p.jacobian(u)?)? * orientation)
    };
    integrate_cells(cells, &f, scheme)
}

/// `(-1)^{n-1} i int_0^{2 pi} |e^{i phi} - 1|^{2n-2} d phi`, the circle integral
/// `(-1)^{n-1} oint |lambda - 1|^{2n-2} lambda^{-1} d lambda`.
pub fn s1_residue_integral(n: usize, scheme: &Scheme) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Usage("s1_residue_integral needs n >= 1".into()));
    }
    let domain = BoxDomain::new(vec![0.0], vec![2.0 * PI])?;
    let f = |x: &[f64]| Ok(c((2.0 - 2.0 * x[0].cos()).powi(n as i32 - 1), 0.0));
    let r = integrate_scalar(&domain, &f, scheme)?;
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    Ok(r.value * c(0.0, sign))
}

/// Fiber integral over the trailing `fiber_dim` parameters of `total`.
///
/// The result is a form field on the base parameter box. With `alpha` of
/// degree `j` on the base, `vol_fiber ^ alpha` integrates to `alpha`
/// (fiber directions first).
pub fn fiber_integrate(total: &Parametrization, form: &FormField, fiber_dim: usize, scheme: Scheme) -> Result<FormField> {
    let dim = total.dim();
    if fiber_dim > dim {
        return Err(Error::Dimension(format!("fiber of dimension {fiber_dim} in a {dim}-dimensional product")));
    }
    let k = form.degree.ok_or_else(|| Error::Usage(format!("fiber integral of the mixed-degree field {}", form.name)))?;
    if k < fiber_dim {
        return Err(Error::Degree { expected: fiber_dim, found: k });
    }
    scheme.validate()?;
    let m = dim - fiber_dim;
    let base_box = BoxDomain { lo: total.domain.lo[..m].to_vec(), hi: total.domain.hi[..m].to_vec() };
    let fiber_box = BoxDomain { lo: total.domain.lo[m..].to_vec(), hi: total.domain.hi[m..].to_vec() };
    let pulled = form.pullback(total)?;
    let orientation = total.orientation;
    let out_degree = k - fiber_dim;
    let base_name = format!("{}/fiber", total.name);
    let eval = move |b: &[f64]| -> Result<AlternatingForm> {
        if b.len() != m {
            return Err(Error::Dimension(format!("base point of dimension {} for a base of dimension {m}", b.len())));
        }
        let f = |u: &[f64]| -> Result<Vec<Complex64>> {
            let x: Vec<f64> = b.iter().chain(u).copied().collect();
            let w = berezin(&pulled.evaluate(&x)?, fiber_dim, 1.0)?;
            Ok((0..(1u32 << m)).map(|mask| w.coeff_mask(mask)).collect())
        };
        let r = integrate_vec(&fiber_box, &f, 1 << m, &scheme)?;
        let mut out = AlternatingForm::zero(m);
        for (mask, v) in r.values.iter().enumerate() {
            let j = (mask as u32).count_ones() as usize;
            let sign = if (fiber_dim * j).is_multiple_of(2) { orientation } else { -orientation };
            out.set_mask(mask as u32, v * sign);
        }
        Ok(out)
    };
    let _ = base_box;
    Ok(FormField::new(base_name, total.name.clone(), "base", m, Some(out_degree), eval))
}

/// The flowout `(s, b) -> phi_s(section(b))` over `[0, t] x B`, time first.
pub fn flowout(flow: &FlowSpec<Vec<f64>>, section: &Parametrization, t: f64) -> Result<Parametrization> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("flowout over [0, {t}]")));
    }
    let domain = BoxDomain::new(vec![0.0], vec![t])?.product(&section.domain);
    let (fl, sec) = (flow.clone(), section.clone());
    let map = move |u: &[f64]| fl.apply(u[0], &sec.eval(&u[1..])?);
    Ok(Parametrization::new(format!("flowout({})", section.name), domain, section.target.space.clone(), section.target_dim(), map)
        .with_chart(section.target.chart.clone())
        .with_orientation(section.orientation))
}

/// Time-`t` image `b -> phi_t(section(b))` of a section.
pub fn flowed_section(flow: &FlowSpec<Vec<f64>>, section: &Parametrization, t: f64) -> Parametrization {
    let (fl, sec) = (flow.clone(), section.clone());
    let map = move |u: &[f64]| fl.apply(t, &sec.eval(u)?);
    Parametrization::new(
        format!("phi_{t}({})", section.name),
        section.domain.clone(),
        section.target.space.clone(),
        section.target_dim(),
        map,
    )
    .with_chart(section.target.chart.clone())
    .with_orientation(section.orientation)
}

fn lift_base(eta: &FormField, total_dim: usize) -> FormField {
    let e = eta.clone();
    FormField::new(format!("p2*{}", eta.name), eta.space.clone(), "flowout", total_dim, eta.degree, move |u| {
        e.evaluate(&u[1..])?.extend(total_dim, 1)
    })
}

/// `int_{[0,t] x B} phi* omega ^ p2* eta` with `eta` a field on the base
/// parameter box of `section`.
pub fn transgression_pairing(
    flow: &FlowSpec<Vec<f64>>,
    section: &Parametrization,
    omega: &FormField,
    eta: &FormField,
    t: f64,
    scheme: &Scheme,
) -> Result<Integral> {
    let m = section.dim();
    check_pairing_degrees(omega, eta, m + 1)?;
    if t == 0.0 {
        return Ok(Integral { value: c(0.0, 0.0), error: 0.0, evaluations: 0 });
    }
    let tube = flowout(flow, section, t)?;
    let integrand = omega.pullback(&tube)?.wedge(&lift_base(eta, m + 1))?;
    let p = box_parametrization(&tube.domain, &tube.name, tube.orientation);
    integrate_form(&p, &integrand, scheme)
}

fn check_pairing_degrees(omega: &FormField, eta: &FormField, target: usize) -> Result<()> {
    match (omega.degree, eta.degree) {
        (Some(a), Some(b)) if a + b == target => Ok(()),
        (Some(a), Some(b)) => Err(Error::Degree { expected: target, found: a + b }),
        _ => Err(Error::Usage("transgression pairing of mixed-degree fields".into())),
    }
}

/// Identity map of a parameter box, for fields already living on the box.
pub fn box_parametrization(domain: &BoxDomain, name: &str, orientation: f64) -> Parametrization {
    let d = domain.dim();
    Parametrization::new(name.to_string(), domain.clone(), name.to_string(), d, |u| Ok(u.to_vec()))
        .with_jacobian(move |_| Ok(RMatrix::identity(d, d)))
        .with_orientation(orientation)
}

/// Both sides of the Stokes identity for the transgression:
/// `(int_{[0,t] x B} d(phi* omega ^ p2* eta), int_B phi_t* omega ^ eta - int_B phi_0* omega ^ eta)`.
pub fn boundary_check(
    flow: &FlowSpec<Vec<f64>>,
    section: &Parametrization,
    omega: &FormField,
    eta: &FormField,
    t: f64,
    scheme: &Scheme,
) -> Result<(Integral, Integral)> {
    let whole = std::slice::from_ref(&section.domain);
    boundary_check_cells(flow, section, omega, eta, t, whole, whole, scheme)
}

/// [`boundary_check`] with the tube integrated over `[0, t] x tube_cells`
/// and the two ends over `end_cells`, both partitions of the base box.
/// The ends are cheap and may need finer cells where `phi_t` concentrates.
#[allow(clippy::too_many_arguments)]
pub fn boundary_check_cells(
    flow: &FlowSpec<Vec<f64>>,
    section: &Parametrization,
    omega: &FormField,
    eta: &FormField,
    t: f64,
    tube_cells: &[BoxDomain],
    end_cells: &[BoxDomain],
    scheme: &Scheme,
) -> Result<(Integral, Integral)> {
    let m = section.dim();
    check_pairing_degrees(omega, eta, m)?;
    let tube = flowout(flow, section, t)?;
    let inner = omega.pullback(&tube)?.wedge(&lift_base(eta, m + 1))?;
    let k = inner.degree.unwrap_or(0) + 1;
    let d_inner =
        FormField::new(format!("d({})", inner.name), inner.space.clone(), "flowout", m + 1, Some(k), move |u| inner.exterior_derivative(u));
    let times = BoxDomain::new(vec![0.0], vec![t])?;
    let cells: Vec<BoxDomain> = tube_cells.iter().map(|c| times.product(c)).collect();
    let lhs = integrate_form_cells(&box_parametrization(&tube.domain, &tube.name, tube.orientation), &d_inner, &cells, scheme)?;
    let end = |s: f64| -> Result<Integral> {
        let p = flowed_section(flow, section, s);
        let f = omega.pullback(&p)?.wedge(eta)?;
        integrate_form_cells(&box_parametrization(&section.domain, &p.name, section.orientation), &f, end_cells, scheme)
    };
    let (a, b) = (end(t)?, end(0.0)?);
    let rhs = Integral { value: a.value - b.value, error: a.error + b.error, evaluations: a.evaluations + b.evaluations };
    Ok((lhs, rhs))
}

/// Generic flow used by [`flow_tube_volume`].
pub struct TubeData<'a, P> {
    pub flow: &'a FlowSpec<P>,
    /// Section as a map from base parameters to points.
    pub section: &'a (dyn Fn(&[f64]) -> Result<P> + Sync),
    /// Isometric (or fixed-metric) embedding of the model space into `R^N`.
    pub embed: &'a (dyn Fn(&P) -> Result<Vec<f64>> + Sync),
    /// Use the graph map `xi(t, b) = (phi_t(b), phi_0(b))`.
    pub strong: bool,
    /// Central-difference step in the base parameters.
    pub step: f64,
    /// Central-difference step in time; kept separate so that base cells far
    /// smaller than the time scale can use a matching base step.
    pub time_step: f64,
}

/// `(n+1)`-volume of the flow tube over `[t0, t1] x region`: the integral of
/// `sqrt det(J^T J)` with `J` the Jacobian of the embedded flowout, by
/// Richardson-extrapolated differences. Fourth order matters where the
/// flowout is strongly stretched along a curved direction: the chordal error
/// of a plain central difference is normal to it.
pub fn flow_tube_volume_between<P>(data: &TubeData<'_, P>, t0: f64, t1: f64, region: &BoxDomain, scheme: &Scheme) -> Result<Integral> {
    if !(t0 < t1) {
        return Err(Error::Domain(format!("time interval [{t0}, {t1}]")));
    }
    let domain = BoxDomain::new(vec![t0], vec![t1])?.product(region);
    let map = |u: &[f64]| -> Result<Vec<f64>> {
        let p0 = (data.section)(&u[1..])?;
        let mut out = (data.embed)(&data.flow.apply(u[0], &p0)?)?;
        if data.strong {
            out.extend((data.embed)(&p0)?);
        }
        Ok(out)
    };
    let f = |u: &[f64]| -> Result<Complex64> {
        let cols: Vec<Vec<f64>> = (0..u.len())
            .map(|k| spaces::richardson_difference(&map, u, k, if k == 0 { data.time_step } else { data.step }))
            .collect::<Result<_>>()?;
        let j = RMatrix::from_fn(cols[0].len(), u.len(), |i, k| cols[k][i]);
        Ok(c(volume_element(j), 0.0))
    };
    integrate_scalar(&domain, &f, scheme)
}

/// `sqrt det(J^T J)` as the product of the diagonal of `R` in `J = QR`,
/// which avoids squaring the condition number of nearly parallel columns.
pub fn volume_element(j: RMatrix) -> f64 {
    if j.ncols() > j.nrows() {
        return 0.0;
    }
    j.qr().r().diagonal().iter().map(|x| x.abs()).product()
}

pub fn flow_tube_volume<P>(data: &TubeData<'_, P>, t_max: f64, region: &BoxDomain, scheme: &Scheme) -> Result<Integral> {
    flow_tube_volume_between(data, 0.0, t_max, region, scheme)
}
