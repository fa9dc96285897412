//! Limit currents: signed zero sets of sections, Maslov crossings of unitary
//! loops, pairings with test functions and weak-convergence reports.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{self, c, CMatrix, RMatrix};
use crate::charforms::FormField;
use crate::error::{Error, Result};
use crate::spaces::{fd_jacobian, BoxDomain, ChartPoint};

/// One point of a zero-dimensional current.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPoint {
    pub point: ChartPoint,
    pub sign: i32,
    pub weight: Complex64,
    /// Condition number of the Jacobian (zeros) or `1 / |crossing speed|` (crossings).
    pub condition: f64,
}

/// Finite signed, weighted sum of point masses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCurrent {
    pub points: Vec<CurrentPoint>,
}

impl PointCurrent {
    pub fn signed_count(&self) -> i32 {
        self.points.iter().map(|p| p.sign).sum()
    }

    /// `sum sign * weight * eta(point)`.
    pub fn pair(&self, eta: &dyn Fn(&ChartPoint) -> Result<Complex64>) -> Result<Complex64> {
        let mut total = c(0.0, 0.0);
        for p in &self.points {
            total += eta(&p.point)? * p.weight * p.sign as f64;
        }
        Ok(total)
    }

    /// Pairing with a degree-zero field.
    pub fn pair_field(&self, eta: &FormField) -> Result<Complex64> {
        if eta.degree != Some(0) {
            return Err(Error::Degree { expected: 0, found: eta.degree.unwrap_or(usize::MAX) });
        }
        self.pair(&|p| Ok(eta.evaluate_point(p)?.scalar_part()))
    }

    /// Same points with every weight multiplied by `w`.
    pub fn weighted(&self, w: Complex64) -> PointCurrent {
        PointCurrent { points: self.points.iter().map(|p| CurrentPoint { weight: p.weight * w, ..p.clone() }).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Finite-difference step of the Jacobian.
    pub step: f64,
    /// Zeros whose smallest Jacobian singular value is below this fraction of
    /// the largest Jacobian entry over the seed lattice are non-transversal.
    pub min_conditioning: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 60, tol: 1e-11, step: 1e-6, min_conditioning: 1e-8 }
    }
}

/// Real section `R^d -> R^d` on a chart box.
pub type SectionMap<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn condition_number(j: &RMatrix) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn newton(section: &SectionMap, seed: &[f64], domain: &BoxDomain, opts: &NewtonOptions) -> Result<Option<Vec<f64>>> {
    let mut x = seed.to_vec();
    let d = x.len();
    let scale: f64 = domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    for _ in 0..opts.max_iter {
        let s = section(&x)?;
        if s.len() != d {
            return Err(Error::Dimension(format!("section with {} components on a {d}-dimensional chart", s.len())));
        }
        let j = fd_jacobian(section, &x, opts.step)?;
        let Some(inv) = j.clone().try_inverse() else {
            return Ok(None);
        };
        let dx = inv * RMatrix::from_column_slice(d, 1, &s);
        for k in 0..d {
            x[k] -= dx[(k, 0)];
        }
        // Leaving a neighbourhood of the box means this seed does not converge here.
        if domain.margin(&x) < -0.1 * scale || x.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let step = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step <= opts.tol * (1.0 + norm(&x)) {
            let r = norm(&section(&x)?);
            let size = j.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            if r <= 1e3 * opts.tol * size {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}

/// Zeros of a real section on a chart box, with signs `sign(det J) * orientation`.
///
/// Newton iterations start at the centers of a `grid^d` seed lattice;
/// converged points closer than `10 tol` times the local condition number
/// are merged. A zero with a near-singular Jacobian is a transversality
/// failure.
pub fn find_signed_zeros(
    section: &SectionMap,
    domain: &BoxDomain,
    space: &str,
    chart: &str,
    grid: usize,
    opts: &NewtonOptions,
    orientation: f64,
) -> Result<PointCurrent> {
    let seeds: Vec<Vec<f64>> = domain.grid(grid.max(1)).iter().map(|b| b.from_unit(&vec![0.5; b.dim()])).collect();
    let found: Vec<Option<Vec<f64>>> = seeds.par_iter().map(|s| newton(section, s, domain, opts)).collect::<Result<_>>()?;
    let reference = seeds
        .par_iter()
        .map(|s| Ok(fd_jacobian(section, s, opts.step)?.iter().map(|v| v.abs()).fold(0.0, f64::max)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut points: Vec<CurrentPoint> = Vec::new();
    for x in found.into_iter().flatten() {
        if !domain.contains(&x) {
            continue;
        }
        let j = fd_jacobian(section, &x, opts.step)?;
        let d = x.len();
        let det = j.determinant();
        let sigma_min = j.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if d > 0 && sigma_min <= opts.min_conditioning * reference.max(f64::MIN_POSITIVE) {
            return Err(Error::Transversality { point: x, det });
        }
        let cond = condition_number(&j);
        let radius = 10.0 * opts.tol * cond.max(1.0) * (1.0 + norm(&x));
        let dup = points.iter().any(|p| {
            let dist = norm(&p.point.coords.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            dist <= radius.max(10.0 * opts.tol * p.condition.max(1.0))
        });
        if dup {
            continue;
        }
        let sign = if det * orientation > 0.0 { 1 } else { -1 };
        points.push(CurrentPoint { point: ChartPoint::new(space, chart, x), sign, weight: c(1.0, 0.0), condition: cond });
    }
    points.sort_by(|a, b| a.point.coords.partial_cmp(&b.point.coords).unwrap_or(std::cmp::Ordering::Equal));
    Ok(PointCurrent { points })
}

/// Unitary loop `theta -> U(theta)` on `[0, 2 pi]`.
pub type LoopMap<'a> = dyn Fn(f64) -> Result<CMatrix> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingOptions {
    /// Number of sample intervals on the circle.
    pub samples: usize,
    /// Bisection tolerance in `theta`.
    pub tol: f64,
    /// Two eigenvalues of `Re U` within this distance of `-1` make a crossing degenerate.
    pub degeneracy: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions { samples: 2048, tol: 1e-12, degeneracy: 1e-6 }
    }
}

/// Eigenvalue of `U` closest to `-1`, and the second-smallest eigenvalue of `Re U`.
fn nearest_to_minus_one(u: &CMatrix) -> Result<(Complex64, f64)> {
    let h = (u + u.adjoint()).scale(0.5);
    let eig = algebra::hermitian_eigen(&algebra::symmetrize(&h))?;
    let v = eig.vectors.column(0).into_owned();
    let lambda = (v.adjoint() * u * &v)[(0, 0)];
    let second = eig.values.get(1).copied().unwrap_or(f64::INFINITY);
    Ok((lambda, second))
}

/// Signed crossings of the Maslov cycle `{ker(1 + U) != 0}` along a loop.
///
/// `s(theta) = -Im lambda(theta)` for the eigenvalue `lambda` closest to `-1`
/// changes sign at a crossing; the sign is `+1` when `lambda` passes `-1`
/// counterclockwise.
pub fn find_maslov_crossings(u: &LoopMap, opts: &CrossingOptions) -> Result<PointCurrent> {
    let n = opts.samples.max(8);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let thetas: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let values: Vec<(Complex64, f64)> = thetas
        .par_iter()
        .map(|&t| {
            let m = u(t)?;
            algebra::validate(&m, algebra::MatrixTag::Unitary, &algebra::Tolerances::default())?;
            nearest_to_minus_one(&m)
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for i in 0..n {
        let (l0, _) = values[i];
        let (l1, _) = values[i + 1];
        if !(l0.re < 0.0 && l1.re < 0.0) {
            continue;
        }
        let (s0, s1) = (-l0.im, -l1.im);
        if s0 == 0.0 && i > 0 {
            continue; // counted as the right end of the previous interval
        }
        if s0 * s1 > 0.0 || (s0 == 0.0 && s1 == 0.0) {
            continue;
        }
        let (mut a, mut b) = (thetas[i], thetas[i + 1]);
        let mut sa = s0;
        while b - a > opts.tol {
            let m = 0.5 * (a + b);
            let (l, _) = nearest_to_minus_one(&u(m)?)?;
            let sm = -l.im;
            if sm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (sm > 0.0) == (sa > 0.0) {
                a = m;
                sa = sm;
            } else {
                b = m;
            }
        }
        let theta = 0.5 * (a + b);
        let (l, second) = nearest_to_minus_one(&u(theta)?)?;
        // A switch between two eigenvalues on either side of -1 also flips s.
        if (l + 1.0).norm() > 1e-6 {
            continue;
        }
        if second < -1.0 + opts.degeneracy {
            return Err(Error::DegenerateCrossing { theta });
        }
        let sign = if s1 > s0 { 1 } else { -1 };
        let slope = (s1 - s0) / h;
        points.push(CurrentPoint {
            point: ChartPoint::new("S1", "angle", vec![theta.rem_euclid(2.0 * std::f64::consts::PI)]),
            sign,
            weight: c(1.0, 0.0),
            condition: if slope == 0.0 { f64::INFINITY } else { 1.0 / slope.abs() },
        });
    }
    // theta = 0 and theta = 2 pi are the same point.
    points.dedup_by(|a, b| (a.point.coords[0] - b.point.coords[0]).abs() < 1e3 * opts.tol);
    if points.len() > 1 {
        let last = points.len() - 1;
        if (points[last].point.coords[0] - points[0].point.coords[0]).abs() < 1e3 * opts.tol {
            points.pop();
        }
    }
    Ok(PointCurrent { points })
}

/// Winding number of `det U` around the loop, from unwrapped phase increments.
pub fn det_winding(u: &LoopMap, samples: usize) -> Result<f64> {
    let n = samples.max(8);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let dets: Vec<Complex64> = (0..=n).into_par_iter().map(|i| Ok(algebra::det(&u(i as f64 * h)?))).collect::<Result<_>>()?;
    let total: f64 = dets.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Gaps `|pairing(t, eta) - predicted(eta)|` over a time schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub t_schedule: Vec<f64>,
    /// `values[i][j]`: pairing of test form `i` at time `t_schedule[j]`.
    pub values: Vec<Vec<Complex64>>,
    /// `gaps[i][j] = |values[i][j] - predicted[i]|`.
    pub gaps: Vec<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

/// Gaps below `NOISE_FLOOR * tol` count as converged: monotonicity is not
/// asked of quadrature noise.
pub const NOISE_FLOOR: f64 = 1e-4;

impl ConvergenceReport {
    pub fn final_gaps(&self) -> Vec<f64> {
        self.gaps.iter().map(|g| *g.last().unwrap_or(&f64::NAN)).collect()
    }

    /// Whether the gap of test form `i` did not grow over the last step.
    pub fn settled(&self, i: usize) -> bool {
        let g = &self.gaps[i];
        let m = g.len();
        m < 2 || g[m - 1] <= g[m - 2] || g[m - 1] <= NOISE_FLOOR * self.tol
    }
}

/// Evaluate `pairing(t, i)` for every time and test form (in parallel) and
/// compare with `predicted[i]`.
///
/// Passes iff for every test form the final gap is at most `tol` and did
/// not grow over the last step (up to [`NOISE_FLOOR`]).
pub fn weak_convergence_report(
    pairing: &(dyn Fn(f64, usize) -> Result<Complex64> + Sync),
    predicted: &[Complex64],
    t_schedule: &[f64],
    tol: f64,
) -> Result<ConvergenceReport> {
    if t_schedule.is_empty() || t_schedule.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Usage(format!("time schedule must be strictly increasing: {t_schedule:?}")));
    }
    let cells: Vec<(usize, usize)> = (0..predicted.len()).flat_map(|i| (0..t_schedule.len()).map(move |j| (i, j))).collect();
    let flat: Vec<Complex64> = cells.par_iter().map(|&(i, j)| pairing(t_schedule[j], i)).collect::<Result<_>>()?;
    let m = t_schedule.len();
    let values: Vec<Vec<Complex64>> = (0..predicted.len()).map(|i| flat[i * m..(i + 1) * m].to_vec()).collect();
    let gaps: Vec<Vec<f64>> = values.iter().zip(predicted).map(|(v, p)| v.iter().map(|x| (x - p).norm()).collect()).collect();
    let mut report = ConvergenceReport { t_schedule: t_schedule.to_vec(), values, gaps, tol, pass: false };
    report.pass = (0..predicted.len()).all(|i| report.settled(i) && report.gaps[i][m - 1] <= tol);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disc() -> BoxDomain {
        BoxDomain::cube(2, -1.0, 1.0)
    }

    fn unit_diag(phases: &[f64]) -> CMatrix {
        algebra::diag(&phases.iter().map(|p| c(p.cos(), p.sin())).collect::<Vec<_>>())
    }

    #[test]
    fn identity_and_reflection_sections() {
        let opts = NewtonOptions::default();
        let id = |x: &[f64]| Ok(vec![x[0], x[1]]);
        let z = find_signed_zeros(&id, &disc(), "R2", "default", 5, &opts, 1.0).unwrap();
        assert_eq!(z.points.len(), 1);
        assert_eq!(z.signed_count(), 1);
        let refl = |x: &[f64]| Ok(vec![x[0], -x[1]]);
        let z = find_signed_zeros(&refl, &disc(), "R2", "default", 5, &opts, 1.0).unwrap();
        assert_eq!(z.signed_count(), -1);
        let z = find_signed_zeros(&id, &disc(), "R2", "default", 5, &opts, -1.0).unwrap();
        assert_eq!(z.signed_count(), -1);
    }

    #[test]
    fn torus_height_gradient_has_euler_characteristic_zero() {
        // grad(cos a + cos b) on the flat torus chart [-pi/2, 3pi/2]^2.
        let domain = BoxDomain::cube(2, -0.5 * PI, 1.5 * PI);
        let grad = |x: &[f64]| Ok(vec![-x[0].sin(), -x[1].sin()]);
        let opts = NewtonOptions::default();
        let z = find_signed_zeros(&grad, &domain, "T2", "flat", 8, &opts, 1.0).unwrap();
        assert_eq!(z.points.len(), 4);
        assert_eq!(z.signed_count(), 0);
        let fine = find_signed_zeros(&grad, &domain, "T2", "flat", 16, &opts, 1.0).unwrap();
        assert_eq!(fine.signed_count(), z.signed_count());
        assert_eq!(fine.points.len(), 4);
    }

    #[test]
    fn complex_polynomial_zeros_are_positive() {
        // z^2 - 0.25 as a map R^2 -> R^2.
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] - x[1] * x[1] - 0.25, 2.0 * x[0] * x[1]]);
        let z = find_signed_zeros(&f, &disc(), "C", "z", 6, &NewtonOptions::default(), 1.0).unwrap();
        assert_eq!(z.points.len(), 2);
        assert!(z.points.iter().all(|p| p.sign == 1));
    }

    #[test]
    fn degenerate_zero_is_a_transversality_failure() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]);
        let r = find_signed_zeros(&f, &disc(), "C", "z", 6, &NewtonOptions::default(), 1.0);
        assert!(matches!(r, Err(Error::Transversality { .. })), "{r:?}");
    }

    #[test]
    fn pairing_examples() {
        let empty = PointCurrent::default();
        assert_eq!(empty.pair(&|_| Ok(c(1.0, 0.0))).unwrap(), c(0.0, 0.0));
        let one = PointCurrent {
            points: vec![CurrentPoint { point: ChartPoint::new("X", "c", vec![0.5]), sign: 1, weight: c(1.0, 0.0), condition: 1.0 }],
        };
        assert_eq!(one.pair(&|_| Ok(c(1.0, 0.0))).unwrap(), c(1.0, 0.0));
        let f = |p: &ChartPoint| Ok(c(p.coords[0], 0.0));
        let g = |p: &ChartPoint| Ok(c(p.coords[0] * p.coords[0], 1.0));
        let sum = |p: &ChartPoint| Ok(f(p)? * 2.0 + g(p)?);
        let lhs = one.pair(&sum).unwrap();
        let rhs = one.pair(&f).unwrap() * 2.0 + one.pair(&g).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(one.weighted(c(0.0, 2.0)).pair(&f).unwrap(), one.pair(&f).unwrap() * c(0.0, 2.0));
        let field = FormField::new("x", "X", "c", 1, Some(0), |x| Ok(crate::exterior::AlternatingForm::scalar(1, c(x[0], 0.0))));
        assert_eq!(one.pair_field(&field).unwrap(), c(0.5, 0.0));
    }

    #[test]
    fn maslov_crossings_of_circle_loops() {
        let opts = CrossingOptions::default();
        let fwd = |t: f64| Ok(unit_diag(&[t]));
        let z = find_maslov_crossings(&fwd, &opts).unwrap();
        assert_eq!(z.points.len(), 1);
        assert_eq!(z.points[0].sign, 1);
        assert!((z.points[0].point.coords[0] - PI).abs() < 1e-9);
        let back = |t: f64| Ok(unit_diag(&[-t]));
        assert_eq!(find_maslov_crossings(&back, &opts).unwrap().signed_count(), -1);
        let double = |t: f64| Ok(unit_diag(&[2.0 * t, 0.0]));
        let z = find_maslov_crossings(&double, &opts).unwrap();
        assert_eq!(z.points.len(), 2);
        assert!(z.points.iter().all(|p| p.sign == 1));
        assert!((det_winding(&double, 512).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_switches_are_not_crossings() {
        // Two eigenvalues near -1 that trade places without crossing it.
        let f = |t: f64| Ok(unit_diag(&[PI - 0.5 + 0.2 * t.sin(), PI + 0.5 + 0.2 * t.sin()]));
        let z = find_maslov_crossings(&f, &CrossingOptions::default()).unwrap();
        assert!(z.points.is_empty());
        assert!(det_winding(&f, 256).unwrap().abs() < 1e-12);
    }

    #[test]
    fn double_crossing_is_degenerate() {
        let f = |t: f64| Ok(unit_diag(&[t, t]));
        assert!(matches!(find_maslov_crossings(&f, &CrossingOptions::default()), Err(Error::DegenerateCrossing { .. })));
    }

    #[test]
    fn convergence_report_verdicts() {
        let pairing = |t: f64, i: usize| Ok(c(1.0 + i as f64 + (-t).exp(), 0.0));
        let predicted = [c(1.0, 0.0), c(2.0, 0.0)];
        let r = weak_convergence_report(&pairing, &predicted, &[1.0, 2.0, 4.0, 8.0], 1e-3).unwrap();
        assert!(r.pass);
        assert!((r.final_gaps()[0] - (-8.0f64).exp()).abs() < 1e-15);
        let r = weak_convergence_report(&pairing, &predicted, &[1.0, 2.0], 1e-3).unwrap();
        assert!(!r.pass);
        let growing = |t: f64, _: usize| Ok(c(t * 1e-5, 0.0));
        assert!(!weak_convergence_report(&growing, &[c(0.0, 0.0)], &[1.0, 2.0], 1e-3).unwrap().pass);
        // Growth inside the noise floor is not a failure.
        let noise = |t: f64, _: usize| Ok(c(t * 1e-11, 0.0));
        assert!(weak_convergence_report(&noise, &[c(0.0, 0.0)], &[1.0, 2.0], 1e-3).unwrap().pass);
        assert!(weak_convergence_report(&pairing, &predicted, &[2.0, 1.0], 1e-3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn crossings_count_the_winding(k1 in -2i32..=2, k2 in -2i32..=2, shift in 0.1f64..1.0) {
                let f = move |t: f64| Ok(unit_diag(&[k1 as f64 * t + shift, k2 as f64 * t + 2.0 * shift]));
                let z = find_maslov_crossings(&f, &CrossingOptions::default()).unwrap();
                prop_assert_eq!(z.signed_count(), k1 + k2);
            }

            #[test]
            fn signed_zero_count_is_grid_stable(a in 0.3f64..0.9, b in -0.5f64..0.5) {
                let f = move |x: &[f64]| Ok(vec![x[0] * x[0] - x[1] * x[1] - a * a + b * x[1], 2.0 * x[0] * x[1] + b * x[0]]);
                let opts = NewtonOptions::default();
                let coarse = find_signed_zeros(&f, &BoxDomain::cube(2, -2.0, 2.0), "C", "z", 10, &opts, 1.0).unwrap();
                let fine = find_signed_zeros(&f, &BoxDomain::cube(2, -2.0, 2.0), "C", "z", 20, &opts, 1.0).unwrap();
                prop_assert_eq!(coarse.signed_count(), fine.signed_count());
                prop_assert_eq!(coarse.points.len(), fine.points.len());
            }
        }
    }
}
