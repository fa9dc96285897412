//! Local models of the resolution near a critical manifold: the corner map
//! `psi`, the family blow-up `Psi`, flowline level points and `theta_delta`.
//!
//! Coordinates `(x, y, z)` are unstable, stable and critical directions with
//! `f = (|x|^2 - |y|^2) / 2`. Global gluing is not modelled; the maps here
//! compose into it.

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_finite(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { location: vals.to_vec() })
    }
}

/// Map of `(a, b)` in the local model, as used by `theta_delta`.
pub type FiberMap = dyn Fn(&[f64], &[f64]) -> Vec<f64>;

/// `f(x, y) = (|x|^2 - |y|^2) / 2`.
pub fn level(x: &[f64], y: &[f64]) -> f64 {
    0.5 * (x.iter().map(|v| v * v).sum::<f64>() - y.iter().map(|v| v * v).sum::<f64>())
}

/// `(r, s)` with `r s = q` and `(r^2 - s^2) / 2 = t`, computed without
/// cancellation on either side of `t = 0`.
pub fn psi(t: f64, q: f64) -> Result<(f64, f64)> {
    check_finite(&[t, q])?;
    if q < 0.0 {
        return Err(Error::Domain(format!("psi needs q >= 0, got {q}")));
    }
    let rho = t.hypot(q);
    if rho == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (r2, s2) = if t >= 0.0 { (rho + t, q * q / (rho + t)) } else { (q * q / (rho - t), rho - t) };
    let (r, s) = (r2.sqrt(), s2.sqrt());
    // Recover the exact product on the smaller factor.
    if r >= s && r > 0.0 {
        Ok((r, q / r))
    } else {
        Ok((q / s, s))
    }
}

/// Local model `V = {-2 delta <= f <= 2 delta, |x| |y| <= epsilon}` in
/// `R^k x R^m x R^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModel {
    pub k: usize,
    pub m: usize,
    pub p: usize,
    pub delta: f64,
    pub epsilon: f64,
}

/// A point `(x, y, z)` of the local model.
pub type ModelPoint = (Vec<f64>, Vec<f64>, Vec<f64>);

impl LocalModel {
    pub fn new(k: usize, m: usize, p: usize, delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0 && epsilon > 0.0 && delta.is_finite() && epsilon.is_finite()) {
            return Err(Error::Domain(format!("delta and epsilon must be positive, got {delta}, {epsilon}")));
        }
        Ok(LocalModel { k, m, p, delta, epsilon })
    }

    fn check_dims(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.k || y.len() != self.m || z.len() != self.p {
            return Err(Error::Dimension(format!(
                "expected blocks ({}, {}, {}), got ({}, {}, {})",
                self.k,
                self.m,
                self.p,
                x.len(),
                y.len(),
                z.len()
            )));
        }
        Ok(())
    }

    /// Membership in `V` (with relative slack `tol` on the bounds).
    pub fn contains(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        let f = level(x, y);
        f.abs() <= 2.0 * self.delta * (1.0 + tol) && norm(x) * norm(y) <= self.epsilon * (1.0 + tol)
    }

    /// [`psi`] restricted to `t in [-delta, delta]`, `q in [0, epsilon]`.
    pub fn psi(&self, t: f64, q: f64) -> Result<(f64, f64)> {
        if t.abs() > self.delta || !(0.0..=self.epsilon).contains(&q) {
            return Err(Error::Domain(format!("(t, q) = ({t}, {q}) outside [-{0}, {0}] x [0, {1}]", self.delta, self.epsilon)));
        }
        psi(t, q)
    }

    /// `Psi(t, q, x_hat, y_hat, z) = (x_hat r, y_hat s, z)` with `(r, s) = psi(t, q)`.
    pub fn family_blowup(&self, t: f64, q: f64, x_hat: &[f64], y_hat: &[f64], z: &[f64]) -> Result<ModelPoint> {
        self.check_dims(x_hat, y_hat, z)?;
        for (name, v) in [("x", x_hat), ("y", y_hat)] {
            if (norm(v) - 1.0).abs() > UNIT_TOL {
                return Err(Error::Domain(format!("direction {name} has norm {}, expected 1", norm(v))));
            }
        }
        let (r, s) = self.psi(t, q)?;
        Ok((x_hat.iter().map(|v| v * r).collect(), y_hat.iter().map(|v| v * s).collect(), z.to_vec()))
    }

    /// `theta_delta(lambda, v, b)` for a section `(a, alpha(a, b), beta(a, b))`
    /// of the local model through the unstable directions.
    ///
    /// Errors when `|a| |alpha(a, b)| > epsilon`, since no constructive
    /// shrinking of the section is available.
    pub fn theta_delta(&self, lambda: f64, v: &[f64], b: &[f64], alpha: &FiberMap, beta: &FiberMap) -> Result<ModelPoint> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1]")));
        }
        if v.len() != self.k || (norm(v) - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain("theta_delta needs a unit vector in the unstable directions".into()));
        }
        let a: Vec<f64> = v.iter().map(|x| x * lambda).collect();
        let al = alpha(&a, b);
        let be = beta(&a, b);
        self.check_dims(&a, &al, &be)?;
        check_finite(&al)?;
        check_finite(&be)?;
        let al_norm = norm(&al);
        if lambda * al_norm > self.epsilon {
            return Err(Error::Domain(format!(
                "section leaves the model: |a| |alpha| = {} > epsilon = {}",
                lambda * al_norm,
                self.epsilon
            )));
        }
        let d = self.delta;
        let r = ((d * d + lambda * lambda * al_norm * al_norm).sqrt() + d).sqrt();
        Ok((v.iter().map(|x| x * r).collect(), al.iter().map(|x| lambda * x / r).collect(), be))
    }
}

/// Intersection of the flowline through `(x, y, z)` with the level `f = t`.
pub fn flowline_level_point(x: &[f64], y: &[f64], z: &[f64], t: f64) -> Result<ModelPoint> {
    check_finite(x)?;
    check_finite(y)?;
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::BrokenTrajectory(format!("flowline through |x| = {nx}, |y| = {ny} lies in a stable or unstable manifold")));
    }
    let (r, s) = psi(t, nx * ny)?;
    Ok((x.iter().map(|v| v / nx * r).collect(), y.iter().map(|v| v / ny * s).collect(), z.to_vec()))
}
