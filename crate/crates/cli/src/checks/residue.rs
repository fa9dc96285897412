//! Odd Chern residue over the resolution of the Maslov stratum, the circle
//! identity and the weighted supertrace identity.

use std::f64::consts::PI;

use flowlab::charforms::odd_chern_form;
use flowlab::exterior::{AlternatingForm, SupertraceMode};
use flowlab::integrate::{box_parametrization, integrate_form, s1_residue_integral, Integral, Scheme};
use flowlab::models::{bs_resolution_family, residue_d_matrix, residue_dim, residue_eta};
use flowlab::{Complex64, Result};

use super::{guarded, guarded_many, re};
use crate::config::ScenarioConfig;
use crate::report::CheckRecord;

const RESIDUE: &str = "odd Chern residue over the resolution";
const CIRCLE: &str = "circle integral identity";
const WSTR: &str = "weighted supertrace of D^(n-1)";

/// Quadrature used for rank `k`: tensor Gauss up to `k = 2`, Monte-Carlo beyond.
pub fn residue_scheme(k: usize, cfg: &ScenarioConfig) -> Scheme {
    match k {
        1 => Scheme::gauss(cfg.points()),
        2 => Scheme::gauss(cfg.points()),
        _ => Scheme::monte_carlo(cfg.samples(), cfg.seed),
    }
}

/// `int c_{k-1/2}` over the resolution `S^1 x CP^{k-1}` of the top stratum of `U(k)`.
pub fn odd_chern_residue(k: usize, scheme: &Scheme) -> Result<Integral> {
    let family = bs_resolution_family(k)?;
    let form = odd_chern_form(k, &family)?;
    let p = box_parametrization(&family.domain, &family.name, 1.0);
    integrate_form(&p, &form, scheme)
}

pub fn criterion_1(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    (1..=cfg.dim("k"))
        .map(|k| {
            let name = format!("int c_({k}-1/2) over S^1 x CP^{}", k - 1);
            let tol = cfg.tol(&format!("residue_k{k}"));
            guarded(&name, RESIDUE, || {
                let r = odd_chern_residue(k, &residue_scheme(k, cfg))?;
                Ok(if k >= 3 {
                    CheckRecord::relative(format!("{name} (relative, Monte-Carlo)"), RESIDUE, r.value, re(1.0), tol)
                } else {
                    CheckRecord::close(name.clone(), RESIDUE, r.value, re(1.0), tol)
                })
            })
        })
        .collect()
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn criterion_2(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let tol = cfg.tol("circle");
    (1..=5u64)
        .map(|n| {
            let name = format!("circle integral n = {n} (relative)");
            guarded(&name, CIRCLE, || {
                let got = s1_residue_integral(n as usize, &Scheme::gauss(cfg.points().max(n as usize + 1)))?;
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let expected = Complex64::new(0.0, sign * 2.0 * PI * binom(2 * n - 2, n - 1));
                Ok(CheckRecord::relative(name.clone(), CIRCLE, got, expected, tol))
            })
        })
        .collect()
}

pub fn criterion_3(cfg: &ScenarioConfig) -> Vec<CheckRecord> {
    let tol = cfg.tol("wstr");
    [2usize, 3]
        .iter()
        .flat_map(|&n| {
            guarded_many(&format!("wstr(D^{}) n = {n}", n - 1), WSTR, || {
                let d = residue_d_matrix(n)?;
                let w = d.power(n - 1)?.with_split(1, n - 1)?.supertrace(SupertraceMode::Wstr)?;
                let eta = residue_eta(n)?;
                let mut eta_pow = AlternatingForm::scalar(residue_dim(n), re(1.0));
                for _ in 0..n - 1 {
                    eta_pow = eta_pow.wedge(&eta)?;
                }
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let factor = Complex64::new(0.0, -2.0 * PI).powi(n as i32 - 1) * sign * (2 * n - 1) as f64;
                let rhs = eta_pow.scale(factor);
                let mask: Vec<usize> = (1..residue_dim(n)).collect();
                Ok(vec![
                    CheckRecord::close(format!("wstr(D^{}) top coefficient n = {n}", n - 1), WSTR, w.coeff(&mask), rhs.coeff(&mask), tol),
                    CheckRecord::bound(format!("wstr(D^{}) full form defect n = {n}", n - 1), WSTR, (&w - &rhs).max_abs(), tol),
                ])
            })
        })
        .collect()
}
