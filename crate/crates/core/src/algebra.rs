//! Small dense complex matrices: validation, Pfaffian, Cayley transform,
//! hermitian spectral decomposition and hermitian matrix functions.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Advisory structural tag of a matrix, checked by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixTag {
    Real,
    Complex,
    Hermitian,
    Unitary,
    Antisymmetric,
}

/// Validation tolerances; the defaults are the documented ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative defect allowed in `M - M*` for hermitian matrices.
    pub hermitian: f64,
    /// Absolute defect allowed in `M*M - I` for unitary matrices.
    pub unitary: f64,
    /// Relative defect allowed in `M + M^T` for antisymmetric matrices.
    pub antisymmetric: f64,
    /// Absolute size of imaginary parts tolerated for real matrices.
    pub real: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { hermitian: 1e-12, unitary: 1e-10, antisymmetric: 1e-12, real: 1e-12 }
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry modulus.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_norm_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.abs()))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_row_slice(values))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0))))
}

/// Check a matrix against a structural tag with the given tolerances.
pub fn validate(m: &CMatrix, tag: MatrixTag, tol: &Tolerances) -> Result<()> {
    let scale = max_norm(m);
    match tag {
        MatrixTag::Complex => Ok(()),
        MatrixTag::Real => {
            let defect = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
            check(defect, tol.real * scale.max(1.0), "real entries")
        }
        MatrixTag::Hermitian => {
            require_square(m)?;
            let defect = max_norm(&(m - m.adjoint()));
            check(defect, tol.hermitian * scale, "hermitian symmetry")
        }
        MatrixTag::Unitary => {
            require_square(m)?;
            let defect = max_norm(&(m.adjoint() * m - identity(m.nrows())));
            check(defect, tol.unitary, "unitarity")
        }
        MatrixTag::Antisymmetric => {
            require_square(m)?;
            let imag = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
            check(imag, tol.real * scale.max(1.0), "real entries")?;
            let defect = max_norm(&(m + m.transpose()));
            check(defect, tol.antisymmetric * scale, "antisymmetry")
        }
    }
}

fn check(defect: f64, tol: f64, what: &'static str) -> Result<()> {
    if defect <= tol {
        Ok(())
    } else {
        Err(Error::Validation { what, defect, tol })
    }
}

fn require_square<T: nalgebra::Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())))
    }
}

/// Inverse via LU, with a singularity error.
/// Hermitian part `(M + M*) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    require_square(m)?;
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix is not invertible", m.nrows(), m.ncols())))
}

pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().determinant()
}

/// Pfaffian of a real antisymmetric matrix with the default tolerance.
pub fn pfaffian(m: &RMatrix) -> Result<f64> {
    pfaffian_with(m, &Tolerances::default())
}

/// Pfaffian with sign convention `Pf([[0,1],[-1,0]]) = 1`.
///
/// Dimensions up to 6 use the recursive row expansion, larger ones a
/// Parlett-Reid reduction with symmetric pivoting.
pub fn pfaffian_with(m: &RMatrix, tol: &Tolerances) -> Result<f64> {
    require_square(m)?;
    let n = m.nrows();
    if n % 2 == 1 {
        return Err(Error::Dimension(format!("Pfaffian needs even dimension, got {n}")));
    }
    let defect = max_norm_real(&(m + m.transpose()));
    check(defect, tol.antisymmetric * max_norm_real(m), "antisymmetry")?;
    if n <= 6 {
        let idx: Vec<usize> = (0..n).collect();
        Ok(pfaffian_expand(m, &idx))
    } else {
        Ok(pfaffian_parlett_reid(m.clone()))
    }
}

fn pfaffian_expand(m: &RMatrix, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    for (pos, &j) in idx.iter().enumerate().skip(1) {
        let a = m[(first, j)];
        if a == 0.0 {
            continue;
        }
        let rest: Vec<usize> = idx.iter().enumerate().filter(|&(p, _)| p != 0 && p != pos).map(|(_, &k)| k).collect();
        let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * a * pfaffian_expand(m, &rest);
    }
    total
}

fn pfaffian_parlett_reid(mut a: RMatrix) -> f64 {
    let n = a.nrows();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let (mut kp, mut best) = (k + 1, a[(k + 1, k)].abs());
        for r in k + 2..n {
            if a[(r, k)].abs() > best {
                best = a[(r, k)].abs();
                kp = r;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if a[(k + 1, k)] == 0.0 {
            return 0.0;
        }
        let pivot = a[(k, k + 1)];
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Cayley transform `(A - i)(A + i)^{-1}` of a hermitian matrix.
pub fn cayley(a: &CMatrix) -> Result<CMatrix> {
    cayley_with(a, &Tolerances::default())
}

pub fn cayley_with(a: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    validate(a, MatrixTag::Hermitian, tol)?;
    let id = identity(a.nrows());
    let num = a - &id * I;
    let den = a + id * I;
    Ok(num * inverse(&den)?)
}

/// Inverse Cayley transform `i(1 + U)(1 - U)^{-1}`, defined when 1 is not an eigenvalue.
pub fn inverse_cayley(u: &CMatrix) -> Result<CMatrix> {
    require_square(u)?;
    let id = identity(u.nrows());
    let den = &id - u;
    Ok((&id + u) * inverse(&den)? * I)
}

/// Spectral decomposition of a hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Rebuild `V f(diag) V*` for a scalar function `f`.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let d: Vec<Complex64> = self.values.iter().map(|&x| f(x)).collect();
        &self.vectors * diag(&d) * self.vectors.adjoint()
    }
}

pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    hermitian_eigen_with(a, &Tolerances::default())
}

pub fn hermitian_eigen_with(a: &CMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    validate(a, MatrixTag::Hermitian, tol)?;
    let n = a.nrows();
    // Symmetrize exactly before the solver sees it.
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Scalar functions admitted by [`matrix_func`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFn {
    Exp,
    Tanh,
    Sinh,
    Cosh,
}

impl ScalarFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ScalarFn::Exp => x.exp(),
            ScalarFn::Tanh => x.tanh(),
            ScalarFn::Sinh => x.sinh(),
            ScalarFn::Cosh => x.cosh(),
        }
    }
}

impl FromStr for ScalarFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(ScalarFn::Exp),
            "tanh" => Ok(ScalarFn::Tanh),
            "sinh" => Ok(ScalarFn::Sinh),
            "cosh" => Ok(ScalarFn::Cosh),
            other => Err(Error::Usage(format!("unknown matrix function '{other}' (expected exp, tanh, sinh or cosh)"))),
        }
    }
}

/// Apply a scalar function to a hermitian matrix through its eigenvalues.
pub fn matrix_func(a: &CMatrix, f: ScalarFn) -> Result<CMatrix> {
    let eig = hermitian_eigen(a)?;
    Ok(eig.apply(|x| c(f.eval(x), 0.0)))
}

/// [`matrix_func`] with the function given by name.
pub fn matrix_func_named(a: &CMatrix, name: &str) -> Result<CMatrix> {
    matrix_func(a, name.parse()?)
}

/// Exponential of an arbitrary square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    a.clone().exp()
}

/// Orthonormalize the columns of a full-rank matrix (thin QR).
pub fn orthonormalize(m: &CMatrix) -> Result<CMatrix> {
    let k = m.ncols();
    let mut q = m.clone();
    let scale = max_norm(m).max(f64::MIN_POSITIVE);
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dotc(&q.column(j));
                let qi = q.column(i).into_owned();
                let mut col = q.column_mut(j);
                col -= qi * proj;
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-12 * scale {
            return Err(Error::Frame(format!("column {j} is linearly dependent on the previous ones")));
        }
        let mut col = q.column_mut(j);
        col /= c(norm, 0.0);
    }
    Ok(q)
}

/// Dimension of the intersection of two column spans, both given by
/// orthonormal columns, counted through principal angles below `tol`.
pub fn intersection_dim(a: &CMatrix, b: &CMatrix, tol: f64) -> usize {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0;
    }
    let m = a.adjoint() * b;
    let sv = m.singular_values();
    sv.iter().filter(|&&s| s >= 1.0 - tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&m + m.adjoint()).scale(0.5)
    }

    fn random_antisymmetric(n: usize, rng: &mut impl Rng) -> RMatrix {
        let m = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m - m.transpose()
    }

    fn random_orthogonal(n: usize, rng: &mut impl Rng) -> RMatrix {
        let m = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m.qr().q()
    }

    fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        orthonormalize(&m).unwrap()
    }

    #[test]
    fn pfaffian_small_cases() {
        let a = RMatrix::from_row_slice(2, 2, &[0.0, 2.5, -2.5, 0.0]);
        assert_eq!(pfaffian(&a).unwrap(), 2.5);
        let mut j = RMatrix::zeros(4, 4);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = -1.0;
        j[(2, 3)] = 1.0;
        j[(3, 2)] = -1.0;
        assert_eq!(pfaffian(&j).unwrap(), 1.0);
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 6, 8, 10] {
            let m = random_antisymmetric(n, &mut rng);
            let pf = pfaffian(&m).unwrap();
            let det = m.clone().determinant();
            assert!((pf * pf - det).abs() <= 1e-10 * det.abs().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn pfaffian_methods_agree_on_dimension_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_antisymmetric(6, &mut rng);
        let idx: Vec<usize> = (0..6).collect();
        assert_relative_eq!(pfaffian_expand(&m, &idx), pfaffian_parlett_reid(m.clone()), epsilon = 1e-12);
    }

    #[test]
    fn pfaffian_rejects_bad_input() {
        assert!(matches!(pfaffian(&RMatrix::zeros(3, 3)), Err(Error::Dimension(_))));
        let m = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(pfaffian(&m), Err(Error::Validation { .. })));
    }

    #[test]
    fn pfaffian_orthogonal_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [4, 6, 8] {
            let m = random_antisymmetric(n, &mut rng);
            let q = random_orthogonal(n, &mut rng);
            let lhs = pfaffian(&(q.transpose() * &m * &q)).unwrap();
            let rhs = q.clone().determinant() * pfaffian(&m).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9, "n = {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn cayley_examples() {
        let z = cayley(&CMatrix::zeros(1, 1)).unwrap();
        assert_relative_eq!(z[(0, 0)].re, -1.0, epsilon = 1e-15);
        let one = cayley(&CMatrix::identity(1, 1)).unwrap();
        assert!((one[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        let d = cayley(&diag_real(&[1.0, -1.0])).unwrap();
        assert!((d[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((d[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!(d[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn cayley_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(cayley(&m), Err(Error::Validation { .. })));
    }

    #[test]
    fn cayley_round_trip_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in 1..=5 {
            let a = random_hermitian(n, &mut rng);
            let u = cayley(&a).unwrap();
            validate(&u, MatrixTag::Unitary, &Tolerances::default()).unwrap();
            let back = inverse_cayley(&u).unwrap();
            assert!(max_norm(&(back - &a)) <= 1e-9);
        }
    }

    #[test]
    fn eigen_examples() {
        let e = hermitian_eigen(&diag_real(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let e = hermitian_eigen(&x).unwrap();
        assert_relative_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_reconstruction_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let e = hermitian_eigen(&a).unwrap();
            validate(&e.vectors, MatrixTag::Unitary, &Tolerances::default()).unwrap();
            let rebuilt = e.apply(|x| c(x, 0.0));
            assert!(max_norm(&(rebuilt - &a)) <= 1e-10 * max_norm(&a));
            let u = random_unitary(4, &mut rng);
            let conj = &u * &a * u.adjoint();
            let e2 = hermitian_eigen(&conj).unwrap();
            for (x, y) in e.values.iter().zip(&e2.values) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn matrix_function_examples() {
        let t = matrix_func(&CMatrix::zeros(3, 3), ScalarFn::Tanh).unwrap();
        assert!(max_norm(&t) == 0.0);
        let e = matrix_func(&diag_real(&[0.0, 2f64.ln()]), ScalarFn::Exp).unwrap();
        assert!(max_norm(&(e - diag_real(&[1.0, 2.0]))) < 1e-14);
        assert!(matches!(matrix_func_named(&CMatrix::zeros(1, 1), "log"), Err(Error::Usage(_))));
    }

    #[test]
    fn hyperbolic_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for n in 1..=4 {
            let a = random_hermitian(n, &mut rng);
            let ch = matrix_func(&a, ScalarFn::Cosh).unwrap();
            let sh = matrix_func(&a, ScalarFn::Sinh).unwrap();
            let defect = &ch * &ch - &sh * &sh - identity(n);
            assert!(max_norm(&defect) <= 1e-10);
        }
    }

    #[test]
    fn matrix_exponential_matches_spectral_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_hermitian(3, &mut rng);
        let spectral = matrix_func(&a, ScalarFn::Exp).unwrap();
        assert!(max_norm(&(expm(&a) - spectral)) < 1e-12);
    }

    #[test]
    fn intersection_dimension_counts_common_directions() {
        let e = identity(3);
        let a = e.columns(0, 2).into_owned();
        let b = e.columns(1, 2).into_owned();
        assert_eq!(intersection_dim(&a, &b, 1e-9), 1);
        assert_eq!(intersection_dim(&a, &a, 1e-9), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cayley_maps_eigenvalues(x in -5.0f64..5.0, y in -5.0f64..5.0) {
                let u = cayley(&diag_real(&[x, y])).unwrap();
                let fx = (c(x, 0.0) - I) / (c(x, 0.0) + I);
                prop_assert!((u[(0, 0)] - fx).norm() < 1e-14);
            }

            #[test]
            fn pfaffian_of_scaled_matrix(seed in 0u64..500, s in 0.1f64..3.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_antisymmetric(4, &mut rng);
                let lhs = pfaffian(&(&m * s)).unwrap();
                let rhs = s * s * pfaffian(&m).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }
}
