//! Exterior algebra of forms evaluated at a point, and square matrices of
//! such forms.
//!
//! A form over a chart of dimension `m` stores one complex coefficient per
//! subset of `{0, .., m-1}`, indexed by bitmask. The basis element of a
//! subset is the wedge of its generators in increasing order, so all signs
//! come from sorting parities.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::algebra::{self, c, CMatrix, RMatrix};
use crate::error::{Error, Result};

/// Largest chart dimension supported by the dense coefficient layout.
pub const MAX_DIM: usize = 16;

/// Mixed-degree exterior form at a point.
#[derive(Clone, PartialEq)]
pub struct AlternatingForm {
    dim: usize,
    coeffs: Vec<Complex64>,
}

/// Sign of the shuffle that sorts the concatenation of two disjoint
/// increasing index sets.
#[inline]
pub fn shuffle_sign(a: u32, b: u32) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sort an index list and return the permutation sign, or `None` on repeats.
fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

fn mask_of(idx: &[usize]) -> u32 {
    idx.iter().fold(0u32, |m, &i| m | (1 << i))
}

fn indices_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

impl AlternatingForm {
    pub fn zero(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "chart dimension {dim} exceeds {MAX_DIM}");
        AlternatingForm { dim, coeffs: vec![Complex64::new(0.0, 0.0); 1 << dim] }
    }

    pub fn scalar(dim: usize, value: Complex64) -> Self {
        let mut f = Self::zero(dim);
        f.coeffs[0] = value;
        f
    }

    /// The wedge of the listed generators, in the listed order.
    pub fn basis(dim: usize, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
            return Err(Error::Dimension(format!("generator {bad} outside chart of dimension {dim}")));
        }
        let mut f = Self::zero(dim);
        if let Some((sorted, sign)) = sort_with_sign(idx) {
            f.coeffs[mask_of(&sorted) as usize] = c(sign, 0.0);
        }
        Ok(f)
    }

    /// The 1-form `sum_i a_i dx_i`.
    pub fn one_form(coeffs: &[Complex64]) -> Self {
        let mut f = Self::zero(coeffs.len());
        for (i, &a) in coeffs.iter().enumerate() {
            f.coeffs[1 << i] = a;
        }
        f
    }

    /// Coefficient of the top-degree basis element `dx_0 ^ .. ^ dx_{m-1}`.
    pub fn top_coefficient(&self) -> Complex64 {
        self.coeffs[(1usize << self.dim) - 1]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff_mask(&self, mask: u32) -> Complex64 {
        self.coeffs[mask as usize]
    }

    pub fn set_mask(&mut self, mask: u32, value: Complex64) {
        self.coeffs[mask as usize] = value;
    }

    /// Coefficient in front of the wedge of the listed generators (in that order).
    pub fn coeff(&self, idx: &[usize]) -> Complex64 {
        match sort_with_sign(idx) {
            Some((sorted, sign)) if sorted.iter().all(|&i| i < self.dim) => self.coeffs[mask_of(&sorted) as usize] * sign,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn scalar_part(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Nonzero terms as (sorted multi-index, coefficient), lexicographic on the tuples.
    pub fn terms(&self) -> Vec<(Vec<usize>, Complex64)> {
        let mut out: Vec<(Vec<usize>, Complex64)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, z)| **z != Complex64::new(0.0, 0.0))
            .map(|(m, &z)| (indices_of(m as u32), z))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Degrees carrying a coefficient of modulus above `tol`.
    pub fn degrees_above(&self, tol: f64) -> Vec<usize> {
        let mut present = vec![false; self.dim + 1];
        for (m, z) in self.coeffs.iter().enumerate() {
            if z.norm() > tol {
                present[(m as u32).count_ones() as usize] = true;
            }
        }
        present.iter().enumerate().filter(|(_, &p)| p).map(|(k, _)| k).collect()
    }

    /// The common degree of all nonzero terms; `None` when mixed or zero.
    pub fn degree(&self) -> Option<usize> {
        match self.degrees_above(0.0).as_slice() {
            [k] => Some(*k),
            _ => None,
        }
    }

    pub fn is_mixed(&self) -> bool {
        self.degrees_above(0.0).len() > 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    /// Homogeneous component of degree `k`.
    pub fn part(&self, k: usize) -> Self {
        let mut f = Self::zero(self.dim);
        for (m, z) in self.coeffs.iter().enumerate() {
            if (m as u32).count_ones() as usize == k {
                f.coeffs[m] = *z;
            }
        }
        f
    }

    /// Sum of the components of positive degree.
    pub fn positive_part(&self) -> Self {
        let mut f = self.clone();
        f.coeffs[0] = Complex64::new(0.0, 0.0);
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        AlternatingForm { dim: self.dim, coeffs: self.coeffs.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        AlternatingForm { dim: self.dim, coeffs: self.coeffs.iter().map(|z| z * s).collect() }
    }

    pub fn conj(&self) -> Self {
        AlternatingForm { dim: self.dim, coeffs: self.coeffs.iter().map(|z| z.conj()).collect() }
    }

    /// Multiply the degree-`k` component by `factor(k)`.
    pub fn rescale_by_degree(&self, factor: impl Fn(usize) -> Complex64) -> Self {
        let weights: Vec<Complex64> = (0..=self.dim).map(factor).collect();
        AlternatingForm {
            dim: self.dim,
            coeffs: self.coeffs.iter().enumerate().map(|(m, z)| z * weights[(m as u32).count_ones() as usize]).collect(),
        }
    }

    fn nonzero(&self) -> Vec<(u32, Complex64)> {
        self.coeffs.iter().enumerate().filter(|(_, z)| z.re != 0.0 || z.im != 0.0).map(|(m, &z)| (m as u32, z)).collect()
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("wedge of forms over dimensions {} and {}", self.dim, other.dim)));
        }
        let mut out = Self::zero(self.dim);
        wedge_acc(&mut out, &self.nonzero(), &other.nonzero(), Complex64::new(1.0, 0.0));
        Ok(out)
    }

    /// Re-embed into a chart of dimension `new_dim`, generator `i` becoming `i + offset`.
    pub fn extend(&self, new_dim: usize, offset: usize) -> Result<Self> {
        if offset + self.dim > new_dim {
            return Err(Error::Dimension(format!("cannot place {} generators at offset {offset} in {new_dim}", self.dim)));
        }
        let mut out = Self::zero(new_dim);
        for (m, z) in self.nonzero() {
            out.coeffs[(m << offset) as usize] = z;
        }
        Ok(out)
    }

    /// Pull back through a linear map whose matrix `j` (m x d) sends
    /// parameter directions to chart directions: `dx_i = sum_k j[i,k] du_k`.
    pub fn pullback(&self, j: &RMatrix) -> Result<Self> {
        if j.nrows() != self.dim {
            return Err(Error::Dimension(format!("pullback matrix has {} rows for a form over {}", j.nrows(), self.dim)));
        }
        let d = j.ncols();
        let images: Vec<Vec<(u32, Complex64)>> =
            (0..self.dim).map(|i| (0..d).filter(|&k| j[(i, k)] != 0.0).map(|k| (1u32 << k, c(j[(i, k)], 0.0))).collect()).collect();
        let mut out = Self::zero(d);
        for (mask, z) in self.nonzero() {
            if (mask.count_ones() as usize) > d {
                continue;
            }
            let mut acc: Vec<(u32, Complex64)> = vec![(0, z)];
            for i in indices_of(mask) {
                let mut next = Self::zero(d);
                wedge_acc(&mut next, &acc, &images[i], Complex64::new(1.0, 0.0));
                acc = next.nonzero();
                if acc.is_empty() {
                    break;
                }
            }
            for (m, w) in acc {
                out.coeffs[m as usize] += w;
            }
        }
        Ok(out)
    }

    /// Top coefficient of the pullback through `j` (m x d), without building
    /// the whole pulled-back form.
    pub fn pullback_top(&self, j: &RMatrix) -> Result<Complex64> {
        let d = j.ncols();
        if j.nrows() != self.dim {
            return Err(Error::Dimension(format!("pullback matrix has {} rows for a form over {}", j.nrows(), self.dim)));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (mask, z) in self.nonzero() {
            if mask.count_ones() as usize != d {
                continue;
            }
            let rows = indices_of(mask);
            let sub = RMatrix::from_fn(d, d, |a, b| j[(rows[a], b)]);
            total += z * sub.determinant();
        }
        Ok(total)
    }

    /// Exponential, using that the positive-degree part is nilpotent and
    /// that the scalar part is central.
    pub fn exp(&self) -> Self {
        let n = self.positive_part();
        let mut term = Self::scalar(self.dim, Complex64::new(1.0, 0.0));
        let mut total = term.clone();
        for k in 1..=self.dim {
            term = term.wedge(&n).expect("same dimension").scale_real(1.0 / k as f64);
            if term.is_zero() {
                break;
            }
            total += &term;
        }
        total.scale(self.coeffs[0].exp())
    }
}

/// `out += s * a ^ b` for sparse coefficient lists.
fn wedge_acc(out: &mut AlternatingForm, a: &[(u32, Complex64)], b: &[(u32, Complex64)], s: Complex64) {
    for &(ma, za) in a {
        for &(mb, zb) in b {
            if ma & mb != 0 {
                continue;
            }
            let sign = shuffle_sign(ma, mb);
            out.coeffs[(ma | mb) as usize] += za * zb * s * sign;
        }
    }
}

impl fmt::Debug for AlternatingForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlternatingForm(dim {}) ", self.dim)?;
        let terms = self.terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (idx, z)) in terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i)e{:?}", z.re, z.im, idx)?;
        }
        Ok(())
    }
}

impl AddAssign<&AlternatingForm> for AlternatingForm {
    fn add_assign(&mut self, rhs: &AlternatingForm) {
        assert_eq!(self.dim, rhs.dim, "adding forms over different charts");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&AlternatingForm> for AlternatingForm {
    fn sub_assign(&mut self, rhs: &AlternatingForm) {
        assert_eq!(self.dim, rhs.dim, "subtracting forms over different charts");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Add for &AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: &AlternatingForm) -> AlternatingForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: &AlternatingForm) -> AlternatingForm {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &AlternatingForm {
    type Output = AlternatingForm;
    fn neg(self) -> AlternatingForm {
        self.scale_real(-1.0)
    }
}

impl Mul<Complex64> for &AlternatingForm {
    type Output = AlternatingForm;
    fn mul(self, s: Complex64) -> AlternatingForm {
        self.scale(s)
    }
}

/// Grading-sensitive traces of a [`FormMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupertraceMode {
    /// Sum of the diagonal entries.
    Plain,
    /// Trace of the top-left block minus trace of the bottom-right block.
    Even,
    /// Trace of the bottom-left block (the coefficient of the odd generator
    /// in the doubled-block realization).
    Odd,
    /// Weighted trace `n tr T1 - (n - 1) tr T2` of a block matrix with
    /// diagonal blocks `T1` (p x p) and `T2` (q x q), `n = p + q`.
    Wstr,
}

/// Square matrix of forms over a common chart, with optional grading split.
#[derive(Clone, PartialEq)]
pub struct FormMatrix {
    n: usize,
    dim: usize,
    entries: Vec<AlternatingForm>,
    split: Option<(usize, usize)>,
}

impl fmt::Debug for FormMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FormMatrix {}x{} over dim {} split {:?}", self.n, self.n, self.dim, self.split)?;
        for i in 0..self.n {
            for j in 0..self.n {
                writeln!(f, "  [{i},{j}] {:?}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

impl FormMatrix {
    pub fn zeros(n: usize, dim: usize) -> Self {
        FormMatrix { n, dim, entries: vec![AlternatingForm::zero(dim); n * n], split: None }
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        let mut m = Self::zeros(n, dim);
        for i in 0..n {
            m.entries[i * n + i] = AlternatingForm::scalar(dim, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(usize, usize) -> AlternatingForm) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let e = f(i, j);
                if e.dim() != dim {
                    return Err(Error::Dimension(format!("entry ({i},{j}) lives over {} instead of {dim}", e.dim())));
                }
                entries.push(e);
            }
        }
        Ok(FormMatrix { n, dim, entries, split: None })
    }

    /// Degree-0 form matrix with the given scalar entries.
    pub fn from_scalar(m: &CMatrix, dim: usize) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "form matrices are square");
        let n = m.nrows();
        let mut out = Self::zeros(n, dim);
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] = AlternatingForm::scalar(dim, m[(i, j)]);
            }
        }
        out
    }

    /// `sum_k M_k dx_k` for scalar matrices `M_k`, one per chart direction.
    pub fn from_one_form_components(components: &[CMatrix]) -> Self {
        let dim = components.len();
        let n = components.first().map_or(0, |m| m.nrows());
        let mut out = Self::zeros(n, dim);
        for (k, m) in components.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out.entries[i * n + j].coeffs[1 << k] += m[(i, j)];
                }
            }
        }
        out
    }

    /// Scalar coefficient matrix of the basis element with the given mask.
    pub fn component(&self, mask: u32) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).coeff_mask(mask))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split(&self) -> Option<(usize, usize)> {
        self.split
    }

    pub fn with_split(mut self, p: usize, q: usize) -> Result<Self> {
        if p + q != self.n {
            return Err(Error::Grading(format!("split ({p},{q}) does not add up to size {}", self.n)));
        }
        self.split = Some((p, q));
        Ok(self)
    }

    pub fn get(&self, i: usize, j: usize) -> &AlternatingForm {
        &self.entries[i * self.n + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut AlternatingForm {
        &mut self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, f: AlternatingForm) -> Result<()> {
        if f.dim() != self.dim {
            return Err(Error::Dimension(format!("entry over {} in a matrix over {}", f.dim(), self.dim)));
        }
        self.entries[i * self.n + j] = f;
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&AlternatingForm) -> AlternatingForm) -> Self {
        FormMatrix { n: self.n, dim: self.dim, entries: self.entries.iter().map(f).collect(), split: self.split }
    }

    /// Degree-0 coefficients as a scalar matrix.
    pub fn scalar_part(&self) -> CMatrix {
        self.component(0)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|e| e.positive_part())
    }

    pub fn part(&self, k: usize) -> Self {
        self.map(|e| e.part(k))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |acc, e| acc.max(e.max_abs()))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|e| e.scale(s))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "form matrices {}x{} over {} and {}x{} over {}",
                self.n, self.n, self.dim, other.n, other.n, other.dim
            )));
        }
        Ok(())
    }

    /// Entry-wise wedge matrix product, without grading signs.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let n = self.n;
        let lhs: Vec<Vec<(u32, Complex64)>> = self.entries.iter().map(|e| e.nonzero()).collect();
        let rhs: Vec<Vec<(u32, Complex64)>> = other.entries.iter().map(|e| e.nonzero()).collect();
        let mut out = Self::zeros(n, self.dim);
        out.split = self.split.or(other.split);
        for i in 0..n {
            for j in 0..n {
                let target = &mut out.entries[i * n + j];
                for k in 0..n {
                    wedge_acc(target, &lhs[i * n + k], &rhs[k * n + j], Complex64::new(1.0, 0.0));
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(FormMatrix { n: self.n, dim: self.dim, entries, split: self.split.or(other.split) })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `P Q - Q P`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.product(other)?.try_sub(&other.product(self)?)
    }

    /// Product with a degree-0 scalar matrix on the left.
    pub fn left_scalar(&self, m: &CMatrix) -> Result<Self> {
        Self::from_scalar(m, self.dim).product(self)
    }

    /// Product with a degree-0 scalar matrix on the right.
    pub fn right_scalar(&self, m: &CMatrix) -> Result<Self> {
        self.product(&Self::from_scalar(m, self.dim))
    }

    /// `k`-th power (`k = 0` gives the identity).
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = Self::identity(self.n, self.dim);
        out.split = self.split;
        for _ in 0..k {
            out = out.product(self)?;
        }
        Ok(out)
    }

    pub fn trace(&self) -> AlternatingForm {
        let mut t = AlternatingForm::zero(self.dim);
        for i in 0..self.n {
            t += self.get(i, i);
        }
        t
    }

    pub fn supertrace(&self, mode: SupertraceMode) -> Result<AlternatingForm> {
        if mode == SupertraceMode::Plain {
            return Ok(self.trace());
        }
        let (p, q) = self.split.ok_or_else(|| Error::Grading(format!("{mode:?} supertrace needs a grading split")))?;
        let mut t1 = AlternatingForm::zero(self.dim);
        for i in 0..p {
            t1 += self.get(i, i);
        }
        let mut t2 = AlternatingForm::zero(self.dim);
        for i in p..p + q {
            t2 += self.get(i, i);
        }
        match mode {
            SupertraceMode::Even => Ok(&t1 - &t2),
            SupertraceMode::Odd => {
                if p != q {
                    return Err(Error::Grading(format!("odd supertrace needs equal blocks, got ({p},{q})")));
                }
                let mut t = AlternatingForm::zero(self.dim);
                for i in 0..p {
                    t += self.get(p + i, i);
                }
                Ok(t)
            }
            SupertraceMode::Wstr => {
                let n = (p + q) as f64;
                Ok(&t1.scale_real(n) - &t2.scale_real(n - 1.0))
            }
            SupertraceMode::Plain => unreachable!(),
        }
    }

    /// Determinant by permutation expansion; entries must commute, which
    /// holds when they are of even degree.
    pub fn det(&self) -> Result<AlternatingForm> {
        if self.n > 6 {
            return Err(Error::Dimension(format!("permutation determinant limited to size 6, got {}", self.n)));
        }
        let mut total = AlternatingForm::zero(self.dim);
        let mut perm: Vec<usize> = (0..self.n).collect();
        permutations(&mut perm, 0, 1.0, &mut |p, sign| {
            let mut term = AlternatingForm::scalar(self.dim, c(sign, 0.0));
            for (i, &j) in p.iter().enumerate() {
                term = term.wedge(self.get(i, j)).expect("common chart");
                if term.is_zero() {
                    return;
                }
            }
            total += &term;
        });
        Ok(total)
    }

    /// Pfaffian by perfect-matching expansion, `Pf = sum over matchings of
    /// sign * prod M_{i j}` with `i < j` in each pair.
    pub fn pfaffian(&self) -> Result<AlternatingForm> {
        if self.n % 2 == 1 {
            return Err(Error::Dimension(format!("Pfaffian needs even size, got {}", self.n)));
        }
        let idx: Vec<usize> = (0..self.n).collect();
        Ok(self.pfaffian_rec(&idx))
    }

    fn pfaffian_rec(&self, idx: &[usize]) -> AlternatingForm {
        if idx.is_empty() {
            return AlternatingForm::scalar(self.dim, Complex64::new(1.0, 0.0));
        }
        let first = idx[0];
        let mut total = AlternatingForm::zero(self.dim);
        for pos in 1..idx.len() {
            let rest: Vec<usize> = idx.iter().enumerate().filter(|&(p, _)| p != 0 && p != pos).map(|(_, &k)| k).collect();
            let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
            let term = self.get(first, idx[pos]).wedge(&self.pfaffian_rec(&rest)).expect("common chart");
            total += &term.scale_real(sign);
        }
        total
    }

    /// Conjugate by scalar matrices: `L M R`.
    pub fn sandwich(&self, l: &CMatrix, r: &CMatrix) -> Result<Self> {
        self.left_scalar(l)?.right_scalar(r)
    }
}

fn permutations(p: &mut Vec<usize>, k: usize, sign: f64, visit: &mut impl FnMut(&[usize], f64)) {
    if k == p.len() {
        visit(p, sign);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, if i == k { sign } else { -sign }, visit);
        p.swap(k, i);
    }
}

/// Berezin integral: the base-form coefficient of the full fiber monomial.
///
/// The form lives over `base_dim + fiber_dim` generators with the base
/// generators first. Lower fiber degrees are discarded and the result is
/// multiplied by `fiber_orientation`.
pub fn berezin(form: &AlternatingForm, fiber_dim: usize, fiber_orientation: f64) -> Result<AlternatingForm> {
    if fiber_dim > form.dim() {
        return Err(Error::Dimension(format!("fiber of dimension {fiber_dim} in a chart of dimension {}", form.dim())));
    }
    let base_dim = form.dim() - fiber_dim;
    let fiber_mask = ((1u32 << fiber_dim) - 1) << base_dim;
    let mut out = AlternatingForm::zero(base_dim);
    for m in 0..(1u32 << base_dim) {
        out.coeffs[m as usize] = form.coeff_mask(m | fiber_mask) * fiber_orientation;
    }
    Ok(out)
}

/// Exponential of a form matrix whose positive-degree part is nilpotent.
///
/// `truncation` bounds the total form degree kept (default: chart dimension).
pub fn form_exp(m: &FormMatrix, truncation: Option<usize>) -> Result<FormMatrix> {
    let k_max = truncation.unwrap_or(m.dim);
    if k_max < m.dim {
        return Err(Error::Usage(format!("truncation degree {k_max} below chart dimension {}", m.dim)));
    }
    let m0 = m.scalar_part();
    let nil = m.positive_part();
    let mut out = if nil.is_zero() {
        FormMatrix::from_scalar(&algebra::expm(&m0), m.dim)
    } else if commutes(&m0, &nil)? {
        let e0 = exp_scalar(&m0)?;
        let mut term = FormMatrix::identity(m.n, m.dim);
        let mut series = term.clone();
        for k in 1..=k_max {
            term = term.product(&nil)?.scale(c(1.0 / k as f64, 0.0));
            if term.is_zero() {
                break;
            }
            series = series.try_add(&term)?;
        }
        series.left_scalar(&e0)?
    } else if algebra::validate(&m0, algebra::MatrixTag::Hermitian, &algebra::Tolerances::default()).is_ok() {
        dyson_hermitian(&m0, &nil, k_max)?
    } else {
        exp_scaling_squaring(m)?
    };
    out.split = m.split;
    Ok(out)
}

fn commutes(m0: &CMatrix, nil: &FormMatrix) -> Result<bool> {
    let scale = (1.0 + algebra::max_norm(m0)) * nil.max_abs();
    let comm = FormMatrix::from_scalar(m0, nil.dim).commutator(nil)?;
    Ok(comm.max_abs() <= 1e-14 * scale)
}

fn exp_scalar(m0: &CMatrix) -> Result<CMatrix> {
    if algebra::validate(m0, algebra::MatrixTag::Hermitian, &algebra::Tolerances::default()).is_ok() {
        algebra::matrix_func(m0, algebra::ScalarFn::Exp)
    } else {
        Ok(algebra::expm(m0))
    }
}

/// Divided difference of `exp` at the given nodes, read off the exponential
/// of the bidiagonal matrix with the nodes on the diagonal.
fn exp_divided_difference(nodes: &[f64]) -> Complex64 {
    let k = nodes.len();
    let j = CMatrix::from_fn(k, k, |a, b| {
        if a == b {
            c(nodes[a], 0.0)
        } else if b == a + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    algebra::expm(&j)[(0, k - 1)]
}

/// Interaction-picture series `exp(M0 + N) = V [sum_k sum_paths N'..N' e[mu..]] V*`
/// for hermitian `M0 = V diag(mu) V*`, exact once the form degree exceeds `k_max`.
fn dyson_hermitian(m0: &CMatrix, nil: &FormMatrix, k_max: usize) -> Result<FormMatrix> {
    let eig = algebra::hermitian_eigen(m0)?;
    let v = &eig.vectors;
    let rotated = nil.sandwich(&v.adjoint(), v)?;
    let n = nil.n;
    let dim = nil.dim;
    let mut cache: HashMap<Vec<usize>, Complex64> = HashMap::new();
    let mut acc = FormMatrix::zeros(n, dim);
    for i0 in 0..n {
        let mut stack: Vec<(Vec<usize>, AlternatingForm)> = vec![(vec![i0], AlternatingForm::scalar(dim, Complex64::new(1.0, 0.0)))];
        while let Some((path, prod)) = stack.pop() {
            let last = *path.last().unwrap();
            let mut key = path.clone();
            key.sort_unstable();
            let dd = *cache.entry(key).or_insert_with(|| exp_divided_difference(&path.iter().map(|&i| eig.values[i]).collect::<Vec<_>>()));
            acc.entries[i0 * n + last] += &prod.scale(dd);
            if path.len() > k_max {
                continue;
            }
            for next in 0..n {
                let step = rotated.get(last, next);
                if step.is_zero() {
                    continue;
                }
                let p = prod.wedge(step)?;
                if p.is_zero() {
                    continue;
                }
                let mut np = path.clone();
                np.push(next);
                stack.push((np, p));
            }
        }
    }
    acc.sandwich(v, &v.adjoint())
}

/// Scaling and squaring with a Taylor kernel in the full form-matrix algebra.
pub fn exp_scaling_squaring(m: &FormMatrix) -> Result<FormMatrix> {
    let norm = algebra::max_norm(&m.scalar_part()) * m.n as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let x = m.scale(c(0.5f64.powi(s), 0.0));
    let mut term = FormMatrix::identity(m.n, m.dim);
    let mut total = term.clone();
    for k in 1..=(24 + m.dim) {
        term = term.product(&x)?.scale(c(1.0 / k as f64, 0.0));
        total = total.try_add(&term)?;
    }
    for _ in 0..s {
        total = total.product(&total)?;
    }
    Ok(total)
}
