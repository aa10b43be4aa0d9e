//! Dense complex matrices, Hermitian operators and their spectra.
//!
//! Everything in the crate that talks about operators on a finite dimensional
//! Hilbert space goes through [`ComplexMatrix`] and [`HermitianMatrix`]. The
//! Hermitian eigensolver is a cyclic complex Jacobi iteration; instances here
//! are tiny (d <= 64, usually d = 2) and Jacobi is accurate to the last few ulps
//! on such matrices.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest pre-symmetrization defect `max|M - M^dagger|` accepted as Hermitian.
pub const HERM_TOL: f64 = 1e-10;
/// PSD tolerance used wherever a caller does not pass one.
pub const PSD_TOL: f64 = 1e-9;
/// Largest dimension the eigensolver accepts.
pub const MAX_EIG_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_FAIL_OFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |M - M^dagger| = {defect:e}")]
    NonHermitian { defect: f64 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry buffer has length {len}, expected {expected}")]
    BadShape { len: usize, expected: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension {dim} exceeds the eigensolver limit of {MAX_EIG_DIM}")]
    TooLarge { dim: usize },
    #[error("Jacobi iteration did not converge: off-diagonal norm {off_norm:e}")]
    ConvergenceFailure { off_norm: f64 },
    #[error("matrix dimensions must be positive")]
    Empty,
}

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        let expected = rows.checked_mul(cols).ok_or(LinalgError::BadShape {
            len: data.len(),
            expected: usize::MAX,
        })?;
        if data.len() != expected {
            return Err(LinalgError::BadShape {
                len: data.len(),
                expected,
            });
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![C64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from real row-major values.
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self, LinalgError> {
        Self::new(rows, cols, values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Matrix unit `E_{i,j}` (zero-based indices).
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|z| z * s).collect(),
        )
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|z| z * s).collect(),
        )
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max|M - M^dagger|`, or `None` for non-square input.
    pub fn hermitian_defect(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in i..n {
                defect = defect.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        Some(defect)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// `max|self - other|`; `f64::INFINITY` on a shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Standard Kronecker product; `(a ⊗ b)[(i*p + k, j*q + l)] = a[i,j] b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (p, q) = b.shape();
    let rows = a.rows * p;
    let cols = a.cols * q;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A square matrix equal to its adjoint. Construction symmetrizes exactly.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.0)
    }
}

impl HermitianMatrix {
    /// Validates `max|M - M^dagger| <= HERM_TOL` and stores `(M + M^dagger)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let defect = m.hermitian_defect().unwrap_or(f64::INFINITY);
        if !(defect <= HERM_TOL) {
            return Err(LinalgError::NonHermitian { defect });
        }
        Ok(Self::symmetrized(m))
    }

    /// `(M + M^dagger)/2` without a defect check.
    pub fn symmetrized(mut m: ComplexMatrix) -> Self {
        assert!(m.is_square());
        let n = m.rows;
        for i in 0..n {
            let d = m[(i, i)];
            m[(i, i)] = C64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let upper = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = upper;
                m[(j, i)] = upper.conj();
            }
        }
        Self(m)
    }

    pub fn from_real(d: usize, values: &[f64]) -> Result<Self, LinalgError> {
        Self::new(ComplexMatrix::from_real(d, d, values)?)
    }

    pub fn zeros(d: usize) -> Self {
        Self(ComplexMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d))
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        Self(ComplexMatrix::identity(d).scale(s))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = ComplexMatrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn max_norm(&self) -> f64 {
        self.0.max_norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// `a*self + b*other`; dimensions must agree.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self(ComplexMatrix::from_raw(
            self.dim(),
            self.dim(),
            self.0
                .data
                .iter()
                .zip(&other.0.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        ))
    }

    /// Sum of a nonempty family of equal-dimension operators.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a HermitianMatrix>, d: usize) -> Self {
        let mut acc = vec![C64::new(0.0, 0.0); d * d];
        for h in items {
            assert_eq!(h.dim(), d, "dimension mismatch");
            for (a, b) in acc.iter_mut().zip(&h.0.data) {
                *a += b;
            }
        }
        Self(ComplexMatrix::from_raw(d, d, acc))
    }

    /// `U^dagger self U` for a square `U`, re-symmetrized.
    pub fn congruence(&self, u: &ComplexMatrix) -> Self {
        let left = u.adjoint().matmul(&self.0).expect("dimension mismatch");
        Self::symmetrized(left.matmul(u).expect("dimension mismatch"))
    }

    /// Coordinates in the orthonormal real basis of Hermitian `d x d` matrices:
    /// diagonal units, then `(E_pq + E_qp)/sqrt2` and `i(E_pq - E_qp)/sqrt2` for `p < q`.
    pub fn coords(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for p in 0..d {
            out.push(self.get(p, p).re);
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let z = self.get(p, q);
                out.push(std::f64::consts::SQRT_2 * z.re);
                out.push(std::f64::consts::SQRT_2 * z.im);
            }
        }
        out
    }

    /// Inverse of [`HermitianMatrix::coords`].
    pub fn from_coords(d: usize, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), d * d, "coordinate vector has wrong length");
        let mut m = ComplexMatrix::zeros(d, d);
        for p in 0..d {
            m[(p, p)] = C64::new(coords[p], 0.0);
        }
        let mut idx = d;
        for p in 0..d {
            for q in (p + 1)..d {
                let z = C64::new(coords[idx], coords[idx + 1]) / std::f64::consts::SQRT_2;
                m[(p, q)] = z;
                m[(q, p)] = z.conj();
                idx += 2;
            }
        }
        Self(m)
    }

    /// The orthonormal basis behind [`HermitianMatrix::coords`], in coordinate order.
    pub fn basis(d: usize) -> Vec<Self> {
        (0..d * d)
            .map(|t| {
                let mut c = vec![0.0; d * d];
                c[t] = 1.0;
                Self::from_coords(d, &c)
            })
            .collect()
    }

    /// Applies a real function to the spectrum: `V f(Λ) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self, LinalgError> {
        let spec = eig_hermitian(self)?;
        let d = self.dim();
        let v = &spec.eigenvectors;
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lam) in spec.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..d {
                let vik = v[(i, k)] * w;
                for j in 0..d {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        Ok(Self::symmetrized(out))
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(self.0.try_add(&rhs.0).expect("dimension mismatch"))
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(self.0.try_sub(&rhs.0).expect("dimension mismatch"))
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// Pauli sigma_x.
pub fn pauli_x() -> HermitianMatrix {
    HermitianMatrix(ComplexMatrix::from_raw(
        2,
        2,
        vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    ))
}

/// Pauli sigma_y.
pub fn pauli_y() -> HermitianMatrix {
    HermitianMatrix(ComplexMatrix::from_raw(
        2,
        2,
        vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    ))
}

/// Pauli sigma_z.
pub fn pauli_z() -> HermitianMatrix {
    HermitianMatrix::diagonal(&[1.0, -1.0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Nondecreasing.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += v[(i, k)] * v[(j, k)].conj() * lam;
                }
            }
        }
        out
    }

    /// Orthonormal basis (as columns) of the span of eigenvectors with eigenvalue `> threshold`.
    pub fn support_basis(&self, threshold: f64) -> Vec<Vec<C64>> {
        let d = self.eigenvalues.len();
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &lam)| lam > threshold)
            .map(|(k, _)| (0..d).map(|i| self.eigenvectors[(i, k)]).collect())
            .collect()
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eig_hermitian(m: &HermitianMatrix) -> Result<Spectrum, LinalgError> {
    let n = m.dim();
    if n > MAX_EIG_DIM {
        return Err(LinalgError::TooLarge { dim: n });
    }
    let defect = m.0.hermitian_defect().unwrap_or(f64::INFINITY);
    if !(defect <= HERM_TOL) {
        return Err(LinalgError::NonHermitian { defect });
    }

    let mut a = m.0.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if !scale.is_finite() {
        return Err(LinalgError::ConvergenceFailure { off_norm: scale });
    }
    let target = 1e-15 * scale;

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n == 1 || off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let abs = apq.norm();
                if abs <= f64::MIN_POSITIVE || abs <= 1e-18 * scale {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / abs;
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                let theta = (gamma - alpha) / (2.0 * abs);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let phase_conj = phase.conj();

                // A <- A U, with U_pp = c, U_pq = s, U_qp = -s e^{-i phi}, U_qq = c e^{-i phi}
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * phase_conj * s;
                    a[(k, q)] = akp * s + akq * phase_conj * c;
                }
                // A <- U^dagger A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * phase_conj * s;
                    v[(k, q)] = vkp * s + vkq * phase_conj * c;
                }
            }
        }
        converged = off_norm(&a) <= target;
    }
    if !converged {
        let off = off_norm(&a);
        if !(off <= JACOBI_FAIL_OFF * scale.max(1.0)) {
            return Err(LinalgError::ConvergenceFailure { off_norm: off });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new)] = v[(i, old)];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

/// PSD iff the smallest eigenvalue is `>= -tol`.
pub fn is_psd(m: &HermitianMatrix, tol: f64) -> Result<PsdCheck, LinalgError> {
    let spec = eig_hermitian(m)?;
    let min = spec.min_eigenvalue();
    Ok(PsdCheck {
        psd: min >= -tol,
        min_eigenvalue: min,
    })
}

/// `Re tr(a^dagger b)`.
pub fn frobenius_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            left: a.0.shape(),
            right: b.0.shape(),
        });
    }
    Ok(a.0
        .data
        .iter()
        .zip(&b.0.data)
        .map(|(x, y)| (x.conj() * y).re)
        .sum())
}
