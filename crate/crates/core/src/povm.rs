//! POVMs, classical post-processing and mother measurements.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hermat::{
    eig_hermitian, is_psd, ComplexMatrix, HermitianMatrix, LinalgError, C64, PSD_TOL,
};
use crate::linalg;

/// Eigenvalues above this span the support of an element.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Singular values above this count towards a rank.
pub const RANK_TOL: f64 = 1e-9;

const NORMALIZATION_TOL: f64 = 1e-9;
const MAP_SUM_TOL: f64 = 1e-10;
const MAP_NEG_TOL: f64 = 1e-12;
const MAX_RANDOM_DIM: usize = 8;
const RANDOM_RETRIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PovmError {
    #[error("a POVM needs at least one element")]
    Empty,
    #[error("element {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("element {index} is not PSD (min eigenvalue {min_eig:e})")]
    NotPsd { index: usize, min_eig: f64 },
    #[error("elements do not sum to the identity (max defect {defect:e})")]
    NotNormalized { defect: f64 },
    #[error("normalizer is singular (min eigenvalue {min_eig:e})")]
    SingularNormalizer { min_eig: f64 },
    #[error("dimension {0} exceeds the sampler limit {MAX_RANDOM_DIM}")]
    TooLarge(usize),
    #[error("post-processing map: {0}")]
    Map(String),
    #[error("index {index} out of range (< {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Finite family of PSD operators summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianMatrix>,
}

impl Povm {
    /// Checks positivity (tol `1e-9`) and normalization (`1e-9` max-norm),
    /// failing on the first violated condition.
    pub fn new(elements: Vec<HermitianMatrix>) -> Result<Self, PovmError> {
        let dim = elements.first().ok_or(PovmError::Empty)?.dim();
        for (index, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(PovmError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: e.dim(),
                });
            }
        }
        for (index, e) in elements.iter().enumerate() {
            let check = is_psd(e, PSD_TOL)?;
            if !check.psd {
                return Err(PovmError::NotPsd {
                    index,
                    min_eig: check.min_eigenvalue,
                });
            }
        }
        let defect = HermitianMatrix::sum(&elements, dim).max_abs_diff(&HermitianMatrix::identity(dim));
        if !(defect <= NORMALIZATION_TOL) {
            return Err(PovmError::NotNormalized { defect });
        }
        Ok(Self { dim, elements })
    }

    /// Skips validation; for element lists already checked under the same tolerances.
    pub(crate) fn from_validated(elements: Vec<HermitianMatrix>) -> Self {
        let dim = elements[0].dim();
        Self { dim, elements }
    }

    /// `(I/n, ..., I/n)`.
    pub fn trivial(n: usize, dim: usize) -> Self {
        Self {
            dim,
            elements: vec![HermitianMatrix::scaled_identity(dim, 1.0 / n as f64); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<HermitianMatrix> {
        self.elements
    }

    pub fn max_abs_diff(&self, other: &Povm) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Conditional probabilities `mu(j | measurement i, mother outcome k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessingMap {
    m: usize,
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

impl PostProcessingMap {
    /// `probs[i][j][k]`. Entries in `[-1e-12, 0)` are clamped to zero; each
    /// `sum_j probs[i][j][k]` must be one within `1e-10`.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self, PovmError> {
        let m = probs.len();
        let n = probs.first().map_or(0, Vec::len);
        let k = probs
            .first()
            .and_then(|p| p.first())
            .map_or(0, Vec::len);
        if m == 0 || n == 0 || k == 0 {
            return Err(PovmError::Map("empty map".into()));
        }
        let mut flat = Vec::with_capacity(m * n * k);
        for (i, per_i) in probs.iter().enumerate() {
            if per_i.len() != n {
                return Err(PovmError::Map(format!("probs[{i}] has {} outcomes, expected {n}", per_i.len())));
            }
            for (j, per_j) in per_i.iter().enumerate() {
                if per_j.len() != k {
                    return Err(PovmError::Map(format!(
                        "probs[{i}][{j}] has {} entries, expected {k}",
                        per_j.len()
                    )));
                }
                flat.extend_from_slice(per_j);
            }
        }
        Self::from_flat(m, n, k, flat)
    }

    pub fn from_flat(m: usize, n: usize, k: usize, probs: Vec<f64>) -> Result<Self, PovmError> {
        Self::from_flat_with_tol(m, n, k, probs, MAP_SUM_TOL)
    }

    pub(crate) fn from_flat_with_tol(
        m: usize,
        n: usize,
        k: usize,
        mut probs: Vec<f64>,
        sum_tol: f64,
    ) -> Result<Self, PovmError> {
        if m == 0 || n == 0 || k == 0 || probs.len() != m * n * k {
            return Err(PovmError::Map("shape does not match m*n*K".into()));
        }
        for (idx, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -MAP_NEG_TOL {
                return Err(PovmError::Map(format!("entry {idx} is {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let map = Self { m, n, k, probs };
        for i in 0..m {
            for kk in 0..k {
                let s: f64 = (0..n).map(|j| map.get(i, j, kk)).sum();
                if !((s - 1.0).abs() <= sum_tol) {
                    return Err(PovmError::Map(format!(
                        "sum over outcomes for measurement {i}, mother outcome {kk} is {s}"
                    )));
                }
            }
        }
        Ok(map)
    }

    /// Deterministic map `mu(j|i,k) = [j == outcome(i, k)]`.
    pub fn deterministic(
        m: usize,
        n: usize,
        k: usize,
        outcome: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![0.0; m * n * k];
        for i in 0..m {
            for kk in 0..k {
                let j = outcome(i, kk);
                assert!(j < n, "outcome out of range");
                probs[(i * n + j) * k + kk] = 1.0;
            }
        }
        Self { m, n, k, probs }
    }

    pub fn uniform(m: usize, n: usize, k: usize) -> Self {
        Self {
            m,
            n,
            k,
            probs: vec![1.0 / n as f64; m * n * k],
        }
    }

    pub fn num_measurements(&self) -> usize {
        self.m
    }

    pub fn num_outcomes(&self) -> usize {
        self.n
    }

    pub fn num_mother_outcomes(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.probs[(i * self.n + j) * self.k + k]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.m)
            .map(|i| {
                (0..self.n)
                    .map(|j| (0..self.k).map(|k| self.get(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }

    /// `sum_k mu(j|i,k) M_k` for every outcome `j`, without validation.
    pub fn reconstruct_elements(&self, mother: &[HermitianMatrix], i: usize) -> Vec<HermitianMatrix> {
        let d = mother[0].dim();
        (0..self.n)
            .map(|j| {
                let mut acc = HermitianMatrix::zeros(d);
                for (k, mk) in mother.iter().enumerate() {
                    let w = self.get(i, j, k);
                    if w != 0.0 {
                        acc = acc.axpby(1.0, mk, w);
                    }
                }
                acc
            })
            .collect()
    }
}

/// A parent POVM together with the map that recovers each target.
#[derive(Debug, Clone, PartialEq)]
pub struct MotherMeasurement {
    pub mother: Povm,
    pub map: PostProcessingMap,
}

impl MotherMeasurement {
    pub fn new(mother: Povm, map: PostProcessingMap) -> Result<Self, PovmError> {
        if map.num_mother_outcomes() != mother.len() {
            return Err(PovmError::Map(format!(
                "map has {} mother outcomes, mother has {}",
                map.num_mother_outcomes(),
                mother.len()
            )));
        }
        Ok(Self { mother, map })
    }

    /// Largest max-norm deviation between the reconstructed and the target POVMs.
    pub fn reproduction_error(&self, targets: &[Povm]) -> f64 {
        if targets.len() != self.map.num_measurements() {
            return f64::INFINITY;
        }
        targets
            .iter()
            .enumerate()
            .map(|(i, target)| {
                if target.len() != self.map.num_outcomes() {
                    return f64::INFINITY;
                }
                self.map
                    .reconstruct_elements(self.mother.elements(), i)
                    .iter()
                    .zip(target.elements())
                    .map(|(a, b)| a.max_abs_diff(b))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// The `i`-th POVM recovered from a mother measurement.
pub fn apply_post_processing(m: &MotherMeasurement, i: usize) -> Result<Povm, PovmError> {
    if i >= m.map.num_measurements() {
        return Err(PovmError::IndexOutOfRange {
            index: i,
            bound: m.map.num_measurements(),
        });
    }
    Povm::new(m.map.reconstruct_elements(m.mother.elements(), i))
}

/// Hermitian basis of operators supported on the span of `vectors` (assumed orthonormal).
pub(crate) fn supported_hermitian_basis(vectors: &[Vec<C64>]) -> Vec<HermitianMatrix> {
    let r = vectors.len();
    let outer = |a: &[C64], b: &[C64]| {
        let d = a.len();
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = a[i] * b[j].conj();
            }
        }
        m
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(r * r);
    for a in 0..r {
        out.push(HermitianMatrix::symmetrized(outer(&vectors[a], &vectors[a])));
    }
    for a in 0..r {
        for b in (a + 1)..r {
            let ab = outer(&vectors[a], &vectors[b]);
            let ba = outer(&vectors[b], &vectors[a]);
            out.push(HermitianMatrix::symmetrized(ab.try_add(&ba).unwrap().scale(s)));
            out.push(HermitianMatrix::symmetrized(
                ab.try_sub(&ba).unwrap().scale_complex(C64::new(0.0, s)),
            ));
        }
    }
    out
}

/// Basis of Hermitian perturbations supported on `supp(a)`.
pub(crate) fn support_perturbations(a: &HermitianMatrix) -> Result<Vec<HermitianMatrix>, LinalgError> {
    let spec = eig_hermitian(a)?;
    Ok(supported_hermitian_basis(&spec.support_basis(SUPPORT_TOL)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtremalityReport {
    pub extremal: bool,
    pub kernel_dimension: usize,
}

/// A POVM is extremal iff the only Hermitian `(D_i)` with `D_i` supported on
/// `supp(A_i)` and `sum_i D_i = 0` is zero.
pub fn povm_is_extremal(p: &Povm) -> Result<ExtremalityReport, PovmError> {
    let d = p.dim();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for e in p.elements() {
        for b in support_perturbations(e)? {
            columns.push(b.coords());
        }
    }
    let unknowns = columns.len();
    if unknowns == 0 {
        return Ok(ExtremalityReport {
            extremal: true,
            kernel_dimension: 0,
        });
    }
    let m = DMatrix::from_fn(d * d, unknowns, |r, c| columns[c][r]);
    let kernel_dimension = unknowns - linalg::rank(&m, RANK_TOL);
    Ok(ExtremalityReport {
        extremal: kernel_dimension == 0,
        kernel_dimension,
    })
}

/// Real linear independence of Hermitian operators.
pub fn linear_independence(ops: &[HermitianMatrix]) -> bool {
    let Some(first) = ops.first() else {
        return true;
    };
    let d = first.dim();
    if ops.iter().any(|o| o.dim() != d) {
        return false;
    }
    if ops.len() > d * d {
        return false;
    }
    let cols: Vec<Vec<f64>> = ops.iter().map(HermitianMatrix::coords).collect();
    let m = DMatrix::from_fn(d * d, ops.len(), |r, c| cols[c][r]);
    linalg::rank(&m, RANK_TOL) == ops.len()
}

/// Complex Ginibre matrix with standard complex normal entries.
pub(crate) fn ginibre<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let data = (0..d * d)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    ComplexMatrix::from_raw(d, d, data)
}

/// Random PSD `G G^dagger` from a Ginibre draw.
pub(crate) fn random_psd<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianMatrix {
    let g = ginibre(rng, d);
    HermitianMatrix::symmetrized(g.matmul(&g.adjoint()).unwrap())
}

/// `S^{-1/2} W S^{-1/2}` for each `W`, where `S = sum W`.
pub(crate) fn normalize_family(ws: &[HermitianMatrix]) -> Result<Vec<HermitianMatrix>, PovmError> {
    let d = ws[0].dim();
    let s = HermitianMatrix::sum(ws, d);
    let spec = eig_hermitian(&s)?;
    if spec.min_eigenvalue() < 1e-12 {
        return Err(PovmError::SingularNormalizer {
            min_eig: spec.min_eigenvalue(),
        });
    }
    let inv_sqrt = s.map_spectrum(|x| 1.0 / x.sqrt())?;
    Ok(ws.iter().map(|w| w.congruence(inv_sqrt.matrix())).collect())
}

/// Seeded random POVM with `n` outcomes in dimension `d` (Ginibre, normalized).
pub fn random_povm(n: usize, d: usize, seed: u64) -> Result<Povm, PovmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_povm_with(&mut rng, n, d)
}

pub fn random_povm_with<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Result<Povm, PovmError> {
    if n == 0 || d == 0 {
        return Err(PovmError::Empty);
    }
    if d > MAX_RANDOM_DIM {
        return Err(PovmError::TooLarge(d));
    }
    if n == 1 {
        return Povm::new(vec![HermitianMatrix::identity(d)]);
    }
    let mut last = PovmError::SingularNormalizer { min_eig: 0.0 };
    for _ in 0..=RANDOM_RETRIES {
        let ws: Vec<_> = (0..n).map(|_| random_psd(rng, d)).collect();
        match normalize_family(&ws) {
            Ok(elements) => return Povm::new(elements),
            Err(e @ PovmError::SingularNormalizer { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}
