//! Doubly normalised tensors: grids of PSD operators whose rows and columns
//! are POVMs.
//!
//! Permutation indices follow the lexicographic order of
//! [`enumerate_permutations`]; permutation `l` places its coefficient in the
//! cells `(a, b)` with `a = pi_l(b)`. Outcome tuples are flattened with the
//! first measurement as the most significant digit.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hermat::{
    is_psd, pauli_x, pauli_z, ComplexMatrix, HermitianMatrix, LinalgError, HERM_TOL, PSD_TOL,
};
use crate::jointmeas::tuple_of;
use crate::linalg;
use crate::povm::{
    self, linear_independence, povm_is_extremal, random_povm, MotherMeasurement,
    PostProcessingMap, Povm, PovmError, RANK_TOL,
};
use crate::sdp::{self, BlockSpec, Residuals, SdpError, SdpProblem, SdpStatus, SolveOptions};
use crate::stochastic::{
    bvn_decompose, enumerate_permutations, factorial, inverse_factorial, BvnDecomposition,
    DoublyStochasticMatrix, Permutation, StochasticError, MAX_PERM_N,
};

/// Row/column normalization and entry positivity tolerance.
pub const DNT_TOL: f64 = 1e-9;
/// Largest `n` for the SDP- and kernel-based operations (`n!` blocks).
pub const MAX_DECOMPOSE_N: usize = 4;
pub const MAX_EXTREMAL_DIM: usize = 4;
pub const DEFAULT_DECOMPOSE_TOL: f64 = 1e-6;
/// Below this distance from the uniform tensor `eta` is unbounded.
const TRIVIAL_SHIFT: f64 = 1e-12;
/// Residual below which an affine decomposition counts as a solution.
pub const AFFINE_TOL: f64 = 1e-8;
/// Reproduction tolerance for mother-based constructions.
pub const MOTHER_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;
const SINKHORN_MAX_ITERS: usize = 500;
const SINKHORN_TOL: f64 = 1e-10;
const MAX_PSEUDO_MOTHER_ELEMENTS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DntError {
    #[error("empty grid")]
    Empty,
    #[error("row {} has {len} entries, expected {n}", .row + 1)]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("entry ({}, {}) has dimension {found}, expected {expected}", .i + 1, .j + 1)]
    DimensionMismatch {
        i: usize,
        j: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({}, {}) is not PSD (min eigenvalue {min_eig:e})", .i + 1, .j + 1)]
    EntryNotPsd { i: usize, j: usize, min_eig: f64 },
    #[error("row {} does not sum to the identity (defect {defect:e})", .i + 1)]
    RowNotNormalized { i: usize, defect: f64 },
    #[error("column {} does not sum to the identity (defect {defect:e})", .j + 1)]
    ColumnNotNormalized { j: usize, defect: f64 },
    #[error("{count} coefficients is not n! for any n <= {MAX_PERM_N}")]
    BadCardinality { count: usize },
    #[error("n = {n} exceeds the limit {max}")]
    NTooLarge { n: usize, max: usize },
    #[error("dimension {dim} exceeds the limit {max}")]
    DimTooLarge { dim: usize, max: usize },
    #[error("solver failed ({status:?}, residuals {residuals:?})")]
    SolverFailure {
        status: SdpStatus,
        residuals: Residuals,
    },
    #[error("post-processing map is not symmetric (defect {defect:e})")]
    AsymmetricMap { defect: f64 },
    #[error("map has shape {found:?}, expected {expected:?} (measurements, outcomes, mother outcomes)")]
    MapShape {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    #[error("slice for mother outcome {} is not doubly stochastic (defect {defect:e})", .k + 1)]
    SliceNotDoublyStochastic { k: usize, defect: f64 },
    #[error("reconstruction misses the target by {norm:e}")]
    ReproductionFailure { norm: f64 },
    #[error("mother elements are not linearly independent")]
    NotIndependent,
    #[error("column {} sum for mother outcome {} is off by {defect:e}", .j + 1, .k + 1)]
    ColumnSumViolation { j: usize, k: usize, defect: f64 },
    #[error("marginals differ from I/n by {defect:e}")]
    BadMarginals { defect: f64 },
    #[error("operator Sinkhorn did not converge (defect {defect:e})")]
    SinkhornNotConverged { defect: f64 },
    #[error("order must be a permutation of 0..{m}")]
    BadOrder { m: usize },
    #[error("pseudo-mother would have {count} elements")]
    TooManyElements { count: usize },
    #[error("measurement {index} has {found} outcomes in dimension {found_dim}, expected {expected} in dimension {expected_dim}")]
    InconsistentRows {
        index: usize,
        expected: usize,
        found: usize,
        expected_dim: usize,
        found_dim: usize,
    },
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// A validated doubly normalised tensor, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dnt {
    n: usize,
    dim: usize,
    grid: Vec<HermitianMatrix>,
}

/// Validates a grid: entries PSD, then rows, then columns summing to `I`.
pub fn dnt_validate(grid: Vec<Vec<HermitianMatrix>>) -> Result<Dnt, DntError> {
    let n = grid.len();
    let dim = grid
        .first()
        .and_then(|r| r.first())
        .ok_or(DntError::Empty)?
        .dim();
    for (row, r) in grid.iter().enumerate() {
        if r.len() != n {
            return Err(DntError::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
        for (j, e) in r.iter().enumerate() {
            if e.dim() != dim {
                return Err(DntError::DimensionMismatch {
                    i: row,
                    j,
                    expected: dim,
                    found: e.dim(),
                });
            }
        }
    }
    let flat: Vec<HermitianMatrix> = grid.into_iter().flatten().collect();
    Dnt::from_flat(n, flat)
}

impl Dnt {
    /// Row-major entries; validates like [`dnt_validate`].
    pub fn from_flat(n: usize, grid: Vec<HermitianMatrix>) -> Result<Self, DntError> {
        if n == 0 || grid.is_empty() {
            return Err(DntError::Empty);
        }
        if grid.len() != n * n {
            return Err(DntError::NotSquare {
                row: grid.len() / n,
                len: grid.len() % n,
                n,
            });
        }
        let dim = grid[0].dim();
        for (idx, e) in grid.iter().enumerate() {
            if e.dim() != dim {
                return Err(DntError::DimensionMismatch {
                    i: idx / n,
                    j: idx % n,
                    expected: dim,
                    found: e.dim(),
                });
            }
        }
        for (idx, e) in grid.iter().enumerate() {
            let check = is_psd(e, PSD_TOL)?;
            if !check.psd {
                return Err(DntError::EntryNotPsd {
                    i: idx / n,
                    j: idx % n,
                    min_eig: check.min_eigenvalue,
                });
            }
        }
        let d = Self { n, dim, grid };
        let id = HermitianMatrix::identity(dim);
        for i in 0..n {
            let defect = d.row_sum(i).max_abs_diff(&id);
            if !(defect <= DNT_TOL) {
                return Err(DntError::RowNotNormalized { i, defect });
            }
        }
        for j in 0..n {
            let defect = d.column_sum(j).max_abs_diff(&id);
            if !(defect <= DNT_TOL) {
                return Err(DntError::ColumnNotNormalized { j, defect });
            }
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &HermitianMatrix {
        &self.grid[i * self.n + j]
    }

    pub fn entries(&self) -> &[HermitianMatrix] {
        &self.grid
    }

    pub fn grid(&self) -> Vec<Vec<HermitianMatrix>> {
        self.grid.chunks(self.n).map(<[_]>::to_vec).collect()
    }

    fn row_sum(&self, i: usize) -> HermitianMatrix {
        HermitianMatrix::sum((0..self.n).map(|j| self.get(i, j)), self.dim)
    }

    fn column_sum(&self, j: usize) -> HermitianMatrix {
        HermitianMatrix::sum((0..self.n).map(|i| self.get(i, j)), self.dim)
    }

    /// Largest entrywise deviation between two grids of equal shape.
    pub fn max_abs_diff(&self, other: &Dnt) -> f64 {
        if self.n != other.n || self.dim != other.dim {
            return f64::INFINITY;
        }
        self.grid
            .iter()
            .zip(&other.grid)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Every entry `I/n`.
    pub fn uniform(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            grid: vec![HermitianMatrix::scaled_identity(dim, 1.0 / n as f64); n * n],
        }
    }
}

/// Row POVMs `(A_i1, .., A_in)`.
pub fn rows(d: &Dnt) -> Vec<Povm> {
    (0..d.n)
        .map(|i| Povm::from_validated((0..d.n).map(|j| d.get(i, j).clone()).collect()))
        .collect()
}

/// Column POVMs `(A_1j, .., A_nj)`.
pub fn columns(d: &Dnt) -> Vec<Povm> {
    (0..d.n)
        .map(|j| Povm::from_validated((0..d.n).map(|i| d.get(i, j).clone()).collect()))
        .collect()
}

/// Rows followed by columns.
pub fn rows_and_columns(d: &Dnt) -> Vec<Povm> {
    let mut out = rows(d);
    out.extend(columns(d));
    out
}

/// `(a, b)` cells covered by each permutation: `cells[a * n + b]` lists the `l` with `a = pi_l(b)`.
fn cell_members(perms: &[Permutation], n: usize) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new(); n * n];
    for (l, p) in perms.iter().enumerate() {
        for b in 0..n {
            cells[p.apply(b) * n + b].push(l);
        }
    }
    cells
}

fn n_from_count(count: usize) -> Result<usize, DntError> {
    inverse_factorial(count)
        .filter(|&n| (1..=MAX_PERM_N).contains(&n))
        .ok_or(DntError::BadCardinality { count })
}

/// `B_ab = sum_{l: a = pi_l(b)} Q_l` over Hermitian coefficients (not validated).
pub fn combine(coefficients: &[HermitianMatrix]) -> Result<Vec<HermitianMatrix>, DntError> {
    let n = n_from_count(coefficients.len())?;
    let dim = coefficients[0].dim();
    let perms = enumerate_permutations(n)?;
    Ok(cell_members(&perms, n)
        .iter()
        .map(|ls| HermitianMatrix::sum(ls.iter().map(|&l| &coefficients[l]), dim))
        .collect())
}

/// The DNT `sum_l pi_l (x) Q_l` of a coefficient POVM with `n!` outcomes.
pub fn synthesize(coefficients: &Povm) -> Result<Dnt, DntError> {
    let n = n_from_count(coefficients.len())?;
    Dnt::from_flat(n, combine(coefficients.elements())?)
}

/// A coefficient POVM over the lexicographically ordered permutations of `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationDecomposition {
    n: usize,
    coefficients: Povm,
}

impl PermutationDecomposition {
    pub fn new(coefficients: Povm) -> Result<Self, DntError> {
        let n = n_from_count(coefficients.len())?;
        Ok(Self { n, coefficients })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> &Povm {
        &self.coefficients
    }

    pub fn synthesize(&self) -> Result<Dnt, DntError> {
        synthesize(&self.coefficients)
    }

    /// Coefficients with trace above `threshold`.
    pub fn non_null_count(&self, threshold: f64) -> usize {
        self.coefficients
            .elements()
            .iter()
            .filter(|q| q.trace() > threshold)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionVerdict {
    pub decomposable: bool,
    /// Largest `eta` with `eta A + (1 - eta) U` decomposable, `U` uniform; clamped to `[0, 1 + tol]`.
    pub eta: f64,
    pub decomposition: Option<PermutationDecomposition>,
    pub solver_residuals: Residuals,
    pub iterations: usize,
}

fn check_n(n: usize) -> Result<(), DntError> {
    if n > MAX_DECOMPOSE_N {
        return Err(DntError::NTooLarge {
            n,
            max: MAX_DECOMPOSE_N,
        });
    }
    Ok(())
}

/// Marginal constraints on the coefficients `Q_l`, either against the DNT
/// itself or against `eta A + (1 - eta) I/n` with `eta` in block `n!`.
fn decomposition_problem(d: &Dnt, perms: &[Permutation], with_eta: bool) -> SdpProblem {
    let (n, dim) = (d.n, d.dim);
    let count = perms.len();
    let mut blocks = vec![BlockSpec::complex(dim); count];
    if with_eta {
        blocks.push(BlockSpec::real(1));
    }
    let mut problem = SdpProblem::new(blocks);
    let basis = HermitianMatrix::basis(dim);
    let noise = HermitianMatrix::scaled_identity(dim, 1.0 / n as f64);
    for (cell, members) in cell_members(perms, n).iter().enumerate() {
        let a = &d.grid[cell];
        let target = if with_eta { noise.coords() } else { a.coords() };
        let shift = (a - &noise).coords();
        for (t, e) in basis.iter().enumerate() {
            let mut terms: Vec<(usize, HermitianMatrix)> =
                members.iter().map(|&l| (l, e.clone())).collect();
            if with_eta && shift[t] != 0.0 {
                terms.push((count, HermitianMatrix::diagonal(&[-shift[t]])));
            }
            problem.add_constraint(terms, target[t]);
        }
    }
    if with_eta {
        problem.objective.push((count, HermitianMatrix::identity(1)));
    }
    problem
}

fn polished_coefficients(problem: &SdpProblem, blocks: &[HermitianMatrix]) -> Option<Povm> {
    Povm::new(sdp::project_onto_constraints(problem, blocks)).ok()
}

/// Decides whether `d` is a POVM-weighted combination of permutation
/// tensors, by maximizing the white-noise weight `eta` for which the
/// coefficients exist. Decomposable iff `eta* >= 1 - tol`; the returned
/// coefficients come from a re-solve at `eta = 1`.
pub fn decide_permutation_decomposable(
    d: &Dnt,
    tol: f64,
) -> Result<DecompositionVerdict, DntError> {
    check_n(d.n)?;
    let perms = enumerate_permutations(d.n)?;
    let count = perms.len();
    let opts = SolveOptions::default();
    let exact = decomposition_problem(d, &perms, false);
    let uniform = HermitianMatrix::scaled_identity(d.dim, 1.0 / count as f64);

    if d.max_abs_diff(&Dnt::uniform(d.n, d.dim)) <= TRIVIAL_SHIFT {
        // the uniform tensor itself: eta is unbounded
        let q = polished_coefficients(&exact, &vec![uniform; count])
            .expect("uniform coefficients are a POVM");
        return Ok(DecompositionVerdict {
            decomposable: true,
            eta: 1.0 + tol,
            decomposition: Some(PermutationDecomposition::new(q)?),
            solver_residuals: Residuals::default(),
            iterations: 0,
        });
    }

    let robust = decomposition_problem(d, &perms, true);
    let sol = sdp::solve(&robust, &opts)?;
    if !sol.is_usable(0.1 * tol) {
        return Err(DntError::SolverFailure {
            status: sol.status,
            residuals: sol.residuals,
        });
    }
    let eta_star = sol.primal_blocks[count].get(0, 0).re;
    let eta = eta_star.clamp(0.0, 1.0 + tol);
    let decomposable = eta >= 1.0 - tol;
    let mut verdict = DecompositionVerdict {
        decomposable,
        eta,
        decomposition: None,
        solver_residuals: sol.residuals,
        iterations: sol.iterations,
    };
    if !decomposable {
        return Ok(verdict);
    }
    let refined = sdp::solve(&exact, &opts)?;
    let mut q = None;
    if refined.is_usable(0.1 * tol) {
        q = polished_coefficients(&exact, &refined.primal_blocks);
    }
    if q.is_none() {
        // Q(eta*)/eta* + (1 - 1/eta*) I/n! has exactly the target cells
        let w = 1.0 / eta_star;
        let mixed: Vec<HermitianMatrix> = sol.primal_blocks[..count]
            .iter()
            .map(|x| x.axpby(w, &uniform, 1.0 - w))
            .collect();
        q = polished_coefficients(&exact, &mixed);
    }
    let Some(q) = q else {
        return Err(DntError::SolverFailure {
            status: refined.status,
            residuals: refined.residuals,
        });
    };
    verdict.decomposition = Some(PermutationDecomposition::new(q)?);
    Ok(verdict)
}

fn expect_map_shape(map: &PostProcessingMap, expected: (usize, usize, usize)) -> Result<(), DntError> {
    let found = (
        map.num_measurements(),
        map.num_outcomes(),
        map.num_mother_outcomes(),
    );
    if found != expected {
        return Err(DntError::MapShape { expected, found });
    }
    Ok(())
}

/// Result of the constructive path through a symmetric mother.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMotherDecomposition {
    pub decomposition: PermutationDecomposition,
    /// Birkhoff decomposition of `[mu(j | row i, k)]_ij` for each mother outcome `k`.
    pub slices: Vec<BvnDecomposition>,
}

/// Builds `Q_l = sum_k r^(k)_l M_k` from a mother whose map (rows `0..n`,
/// columns `n..2n`) is symmetric, `r^(k)` being a Birkhoff decomposition
/// of the `k`-th slice.
pub fn decompose_from_symmetric_mother(
    d: &Dnt,
    mother: &Povm,
    map: &PostProcessingMap,
) -> Result<SymmetricMotherDecomposition, DntError> {
    let n = d.n;
    let k_count = mother.len();
    expect_map_shape(map, (2 * n, n, k_count))?;
    let mut asym = 0.0f64;
    for k in 0..k_count {
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((map.get(i, j, k) - map.get(n + j, i, k)).abs());
            }
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(DntError::AsymmetricMap { defect: asym });
    }
    let pair = MotherMeasurement::new(mother.clone(), map.clone())?;
    let norm = pair.reproduction_error(&rows_and_columns(d));
    if !(norm <= MOTHER_TOL) {
        return Err(DntError::ReproductionFailure { norm });
    }

    let perm_count = factorial(n);
    let mut coefficients = vec![HermitianMatrix::zeros(d.dim); perm_count];
    let mut slices = Vec::with_capacity(k_count);
    for (k, m_k) in mother.elements().iter().enumerate() {
        let entries: Vec<f64> = (0..n * n).map(|c| map.get(c / n, c % n, k)).collect();
        let defect = (0..n)
            .map(|j| ((0..n).map(|i| entries[i * n + j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let slice = DoublyStochasticMatrix::new(n, entries)
            .map_err(|_| DntError::SliceNotDoublyStochastic { k, defect })?;
        let bvn = bvn_decompose(&slice)
            .map_err(|_| DntError::SliceNotDoublyStochastic { k, defect })?;
        for (l, w) in bvn.weights_by_lex_index().into_iter().enumerate() {
            if w != 0.0 {
                coefficients[l] = coefficients[l].axpby(1.0, m_k, w);
            }
        }
        slices.push(bvn);
    }
    let q = Povm::new(coefficients)?;
    let decomposition = PermutationDecomposition::new(q)?;
    let norm = decomposition.synthesize()?.max_abs_diff(d);
    if !(norm <= MOTHER_TOL) {
        return Err(DntError::ReproductionFailure { norm });
    }
    Ok(SymmetricMotherDecomposition {
        decomposition,
        slices,
    })
}

/// Extends a row map over a linearly independent mother to the symmetric
/// rows-and-columns map `mu(i | column j, k) := mu(j | row i, k)`.
pub fn symmetrize_from_independent_mother(
    d: &Dnt,
    mother: &Povm,
    row_map: &PostProcessingMap,
) -> Result<PostProcessingMap, DntError> {
    let n = d.n;
    let k_count = mother.len();
    expect_map_shape(row_map, (n, n, k_count))?;
    let pair = MotherMeasurement::new(mother.clone(), row_map.clone())?;
    let norm = pair.reproduction_error(&rows(d));
    if !(norm <= MOTHER_TOL) {
        return Err(DntError::ReproductionFailure { norm });
    }
    if !linear_independence(mother.elements()) {
        return Err(DntError::NotIndependent);
    }
    for k in 0..k_count {
        for j in 0..n {
            let s: f64 = (0..n).map(|i| row_map.get(i, j, k)).sum();
            let defect = (s - 1.0).abs();
            if !(defect <= MOTHER_TOL) {
                return Err(DntError::ColumnSumViolation { j, k, defect });
            }
        }
    }
    let mut probs = Vec::with_capacity(2 * n * n * k_count);
    for i in 0..n {
        for j in 0..n {
            probs.extend((0..k_count).map(|k| row_map.get(i, j, k)));
        }
    }
    for j in 0..n {
        for i in 0..n {
            probs.extend((0..k_count).map(|k| row_map.get(i, j, k)));
        }
    }
    Ok(PostProcessingMap::from_flat_with_tol(
        2 * n,
        n,
        k_count,
        probs,
        MOTHER_TOL,
    )?)
}

/// Hermiticity and positivity of one pseudo-mother element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementReport {
    pub hermitian: bool,
    pub hermitian_defect: f64,
    /// Smallest eigenvalue of the Hermitian part; meaningful as a PSD test only when `hermitian`.
    pub min_eigenvalue: f64,
    pub psd: bool,
}

/// Ordered products `M_b = B^(o_1)_{b_{o_1}} ... B^(o_m)_{b_{o_m}}` over
/// outcome tuples `b`, flattened with measurement 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMother {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    /// Zero-based product order.
    pub order: Vec<usize>,
    pub elements: Vec<ComplexMatrix>,
    pub report: Vec<ElementReport>,
}

impl PseudoMother {
    pub fn tuple(&self, index: usize) -> Vec<usize> {
        tuple_of(index, self.n, self.m)
    }

    /// `sum_b M_b - I`, max-norm.
    pub fn normalization_defect(&self) -> f64 {
        let mut total = ComplexMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            total = total.try_add(e).expect("uniform dimensions");
        }
        total.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    /// `sum_{b: b_i = j} M_b`.
    pub fn marginal(&self, i: usize, j: usize) -> ComplexMatrix {
        let mut total = ComplexMatrix::zeros(self.dim, self.dim);
        for (idx, e) in self.elements.iter().enumerate() {
            if self.tuple(idx)[i] == j {
                total = total.try_add(e).expect("uniform dimensions");
            }
        }
        total
    }

    /// Largest deviation of the deterministic marginals from the source measurements.
    pub fn reproduction_error(&self, measurements: &[Povm]) -> f64 {
        let mut worst = 0.0f64;
        for (i, p) in measurements.iter().enumerate() {
            for (j, e) in p.elements().iter().enumerate() {
                worst = worst.max(self.marginal(i, j).max_abs_diff(e.matrix()));
            }
        }
        worst
    }

    pub fn all_psd(&self) -> bool {
        self.report.iter().all(|r| r.psd)
    }
}

/// Pseudo-mother of `m` measurements with equal outcome counts; `order`
/// defaults to `0..m`.
pub fn pseudo_mother(measurements: &[Povm], order: Option<&[usize]>) -> Result<PseudoMother, DntError> {
    let first = measurements
        .first()
        .ok_or(DntError::Povm(PovmError::Empty))?;
    let (n, dim, m) = (first.len(), first.dim(), measurements.len());
    for (index, p) in measurements.iter().enumerate() {
        if p.len() != n || p.dim() != dim {
            return Err(DntError::InconsistentRows {
                index,
                expected: n,
                found: p.len(),
                expected_dim: dim,
                found_dim: p.dim(),
            });
        }
    }
    let order: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => (0..m).collect(),
    };
    let mut seen = vec![false; m];
    if order.len() != m || order.iter().any(|&o| o >= m || std::mem::replace(&mut seen[o], true)) {
        return Err(DntError::BadOrder { m });
    }
    let count = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > MAX_PSEUDO_MOTHER_ELEMENTS as u128 {
        return Err(DntError::TooManyElements {
            count: count.min(usize::MAX as u128) as usize,
        });
    }
    let count = count as usize;
    let mut elements = Vec::with_capacity(count);
    let mut report = Vec::with_capacity(count);
    for idx in 0..count {
        let b = tuple_of(idx, n, m);
        let mut prod = ComplexMatrix::identity(dim);
        for &o in &order {
            prod = prod.matmul(measurements[o].elements()[b[o]].matrix())?;
        }
        let hermitian_defect = prod.hermitian_defect().unwrap_or(f64::INFINITY);
        let min_eigenvalue = is_psd(&HermitianMatrix::symmetrized(prod.clone()), PSD_TOL)?.min_eigenvalue;
        let hermitian = hermitian_defect <= HERM_TOL;
        report.push(ElementReport {
            hermitian,
            hermitian_defect,
            min_eigenvalue,
            psd: hermitian && min_eigenvalue >= -PSD_TOL,
        });
        elements.push(prod);
    }
    Ok(PseudoMother {
        n,
        m,
        dim,
        order,
        elements,
        report,
    })
}

/// Hermitian, possibly indefinite, coefficients reproducing a DNT.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDecomposition {
    pub n: usize,
    pub coefficients: Vec<HermitianMatrix>,
    /// Max-norm violation of the cell constraints.
    pub residual: f64,
    pub psd_flags: Vec<bool>,
}

impl AffineDecomposition {
    pub fn success(&self) -> bool {
        self.residual <= AFFINE_TOL
    }

    /// `|sum_l Q_l - I|`, max-norm.
    pub fn normalization_defect(&self) -> f64 {
        let dim = self.coefficients[0].dim();
        HermitianMatrix::sum(&self.coefficients, dim).max_abs_diff(&HermitianMatrix::identity(dim))
    }
}

/// Max-norm violation of `sum_{l: a = pi_l(b)} Q_l = A_ab` over all cells.
pub fn affine_residual(d: &Dnt, coefficients: &[HermitianMatrix]) -> Result<f64, DntError> {
    if coefficients.len() != factorial(d.n) {
        return Err(DntError::BadCardinality {
            count: coefficients.len(),
        });
    }
    let cells = combine(coefficients)?;
    Ok(cells
        .iter()
        .zip(&d.grid)
        .map(|(c, a)| c.max_abs_diff(a))
        .fold(0.0, f64::max))
}

/// Minimum-Frobenius-norm Hermitian solution of the cell constraints,
/// through the pseudo-inverse of the cell/permutation incidence matrix.
pub fn affine_decompose(d: &Dnt) -> Result<AffineDecomposition, DntError> {
    check_n(d.n)?;
    let n = d.n;
    let perms = enumerate_permutations(n)?;
    let mut incidence = DMatrix::zeros(n * n, perms.len());
    for (cell, members) in cell_members(&perms, n).iter().enumerate() {
        for &l in members {
            incidence[(cell, l)] = 1.0;
        }
    }
    let pinv = linalg::pseudo_inverse(&incidence, RANK_TOL);
    let coefficients: Vec<HermitianMatrix> = (0..perms.len())
        .map(|l| {
            let mut acc = HermitianMatrix::zeros(d.dim);
            for (cell, a) in d.grid.iter().enumerate() {
                let w = pinv[(l, cell)];
                if w != 0.0 {
                    acc = acc.axpby(1.0, a, w);
                }
            }
            acc
        })
        .collect();
    let residual = affine_residual(d, &coefficients)?;
    let psd_flags = coefficients
        .iter()
        .map(|q| is_psd(q, PSD_TOL).map(|c| c.psd))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AffineDecomposition {
        n,
        coefficients,
        residual,
        psd_flags,
    })
}

/// Mother `M_ab = A_ab / n` (outcome `a * n + b`) of the trivial pair
/// `(I/n, .., I/n)`, recovered by the marginals over `b` and over `a`.
pub fn mother_of_trivial_pair(d: &Dnt) -> Result<MotherMeasurement, DntError> {
    let n = d.n;
    let scale = 1.0 / n as f64;
    let elements = d.grid.iter().map(|a| a.scale(scale)).collect();
    let map = PostProcessingMap::deterministic(2, n, n * n, |i, k| if i == 0 { k / n } else { k % n });
    Ok(MotherMeasurement::new(Povm::new(elements)?, map)?)
}

/// Inverse of [`mother_of_trivial_pair`]: checks both marginals equal `I/n`
/// within `1e-9`, multiplies by `n` and validates.
pub fn dnt_from_trivial_mother(mother: &Povm) -> Result<Dnt, DntError> {
    let count = mother.len();
    let n = (1..=count).find(|k| k * k >= count).unwrap_or(1);
    if n * n != count {
        return Err(DntError::BadCardinality { count });
    }
    let dim = mother.dim();
    let el = mother.elements();
    let target = HermitianMatrix::scaled_identity(dim, 1.0 / n as f64);
    let mut defect = 0.0f64;
    for x in 0..n {
        let row = HermitianMatrix::sum((0..n).map(|b| &el[x * n + b]), dim);
        let col = HermitianMatrix::sum((0..n).map(|a| &el[a * n + x]), dim);
        defect = defect.max(row.max_abs_diff(&target)).max(col.max_abs_diff(&target));
    }
    if !(defect <= DNT_TOL) {
        return Err(DntError::BadMarginals { defect });
    }
    Dnt::from_flat(n, el.iter().map(|m| m.scale(n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DntExtremality {
    pub extremal: bool,
    pub kernel_dimension: usize,
    /// Whether every row and column is an extremal POVM.
    pub rows_columns_extremal: bool,
}

/// Extremality within the convex set of DNTs: no nonzero Hermitian
/// perturbation `D_ab`, supported on `supp(A_ab)`, leaves every row and
/// column sum unchanged.
pub fn dnt_is_extremal(d: &Dnt) -> Result<DntExtremality, DntError> {
    check_n(d.n)?;
    if d.dim > MAX_EXTREMAL_DIM {
        return Err(DntError::DimTooLarge {
            dim: d.dim,
            max: MAX_EXTREMAL_DIM,
        });
    }
    let (n, dim) = (d.n, d.dim);
    let d2 = dim * dim;
    let mut columns: Vec<(usize, Vec<f64>)> = Vec::new();
    for (cell, a) in d.grid.iter().enumerate() {
        for b in povm::support_perturbations(a)? {
            columns.push((cell, b.coords()));
        }
    }
    let mut kernel_dimension = 0;
    if !columns.is_empty() {
        let mut m = DMatrix::zeros(2 * n * d2, columns.len());
        for (c, (cell, coords)) in columns.iter().enumerate() {
            let (row, col) = (cell / n, cell % n);
            for (t, &v) in coords.iter().enumerate() {
                m[(row * d2 + t, c)] = v;
                m[((n + col) * d2 + t, c)] = v;
            }
        }
        kernel_dimension = columns.len() - linalg::rank(&m, RANK_TOL);
    }
    let mut rows_columns_extremal = true;
    for p in rows_and_columns(d) {
        if !povm_is_extremal(&p)?.extremal {
            rows_columns_extremal = false;
            break;
        }
    }
    Ok(DntExtremality {
        extremal: kernel_dimension == 0,
        kernel_dimension,
        rows_columns_extremal,
    })
}

/// Qubit trine elements `A_1 = (I + sx)/3`, `A_{2,3} = (I - (sx -/+ sqrt3 sz)/2)/3`.
pub fn trine_povm() -> Povm {
    let (a1, a2, a3) = trine_elements();
    Povm::new(vec![a1, a2, a3]).expect("trine is a POVM")
}

fn trine_elements() -> (HermitianMatrix, HermitianMatrix, HermitianMatrix) {
    let i2 = HermitianMatrix::identity(2);
    let (sx, sz) = (pauli_x(), pauli_z());
    let r3 = 3f64.sqrt();
    let third = 1.0 / 3.0;
    let a1 = i2.axpby(third, &sx, third);
    let a2 = i2.axpby(third, &sx.axpby(-0.5, &sz, 0.5 * r3), third);
    let a3 = i2.axpby(third, &sx.axpby(-0.5, &sz, -0.5 * r3), third);
    (a1, a2, a3)
}

/// The four indefinite coefficients of the trine DNT, in the order
/// `(sx/3 on id, I/3 on (2 3), A_2 on (1 2), A_3 on (1 3))`, with their
/// permutations (one-based images).
pub fn trine_affine_terms() -> Vec<(Vec<usize>, HermitianMatrix)> {
    let (_, a2, a3) = trine_elements();
    vec![
        (vec![1, 2, 3], pauli_x().scale(1.0 / 3.0)),
        (vec![1, 3, 2], HermitianMatrix::scaled_identity(2, 1.0 / 3.0)),
        (vec![2, 1, 3], a2),
        (vec![3, 2, 1], a3),
    ]
}

/// Places sparse `(permutation, coefficient)` terms in the canonical order.
pub fn coefficients_from_terms(
    n: usize,
    dim: usize,
    terms: &[(Vec<usize>, HermitianMatrix)],
) -> Result<Vec<HermitianMatrix>, DntError> {
    let mut out = vec![HermitianMatrix::zeros(dim); factorial(n)];
    for (images, q) in terms {
        let l = Permutation::from_one_based(images)?.lex_index();
        out[l] = &out[l] + q;
    }
    Ok(out)
}

/// The trine DNT: the indefinite `sx/3` and the identity share the first
/// cell of every row, so the rows are trines but not jointly measurable.
pub fn build_trine_dnt() -> Dnt {
    let (_, a2, a3) = trine_elements();
    let p = pauli_x().scale(1.0 / 3.0);
    let q = HermitianMatrix::scaled_identity(2, 1.0 / 3.0);
    dnt_validate(vec![
        vec![&p + &q, a2.clone(), a3.clone()],
        vec![a2.clone(), &p + &a3, q.clone()],
        vec![a3, q, &p + &a2],
    ])
    .expect("trine grid is a DNT")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomDntMethod {
    /// Synthesized from a random coefficient POVM.
    Coefficient,
    /// Operator Sinkhorn scaling of random PSD blocks.
    Sinkhorn,
}

/// Seeded random DNT; `Coefficient` outputs are decomposable by construction.
pub fn random_dnt(n: usize, dim: usize, seed: u64, method: RandomDntMethod) -> Result<Dnt, DntError> {
    check_n(n)?;
    if dim > MAX_EXTREMAL_DIM {
        return Err(DntError::DimTooLarge {
            dim,
            max: MAX_EXTREMAL_DIM,
        });
    }
    if n == 0 || dim == 0 {
        return Err(DntError::Empty);
    }
    match method {
        RandomDntMethod::Coefficient => synthesize(&random_povm(factorial(n), dim, seed)?),
        RandomDntMethod::Sinkhorn => operator_sinkhorn(n, dim, seed),
    }
}

fn inverse_sqrt(s: &HermitianMatrix) -> Result<HermitianMatrix, DntError> {
    let check = is_psd(s, 0.0)?;
    if !(check.min_eigenvalue > 1e-14) {
        return Err(DntError::SinkhornNotConverged {
            defect: f64::INFINITY,
        });
    }
    Ok(s.map_spectrum(|x| 1.0 / x.sqrt())?)
}

fn operator_sinkhorn(n: usize, dim: usize, seed: u64) -> Result<Dnt, DntError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid: Vec<HermitianMatrix> = (0..n * n).map(|_| povm::random_psd(&mut rng, dim)).collect();
    let id = HermitianMatrix::identity(dim);
    let sum_of = |grid: &[HermitianMatrix], cells: &mut dyn Iterator<Item = usize>| {
        HermitianMatrix::sum(cells.map(|c| &grid[c]), dim)
    };
    let mut defect = f64::INFINITY;
    for _ in 0..SINKHORN_MAX_ITERS {
        for i in 0..n {
            let s = sum_of(&grid, &mut (i * n..(i + 1) * n));
            let w = inverse_sqrt(&s)?;
            for c in i * n..(i + 1) * n {
                grid[c] = grid[c].congruence(w.matrix());
            }
        }
        for j in 0..n {
            let s = sum_of(&grid, &mut (0..n).map(|i| i * n + j));
            let w = inverse_sqrt(&s)?;
            for i in 0..n {
                grid[i * n + j] = grid[i * n + j].congruence(w.matrix());
            }
        }
        defect = 0.0;
        for x in 0..n {
            let row = sum_of(&grid, &mut (x * n..(x + 1) * n));
            let col = sum_of(&grid, &mut (0..n).map(|i| i * n + x));
            defect = defect.max(row.max_abs_diff(&id)).max(col.max_abs_diff(&id));
        }
        if defect <= SINKHORN_TOL {
            return Dnt::from_flat(n, grid);
        }
    }
    Err(DntError::SinkhornNotConverged { defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermat::pauli_y;
    use crate::jointmeas::{jm_check_default, JmInstance};

    fn tagliatelli(a: &HermitianMatrix) -> Dnt {
        let b = &HermitianMatrix::identity(a.dim()) - a;
        dnt_validate(vec![vec![a.clone(), b.clone()], vec![b, a.clone()]]).unwrap()
    }

    fn identity_pattern(n: usize, dim: usize) -> Dnt {
        let grid = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            HermitianMatrix::identity(dim)
                        } else {
                            HermitianMatrix::zeros(dim)
                        }
                    })
                    .collect()
            })
            .collect();
        dnt_validate(grid).unwrap()
    }

    fn quarter_z() -> HermitianMatrix {
        HermitianMatrix::identity(2).axpby(0.25, &pauli_z(), 0.25)
    }

    #[test]
    fn validation_examples() {
        identity_pattern(3, 2);
        tagliatelli(&quarter_z());

        let trine = build_trine_dnt();
        let mut grid = trine.grid();
        grid[0][0] = pauli_x().scale(1.0 / 3.0);
        match dnt_validate(grid) {
            Err(DntError::EntryNotPsd { i: 0, j: 0, min_eig }) => {
                assert!((min_eig + 1.0 / 3.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut grid = tagliatelli(&quarter_z()).grid();
        grid[0][1] = HermitianMatrix::zeros(2);
        assert!(matches!(dnt_validate(grid), Err(DntError::EntryNotPsd { .. }) | Err(DntError::RowNotNormalized { i: 0, .. })));

        let p = HermitianMatrix::diagonal(&[1.0, 0.0]);
        let q = HermitianMatrix::diagonal(&[0.0, 1.0]);
        let cols_bad = vec![vec![p.clone(), q.clone()], vec![p.clone(), q.clone()]];
        assert!(matches!(
            dnt_validate(cols_bad),
            Err(DntError::ColumnNotNormalized { j: 0, .. })
        ));
        assert!(matches!(
            dnt_validate(vec![vec![p.clone(), q], vec![p]]),
            Err(DntError::NotSquare { row: 1, .. })
        ));
    }

    #[test]
    fn trine_entries() {
        let t = build_trine_dnt();
        let third = 1.0 / 3.0;
        let expected = HermitianMatrix::from_real(2, &[third, third, third, third]).unwrap();
        assert!(t.get(0, 0).max_abs_diff(&expected) < 1e-15);
        assert!(t.get(1, 2).max_abs_diff(&HermitianMatrix::scaled_identity(2, third)) < 1e-15);
        assert!(rows(&t)[0].max_abs_diff(&trine_povm()) < 1e-15);
    }

    #[test]
    fn synthesis_examples() {
        let a = quarter_z();
        let q = Povm::new(vec![a.clone(), &HermitianMatrix::identity(2) - &a]).unwrap();
        assert_eq!(synthesize(&q).unwrap(), tagliatelli(&a));

        let mut els = vec![HermitianMatrix::zeros(2); 6];
        els[0] = HermitianMatrix::identity(2);
        assert_eq!(synthesize(&Povm::new(els).unwrap()).unwrap(), identity_pattern(3, 2));

        let uniform = Povm::trivial(6, 2);
        let d = synthesize(&uniform).unwrap();
        for e in d.entries() {
            assert!(e.max_abs_diff(&HermitianMatrix::scaled_identity(2, 1.0 / 3.0)) < 1e-15);
        }
        assert!(matches!(
            synthesize(&Povm::trivial(5, 2)),
            Err(DntError::BadCardinality { count: 5 })
        ));
    }

    #[test]
    fn synthesized_dnts_validate() {
        for seed in 0..100u64 {
            let n = 2 + (seed % 2) as usize;
            let dim = 2 + ((seed / 2) % 2) as usize;
            let q = random_povm(factorial(n), dim, seed).unwrap();
            synthesize(&q).unwrap();
        }
    }

    #[test]
    fn rows_and_columns_of_tagliatelli() {
        let a = quarter_z();
        let t = tagliatelli(&a);
        let b = &HermitianMatrix::identity(2) - &a;
        for p in rows_and_columns(&t) {
            let e = p.elements();
            assert!((e[0] == a && e[1] == b) || (e[0] == b && e[1] == a));
        }
    }

    #[test]
    fn n2_dnts_decompose_to_first_row() {
        for seed in 0..5u64 {
            let a = random_povm(2, 2, seed).unwrap();
            let d = tagliatelli(&a.elements()[0]);
            let v = decide_permutation_decomposable(&d, DEFAULT_DECOMPOSE_TOL).unwrap();
            assert!(v.decomposable);
            let q = v.decomposition.unwrap();
            assert!(q.coefficients().elements()[0].max_abs_diff(d.get(0, 0)) <= 1e-12);
            assert!(q.coefficients().elements()[1].max_abs_diff(d.get(0, 1)) <= 1e-12);
        }
    }

    #[test]
    fn uniform_tensor_is_decomposable_without_solver() {
        let d = Dnt::uniform(3, 2);
        let v = decide_permutation_decomposable(&d, DEFAULT_DECOMPOSE_TOL).unwrap();
        assert!(v.decomposable);
        assert_eq!(v.iterations, 0);
        assert!(v.decomposition.unwrap().synthesize().unwrap().max_abs_diff(&d) <= 1e-12);
    }

    #[test]
    fn rows_and_columns_of_degenerate_instance_are_compatible() {
        // the six-member instance of this coefficient POVM stalls short of
        // the solver tolerance on the way to its optimum
        let d = synthesize(&random_povm(6, 2, 1000).unwrap()).unwrap();
        let inst = JmInstance::new(rows_and_columns(&d)).unwrap();
        let v = jm_check_default(&inst).unwrap();
        assert!(v.compatible);
        assert!(v.mother.unwrap().reproduction_error(inst.povms()) <= 1e-9);
    }

    #[test]
    fn trine_is_not_decomposable_but_affine() {
        let t = build_trine_dnt();
        let v = decide_permutation_decomposable(&t, DEFAULT_DECOMPOSE_TOL).unwrap();
        assert!(!v.decomposable);
        assert!(v.eta < 1.0 - 1e-3);
        assert!(v.decomposition.is_none());
        // reference value from an independent conic solver
        assert!((v.eta - 0.7320539851).abs() < 1e-5, "{}", v.eta);

        let terms = coefficients_from_terms(3, 2, &trine_affine_terms()).unwrap();
        assert!(affine_residual(&t, &terms).unwrap() <= 1e-12);
        let aff = affine_decompose(&t).unwrap();
        assert!(aff.success());
        assert!(aff.normalization_defect() <= 1e-8);
        assert!(aff.psd_flags.iter().any(|f| !f));

        let rows = JmInstance::new(rows(&t)).unwrap();
        let jm = jm_check_default(&rows).unwrap();
        assert!(!jm.compatible);
        assert!((jm.robustness - 0.8660244534).abs() < 1e-5, "{}", jm.robustness);
    }

    #[test]
    fn synthesized_round_trip() {
        for seed in 0..3u64 {
            let d = random_dnt(3, 2, seed, RandomDntMethod::Coefficient).unwrap();
            let v = decide_permutation_decomposable(&d, DEFAULT_DECOMPOSE_TOL).unwrap();
            assert!(v.decomposable && v.eta >= 1.0 - 1e-6);
            let back = v.decomposition.unwrap().synthesize().unwrap();
            assert!(back.max_abs_diff(&d) <= 1e-7);

            let aff = affine_decompose(&d).unwrap();
            assert!(aff.residual <= 1e-10);
        }
    }

    #[test]
    fn affine_n2_is_forced() {
        let d = tagliatelli(&quarter_z());
        let aff = affine_decompose(&d).unwrap();
        assert!(aff.coefficients[0].max_abs_diff(d.get(0, 0)) <= 1e-12);
        assert!(aff.coefficients[1].max_abs_diff(d.get(0, 1)) <= 1e-12);
        assert!(aff.psd_flags.iter().all(|&f| f));
    }

    #[test]
    fn symmetric_mother_examples() {
        // deterministic symmetric map: each slice is a permutation matrix
        let a = quarter_z();
        let d = tagliatelli(&a);
        let mother = Povm::new(vec![a.clone(), &HermitianMatrix::identity(2) - &a]).unwrap();
        let map = PostProcessingMap::deterministic(4, 2, 2, |i, k| (i % 2 + k) % 2);
        let out = decompose_from_symmetric_mother(&d, &mother, &map).unwrap();
        assert_eq!(out.decomposition.coefficients(), &mother);

        // n = 1
        let d1 = dnt_validate(vec![vec![HermitianMatrix::identity(2)]]).unwrap();
        let m1 = random_povm(3, 2, 4).unwrap();
        let out = decompose_from_symmetric_mother(&d1, &m1, &PostProcessingMap::uniform(2, 1, 3)).unwrap();
        assert!(out.decomposition.coefficients().elements()[0].max_abs_diff(&HermitianMatrix::identity(2)) < 1e-12);

        // uniform slices
        let m4 = random_povm(4, 2, 11).unwrap();
        let u = Dnt::uniform(3, 2);
        let out = decompose_from_symmetric_mother(&u, &m4, &PostProcessingMap::uniform(6, 3, 4)).unwrap();
        assert!(out.decomposition.synthesize().unwrap().max_abs_diff(&u) <= 1e-8);
        assert_eq!(out.slices.len(), 4);
    }

    #[test]
    fn symmetric_mother_rejections() {
        let d = tagliatelli(&quarter_z());
        let mother = Povm::trivial(2, 2);
        let asym = PostProcessingMap::new(vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ])
        .unwrap();
        assert!(matches!(
            decompose_from_symmetric_mother(&d, &mother, &asym),
            Err(DntError::AsymmetricMap { .. })
        ));
        let sym = PostProcessingMap::deterministic(4, 2, 2, |i, k| (i % 2 + k) % 2);
        assert!(matches!(
            decompose_from_symmetric_mother(&d, &mother, &sym),
            Err(DntError::ReproductionFailure { .. })
        ));
    }

    #[test]
    fn independent_mother_symmetrization() {
        let d = Dnt::uniform(2, 2);
        let scalar = Povm::trivial(2, 2);
        let map = PostProcessingMap::deterministic(2, 2, 2, |i, k| (i + k) % 2);
        assert!(matches!(
            symmetrize_from_independent_mother(&d, &scalar, &map),
            Err(DntError::NotIndependent)
        ));

        let a = quarter_z();
        let d = tagliatelli(&a);
        let mother = Povm::new(vec![a.clone(), &HermitianMatrix::identity(2) - &a]).unwrap();
        let sym = symmetrize_from_independent_mother(&d, &mother, &map).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(sym.get(i, j, k), sym.get(2 + j, i, k));
                }
            }
        }
        decompose_from_symmetric_mother(&d, &mother, &sym).unwrap();
    }

    #[test]
    fn pauli_spanning_mother() {
        // four linearly independent elements spanning the qubit operators
        let i2 = HermitianMatrix::identity(2);
        let s = 1.0 / 6.0;
        let rest = &(&pauli_x() + &pauli_y()) + &pauli_z();
        let m = Povm::new(vec![
            i2.axpby(s, &pauli_x(), s),
            i2.axpby(s, &pauli_y(), s),
            i2.axpby(s, &pauli_z(), s),
            i2.axpby(0.5, &rest, -s),
        ])
        .unwrap();
        assert!(linear_independence(m.elements()));
        // B_ab = sum over k of [a = pi_k(b)] M_k with pi = (id, swap, swap, id)
        let pick = [0usize, 1, 1, 0];
        let q = Povm::new(vec![
            &m.elements()[0] + &m.elements()[3],
            &m.elements()[1] + &m.elements()[2],
        ])
        .unwrap();
        let d = synthesize(&q).unwrap();
        let map = PostProcessingMap::deterministic(2, 2, 4, |i, k| (i + pick[k]) % 2);
        let sym = symmetrize_from_independent_mother(&d, &m, &map).unwrap();
        for k in 0..4 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|i| sym.get(i, j, k)).sum();
                assert!((s - 1.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn pseudo_mother_examples() {
        let p0 = HermitianMatrix::diagonal(&[1.0, 0.0]);
        let p1 = HermitianMatrix::diagonal(&[0.0, 1.0]);
        let r1 = Povm::new(vec![p0.clone(), p1.clone()]).unwrap();
        let r2 = Povm::new(vec![p1.clone(), p0.clone()]).unwrap();
        let pm = pseudo_mother(&[r1.clone(), r2.clone()], None).unwrap();
        assert_eq!(pm.elements[0], ComplexMatrix::zeros(2, 2));
        assert_eq!(pm.elements[1], p0.matrix().clone());
        assert_eq!(pm.elements[2], p1.matrix().clone());
        assert_eq!(pm.elements[3], ComplexMatrix::zeros(2, 2));
        assert!(pm.reproduction_error(&[r1.clone(), r2]) == 0.0);

        let single = pseudo_mother(std::slice::from_ref(&r1), None).unwrap();
        assert_eq!(single.elements[1], p1.matrix().clone());

        let t = build_trine_dnt();
        let pm = pseudo_mother(&rows(&t), None).unwrap();
        assert!(pm.normalization_defect() <= 1e-10);
        assert!(pm.reproduction_error(&rows(&t)) <= 1e-10);
        assert!(!pm.all_psd());

        assert!(matches!(
            pseudo_mother(&rows(&t), Some(&[0, 0, 1])),
            Err(DntError::BadOrder { m: 3 })
        ));
        let reversed = pseudo_mother(&rows(&t), Some(&[2, 1, 0])).unwrap();
        assert!(reversed.reproduction_error(&rows(&t)) <= 1e-10);
    }

    #[test]
    fn trivial_pair_correspondence() {
        let half = tagliatelli(&HermitianMatrix::scaled_identity(2, 0.5));
        let m = mother_of_trivial_pair(&half).unwrap();
        for e in m.mother.elements() {
            assert_eq!(e, &HermitianMatrix::scaled_identity(2, 0.25));
        }
        assert!(m.reproduction_error(&[Povm::trivial(2, 2), Povm::trivial(2, 2)]) == 0.0);

        let t = build_trine_dnt();
        let m = mother_of_trivial_pair(&t).unwrap();
        assert!(m.reproduction_error(&[Povm::trivial(3, 2), Povm::trivial(3, 2)]) <= 1e-12);

        // scaling by 1/n and back is exact when n is a power of two
        for seed in 0..10u64 {
            for n in [2usize, 4] {
                let d = random_dnt(n, 2, seed, RandomDntMethod::Coefficient).unwrap();
                let back = dnt_from_trivial_mother(&mother_of_trivial_pair(&d).unwrap().mother).unwrap();
                assert_eq!(back, d);
            }
        }
        assert!(matches!(
            dnt_from_trivial_mother(&Povm::trivial(3, 2)),
            Err(DntError::BadCardinality { count: 3 })
        ));
        let skewed = Povm::new(vec![
            HermitianMatrix::scaled_identity(2, 0.5),
            HermitianMatrix::zeros(2),
            HermitianMatrix::scaled_identity(2, 0.25),
            HermitianMatrix::scaled_identity(2, 0.25),
        ])
        .unwrap();
        assert!(matches!(
            dnt_from_trivial_mother(&skewed),
            Err(DntError::BadMarginals { .. })
        ));
    }

    #[test]
    fn extremality_examples() {
        let id = identity_pattern(3, 2);
        let e = dnt_is_extremal(&id).unwrap();
        assert!(e.extremal && e.rows_columns_extremal);

        let half = tagliatelli(&HermitianMatrix::scaled_identity(2, 0.5));
        let e = dnt_is_extremal(&half).unwrap();
        assert!(!e.extremal && e.kernel_dimension > 0);

        let p = HermitianMatrix::identity(2).axpby(0.5, &pauli_y(), 0.5);
        let e = dnt_is_extremal(&tagliatelli(&p)).unwrap();
        assert!(e.extremal && e.rows_columns_extremal);

        // regression: the trine grid is extremal although rows and columns
        // 2 and 3 are not extremal POVMs (they contain the full-rank I/3)
        let t = build_trine_dnt();
        let e = dnt_is_extremal(&t).unwrap();
        assert!(e.extremal && e.kernel_dimension == 0);
        assert!(!e.rows_columns_extremal);
        let kernels: Vec<usize> = rows_and_columns(&t)
            .iter()
            .map(|p| povm_is_extremal(p).unwrap().kernel_dimension)
            .collect();
        assert_eq!(kernels, vec![0, 2, 2, 0, 2, 2]);
    }

    #[test]
    fn random_dnt_properties() {
        let a = random_dnt(3, 2, 5, RandomDntMethod::Coefficient).unwrap();
        assert_eq!(a, random_dnt(3, 2, 5, RandomDntMethod::Coefficient).unwrap());
        let s = random_dnt(3, 2, 5, RandomDntMethod::Sinkhorn).unwrap();
        assert_eq!(s, random_dnt(3, 2, 5, RandomDntMethod::Sinkhorn).unwrap());
        // recorded: 99 of the first 100 qubit seeds converge within the cap
        let mut failed = Vec::new();
        for seed in 0..100u64 {
            match random_dnt(2, 2, seed, RandomDntMethod::Sinkhorn) {
                Ok(_) => {}
                Err(DntError::SinkhornNotConverged { .. }) => failed.push(seed),
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert_eq!(failed, vec![82]);
        assert!(matches!(
            random_dnt(5, 2, 0, RandomDntMethod::Coefficient),
            Err(DntError::NTooLarge { n: 5, .. })
        ));
    }

    #[test]
    fn synthesized_rows_and_columns_are_compatible() {
        let d = random_dnt(2, 2, 9, RandomDntMethod::Coefficient).unwrap();
        let inst = JmInstance::new(rows_and_columns(&d)).unwrap();
        assert!(jm_check_default(&inst).unwrap().compatible);
    }
}
