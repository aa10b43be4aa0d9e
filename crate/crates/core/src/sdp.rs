//! Small dense semidefinite programs over block-diagonal Hermitian variables.
//!
//! Primal (maximization form):
//!
//! ```text
//!     maximize   sum_b <C_b, X_b>
//!     subject to sum_b <A_{c,b}, X_b> = b_c   for every constraint c
//!                X_b >= 0
//! ```
//!
//! Dual: minimize `b^T y` subject to `S_b = sum_c y_c A_{c,b} - C_b >= 0`.
//! For feasible pairs `primal_objective <= dual_objective`; at an optimum they
//! agree to the solver tolerance.
//!
//! The solver runs a primal-dual path-following method on the homogeneous
//! self-dual embedding (HKM search direction, Mehrotra predictor-corrector,
//! fraction-to-boundary 0.98). The embedding makes the start trivially
//! feasible and yields certificates when the problem is infeasible or
//! unbounded. Complex blocks are solved through the real symmetric embedding
//! `H -> [[Re H, -Im H], [Im H, Re H]]` with all coefficients halved, so every
//! reported quantity refers to the complex problem.

use log::{debug, trace, warn};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::hermat::{HermitianMatrix, LinalgError};
use crate::linalg::{embed_hermitian, extract_hermitian, from_real_symmetric, real_part};

const STEP_FRACTION: f64 = 0.98;
const MIN_STEP: f64 = 1e-6;
const NO_PROGRESS_ITERS: usize = 8;
const DEPENDENT_ROW_TOL: f64 = 1e-10;
const SCALE_LO: f64 = 1e-3;
const SCALE_HI: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("problem has no blocks")]
    NoBlocks,
    #[error("every constraint row was dropped as dependent or empty")]
    EmptyConstraintSystem,
    #[error("constraint {constraint} refers to block {block}, but only {blocks} blocks exist")]
    BadBlockIndex {
        constraint: usize,
        block: usize,
        blocks: usize,
    },
    #[error("coefficient for block {block} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite data in constraint {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Real symmetric variable; only the real part of coefficients is seen.
    Real,
    /// Complex Hermitian variable.
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub dim: usize,
    pub kind: BlockKind,
}

impl BlockSpec {
    pub fn complex(dim: usize) -> Self {
        Self {
            dim,
            kind: BlockKind::Complex,
        }
    }

    pub fn real(dim: usize) -> Self {
        Self {
            dim,
            kind: BlockKind::Real,
        }
    }

    fn real_dim(&self) -> usize {
        match self.kind {
            BlockKind::Real => self.dim,
            BlockKind::Complex => 2 * self.dim,
        }
    }
}

/// `sum_b <A_{c,b}, X_b> = rhs`; blocks not listed have a zero coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, HermitianMatrix)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    /// Cost matrices `C_b`; blocks not listed have zero cost.
    pub objective: Vec<(usize, HermitianMatrix)>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self {
            blocks,
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, HermitianMatrix)>, rhs: f64) {
        self.constraints.push(Constraint { terms, rhs });
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        let check = |c: usize, (b, m): &(usize, HermitianMatrix)| -> Result<(), SdpError> {
            let spec = self.blocks.get(*b).ok_or(SdpError::BadBlockIndex {
                constraint: c,
                block: *b,
                blocks: self.blocks.len(),
            })?;
            if spec.dim != m.dim() {
                return Err(SdpError::DimensionMismatch {
                    block: *b,
                    expected: spec.dim,
                    found: m.dim(),
                });
            }
            Ok(())
        };
        for t in &self.objective {
            check(usize::MAX, t)?;
        }
        for (c, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SdpError::NonFinite(c));
            }
            for t in &row.terms {
                check(c, t)?;
            }
        }
        Ok(())
    }

    /// `sum_b <A_{c,b}, X_b>` for every constraint.
    pub fn constraint_values(&self, xs: &[HermitianMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|row| {
                row.terms
                    .iter()
                    .map(|(b, a)| self.block_inner(*b, a, &xs[*b]))
                    .sum()
            })
            .collect()
    }

    pub fn objective_value(&self, xs: &[HermitianMatrix]) -> f64 {
        self.objective
            .iter()
            .map(|(b, c)| self.block_inner(*b, c, &xs[*b]))
            .sum()
    }

    fn block_inner(&self, b: usize, a: &HermitianMatrix, x: &HermitianMatrix) -> f64 {
        match self.blocks[b].kind {
            BlockKind::Real => {
                let d = a.dim();
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += a.get(i, j).re * x.get(i, j).re;
                    }
                }
                s
            }
            BlockKind::Complex => crate::hermat::frobenius_inner(a, x).unwrap_or(f64::NAN),
        }
    }

    fn row_inner(&self, r: &Constraint, s: &Constraint) -> f64 {
        let mut acc = 0.0;
        for (bi, ai) in &r.terms {
            for (bj, aj) in &s.terms {
                if bi == bj {
                    acc += self.block_inner(*bi, ai, aj);
                }
            }
        }
        acc
    }

    fn row_max_coefficient(r: &Constraint) -> f64 {
        r.terms.iter().map(|(_, a)| a.max_norm()).fold(0.0, f64::max)
    }
}

/// Row transformation applied by [`precondition`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionReport {
    /// Scale applied to each original row (`1.0` when untouched).
    pub row_scales: Vec<f64>,
    /// Original indices of rows dropped as linearly dependent.
    pub dropped: Vec<usize>,
    /// Dropped rows whose right-hand side contradicts the kept rows.
    pub inconsistent: Vec<usize>,
    /// For each kept row of the output problem, its original index.
    pub kept: Vec<usize>,
    /// Farkas-type certificate over the original rows when `inconsistent` is
    /// nonempty: `sum_c y_c A_c = 0` and `b^T y = -1`.
    pub infeasibility_ray: Option<Vec<f64>>,
}

impl PreconditionReport {
    pub fn is_identity(&self) -> bool {
        self.dropped.is_empty() && self.row_scales.iter().all(|&s| s == 1.0)
    }
}

/// Rescales rows whose largest coefficient lies outside `[1e-3, 1e3]` to unit
/// largest coefficient and drops rows that are linearly dependent on earlier
/// ones (Gram-matrix pivoting with relative threshold `1e-10`).
pub fn precondition(problem: &SdpProblem) -> Result<(SdpProblem, PreconditionReport), SdpError> {
    problem.validate()?;
    let m = problem.constraints.len();
    let mut scales = Vec::with_capacity(m);
    let mut scaled: Vec<Constraint> = Vec::with_capacity(m);
    for row in &problem.constraints {
        let mx = SdpProblem::row_max_coefficient(row);
        let s = if mx == 0.0 || (SCALE_LO..=SCALE_HI).contains(&mx) {
            1.0
        } else {
            1.0 / mx
        };
        scales.push(s);
        scaled.push(if s == 1.0 {
            row.clone()
        } else {
            Constraint {
                terms: row.terms.iter().map(|(b, a)| (*b, a.scale(s))).collect(),
                rhs: row.rhs * s,
            }
        });
    }

    // Incremental Cholesky of the Gram matrix over kept rows.
    let mut kept: Vec<usize> = Vec::new();
    let mut chol: Vec<Vec<f64>> = Vec::new(); // rows of lower-triangular L
    let mut dropped = Vec::new();
    let mut inconsistent = Vec::new();
    let mut ray = None;
    for i in 0..m {
        let gii = problem.row_inner(&scaled[i], &scaled[i]);
        let gki: Vec<f64> = kept
            .iter()
            .map(|&k| problem.row_inner(&scaled[k], &scaled[i]))
            .collect();
        // forward solve L w = g
        let mut w = vec![0.0; kept.len()];
        for r in 0..kept.len() {
            let mut acc = gki[r];
            for c in 0..r {
                acc -= chol[r][c] * w[c];
            }
            w[r] = acc / chol[r][r];
        }
        let resid = gii - w.iter().map(|x| x * x).sum::<f64>();
        if gii > 0.0 && resid > DEPENDENT_ROW_TOL * gii {
            let mut row = w;
            row.push(resid.sqrt());
            chol.push(row);
            kept.push(i);
            continue;
        }
        // coefficients alpha with row_i = sum alpha_k row_k: L^T alpha = w
        let mut alpha = vec![0.0; kept.len()];
        for r in (0..kept.len()).rev() {
            let mut acc = w[r];
            for c in (r + 1)..kept.len() {
                acc -= chol[c][r] * alpha[c];
            }
            alpha[r] = acc / chol[r][r];
        }
        let predicted: f64 = alpha
            .iter()
            .zip(&kept)
            .map(|(a, &k)| a * scaled[k].rhs)
            .sum();
        let mismatch = scaled[i].rhs - predicted;
        dropped.push(i);
        if mismatch.abs() > 1e-8 * (1.0 + scaled[i].rhs.abs()) {
            inconsistent.push(i);
            if ray.is_none() {
                // y = (e_i - sum alpha_k e_k) / mismatch in scaled rows, mapped back
                let mut y = vec![0.0; m];
                y[i] = -scales[i] / mismatch;
                for (a, &k) in alpha.iter().zip(&kept) {
                    y[k] = a * scales[k] / mismatch;
                }
                ray = Some(y);
            }
        }
    }
    if !dropped.is_empty() {
        debug!("dropped {} dependent constraint rows", dropped.len());
    }
    if !inconsistent.is_empty() {
        warn!("{} constraint rows contradict the others", inconsistent.len());
    }
    if kept.is_empty() {
        return Err(SdpError::EmptyConstraintSystem);
    }
    let out = SdpProblem {
        blocks: problem.blocks.clone(),
        objective: problem.objective.clone(),
        constraints: kept.iter().map(|&k| scaled[k].clone()).collect(),
    };
    Ok((
        out,
        PreconditionReport {
            row_scales: scales,
            dropped,
            inconsistent,
            kept,
            infeasibility_ray: ray,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

impl SdpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::PrimalInfeasible => "primal_infeasible",
            SdpStatus::DualInfeasible => "dual_infeasible",
            SdpStatus::NumericalLimit => "numerical_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `max_c |sum_b <A_{c,b}, X_b> - b_c|`.
    pub primal_eq: f64,
    /// `max |sum_c y_c A_c - C - S|` over all blocks.
    pub dual_eq: f64,
    /// `(primal - dual) / (1 + |primal| + |dual|)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `X_b` on `Optimal`; a primal ray on `DualInfeasible`.
    pub primal_blocks: Vec<HermitianMatrix>,
    /// Dual slack `S_b`.
    pub dual_slack: Vec<HermitianMatrix>,
    /// `y_c` for every original row. On `PrimalInfeasible` this is a Farkas
    /// ray: `sum_c y_c A_c >= 0` and `b^T y = -1`.
    pub dual_vector: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Real-form data of a preconditioned problem, in minimization sense.
struct RealForm {
    dims: Vec<usize>,
    /// `2` for complex blocks (dual residual scale back to complex), `1` otherwise.
    dual_factor: Vec<f64>,
    cost: Vec<DMatrix<f64>>,
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
    /// per block: (row, term index)
    by_block: Vec<Vec<(usize, usize)>>,
    b: DVector<f64>,
    row_scales: Vec<f64>,
}

impl RealForm {
    fn build(p: &SdpProblem, row_scales: Vec<f64>) -> Self {
        let to_real = |b: usize, h: &HermitianMatrix| -> DMatrix<f64> {
            match p.blocks[b].kind {
                BlockKind::Real => real_part(h),
                BlockKind::Complex => embed_hermitian(h) * 0.5,
            }
        };
        let dims: Vec<usize> = p.blocks.iter().map(BlockSpec::real_dim).collect();
        let dual_factor = p
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Real => 1.0,
                BlockKind::Complex => 2.0,
            })
            .collect();
        let mut cost: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (b, c) in &p.objective {
            cost[*b] -= to_real(*b, c);
        }
        let mut by_block = vec![Vec::new(); dims.len()];
        let rows: Vec<Vec<(usize, DMatrix<f64>)>> = p
            .constraints
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.terms
                    .iter()
                    .enumerate()
                    .map(|(t, (b, a))| {
                        by_block[*b].push((i, t));
                        (*b, to_real(*b, a))
                    })
                    .collect()
            })
            .collect();
        let b = DVector::from_iterator(p.constraints.len(), p.constraints.iter().map(|c| c.rhs));
        Self {
            dims,
            dual_factor,
            cost,
            rows,
            by_block,
            b,
            row_scales,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    /// `A A^T`.
    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.m(), self.m());
        for terms in &self.by_block {
            for (ti, &(i, t)) in terms.iter().enumerate() {
                for &(j, u) in &terms[ti..] {
                    let v = self.rows[i][t].1.dot(&self.rows[j][u].1);
                    g[(i, j)] += v;
                    if (i, t) != (j, u) {
                        g[(j, i)] += v;
                    }
                }
            }
        }
        g
    }

    fn apply_a(&self, xs: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|(b, a)| a.dot(&xs[*b])).sum::<f64>()),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            if y[i] != 0.0 {
                for (b, a) in row {
                    out[*b] += a * y[i];
                }
            }
        }
        out
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn max_abs_blocks(blocks: &[DMatrix<f64>], factors: &[f64]) -> f64 {
    blocks
        .iter()
        .zip(factors)
        .map(|(m, f)| f * m.amax())
        .fold(0.0, f64::max)
}

/// Largest `alpha` with `X + alpha dX` PSD, `X` positive definite.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let t = sym(&linv * dx * linv.transpose());
    let min = t.symmetric_eigenvalues().min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn max_step_scalar(v: f64, dv: f64) -> f64 {
    if dv >= 0.0 {
        f64::INFINITY
    } else {
        -v / dv
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if let Some(c) = m.clone().cholesky() {
            return Some(Self::Chol(c));
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(Self::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Chol(c) => c.solve(rhs),
            Self::Lu(l) => l.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }
}

/// Solves `problem` after preconditioning.
pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
    let (pre, report) = precondition(problem)?;
    let m_orig = problem.constraints.len();

    if let Some(ray) = report.infeasibility_ray.clone() {
        let blocks: Vec<HermitianMatrix> = problem
            .blocks
            .iter()
            .map(|b| HermitianMatrix::zeros(b.dim))
            .collect();
        return Ok(SdpSolution {
            status: SdpStatus::PrimalInfeasible,
            primal_blocks: blocks.clone(),
            dual_slack: blocks,
            dual_vector: ray,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            residuals: Residuals::default(),
            iterations: 0,
        });
    }

    let kept_scales: Vec<f64> = report.kept.iter().map(|&k| report.row_scales[k]).collect();
    let rf = RealForm::build(&pre, kept_scales);
    let raw = hsde(&rf, opts);

    // Map back to the complex problem.
    let to_herm = |b: usize, m: &DMatrix<f64>| -> HermitianMatrix {
        match problem.blocks[b].kind {
            BlockKind::Real => from_real_symmetric(m),
            BlockKind::Complex => extract_hermitian(m),
        }
    };
    let primal_blocks: Vec<HermitianMatrix> =
        raw.x.iter().enumerate().map(|(b, m)| to_herm(b, m)).collect();
    let dual_slack: Vec<HermitianMatrix> = raw
        .s
        .iter()
        .enumerate()
        .map(|(b, m)| {
            let h = to_herm(b, m);
            match problem.blocks[b].kind {
                BlockKind::Real => h,
                BlockKind::Complex => h.scale(2.0),
            }
        })
        .collect();
    let mut dual_vector = vec![0.0; m_orig];
    for (r, &k) in report.kept.iter().enumerate() {
        dual_vector[k] = -raw.y[r] * report.row_scales[k];
    }

    let mut sol = SdpSolution {
        status: raw.status,
        primal_objective: problem.objective_value(&primal_blocks),
        dual_objective: problem
            .constraints
            .iter()
            .zip(&dual_vector)
            .map(|(c, y)| c.rhs * y)
            .sum(),
        primal_blocks,
        dual_slack,
        dual_vector,
        residuals: Residuals::default(),
        iterations: raw.iterations,
    };
    sol.residuals = residuals(problem, &sol);
    Ok(sol)
}

impl SdpSolution {
    /// `Optimal`, or stopped at the accuracy limit with every residual within `tol`.
    pub fn is_usable(&self, tol: f64) -> bool {
        let r = &self.residuals;
        match self.status {
            SdpStatus::Optimal => true,
            SdpStatus::NumericalLimit => {
                r.primal_eq <= tol && r.dual_eq <= tol && r.gap.abs() <= tol
            }
            _ => false,
        }
    }
}

/// Residuals of a candidate primal-dual pair against `problem`.
pub fn residuals(problem: &SdpProblem, sol: &SdpSolution) -> Residuals {
    let vals = problem.constraint_values(&sol.primal_blocks);
    let primal_eq = vals
        .iter()
        .zip(&problem.constraints)
        .map(|(v, c)| (v - c.rhs).abs())
        .fold(0.0, f64::max);
    let mut dual_eq = 0.0f64;
    for (b, spec) in problem.blocks.iter().enumerate() {
        let mut acc = HermitianMatrix::zeros(spec.dim);
        for (c, row) in problem.constraints.iter().enumerate() {
            for (bb, a) in &row.terms {
                if *bb == b {
                    acc = acc.axpby(1.0, a, sol.dual_vector[c]);
                }
            }
        }
        for (bb, c) in &problem.objective {
            if *bb == b {
                acc = &acc - c;
            }
        }
        let mut diff = &acc - &sol.dual_slack[b];
        if spec.kind == BlockKind::Real {
            diff = from_real_symmetric(&real_part(&diff));
        }
        dual_eq = dual_eq.max(diff.max_norm());
    }
    let p = sol.primal_objective;
    let d = sol.dual_objective;
    Residuals {
        primal_eq,
        dual_eq,
        gap: (p - d) / (1.0 + p.abs() + d.abs()),
    }
}

struct RawSolution {
    status: SdpStatus,
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    iterations: usize,
}

/// Homogeneous self-dual path following on the real minimization form
/// `min <c, x> s.t. A x = b, x >= 0`.
fn hsde(rf: &RealForm, opts: &SolveOptions) -> RawSolution {
    let nb = rf.dims.len();
    let m = rf.m();
    let nu: f64 = rf.dims.iter().sum::<usize>() as f64;
    let mut x: Vec<DMatrix<f64>> = rf.dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let mut s = x.clone();
    let mut y = DVector::zeros(m);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let tol = opts.tol;
    let mut stalls = 0;
    let mut best: Option<Snapshot> = None;

    let gram = rf.gram().cholesky();

    let finish = |status, x: &[DMatrix<f64>], s: &[DMatrix<f64>], y: &DVector<f64>, scale: f64, it| RawSolution {
        status,
        x: x.iter().map(|b| b / scale).collect(),
        s: s.iter().map(|b| b / scale).collect(),
        y: y / scale,
        iterations: it,
    };

    for iter in 0..=opts.max_iters {
        let ax = rf.apply_a(&x);
        let aty = rf.apply_at(&y);
        let rp: DVector<f64> = &ax - &rf.b * tau;
        let rd: Vec<DMatrix<f64>> = (0..nb)
            .map(|b| &aty[b] + &s[b] - &rf.cost[b] * tau)
            .collect();
        let cx = inner(&rf.cost, &x);
        let by = rf.b.dot(&y);
        let rg = by - cx - kappa;
        let mu = (inner(&x, &s) + tau * kappa) / (nu + 1.0);

        // convergence in the unscaled original units
        let primal_eq = rp
            .iter()
            .zip(&rf.row_scales)
            .map(|(r, sc)| (r / sc).abs())
            .fold(0.0, f64::max)
            / tau;
        let dual_eq = max_abs_blocks(&rd, &rf.dual_factor) / tau;
        let pobj = -cx / tau;
        // the max-form dual vector is -y
        let dobj = -by / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        trace!(
            "it {iter} pres {primal_eq:.2e} dres {dual_eq:.2e} gap {gap:.2e} \
             pobj {pobj:.9} dobj {dobj:.9} tau {tau:.2e} kappa {kappa:.2e} mu {mu:.2e}"
        );
        if primal_eq <= tol && dual_eq <= tol && gap <= tol {
            return finish(SdpStatus::Optimal, &x, &s, &y, tau, iter);
        }
        let merit = primal_eq.max(dual_eq).max(gap);
        if merit.is_finite() && best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot {
                merit,
                x: x.clone(),
                s: s.clone(),
                y: y.clone(),
                tau,
                iter,
            });
        }
        if kappa > tau {
            let at_y_s: Vec<DMatrix<f64>> = (0..nb).map(|b| &aty[b] + &s[b]).collect();
            if by > 0.0 && max_abs_blocks(&at_y_s, &rf.dual_factor) <= tol * by {
                return finish(SdpStatus::PrimalInfeasible, &x, &s, &y, by, iter);
            }
            if -cx > 0.0 && ax.amax() <= tol * (-cx) {
                return finish(SdpStatus::DualInfeasible, &x, &s, &y, -cx, iter);
            }
        }
        if iter == opts.max_iters || best.as_ref().is_some_and(|b| iter >= b.iter + NO_PROGRESS_ITERS) {
            break;
        }

        // Factorizations shared by predictor and corrector.
        let mut s_inv = Vec::with_capacity(nb);
        for sb in &s {
            match sb.clone().cholesky() {
                Some(c) => s_inv.push(sym(c.inverse())),
                None => break,
            }
        }
        let h_op = |b: usize, d: &DMatrix<f64>| sym(&x[b] * d * &s_inv[b]);

        // Schur complement M_ij = sum_b tr(A_ib X_b A_jb S_b^{-1})
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for b in 0..nb {
            let terms = &rf.by_block[b];
            let ps: Vec<DMatrix<f64>> = terms
                .iter()
                .map(|&(i, t)| &x[b] * &rf.rows[i][t].1 * &s_inv[b])
                .collect();
            for (ti, &(i, t)) in terms.iter().enumerate() {
                let ai = &rf.rows[i][t].1;
                for (tj, &(j, _)) in terms.iter().enumerate().skip(ti) {
                    // tr(A_i P_j) = sum_kl A_i[k,l] P_j[l,k]
                    let v = ai.dot(&ps[tj].transpose());
                    schur[(i, j)] += v;
                    if ti != tj {
                        schur[(j, i)] += v;
                    }
                }
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let Some(factor) = SchurFactor::new(schur) else {
            break;
        };

        let hc: Vec<DMatrix<f64>> = (0..nb).map(|b| h_op(b, &rf.cost[b])).collect();
        let g = rf.apply_a(&hc);
        let hval = inner(&rf.cost, &hc);
        let q = factor.solve(&(&g + &rf.b));
        let b_minus_g = &rf.b - &g;
        let denom = b_minus_g.dot(&q) + hval + kappa / tau;

        let direction = |sigma: f64, corr: Option<&Direction>| -> Direction {
            let eta = 1.0 - sigma;
            let r1 = &rp * (-eta);
            let r2: Vec<DMatrix<f64>> = rd.iter().map(|r| r * (-eta)).collect();
            let r3 = -eta * rg;
            let mut r5 = sigma * mu - tau * kappa;
            if let Some(c) = corr {
                r5 -= c.dtau * c.dkappa;
            }
            let w: Vec<DMatrix<f64>> = (0..nb)
                .map(|b| {
                    let mut rc = &s_inv[b] * (sigma * mu) - &x[b];
                    if let Some(c) = corr {
                        rc -= &c.dx[b] * &c.ds[b] * &s_inv[b];
                    }
                    sym(rc) - h_op(b, &r2[b])
                })
                .collect();
            let p = factor.solve(&(&r1 - rf.apply_a(&w)));
            let dtau = (r3 + inner(&rf.cost, &w) + r5 / tau - b_minus_g.dot(&p)) / denom;
            let dy = &p + &q * dtau;
            let atdy = rf.apply_at(&dy);
            let mut dx = Vec::with_capacity(nb);
            let mut ds = Vec::with_capacity(nb);
            for b in 0..nb {
                let t = &atdy[b] - &rf.cost[b] * dtau;
                ds.push(&r2[b] - &t);
                dx.push(&w[b] + h_op(b, &t));
            }
            // `dx` is a small difference of `O(1/mu)` terms; restore
            // `A dx - b dtau = r1` by a least-norm correction.
            if let Some(gram) = &gram {
                let miss = &r1 + &rf.b * dtau - rf.apply_a(&dx);
                let fix = rf.apply_at(&gram.solve(&miss));
                for (d, f) in dx.iter_mut().zip(&fix) {
                    *d += f;
                }
            }
            let dkappa = (r5 - kappa * dtau) / tau;
            Direction {
                dx,
                ds,
                dy,
                dtau,
                dkappa,
            }
        };
        let step_to_boundary = |d: &Direction| -> f64 {
            let mut a = max_step_scalar(tau, d.dtau).min(max_step_scalar(kappa, d.dkappa));
            for b in 0..nb {
                a = a.min(max_step_psd(&x[b], &d.dx[b]));
                a = a.min(max_step_psd(&s[b], &d.ds[b]));
            }
            a
        };

        let affine = direction(0.0, None);
        let alpha_aff = step_to_boundary(&affine).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
        let mut dir = direction(sigma, Some(&affine));
        let mut alpha = (STEP_FRACTION * step_to_boundary(&dir)).min(1.0);
        if alpha.is_finite() && alpha < MIN_STEP {
            // blocked by the boundary: recentre instead of pushing on
            dir = direction(1.0, None);
            alpha = (STEP_FRACTION * step_to_boundary(&dir)).min(1.0);
        }
        if !alpha.is_finite() || alpha < MIN_STEP {
            stalls += 1;
            if stalls >= 3 || !alpha.is_finite() {
                break;
            }
            continue;
        }
        stalls = 0;
        for b in 0..nb {
            x[b] += &dir.dx[b] * alpha;
            s[b] += &dir.ds[b] * alpha;
            x[b] = sym(x[b].clone());
            s[b] = sym(s[b].clone());
        }
        y += &dir.dy * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }
    // out of iterations or accuracy: hand back the best iterate seen
    match best {
        Some(b) => finish(SdpStatus::NumericalLimit, &b.x, &b.s, &b.y, b.tau, b.iter),
        None => finish(SdpStatus::NumericalLimit, &x, &s, &y, tau, opts.max_iters),
    }
}

struct Snapshot {
    merit: f64,
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    tau: f64,
    iter: usize,
}

/// Minimum-norm correction of `xs` onto the affine set `sum_b <A_{c,b}, X_b> = b_c`.
///
/// Used to clean up interior-point output before exact validity checks; the
/// correction is of the order of the solver residual.
pub fn project_onto_constraints(problem: &SdpProblem, xs: &[HermitianMatrix]) -> Vec<HermitianMatrix> {
    let m = problem.constraints.len();
    let resid: Vec<f64> = problem
        .constraint_values(xs)
        .iter()
        .zip(&problem.constraints)
        .map(|(v, c)| c.rhs - v)
        .collect();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        problem.row_inner(&problem.constraints[i], &problem.constraints[j])
    });
    let pinv = crate::linalg::pseudo_inverse(&gram, 1e-10 * gram.amax().max(1e-300));
    let lambda = pinv * DVector::from_vec(resid);
    let mut out = xs.to_vec();
    for (c, row) in problem.constraints.iter().enumerate() {
        for (b, a) in &row.terms {
            let a = match problem.blocks[*b].kind {
                BlockKind::Real => from_real_symmetric(&real_part(a)),
                BlockKind::Complex => a.clone(),
            };
            out[*b] = out[*b].axpby(1.0, &a, lambda[c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermat::{eig_hermitian, is_psd, pauli_x, pauli_z};

    fn unit_real(d: usize, i: usize, j: usize) -> HermitianMatrix {
        let mut v = vec![0.0; d * d];
        v[i * d + j] += 0.5;
        v[j * d + i] += 0.5;
        HermitianMatrix::from_real(d, &v).unwrap()
    }

    /// maximize t s.t. X + t I = diag(1, 2), X >= 0, t >= 0
    fn min_eigenvalue_problem() -> SdpProblem {
        let mut p = SdpProblem::new(vec![BlockSpec::real(2), BlockSpec::real(1)]);
        p.objective.push((1, HermitianMatrix::identity(1)));
        let target = [[1.0, 0.0], [0.0, 2.0]];
        for i in 0..2 {
            for j in i..2 {
                let mut terms = vec![(0, unit_real(2, i, j))];
                if i == j {
                    terms.push((1, HermitianMatrix::identity(1)));
                }
                p.add_constraint(terms, target[i][j]);
            }
        }
        p
    }

    fn trace_infeasible() -> SdpProblem {
        let mut p = SdpProblem::new(vec![BlockSpec::complex(2)]);
        p.add_constraint(vec![(0, HermitianMatrix::identity(2))], 1.0);
        p.add_constraint(vec![(0, pauli_z())], 2.0);
        p
    }

    fn pauli_problem() -> SdpProblem {
        let mut p = SdpProblem::new(vec![BlockSpec::complex(2)]);
        p.objective.push((0, pauli_x()));
        p.add_constraint(vec![(0, HermitianMatrix::identity(2))], 1.0);
        p
    }

    fn assert_optimal(sol: &SdpSolution) {
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.residuals.primal_eq <= 1e-8, "{:?}", sol.residuals);
        assert!(sol.residuals.dual_eq <= 1e-8, "{:?}", sol.residuals);
        assert!(sol.residuals.gap.abs() <= 1e-8, "{:?}", sol.residuals);
        for x in &sol.primal_blocks {
            assert!(is_psd(x, 1e-8).unwrap().psd);
        }
        // weak duality in the maximization convention
        assert!(sol.primal_objective >= sol.dual_objective - 1e-6);
        assert!(sol.primal_objective <= sol.dual_objective + 1e-6);
    }

    #[test]
    fn smallest_eigenvalue_program() {
        let sol = solve(&min_eigenvalue_problem(), &SolveOptions::default()).unwrap();
        assert_optimal(&sol);
        assert!((sol.primal_objective - 1.0).abs() <= 1e-7, "{}", sol.primal_objective);
    }

    #[test]
    fn trace_program_is_infeasible() {
        let sol = solve(&trace_infeasible(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
        // Farkas certificate: b^T y < 0 and sum y_c A_c >= 0
        let y = &sol.dual_vector;
        assert!((y[0] + 2.0 * y[1] + 1.0).abs() < 1e-9);
        let combo = HermitianMatrix::identity(2).axpby(y[0], &pauli_z(), y[1]);
        assert!(eig_hermitian(&combo).unwrap().eigenvalues[0] >= -1e-7);
    }

    #[test]
    fn pauli_expectation_program() {
        let sol = solve(&pauli_problem(), &SolveOptions::default()).unwrap();
        assert_optimal(&sol);
        let top = eig_hermitian(&pauli_x()).unwrap().eigenvalues[1];
        assert!((sol.primal_objective - top).abs() <= 1e-7);
        // optimizer is the +1 eigenprojector (I + sigma_x)/2
        let proj = HermitianMatrix::identity(2).axpby(0.5, &pauli_x(), 0.5);
        assert!(sol.primal_blocks[0].max_abs_diff(&proj) <= 1e-4);
    }

    #[test]
    fn unbounded_program_is_dual_infeasible() {
        // maximize tr X subject to X_{01} = 0 (real 2x2)
        let mut p = SdpProblem::new(vec![BlockSpec::real(2)]);
        p.objective.push((0, HermitianMatrix::identity(2)));
        p.add_constraint(vec![(0, unit_real(2, 0, 1))], 0.0);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::DualInfeasible);
    }

    #[test]
    fn usable_solutions() {
        let mut sol = solve(&pauli_problem(), &SolveOptions::default()).unwrap();
        assert!(sol.is_usable(0.0));
        sol.status = SdpStatus::NumericalLimit;
        sol.residuals = Residuals {
            primal_eq: 5e-8,
            dual_eq: 1e-9,
            gap: -2e-8,
        };
        assert!(sol.is_usable(1e-7));
        assert!(!sol.is_usable(1e-8));
        sol.status = SdpStatus::PrimalInfeasible;
        assert!(!sol.is_usable(1.0));
    }

    #[test]
    fn solves_are_bit_identical() {
        let a = solve(&pauli_problem(), &SolveOptions::default()).unwrap();
        let b = solve(&pauli_problem(), &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precondition_identity_when_scaled() {
        let (out, report) = precondition(&pauli_problem()).unwrap();
        assert!(report.is_identity());
        assert_eq!(out, pauli_problem());
    }

    #[test]
    fn precondition_drops_duplicate_row() {
        let mut p = pauli_problem();
        p.add_constraint(vec![(0, HermitianMatrix::identity(2))], 1.0);
        let (out, report) = precondition(&p).unwrap();
        assert_eq!(report.dropped, vec![1]);
        assert!(report.inconsistent.is_empty());
        assert_eq!(out.constraints.len(), 1);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_eq!(sol.dual_vector[1], 0.0);
    }

    #[test]
    fn inconsistent_duplicate_is_infeasible() {
        let mut p = pauli_problem();
        p.add_constraint(vec![(0, HermitianMatrix::identity(2))], 2.0);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    }

    #[test]
    fn precondition_rescales_large_rows() {
        let mut scaled = pauli_problem();
        scaled.constraints[0] = Constraint {
            terms: vec![(0, HermitianMatrix::scaled_identity(2, 1e6))],
            rhs: 1e6,
        };
        let (_, report) = precondition(&scaled).unwrap();
        assert_eq!(report.row_scales, vec![1e-6]);
        let a = solve(&pauli_problem(), &SolveOptions::default()).unwrap();
        let b = solve(&scaled, &SolveOptions::default()).unwrap();
        assert_eq!(b.status, SdpStatus::Optimal);
        assert!(a.primal_blocks[0].max_abs_diff(&b.primal_blocks[0]) <= 1e-7);
        assert!((a.dual_vector[0] - 1e6 * b.dual_vector[0]).abs() <= 1e-6);
    }

    #[test]
    fn empty_constraint_system() {
        let mut p = SdpProblem::new(vec![BlockSpec::real(1)]);
        p.add_constraint(vec![(0, HermitianMatrix::zeros(1))], 0.0);
        assert_eq!(precondition(&p).unwrap_err(), SdpError::EmptyConstraintSystem);
    }

    #[test]
    fn projection_restores_constraints() {
        let p = min_eigenvalue_problem();
        let xs = vec![HermitianMatrix::diagonal(&[0.3, 0.9]), HermitianMatrix::identity(1)];
        let fixed = project_onto_constraints(&p, &xs);
        let vals = p.constraint_values(&fixed);
        for (v, c) in vals.iter().zip(&p.constraints) {
            assert!((v - c.rhs).abs() < 1e-12);
        }
    }
}
