//! Joint measurability of finite POVM families.
//!
//! The decision is made through white-noise robustness: the largest `eta`
//! for which the depolarized family
//! `eta A_j + (1 - eta) (tr A_j / d) I` admits a parent POVM `(G_k)` indexed by
//! outcome tuples `k = (k_1, .., k_m)` with marginals `sum_{k: k_i = j} G_k`.
//! Any parent POVM with a stochastic post-processing can be turned into one
//! with marginal (deterministic) post-processing, so the marginal form loses
//! nothing. `eta = 0` is always feasible through product noise.

use thiserror::Error;

use crate::hermat::{HermitianMatrix, PSD_TOL};
use crate::povm::{MotherMeasurement, PostProcessingMap, Povm, PovmError};
use crate::sdp::{self, BlockSpec, Residuals, SdpError, SdpProblem, SdpStatus, SolveOptions};

/// Largest number of outcome tuples `n^m`.
pub const MAX_TUPLES: usize = 4096;
pub const DEFAULT_JM_TOL: f64 = 1e-6;
/// Below this every member counts as white noise.
const TRIVIAL_SHIFT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JmError {
    #[error("an instance needs at least one POVM")]
    Empty,
    #[error("POVM {index} has {found} outcomes in dimension {found_dim}, expected {expected} in dimension {expected_dim}")]
    Inconsistent {
        index: usize,
        expected: usize,
        found: usize,
        expected_dim: usize,
        found_dim: usize,
    },
    #[error("{count} outcome tuples exceed the limit {MAX_TUPLES}")]
    InstanceTooLarge { count: u128 },
    #[error("index out of range: measurement {measurement}, outcome {outcome}")]
    IndexOutOfRange { measurement: usize, outcome: usize },
    #[error("solver failed ({status:?}, residuals {residuals:?})")]
    SolverFailure {
        status: SdpStatus,
        residuals: Residuals,
    },
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Povm(#[from] PovmError),
}

/// `m` POVMs sharing outcome count `n` and dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct JmInstance {
    povms: Vec<Povm>,
}

impl JmInstance {
    pub fn new(povms: Vec<Povm>) -> Result<Self, JmError> {
        let first = povms.first().ok_or(JmError::Empty)?;
        let (n, d) = (first.len(), first.dim());
        for (index, p) in povms.iter().enumerate() {
            if p.len() != n || p.dim() != d {
                return Err(JmError::Inconsistent {
                    index,
                    expected: n,
                    found: p.len(),
                    expected_dim: d,
                    found_dim: p.dim(),
                });
            }
        }
        let count = (n as u128).checked_pow(povms.len() as u32).unwrap_or(u128::MAX);
        if count > MAX_TUPLES as u128 {
            return Err(JmError::InstanceTooLarge { count });
        }
        Ok(Self { povms })
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn num_measurements(&self) -> usize {
        self.povms.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.povms[0].len()
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim()
    }

    pub fn num_tuples(&self) -> usize {
        self.num_outcomes().pow(self.num_measurements() as u32)
    }
}

/// Outcome tuple of a flat index; measurement 0 is the most significant digit.
pub fn tuple_of(index: usize, n: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    let mut rest = index;
    for slot in out.iter_mut().rev() {
        *slot = rest % n;
        rest /= n;
    }
    out
}

fn digit(index: usize, n: usize, m: usize, i: usize) -> usize {
    (index / n.pow((m - 1 - i) as u32)) % n
}

/// `sum_{k: k_i = j} G_k` over tuples `k in [n]^m`.
pub fn marginal_operator(
    g: &[HermitianMatrix],
    n: usize,
    m: usize,
    i: usize,
    j: usize,
) -> Result<HermitianMatrix, JmError> {
    if i >= m || j >= n || g.len() != n.pow(m as u32) || g.is_empty() {
        return Err(JmError::IndexOutOfRange {
            measurement: i,
            outcome: j,
        });
    }
    let d = g[0].dim();
    Ok(HermitianMatrix::sum(
        g.iter()
            .enumerate()
            .filter(|(k, _)| digit(*k, n, m, i) == j)
            .map(|(_, h)| h),
        d,
    ))
}

/// Marginal post-processing `mu(j | i, k) = [k_i == j]`.
pub fn marginal_map(n: usize, m: usize) -> PostProcessingMap {
    PostProcessingMap::deterministic(m, n, n.pow(m as u32), |i, k| digit(k, n, m, i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JmVerdict {
    pub compatible: bool,
    /// White-noise robustness `eta*`, clamped to `[0, 1 + tol]`.
    pub robustness: f64,
    /// Parent POVM over outcome tuples with marginal post-processing.
    pub mother: Option<MotherMeasurement>,
    pub solver_residuals: Residuals,
    pub iterations: usize,
}

/// Parent POVM of the fully depolarized family: product of the noise weights.
pub fn noise_product_mother(instance: &JmInstance) -> Result<MotherMeasurement, JmError> {
    let (n, m, d) = (
        instance.num_outcomes(),
        instance.num_measurements(),
        instance.dim(),
    );
    let weights: Vec<Vec<f64>> = instance
        .povms
        .iter()
        .map(|p| p.elements().iter().map(|e| e.trace() / d as f64).collect())
        .collect();
    let elements = (0..instance.num_tuples())
        .map(|k| {
            let w: f64 = (0..m).map(|i| weights[i][digit(k, n, m, i)]).product();
            HermitianMatrix::scaled_identity(d, w)
        })
        .collect();
    Ok(MotherMeasurement::new(Povm::new(elements)?, marginal_map(n, m))?)
}

/// Depolarized family at `eta = 0`: `(tr A_j / d) I`.
pub fn noise_povm(p: &Povm) -> Povm {
    let d = p.dim() as f64;
    Povm::new(
        p.elements()
            .iter()
            .map(|e| HermitianMatrix::scaled_identity(p.dim(), e.trace() / d))
            .collect(),
    )
    .expect("traces of a POVM sum to d")
}

/// Marginal constraints `sum_{k: k_i=j} G_k = eta A_ij + (1-eta) noise_ij`,
/// optionally with `eta` as a variable (block `K`) to maximize.
fn build_problem(instance: &JmInstance, with_eta: bool) -> SdpProblem {
    let (n, m, d) = (
        instance.num_outcomes(),
        instance.num_measurements(),
        instance.dim(),
    );
    let k_count = instance.num_tuples();
    let mut blocks = vec![BlockSpec::complex(d); k_count];
    if with_eta {
        blocks.push(BlockSpec::real(1));
    }
    let mut problem = SdpProblem::new(blocks);
    let herm_basis = HermitianMatrix::basis(d);
    for (i, povm) in instance.povms.iter().enumerate() {
        for (j, a) in povm.elements().iter().enumerate() {
            let noise = HermitianMatrix::scaled_identity(d, a.trace() / d as f64);
            let target = if with_eta { &noise } else { a };
            let shift = a - &noise;
            let target_coords = target.coords();
            let shift_coords = shift.coords();
            for (t, e) in herm_basis.iter().enumerate() {
                let mut terms: Vec<(usize, HermitianMatrix)> = (0..k_count)
                    .filter(|&k| digit(k, n, m, i) == j)
                    .map(|k| (k, e.clone()))
                    .collect();
                if with_eta && shift_coords[t] != 0.0 {
                    terms.push((k_count, HermitianMatrix::diagonal(&[-shift_coords[t]])));
                }
                problem.add_constraint(terms, target_coords[t]);
            }
        }
    }
    if with_eta {
        problem.objective.push((k_count, HermitianMatrix::identity(1)));
    }
    problem
}

/// Largest distance of any member element from its white-noise counterpart;
/// when it vanishes `eta` is unbounded.
fn max_shift(instance: &JmInstance) -> f64 {
    instance
        .povms
        .iter()
        .map(|p| p.max_abs_diff(&noise_povm(p)))
        .fold(0.0, f64::max)
}

/// Snaps interior-point output onto the marginal constraints and validates it as a POVM.
fn polish_mother(problem: &SdpProblem, blocks: &[HermitianMatrix]) -> Option<Povm> {
    let fixed = sdp::project_onto_constraints(problem, blocks);
    Povm::new(fixed).ok()
}

/// Decides joint measurability; `compatible` iff `eta* >= 1 - tol`.
///
/// Solver runs that stop at their accuracy limit are used when every residual
/// is a tenth of `tol` or better; a compatible verdict always carries a
/// mother that has been validated independently of the solver.
pub fn jm_check(instance: &JmInstance, tol: f64) -> Result<JmVerdict, JmError> {
    let opts = SolveOptions::default();
    let k_count = instance.num_tuples();
    let (n, m) = (instance.num_outcomes(), instance.num_measurements());
    let noise_mother = noise_product_mother(instance)?;

    if max_shift(instance) <= TRIVIAL_SHIFT {
        // every member is white noise already
        let exact = build_problem(instance, false);
        let mother = polish_mother(&exact, noise_mother.mother.elements())
            .unwrap_or(noise_mother.mother);
        return Ok(JmVerdict {
            compatible: true,
            robustness: 1.0 + tol,
            mother: Some(MotherMeasurement::new(mother, marginal_map(n, m))?),
            solver_residuals: Residuals::default(),
            iterations: 0,
        });
    }

    let robust = build_problem(instance, true);
    let sol = sdp::solve(&robust, &opts)?;
    if !sol.is_usable(0.1 * tol) {
        return Err(JmError::SolverFailure {
            status: sol.status,
            residuals: sol.residuals,
        });
    }
    let eta_star = sol.primal_blocks[k_count].get(0, 0).re;
    let eta = eta_star.clamp(0.0, 1.0 + tol);
    let compatible = eta >= 1.0 - tol;
    let mut verdict = JmVerdict {
        compatible,
        robustness: eta,
        mother: None,
        solver_residuals: sol.residuals,
        iterations: sol.iterations,
    };
    if !compatible {
        return Ok(verdict);
    }

    let exact = build_problem(instance, false);
    let refined = sdp::solve(&exact, &opts)?;
    let mut mother = None;
    if refined.is_usable(0.1 * tol) {
        mother = polish_mother(&exact, &refined.primal_blocks);
    }
    if mother.is_none() {
        // G(eta*)/eta* + (1 - 1/eta*) noise mother has exactly the target marginals
        let w = 1.0 / eta_star;
        let mixed: Vec<HermitianMatrix> = sol.primal_blocks[..k_count]
            .iter()
            .zip(noise_mother.mother.elements())
            .map(|(g, z)| g.axpby(w, z, 1.0 - w))
            .collect();
        mother = polish_mother(&exact, &mixed);
    }
    let Some(mother) = mother else {
        return Err(JmError::SolverFailure {
            status: refined.status,
            residuals: refined.residuals,
        });
    };
    verdict.mother = Some(MotherMeasurement::new(mother, marginal_map(n, m))?);
    Ok(verdict)
}

/// `jm_check` with the default threshold `1e-6`.
pub fn jm_check_default(instance: &JmInstance) -> Result<JmVerdict, JmError> {
    jm_check(instance, DEFAULT_JM_TOL)
}

/// Smallest eigenvalue over all mother elements; diagnostic for PSD margins.
pub fn mother_min_eigenvalue(mother: &MotherMeasurement) -> f64 {
    mother
        .mother
        .elements()
        .iter()
        .map(|e| {
            crate::hermat::is_psd(e, PSD_TOL)
                .map(|c| c.min_eigenvalue)
                .unwrap_or(f64::NEG_INFINITY)
        })
        .fold(f64::INFINITY, f64::min)
}
