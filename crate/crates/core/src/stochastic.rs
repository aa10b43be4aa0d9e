//! Probability vectors, doubly stochastic matrices, permutations and the
//! greedy Birkhoff decomposition.
//!
//! Permutations are stored zero-based: `images[j]` is the row holding the 1
//! in column `j` of the permutation matrix. Files and the CLI use one-based
//! images. The lexicographic order produced by [`enumerate_permutations`] is
//! the canonical index `l` used for coefficient operators everywhere.

use thiserror::Error;

/// Largest `n` for which permutations are enumerated (`6! = 720`).
pub const MAX_PERM_N: usize = 6;
/// Entries above this count as support when searching for matchings.
pub const ZERO_TOL: f64 = 1e-12;
/// Greedy decomposition stops once every residual entry is at most this.
pub const RESIDUAL_TOL: f64 = 1e-10;

const PROB_SUM_TOL: f64 = 1e-10;
const DS_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("n = {n} exceeds the permutation limit {MAX_PERM_N}")]
    NTooLarge { n: usize },
    #[error("n must be positive")]
    Empty,
    #[error("expected {expected} entries, found {found}")]
    BadShape { expected: usize, found: usize },
    #[error("entry {index} is negative ({value:e})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("row {row} sums to 1 {defect:+e}")]
    RowSum { row: usize, defect: f64 },
    #[error("column {col} sums to 1 {defect:+e}")]
    ColumnSum { col: usize, defect: f64 },
    #[error("images do not form a bijection on 1..={n}")]
    NotBijection { n: usize },
    #[error("support graph has no perfect matching (residual max {residual:e})")]
    NoPerfectMatching { residual: f64 },
    #[error("Sinkhorn scaling needs strictly positive entries")]
    NotPositive,
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(mut weights: Vec<f64>) -> Result<Self, StochasticError> {
        if weights.is_empty() {
            return Err(StochasticError::Empty);
        }
        clamp_nonnegative(&mut weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(StochasticError::NotNormalized { sum });
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn clamp_nonnegative(values: &mut [f64]) -> Result<(), StochasticError> {
    for (index, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(StochasticError::NonFinite { index });
        }
        if *v < -ZERO_TOL {
            return Err(StochasticError::NegativeEntry { index, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// A bijection of `{0, .., n-1}`; `images[j]` is the image of `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Zero-based images.
    pub fn new(images: Vec<usize>) -> Result<Self, StochasticError> {
        let n = images.len();
        if n == 0 {
            return Err(StochasticError::Empty);
        }
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(StochasticError::NotBijection { n });
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// One-based images as they appear in files.
    pub fn from_one_based(images: &[usize]) -> Result<Self, StochasticError> {
        let n = images.len();
        let zero: Option<Vec<usize>> = images.iter().map(|&i| i.checked_sub(1)).collect();
        Self::new(zero.ok_or(StochasticError::NotBijection { n })?)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.images.iter().map(|i| i + 1).collect()
    }

    /// Image of `j` (zero-based).
    pub fn apply(&self, j: usize) -> usize {
        self.images[j]
    }

    /// Zero-based index of this permutation in the lexicographic enumeration.
    pub fn lex_index(&self) -> usize {
        let n = self.n();
        let mut used = vec![false; n];
        let mut index = 0;
        for (pos, &img) in self.images.iter().enumerate() {
            let smaller = (0..img).filter(|&v| !used[v]).count();
            index += smaller * factorial(n - 1 - pos);
            used[img] = true;
        }
        index
    }

    /// The 0/1 matrix with a 1 at `(images[j], j)`.
    pub fn as_matrix(&self) -> DoublyStochasticMatrix {
        let n = self.n();
        let mut entries = vec![0.0; n * n];
        for (j, &i) in self.images.iter().enumerate() {
            entries[i * n + j] = 1.0;
        }
        DoublyStochasticMatrix { n, entries }
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// If `count == n!` for some `n <= MAX_PERM_N`, returns that `n`.
pub fn inverse_factorial(count: usize) -> Option<usize> {
    (1..=MAX_PERM_N).find(|&n| factorial(n) == count)
}

/// All `n!` permutations in lexicographic order of their images.
pub fn enumerate_permutations(n: usize) -> Result<Vec<Permutation>, StochasticError> {
    if n == 0 {
        return Err(StochasticError::Empty);
    }
    if n > MAX_PERM_N {
        return Err(StochasticError::NTooLarge { n });
    }
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(factorial(n));
    loop {
        out.push(Permutation {
            images: current.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| current[i] < current[i + 1])
        else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    Ok(out)
}

/// Square matrix with nonnegative entries whose rows and columns sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochasticMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DoublyStochasticMatrix {
    /// Row-major entries. Entries in `[-1e-12, 0)` are clamped to zero.
    pub fn new(n: usize, mut entries: Vec<f64>) -> Result<Self, StochasticError> {
        if n == 0 {
            return Err(StochasticError::Empty);
        }
        if entries.len() != n * n {
            return Err(StochasticError::BadShape {
                expected: n * n,
                found: entries.len(),
            });
        }
        clamp_nonnegative(&mut entries)?;
        for row in 0..n {
            let s: f64 = entries[row * n..(row + 1) * n].iter().sum();
            if (s - 1.0).abs() > DS_SUM_TOL {
                return Err(StochasticError::RowSum {
                    row,
                    defect: s - 1.0,
                });
            }
        }
        for col in 0..n {
            let s: f64 = (0..n).map(|r| entries[r * n + col]).sum();
            if (s - 1.0).abs() > DS_SUM_TOL {
                return Err(StochasticError::ColumnSum {
                    col,
                    defect: s - 1.0,
                });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, StochasticError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(StochasticError::BadShape {
                    expected: n,
                    found: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(n, entries)
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            entries: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// Classical Sinkhorn scaling of a strictly positive matrix.
pub fn sinkhorn(
    n: usize,
    mut entries: Vec<f64>,
    max_iters: usize,
) -> Result<DoublyStochasticMatrix, StochasticError> {
    if entries.len() != n * n {
        return Err(StochasticError::BadShape {
            expected: n * n,
            found: entries.len(),
        });
    }
    if entries.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(StochasticError::NotPositive);
    }
    for _ in 0..max_iters {
        for row in entries.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        let mut worst = 0.0f64;
        for col in 0..n {
            let s: f64 = (0..n).map(|r| entries[r * n + col]).sum();
            for r in 0..n {
                entries[r * n + col] /= s;
            }
            worst = worst.max((s - 1.0).abs());
        }
        if worst < 1e-15 {
            break;
        }
    }
    DoublyStochasticMatrix::new(n, entries)
}

/// Perfect matching on the bipartite support graph, rows against columns.
///
/// Columns are processed in increasing order and each augmenting search tries
/// rows in increasing order, so the result is deterministic. The returned
/// permutation maps column `j` to its matched row.
pub fn perfect_matching(support: &[Vec<bool>]) -> Option<Permutation> {
    let n = support.len();
    if n == 0 || support.iter().any(|r| r.len() != n) {
        return None;
    }
    // row_match[i] = column matched to row i
    let mut row_match: Vec<Option<usize>> = vec![None; n];

    fn augment(
        col: usize,
        support: &[Vec<bool>],
        visited: &mut [bool],
        row_match: &mut [Option<usize>],
    ) -> bool {
        // shortest augmenting paths first: a free neighbour ends the search
        if let Some(row) =
            (0..support.len()).find(|&r| support[r][col] && !visited[r] && row_match[r].is_none())
        {
            row_match[row] = Some(col);
            return true;
        }
        for row in 0..support.len() {
            if support[row][col] && !visited[row] {
                visited[row] = true;
                let free = match row_match[row] {
                    None => true,
                    Some(other) => augment(other, support, visited, row_match),
                };
                if free {
                    row_match[row] = Some(col);
                    return true;
                }
            }
        }
        false
    }

    for col in 0..n {
        let mut visited = vec![false; n];
        if !augment(col, support, &mut visited, &mut row_match) {
            return None;
        }
    }
    let mut images = vec![0; n];
    for (row, col) in row_match.iter().enumerate() {
        images[col.expect("all rows matched")] = row;
    }
    Some(Permutation { images })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvnTerm {
    pub weight: f64,
    pub perm: Permutation,
}

/// Convex combination of permutation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BvnDecomposition {
    pub terms: Vec<BvnTerm>,
}

impl BvnDecomposition {
    pub fn n(&self) -> usize {
        self.terms.first().map_or(0, |t| t.perm.n())
    }

    /// `sum_t weight_t * P_t`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for t in &self.terms {
            for (j, &i) in t.perm.images().iter().enumerate() {
                out[i * n + j] += t.weight;
            }
        }
        out
    }

    /// Weight vector indexed by the canonical lexicographic permutation order.
    pub fn weights_by_lex_index(&self) -> Vec<f64> {
        let mut w = vec![0.0; factorial(self.n())];
        for t in &self.terms {
            w[t.perm.lex_index()] += t.weight;
        }
        w
    }
}

/// Greedy Birkhoff decomposition: peel off the minimum matched entry times the
/// permutation of a perfect matching on the current support until nothing
/// is left. Every step zeroes at least one support entry, so the residual
/// moves to a strictly lower-dimensional face and at most `(n-1)^2 + 1`
/// terms are produced.
pub fn bvn_decompose(d: &DoublyStochasticMatrix) -> Result<BvnDecomposition, StochasticError> {
    let n = d.n();
    if n > MAX_PERM_N {
        return Err(StochasticError::NTooLarge { n });
    }
    let mut residual = d.entries.clone();
    let mut terms = Vec::new();
    let max_entry = |r: &[f64]| r.iter().copied().fold(0.0, f64::max);

    while max_entry(&residual) > RESIDUAL_TOL {
        let support: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| residual[i * n + j] > ZERO_TOL).collect())
            .collect();
        let perm = perfect_matching(&support).ok_or(StochasticError::NoPerfectMatching {
            residual: max_entry(&residual),
        })?;
        let (argmin, weight) = perm
            .images()
            .iter()
            .enumerate()
            .map(|(j, &i)| (i * n + j, residual[i * n + j]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("n > 0");
        for (j, &i) in perm.images().iter().enumerate() {
            let e = &mut residual[i * n + j];
            *e -= weight;
            if *e <= ZERO_TOL {
                *e = 0.0;
            }
        }
        residual[argmin] = 0.0;
        terms.push(BvnTerm { weight, perm });
    }
    Ok(BvnDecomposition { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perm(one_based: &[usize]) -> Permutation {
        Permutation::from_one_based(one_based).unwrap()
    }

    #[test]
    fn enumeration_small_cases() {
        assert_eq!(enumerate_permutations(1).unwrap(), vec![perm(&[1])]);
        assert_eq!(
            enumerate_permutations(2).unwrap(),
            vec![perm(&[1, 2]), perm(&[2, 1])]
        );
        let p3 = enumerate_permutations(3).unwrap();
        assert_eq!(p3.len(), 6);
        assert_eq!(p3[0], perm(&[1, 2, 3]));
        assert_eq!(p3[5], perm(&[3, 2, 1]));
        assert!(p3.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(enumerate_permutations(6).unwrap().len(), 720);
        assert_eq!(
            enumerate_permutations(7),
            Err(StochasticError::NTooLarge { n: 7 })
        );
    }

    #[test]
    fn lex_index_matches_enumeration() {
        for n in 1..=5 {
            for (l, p) in enumerate_permutations(n).unwrap().iter().enumerate() {
                assert_eq!(p.lex_index(), l);
            }
        }
    }

    #[test]
    fn permutation_matrices() {
        assert_eq!(perm(&[1, 2]).as_matrix().entries(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(perm(&[2, 1]).as_matrix().entries(), &[0.0, 1.0, 1.0, 0.0]);
        let cyc = perm(&[2, 3, 1]).as_matrix();
        for j in 0..3 {
            for i in 0..3 {
                let expected = if i == [1, 2, 0][j] { 1.0 } else { 0.0 };
                assert_eq!(cyc.get(i, j), expected);
            }
        }
    }

    #[test]
    fn permutation_matrices_are_distinct() {
        let mats: Vec<_> = enumerate_permutations(4)
            .unwrap()
            .iter()
            .map(|p| p.as_matrix().entries().to_vec())
            .collect();
        for a in 0..mats.len() {
            for b in (a + 1)..mats.len() {
                assert_ne!(mats[a], mats[b]);
            }
        }
    }

    #[test]
    fn rejects_bad_permutations() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
        assert!(Permutation::from_one_based(&[1, 3]).is_err());
    }

    #[test]
    fn matching_examples() {
        let full = vec![vec![true; 2]; 2];
        assert_eq!(perfect_matching(&full), Some(Permutation::identity(2)));
        let diag: Vec<Vec<bool>> = (0..3).map(|i| (0..3).map(|j| i == j).collect()).collect();
        assert_eq!(perfect_matching(&diag), Some(Permutation::identity(3)));
        let mut hall = vec![vec![true; 3]; 3];
        hall[1] = vec![false; 3];
        assert_eq!(perfect_matching(&hall), None);
    }

    #[test]
    fn bvn_of_permutation_is_single_term() {
        let p = perm(&[3, 1, 2]);
        let dec = bvn_decompose(&p.as_matrix()).unwrap();
        assert_eq!(dec.terms.len(), 1);
        assert_eq!(dec.terms[0].weight, 1.0);
        assert_eq!(dec.terms[0].perm, p);
    }

    #[test]
    fn bvn_uniform_three() {
        let dec = bvn_decompose(&DoublyStochasticMatrix::uniform(3)).unwrap();
        assert_eq!(dec.terms.len(), 3);
        for t in &dec.terms {
            assert!((t.weight - 1.0 / 3.0).abs() < 1e-15);
        }
        // pairwise disjoint: no column maps to the same row twice
        for a in 0..3 {
            for b in (a + 1)..3 {
                for j in 0..3 {
                    assert_ne!(dec.terms[a].perm.apply(j), dec.terms[b].perm.apply(j));
                }
            }
        }
        let rec = dec.reconstruct();
        assert!(rec.iter().all(|&x| (x - 1.0 / 3.0).abs() <= 1e-10));
    }

    #[test]
    fn bvn_two_by_two_closed_form() {
        let d = DoublyStochasticMatrix::from_rows(&[vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        let dec = bvn_decompose(&d).unwrap();
        assert_eq!(dec.terms.len(), 2);
        let w = dec.weights_by_lex_index();
        assert!((w[0] - 0.7).abs() < 1e-15);
        assert!((w[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            DoublyStochasticMatrix::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.4]]),
            Err(StochasticError::RowSum { row: 0, .. })
        ));
        assert!(matches!(
            DoublyStochasticMatrix::from_rows(&[vec![1.1, -0.1], vec![-0.1, 1.1]]),
            Err(StochasticError::NegativeEntry { .. })
        ));
        let clamped =
            DoublyStochasticMatrix::from_rows(&[vec![1.0 + 5e-13, -5e-13], vec![-5e-13, 1.0]])
                .unwrap();
        assert_eq!(clamped.get(0, 1), 0.0);
        assert!(ProbVector::new(vec![0.5, 0.4]).is_err());
        assert_eq!(ProbVector::new(vec![1.0, -1e-13]).unwrap().weights(), &[1.0, 0.0]);
    }

    #[test]
    fn seeded_random_matrices_respect_term_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 2 + trial % 5;
            let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.01..1.0)).collect();
            let d = sinkhorn(n, raw, 10_000).unwrap();
            let dec = bvn_decompose(&d).unwrap();
            assert!(dec.terms.len() <= (n - 1) * (n - 1) + 1);
            assert!(dec.terms.iter().all(|t| t.weight > 1e-12));
            let rec = dec.reconstruct();
            let err = rec
                .iter()
                .zip(d.entries())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-10, "trial {trial}: {err:e}");
            ProbVector::new(dec.terms.iter().map(|t| t.weight).collect()).unwrap();
        }
    }
}
