//! Real dense helpers on top of nalgebra: ranks, kernels, least squares and
//! the real embedding of complex Hermitian blocks.

use nalgebra::{DMatrix, DVector};

use crate::hermat::{ComplexMatrix, HermitianMatrix, C64};

/// Number of singular values strictly above `threshold`.
pub fn rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.singular_values().iter().filter(|&&s| s > threshold).count()
}

/// Moore-Penrose pseudo-inverse, dropping singular values at or below `threshold`.
pub fn pseudo_inverse(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > threshold {
            let vk = v_t.row(k).transpose();
            let uk = u.column(k).transpose();
            out += (vk * uk) / s;
        }
    }
    out
}

/// Real symmetric embedding `H -> [[Re H, -Im H], [Im H, Re H]]`.
pub fn embed_hermitian(h: &HermitianMatrix) -> DMatrix<f64> {
    let d = h.dim();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h.get(i, j);
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`] after averaging onto the embedding's image.
pub fn extract_hermitian(y: &DMatrix<f64>) -> HermitianMatrix {
    let d = y.nrows() / 2;
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let re = 0.5 * (y[(i, j)] + y[(i + d, j + d)]);
            let im = 0.5 * (y[(i + d, j)] - y[(i, j + d)]);
            m[(i, j)] = C64::new(re, im);
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// Real part of a Hermitian matrix as a dense real matrix.
pub fn real_part(h: &HermitianMatrix) -> DMatrix<f64> {
    let d = h.dim();
    DMatrix::from_fn(d, d, |i, j| h.get(i, j).re)
}

pub fn from_real_symmetric(m: &DMatrix<f64>) -> HermitianMatrix {
    let d = m.nrows();
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = C64::new(0.5 * (m[(i, j)] + m[(j, i)]), 0.0);
        }
    }
    HermitianMatrix::symmetrized(out)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermat::{pauli_x, pauli_y};

    #[test]
    fn embedding_round_trip() {
        let h = pauli_y().axpby(0.3, &pauli_x(), 1.7);
        let back = extract_hermitian(&embed_hermitian(&h));
        assert!(back.max_abs_diff(&h) <= 1e-12);
    }

    #[test]
    fn embedding_doubles_inner_product() {
        let a = pauli_y().axpby(1.0, &HermitianMatrix::identity(2), 0.5);
        let b = pauli_y().axpby(-2.0, &pauli_x(), 1.0);
        let complex = crate::hermat::frobenius_inner(&a, &b).unwrap();
        let real = embed_hermitian(&a).dot(&embed_hermitian(&b));
        assert!((real - 2.0 * complex).abs() < 1e-14);
    }

    #[test]
    fn pinv_gives_min_norm_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = pseudo_inverse(&a, 1e-12) * DVector::from_vec(vec![2.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert_eq!(rank(&a, 1e-9), 1);
    }
}
