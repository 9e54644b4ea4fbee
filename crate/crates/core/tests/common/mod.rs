//! Shared helpers for the integration suites: dense assembly of the block
//! operators, explicit-coordinate conversions, and small statistics.

#![allow(dead_code)]

use lazy_spectra::oracle::{inv_sqrt_spd, spectral_norm, sqrt_spd};
use lazy_spectra::{CcaProblem, ImplicitBasis, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};

/// Dense `B = diag(S_xx, S_yy)` of a CCA problem.
pub fn dense_block_b(p: &CcaProblem) -> DMatrix<f64> {
    let (dx, dy) = (p.dim_x(), p.dim_y());
    let mut b = DMatrix::zeros(dx + dy, dx + dy);
    b.view_mut((0, 0), (dx, dx)).copy_from(&p.dense_sxx());
    b.view_mut((dx, dx), (dy, dy)).copy_from(&p.dense_syy());
    b
}

/// Dense `A = [[0, S_xy], [S_xy^T, 0]]` of a CCA problem.
pub fn dense_block_a(p: &CcaProblem) -> DMatrix<f64> {
    let (dx, dy) = (p.dim_x(), p.dim_y());
    let sxy = p.dense_sxy();
    let mut a = DMatrix::zeros(dx + dy, dx + dy);
    a.view_mut((0, dx), (dx, dy)).copy_from(&sxy);
    a.view_mut((dx, 0), (dy, dx)).copy_from(&sxy.transpose());
    a
}

/// Whitened operator `M = B^{-1/2} A B^{-1/2}`, symmetrized.
pub fn whitened_operator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let w = inv_sqrt_spd(b).expect("metric PD");
    let m = &w * a * &w;
    (&m + m.transpose()) * 0.5
}

/// Explicit coordinates of an implicit basis: `V = B^{1/2} V_implicit`.
pub fn explicit_basis(basis: &ImplicitBasis, b: &DMatrix<f64>) -> DMatrix<f64> {
    let half = sqrt_spd(b).expect("metric PSD");
    let mut v = DMatrix::zeros(basis.dim(), basis.len());
    for (j, col) in basis.columns().iter().enumerate() {
        v.set_column(j, &(&half * col));
    }
    v
}

/// `(I - V V^T) M (I - V V^T)` for explicit column-orthonormal `V`.
pub fn deflate(m: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let proj = DMatrix::identity(d, d) - v * v.transpose();
    &proj * m * &proj
}

/// Spectral norm of `V^T B W` (trailing-subspace leakage).
pub fn leakage(basis: &ImplicitBasis, b_dense: &DMatrix<f64>, trailing: &DMatrix<f64>) -> f64 {
    if trailing.ncols() == 0 || basis.is_empty() {
        return 0.0;
    }
    let k = basis.len();
    let mut vt_bw = DMatrix::zeros(k, trailing.ncols());
    for (i, col) in basis.columns().iter().enumerate() {
        let bt = b_dense * col;
        for j in 0..trailing.ncols() {
            vt_bw[(i, j)] = trailing.column(j).dot(&bt);
        }
    }
    spectral_norm(&vt_bw)
}

/// Index of the oracle column maximizing `|v^T B u_j|`.
pub fn match_by_b_correlation(
    v: &DVector<f64>,
    b_dense: &DMatrix<f64>,
    oracle_vectors: &DMatrix<f64>,
) -> usize {
    let bv = b_dense * v;
    let mut best = 0usize;
    let mut best_corr = -1.0;
    for j in 0..oracle_vectors.ncols() {
        let c = oracle_vectors.column(j).dot(&bv).abs();
        if c > best_corr {
            best_corr = c;
            best = j;
        }
    }
    best
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

pub fn sparse_to_dense(m: &SymmetricMatrix) -> DMatrix<f64> {
    m.to_dense()
}
