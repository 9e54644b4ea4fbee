//! B-geometry primitives: inner products, norms, and projections against a
//! B-orthonormal basis kept in whitened-implicit coordinates.
//!
//! A basis column `v` stored here is the implicit form of the explicit vector
//! `B^{1/2} v`; B-inner products of implicit vectors equal Euclidean inner
//! products of their explicit counterparts.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// `u^T B v`.
pub fn b_inner(b: &SymmetricMatrix, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != b.dim() || v.len() != b.dim() {
        return Err(Error::Dimension(format!(
            "b_inner: vectors of length {} and {} against {}x{} metric",
            u.len(),
            v.len(),
            b.dim(),
            b.dim()
        )));
    }
    Ok(b.matvec(v).dot(u))
}

/// Columns stored in implicit coordinates together with their image under B.
///
/// Caching `B v` per column makes projections O(k d) instead of one metric
/// application per call, which matters when B is only available as a data
/// operator.
#[derive(Debug, Clone, Default)]
pub struct ImplicitBasis {
    dim: usize,
    cols: Vec<DVector<f64>>,
    b_cols: Vec<DVector<f64>>,
}

impl ImplicitBasis {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            cols: Vec::new(),
            b_cols: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn column(&self, s: usize) -> &DVector<f64> {
        &self.cols[s]
    }

    pub fn metric_column(&self, s: usize) -> &DVector<f64> {
        &self.b_cols[s]
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.cols
    }

    /// Appends a column with its precomputed image under the metric.
    pub fn push(&mut self, col: DVector<f64>, b_col: DVector<f64>) -> Result<()> {
        if col.len() != self.dim || b_col.len() != self.dim {
            return Err(Error::Dimension(format!(
                "basis column of length {} in dimension {}",
                col.len(),
                self.dim
            )));
        }
        self.cols.push(col);
        self.b_cols.push(b_col);
        Ok(())
    }

    /// `V^T B w` using the cached metric columns.
    pub fn metric_coefficients(&self, w: &DVector<f64>) -> Vec<f64> {
        self.b_cols.iter().map(|bc| bc.dot(w)).collect()
    }

    /// Applies `(I - V V^T B)` to `w` in place.
    pub fn project_out_inplace(&self, w: &mut DVector<f64>) {
        for (col, b_col) in self.cols.iter().zip(&self.b_cols) {
            let c = b_col.dot(w);
            w.axpy(-c, col, 1.0);
        }
    }

    /// Max-abs deviation of `V^T B V` from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let k = self.cols.len();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let g = self.b_cols[j].dot(&self.cols[i]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// `(I - V V^T B) w`: removes the B-projection onto the basis columns.
///
/// The result is B-orthogonal to every basis column and the map is
/// idempotent up to roundoff.
pub fn b_project_out(
    b: &SymmetricMatrix,
    basis: &ImplicitBasis,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    if w.len() != b.dim() || (basis.len() > 0 && basis.dim() != b.dim()) {
        return Err(Error::Dimension(format!(
            "b_project_out: vector of length {} against {}x{} metric",
            w.len(),
            b.dim(),
            b.dim()
        )));
    }
    let mut r = w.clone();
    basis.project_out_inplace(&mut r);
    Ok(r)
}
