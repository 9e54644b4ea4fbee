//! CCA problem data: two views, ridge terms, and the implicit block operators
//!
//! ```text
//!     A = [ 0      S_xy ]        B = [ S_xx   0    ]
//!         [ S_xy^T  0   ]            [ 0      S_yy ]
//! ```
//!
//! with `S_xx = gamma_x I + X^T X / n` (and likewise for Y). Both operators
//! are applied through the data matrices only; the covariance blocks are
//! never formed on the solve path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcaBlock {
    /// The cross block `A`.
    A,
    /// The metric block `B`.
    B,
}

#[derive(Debug)]
pub struct CcaProblem {
    x: DataMatrix,
    y: DataMatrix,
    gamma_x: f64,
    gamma_y: f64,
    // cached statistics
    row_sq_x: Vec<f64>,
    row_sq_y: Vec<f64>,
    lambda_min_b: f64,
    lambda_max_b: f64,
    trace_b: f64,
}

/// Validates the views and the positive definiteness of the metric block.
pub fn build_cca_problem(
    x: DataMatrix,
    y: DataMatrix,
    gamma_x: f64,
    gamma_y: f64,
) -> Result<CcaProblem> {
    CcaProblem::new(x, y, gamma_x, gamma_y)
}

impl CcaProblem {
    pub fn new(x: DataMatrix, y: DataMatrix, gamma_x: f64, gamma_y: f64) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::Dimension(format!(
                "views disagree on sample count: {} vs {}",
                x.rows(),
                y.rows()
            )));
        }
        if !(gamma_x >= 0.0 && gamma_y >= 0.0) {
            return Err(Error::Value("regularizers must be nonnegative".into()));
        }
        let row_sq_x: Vec<f64> = (0..x.rows())
            .map(|i| x.row(i).iter().map(|v| v * v).sum())
            .collect();
        let row_sq_y: Vec<f64> = (0..y.rows())
            .map(|i| y.row(i).iter().map(|v| v * v).sum())
            .collect();

        let (min_x, max_x) = block_extremes(&x, gamma_x)?;
        let (min_y, max_y) = block_extremes(&y, gamma_y)?;
        let n = x.rows() as f64;
        let trace_b = gamma_x * x.cols() as f64
            + gamma_y * y.cols() as f64
            + (row_sq_x.iter().sum::<f64>() + row_sq_y.iter().sum::<f64>()) / n;

        Ok(Self {
            x,
            y,
            gamma_x,
            gamma_y,
            row_sq_x,
            row_sq_y,
            lambda_min_b: min_x.min(min_y),
            lambda_max_b: max_x.max(max_y),
            trace_b,
        })
    }

    pub fn x(&self) -> &DataMatrix {
        &self.x
    }

    pub fn y(&self) -> &DataMatrix {
        &self.y
    }

    pub fn gammas(&self) -> (f64, f64) {
        (self.gamma_x, self.gamma_y)
    }

    pub fn samples(&self) -> usize {
        self.x.rows()
    }

    pub fn dim_x(&self) -> usize {
        self.x.cols()
    }

    pub fn dim_y(&self) -> usize {
        self.y.cols()
    }

    /// Ambient dimension of the block problem, `d_x + d_y`.
    pub fn dim(&self) -> usize {
        self.dim_x() + self.dim_y()
    }

    pub fn lambda_min_b(&self) -> f64 {
        self.lambda_min_b
    }

    pub fn lambda_max_b(&self) -> f64 {
        self.lambda_max_b
    }

    pub fn trace_b(&self) -> f64 {
        self.trace_b
    }

    pub fn kappa(&self) -> f64 {
        self.lambda_max_b / self.lambda_min_b
    }

    /// Row-norm based condition number `2 max_i {|X_i|^2, |Y_i|^2} / lambda_min(B)`.
    pub fn kappa_prime(&self) -> f64 {
        2.0 * self.max_row_sq() / self.lambda_min_b
    }

    pub fn max_row_sq(&self) -> f64 {
        let mx = self.row_sq_x.iter().cloned().fold(0.0, f64::max);
        let my = self.row_sq_y.iter().cloned().fold(0.0, f64::max);
        mx.max(my)
    }

    pub fn row_sq_x(&self) -> &[f64] {
        &self.row_sq_x
    }

    pub fn row_sq_y(&self) -> &[f64] {
        &self.row_sq_y
    }

    /// Splits a block vector into its x and y parts.
    pub fn split<'a>(&self, z: &'a DVector<f64>) -> (&'a [f64], &'a [f64]) {
        let s = z.as_slice();
        s.split_at(self.dim_x())
    }

    /// Applies the requested block operator using only data-matrix products.
    pub fn block_apply(&self, which: CcaBlock, z: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.block_apply_into(which, z, &mut out)?;
        Ok(out)
    }

    pub fn block_apply_into(
        &self,
        which: CcaBlock,
        z: &DVector<f64>,
        out: &mut DVector<f64>,
    ) -> Result<()> {
        if z.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "block operator expects length {}, got {}",
                self.dim(),
                z.len()
            )));
        }
        let dx = self.dim_x();
        let n = self.samples() as f64;
        let (z1, z2) = z.as_slice().split_at(dx);
        let mut work = vec![0.0; self.samples()];
        let (o1, o2) = out.as_mut_slice().split_at_mut(dx);
        match which {
            CcaBlock::B => {
                self.x.matvec(z1, &mut work);
                self.x.tr_matvec_scaled(&work, 1.0 / n, o1);
                for (o, z) in o1.iter_mut().zip(z1) {
                    *o += self.gamma_x * z;
                }
                self.y.matvec(z2, &mut work);
                self.y.tr_matvec_scaled(&work, 1.0 / n, o2);
                for (o, z) in o2.iter_mut().zip(z2) {
                    *o += self.gamma_y * z;
                }
            }
            CcaBlock::A => {
                self.y.matvec(z2, &mut work);
                self.x.tr_matvec_scaled(&work, 1.0 / n, o1);
                self.x.matvec(z1, &mut work);
                self.y.tr_matvec_scaled(&work, 1.0 / n, o2);
            }
        }
        Ok(())
    }

    /// Dense `S_xx` (oracle/validation use only).
    pub fn dense_sxx(&self) -> DMatrix<f64> {
        dense_cov(&self.x, self.gamma_x)
    }

    /// Dense `S_yy` (oracle/validation use only).
    pub fn dense_syy(&self) -> DMatrix<f64> {
        dense_cov(&self.y, self.gamma_y)
    }

    /// Dense `S_xy` (oracle/validation use only).
    pub fn dense_sxy(&self) -> DMatrix<f64> {
        let xd = self.x.to_dense();
        let yd = self.y.to_dense();
        xd.transpose() * yd / self.samples() as f64
    }
}

fn dense_cov(m: &DataMatrix, gamma: f64) -> DMatrix<f64> {
    let d = m.to_dense();
    let mut c = d.transpose() * &d / m.rows() as f64;
    for i in 0..m.cols() {
        c[(i, i)] += gamma;
    }
    c
}

/// Positive-definiteness check plus extreme eigenvalues of one covariance
/// block. Dense Cholesky for d <= 2000, otherwise a matrix-free fallback.
fn block_extremes(m: &DataMatrix, gamma: f64) -> Result<(f64, f64)> {
    if m.cols() <= 2000 {
        let cov = dense_cov(m, gamma);
        let chol = cov.clone().cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(
                "covariance block failed Cholesky; add regularization (gamma > 0)".to_string(),
            )
        })?;
        // power iteration for the top, inverse iteration via the factor for
        // the bottom; deterministic start
        let d = m.cols();
        let mut v = DVector::from_fn(d, |i, _| 1.5 + (i as f64 * 0.7).sin());
        v /= v.norm();
        let mut lo = 0.0;
        let mut hi = 0.0;
        for _ in 0..200 {
            let w = &cov * &v;
            hi = v.dot(&w);
            let n = w.norm();
            if n == 0.0 {
                break;
            }
            v = w / n;
        }
        let mut u = DVector::from_fn(d, |i, _| 1.5 - (i as f64 * 0.3).cos());
        u /= u.norm();
        for _ in 0..200 {
            let w = chol.solve(&u);
            let n = w.norm();
            if !n.is_finite() || n == 0.0 {
                break;
            }
            let w = w / n;
            lo = w.dot(&(&cov * &w));
            u = w;
        }
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite(
                "numerically singular covariance block".to_string(),
            ));
        }
        Ok((lo, hi.max(lo)))
    } else {
        // Large-d fallback: power iteration on the operator and inverse
        // iteration through conjugate gradient, both matrix-free.
        crate::solvers::covariance_extremes_matfree(m, gamma)
    }
}
