//! Sparse symmetric matrices and dense data matrices.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Sparse symmetric matrix in compressed-row form with sorted column indices.
///
/// Both triangles are stored so that `matvec` is a single row sweep. The
/// builder symmetrizes its input and sums duplicate coordinates.
#[derive(Debug)]
pub struct SymmetricMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Cached (lambda_min, lambda_max) estimates, filled lazily by the solvers.
    pub(crate) spectral_cache: OnceLock<(f64, f64)>,
}

impl SymmetricMatrix {
    /// Builds from coordinate triplets. Duplicates are summed; entries are
    /// mirrored so that `entry(i, j) == entry(j, i)` always holds.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("matrix dimension must be >= 1".into()));
        }
        let mut coo: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) outside {dim}x{dim} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Value(format!("non-finite entry at ({i}, {j})")));
            }
            coo.push((i, j, v));
            if i != j {
                coo.push((j, i, v));
            }
        }
        coo.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(coo.len());
        let mut values: Vec<f64> = Vec::with_capacity(coo.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in coo {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
            spectral_cache: OnceLock::new(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let triplets: Vec<_> = (0..dim).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(dim, &triplets).expect("identity is well-formed")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), &triplets)
    }

    /// Builds from a dense symmetric matrix; entries below `drop_tol` in
    /// magnitude are dropped. Fails if the input is not symmetric.
    pub fn from_dense(mat: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix is not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let d = mat.nrows();
        let mut triplets = Vec::new();
        for i in 0..d {
            for j in 0..=i {
                let v = mat[(i, j)];
                let vt = mat[(j, i)];
                if (v - vt).abs() > 1e-12 * (1.0 + v.abs().max(vt.abs())) {
                    return Err(Error::Value(format!(
                        "asymmetric dense input at ({i}, {j}): {v} vs {vt}"
                    )));
                }
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries (both triangles counted once each).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn trace(&self) -> f64 {
        let mut t = 0.0;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    t += self.values[k];
                }
            }
        }
        t
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored upper-triangle entries (i <= j).
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).filter_map(move |k| {
                let j = self.col_idx[k];
                (i <= j).then(|| (i, j, self.values[k]))
            })
        })
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.matvec_into(v, &mut out);
        out
    }

    pub fn matvec_into(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        assert_eq!(v.len(), self.dim, "matvec dimension mismatch");
        let vs = v.as_slice();
        let os = out.as_mut_slice();
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * vs[self.col_idx[k]];
            }
            os[i] = acc;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// Dense row-major data matrix (one sample per row).
#[derive(Debug, Clone)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(
                "data matrix must have at least one row and one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Value(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `X v` (length `rows`).
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// `X^T u` (length `cols`), accumulated into `out` scaled by `alpha`.
    pub fn tr_matvec_scaled(&self, u: &[f64], alpha: f64, out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (i, &ui) in u.iter().enumerate() {
            let row = self.row(i);
            let c = alpha * ui;
            for (o, &r) in out.iter_mut().zip(row) {
                *o += c * r;
            }
        }
    }

    pub fn scaled(&self, c: f64) -> DataMatrix {
        DataMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_symmetrize_and_sum_duplicates() {
        let m =
            SymmetricMatrix::from_triplets(3, &[(0, 1, 2.0), (0, 1, 0.5), (2, 2, 1.0)]).unwrap();
        assert_eq!(m.entry(0, 1), 2.5);
        assert_eq!(m.entry(1, 0), 2.5);
        assert_eq!(m.entry(2, 2), 1.0);
        assert_eq!(m.entry(0, 0), 0.0);
        assert_eq!(m.nnz(), 3); // (0,1), (1,0), (2,2)
    }

    #[test]
    fn matvec_matches_dense() {
        let m =
            SymmetricMatrix::from_triplets(3, &[(0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0)]).unwrap();
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let got = m.matvec(&v);
        let want = m.to_dense() * &v;
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(SymmetricMatrix::from_triplets(0, &[]).is_err());
    }

    #[test]
    fn data_matrix_rejects_nan() {
        let err = DataMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 4.0]).unwrap_err();
        assert!(matches!(err, Error::Value(_)));
    }

    #[test]
    fn data_matvec_roundtrip() {
        let x = DataMatrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let mut out = vec![0.0; 3];
        x.matvec(&[2.0, 3.0], &mut out);
        assert_eq!(out, vec![2.0, 3.0, 5.0]);
        let mut back = vec![0.0; 2];
        x.tr_matvec_scaled(&out, 1.0, &mut back);
        assert_eq!(back, vec![7.0, 8.0]);
    }
}
