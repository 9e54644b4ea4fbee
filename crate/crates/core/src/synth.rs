//! Seeded synthetic instances with known ground truth: generalized pencils
//! with a planted signed spectrum, and paired views with planted canonical
//! correlations built from shared latent factors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{DataMatrix, SymmetricMatrix};

/// Tridiagonal SPD metric with conditioning of order `kappa`.
pub fn tridiagonal_metric(dim: usize, kappa: f64) -> SymmetricMatrix {
    let mut triplets = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        let t = if dim > 1 {
            i as f64 / (dim - 1) as f64
        } else {
            0.0
        };
        let di = 1.0 + (kappa - 1.0) * t;
        triplets.push((i, i, di));
        if i + 1 < dim {
            let t2 = (i + 1) as f64 / (dim - 1) as f64;
            let dj = 1.0 + (kappa - 1.0) * t2;
            triplets.push((i, i + 1, 0.2 * di.min(dj)));
        }
    }
    SymmetricMatrix::from_triplets(dim, &triplets).expect("well-formed tridiagonal")
}

/// B-orthonormalizes the columns of a random Gaussian matrix by modified
/// Gram-Schmidt in the B-inner product (with one reorthogonalization pass).
fn b_orthonormal_columns(b: &SymmetricMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let d = b.dim();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut b_cols: Vec<DVector<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(rng) });
        for _pass in 0..2 {
            for (c, bc) in cols.iter().zip(&b_cols) {
                let g = bc.dot(&v);
                v.axpy(-g, c, 1.0);
            }
        }
        let bv = b.matvec(&v);
        let q = bv.dot(&v);
        if q <= 1e-12 {
            continue;
        }
        let s = q.sqrt();
        cols.push(v / s);
        b_cols.push(bv / s);
    }
    cols
}

/// Pencil `(A, B)` whose generalized eigenvalues are exactly `spectrum`
/// (signed; magnitudes must stay within [-1, 1]) with eigenvectors drawn at
/// random. Returns the pencil and the planted eigenvector matrix.
pub fn planted_genev(
    dim: usize,
    spectrum: &[f64],
    kappa_b: f64,
    seed: u64,
) -> (SymmetricMatrix, SymmetricMatrix, DMatrix<f64>) {
    assert!(spectrum.len() == dim, "spectrum must list all {dim} values");
    assert!(
        spectrum.iter().all(|l| l.abs() <= 1.0),
        "planted eigenvalues must satisfy |lambda| <= 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = tridiagonal_metric(dim, kappa_b);
    let v = b_orthonormal_columns(&b, dim, &mut rng);
    // A = (B V) diag(spectrum) (B V)^T
    let mut bv = DMatrix::zeros(dim, dim);
    for (j, col) in v.iter().enumerate() {
        bv.set_column(j, &b.matvec(col));
    }
    let lam = DMatrix::from_diagonal(&DVector::from_row_slice(spectrum));
    let a_dense = &bv * lam * bv.transpose();
    let a_dense = (&a_dense + a_dense.transpose()) * 0.5;
    let a = SymmetricMatrix::from_dense(&a_dense).expect("symmetric by construction");
    let mut planted = DMatrix::zeros(dim, dim);
    for (j, col) in v.iter().enumerate() {
        planted.set_column(j, col);
    }
    (a, b, planted)
}

/// Magnitude profile with a prescribed relative gap after the k-th value:
/// `|lambda_k+1| = |lambda_k| (1 - gap)`, geometric decay elsewhere.
pub fn spectrum_with_gap(dim: usize, k: usize, gap: f64, seed: u64) -> Vec<f64> {
    assert!(k >= 1 && k < dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A);
    let top = 0.9f64;
    let mut mags = Vec::with_capacity(dim);
    for i in 0..k {
        mags.push(top * (1.0 - 0.04 * i as f64 / k as f64));
    }
    let after = mags[k - 1] * (1.0 - gap);
    for i in 0..dim - k {
        mags.push(after * 0.9f64.powi(i as i32));
    }
    mags.iter()
        .enumerate()
        .map(|(i, &m)| {
            let sign = if i == 0 || rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            sign * m
        })
        .collect()
}

/// Exact planted CCA instance: the empirical canonical correlations of the
/// returned views equal `sigmas` (padded with zeros), with mild mixing so
/// the covariances are not identities. Requires `n >= d_x + d_y`.
pub fn planted_cca(
    n: usize,
    d_x: usize,
    d_y: usize,
    sigmas: &[f64],
    mixing: f64,
    seed: u64,
) -> (DataMatrix, DataMatrix) {
    assert!(
        n >= d_x + d_y,
        "need n >= d_x + d_y for the exact construction"
    );
    assert!(sigmas.len() <= d_x.min(d_y));
    assert!(sigmas.iter().all(|s| (0.0..=1.0).contains(s)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, d_x + d_y, |_, _| -> f64 {
        StandardNormal.sample(&mut rng)
    });
    let q = g.qr().q().columns(0, d_x + d_y).into_owned();
    let scale = (n as f64).sqrt();
    let qx = q.columns(0, d_x).into_owned() * scale;
    let qy = q.columns(d_x, d_y).into_owned() * scale;

    let mut ytilde = DMatrix::zeros(n, d_y);
    for j in 0..d_y {
        let sigma = sigmas.get(j).copied().unwrap_or(0.0);
        let col = qx.column(j.min(d_x - 1)) * sigma + qy.column(j) * (1.0 - sigma * sigma).sqrt();
        ytilde.set_column(j, &col);
    }

    let rx = mixing_matrix(d_x, mixing, &mut rng);
    let ry = mixing_matrix(d_y, mixing, &mut rng);
    let x = &qx * rx;
    let y = &ytilde * ry;
    (
        DataMatrix::new(n, d_x, x.transpose().as_slice().to_vec()).unwrap(),
        DataMatrix::new(n, d_y, y.transpose().as_slice().to_vec()).unwrap(),
    )
}

fn mixing_matrix(d: usize, strength: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut r = DMatrix::identity(d, d);
    for i in 0..d {
        for j in i + 1..d {
            r[(i, j)] = strength * rng.gen_range(-1.0..1.0);
        }
        r[(i, i)] = 1.0 + strength * rng.gen_range(0.0..0.5);
    }
    r
}

/// Random dense SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(dim: usize, lo: f64, hi: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let q = g.qr().q();
    let diag = DVector::from_fn(dim, |i, _| {
        if dim == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (dim - 1) as f64
        }
    });
    let s: DMatrix<f64> = &q * DMatrix::from_diagonal(&diag) * q.transpose();
    (&s + s.transpose()) * 0.5
}

/// Random symmetric matrix rescaled to the requested spectral norm.
pub fn random_symmetric_with_norm(dim: usize, norm: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let s = (&g + g.transpose()) * 0.5;
    let current = crate::oracle::spectral_norm(&s);
    s * (norm / current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::build_cca_problem;
    use crate::oracle::{dense_cca, dense_genev};

    #[test]
    fn planted_genev_matches_oracle() {
        let spectrum = [0.9, -0.5, 0.3, 0.1, -0.05];
        let (a, b, _) = planted_genev(5, &spectrum, 3.0, 17);
        let spec = dense_genev(&a.to_dense(), &b.to_dense()).unwrap();
        let mut want = spectrum.to_vec();
        want.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap());
        for (got, want) in spec.eigenvalues.iter().zip(&want) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn planted_cca_matches_oracle() {
        let sigmas = [0.9, 0.6, 0.3];
        let (x, y) = planted_cca(60, 5, 4, &sigmas, 0.2, 4);
        let p = build_cca_problem(x, y, 0.0, 0.0).unwrap();
        let triples = dense_cca(&p).unwrap();
        for (t, want) in triples.iter().zip(sigmas.iter()) {
            assert!((t.sigma - want).abs() < 1e-9, "{} vs {want}", t.sigma);
        }
        assert!(triples[3].sigma.abs() < 1e-9);
    }

    #[test]
    fn gap_profile_has_requested_gap() {
        let s = spectrum_with_gap(10, 3, 0.3, 1);
        let gap = (s[2].abs() - s[3].abs()) / s[2].abs();
        assert!((gap - 0.3).abs() < 1e-12);
        assert!(s.windows(2).all(|w| w[0].abs() >= w[1].abs()));
    }
}
