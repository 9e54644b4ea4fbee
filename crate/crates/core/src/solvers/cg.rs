//! Conjugate gradient for symmetric positive definite systems.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, SymmetricMatrix};

/// Outcome of the raw CG loop.
pub(crate) struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// CG over an arbitrary SPD operator, stopping at `|Ax - rhs| <= rel_tol |rhs|`.
///
/// Keeps the best iterate seen so stagnation near machine precision cannot
/// make the result worse.
pub(crate) fn cg_operator(
    apply: &mut dyn FnMut(&DVector<f64>, &mut DVector<f64>),
    rhs: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
    warm: Option<&DVector<f64>>,
) -> CgOutcome {
    let n = rhs.len();
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return CgOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            rel_residual: 0.0,
        };
    }
    let rel_tol = rel_tol.max(1e-15);
    let mut x = warm.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut ax = DVector::zeros(n);
    apply(&x, &mut ax);
    let mut r = rhs - &ax;
    let mut p = r.clone();
    let mut ap = DVector::zeros(n);
    let mut rs = r.norm_squared();

    let mut best_x = x.clone();
    let mut best_res = rs.sqrt();
    let target = rel_tol * rhs_norm;

    let mut iterations = 0;
    for _ in 0..max_iter {
        if best_res <= target {
            break;
        }
        apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if !(pap > 0.0) || !pap.is_finite() {
            break; // operator lost positive definiteness numerically
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.norm_squared();
        iterations += 1;
        let res = rs_new.sqrt();
        if res < best_res {
            best_res = res;
            best_x.copy_from(&x);
        }
        if res <= target {
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        p = &r + beta * p;
    }
    CgOutcome {
        x: best_x,
        iterations,
        rel_residual: best_res / rhs_norm,
    }
}

pub(crate) fn cg_sparse(
    b: &SymmetricMatrix,
    rhs: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
    warm: Option<&DVector<f64>>,
) -> CgOutcome {
    cg_operator(
        &mut |v, out| b.matvec_into(v, out),
        rhs,
        rel_tol,
        max_iter,
        warm,
    )
}

/// Solves `B x = rhs` for SPD `B` with `|B x - rhs| <= tol * |rhs|`.
///
/// Deterministic. Fails with a non-convergence error once the iteration cap
/// `10 sqrt(kappa_B) log(1/tol) + 50` is exceeded.
pub fn conjugate_gradient(
    b: &SymmetricMatrix,
    rhs: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    if rhs.len() != b.dim() {
        return Err(Error::Dimension(format!(
            "conjugate_gradient: rhs of length {} against {}x{} matrix",
            rhs.len(),
            b.dim(),
            b.dim()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(
            "conjugate_gradient requires tol > 0".into(),
        ));
    }
    let (lo, hi) = spectral_estimates(b);
    let kappa = (hi / lo).max(1.0);
    let cap = (10.0 * kappa.sqrt() * (1.0 / tol).ln()).ceil() as usize + 50;
    let out = cg_sparse(b, rhs, tol, cap, None);
    if out.rel_residual <= tol {
        Ok(out.x)
    } else {
        Err(Error::NonConvergence {
            context: "conjugate_gradient",
            iterations: out.iterations,
            residual: out.rel_residual,
            target: tol,
        })
    }
}

/// Estimated `(lambda_min, lambda_max)` of a sparse SPD matrix via power
/// iteration and CG-backed inverse iteration. Cached on the matrix.
pub fn spectral_estimates(b: &SymmetricMatrix) -> (f64, f64) {
    *b.spectral_cache.get_or_init(|| {
        let d = b.dim();
        let mut v = DVector::from_fn(d, |i, _| 1.0 + ((i * 37 + 11) as f64).sin());
        v /= v.norm();
        let mut hi = 0.0f64;
        for _ in 0..120 {
            let w = b.matvec(&v);
            let n = w.norm();
            if n == 0.0 {
                break;
            }
            hi = v.dot(&w);
            v = w / n;
        }
        if hi <= 0.0 {
            hi = b.trace().abs().max(f64::MIN_POSITIVE);
        }

        let mut u = DVector::from_fn(d, |i, _| 1.0 - ((i * 17 + 5) as f64).cos());
        u /= u.norm();
        let mut lo = hi;
        for _ in 0..80 {
            let out = cg_sparse(b, &u, 1e-12, 4 * d + 200, None);
            let n = out.x.norm();
            if !n.is_finite() || n == 0.0 {
                break;
            }
            let w = out.x / n;
            lo = w.dot(&b.matvec(&w));
            u = w;
        }
        // Inverse iteration approaches lambda_min from above; shade the lower
        // bound so downstream certifications stay sound.
        ((lo / 1.05).max(f64::MIN_POSITIVE), hi.max(lo))
    })
}

/// Matrix-free extremes for a covariance block `gamma I + X^T X / n`
/// (large-d fallback used by `CcaProblem`).
pub fn covariance_extremes_matfree(m: &DataMatrix, gamma: f64) -> Result<(f64, f64)> {
    let d = m.cols();
    let n = m.rows() as f64;
    let mut work = vec![0.0; m.rows()];
    let mut apply = |v: &DVector<f64>, out: &mut DVector<f64>| {
        m.matvec(v.as_slice(), &mut work);
        m.tr_matvec_scaled(&work, 1.0 / n, out.as_mut_slice());
        out.axpy(gamma, v, 1.0);
    };

    let mut v = DVector::from_fn(d, |i, _| 1.0 + ((i * 37 + 11) as f64).sin());
    v /= v.norm();
    let mut hi = 0.0f64;
    let mut tmp = DVector::zeros(d);
    for _ in 0..150 {
        apply(&v, &mut tmp);
        let nn = tmp.norm();
        if nn == 0.0 {
            break;
        }
        hi = v.dot(&tmp);
        v = &tmp / nn;
    }

    let mut u = DVector::from_fn(d, |i, _| 1.0 - ((i * 17 + 5) as f64).cos());
    u /= u.norm();
    let mut lo = hi;
    for _ in 0..80 {
        let out = cg_operator(&mut apply, &u, 1e-12, 6 * d + 300, None);
        let nn = out.x.norm();
        if !nn.is_finite() || nn == 0.0 {
            break;
        }
        let w = out.x / nn;
        apply(&w, &mut tmp);
        lo = w.dot(&tmp);
        u = w;
    }
    if !(lo > 0.0) || !lo.is_finite() {
        return Err(Error::NotPositiveDefinite(
            "covariance block appears singular (matrix-free probe)".into(),
        ));
    }
    Ok(((lo / 1.05).max(f64::MIN_POSITIVE), hi.max(lo)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_immediately() {
        let b = SymmetricMatrix::identity(2);
        let rhs = DVector::from_vec(vec![5.0, -3.0]);
        let x = conjugate_gradient(&b, &rhs, 1e-12).unwrap();
        assert!((x - rhs).norm() < 1e-12);
    }

    #[test]
    fn diagonal_solve() {
        let b = SymmetricMatrix::from_diagonal(&[2.0, 4.0]).unwrap();
        let rhs = DVector::from_vec(vec![2.0, 4.0]);
        let x = conjugate_gradient(&b, &rhs, 1e-12).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-10);
    }

    #[test]
    fn random_spd_matches_dense_factorization() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = 20;
        let g = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &g * g.transpose() + nalgebra::DMatrix::identity(d, d) * (d as f64);
        let b = SymmetricMatrix::from_dense(&spd).unwrap();
        let rhs = DVector::from_fn(d, |i, _| (i as f64 * 0.37).cos());
        let x = conjugate_gradient(&b, &rhs, 1e-10).unwrap();
        let want = spd.clone().cholesky().unwrap().solve(&rhs);
        assert!((&x - &want).norm() <= 1e-8 * want.norm());
    }

    #[test]
    fn matrix_free_covariance_extremes_match_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let (n, d) = (40usize, 6usize);
        let x =
            DataMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let gamma = 0.05;
        let (lo, hi) = covariance_extremes_matfree(&x, gamma).unwrap();
        let xd = x.to_dense();
        let cov = xd.transpose() * &xd / n as f64 + nalgebra::DMatrix::identity(d, d) * gamma;
        let eig = nalgebra::SymmetricEigen::new(cov);
        let (tlo, thi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        assert!(
            lo <= tlo * (1.0 + 1e-9) && lo >= tlo * 0.8,
            "lo {lo} vs {tlo}"
        );
        assert!((hi - thi).abs() <= 1e-6 * thi, "hi {hi} vs {thi}");
    }

    #[test]
    fn indefinite_system_reports_non_convergence() {
        // not PD: CG cannot certify the residual target
        let b = SymmetricMatrix::from_diagonal(&[1.0, -1.0]).unwrap();
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let err = conjugate_gradient(&b, &rhs, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err}");
    }

    #[test]
    fn spectral_estimates_bracket_true_extremes() {
        let b = SymmetricMatrix::from_diagonal(&[0.5, 1.0, 2.0, 8.0]).unwrap();
        let (lo, hi) = spectral_estimates(&b);
        assert!(lo <= 0.5 + 1e-9 && lo > 0.3, "lo = {lo}");
        assert!((hi - 8.0).abs() < 1e-6, "hi = {hi}");
    }
}
