//! Dense brute-force ground truth: full generalized eigendecomposition, CCA
//! via whitened SVD, and numeric validators for the matrix-algebra bounds
//! the deflation analysis rests on. Everything here may materialize dense
//! matrices; nothing here is on the solver path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::cca::CcaProblem;
use crate::error::{Error, Result};

/// Full generalized spectrum, sorted by |eigenvalue| descending with ties
/// broken positive-first then by original index.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<f64>,
    /// B-orthonormal eigenvectors, one column per eigenvalue.
    pub eigenvectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Spectral radius `max |lambda_i|`.
    pub fn lambda_star(&self) -> f64 {
        self.eigenvalues.first().map(|l| l.abs()).unwrap_or(0.0)
    }

    /// Trailing eigenvector block `(u_{k+1}, ..., u_d)`.
    pub fn trailing(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim();
        self.eigenvectors.columns(k, d - k).into_owned()
    }

    /// Relative gap `(|lambda_k| - |lambda_{k+1}|) / |lambda_k|`.
    pub fn relative_gap(&self, k: usize) -> f64 {
        let lk = self.eigenvalues[k - 1].abs();
        if lk == 0.0 {
            return 0.0;
        }
        let next = if k < self.dim() {
            self.eigenvalues[k].abs()
        } else {
            0.0
        };
        (lk - next) / lk
    }
}

/// Symmetric inverse square root via eigendecomposition.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    if sym.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:.3e}",
            sym.eigenvalues.min()
        )));
    }
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        sym.eigenvectors[(i, j)] / sym.eigenvalues[j].sqrt()
    });
    Ok(&scaled * sym.eigenvectors.transpose())
}

pub fn sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    if sym.eigenvalues.iter().any(|&l| l < -1e-12) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:.3e}",
            sym.eigenvalues.min()
        )));
    }
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        sym.eigenvectors[(i, j)] * sym.eigenvalues[j].max(0.0).sqrt()
    });
    Ok(&scaled * sym.eigenvectors.transpose())
}

/// Deterministic sort order for spectra: |lambda| descending, positive
/// before negative on ties, then ascending original index.
fn sort_spectrum(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .partial_cmp(&vals[a].abs())
            .unwrap()
            .then_with(|| {
                let sa = vals[a] >= 0.0;
                let sb = vals[b] >= 0.0;
                sb.cmp(&sa)
            })
            .then(a.cmp(&b))
    });
    idx
}

/// Dense generalized eigendecomposition of `(A, B)` through the symmetric
/// eigendecomposition of `B^{-1/2} A B^{-1/2}`.
pub fn dense_genev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DenseSpectrum> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(
            "dense_genev needs square matrices of equal size".into(),
        ));
    }
    if a.nrows() > 2000 {
        return Err(Error::Precondition(
            "dense oracle is limited to d <= 2000".into(),
        ));
    }
    let binv_sqrt = inv_sqrt_spd(b)?;
    let m = &binv_sqrt * a * &binv_sqrt;
    let m = (&m + m.transpose()) * 0.5;
    let sym = nalgebra::SymmetricEigen::new(m);
    let order = sort_spectrum(sym.eigenvalues.as_slice());
    let d = a.nrows();
    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (pos, &j) in order.iter().enumerate() {
        eigenvalues.push(sym.eigenvalues[j]);
        let u = &binv_sqrt * sym.eigenvectors.column(j);
        eigenvectors.set_column(pos, &u);
    }
    Ok(DenseSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// One canonical triple: correlation coefficient and its pair of directions,
/// normalized so `phi^T S_xx phi = psi^T S_yy psi = 1`.
#[derive(Debug, Clone)]
pub struct CanonicalTriple {
    pub sigma: f64,
    pub phi: DVector<f64>,
    pub psi: DVector<f64>,
}

/// Dense CCA through the SVD of the whitened cross-covariance
/// `S_xx^{-1/2} S_xy S_yy^{-1/2}`.
pub fn dense_cca(problem: &CcaProblem) -> Result<Vec<CanonicalTriple>> {
    if problem.dim() > 2000 {
        return Err(Error::Precondition(
            "dense oracle is limited to d <= 2000".into(),
        ));
    }
    let sxx = problem.dense_sxx();
    let syy = problem.dense_syy();
    let sxy = problem.dense_sxy();
    let wx = inv_sqrt_spd(&sxx)?;
    let wy = inv_sqrt_spd(&syy)?;
    let t = &wx * &sxy * &wy;
    let svd = nalgebra::SVD::new(t, true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut out = Vec::with_capacity(r);
    for &j in &order {
        let phi = &wx * u.column(j);
        let psi = &wy * vt.row(j).transpose();
        out.push(CanonicalTriple {
            sigma: svd.singular_values[j],
            phi,
            psi,
        });
    }
    Ok(out)
}

/// Spectral norm through SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    nalgebra::SVD::new(m.clone(), false, false)
        .singular_values
        .max()
}

/// Schatten q-norm of a symmetric matrix.
pub fn schatten_norm(m: &DMatrix<f64>, q: f64) -> f64 {
    let svd = nalgebra::SVD::new(m.clone(), false, false);
    svd.singular_values
        .iter()
        .map(|s| s.powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub samples: usize,
    pub violations: usize,
    /// Max observed ratio of used bound to available bound (<= 1 means holds).
    pub max_ratio: f64,
}

/// Report of the numeric lemma suite.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub approximate_projection: LemmaCheck,
    pub gap_free_wedin: LemmaCheck,
    pub eigenvector_embedding: LemmaCheck,
}

impl LemmaReport {
    pub fn total_violations(&self) -> usize {
        self.approximate_projection.violations
            + self.gap_free_wedin.violations
            + self.eigenvector_embedding.violations
    }
}

fn random_orthonormal(d: usize, k: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    qr.q().columns(0, k).into_owned()
}

fn random_symmetric(d: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(d, d, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    });
    (&g + g.transpose()) * 0.5
}

/// Numerically validates three matrix-algebra bounds on random instances:
/// the approximate-projection perturbation bound, the two-sided gap-free
/// sin-theta (Wedin-style) bound, and the eigenvector embedding bound with
/// the constructive factor `Q = V_1^T U`.
pub fn check_algebra_lemmas(samples: usize, seed: u64) -> LemmaReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut wedin = LemmaCheck {
        samples,
        violations: 0,
        max_ratio: 0.0,
    };
    for _ in 0..samples {
        let d = rng.gen_range(6..=30);
        let a = random_symmetric(d, &mut rng);
        let e = random_symmetric(d, &mut rng);
        let eps = 10f64.powf(rng.gen_range(-6.0..-1.0));
        let e = &e * (eps / spectral_norm(&e));
        let b = &a + &e;
        let ea = nalgebra::SymmetricEigen::new(a.clone());
        let eb = nalgebra::SymmetricEigen::new(b.clone());
        // thresholds chosen from the spectrum so both blocks are nonempty
        let amax = ea
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mu = rng.gen_range(0.05..0.6) * amax;
        let tau = rng.gen_range(0.05..0.5) * amax;
        let u_cols: Vec<usize> = (0..d).filter(|&i| ea.eigenvalues[i].abs() <= mu).collect();
        let v_cols: Vec<usize> = (0..d)
            .filter(|&i| eb.eigenvalues[i].abs() >= mu + tau)
            .collect();
        if u_cols.is_empty() || v_cols.is_empty() {
            continue;
        }
        let u = select_columns(&ea.eigenvectors, &u_cols);
        let v = select_columns(&eb.eigenvectors, &v_cols);
        let lhs = spectral_norm(&(u.transpose() * &v));
        let bound = eps / tau;
        let ratio = if bound > 0.0 {
            lhs / bound
        } else {
            f64::INFINITY
        };
        wedin.max_ratio = wedin.max_ratio.max(ratio);
        if lhs > bound * (1.0 + 1e-9) {
            wedin.violations += 1;
        }
    }

    let mut proj = LemmaCheck {
        samples,
        violations: 0,
        max_ratio: 0.0,
    };
    for _ in 0..samples {
        let d = rng.gen_range(6..=30);
        let m = random_symmetric(d, &mut rng);
        let em = nalgebra::SymmetricEigen::new(m.clone());
        let k = rng.gen_range(1..d / 2 + 1);
        // U: trailing block, U_perp: leading block (any split works)
        let u_cols: Vec<usize> = (k..d).collect();
        let uperp_cols: Vec<usize> = (0..k).collect();
        let u = select_columns(&em.eigenvectors, &u_cols);
        let uperp = select_columns(&em.eigenvectors, &uperp_cols);
        let s = rng.gen_range(1..=k);
        // V_s: orthonormal, mostly inside span(U_perp), correlation with U
        // capped by construction
        let eps = 10f64.powf(rng.gen_range(-5.0..-1.0)).min(0.45);
        let mix = &uperp * random_orthonormal(k, s, &mut rng)
            + &u * random_orthonormal(d - k, s, &mut rng) * eps;
        let vs = mix.qr().q().columns(0, s).into_owned();
        let eps_actual = spectral_norm(&(vs.transpose() * &u));
        if eps_actual >= 0.5 {
            continue;
        }
        let proj_vs = &uperp * (uperp.transpose() * &vs);
        let qs = orthonormal_basis(&proj_vs);
        if qs.ncols() != s {
            continue;
        }
        let pm = |p: &DMatrix<f64>| -> DMatrix<f64> {
            let i = DMatrix::identity(d, d);
            let pr = &i - p * p.transpose();
            &pr * &m * &pr
        };
        let lhs = spectral_norm(&(pm(&qs) - pm(&vs)));
        let bound = 13.0 * eps_actual * spectral_norm(&m);
        let ratio = if bound > 0.0 {
            lhs / bound
        } else {
            f64::INFINITY
        };
        proj.max_ratio = proj.max_ratio.max(ratio);
        if lhs > bound * (1.0 + 1e-9) {
            proj.violations += 1;
        }
    }

    let mut embed = LemmaCheck {
        samples,
        violations: 0,
        max_ratio: 0.0,
    };
    for _ in 0..samples {
        let d = rng.gen_range(6..=30);
        let m = random_symmetric(d, &mut rng);
        let em = nalgebra::SymmetricEigen::new(m.clone());
        let order = sort_spectrum(em.eigenvalues.as_slice());
        let mnorm = em.eigenvalues[order[0]].abs();
        let j = rng.gen_range(1..d);
        let mu = em.eigenvalues[order[j - 1]].abs() * 0.999;
        let u_cols: Vec<usize> = order
            .iter()
            .cloned()
            .filter(|&i| em.eigenvalues[i].abs() <= mu)
            .collect();
        if u_cols.is_empty() {
            continue;
        }
        let u = select_columns(&em.eigenvectors, &u_cols);
        let tau = rng.gen_range(0.05..0.5) * mnorm.max(1e-12);
        let eps = 10f64.powf(rng.gen_range(-5.0..-1.0)).min(0.45);
        // unit v with |v^T U| <= eps
        let mut v = DVector::from_fn(d, |_, _| {
            use rand_distr::Distribution;
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let pu = &u * (u.transpose() * &v);
        v -= &pu;
        if v.norm() < 1e-12 {
            continue;
        }
        v /= v.norm();
        let mut contaminant = &u * (u.transpose() * random_unit(d, &mut rng));
        let cn = contaminant.norm();
        if cn > 1e-12 {
            contaminant /= cn;
            v = &v * (1.0 - eps * eps).sqrt() + contaminant * eps;
            v /= v.norm();
        }
        let eps_actual = (u.transpose() * &v).norm();
        if eps_actual > 0.5 {
            continue;
        }
        let i = DMatrix::identity(d, d);
        let pv = &i - &v * v.transpose();
        let mprime = &pv * &m * &pv;
        let emp = nalgebra::SymmetricEigen::new(mprime.clone());
        // locate the eigenvector of M' that is v itself (eigenvalue 0)
        let mut v_idx = 0usize;
        let mut v_corr = -1.0;
        for c in 0..d {
            let corr = emp.eigenvectors.column(c).dot(&v).abs();
            if corr > v_corr {
                v_corr = corr;
                v_idx = c;
            }
        }
        let v1_cols: Vec<usize> = (0..d)
            .filter(|&c| c != v_idx && emp.eigenvalues[c].abs() <= mu + tau)
            .collect();
        if v1_cols.is_empty() {
            continue;
        }
        let v1 = select_columns(&emp.eigenvectors, &v1_cols);
        let q = v1.transpose() * &u;
        let lhs = spectral_norm(&(&u - &v1 * &q));
        let bound = (169.0 * eps_actual * eps_actual * mnorm * mnorm / (tau * tau)
            + eps_actual * eps_actual)
            .sqrt();
        let ratio = if bound > 0.0 {
            lhs / bound
        } else {
            f64::INFINITY
        };
        embed.max_ratio = embed.max_ratio.max(ratio);
        if lhs > bound * (1.0 + 1e-9) {
            embed.violations += 1;
        }
    }

    LemmaReport {
        approximate_projection: proj,
        gap_free_wedin: wedin,
        eigenvector_embedding: embed,
    }
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (pos, &c) in cols.iter().enumerate() {
        out.set_column(pos, &m.column(c));
    }
    out
}

fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = nalgebra::SVD::new(m.clone(), true, false);
    let u = svd.u.unwrap();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * svd.singular_values.max())
        .count();
    u.columns(0, rank).into_owned()
}

fn random_unit(d: usize, rng: &mut impl rand::Rng) -> DVector<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut v = DVector::from_fn(d, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        x
    });
    let n = v.norm();
    if n > 0.0 {
        v /= n;
    }
    v
}
