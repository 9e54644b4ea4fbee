//! Variance-reduced stochastic solvers over the CCA finite sum.
//!
//! Epochs take a full-gradient snapshot and then run `2n` corrected
//! single-sample steps with uniform sampling and a fixed step size of
//! `1 / (8 L_max)`, `L_max` being the largest per-component smoothness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cca::{CcaBlock, CcaProblem};
use crate::error::{Error, Result};
use crate::geometry::ImplicitBasis;
use crate::solvers::pencil::SolveCounters;
use crate::solvers::shifted::SpectrumSide;

const EPOCH_CAP: usize = 4000;

/// One summand of the finite-sum objective: a sample index, its two view
/// rows, and a bound on the summand's smoothness.
#[derive(Debug, Clone, Copy)]
pub struct FiniteSumComponent<'a> {
    pub index: usize,
    pub x_row: &'a [f64],
    pub y_row: &'a [f64],
    pub smoothness: f64,
}

impl CcaProblem {
    pub fn component(&self, i: usize) -> FiniteSumComponent<'_> {
        let (gx, gy) = self.gammas();
        FiniteSumComponent {
            index: i,
            x_row: self.x().row(i),
            y_row: self.y().row(i),
            smoothness: (self.row_sq_x()[i] + gx).max(self.row_sq_y()[i] + gy),
        }
    }

    /// Largest per-component smoothness of the plain `B^{-1} A` objective.
    pub fn component_smoothness(&self) -> f64 {
        let (gx, gy) = self.gammas();
        let mx = self.row_sq_x().iter().cloned().fold(0.0f64, f64::max);
        let my = self.row_sq_y().iter().cloned().fold(0.0f64, f64::max);
        (mx + gx).max(my + gy)
    }
}

/// Computes `w' ~ B^{-1} A w` with `|w' - B^{-1} A w| <= tol` by SVRG on
///
/// ```text
///   f(x) = 1/(2n) sum_i (<X_i, x_1> - <Y_i, w_2>)^2 + (<Y_i, x_2> - <X_i, w_1>)^2
///          + gamma_x |x_1|^2 / 2 + gamma_y |x_2|^2 / 2
/// ```
///
/// whose unique minimizer is `B^{-1} A w`.
pub fn svrg_binv_a(
    problem: &CcaProblem,
    w: &DVector<f64>,
    tol: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let counters = SolveCounters::new();
    svrg_binv_a_warm(problem, w, tol, seed, None, &counters)
}

pub(crate) fn svrg_binv_a_warm(
    problem: &CcaProblem,
    w: &DVector<f64>,
    tol: f64,
    seed: u64,
    warm: Option<&DVector<f64>>,
    counters: &SolveCounters,
) -> Result<DVector<f64>> {
    if w.len() != problem.dim() {
        return Err(Error::Dimension(format!(
            "svrg_binv_a: vector of length {} in dimension {}",
            w.len(),
            problem.dim()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("svrg_binv_a requires tol > 0".into()));
    }
    let aw = problem.block_apply(CcaBlock::A, w)?;
    if aw.norm() == 0.0 {
        return Ok(DVector::zeros(problem.dim()));
    }

    let n = problem.samples();
    let dx = problem.dim_x();
    let (gx, gy) = problem.gammas();
    let l_max = problem.component_smoothness();
    let step = 1.0 / (8.0 * l_max);
    let lam = 1.0; // plain metric: coefficient of B in the quadratic
    let sigma_lb = problem.lambda_min_b() / 1.05;
    let target = tol * sigma_lb;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = warm
        .cloned()
        .unwrap_or_else(|| DVector::zeros(problem.dim()));
    let mut delta = DVector::zeros(problem.dim());
    let mut mu = DVector::zeros(problem.dim());
    let mut update = DVector::zeros(problem.dim());
    let mut best_res = f64::INFINITY;
    let mut best_x = x.clone();
    let mut stalled = 0usize;

    for epoch in 0..EPOCH_CAP {
        // snapshot: mu = grad f(x) = B x - A w
        problem.block_apply_into(CcaBlock::B, &x, &mut mu)?;
        mu.axpy(-1.0, &aw, 1.0);
        counters.add_svrg_epochs(1);
        let res = mu.norm();
        if !res.is_finite() {
            return Err(Error::Overflow("svrg_binv_a"));
        }
        if res < best_res {
            best_res = res;
            best_x.copy_from(&x);
            stalled = 0;
        } else {
            stalled += 1;
        }
        // Rounding floor of the residual evaluation at this scale.
        let floor = 32.0 * f64::EPSILON * (aw.norm() + problem.lambda_max_b() * x.norm());
        if res <= target.max(floor) {
            return Ok(x);
        }
        if stalled > 12 {
            break;
        }
        delta.fill(0.0);
        for _ in 0..2 * n {
            let i = rng.gen_range(0..n);
            sample_step(problem, i, dx, lam, 0.0, gx, gy, &delta, &mu, &mut update);
            x.axpy(-step, &update, 1.0);
            delta.axpy(-step, &update, 1.0);
        }
        if epoch == EPOCH_CAP - 1 {
            break;
        }
    }
    let floor = 32.0 * f64::EPSILON * (aw.norm() + problem.lambda_max_b() * best_x.norm());
    if best_res <= 64.0 * target.max(floor) {
        return Ok(best_x);
    }
    Err(Error::NonConvergence {
        context: "svrg_binv_a",
        iterations: EPOCH_CAP,
        residual: best_res * best_res / (2.0 * sigma_lb),
        target: target * target / (2.0 * sigma_lb),
    })
}

/// Shared inner step: update = mu + stochastic correction at sample `i`.
///
/// The correction covers the sampled rows of the `lam * B` part, the
/// (optionally sign-flipped) sampled rows of the `A` part when
/// `cross_sign != 0`, and the ridge terms; all evaluated on `delta = x - snapshot`.
#[allow(clippy::too_many_arguments)]
fn sample_step(
    problem: &CcaProblem,
    i: usize,
    dx: usize,
    lam: f64,
    cross_sign: f64,
    gx: f64,
    gy: f64,
    delta: &DVector<f64>,
    mu: &DVector<f64>,
    update: &mut DVector<f64>,
) {
    let xi = problem.x().row(i);
    let yi = problem.y().row(i);
    let (d1, d2) = delta.as_slice().split_at(dx);
    let mut dot_x = 0.0;
    for (a, b) in xi.iter().zip(d1) {
        dot_x += a * b;
    }
    let mut dot_y = 0.0;
    for (a, b) in yi.iter().zip(d2) {
        dot_y += a * b;
    }
    update.copy_from(mu);
    let (u1, u2) = update.as_mut_slice().split_at_mut(dx);
    let cx = lam * dot_x - cross_sign * dot_y;
    let cy = lam * dot_y - cross_sign * dot_x;
    for (u, &r) in u1.iter_mut().zip(xi) {
        *u += cx * r;
    }
    for (u, &r) in u2.iter_mut().zip(yi) {
        *u += cy * r;
    }
    let lgx = lam * gx;
    let lgy = lam * gy;
    for (u, &d) in u1.iter_mut().zip(d1) {
        *u += lgx * d;
    }
    for (u, &d) in u2.iter_mut().zip(d2) {
        *u += lgy * d;
    }
}

/// Low-rank correction `Q = B V V^T A + A V V^T B - B V V^T A V V^T B`
/// applied through the thin factors `A V` and `B V` in `O(k d)` per product.
pub struct DeflationCorrection {
    /// Columns of `A V`.
    fa: Vec<DVector<f64>>,
    /// Columns of `B V` (shared with the basis cache).
    fb: Vec<DVector<f64>>,
    /// `V^T A V`.
    gram: DMatrix<f64>,
}

impl DeflationCorrection {
    pub fn compute(problem: &CcaProblem, basis: &ImplicitBasis) -> Result<Self> {
        let mut fa = Vec::with_capacity(basis.len());
        for col in basis.columns() {
            fa.push(problem.block_apply(CcaBlock::A, col)?);
        }
        let fb: Vec<DVector<f64>> = (0..basis.len())
            .map(|s| basis.metric_column(s).clone())
            .collect();
        let k = basis.len();
        let gram = DMatrix::from_fn(k, k, |i, j| fa[j].dot(basis.column(i)));
        Ok(Self { fa, fb, gram })
    }

    /// Extends cached factors by the columns appended since they were built.
    pub fn extend(&mut self, problem: &CcaProblem, basis: &ImplicitBasis) -> Result<()> {
        while self.fa.len() < basis.len() {
            let s = self.fa.len();
            self.fa
                .push(problem.block_apply(CcaBlock::A, basis.column(s))?);
            self.fb.push(basis.metric_column(s).clone());
        }
        let k = basis.len();
        self.gram = DMatrix::from_fn(k, k, |i, j| self.fa[j].dot(basis.column(i)));
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.fa.len()
    }

    /// `out = Q z`.
    pub fn apply_into(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        if self.fa.is_empty() {
            return;
        }
        let k = self.fa.len();
        let mut ca = DVector::zeros(k); // F_A^T z
        let mut cb = DVector::zeros(k); // F_B^T z
        for s in 0..k {
            ca[s] = self.fa[s].dot(z);
            cb[s] = self.fb[s].dot(z);
        }
        let gcb = &self.gram * &cb;
        for s in 0..k {
            out.axpy(ca[s] - gcb[s], &self.fb[s], 1.0);
            out.axpy(cb[s], &self.fa[s], 1.0);
        }
    }

    /// Dense `Q` for validation against the factored application.
    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(dim, dim);
        let mut out = DVector::zeros(dim);
        for j in 0..dim {
            let e = DVector::from_fn(dim, |i, _| if i == j { 1.0 } else { 0.0 });
            self.apply_into(&e, &mut out);
            q.set_column(j, &out);
        }
        q
    }
}

/// Approximates `xi ~ N^{-1} w` for the deflated shifted CCA operator by
/// minimizing the sum-of-non-convex finite sum
///
/// ```text
///   F(z) = z^T (lambda B -/+ (A - Q)) z / 2 - (B w)^T z
/// ```
///
/// with SVRG; `Q` is applied through precomputed thin factors.
pub fn svrg_shifted_cca(
    problem: &CcaProblem,
    lambda: f64,
    side: SpectrumSide,
    basis: &ImplicitBasis,
    w: &DVector<f64>,
    tol: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let correction = DeflationCorrection::compute(problem, basis)?;
    let counters = SolveCounters::new();
    let sigma = estimate_shift_margin(problem, basis, lambda, &counters)?;
    svrg_shifted_cca_with(
        problem,
        lambda,
        side,
        basis,
        &correction,
        w,
        tol,
        seed,
        sigma,
        &counters,
    )
}

/// Estimates `lambda - |M_s|`, shaded down for safety. The spectral radius
/// is taken from the B-norm growth rate of the deflated power iteration
/// (Rayleigh quotients stall on the +-sigma eigenvalue pairs of CCA
/// operators, the growth rate does not).
fn estimate_shift_margin(
    problem: &CcaProblem,
    basis: &ImplicitBasis,
    lambda: f64,
    counters: &SolveCounters,
) -> Result<f64> {
    use crate::solvers::pencil::{CcaPencil, InnerBackend, Pencil};
    let pencil = CcaPencil::new(problem, InnerBackend::Nested, 0);
    let d = problem.dim();
    let mut v = DVector::from_fn(d, |i, _| ((i * 23 + 3) as f64).sin() + 1.2);
    basis.project_out_inplace(&mut v);
    let mut bt = DVector::zeros(d);
    pencil.apply_b(&v, &mut bt);
    let q = bt.dot(&v).max(0.0).sqrt();
    if q < 1e-300 {
        return Ok(0.9 * lambda);
    }
    v /= q;
    let mut lam_star = 0.0f64;
    for _ in 0..80 {
        let mut t = pencil.binv_a(&v, 1e-10 * (1.0 + v.norm()), None, counters)?;
        basis.project_out_inplace(&mut t);
        pencil.apply_b(&t, &mut bt);
        let growth = bt.dot(&t).max(0.0).sqrt();
        if growth < 1e-300 {
            lam_star = 0.0;
            break;
        }
        lam_star = lam_star.max(growth);
        v = t / growth;
    }
    let margin = lambda - 1.05 * lam_star;
    if margin <= 0.0 {
        return Err(Error::Precondition(format!(
            "shifted operator not positive definite: lambda = {lambda}, |M| ~ {lam_star}"
        )));
    }
    Ok(0.9 * margin)
}

#[allow(clippy::too_many_arguments)]
pub fn svrg_shifted_cca_with(
    problem: &CcaProblem,
    lambda: f64,
    side: SpectrumSide,
    basis: &ImplicitBasis,
    correction: &DeflationCorrection,
    w: &DVector<f64>,
    tol: f64,
    seed: u64,
    sigma_n: f64,
    counters: &SolveCounters,
) -> Result<DVector<f64>> {
    if w.len() != problem.dim() {
        return Err(Error::Dimension(format!(
            "svrg_shifted_cca: vector of length {} in dimension {}",
            w.len(),
            problem.dim()
        )));
    }
    if !(tol > 0.0 && sigma_n > 0.0) {
        return Err(Error::Precondition(
            "svrg_shifted_cca requires tol > 0 and a positive shift margin".into(),
        ));
    }
    if correction.rank() != basis.len() {
        return Err(Error::Precondition(
            "deflation correction is stale with respect to the basis".into(),
        ));
    }
    let cross_sign = match side {
        SpectrumSide::Top => 1.0,
        SpectrumSide::Bottom => -1.0,
    };
    let n = problem.samples();
    let dx = problem.dim_x();
    let (gx, gy) = problem.gammas();

    let mut bw = DVector::zeros(problem.dim());
    problem.block_apply_into(CcaBlock::B, w, &mut bw)?;
    if bw.norm() == 0.0 {
        return Ok(DVector::zeros(problem.dim()));
    }

    let q_norm_bound = 3.0 * problem.lambda_max_b();
    let l_max =
        lambda * problem.component_smoothness() + problem.component_smoothness() + q_norm_bound;
    let step = 1.0 / (8.0 * l_max);
    let sigma_lb = sigma_n * problem.lambda_min_b() / 1.05;
    let target = tol * sigma_lb;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DVector::zeros(problem.dim());
    let mut delta = DVector::zeros(problem.dim());
    let mut mu = DVector::zeros(problem.dim());
    let mut update = DVector::zeros(problem.dim());
    let mut qbuf = DVector::zeros(problem.dim());
    let mut abuf = DVector::zeros(problem.dim());
    let mut best_res = f64::INFINITY;
    let mut best_z = z.clone();
    let mut stalled = 0usize;

    for _ in 0..EPOCH_CAP {
        // mu = (lambda B -/+ (A - Q)) z - B w
        problem.block_apply_into(CcaBlock::B, &z, &mut mu)?;
        mu *= lambda;
        problem.block_apply_into(CcaBlock::A, &z, &mut abuf)?;
        correction.apply_into(&z, &mut qbuf);
        abuf.axpy(-1.0, &qbuf, 1.0);
        mu.axpy(-cross_sign, &abuf, 1.0);
        mu.axpy(-1.0, &bw, 1.0);
        counters.add_svrg_epochs(1);

        let res = mu.norm();
        if !res.is_finite() {
            return Err(Error::Overflow("svrg_shifted_cca"));
        }
        if res < best_res {
            best_res = res;
            best_z.copy_from(&z);
            stalled = 0;
        } else {
            stalled += 1;
        }
        let floor =
            32.0 * f64::EPSILON * (bw.norm() + (1.0 + lambda) * problem.lambda_max_b() * z.norm());
        if res <= target.max(floor) {
            return Ok(z);
        }
        if stalled > 12 {
            break;
        }

        delta.fill(0.0);
        for _ in 0..2 * n {
            let i = rng.gen_range(0..n);
            sample_step(
                problem,
                i,
                dx,
                lambda,
                cross_sign,
                gx,
                gy,
                &delta,
                &mu,
                &mut update,
            );
            // deterministic low-rank part of the correction on delta
            correction.apply_into(&delta, &mut qbuf);
            update.axpy(cross_sign, &qbuf, 1.0);
            z.axpy(-step, &update, 1.0);
            delta.axpy(-step, &update, 1.0);
        }
    }
    let floor =
        32.0 * f64::EPSILON * (bw.norm() + (1.0 + lambda) * problem.lambda_max_b() * best_z.norm());
    if best_res <= 64.0 * target.max(floor) {
        return Ok(best_z);
    }
    Err(Error::NonConvergence {
        context: "svrg_shifted_cca",
        iterations: EPOCH_CAP,
        residual: best_res * best_res / (2.0 * sigma_lb),
        target: target * target / (2.0 * sigma_lb),
    })
}
