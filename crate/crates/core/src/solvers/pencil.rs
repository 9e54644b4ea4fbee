//! Matrix pencils `(A, B)` exposed through matrix-vector products and an
//! approximate `w -> B^{-1} A w` primitive.

use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;

use crate::cca::{CcaBlock, CcaProblem};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::solvers::cg::{cg_operator, cg_sparse, spectral_estimates};
use crate::solvers::svrg::svrg_binv_a_warm;

/// Running tallies for one solver invocation. Shared by reference through
/// the whole call tree; atomic so instrumented runs can stay `Sync`.
#[derive(Debug, Default)]
pub struct SolveCounters {
    /// Applications of the shifted operator (the 1/sqrt(gap)-scaling cost).
    pub matvecs: AtomicU64,
    /// Calls to the approximate inversion oracle.
    pub solve_calls: AtomicU64,
    /// Iterations spent inside the metric solver (CG).
    pub b_solve_iters: AtomicU64,
    /// Epochs spent inside stochastic finite-sum solvers.
    pub svrg_epochs: AtomicU64,
}

impl SolveCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn matvec_count(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn solve_call_count(&self) -> u64 {
        self.solve_calls.load(Ordering::Relaxed)
    }

    pub fn add_matvec(&self) {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_solve_call(&self) {
        self.solve_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_b_iters(&self, n: u64) {
        self.b_solve_iters.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_svrg_epochs(&self, n: u64) {
        self.svrg_epochs.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            matvecs: self.matvecs.load(Ordering::Relaxed),
            solve_calls: self.solve_calls.load(Ordering::Relaxed),
            b_solve_iters: self.b_solve_iters.load(Ordering::Relaxed),
            svrg_epochs: self.svrg_epochs.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CounterSnapshot {
    pub matvecs: u64,
    pub solve_calls: u64,
    pub b_solve_iters: u64,
    pub svrg_epochs: u64,
}

/// Which inner machinery computes `B^{-1} A w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum InnerBackend {
    /// Conjugate gradient on the metric (generic sparse pencils, CCA option).
    Nested,
    /// Variance-reduced stochastic solver over the finite sum (CCA only).
    Stochastic,
}

/// A symmetric pencil applied without ever forming `B^{1/2}` or `B^{-1}`.
pub trait Pencil {
    fn dim(&self) -> usize;

    fn apply_a(&self, v: &DVector<f64>, out: &mut DVector<f64>);

    fn apply_b(&self, v: &DVector<f64>, out: &mut DVector<f64>);

    /// `w -> B^{-1} A w` with `|result - B^{-1} A w| <= tol` (Euclidean).
    fn binv_a(
        &self,
        w: &DVector<f64>,
        tol: f64,
        warm: Option<&DVector<f64>>,
        counters: &SolveCounters,
    ) -> Result<DVector<f64>>;

    fn trace_b(&self) -> f64;

    /// Sound lower bound on `lambda_min(B)`.
    fn lambda_min_b(&self) -> f64;

    /// Estimate of `lambda_max(B)` (conditioning only; norm conversions use
    /// the trace bound).
    fn lambda_max_b(&self) -> f64;

    fn kappa_b(&self) -> f64 {
        (self.lambda_max_b() / self.lambda_min_b()).max(1.0)
    }
}

/// Generic sparse pencil; `B^{-1}` is always conjugate gradient here.
pub struct SparsePencil<'a> {
    pub a: &'a SymmetricMatrix,
    pub b: &'a SymmetricMatrix,
}

impl<'a> SparsePencil<'a> {
    pub fn new(a: &'a SymmetricMatrix, b: &'a SymmetricMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "pencil dimensions disagree: {} vs {}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(Self { a, b })
    }
}

impl Pencil for SparsePencil<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply_a(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        self.a.matvec_into(v, out);
    }

    fn apply_b(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        self.b.matvec_into(v, out);
    }

    fn binv_a(
        &self,
        w: &DVector<f64>,
        tol: f64,
        warm: Option<&DVector<f64>>,
        counters: &SolveCounters,
    ) -> Result<DVector<f64>> {
        let rhs = self.a.matvec(w);
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            return Ok(DVector::zeros(self.dim()));
        }
        // |x - B^{-1} rhs| <= |Bx - rhs| / lambda_min(B)
        let rel = (tol * self.lambda_min_b() / rhs_norm).clamp(1e-15, 0.5);
        let cap = 20 * self.dim() + 400;
        let out = cg_sparse(self.b, &rhs, rel, cap, warm);
        counters.add_b_iters(out.iterations as u64);
        if out.rel_residual > rel * 64.0 {
            return Err(Error::NonConvergence {
                context: "pencil metric solve",
                iterations: out.iterations,
                residual: out.rel_residual,
                target: rel,
            });
        }
        Ok(out.x)
    }

    fn trace_b(&self) -> f64 {
        self.b.trace()
    }

    fn lambda_min_b(&self) -> f64 {
        spectral_estimates(self.b).0
    }

    fn lambda_max_b(&self) -> f64 {
        spectral_estimates(self.b).1
    }
}

/// CCA pencil over the implicit block operators of the data views.
pub struct CcaPencil<'a> {
    pub problem: &'a CcaProblem,
    pub backend: InnerBackend,
    /// Base seed for the stochastic backend; each call derives a fresh
    /// stream deterministically.
    seed: u64,
    call_counter: AtomicU64,
}

impl<'a> CcaPencil<'a> {
    pub fn new(problem: &'a CcaProblem, backend: InnerBackend, seed: u64) -> Self {
        Self {
            problem,
            backend,
            seed,
            call_counter: AtomicU64::new(0),
        }
    }
}

impl Pencil for CcaPencil<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn apply_a(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        self.problem
            .block_apply_into(CcaBlock::A, v, out)
            .expect("dimension checked at construction");
    }

    fn apply_b(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        self.problem
            .block_apply_into(CcaBlock::B, v, out)
            .expect("dimension checked at construction");
    }

    fn binv_a(
        &self,
        w: &DVector<f64>,
        tol: f64,
        warm: Option<&DVector<f64>>,
        counters: &SolveCounters,
    ) -> Result<DVector<f64>> {
        match self.backend {
            InnerBackend::Nested => {
                let rhs = self.problem.block_apply(CcaBlock::A, w)?;
                let rhs_norm = rhs.norm();
                if rhs_norm == 0.0 {
                    return Ok(DVector::zeros(self.dim()));
                }
                let rel = (tol * self.lambda_min_b() / rhs_norm).clamp(1e-15, 0.5);
                let mut apply = |v: &DVector<f64>, out: &mut DVector<f64>| {
                    self.problem
                        .block_apply_into(CcaBlock::B, v, out)
                        .expect("dimension checked");
                };
                let cap = 20 * self.dim() + 400;
                let out = cg_operator(&mut apply, &rhs, rel, cap, warm);
                counters.add_b_iters(out.iterations as u64);
                if out.rel_residual > rel * 64.0 {
                    return Err(Error::NonConvergence {
                        context: "cca metric solve",
                        iterations: out.iterations,
                        residual: out.rel_residual,
                        target: rel,
                    });
                }
                Ok(out.x)
            }
            InnerBackend::Stochastic => {
                let call = self.call_counter.fetch_add(1, Ordering::Relaxed);
                let seed = self
                    .seed
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add(call);
                svrg_binv_a_warm(self.problem, w, tol, seed, warm, counters)
            }
        }
    }

    fn trace_b(&self) -> f64 {
        self.problem.trace_b()
    }

    fn lambda_min_b(&self) -> f64 {
        // construction-time estimate, shaded once more for safety
        self.problem.lambda_min_b() / 1.05
    }

    fn lambda_max_b(&self) -> f64 {
        self.problem.lambda_max_b()
    }
}

/// Scratch warm-start slot carried across matvecs of one shifted operator.
#[derive(Default)]
pub(crate) struct WarmSlot(pub RefCell<Option<DVector<f64>>>);
