//! Linear-system machinery: conjugate gradient, inexact accelerated gradient
//! descent, the deflated shifted operator, and the stochastic finite-sum
//! solvers for CCA pencils.

mod agd;
mod cg;
mod pencil;
mod shifted;
mod svrg;

pub use agd::{agd_inexact, agd_tau, QuadraticOracle};
pub use cg::{conjugate_gradient, covariance_extremes_matfree, spectral_estimates};
pub use pencil::{CcaPencil, CounterSnapshot, InnerBackend, Pencil, SolveCounters, SparsePencil};
pub use shifted::{solve_shifted, solve_shifted_from, Conditioning, ShiftedOperator, SpectrumSide};
pub use svrg::{
    svrg_binv_a, svrg_shifted_cca, svrg_shifted_cca_with, DeflationCorrection, FiniteSumComponent,
};
