//! Top-k generalized eigendecomposition and canonical correlation analysis
//! through two-sided shift-and-invert preconditioning with one-by-one
//! deflation, plus a dense brute-force oracle for validating every
//! approximation guarantee at small scale.
//!
//! All solver iterates live in whitened-implicit coordinates: a stored
//! vector `v` represents the explicit vector `B^{1/2} v`, so no matrix
//! square root is ever formed and all geometry goes through B-inner
//! products.

pub mod cca;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lazycca;
pub mod lazyev;
pub mod matrix;
pub mod oracle;
pub mod shift_invert;
pub mod solvers;
pub mod synth;

pub use cca::{build_cca_problem, CcaBlock, CcaProblem};
pub use error::{Error, Result};
pub use geometry::{b_inner, b_project_out, ImplicitBasis};
pub use io::{load_dataset, load_matrix_market, save_matrix_market, DatasetFormat};
pub use lazycca::{
    cca_gap_dependent, cca_gap_free, lazy_cca, recover_canonical_pairs, CanonicalPair, CcaConfig,
    CcaResult,
};
pub use lazyev::{genev_gap_dependent, genev_gap_free, lazy_ev, GenEvConfig, SpectralResult};
pub use matrix::{DataMatrix, SymmetricMatrix};
pub use oracle::{check_algebra_lemmas, dense_cca, dense_genev, DenseSpectrum, LemmaReport};
pub use shift_invert::{
    appx_pca_pm, inexact_power, ran_init, AppxPcaSchedule, ScheduleMode, ShiftTrace, Sign,
};
pub use solvers::{
    agd_inexact, conjugate_gradient, solve_shifted, svrg_binv_a, svrg_shifted_cca, Conditioning,
    InnerBackend, QuadraticOracle, ShiftedOperator, SolveCounters, SparsePencil, SpectrumSide,
};
