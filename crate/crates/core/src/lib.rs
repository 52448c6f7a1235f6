//! Weighted p-Laplacian eigenpairs, exact discrete weighted Cheeger
//! constants, and the p → 1 continuation linking them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cheeger;
pub mod domain;
pub mod error;
mod linalg;
pub mod p_eigen;
pub mod sweep;

pub use cheeger::{
    brute_force_cheeger, build_cut_graph, dinkelbach_cheeger, eroded_set,
    lipschitz_monotone_approx, min_cut, sigma_upper_bound, CheegerMethod, CheegerOptions,
    CheegerSolution, FlowNetwork, MinCut,
};
pub use domain::{
    CoareaLevel, DomainSpec, Face, MaskSource, ScalarField, SetMask, Stencil, VectorField,
    WeightSource, WeightedDomain,
};
pub use error::{Error, Result};
pub use p_eigen::{
    check_acot_bound, dual_certificate, rayleigh_quotient, solve_first_eigenpair,
    solve_first_eigenpair_from, AcotBound, DualCertificate, EigenPair, SolverOptions,
};
pub use sweep::{
    check_lipschitz_chain, check_sandwich, check_truco, check_weight_comparison, default_schedule,
    extrapolate_limit, run_p_sweep, Extrapolation, LipschitzChain, Outcome, SweepOptions,
    SweepRecord, SweepReport, Verdict,
};
