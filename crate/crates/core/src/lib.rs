//! Numerical laboratory for the abstract Kirchhoff equation
//! `u'' + m(|A^(1/2) u|^2) A u = 0` on a spectrally truncated Hilbert space.
//!
//! The crate provides:
//!
//! - a diagonal spectral calculus with exponentially weighted norms
//!   ([`spectral`]);
//! - continuity moduli, nonlinearity metadata, and grid-certified checks of
//!   the structural hypotheses linking them ([`modulus`]);
//! - coefficient extension and bump smoothing with measured estimate
//!   constants and per-mode width schedules ([`mollify`]);
//! - symplectic and Runge-Kutta integration of the truncated system in
//!   physical time ([`integrate`]);
//! - the reparametrization of trajectories by `s = |A^(1/2) u|^2 - s0`,
//!   including the singular startup and the constructive recovery of time
//!   ([`reparam`]);
//! - uniqueness diagnostics: the initial-data criterion, degeneracy scans,
//!   cross-solver agreement, and the per-mode smoothed energy inequality
//!   ([`uniqueness`]).
//!
//! Everything is an immutable value after construction and all operations are
//! pure functions, so scenarios can fan out across threads freely.

// Validation uses `!(x > 0.0)` on purpose: the negated form rejects NaN
// along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emit;
pub mod error;
pub mod integrate;
pub mod interp;
pub mod modulus;
pub mod mollify;
pub mod quadrature;
pub mod reparam;
pub mod scenarios;
pub mod spectral;
pub mod table;
pub mod uniqueness;

pub use error::{Error, Result};
pub use integrate::{energy, initial_signature, integrate, IntegratorConfig, Scheme, Trajectory};
pub use modulus::{
    check_hyperbolicity_hypothesis, comparison_bound_check, estimate_l, lower_bound_check,
    ContinuityModulus, Hyperbolicity, Nonlinearity,
};
pub use mollify::{
    epsilon_for_mode, extend_coefficient, mollify, verify_mollifier_estimates, Coefficient,
    ExtendedCoefficient, MollifiedCoefficient, Mollifier,
};
pub use reparam::{
    denominator_identity, integrate_s, recover_time, s_rhs, to_s_trajectory, SIntegratorConfig,
    SState, STrajectory, StartupParams,
};
pub use spectral::{
    gevrey_norm, in_space, inner, GevreyNorm, GevreyParams, ModeVector, PhaseState,
    SpectralOperator, WeightPhi,
};
pub use table::SampledTable;
pub use uniqueness::{
    classify_eigenpair, cross_solver_agreement, energy_trace, evaluate_criterion,
    iteration_bound_check, scan_degeneracy, AgreementReport, CriterionReport, DegeneracyEvent,
    EigenpairReport, EnergyTrace, IterationBoundReport,
};
