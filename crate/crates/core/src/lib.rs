//! Regional gradient observability of the heat equation with Dirichlet
//! boundary conditions on intervals and rectangles.
//!
//! The crate decides whether a suite of pointwise, zonal or filament sensors
//! is gradient strategic on a subregion `ω` (rank test per eigenvalue group),
//! builds the finite-rank gradient observability Gramian, and reconstructs the
//! initial-state gradient on `ω` from simulated measurements.

// Negated comparisons are used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod gramian;
pub mod linalg;
pub mod quadrature;
pub mod reconstruction;
pub mod sensor;
pub mod spectral;
pub mod strategic;

pub use error::{Error, Result};
pub use geometry::{Coord, Domain, DomainKind, Subregion};
pub use gramian::{
    assemble_gramian, observability_constant, time_correlation, GramianOptions, GramianResult,
    ObservabilityConstant,
};
pub use quadrature::{GaussLegendre, QuadratureSpec};
pub use reconstruction::{
    estimate_coefficients, gradient_field_on_region, reconstruct, reconstruction_error, Estimate,
    EstimateOptions, GridSpec, ReconstructionError, ReconstructionResult, Regularization,
};
pub use sensor::{
    gradient_signature, simulate_output, state_signature, validate_sensor, MeasurementSeries,
    Noise, Sensor, SensorKind, SignatureForm, SignatureMode, SimulationOptions, TimeGrid, Weight,
};
pub use spectral::{
    build_basis, eval_eigenfunction, eval_eigenfunction_gradient, gradient_gram, norm_on_region,
    propagate, Adaptation, Coefficients, GradientField, ModalBasis, Mode,
};
pub use strategic::{
    assemble_gn, basis_split, corollary_condition, forbidden_sets_1d, group_eigenvalues, rank_test,
    residual_independence_check, BasisSplit, Corollary, CorollaryVerdict, EigenGroup,
    FailureReason, ForbiddenSets, RankOptions, StrategicVerdict, SuiteVerdict, Witness,
};
