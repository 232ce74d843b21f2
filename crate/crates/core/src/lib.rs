//! Convenient one-step integrators for Stratonovich SDEs and SPDEs.
//!
//! Any deterministic explicit one-step map becomes a Stratonovich scheme when
//! applied to the frozen field `f + Σ_m g_m ΔW_m/Δt`. This crate provides the
//! SRK, integrating-factor (SIFRK) and exponential (SETDRK) families built on
//! that substitution, a few exponential Itô schemes, contour evaluation of the
//! exponential coefficient functions, a pseudo-spectral 1D model layer and a
//! strong-convergence harness.

pub mod calculus;
pub mod error;
pub mod harness;
pub mod models;
pub mod noise;
pub mod phi_functions;
pub mod schemes;
pub mod sde_core;
pub mod state;

pub use calculus::{commutativity_report, lie_bracket, Classification, CommutativityReport};
pub use error::{Error, Result};
pub use harness::{
    emit_report, fit_order, run_efficiency, run_strong_convergence, ConvergenceRecord,
    ErrorMetric, ExperimentConfig, LevelWindow, Reference, SlopeFit,
};
pub use models::{
    build_problem, diffusion_field, linear_symbol, nonlinear_flux, travelling_wave_solution,
    InitialCondition, ModelConfig, NoiseBasisSpec, SpdeCoefficients, SpectralGrid1D, SpectralSpde,
};
pub use noise::{coarsen_paths, generate_paths, BrownianPaths, NestedIndex};
pub use phi_functions::{
    contour_phi_eval, etd_coefficient_set, CoefficientCache, ContourConfig, EtdCoefficientSet,
    EtdScheme, PhiFunction,
};
pub use schemes::{
    calibrate_esspifsrk22_form, integrate_path, step_ito, step_setdrk, step_sifrk, step_srk, ButcherTableau, Csetdrk1Form,
    Esspifsrk22Form, Integrator, OrderProfile, SchemeId, Trajectory,
};
pub use sde_core::{field, modified_drift, Calculus, Field, Increment, SdeProblem, SplitField};
pub use state::{StateVector, C64};
