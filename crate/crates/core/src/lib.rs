//! Localization for pinching-antenna systems.
//!
//! The crate models a user on the ground plane observed through antennas
//! placed along one dielectric waveguide, and provides:
//!
//! - [`channel`]: geometry, complex baseband signal model, noisy observations
//!   and the least-squares residual;
//! - [`fisher`]: Jacobian, Fisher information, CRLB and position error bound;
//! - [`estimator`]: the phase-aware two-stage ML estimator and an
//!   amplitude-only WLS baseline;
//! - [`montecarlo`]: deterministic, parallel error sweeps and error maps;
//! - [`config`] and [`io`]: the text formats consumed and produced by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod grid;
pub mod io;
pub mod montecarlo;
pub mod seed;

pub use channel::{
    distance, model_signal, residual, synthesize_observation, waveguide_coefficient, AntennaLayout,
    NoiseLevel, SignalVector, SystemConfig, SystemParams, UserPosition,
};
pub use error::{Error, Result};
pub use estimator::{
    coarse_grid_search, lm_refine, ml_estimate, wls_amplitude_baseline, EstimationResult,
    Estimator, GridSearchConfig, LmConfig, MlEstimator,
};
pub use fisher::{crlb, fim, jacobian, peb_map, FisherSummary, PebMap};
pub use grid::{Bounds, GridSpec};
pub use montecarlo::{
    run_error_map, run_sweep, summarize, ErrorMap, MapSpec, SweepResult, SweepRow, SweepSpec,
    TruthSampler,
};
