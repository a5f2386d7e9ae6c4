//! Simulation engine for the one-dimensional Burridge-Knopoff spring-block
//! earthquake model with asymmetric velocity-weakening friction.
//!
//! The chain is integrated with a fixed-step AB2/AM3 predictor-corrector
//! ([`adams`]), stick/slip transitions are resolved per step
//! ([`integrator`]), earthquakes are segmented and sized ([`events`]) and
//! turned into Gutenberg-Richter statistics ([`stats`]). [`scaling`] runs the
//! block-doubling continuum study; [`io`] holds configuration and file
//! formats.

pub mod adams;
pub mod error;
pub mod events;
pub mod integrator;
pub mod io;
pub mod model;
pub mod run;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};
pub use events::{magnitude, EventCatalog, EventDetector, EventRecord};
pub use integrator::{integrate, warm_up, Integrator, IntegratorConfig, StepObserver, TrajectorySample};
pub use model::{
    acceleration, dynamic_friction, net_elastic_force, stick_release_check, FrictionParams, History, ModelParams,
    SystemState,
};
pub use run::{catalog_slip_rate, simulate, simulate_batch, RecordOptions, RunOutput};
pub use scaling::{rescale, run_scaling_suite, ScalingLevel};
pub use stats::{
    build_distribution, common_support, distance_on_support, distribution_distance, fit_gr_slope, GrFit, LogBase,
    MagnitudeDistribution, Norm,
};
