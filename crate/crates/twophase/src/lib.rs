//! Simulation and analytic-verification toolkit for one-dimensional
//! diffusions whose drift depends on the distance to the running maximum:
//! a transient drift applies while the path is within a window gamma of its
//! maximum, a recurrent drift applies otherwise.
//!
//! The crate computes scale functions, onset-location hazards, hitting
//! probabilities and closed-form speed constants; samples the onset-location
//! chain exactly by inverse cumulative hazard; simulates discretized paths
//! with regeneration-cycle statistics; classifies transience/recurrence by
//! exact rule matching with a heuristic divergence diagnostic as fallback;
//! and ships a verification suite tying the Monte Carlo layer to the
//! analytic layer.
//!
//! Everything Monte Carlo is driven by counter-based RNG streams, so
//! parallel (rayon, default feature `parallel`) and serial runs produce
//! bitwise-identical results.

pub mod analytic;
pub mod config;
pub mod model;
pub mod par;
pub mod quad;
pub mod regeneration;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use analytic::{closed_forms, ClosedFormBundle, RecurrentLevel};
pub use model::{validate_model, DownCrossing, DriftFunction, Mode, ScaleData, TwoPhaseModel};
pub use regeneration::{classify, divergence_diagnostic, simulate_chain, Verdict};
pub use simulate::{estimate_speed, simulate_path, PathConfig};
