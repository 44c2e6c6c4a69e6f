//! Federated training over the device, air, satellite hierarchy.

pub mod aggregate;
pub mod data;
pub mod divergence;
pub mod learner;
mod run;

pub use run::{
    centralized_accuracy, run_hierarchical, Federation, GlobalRecord, SatelliteRecord, TrainingTrace,
};
