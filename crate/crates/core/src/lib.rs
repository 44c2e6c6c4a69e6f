//! Hierarchical federated learning over a space-air-ground network.
//!
//! Devices train locally, air nodes and satellites aggregate, and satellites
//! synchronize with ring allreduce. The crate builds constellations, assigns
//! air nodes to satellites, models time cost, and runs the training loop with
//! convergence diagnostics.

pub mod allreduce;
pub mod assignment;
pub mod config;
pub mod coverage;
pub mod error;
pub mod experiment;
pub mod fl;
pub mod partition;
pub mod scalar;
pub mod scenario;
pub mod timecost;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelVectorF64 = allreduce::ModelVector<f64>;
pub type ModelVectorF32 = allreduce::ModelVector<f32>;
pub type DatasetF64 = fl::data::Dataset<f64>;
pub type DatasetF32 = fl::data::Dataset<f32>;
pub type TrainingTraceF64 = fl::TrainingTrace<f64>;
pub type TrainingTraceF32 = fl::TrainingTrace<f32>;
pub type FederationF64 = fl::Federation<f64>;
pub type FederationF32 = fl::Federation<f32>;
