//! Desk-scale toolkit for uncertainty-aware performance prediction of task
//! DAGs on heterogeneous multicore devices.
//!
//! The pipeline: build typed task/resource/memory graphs from a task DAG,
//! a device sheet, runtime state, and a scheduling action ([`hetgraph`]);
//! generate telemetry from a synthetic DVFS/thermal device model
//! ([`simenv`]); preprocess telemetry into train/val/test splits
//! ([`dataset`]); train a heterogeneous graph-attention surrogate with
//! evidential (Normal-Inverse-Gamma) heads ([`surrogate`], [`evidential`],
//! [`training`]); evaluate prediction, ranking, and calibration quality
//! ([`metrics`]); and drive uncertainty-gated action selection and Dyna-Q
//! planning ([`scheduler`]).
//!
//! Numeric code is generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the pipeline itself runs at [`F`] = `f64`.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod evidential;
pub mod hetgraph;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scheduler;
pub mod simenv;
pub mod special;
pub mod surrogate;
pub mod training;

/// Scalar type used by the concrete pipeline (data generation, training,
/// scheduling, CLI artifacts). The math modules stay generic.
pub type F = f64;

/// Task DAG at pipeline precision.
pub type Dag = hetgraph::TaskDag<F>;
/// Heterogeneous graph at pipeline precision.
pub type Graph = hetgraph::HeteroGraph<F>;
/// Device sheet at pipeline precision.
pub type Sheet = hetgraph::DeviceSheet<F>;
