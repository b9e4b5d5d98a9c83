//! Task-DAG data model, heterogeneous task/resource/memory graph
//! construction, and classical DAG metrics (span, work, Brent bound,
//! diameter, density, width).

mod build;
mod dag;
mod device;
mod serialize;

pub use build::{
    build_hetero_graph, GraphMetadata, HeteroGraph, MemoryNode, ResourceNode, RmEdge, RrEdge,
    Source, TaskNode, TrEdge, TtEdge, DEVICE_CONTEXT_DIM, DVFS_ONEHOT_DIM,
};
pub use dag::{
    brent_bound, critical_path, dag_metrics, merge_small_chains, BrentBound, CfgFeature,
    DagEdge, DagMetrics, DepKind, DynamicFeatures, Provenance, StaticFeatures, TaskDag, TaskId,
    TaskSpec, CFG_FEATURE_COUNT,
};
pub use device::{Action, CacheLevel, DeviceSheet, DvfsTable, RuntimeState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph contains a cycle")]
    CyclicGraph,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("duplicate node id {0}")]
    DuplicateNodeId(TaskId),
    #[error("edge references unknown node id {0}")]
    UnknownNode(TaskId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible action: {0}")]
    InfeasibleAction(String),
    #[error("invalid device sheet: {0}")]
    InvalidSheet(String),
}
