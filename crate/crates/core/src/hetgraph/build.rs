//! Heterogeneous graph construction from (DAG, device sheet, runtime
//! state, action).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dag::{critical_path, dag_metrics, DepKind, Provenance, TaskDag, TaskId};
use super::device::{Action, DeviceSheet, RuntimeState};
use super::GraphError;
use crate::scalar::Scalar;

/// Fixed capacity of the DVFS one-hot block in resource node features.
pub const DVFS_ONEHOT_DIM: usize = 16;
/// Length of the broadcast device-context vector.
pub const DEVICE_CONTEXT_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(Source::Real),
            "synthetic" => Some(Source::Synthetic),
            _ => None,
        }
    }
}

/// Task node: raw features plus topological encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode<T> {
    pub id: TaskId,
    pub features: Vec<T>,
    pub depth: usize,
    pub dist_to_sink: usize,
    pub critical: bool,
}

/// Resource node: one per core, whether or not its mask bit is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceNode<T> {
    pub core: usize,
    pub dvfs_index: usize,
    pub mask_bit: bool,
    pub cluster: usize,
    pub utilization: T,
    /// `t_max - temperature` of the core's thermal zone.
    pub thermal_headroom: T,
    pub temp_trend: T,
    pub bandwidth_proxy: T,
    /// Frequency selected by the action, in Hz.
    pub freq_hz: T,
    /// Power draw at the selected level, in Watts.
    pub power_w: T,
}

/// Memory node: one per cache level declared in the device sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryNode<T> {
    pub level: u32,
    pub capacity_bytes: T,
    pub associativity: T,
    pub line_bytes: T,
    pub latency_proxy: T,
    pub bandwidth_proxy: T,
}

/// Task-task dependency edge mirroring the DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtEdge<T> {
    pub src: usize,
    pub dst: usize,
    pub kind: DepKind,
    pub critical: bool,
    /// Topological depth gap between endpoints, in hops.
    pub hop_distance: T,
    /// Data volume transferred along the dependency, in bytes.
    pub contention_proxy: T,
    /// Optional queue-delay estimate; no defining formula exists, so it
    /// defaults to zero.
    pub queue_delay: T,
}

/// Task-to-core placement edge (modeled bidirectionally by the surrogate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrEdge<T> {
    pub task: usize,
    pub core: usize,
    pub affinity: T,
    pub migration_cost: T,
}

/// Same-cluster core pair (undirected).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrEdge<T> {
    pub a: usize,
    pub b: usize,
    pub sharing_degree: T,
    pub interconnect_latency: T,
}

/// Core-to-cache edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmEdge<T> {
    pub core: usize,
    pub mem: usize,
    pub access_frequency: T,
    pub bandwidth_allocation: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    pub source: Source,
    pub seed: u64,
    pub device_id: String,
    /// Logical timestamp supplied by the caller; wall-clock time would break
    /// reproducible serialization.
    pub timestamp: f64,
    pub provenance: BTreeMap<String, Vec<String>>,
}

/// The surrogate's sole input: typed node sets, four typed edge sets, a
/// broadcast device-context vector, and provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroGraph<T> {
    pub tasks: Vec<TaskNode<T>>,
    pub resources: Vec<ResourceNode<T>>,
    pub memories: Vec<MemoryNode<T>>,
    pub e_tt: Vec<TtEdge<T>>,
    pub e_tr: Vec<TrEdge<T>>,
    pub e_rr: Vec<RrEdge<T>>,
    pub e_rm: Vec<RmEdge<T>>,
    pub device_context: Vec<T>,
    pub metadata: GraphMetadata,
}

/// Raw task feature vector: weight, the CFG block, static block, dynamic
/// block. Heavy-tailed counts are log-compressed for conditioning.
pub(crate) fn task_raw_features<T: Scalar>(spec: &super::dag::TaskSpec<T>) -> Vec<T> {
    let mut f = Vec::with_capacity(1 + spec.cfg_features.len() + 4 + 7);
    f.push(spec.weight);
    f.extend_from_slice(&spec.cfg_features);
    let s = &spec.static_features;
    f.push(s.instructions.ln_1p());
    f.push(s.bytes_moved.ln_1p());
    f.push(s.parallel_degree);
    f.push(s.branch_proxy);
    let d = &spec.dynamic_features;
    f.push(d.input_size.ln_1p());
    f.push(d.iteration_count.ln_1p());
    f.push(d.fan_in);
    f.push(d.fan_out);
    f.push(d.prior_counter);
    f.push(d.run_mode_flag);
    f.push(d.thermal_footprint);
    f
}

fn device_context<T: Scalar>(sheet: &DeviceSheet<T>) -> Vec<T> {
    let total_cache: T = sheet
        .cache_levels
        .iter()
        .map(|c| c.capacity_bytes)
        .fold(T::zero(), |a, b| a + b);
    vec![
        T::c(sheet.core_count as f64),
        T::c(sheet.clusters.len() as f64),
        sheet.max_freq_hz() / T::c(1e9),
        T::c(sheet.clusters.iter().map(|c| c.levels()).max().unwrap_or(0) as f64),
        T::c(sheet.cache_levels.len() as f64),
        total_cache.ln_1p(),
        sheet.t_max / T::c(100.0),
        T::c(sheet.governor_flags.len() as f64),
    ]
}

/// Assemble the heterogeneous graph. Pure: identical inputs produce
/// identical (bit-equal) graphs.
///
/// Construction rules:
/// - one task node per DAG task, carrying topological encodings and
///   critical-path flags;
/// - one resource node per core, active or not (mask bit recorded);
/// - `E_TT` mirrors the DAG edges;
/// - `E_TR` connects every task to every active core;
/// - `E_RR` connects core pairs within the same cluster;
/// - `E_RM` connects each core to each declared cache level.
pub fn build_hetero_graph<T: Scalar>(
    dag: &TaskDag<T>,
    sheet: &DeviceSheet<T>,
    state: &RuntimeState<T>,
    action: &Action,
) -> Result<HeteroGraph<T>, GraphError> {
    sheet.validate()?;
    action.feasible(sheet)?;
    state.validate(sheet)?;
    let metrics = dag_metrics(dag)?;
    let cpath = critical_path(dag);
    let mut on_path = vec![false; dag.len()];
    for &i in &cpath {
        on_path[i] = true;
    }
    let mut edge_on_path = vec![false; dag.edges().len()];
    for (ei, e) in dag.edges().iter().enumerate() {
        let s = dag.index_of(e.src).unwrap();
        let d = dag.index_of(e.dst).unwrap();
        // An edge is critical when it links consecutive critical-path nodes.
        edge_on_path[ei] = cpath.windows(2).any(|w| w[0] == s && w[1] == d);
        let _ = d;
    }

    let tasks: Vec<TaskNode<T>> = dag
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, spec)| TaskNode {
            id: spec.id,
            features: task_raw_features(spec),
            depth: metrics.depth[i],
            dist_to_sink: metrics.dist_to_sink[i],
            critical: on_path[i],
        })
        .collect();

    let resources: Vec<ResourceNode<T>> = (0..sheet.core_count)
        .map(|core| {
            let table = sheet.cluster_of(core);
            let idx = action.dvfs[core].min(table.levels() - 1);
            let temp = state.zone_temps.get(core).copied().unwrap_or(T::zero());
            ResourceNode {
                core,
                dvfs_index: idx,
                mask_bit: action.mask[core],
                cluster: sheet.cluster_of_core[core],
                utilization: state.util_ema.get(core).copied().unwrap_or(T::zero()),
                thermal_headroom: sheet.t_max - temp,
                temp_trend: state.zone_trend.get(core).copied().unwrap_or(T::zero()),
                bandwidth_proxy: sheet
                    .cache_levels
                    .first()
                    .map(|c| c.bandwidth_proxy)
                    .unwrap_or(T::zero()),
                freq_hz: table.freqs_hz[idx],
                power_w: table.power_at(idx),
            }
        })
        .collect();

    let memories: Vec<MemoryNode<T>> = sheet
        .cache_levels
        .iter()
        .map(|c| MemoryNode {
            level: c.level,
            capacity_bytes: c.capacity_bytes,
            associativity: c.associativity,
            line_bytes: c.line_bytes,
            latency_proxy: c.latency_proxy,
            bandwidth_proxy: c.bandwidth_proxy,
        })
        .collect();

    let e_tt: Vec<TtEdge<T>> = dag
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            let s = dag.index_of(e.src).unwrap();
            let d = dag.index_of(e.dst).unwrap();
            TtEdge {
                src: s,
                dst: d,
                kind: e.kind,
                critical: edge_on_path[ei],
                hop_distance: T::c((metrics.depth[d] - metrics.depth[s]) as f64),
                contention_proxy: e.data_bytes,
                queue_delay: T::zero(),
            }
        })
        .collect();

    let active: Vec<usize> = action.active_cores().collect();
    let affinity = T::one() / T::c(active.len() as f64);
    let mut e_tr = Vec::with_capacity(tasks.len() * active.len());
    for t in 0..tasks.len() {
        for &core in &active {
            e_tr.push(TrEdge { task: t, core, affinity, migration_cost: T::zero() });
        }
    }

    let mut e_rr = Vec::new();
    let mut cluster_size = vec![0usize; sheet.clusters.len()];
    for &c in &sheet.cluster_of_core {
        cluster_size[c] += 1;
    }
    for a in 0..sheet.core_count {
        for b in (a + 1)..sheet.core_count {
            if sheet.cluster_of_core[a] == sheet.cluster_of_core[b] {
                e_rr.push(RrEdge {
                    a,
                    b,
                    sharing_degree: T::c(cluster_size[sheet.cluster_of_core[a]] as f64),
                    interconnect_latency: T::one(),
                });
            }
        }
    }

    let n_active = T::c(active.len() as f64);
    let mut e_rm = Vec::with_capacity(sheet.core_count * memories.len());
    for core in 0..sheet.core_count {
        for (mi, m) in memories.iter().enumerate() {
            e_rm.push(RmEdge {
                core,
                mem: mi,
                access_frequency: T::one() / T::c(m.level as f64),
                bandwidth_allocation: m.bandwidth_proxy / n_active,
            });
        }
    }

    Ok(HeteroGraph {
        tasks,
        resources,
        memories,
        e_tt,
        e_tr,
        e_rr,
        e_rm,
        device_context: device_context(sheet),
        metadata: GraphMetadata {
            source: Source::Synthetic,
            seed: 0,
            device_id: sheet.device_id.clone(),
            timestamp: 0.0,
            provenance: BTreeMap::new(),
        },
    })
}

impl<T: Scalar> HeteroGraph<T> {
    /// Attach provenance from a chain merge so merges can be replayed.
    pub fn with_provenance(mut self, prov: &Provenance) -> Self {
        self.metadata.provenance = prov
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|id| id.to_string()).collect()))
            .collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::dag::{DagEdge, TaskSpec};
    use crate::hetgraph::device::{CacheLevel, DvfsTable};

    fn sheet(cores: usize, clusters: Vec<usize>) -> DeviceSheet<f64> {
        DeviceSheet {
            device_id: "dev0".into(),
            core_count: cores,
            clusters: vec![DvfsTable { freqs_hz: vec![0.6e9, 1.0e9, 1.4e9], power_coeffs: (0.9, 0.4, 0.15) }],
            cluster_of_core: clusters,
            cache_levels: vec![CacheLevel {
                level: 1,
                capacity_bytes: 32768.0,
                associativity: 4.0,
                line_bytes: 64.0,
                latency_proxy: 4.0,
                bandwidth_proxy: 32.0,
            }],
            governor_flags: vec!["userspace".into()],
            t_max: 70.0,
            version_hash: "v1".into(),
        }
    }

    fn two_task_dag() -> TaskDag<f64> {
        TaskDag::new(
            vec![TaskSpec::new(0, 1.0), TaskSpec::new(1, 2.0)],
            vec![DagEdge::new(0, 1, DepKind::Data, 64.0)],
        )
        .unwrap()
    }

    #[test]
    fn counts_follow_construction_rules() {
        let sheet = sheet(2, vec![0, 0]);
        let state = RuntimeState::idle(&sheet, 25.0);
        let action = Action::new(vec![true, true], vec![1, 1]);
        let g = build_hetero_graph(&two_task_dag(), &sheet, &state, &action).unwrap();
        assert_eq!(g.tasks.len(), 2);
        assert_eq!(g.resources.len(), 2);
        assert_eq!(g.memories.len(), 1);
        assert_eq!(g.e_tt.len(), 1);
        assert_eq!(g.e_tr.len(), 4);
        assert_eq!(g.e_rr.len(), 1);
        assert_eq!(g.e_rm.len(), 2);
        assert_eq!(g.device_context.len(), DEVICE_CONTEXT_DIM);
    }

    #[test]
    fn single_active_core_shrinks_tr() {
        let sheet = sheet(2, vec![0, 0]);
        let state = RuntimeState::idle(&sheet, 25.0);
        let action = Action::new(vec![true, false], vec![1, 0]);
        let g = build_hetero_graph(&two_task_dag(), &sheet, &state, &action).unwrap();
        assert_eq!(g.e_tr.len(), 2); // |V_T| * 1 active core
        assert_eq!(g.resources.len(), 2); // inactive core keeps a node
        assert!(!g.resources[1].mask_bit);
    }

    #[test]
    fn critical_flags_on_diamond() {
        let dag = TaskDag::new(
            vec![
                TaskSpec::new(0, 1.0),
                TaskSpec::new(1, 4.0),
                TaskSpec::new(2, 2.0),
                TaskSpec::new(3, 1.0),
            ],
            vec![
                DagEdge::new(0, 1, DepKind::Spawn, 0.0),
                DagEdge::new(0, 2, DepKind::Spawn, 0.0),
                DagEdge::new(1, 3, DepKind::Join, 0.0),
                DagEdge::new(2, 3, DepKind::Join, 0.0),
            ],
        )
        .unwrap();
        let sheet = sheet(2, vec![0, 0]);
        let state = RuntimeState::idle(&sheet, 25.0);
        let action = Action::new(vec![true, true], vec![0, 0]);
        let g = build_hetero_graph(&dag, &sheet, &state, &action).unwrap();
        let crit: Vec<bool> = g.e_tt.iter().map(|e| e.critical).collect();
        // Edges in input order: 0->1, 0->2, 1->3, 2->3.
        assert_eq!(crit, vec![true, false, true, false]);
    }

    #[test]
    fn infeasible_actions_are_rejected() {
        let sheet = sheet(2, vec![0, 0]);
        let state = RuntimeState::idle(&sheet, 25.0);
        let empty = Action::new(vec![false, false], vec![0, 0]);
        assert!(matches!(
            build_hetero_graph(&two_task_dag(), &sheet, &state, &empty),
            Err(GraphError::InfeasibleAction(_))
        ));
        let bad_idx = Action::new(vec![true, true], vec![9, 0]);
        assert!(build_hetero_graph(&two_task_dag(), &sheet, &state, &bad_idx).is_err());
    }
}
