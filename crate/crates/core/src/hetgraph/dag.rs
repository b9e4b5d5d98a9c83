//! Task DAG, structural metrics, Brent bounds, and small-chain merging.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::scalar::Scalar;

/// Stable task identifier. Ids survive chain merging (merged nodes get
/// fresh ids) so provenance maps stay unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Dependency kind of a DAG edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepKind {
    Spawn,
    Join,
    Data,
}

impl DepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DepKind::Spawn => "spawn",
            DepKind::Join => "join",
            DepKind::Data => "data",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spawn" => Some(DepKind::Spawn),
            "join" => Some(DepKind::Join),
            "data" => Some(DepKind::Data),
            _ => None,
        }
    }
}

/// Canonical layout of the per-task control-flow feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfgFeature {
    LoopCount = 0,
    MaxLoopDepth = 1,
    CyclomaticComplexity = 2,
    BranchCount = 3,
    ArithmeticOps = 4,
    MemoryOps = 5,
    ArithmeticIntensity = 6,
    ArrayAccesses = 7,
    PointerOps = 8,
    BranchDensity = 9,
    RecursionFlag = 10,
    PragmaFlag = 11,
}

pub const CFG_FEATURE_COUNT: usize = 12;

/// Compile-time task descriptors: instruction count, bytes moved, spawned
/// parallelism, and a branch proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticFeatures<T> {
    pub instructions: T,
    pub bytes_moved: T,
    pub parallel_degree: T,
    pub branch_proxy: T,
}

impl<T: Scalar> Default for StaticFeatures<T> {
    fn default() -> Self {
        Self {
            instructions: T::zero(),
            bytes_moved: T::zero(),
            parallel_degree: T::zero(),
            branch_proxy: T::zero(),
        }
    }
}

/// Run-dependent task descriptors. `fan_in`/`fan_out` are recomputed from
/// the topology whenever a [`TaskDag`] is constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicFeatures<T> {
    pub input_size: T,
    pub iteration_count: T,
    pub fan_in: T,
    pub fan_out: T,
    pub prior_counter: T,
    pub run_mode_flag: T,
    pub thermal_footprint: T,
}

impl<T: Scalar> Default for DynamicFeatures<T> {
    fn default() -> Self {
        Self {
            input_size: T::zero(),
            iteration_count: T::zero(),
            fan_in: T::zero(),
            fan_out: T::zero(),
            prior_counter: T::zero(),
            run_mode_flag: T::zero(),
            thermal_footprint: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec<T> {
    pub id: TaskId,
    /// Execution-time estimate in seconds; strictly positive.
    pub weight: T,
    /// Control-flow feature vector; length uniform across the DAG.
    pub cfg_features: Vec<T>,
    pub static_features: StaticFeatures<T>,
    pub dynamic_features: DynamicFeatures<T>,
}

impl<T: Scalar> TaskSpec<T> {
    /// Minimal task with zeroed features, for tests and builders.
    pub fn new(id: u32, weight: T) -> Self {
        Self {
            id: TaskId(id),
            weight,
            cfg_features: vec![T::zero(); CFG_FEATURE_COUNT],
            static_features: StaticFeatures::default(),
            dynamic_features: DynamicFeatures::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagEdge<T> {
    pub src: TaskId,
    pub dst: TaskId,
    pub kind: DepKind,
    /// Data volume carried by the dependency, in bytes.
    pub data_bytes: T,
}

impl<T: Scalar> DagEdge<T> {
    pub fn new(src: u32, dst: u32, kind: DepKind, data_bytes: T) -> Self {
        Self { src: TaskId(src), dst: TaskId(dst), kind, data_bytes }
    }
}

/// Validated task DAG: unique ids, existing endpoints, positive weights,
/// uniform feature lengths, and acyclicity (a topological order exists).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDag<T> {
    tasks: Vec<TaskSpec<T>>,
    edges: Vec<DagEdge<T>>,
    index: BTreeMap<TaskId, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl<T: Scalar> TaskDag<T> {
    pub fn new(mut tasks: Vec<TaskSpec<T>>, edges: Vec<DagEdge<T>>) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if !(t.weight > T::zero()) {
                return Err(GraphError::InvalidArgument(format!(
                    "task {} has non-positive weight",
                    t.id
                )));
            }
            if index.insert(t.id, i).is_some() {
                return Err(GraphError::DuplicateNodeId(t.id));
            }
        }
        if let Some(first) = tasks.first() {
            let len = first.cfg_features.len();
            if tasks.iter().any(|t| t.cfg_features.len() != len) {
                return Err(GraphError::InvalidArgument(
                    "cfg feature vectors have inconsistent lengths".into(),
                ));
            }
        }
        let n = tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for e in &edges {
            let s = *index.get(&e.src).ok_or(GraphError::UnknownNode(e.src))?;
            let d = *index.get(&e.dst).ok_or(GraphError::UnknownNode(e.dst))?;
            succs[s].push(d);
            preds[d].push(s);
        }
        let topo = topo_order(n, &preds, &succs)?;
        for i in 0..n {
            tasks[i].dynamic_features.fan_in = T::c(preds[i].len() as f64);
            tasks[i].dynamic_features.fan_out = T::c(succs[i].len() as f64);
        }
        Ok(Self { tasks, edges, index, preds, succs, topo })
    }

    pub fn tasks(&self) -> &[TaskSpec<T>] {
        &self.tasks
    }

    pub fn edges(&self) -> &[DagEdge<T>] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index_of(&self, id: TaskId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// Indices in a topological order (ready nodes taken in ascending id).
    pub fn topo(&self) -> &[usize] {
        &self.topo
    }
}

/// Kahn's algorithm; ready nodes are consumed in ascending id order so the
/// result is deterministic.
fn topo_order(n: usize, preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>, GraphError> {
    let mut remaining: Vec<usize> = preds.iter().map(|p| p.len()).collect();
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| remaining[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(i);
        for &s in &succs[i] {
            remaining[s] -= 1;
            if remaining[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() != n {
        return Err(GraphError::CyclicGraph);
    }
    Ok(order)
}

/// Structural metrics of a task DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct DagMetrics<T> {
    /// Longest weighted directed path (minimum makespan at infinite parallelism).
    pub span: T,
    /// Total computation across all tasks.
    pub work: T,
    /// `work / span`.
    pub avg_parallelism: T,
    /// Longest shortest directed distance over reachable ordered pairs, in hops.
    pub diameter: usize,
    /// `|E| / (|V| (|V|-1))`; zero for a single node.
    pub density: T,
    /// Number of tasks per longest-path depth level.
    pub width_profile: Vec<usize>,
    pub max_width: usize,
    /// Longest-path depth from sources, in hops, per task index.
    pub depth: Vec<usize>,
    /// Longest-path distance to a sink, in hops, per task index.
    pub dist_to_sink: Vec<usize>,
}

/// Span, work, diameter, density, and width profile of `dag`.
pub fn dag_metrics<T: Scalar>(dag: &TaskDag<T>) -> Result<DagMetrics<T>, GraphError> {
    if dag.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let n = dag.len();
    let topo = dag.topo();

    let mut depth = vec![0usize; n];
    for &v in topo {
        depth[v] = dag.preds(v).iter().map(|&p| depth[p] + 1).max().unwrap_or(0);
    }
    let mut dist_to_sink = vec![0usize; n];
    for &v in topo.iter().rev() {
        dist_to_sink[v] = dag.succs(v).iter().map(|&s| dist_to_sink[s] + 1).max().unwrap_or(0);
    }

    // Longest weighted path ending at each node, over the topological order.
    let mut ending = vec![T::zero(); n];
    for &v in topo {
        let best = dag
            .preds(v)
            .iter()
            .map(|&p| ending[p])
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        ending[v] = best + dag.tasks()[v].weight;
    }
    let span = ending.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
    let work = dag.tasks().iter().map(|t| t.weight).fold(T::zero(), |a, b| a + b);

    let diameter = directed_diameter(dag);
    let density = if n > 1 {
        T::c(dag.edges().len() as f64) / T::c((n * (n - 1)) as f64)
    } else {
        T::zero()
    };

    let levels = depth.iter().copied().max().unwrap_or(0) + 1;
    let mut width_profile = vec![0usize; levels];
    for &d in &depth {
        width_profile[d] += 1;
    }
    let max_width = width_profile.iter().copied().max().unwrap_or(0);

    Ok(DagMetrics {
        span,
        work,
        avg_parallelism: work / span,
        diameter,
        density,
        width_profile,
        max_width,
        depth,
        dist_to_sink,
    })
}

/// Max over reachable ordered pairs of the shortest directed distance.
/// A DAG with no edges has diameter 0.
fn directed_diameter<T: Scalar>(dag: &TaskDag<T>) -> usize {
    let n = dag.len();
    let mut best = 0usize;
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[start] = 0;
        queue.clear();
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &s in dag.succs(v) {
                if dist[s] == usize::MAX {
                    dist[s] = dist[v] + 1;
                    best = best.max(dist[s]);
                    queue.push_back(s);
                }
            }
        }
    }
    best
}

/// Greedy-scheduling makespan bounds for `p` processors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentBound<T> {
    /// `work / p + span`: no greedy schedule exceeds this.
    pub upper: T,
    /// `max(span, work / p)`: no schedule beats this.
    pub lower: T,
}

pub fn brent_bound<T: Scalar>(dag: &TaskDag<T>, p: usize) -> Result<BrentBound<T>, GraphError> {
    if p < 1 {
        return Err(GraphError::InvalidArgument("processor count must be >= 1".into()));
    }
    let m = dag_metrics(dag)?;
    let per_proc = m.work / T::c(p as f64);
    Ok(BrentBound { upper: per_proc + m.span, lower: if m.span > per_proc { m.span } else { per_proc } })
}

/// The critical path as a sequence of task indices, source to sink.
/// Ties between equal-weight paths break toward the lexicographically
/// smallest node-id sequence.
pub fn critical_path<T: Scalar>(dag: &TaskDag<T>) -> Vec<usize> {
    if dag.is_empty() {
        return Vec::new();
    }
    let n = dag.len();
    // Longest weighted path starting at each node.
    let mut starting = vec![T::zero(); n];
    for &v in dag.topo().iter().rev() {
        let best = dag
            .succs(v)
            .iter()
            .map(|&s| starting[s])
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        starting[v] = best + dag.tasks()[v].weight;
    }
    let mut start: Option<usize> = None;
    for v in 0..n {
        if !dag.preds(v).is_empty() {
            continue;
        }
        start = match start {
            None => Some(v),
            Some(cur) => {
                let better = starting[v] > starting[cur]
                    || (starting[v] == starting[cur] && dag.tasks()[v].id < dag.tasks()[cur].id);
                Some(if better { v } else { cur })
            }
        };
    }
    let mut path = Vec::new();
    let mut v = start.expect("non-empty dag has a source");
    loop {
        path.push(v);
        if dag.succs(v).is_empty() {
            break;
        }
        let mut next = dag.succs(v)[0];
        for &s in &dag.succs(v)[1..] {
            if starting[s] > starting[next]
                || (starting[s] == starting[next] && dag.tasks()[s].id < dag.tasks()[next].id)
            {
                next = s;
            }
        }
        v = next;
    }
    path
}

/// Map from each merged node id to the original ids it replaced, in chain order.
pub type Provenance = BTreeMap<TaskId, Vec<TaskId>>;

/// Collapse maximal chains whose every member weighs strictly less than
/// `threshold`. A chain link is an edge `u -> v` with out-degree(u) = 1 and
/// in-degree(v) = 1. Merged nodes get fresh ids; the provenance map allows
/// replaying merges to recover the original node multiset.
pub fn merge_small_chains<T: Scalar>(
    dag: &TaskDag<T>,
    threshold: T,
) -> (TaskDag<T>, Provenance) {
    let n = dag.len();
    let small = |i: usize| dag.tasks()[i].weight < threshold;
    // next[i] = j when i -> j is a chain link between two small tasks.
    let mut next = vec![usize::MAX; n];
    let mut has_prev = vec![false; n];
    for i in 0..n {
        if dag.succs(i).len() != 1 {
            continue;
        }
        let j = dag.succs(i)[0];
        if dag.preds(j).len() == 1 && small(i) && small(j) {
            next[i] = j;
            has_prev[j] = true;
        }
    }

    // Walk maximal runs from their heads, in input order.
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for head in 0..n {
        if next[head] == usize::MAX || has_prev[head] {
            continue;
        }
        let mut run = vec![head];
        let mut cur = head;
        while next[cur] != usize::MAX {
            cur = next[cur];
            run.push(cur);
        }
        for &m in &run {
            group_of[m] = groups.len();
        }
        groups.push(run);
    }

    if groups.is_empty() {
        return (dag.clone(), Provenance::new());
    }

    let max_id = dag.tasks().iter().map(|t| t.id.0).max().unwrap_or(0);
    let mut provenance = Provenance::new();
    let mut tasks: Vec<TaskSpec<T>> = Vec::new();
    for (i, t) in dag.tasks().iter().enumerate() {
        if group_of[i] == usize::MAX {
            tasks.push(t.clone());
        } else if groups[group_of[i]][0] == i {
            // Head of its run: emit the merged node in its place.
            let gi = group_of[i];
            let merged_id = TaskId(max_id + 1 + gi as u32);
            let members = &groups[gi];
            tasks.push(merge_specs(dag, members, merged_id));
            provenance.insert(merged_id, members.iter().map(|&m| dag.tasks()[m].id).collect());
        }
    }

    let resolve = |i: usize| -> TaskId {
        if group_of[i] == usize::MAX {
            dag.tasks()[i].id
        } else {
            TaskId(max_id + 1 + group_of[i] as u32)
        }
    };
    let mut edges = Vec::new();
    for e in dag.edges() {
        let s = dag.index_of(e.src).unwrap();
        let d = dag.index_of(e.dst).unwrap();
        if group_of[s] != usize::MAX && group_of[s] == group_of[d] {
            continue; // internal chain edge
        }
        edges.push(DagEdge { src: resolve(s), dst: resolve(d), kind: e.kind, data_bytes: e.data_bytes });
    }

    let merged = TaskDag::new(tasks, edges).expect("chain contraction preserves acyclicity");
    (merged, provenance)
}

/// Feature aggregation for a merged chain: weights, bytes, and count-like
/// features sum; flags OR; depth-like features take the max; ratio features
/// take the weight-weighted mean. Fan degrees are recomputed on rebuild.
fn merge_specs<T: Scalar>(dag: &TaskDag<T>, members: &[usize], id: TaskId) -> TaskSpec<T> {
    let specs: Vec<&TaskSpec<T>> = members.iter().map(|&m| &dag.tasks()[m]).collect();
    let total_weight = specs.iter().map(|s| s.weight).fold(T::zero(), |a, b| a + b);
    let wmean = |f: &dyn Fn(&TaskSpec<T>) -> T| -> T {
        specs.iter().map(|s| f(s) * s.weight).fold(T::zero(), |a, b| a + b) / total_weight
    };
    let sum = |f: &dyn Fn(&TaskSpec<T>) -> T| -> T {
        specs.iter().map(|s| f(s)).fold(T::zero(), |a, b| a + b)
    };
    let maxf = |f: &dyn Fn(&TaskSpec<T>) -> T| -> T {
        specs.iter().map(|s| f(s)).fold(T::neg_infinity(), |a, b| if b > a { b } else { a })
    };

    let len = specs[0].cfg_features.len();
    let mut cfg = vec![T::zero(); len];
    for (k, slot) in cfg.iter_mut().enumerate() {
        let get = |s: &TaskSpec<T>| s.cfg_features[k];
        *slot = if len == CFG_FEATURE_COUNT {
            match k {
                k if k == CfgFeature::MaxLoopDepth as usize => maxf(&get),
                k if k == CfgFeature::ArithmeticIntensity as usize
                    || k == CfgFeature::BranchDensity as usize =>
                {
                    wmean(&get)
                }
                k if k == CfgFeature::RecursionFlag as usize
                    || k == CfgFeature::PragmaFlag as usize =>
                {
                    maxf(&get)
                }
                _ => sum(&get),
            }
        } else {
            sum(&get)
        };
    }

    TaskSpec {
        id,
        weight: total_weight,
        cfg_features: cfg,
        static_features: StaticFeatures {
            instructions: sum(&|s| s.static_features.instructions),
            bytes_moved: sum(&|s| s.static_features.bytes_moved),
            parallel_degree: maxf(&|s| s.static_features.parallel_degree),
            branch_proxy: sum(&|s| s.static_features.branch_proxy),
        },
        dynamic_features: DynamicFeatures {
            input_size: maxf(&|s| s.dynamic_features.input_size),
            iteration_count: sum(&|s| s.dynamic_features.iteration_count),
            fan_in: T::zero(),
            fan_out: T::zero(),
            prior_counter: wmean(&|s| s.dynamic_features.prior_counter),
            run_mode_flag: maxf(&|s| s.dynamic_features.run_mode_flag),
            thermal_footprint: sum(&|s| s.dynamic_features.thermal_footprint),
        },
    }
}
