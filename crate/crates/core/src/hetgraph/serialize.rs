//! Line-oriented text serialization of [`HeteroGraph`]: one tagged record
//! per node/edge plus a JSON metadata block. Formatting uses the shortest
//! round-trip float representation, so equal graphs serialize to equal
//! bytes.

use super::build::{HeteroGraph, MemoryNode, ResourceNode, RmEdge, RrEdge, TaskNode, TrEdge, TtEdge};
use super::dag::{DepKind, TaskId};
use super::GraphError;
use crate::scalar::Scalar;

const MAGIC: &str = "hetgraph v1";

impl<T: Scalar> HeteroGraph<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str("meta ");
        out.push_str(&serde_json::to_string(&self.metadata).expect("metadata serializes"));
        out.push('\n');
        out.push_str("ctx ");
        out.push_str(&join(&self.device_context));
        out.push('\n');
        for t in &self.tasks {
            out.push_str(&format!(
                "task {} {} {} {} {}\n",
                t.id.0,
                t.depth,
                t.dist_to_sink,
                t.critical as u8,
                join(&t.features)
            ));
        }
        for r in &self.resources {
            out.push_str(&format!(
                "res {} {} {} {} {} {} {} {} {} {}\n",
                r.core,
                r.dvfs_index,
                r.mask_bit as u8,
                r.cluster,
                r.utilization,
                r.thermal_headroom,
                r.temp_trend,
                r.bandwidth_proxy,
                r.freq_hz,
                r.power_w
            ));
        }
        for m in &self.memories {
            out.push_str(&format!(
                "mem {} {} {} {} {} {}\n",
                m.level, m.capacity_bytes, m.associativity, m.line_bytes, m.latency_proxy, m.bandwidth_proxy
            ));
        }
        for e in &self.e_tt {
            out.push_str(&format!(
                "tt {} {} {} {} {} {} {}\n",
                e.src,
                e.dst,
                e.kind.as_str(),
                e.critical as u8,
                e.hop_distance,
                e.contention_proxy,
                e.queue_delay
            ));
        }
        for e in &self.e_tr {
            out.push_str(&format!("tr {} {} {} {}\n", e.task, e.core, e.affinity, e.migration_cost));
        }
        for e in &self.e_rr {
            out.push_str(&format!("rr {} {} {} {}\n", e.a, e.b, e.sharing_degree, e.interconnect_latency));
        }
        for e in &self.e_rm {
            out.push_str(&format!("rm {} {} {} {}\n", e.core, e.mem, e.access_frequency, e.bandwidth_allocation));
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(parse_err("missing header"));
        }
        let meta_line = lines.next().ok_or_else(|| parse_err("missing metadata"))?;
        let metadata = serde_json::from_str(
            meta_line.strip_prefix("meta ").ok_or_else(|| parse_err("missing meta tag"))?,
        )
        .map_err(|e| parse_err(&format!("metadata: {e}")))?;
        let ctx_line = lines.next().ok_or_else(|| parse_err("missing context"))?;
        let device_context =
            split_nums(ctx_line.strip_prefix("ctx ").ok_or_else(|| parse_err("missing ctx tag"))?, ';')?;

        let mut g = HeteroGraph {
            tasks: Vec::new(),
            resources: Vec::new(),
            memories: Vec::new(),
            e_tt: Vec::new(),
            e_tr: Vec::new(),
            e_rr: Vec::new(),
            e_rm: Vec::new(),
            device_context,
            metadata,
        };
        for line in lines {
            let mut parts = line.split(' ');
            let tag = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            match tag {
                "end" => return Ok(g),
                "task" => {
                    if rest.len() != 5 {
                        return Err(parse_err("task record needs 5 fields"));
                    }
                    g.tasks.push(TaskNode {
                        id: TaskId(int(rest[0])? as u32),
                        depth: int(rest[1])?,
                        dist_to_sink: int(rest[2])?,
                        critical: rest[3] == "1",
                        features: split_nums(rest[4], ';')?,
                    });
                }
                "res" => {
                    if rest.len() != 10 {
                        return Err(parse_err("res record needs 10 fields"));
                    }
                    g.resources.push(ResourceNode {
                        core: int(rest[0])?,
                        dvfs_index: int(rest[1])?,
                        mask_bit: rest[2] == "1",
                        cluster: int(rest[3])?,
                        utilization: num(rest[4])?,
                        thermal_headroom: num(rest[5])?,
                        temp_trend: num(rest[6])?,
                        bandwidth_proxy: num(rest[7])?,
                        freq_hz: num(rest[8])?,
                        power_w: num(rest[9])?,
                    });
                }
                "mem" => {
                    if rest.len() != 6 {
                        return Err(parse_err("mem record needs 6 fields"));
                    }
                    g.memories.push(MemoryNode {
                        level: int(rest[0])? as u32,
                        capacity_bytes: num(rest[1])?,
                        associativity: num(rest[2])?,
                        line_bytes: num(rest[3])?,
                        latency_proxy: num(rest[4])?,
                        bandwidth_proxy: num(rest[5])?,
                    });
                }
                "tt" => {
                    if rest.len() != 7 {
                        return Err(parse_err("tt record needs 7 fields"));
                    }
                    g.e_tt.push(TtEdge {
                        src: int(rest[0])?,
                        dst: int(rest[1])?,
                        kind: DepKind::parse(rest[2]).ok_or_else(|| parse_err("bad dep kind"))?,
                        critical: rest[3] == "1",
                        hop_distance: num(rest[4])?,
                        contention_proxy: num(rest[5])?,
                        queue_delay: num(rest[6])?,
                    });
                }
                "tr" => {
                    g.e_tr.push(TrEdge {
                        task: int(rest[0])?,
                        core: int(rest[1])?,
                        affinity: num(rest[2])?,
                        migration_cost: num(rest[3])?,
                    });
                }
                "rr" => {
                    g.e_rr.push(RrEdge {
                        a: int(rest[0])?,
                        b: int(rest[1])?,
                        sharing_degree: num(rest[2])?,
                        interconnect_latency: num(rest[3])?,
                    });
                }
                "rm" => {
                    g.e_rm.push(RmEdge {
                        core: int(rest[0])?,
                        mem: int(rest[1])?,
                        access_frequency: num(rest[2])?,
                        bandwidth_allocation: num(rest[3])?,
                    });
                }
                other => return Err(parse_err(&format!("unknown record tag `{other}`"))),
            }
        }
        Err(parse_err("missing end marker"))
    }
}

fn parse_err(msg: &str) -> GraphError {
    GraphError::InvalidArgument(format!("graph text: {msg}"))
}

fn join<T: Scalar>(vals: &[T]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn split_nums<T: Scalar>(s: &str, sep: char) -> Result<Vec<T>, GraphError> {
    s.split(sep).map(num).collect()
}

fn num<T: Scalar>(s: &str) -> Result<T, GraphError> {
    // Shortest round-trip representations parse exactly through f64.
    s.parse::<f64>().map(T::c).map_err(|e| parse_err(&format!("bad number `{s}`: {e}")))
}

fn int(s: &str) -> Result<usize, GraphError> {
    s.parse().map_err(|e| parse_err(&format!("bad integer `{s}`: {e}")))
}

#[cfg(test)]
mod tests {
    use crate::hetgraph::{
        build_hetero_graph, Action, DagEdge, DepKind, DeviceSheet, HeteroGraph, RuntimeState, TaskDag,
        TaskSpec,
    };

    #[test]
    fn text_round_trip_is_exact() {
        let dag = TaskDag::new(
            vec![TaskSpec::new(0, 0.45), TaskSpec::new(1, 2.25)],
            vec![DagEdge::new(0, 1, DepKind::Data, 64.0)],
        )
        .unwrap();
        let cfg = crate::config::KeyedConfig::parse(
            "device.id = dev0\n\
             device.cores = 2\n\
             device.cluster_of_core = 0;0\n\
             device.cluster.0.freqs_ghz = 0.6;1.0;1.4\n\
             device.cluster.0.power = 0.9;0.4;0.15\n\
             device.cache.0 = 1;32768;4;64;4;32\n\
             device.tmax = 70\n",
        )
        .unwrap();
        let sheet: DeviceSheet<f64> = DeviceSheet::from_config(&cfg).unwrap();
        let state = RuntimeState::idle(&sheet, 25.0);
        let action = Action::new(vec![true, true], vec![1, 2]);
        let g = build_hetero_graph(&dag, &sheet, &state, &action).unwrap();
        let text = g.to_text();
        let parsed = HeteroGraph::from_text(&text).unwrap();
        assert_eq!(g, parsed);
        assert_eq!(text, parsed.to_text());
    }
}
