//! Flow-interaction graph built from one time sample.
//!
//! Records become nodes keyed by [`FlowKey`]; a directed edge runs from
//! flow i to flow j when j starts within the temporal-locality window of
//! i and the combined similarity reaches the threshold. Record pairs are
//! enumerated with a sliding window over the time-sorted records, so cost
//! is proportional to the number of in-window pairs rather than all
//! pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowKey, NodeMode, SamplePartition};
use crate::similarity::{combined_similarity, ServicePortMap, SimilarityWeights};

/// Whether edge weights count repeat interactions or cap at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Weight = number of qualifying record pairs (WE).
    Weighted,
    /// Weight capped at 1 (UWE).
    Unweighted,
}

/// Graph construction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    /// Temporal-locality window in seconds.
    pub window: f64,
    /// Combined-similarity threshold for an edge.
    pub threshold: f64,
    pub node_mode: NodeMode,
    pub edge_mode: EdgeMode,
    /// IP protocol numbers admitted into the graph; `None` admits all.
    pub protocol_filter: Option<BTreeSet<u8>>,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            window: 0.1,
            threshold: 0.65,
            node_mode: NodeMode::FiveTuple,
            edge_mode: EdgeMode::Weighted,
            protocol_filter: Some([6u8, 17u8].into_iter().collect()),
        }
    }
}

impl BuildParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::InvalidParam(format!(
                "locality window must be positive and finite, got {}",
                self.window
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParam(format!(
                "similarity threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Directed weighted interaction graph of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MfstlGraph {
    /// Which sample the graph describes.
    pub sample_index: usize,
    /// Node id to flow key; ids follow first appearance in the record
    /// stream, so builds are deterministic.
    pub keys: Vec<FlowKey>,
    /// Directed edges `(src, dst) -> weight`; no self-loops.
    pub edges: BTreeMap<(u32, u32), u32>,
}

impl MfstlGraph {
    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Collapses edge direction: `{u, v}` is present when either directed
    /// edge is, with weights summed. Node ids are preserved.
    pub fn undirected(&self) -> SimpleGraph {
        let mut weights: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for (&(u, v), &w) in &self.edges {
            let key = if u < v { (u, v) } else { (v, u) };
            *weights.entry(key).or_insert(0) += w;
        }
        SimpleGraph::from_edges(self.keys.len(), weights.keys().copied())
    }

    /// Writes `src_key<TAB>dst_key<TAB>weight` lines in node-id order.
    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        for (&(u, v), &w) in &self.edges {
            writeln!(
                writer,
                "{}\t{}\t{}",
                self.keys[u as usize], self.keys[v as usize], w
            )?;
        }
        Ok(())
    }

    /// Writes `id<TAB>key` lines mapping node ids to flow keys.
    pub fn write_node_list<W: Write>(&self, mut writer: W) -> Result<()> {
        for (id, key) in self.keys.iter().enumerate() {
            writeln!(writer, "{id}\t{key}")?;
        }
        Ok(())
    }
}

/// Undirected simple graph on dense node ids; the surface the structural
/// characteristics are measured on.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleGraph {
    node_count: usize,
    /// Edges with `u < v`, sorted.
    edges: Vec<(u32, u32)>,
    /// Sorted neighbor lists.
    adj: Vec<Vec<u32>>,
}

impl SimpleGraph {
    /// Builds from undirected edges; `(u, v)` and `(v, u)` collapse, and
    /// self-loops are rejected by debug assertion.
    pub fn from_edges<I>(node_count: usize, edges: I) -> SimpleGraph
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
        for (u, v) in edges {
            debug_assert!(u != v, "self-loop {u}");
            debug_assert!((u as usize) < node_count && (v as usize) < node_count);
            set.insert(if u < v { (u, v) } else { (v, u) });
        }
        let edges: Vec<(u32, u32)> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        SimpleGraph {
            node_count,
            edges,
            adj,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }
}

/// Builds the interaction graph of one sample.
///
/// The node set is every distinct flow key among records passing the
/// protocol filter; it does not depend on the window or threshold. For
/// each time-ordered record pair within the window, an edge from the
/// earlier to the later flow is added when the keys differ and the
/// combined similarity is at least the threshold.
pub fn build_mfstl(
    sample: &SamplePartition,
    params: &BuildParams,
    weights: &SimilarityWeights,
    map: &ServicePortMap,
) -> Result<MfstlGraph> {
    params.validate()?;
    weights.validate()?;

    let records: Vec<&crate::flow::FlowRecord> = sample
        .records
        .iter()
        .filter(|r| {
            params
                .protocol_filter
                .as_ref()
                .is_none_or(|f| f.contains(&r.pr))
        })
        .collect();

    let mut keys: Vec<FlowKey> = Vec::new();
    let mut index: HashMap<FlowKey, u32> = HashMap::with_capacity(records.len());
    let node_ids: Vec<u32> = records
        .iter()
        .map(|r| {
            let key = FlowKey::of(r, params.node_mode);
            *index.entry(key.clone()).or_insert_with(|| {
                keys.push(key.clone());
                (keys.len() - 1) as u32
            })
        })
        .collect();

    let mut edges: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for i in 0..records.len() {
        let limit = records[i].ts + params.window;
        for j in (i + 1)..records.len() {
            if records[j].ts > limit {
                break;
            }
            let (u, v) = (node_ids[i], node_ids[j]);
            if u == v {
                continue;
            }
            if combined_similarity(records[i], records[j], weights, map) >= params.threshold {
                match params.edge_mode {
                    EdgeMode::Weighted => *edges.entry((u, v)).or_insert(0) += 1,
                    EdgeMode::Unweighted => {
                        edges.entry((u, v)).or_insert(1);
                    }
                }
            }
        }
    }

    Ok(MfstlGraph {
        sample_index: sample.index,
        keys,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowRecord, Label};

    fn flow(ts: f64, sa: &str, da: &str, sp: u16, dp: u16, pr: u8, ps: u64) -> FlowRecord {
        FlowRecord {
            ts,
            sa: sa.parse().unwrap(),
            da: da.parse().unwrap(),
            sp,
            dp,
            pr,
            ps,
            label: Some(Label::Normal),
        }
    }

    fn sample(records: Vec<FlowRecord>) -> SamplePartition {
        SamplePartition {
            index: 0,
            start: 0.0,
            records,
            label: None,
        }
    }

    fn params(window: f64, threshold: f64, edge_mode: EdgeMode) -> BuildParams {
        BuildParams {
            window,
            threshold,
            edge_mode,
            ..BuildParams::default()
        }
    }

    fn build(sample: &SamplePartition, p: &BuildParams) -> MfstlGraph {
        build_mfstl(
            sample,
            p,
            &SimilarityWeights::uniform(),
            &ServicePortMap::well_known(),
        )
        .unwrap()
    }

    #[test]
    fn test_same_key_records_collapse_without_edges() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.05, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.5, EdgeMode::Weighted));
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn test_similar_pair_within_window_gets_edge() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.05, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.9, EdgeMode::Weighted));
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges.get(&(0, 1)), Some(&1));
    }

    #[test]
    fn test_window_boundary_is_inclusive() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.1, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.5, EdgeMode::Weighted));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn test_pair_outside_window_has_no_edge() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.2, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.5, EdgeMode::Weighted));
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn test_threshold_drops_dissimilar_pairs() {
        // Different ports, protocols and payloads; only addresses align.
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1111, 2222, 6, 0),
            flow(0.05, "10.0.0.1", "10.0.0.2", 3333, 4444, 17, 999),
        ]);
        let g = build(&s, &params(0.1, 0.5, EdgeMode::Weighted));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn test_repeat_pairs_weighted_vs_capped() {
        // Keys alternate A, B, A, B and every pair is inside the window:
        // A precedes B in (r0, r1), (r0, r3), (r2, r3), while B precedes
        // A only in (r1, r2).
        let s = sample(vec![
            flow(0.00, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.02, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
            flow(0.04, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.06, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
        ]);
        let weighted = build(&s, &params(0.1, 0.9, EdgeMode::Weighted));
        assert_eq!(weighted.edges.get(&(0, 1)), Some(&3));
        assert_eq!(weighted.edges.get(&(1, 0)), Some(&1));
        let capped = build(&s, &params(0.1, 0.9, EdgeMode::Unweighted));
        assert_eq!(capped.edges.get(&(0, 1)), Some(&1));
        assert_eq!(capped.edges.get(&(1, 0)), Some(&1));
    }

    #[test]
    fn test_direction_follows_time_order() {
        let s = sample(vec![
            flow(0.00, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.02, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
            flow(0.40, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
            flow(0.42, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.9, EdgeMode::Weighted));
        assert_eq!(g.edges.get(&(0, 1)), Some(&1));
        assert_eq!(g.edges.get(&(1, 0)), Some(&1));
    }

    #[test]
    fn test_protocol_filter_excludes_records_entirely() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.01, "10.0.0.9", "10.0.0.2", 0, 0, 1, 100), // ICMP-like
        ]);
        let g = build(&s, &params(0.1, 0.0, EdgeMode::Weighted));
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn test_node_set_independent_of_window_and_threshold() {
        let records = vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1, 80, 6, 100),
            flow(0.3, "10.0.0.3", "10.0.0.4", 2, 53, 17, 60),
            flow(0.9, "10.0.0.5", "10.0.0.6", 3, 22, 6, 900),
        ];
        let s = sample(records);
        let a = build(&s, &params(0.01, 0.9, EdgeMode::Weighted));
        let b = build(&s, &params(5.0, 0.0, EdgeMode::Weighted));
        assert_eq!(a.keys, b.keys);
    }

    #[test]
    fn test_empty_sample_builds_empty_graph() {
        let g = build(&sample(Vec::new()), &params(0.1, 0.5, EdgeMode::Weighted));
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn test_matches_brute_force_on_random_records() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let map = ServicePortMap::well_known();
        let w = SimilarityWeights::uniform();
        for case in 0..25 {
            let n = rng.gen_range(0..=60);
            let records: Vec<FlowRecord> = (0..n)
                .map(|_| {
                    let mut f = flow(
                        rng.gen_range(0.0..2.0),
                        "10.0.0.1",
                        "10.0.0.2",
                        rng.gen_range(1000..1008),
                        [80u16, 53, 22][rng.gen_range(0..3)] ,
                        [6u8, 17, 1][rng.gen_range(0..3)],
                        rng.gen_range(0..4) * 100,
                    );
                    f.sa = format!("10.0.0.{}", rng.gen_range(1..6)).parse().unwrap();
                    f.da = format!("10.0.0.{}", rng.gen_range(1..6)).parse().unwrap();
                    f
                })
                .collect();
            let mut records = records;
            records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
            let s = sample(records.clone());
            let p = params(0.05 + 0.1 * (case % 3) as f64, 0.3 + 0.2 * (case % 4) as f64,
                if case % 2 == 0 { EdgeMode::Weighted } else { EdgeMode::Unweighted });
            let fast = build(&s, &p);

            // Quadratic reference: test every ordered pair directly.
            let kept: Vec<&FlowRecord> = records
                .iter()
                .filter(|r| p.protocol_filter.as_ref().unwrap().contains(&r.pr))
                .collect();
            let mut keys: Vec<FlowKey> = Vec::new();
            for r in &kept {
                let k = FlowKey::of(r, p.node_mode);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            let id_of = |r: &FlowRecord| {
                keys.iter()
                    .position(|k| *k == FlowKey::of(r, p.node_mode))
                    .unwrap() as u32
            };
            let mut edges: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            for i in 0..kept.len() {
                for j in (i + 1)..kept.len() {
                    if kept[j].ts - kept[i].ts > p.window {
                        continue;
                    }
                    let (u, v) = (id_of(kept[i]), id_of(kept[j]));
                    if u == v {
                        continue;
                    }
                    if combined_similarity(kept[i], kept[j], &w, &map) >= p.threshold {
                        match p.edge_mode {
                            EdgeMode::Weighted => *edges.entry((u, v)).or_insert(0) += 1,
                            EdgeMode::Unweighted => {
                                edges.entry((u, v)).or_insert(1);
                            }
                        }
                    }
                }
            }
            assert_eq!(fast.keys, keys, "node mismatch in case {case}");
            assert_eq!(fast.edges, edges, "edge mismatch in case {case}");
        }
    }

    #[test]
    fn test_projection_merges_directions() {
        let mut edges = BTreeMap::new();
        edges.insert((0u32, 1u32), 2u32);
        edges.insert((1, 0), 3);
        edges.insert((1, 2), 1);
        let g = MfstlGraph {
            sample_index: 0,
            keys: vec![
                FlowKey::Two { sa: "10.0.0.1".parse().unwrap(), da: "10.0.0.2".parse().unwrap() },
                FlowKey::Two { sa: "10.0.0.2".parse().unwrap(), da: "10.0.0.1".parse().unwrap() },
                FlowKey::Two { sa: "10.0.0.3".parse().unwrap(), da: "10.0.0.1".parse().unwrap() },
            ],
            edges,
        };
        let u = g.undirected();
        assert_eq!(u.edge_count(), 2);
        assert_eq!(u.neighbors(1), &[0, 2]);
    }

    #[test]
    fn test_exports_are_ordered_and_keyed() {
        let s = sample(vec![
            flow(0.0, "10.0.0.1", "10.0.0.2", 1234, 80, 6, 100),
            flow(0.02, "10.0.0.1", "10.0.0.2", 4321, 80, 6, 100),
        ]);
        let g = build(&s, &params(0.1, 0.9, EdgeMode::Weighted));
        let mut edge_out = Vec::new();
        g.write_edge_list(&mut edge_out).unwrap();
        let edge_text = String::from_utf8(edge_out).unwrap();
        assert_eq!(
            edge_text,
            "10.0.0.1:1234>10.0.0.2:80/6\t10.0.0.1:4321>10.0.0.2:80/6\t1\n"
        );
        let mut node_out = Vec::new();
        g.write_node_list(&mut node_out).unwrap();
        let node_text = String::from_utf8(node_out).unwrap();
        assert!(node_text.starts_with("0\t10.0.0.1:1234>10.0.0.2:80/6\n"));
    }
}
