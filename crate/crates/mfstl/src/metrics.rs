//! Structural characteristics of interaction graphs.
//!
//! All 14 characteristics are measured on the undirected simple
//! projection of a sample's graph. Degenerate cases follow fixed
//! conventions so every graph yields a complete vector: an empty graph
//! scores 0 everywhere, a degree-uniform graph has assortativity 0, a
//! graph without wedges has clustering 0, and fewer than two distinct
//! positive degrees give a power-law slope of 0.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{Label, SamplePartition};
use crate::graph::{build_mfstl, BuildParams, MfstlGraph, SimpleGraph};
use crate::similarity::{ServicePortMap, SimilarityWeights};

pub const CHARACTERISTIC_COUNT: usize = 14;

/// Column names, in vector order; also the header order of the series
/// CSV.
pub const CHARACTERISTIC_NAMES: [&str; CHARACTERISTIC_COUNT] = [
    "node_number",
    "edge_number",
    "mean_degree",
    "max_degree",
    "mdr",
    "kcore",
    "clique",
    "clustering",
    "assortative",
    "entropy",
    "spl",
    "diameter_max",
    "diameter_mean",
    "power_law",
];

/// The 14 measured characteristics of one sample's graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicVector {
    /// Number of nodes.
    pub node_number: f64,
    /// Number of projected (undirected, simple) edges.
    pub edge_number: f64,
    /// 2E / N.
    pub mean_degree: f64,
    /// Largest degree.
    pub max_degree: f64,
    /// Largest degree over N - 1.
    pub mdr: f64,
    /// Largest k with a non-empty k-core.
    pub kcore: f64,
    /// Size of a maximum clique.
    pub clique: f64,
    /// Global transitivity: 3 * triangles / wedges.
    pub clustering: f64,
    /// Pearson degree correlation across edge endpoints.
    pub assortative: f64,
    /// Shannon entropy (nats) of the degree distribution.
    pub entropy: f64,
    /// Mean shortest-path length on the largest connected component.
    pub spl: f64,
    /// Largest eccentricity on that component.
    pub diameter_max: f64,
    /// Mean eccentricity on that component.
    pub diameter_mean: f64,
    /// Least-squares slope of log degree count versus log degree.
    pub power_law: f64,
}

impl CharacteristicVector {
    pub fn zero() -> Self {
        CharacteristicVector::from_array([0.0; CHARACTERISTIC_COUNT])
    }

    pub fn as_array(&self) -> [f64; CHARACTERISTIC_COUNT] {
        [
            self.node_number,
            self.edge_number,
            self.mean_degree,
            self.max_degree,
            self.mdr,
            self.kcore,
            self.clique,
            self.clustering,
            self.assortative,
            self.entropy,
            self.spl,
            self.diameter_max,
            self.diameter_mean,
            self.power_law,
        ]
    }

    pub fn from_array(a: [f64; CHARACTERISTIC_COUNT]) -> Self {
        CharacteristicVector {
            node_number: a[0],
            edge_number: a[1],
            mean_degree: a[2],
            max_degree: a[3],
            mdr: a[4],
            kcore: a[5],
            clique: a[6],
            clustering: a[7],
            assortative: a[8],
            entropy: a[9],
            spl: a[10],
            diameter_max: a[11],
            diameter_mean: a[12],
            power_law: a[13],
        }
    }
}

/// Measures a sample's graph (via its undirected projection).
pub fn characteristics(graph: &MfstlGraph) -> CharacteristicVector {
    measure_projection(&graph.undirected())
}

/// Measures an undirected simple graph directly.
pub fn measure_projection(g: &SimpleGraph) -> CharacteristicVector {
    let n = g.node_count();
    if n == 0 {
        return CharacteristicVector::zero();
    }
    let e = g.edge_count();
    let degrees: Vec<usize> = (0..n).map(|v| g.degree(v as u32)).collect();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let mean_degree = 2.0 * e as f64 / n as f64;
    let mdr = if n > 1 {
        max_degree as f64 / (n - 1) as f64
    } else {
        0.0
    };
    let (order, degeneracy) = peel(g);
    let clique = max_clique(g, &order);
    let (spl, diameter_max, diameter_mean) = largest_component_paths(g);

    CharacteristicVector {
        node_number: n as f64,
        edge_number: e as f64,
        mean_degree,
        max_degree: max_degree as f64,
        mdr,
        kcore: degeneracy as f64,
        clique: clique as f64,
        clustering: transitivity(g),
        assortative: degree_assortativity(g, &degrees),
        entropy: degree_entropy(&degrees),
        spl,
        diameter_max,
        diameter_mean,
        power_law: power_law_slope(&degrees),
    }
}

/// Builds and measures every sample; one vector per sample, in order.
pub fn characteristic_series(
    samples: &[SamplePartition],
    params: &BuildParams,
    weights: &SimilarityWeights,
    map: &ServicePortMap,
) -> Result<Vec<CharacteristicVector>> {
    samples
        .par_iter()
        .map(|s| build_mfstl(s, params, weights, map).map(|g| characteristics(&g)))
        .collect()
}

/// Writes `sample_index,label,<14 characteristic columns>` rows; samples
/// without a label get an empty label cell.
pub fn write_series_csv<W: Write>(
    writer: W,
    samples: &[SamplePartition],
    series: &[CharacteristicVector],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_index".to_string(), "label".to_string()];
    header.extend(CHARACTERISTIC_NAMES.iter().map(|s| s.to_string()));
    wtr.write_record(&header)?;
    for (sample, vector) in samples.iter().zip(series) {
        let mut row = vec![
            sample.index.to_string(),
            sample.label.map_or(String::new(), |l| l.to_string()),
        ];
        row.extend(vector.as_array().iter().map(|v| format!("{v}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sample labels in series order, for scoring helpers.
pub fn series_labels(samples: &[SamplePartition]) -> Vec<Option<Label>> {
    samples.iter().map(|s| s.label).collect()
}

/// Min-degree peeling with a lazy bucket queue. Returns the removal
/// order and the degeneracy, which equals the largest k with a non-empty
/// k-core.
fn peel(g: &SimpleGraph) -> (Vec<u32>, usize) {
    let n = g.node_count();
    if n == 0 {
        return (Vec::new(), 0);
    }
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v as u32)).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); max_deg + 1];
    for (v, &d) in degree.iter().enumerate() {
        buckets[d].push(v as u32);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut degeneracy = 0usize;
    let mut cursor = 0usize;
    for _ in 0..n {
        let v = loop {
            while buckets[cursor].is_empty() {
                cursor += 1;
            }
            let candidate = buckets[cursor].pop().expect("checked non-empty");
            // Entries go stale when a degree drops after insertion.
            if !removed[candidate as usize] && degree[candidate as usize] == cursor {
                break candidate;
            }
        };
        degeneracy = degeneracy.max(cursor);
        removed[v as usize] = true;
        order.push(v);
        for &u in g.neighbors(v) {
            if !removed[u as usize] {
                let d = degree[u as usize] - 1;
                degree[u as usize] = d;
                buckets[d].push(u);
            }
        }
        // Removing one node lowers neighbor degrees by at most 1.
        cursor = cursor.saturating_sub(1);
    }
    (order, degeneracy)
}

/// Exact maximum clique size via branch and bound: roots follow the
/// peeling order so candidate sets stay small, and a greedy coloring
/// bounds each branch.
fn max_clique(g: &SimpleGraph, peel_order: &[u32]) -> usize {
    let n = g.node_count();
    if n == 0 {
        return 0;
    }
    if g.edge_count() == 0 {
        return 1;
    }
    let mut rank = vec![0usize; n];
    for (i, &v) in peel_order.iter().enumerate() {
        rank[v as usize] = i;
    }
    let mut best = 1usize;
    for (i, &v) in peel_order.iter().enumerate() {
        let cand: Vec<u32> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| rank[u as usize] > i)
            .collect();
        if cand.len() + 1 <= best {
            continue;
        }
        // Adjacency among the candidates, on local ids, as bitsets.
        let k = cand.len();
        let words = k.div_ceil(64);
        let mut adj = vec![vec![0u64; words]; k];
        for a in 0..k {
            for b in (a + 1)..k {
                if g.neighbors(cand[a]).binary_search(&cand[b]).is_ok() {
                    adj[a][b / 64] |= 1 << (b % 64);
                    adj[b][a / 64] |= 1 << (a % 64);
                }
            }
        }
        let mut p = vec![u64::MAX; words];
        if k % 64 != 0 {
            p[words - 1] = (1u64 << (k % 64)) - 1;
        }
        expand_clique(1, &p, &adj, &mut best);
    }
    best
}

fn bits_count(p: &[u64]) -> usize {
    p.iter().map(|w| w.count_ones() as usize).sum()
}

fn bits_iter(p: &[u64]) -> impl Iterator<Item = usize> + '_ {
    p.iter().enumerate().flat_map(|(wi, &w)| {
        let mut rest = w;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            }
        })
    })
}

fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

fn expand_clique(size: usize, p: &[u64], adj: &[Vec<u64>], best: &mut usize) {
    let count = bits_count(p);
    if count == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + count <= *best {
        return;
    }
    // Greedy coloring: one node per color class can join a clique, so a
    // node's class index bounds what its branch can still reach.
    let words = p.len();
    let mut classes: Vec<Vec<u64>> = Vec::new();
    let mut colored: Vec<(usize, usize)> = Vec::with_capacity(count);
    for v in bits_iter(p) {
        let mut c = 0;
        while c < classes.len() && intersects(&adj[v], &classes[c]) {
            c += 1;
        }
        if c == classes.len() {
            classes.push(vec![0u64; words]);
        }
        classes[c][v / 64] |= 1 << (v % 64);
        colored.push((c, v));
    }
    colored.sort_unstable();
    let mut remaining = p.to_vec();
    for &(color, v) in colored.iter().rev() {
        if size + color + 1 <= *best {
            return;
        }
        let branch: Vec<u64> = remaining
            .iter()
            .zip(&adj[v])
            .map(|(a, b)| a & b)
            .collect();
        expand_clique(size + 1, &branch, adj, best);
        remaining[v / 64] &= !(1u64 << (v % 64));
    }
}

/// Global transitivity: three times triangle count over wedge count.
fn transitivity(g: &SimpleGraph) -> f64 {
    let mut closed = 0u64;
    for &(u, v) in g.edges() {
        closed += sorted_common(g.neighbors(u), g.neighbors(v));
    }
    let wedges: u64 = (0..g.node_count())
        .map(|v| {
            let d = g.degree(v as u32) as u64;
            d * (d.saturating_sub(1)) / 2
        })
        .sum();
    if wedges == 0 {
        0.0
    } else {
        closed as f64 / wedges as f64
    }
}

fn sorted_common(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut c) = (0usize, 0usize, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Pearson correlation of degrees across edge endpoints; 0 when every
/// endpoint degree is identical (zero variance).
fn degree_assortativity(g: &SimpleGraph, degrees: &[usize]) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let first_deg = degrees[g.edges()[0].0 as usize];
    let uniform = g
        .edges()
        .iter()
        .all(|&(u, v)| degrees[u as usize] == first_deg && degrees[v as usize] == first_deg);
    if uniform {
        return 0.0;
    }
    let m = g.edge_count() as f64;
    let (mut sum_prod, mut sum_half, mut sum_sq_half) = (0.0f64, 0.0f64, 0.0f64);
    for &(u, v) in g.edges() {
        let j = degrees[u as usize] as f64;
        let k = degrees[v as usize] as f64;
        sum_prod += j * k;
        sum_half += 0.5 * (j + k);
        sum_sq_half += 0.5 * (j * j + k * k);
    }
    let mean = sum_half / m;
    let num = sum_prod / m - mean * mean;
    let den = sum_sq_half / m - mean * mean;
    if den <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Shannon entropy (natural log) of the empirical degree distribution
/// over all nodes, isolated nodes included.
fn degree_entropy(degrees: &[usize]) -> f64 {
    let n = degrees.len();
    if n == 0 {
        return 0.0;
    }
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max_deg + 1];
    for &d in degrees {
        hist[d] += 1;
    }
    let mut h = 0.0;
    for &c in &hist {
        if c > 0 {
            let p = c as f64 / n as f64;
            h -= p * p.ln();
        }
    }
    h
}

/// Least-squares slope of `ln(count)` against `ln(degree)` over degrees
/// of at least 1; 0 with fewer than two distinct such degrees.
fn power_law_slope(degrees: &[usize]) -> f64 {
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max_deg + 1];
    for &d in degrees {
        hist[d] += 1;
    }
    let points: Vec<(f64, f64)> = hist
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(_, &c)| c > 0)
        .map(|(k, &c)| ((k as f64).ln(), (c as f64).ln()))
        .collect();
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in &points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}

/// Mean shortest-path length, largest eccentricity and mean eccentricity
/// on the largest connected component.
///
/// Equal-sized components are ranked by edge count, then by the smallest
/// resulting `(spl, diameter_max, diameter_mean)` triple, so the choice
/// never depends on node numbering.
fn largest_component_paths(g: &SimpleGraph) -> (f64, f64, f64) {
    let comps = components(g);
    if comps.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let edge_count_of =
        |c: &[u32]| -> usize { c.iter().map(|&v| g.degree(v)).sum::<usize>() / 2 };
    let max_size = comps.iter().map(|c| c.len()).max().unwrap();
    let max_edges = comps
        .iter()
        .filter(|c| c.len() == max_size)
        .map(|c| edge_count_of(c))
        .max()
        .unwrap();
    let mut best: Option<(f64, f64, f64)> = None;
    for comp in &comps {
        if comp.len() != max_size || edge_count_of(comp) != max_edges {
            continue;
        }
        let triple = component_paths(g, comp);
        best = Some(match best {
            None => triple,
            Some(b) if (triple.0, triple.1, triple.2) < (b.0, b.1, b.2) => triple,
            Some(b) => b,
        });
    }
    best.unwrap_or((0.0, 0.0, 0.0))
}

fn component_paths(g: &SimpleGraph, comp: &[u32]) -> (f64, f64, f64) {
    let s = comp.len();
    if s <= 1 {
        return (0.0, 0.0, 0.0);
    }
    let mut dist_sum = 0.0f64;
    let mut ecc_sum = 0.0f64;
    let mut ecc_max = 0u32;
    let mut dist = vec![u32::MAX; g.node_count()];
    let mut queue = std::collections::VecDeque::new();
    for &src in comp {
        for &v in comp {
            dist[v as usize] = u32::MAX;
        }
        dist[src as usize] = 0;
        queue.clear();
        queue.push_back(src);
        let mut ecc = 0u32;
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            ecc = ecc.max(d);
            dist_sum += d as f64;
            for &u in g.neighbors(v) {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = d + 1;
                    queue.push_back(u);
                }
            }
        }
        ecc_sum += ecc as f64;
        ecc_max = ecc_max.max(ecc);
    }
    let pairs = (s * (s - 1)) as f64;
    (dist_sum / pairs, ecc_max as f64, ecc_sum / s as f64)
}

/// Connected components as sorted node lists.
fn components(g: &SimpleGraph) -> Vec<Vec<u32>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start as u32);
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &u in g.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}
