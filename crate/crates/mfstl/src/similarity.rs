//! Pairwise flow similarity and data-driven component weights.
//!
//! Two flows are compared on four components, each in [0, 1]:
//!
//! - address: longest common bit-prefix over the four cross pairings of
//!   source/destination addresses, normalized by address width;
//! - port: 1 when any cross pairing of ports maps to the same service;
//! - protocol: exact match;
//! - payload: ratio of the smaller to the larger payload size.
//!
//! The combined score is a weighted sum; weights come from the entropy
//! weight method applied to observed component samples, so components
//! that vary more across a training set earn more influence.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowKey, FlowRecord, NodeMode, SamplePartition};

/// Weights of the four similarity components; they sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub addr: f64,
    pub port: f64,
    pub proto: f64,
    pub payload: f64,
}

impl SimilarityWeights {
    pub fn uniform() -> Self {
        SimilarityWeights {
            addr: 0.25,
            port: 0.25,
            proto: 0.25,
            payload: 0.25,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.addr, self.port, self.proto, self.payload]
    }

    /// Validates ranges and that the weights sum to 1 within 1e-9.
    pub fn validate(&self) -> Result<()> {
        let arr = self.as_array();
        if arr.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParam(format!(
                "similarity weights must lie in [0, 1], got {arr:?}"
            )));
        }
        let sum: f64 = arr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "similarity weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights::uniform()
    }
}

/// Port-to-service assignment used by the port component.
///
/// Named entries cover single ports or inclusive ranges; every port not
/// named by an entry counts as its own distinct service, so equal ports
/// always match. Serialization uses the compact `(start, end, name)`
/// entry list rather than the expanded table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServicePortMap {
    /// `table[port]` is the service id for that port.
    table: Vec<u32>,
    names: Vec<String>,
}

impl ServicePortMap {
    const UNASSIGNED: u32 = u32::MAX;

    /// Builds a map from `(range, service name)` entries. Ranges must not
    /// overlap; entries sharing a name share a service.
    pub fn from_entries<I>(entries: I) -> Result<ServicePortMap>
    where
        I: IntoIterator<Item = (std::ops::RangeInclusive<u16>, String)>,
    {
        let mut table = vec![Self::UNASSIGNED; 65536];
        let mut names: Vec<String> = Vec::new();
        for (range, name) in entries {
            let id = match names.iter().position(|n| *n == name) {
                Some(i) => i as u32,
                None => {
                    names.push(name.clone());
                    (names.len() - 1) as u32
                }
            };
            for port in range.clone() {
                if table[port as usize] != Self::UNASSIGNED {
                    return Err(Error::InvalidParam(format!(
                        "service port map: port {port} assigned twice (while adding `{name}`)"
                    )));
                }
                table[port as usize] = id;
            }
        }
        let base = names.len() as u32;
        for (port, cell) in table.iter_mut().enumerate() {
            if *cell == Self::UNASSIGNED {
                *cell = base + port as u32;
            }
        }
        Ok(ServicePortMap { table, names })
    }

    /// Well-known services relevant to traffic graphs: FTP, SSH, TELNET,
    /// SMTP, DNS, HTTP(S), the BitTorrent range and the Sasser backdoor
    /// port. All other ports are their own service.
    pub fn well_known() -> ServicePortMap {
        let entries = [
            (21..=21, "ftp"),
            (22..=22, "ssh"),
            (23..=23, "telnet"),
            (25..=25, "smtp"),
            (53..=53, "dns"),
            (80..=80, "http"),
            (443..=443, "https"),
            (5554..=5554, "sasser"),
            (6881..=6889, "bittorrent"),
        ];
        ServicePortMap::from_entries(entries.map(|(r, n)| (r, n.to_string())))
            .expect("static entries do not overlap")
    }

    /// Parses `port_or_range,service_name` lines; `#` starts a comment.
    pub fn from_reader<R: Read>(reader: R) -> Result<ServicePortMap> {
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line_no = (i + 1) as u64;
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (ports, name) = text.split_once(',').ok_or_else(|| {
                Error::parse(line_no, "port_map", "expected `port_or_range,service_name`")
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::parse(line_no, "port_map", "empty service name"));
            }
            let ports = ports.trim();
            let range = match ports.split_once('-') {
                Some((lo, hi)) => {
                    let lo: u16 = lo.trim().parse().map_err(|_| {
                        Error::parse(line_no, "port_map", format!("bad port `{lo}`"))
                    })?;
                    let hi: u16 = hi.trim().parse().map_err(|_| {
                        Error::parse(line_no, "port_map", format!("bad port `{hi}`"))
                    })?;
                    if lo > hi {
                        return Err(Error::parse(
                            line_no,
                            "port_map",
                            format!("empty range {lo}-{hi}"),
                        ));
                    }
                    lo..=hi
                }
                None => {
                    let p: u16 = ports.parse().map_err(|_| {
                        Error::parse(line_no, "port_map", format!("bad port `{ports}`"))
                    })?;
                    p..=p
                }
            };
            entries.push((range, name.to_string()));
        }
        ServicePortMap::from_entries(entries)
    }

    #[inline]
    pub fn service_id(&self, port: u16) -> u32 {
        self.table[port as usize]
    }

    pub fn service_name(&self, port: u16) -> Option<&str> {
        self.names.get(self.service_id(port) as usize).map(|s| s.as_str())
    }

    /// The named entries as `(start, end, name)` ranges, ordered so that
    /// rebuilding with `from_entries` reproduces the map exactly.
    pub fn entries(&self) -> Vec<(u16, u16, String)> {
        let named = self.names.len() as u32;
        let mut runs: Vec<(u32, u16, u16)> = Vec::new();
        let mut port = 0usize;
        while port < self.table.len() {
            let id = self.table[port];
            if id < named {
                let start = port;
                while port + 1 < self.table.len() && self.table[port + 1] == id {
                    port += 1;
                }
                runs.push((id, start as u16, port as u16));
            }
            port += 1;
        }
        runs.sort();
        runs.into_iter()
            .map(|(id, start, end)| (start, end, self.names[id as usize].clone()))
            .collect()
    }
}

impl Default for ServicePortMap {
    fn default() -> Self {
        ServicePortMap::well_known()
    }
}

impl Serialize for ServicePortMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ServicePortMap {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<(u16, u16, String)>::deserialize(deserializer)?;
        ServicePortMap::from_entries(entries.into_iter().map(|(s, e, n)| (s..=e, n)))
            .map_err(serde::de::Error::custom)
    }
}

fn prefix_ratio(a: IpAddr, b: IpAddr) -> f64 {
    match (a, b) {
        (IpAddr::V4(a), IpAddr::V4(b)) => {
            let x = u32::from(a) ^ u32::from(b);
            x.leading_zeros() as f64 / 32.0
        }
        (IpAddr::V6(a), IpAddr::V6(b)) => {
            let x = u128::from(a) ^ u128::from(b);
            x.leading_zeros() as f64 / 128.0
        }
        _ => 0.0,
    }
}

/// Address similarity: the best normalized common bit-prefix over the
/// four source/destination pairings. Cross-family pairings score 0.
pub fn ip_similarity(a: &FlowRecord, b: &FlowRecord) -> f64 {
    let mut best = prefix_ratio(a.sa, b.sa);
    best = best.max(prefix_ratio(a.sa, b.da));
    best = best.max(prefix_ratio(a.da, b.sa));
    best = best.max(prefix_ratio(a.da, b.da));
    best
}

/// Port similarity: 1 when any pairing of the flows' ports shares a
/// service under `map`, else 0.
pub fn port_similarity(a: &FlowRecord, b: &FlowRecord, map: &ServicePortMap) -> f64 {
    let (asp, adp) = (map.service_id(a.sp), map.service_id(a.dp));
    let (bsp, bdp) = (map.service_id(b.sp), map.service_id(b.dp));
    let hit = asp == bsp || asp == bdp || adp == bsp || adp == bdp;
    if hit {
        1.0
    } else {
        0.0
    }
}

/// Protocol similarity: exact match on the IP protocol number.
pub fn protocol_similarity(a: &FlowRecord, b: &FlowRecord) -> f64 {
    if a.pr == b.pr {
        1.0
    } else {
        0.0
    }
}

/// Payload similarity: `min(ps) / max(ps)`; two empty payloads are fully
/// similar, one empty payload is fully dissimilar.
pub fn payload_similarity(a: &FlowRecord, b: &FlowRecord) -> f64 {
    if a.ps == 0 && b.ps == 0 {
        return 1.0;
    }
    let lo = a.ps.min(b.ps) as f64;
    let hi = a.ps.max(b.ps) as f64;
    lo / hi
}

/// All four components at once, in `[addr, port, proto, payload]` order.
pub fn component_similarities(a: &FlowRecord, b: &FlowRecord, map: &ServicePortMap) -> [f64; 4] {
    [
        ip_similarity(a, b),
        port_similarity(a, b, map),
        protocol_similarity(a, b),
        payload_similarity(a, b),
    ]
}

/// Weighted sum of the four components; in [0, 1] when the weights are
/// valid.
pub fn combined_similarity(
    a: &FlowRecord,
    b: &FlowRecord,
    weights: &SimilarityWeights,
    map: &ServicePortMap,
) -> f64 {
    weights.addr * ip_similarity(a, b)
        + weights.port * port_similarity(a, b, map)
        + weights.proto * protocol_similarity(a, b)
        + weights.payload * payload_similarity(a, b)
}

/// Entropy weight method over component samples (one row per observed
/// flow pair, columns in component order).
///
/// Columns whose normalized entropy is high carry little information and
/// get low weight. A constant or all-zero column carries none and gets
/// weight 0; if every column is constant the weights fall back to
/// uniform.
pub fn entropy_weights(samples: &[[f64; 4]]) -> Result<SimilarityWeights> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "entropy weights need at least 2 sample rows, got {n}"
        )));
    }
    for (i, row) in samples.iter().enumerate() {
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParam(format!(
                "similarity sample {i} has entries outside [0, 1]: {row:?}"
            )));
        }
    }
    let ln_n = (n as f64).ln();
    let mut divergence = [0.0f64; 4];
    for j in 0..4 {
        let lo = samples.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            // Constant (or all-zero) column: normalized entropy is exactly 1.
            divergence[j] = 0.0;
            continue;
        }
        let total: f64 = samples.iter().map(|r| r[j]).sum();
        let mut h = 0.0;
        for row in samples {
            let p = row[j] / total;
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        divergence[j] = (1.0 - h / ln_n).max(0.0);
    }
    let sum: f64 = divergence.iter().sum();
    if sum == 0.0 {
        return Ok(SimilarityWeights::uniform());
    }
    Ok(SimilarityWeights {
        addr: divergence[0] / sum,
        port: divergence[1] / sum,
        proto: divergence[2] / sum,
        payload: divergence[3] / sum,
    })
}

/// Gathers component-similarity rows for every candidate pair a graph
/// build would test: records passing the protocol filter, with distinct
/// keys, whose timestamps lie within `window` of each other.
///
/// When more than `cap` pairs exist, every k-th pair is kept (fixed
/// stride), which keeps the population deterministic.
pub fn collect_similarity_samples(
    samples: &[SamplePartition],
    window: f64,
    mode: NodeMode,
    protocol_filter: Option<&BTreeSet<u8>>,
    map: &ServicePortMap,
    cap: usize,
) -> Vec<[f64; 4]> {
    let mut total = 0usize;
    for_each_candidate_pair(samples, window, mode, protocol_filter, |_, _| total += 1);
    if total == 0 {
        return Vec::new();
    }
    let stride = if cap == 0 { 1 } else { total.div_ceil(cap).max(1) };
    let mut rows = Vec::with_capacity(total.div_ceil(stride));
    let mut seen = 0usize;
    for_each_candidate_pair(samples, window, mode, protocol_filter, |a, b| {
        if seen % stride == 0 {
            rows.push(component_similarities(a, b, map));
        }
        seen += 1;
    });
    rows
}

fn for_each_candidate_pair<'a, F>(
    samples: &'a [SamplePartition],
    window: f64,
    mode: NodeMode,
    protocol_filter: Option<&BTreeSet<u8>>,
    mut visit: F,
) where
    F: FnMut(&'a FlowRecord, &'a FlowRecord),
{
    for sample in samples {
        let records: Vec<&FlowRecord> = sample
            .records
            .iter()
            .filter(|r| protocol_filter.is_none_or(|f| f.contains(&r.pr)))
            .collect();
        for i in 0..records.len() {
            let limit = records[i].ts + window;
            for j in (i + 1)..records.len() {
                if records[j].ts > limit {
                    break;
                }
                if FlowKey::of(records[i], mode) != FlowKey::of(records[j], mode) {
                    visit(records[i], records[j]);
                }
            }
        }
    }
}
