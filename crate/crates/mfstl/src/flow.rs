//! Flow records, trace parsing and time-sample handling.
//!
//! A trace is a CSV file with header `ts,sa,da,sp,dp,pr,ps,label`:
//! timestamp in decimal seconds, source/destination address, source/
//! destination port, IP protocol number, payload size in bytes, and an
//! optional ground-truth label. Records are kept sorted by timestamp;
//! ties preserve input order.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth or predicted class of a record or sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Abnormal,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("normal"),
            Label::Abnormal => f.write_str("abnormal"),
        }
    }
}

/// One network flow observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    /// Start time in seconds, microsecond resolution.
    pub ts: f64,
    pub sa: IpAddr,
    pub da: IpAddr,
    pub sp: u16,
    pub dp: u16,
    /// IP protocol number (TCP = 6, UDP = 17).
    pub pr: u8,
    /// Payload size in bytes.
    pub ps: u64,
    pub label: Option<Label>,
}

/// How records collapse into graph nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeMode {
    /// Key on (sa, da, sp, dp, pr).
    FiveTuple,
    /// Key on (sa, da) only.
    TwoTuple,
}

/// Node identity of a flow under a [`NodeMode`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowKey {
    Five {
        sa: IpAddr,
        da: IpAddr,
        sp: u16,
        dp: u16,
        pr: u8,
    },
    Two {
        sa: IpAddr,
        da: IpAddr,
    },
}

impl FlowKey {
    pub fn of(record: &FlowRecord, mode: NodeMode) -> FlowKey {
        match mode {
            NodeMode::FiveTuple => FlowKey::Five {
                sa: record.sa,
                da: record.da,
                sp: record.sp,
                dp: record.dp,
                pr: record.pr,
            },
            NodeMode::TwoTuple => FlowKey::Two {
                sa: record.sa,
                da: record.da,
            },
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKey::Five { sa, da, sp, dp, pr } => {
                write!(f, "{sa}:{sp}>{da}:{dp}/{pr}")
            }
            FlowKey::Two { sa, da } => write!(f, "{sa}>{da}"),
        }
    }
}

/// Records falling into one fixed-width time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePartition {
    /// Position of the window within the trace.
    pub index: usize,
    /// Window start time; the window covers `[start, start + dt)`.
    pub start: f64,
    /// Records inside the window, sorted by timestamp.
    pub records: Vec<FlowRecord>,
    /// Sample-level class once assigned; `None` until labeled.
    pub label: Option<Label>,
}

/// Chronological train/test division of a sample sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SamplePartition>,
    pub test: Vec<SamplePartition>,
    pub ratio: f64,
}

const HEADER: [&str; 8] = ["ts", "sa", "da", "sp", "dp", "pr", "ps", "label"];

/// Smallest time step distinguished by the parser, in seconds.
const TIME_RESOLUTION: f64 = 1e-6;

pub(crate) fn quantize_ts(ts: f64) -> f64 {
    (ts / TIME_RESOLUTION).round() * TIME_RESOLUTION
}

/// Reads a flow trace from CSV.
///
/// The header is mandatory and must match the schema exactly. Records are
/// returned sorted ascending by timestamp; equal timestamps keep their
/// input order. An empty body yields an empty list.
pub fn parse_flows<R: Read>(reader: R) -> Result<Vec<FlowRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(Error::Csv)?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(Error::parse(
            1,
            "header",
            format!(
                "expected `{}`, found `{}`",
                HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(Error::Csv)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != HEADER.len() {
            return Err(Error::parse(
                line,
                "row",
                format!("expected {} fields, found {}", HEADER.len(), row.len()),
            ));
        }
        records.push(parse_record(&row, line)?);
    }
    records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    Ok(records)
}

fn parse_record(row: &csv::StringRecord, line: u64) -> Result<FlowRecord> {
    let ts: f64 = row[0]
        .parse()
        .map_err(|_| Error::parse(line, "ts", format!("not a number: `{}`", &row[0])))?;
    if !ts.is_finite() || ts < 0.0 {
        return Err(Error::parse(line, "ts", "must be finite and non-negative"));
    }
    let sa = parse_addr(&row[1], line, "sa")?;
    let da = parse_addr(&row[2], line, "da")?;
    let sp = parse_port(&row[3], line, "sp")?;
    let dp = parse_port(&row[4], line, "dp")?;
    let pr = parse_proto(&row[5], line)?;
    let ps: u64 = row[6]
        .parse()
        .map_err(|_| Error::parse(line, "ps", format!("not a byte count: `{}`", &row[6])))?;
    let label = match &row[7] {
        "" => None,
        "normal" => Some(Label::Normal),
        "abnormal" => Some(Label::Abnormal),
        other => {
            return Err(Error::parse(
                line,
                "label",
                format!("expected empty, `normal` or `abnormal`, found `{other}`"),
            ))
        }
    };
    Ok(FlowRecord {
        ts: quantize_ts(ts),
        sa,
        da,
        sp,
        dp,
        pr,
        ps,
        label,
    })
}

fn parse_addr(text: &str, line: u64, field: &'static str) -> Result<IpAddr> {
    text.parse()
        .map_err(|_| Error::parse(line, field, format!("not an IP address: `{text}`")))
}

fn parse_port(text: &str, line: u64, field: &'static str) -> Result<u16> {
    let value: u32 = text
        .parse()
        .map_err(|_| Error::parse(line, field, format!("not a port number: `{text}`")))?;
    u16::try_from(value).map_err(|_| Error::parse(line, field, format!("port out of range: {value}")))
}

fn parse_proto(text: &str, line: u64) -> Result<u8> {
    let value: u32 = text
        .parse()
        .map_err(|_| Error::parse(line, "pr", format!("not a protocol number: `{text}`")))?;
    u8::try_from(value)
        .map_err(|_| Error::parse(line, "pr", format!("protocol out of range: {value}")))
}

/// Writes records in the trace CSV schema; inverse of [`parse_flows`].
pub fn write_flows<W: Write>(writer: W, records: &[FlowRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record([
            format!("{:.6}", r.ts),
            r.sa.to_string(),
            r.da.to_string(),
            r.sp.to_string(),
            r.dp.to_string(),
            r.pr.to_string(),
            r.ps.to_string(),
            r.label.map_or(String::new(), |l| l.to_string()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Cuts a sorted record sequence into consecutive windows of width `dt`.
///
/// The first window starts at the first record's timestamp. Windows with
/// no records are retained so sample indices stay aligned with time.
pub fn partition_samples(records: &[FlowRecord], dt: f64) -> Result<Vec<SamplePartition>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParam(format!(
            "sample width dt must be positive and finite, got {dt}"
        )));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let start0 = first.ts;
    let last = records.last().expect("non-empty").ts;
    let count = ((last - start0) / dt).floor() as usize + 1;
    let mut partitions: Vec<SamplePartition> = (0..count)
        .map(|index| SamplePartition {
            index,
            start: start0 + index as f64 * dt,
            records: Vec::new(),
            label: None,
        })
        .collect();
    for r in records {
        let mut idx = (((r.ts - start0) / dt).floor() as usize).min(count - 1);
        // Float division may land a record just past its window edge;
        // nudge it back so every record sits inside [start, start + dt).
        while idx > 0 && r.ts < partitions[idx].start {
            idx -= 1;
        }
        while idx + 1 < count && r.ts >= partitions[idx + 1].start {
            idx += 1;
        }
        partitions[idx].records.push(r.clone());
    }
    Ok(partitions)
}

/// Labels a sample from its records: abnormal when the abnormal fraction
/// reaches `threshold` (inclusive). Every record must carry a label;
/// an empty sample is normal.
pub fn label_sample(sample: &SamplePartition, threshold: f64) -> Result<Label> {
    if sample.records.is_empty() {
        return Ok(Label::Normal);
    }
    let mut abnormal = 0usize;
    for r in &sample.records {
        match r.label {
            Some(Label::Abnormal) => abnormal += 1,
            Some(Label::Normal) => {}
            None => {
                return Err(Error::InsufficientData(format!(
                    "sample {} contains an unlabeled record at ts {:.6}",
                    sample.index, r.ts
                )))
            }
        }
    }
    let ratio = abnormal as f64 / sample.records.len() as f64;
    Ok(if ratio >= threshold {
        Label::Abnormal
    } else {
        Label::Normal
    })
}

/// Splits samples chronologically: the first `floor(ratio * n)` go to
/// train, the rest to test.
pub fn split_chronological(samples: Vec<SamplePartition>, ratio: f64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParam(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples to split, got {}",
            samples.len()
        )));
    }
    let cut = (ratio * samples.len() as f64).floor() as usize;
    let mut train = samples;
    let test = train.split_off(cut);
    Ok(DatasetSplit {
        train,
        test,
        ratio,
    })
}

/// Counts distinct [`FlowKey`]s in a record set under a node mode.
pub fn distinct_keys(records: &[FlowRecord], mode: NodeMode) -> usize {
    let mut seen: HashMap<FlowKey, ()> = HashMap::with_capacity(records.len());
    for r in records {
        seen.insert(FlowKey::of(r, mode), ());
    }
    seen.len()
}
