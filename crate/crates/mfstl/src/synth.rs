//! Synthetic labeled traces for desk-scale experiments.
//!
//! Background traffic draws exponential inter-arrival times between
//! hosts of a small address pool; attack windows inject a scanning
//! pattern (one source probing many destinations on a fixed port with a
//! constant payload) whose records are labeled abnormal. Every draw
//! comes from one seeded generator, so a config produces a
//! bit-identical trace on every run.

use std::net::{IpAddr, Ipv4Addr};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{quantize_ts, FlowRecord, Label};

/// Scanning attack: one source sweeps many destinations on one service
/// port with a constant payload size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPattern {
    /// Flows per second inside an attack window.
    pub rate: f64,
    pub source: IpAddr,
    pub dst_port: u16,
    /// Payload size shared by every attack flow, in bytes.
    pub payload: u64,
    /// Number of swept destination addresses.
    pub victim_count: u32,
}

impl Default for ScanPattern {
    fn default() -> Self {
        ScanPattern {
            rate: 200.0,
            source: IpAddr::V4(Ipv4Addr::new(172, 16, 0, 66)),
            dst_port: 5554,
            payload: 64,
            victim_count: 256,
        }
    }
}

/// Full trace recipe; `seed` fixes all randomness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Trace length in seconds.
    pub duration: f64,
    /// Background flows per second.
    pub background_rate: f64,
    /// Size of the background host pool.
    pub host_count: u32,
    /// Destination ports background flows pick from.
    pub service_ports: Vec<u16>,
    /// Half-open `[start, end)` attack intervals in trace seconds.
    pub attack_windows: Vec<(f64, f64)>,
    pub attack: ScanPattern,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration: 600.0,
            background_rate: 50.0,
            host_count: 50,
            service_ports: vec![80, 443, 53, 22, 25],
            attack_windows: Vec::new(),
            attack: ScanPattern::default(),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParam(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.background_rate > 0.0) || !self.background_rate.is_finite() {
            return Err(Error::InvalidParam(format!(
                "background rate must be positive, got {}",
                self.background_rate
            )));
        }
        if !(self.attack.rate > 0.0) || !self.attack.rate.is_finite() {
            return Err(Error::InvalidParam(format!(
                "attack rate must be positive, got {}",
                self.attack.rate
            )));
        }
        if !(2..=65536).contains(&self.host_count) {
            return Err(Error::InvalidParam(
                "host pool needs between 2 and 65536 addresses".to_string(),
            ));
        }
        if self.service_ports.is_empty() {
            return Err(Error::InvalidParam(
                "service port pool must be non-empty".to_string(),
            ));
        }
        if !(1..=65536).contains(&self.attack.victim_count) {
            return Err(Error::InvalidParam(
                "scan needs between 1 and 65536 destinations".to_string(),
            ));
        }
        let mut windows = self.attack_windows.clone();
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(start, end) in &windows {
            if !(start >= 0.0 && start < end && end <= self.duration) {
                return Err(Error::InvalidParam(format!(
                    "attack window [{start}, {end}) must lie within the {} s trace",
                    self.duration
                )));
            }
        }
        for pair in windows.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::InvalidParam(format!(
                    "attack windows [{}, {}) and [{}, {}) overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(())
    }
}

fn background_host(rng: &mut ChaCha12Rng, pool: u32) -> IpAddr {
    let k = rng.gen_range(0..pool);
    IpAddr::V4(Ipv4Addr::new(10, 0, (k >> 8) as u8, (k & 0xff) as u8))
}

fn victim_host(k: u32) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(10, 99, (k / 256) as u8, (k % 256) as u8))
}

/// Generates the full labeled trace, sorted by timestamp.
pub fn synth_trace(config: &SynthConfig) -> Result<Vec<FlowRecord>> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();

    // Background process over the whole trace.
    let interarrival = Exp::new(config.background_rate)
        .map_err(|e| Error::InvalidParam(format!("background rate: {e}")))?;
    let payload_dist = LogNormal::new(6.0, 1.0)
        .map_err(|e| Error::InvalidParam(format!("payload distribution: {e}")))?;
    let mut t = 0.0f64;
    loop {
        t += interarrival.sample(&mut rng);
        if t >= config.duration {
            break;
        }
        let sa = background_host(&mut rng, config.host_count);
        let mut da = background_host(&mut rng, config.host_count);
        while da == sa {
            da = background_host(&mut rng, config.host_count);
        }
        let dp = *config
            .service_ports
            .choose(&mut rng)
            .expect("validated non-empty port pool");
        let pr: u8 = if dp == 53 { 17 } else { 6 };
        let ps = (payload_dist.sample(&mut rng) as u64).clamp(40, 1 << 20);
        records.push(FlowRecord {
            ts: quantize_ts(t),
            sa,
            da,
            sp: rng.gen_range(1024..=65535),
            dp,
            pr,
            ps,
            label: Some(Label::Normal),
        });
    }

    // Scanning attack inside each window.
    let scan_gap = Exp::new(config.attack.rate)
        .map_err(|e| Error::InvalidParam(format!("attack rate: {e}")))?;
    let mut swept = 0u32;
    let mut windows = config.attack_windows.clone();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (start, end) in windows {
        let mut t = start;
        loop {
            t += scan_gap.sample(&mut rng);
            if t >= end {
                break;
            }
            let da = victim_host(swept % config.attack.victim_count);
            swept += 1;
            records.push(FlowRecord {
                ts: quantize_ts(t),
                sa: config.attack.source,
                da,
                sp: rng.gen_range(1024..=65535),
                dp: config.attack.dst_port,
                pr: 6,
                ps: config.attack.payload,
                label: Some(Label::Abnormal),
            });
        }
    }

    records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{parse_flows, write_flows};

    #[test]
    fn test_background_volume_matches_rate() {
        let config = SynthConfig::default();
        let records = synth_trace(&config).unwrap();
        let expected = config.duration * config.background_rate;
        let sigma = expected.sqrt();
        let n = records.len() as f64;
        assert!(
            (n - expected).abs() < 3.0 * sigma,
            "{n} flows vs expected {expected}"
        );
        assert!(records.iter().all(|r| r.label == Some(Label::Normal)));
    }

    #[test]
    fn test_trace_is_sorted_and_in_range() {
        let records = synth_trace(&SynthConfig::default()).unwrap();
        for pair in records.windows(2) {
            assert!(pair[0].ts <= pair[1].ts);
        }
        assert!(records.iter().all(|r| r.ts >= 0.0 && r.ts < 600.5));
    }

    #[test]
    fn test_attack_window_records_are_marked_and_shaped() {
        let config = SynthConfig {
            attack_windows: vec![(100.0, 160.0)],
            ..SynthConfig::default()
        };
        let records = synth_trace(&config).unwrap();
        let abnormal: Vec<_> = records
            .iter()
            .filter(|r| r.label == Some(Label::Abnormal))
            .collect();
        let expected = 60.0 * config.attack.rate;
        assert!((abnormal.len() as f64 - expected).abs() < 3.0 * expected.sqrt());
        for r in &abnormal {
            assert_eq!(r.sa, config.attack.source);
            assert_eq!(r.dp, config.attack.dst_port);
            assert_eq!(r.ps, config.attack.payload);
            assert_eq!(r.pr, 6);
            assert!(r.ts >= 100.0 && r.ts < 160.0);
        }
        let victims: std::collections::BTreeSet<_> = abnormal.iter().map(|r| r.da).collect();
        assert!(victims.len() > 100, "scan sweeps many destinations");
    }

    #[test]
    fn test_same_seed_is_byte_identical() {
        let config = SynthConfig {
            attack_windows: vec![(50.0, 80.0)],
            duration: 120.0,
            ..SynthConfig::default()
        };
        let a = synth_trace(&config).unwrap();
        let b = synth_trace(&config).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_flows(&mut csv_a, &a).unwrap();
        write_flows(&mut csv_b, &b).unwrap();
        assert_eq!(csv_a, csv_b);

        let other = synth_trace(&SynthConfig {
            seed: 43,
            ..config
        })
        .unwrap();
        let mut csv_c = Vec::new();
        write_flows(&mut csv_c, &other).unwrap();
        assert_ne!(csv_a, csv_c);
    }

    #[test]
    fn test_trace_round_trips_through_csv() {
        let config = SynthConfig {
            duration: 30.0,
            attack_windows: vec![(5.0, 10.0)],
            ..SynthConfig::default()
        };
        let records = synth_trace(&config).unwrap();
        let mut buf = Vec::new();
        write_flows(&mut buf, &records).unwrap();
        let parsed = parse_flows(buf.as_slice()).unwrap();
        assert_eq!(records, parsed);
    }

    #[test]
    fn test_rejects_bad_windows() {
        let overlapping = SynthConfig {
            attack_windows: vec![(10.0, 50.0), (40.0, 60.0)],
            ..SynthConfig::default()
        };
        assert!(synth_trace(&overlapping).is_err());
        let outside = SynthConfig {
            attack_windows: vec![(590.0, 610.0)],
            ..SynthConfig::default()
        };
        assert!(synth_trace(&outside).is_err());
        let inverted = SynthConfig {
            attack_windows: vec![(50.0, 50.0)],
            ..SynthConfig::default()
        };
        assert!(synth_trace(&inverted).is_err());
    }

    #[test]
    fn test_rejects_bad_rates() {
        let zero_rate = SynthConfig {
            background_rate: 0.0,
            ..SynthConfig::default()
        };
        assert!(synth_trace(&zero_rate).is_err());
        let bad_attack = SynthConfig {
            attack: ScanPattern {
                rate: -1.0,
                ..ScanPattern::default()
            },
            ..SynthConfig::default()
        };
        assert!(synth_trace(&bad_attack).is_err());
    }
}
