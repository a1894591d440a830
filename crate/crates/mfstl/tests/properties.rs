//! Randomized invariants: similarity symmetry, edge-set monotonicity,
//! relabeling invariance of the graph characteristics, intuitionistic
//! triple consistency, aggregation behavior, and scale invariance of the
//! per-characteristic classifier.

use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr};

use proptest::prelude::*;

use mfstl::ensemble::{ifwa, ifwg};
use mfstl::flow::{partition_samples, FlowRecord, SamplePartition};
use mfstl::graph::{build_mfstl, BuildParams, SimpleGraph};
use mfstl::ifs::{
    distinction_partition, nonmembership, partition_domain, CharacteristicModel, IntervalTally,
    IntuitionisticValue,
};
use mfstl::metrics::{measure_projection, CHARACTERISTIC_NAMES};
use mfstl::similarity::{
    combined_similarity, component_similarities, entropy_weights, ServicePortMap,
    SimilarityWeights,
};

fn arb_record() -> impl Strategy<Value = FlowRecord> {
    (
        0u64..5_000,
        0u8..8,
        0u8..8,
        prop::sample::select(vec![1024u16, 1025, 2048]),
        prop::sample::select(vec![80u16, 443, 53, 22, 5554]),
        prop::sample::select(vec![6u8, 17, 1]),
        prop::sample::select(vec![0u64, 40, 64, 400, 1500]),
    )
        .prop_map(|(ms, a, b, sp, dp, pr, ps)| FlowRecord {
            ts: ms as f64 * 1e-3,
            sa: IpAddr::V4(Ipv4Addr::new(10, 0, 0, a)),
            da: IpAddr::V4(Ipv4Addr::new(10, 0, 0, b)),
            sp,
            dp,
            pr,
            ps,
            label: None,
        })
}

fn arb_sample(max_flows: usize) -> impl Strategy<Value = SamplePartition> {
    prop::collection::vec(arb_record(), 1..max_flows).prop_map(|mut records| {
        records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        SamplePartition {
            index: 0,
            start: 0.0,
            records,
            label: None,
        }
    })
}

fn edge_set(sample: &SamplePartition, window: f64, threshold: f64) -> BTreeSet<(u32, u32)> {
    let params = BuildParams {
        window,
        threshold,
        ..BuildParams::default()
    };
    let map = ServicePortMap::default();
    let graph = build_mfstl(sample, &params, &SimilarityWeights::uniform(), &map)
        .expect("valid build parameters");
    graph.edges.keys().copied().collect()
}

proptest! {
    #[test]
    fn prop_similarity_symmetric_and_bounded(a in arb_record(), b in arb_record()) {
        let map = ServicePortMap::default();
        let forward = component_similarities(&a, &b, &map);
        let backward = component_similarities(&b, &a, &map);
        for (f, g) in forward.iter().zip(backward) {
            prop_assert_eq!(*f, g);
            prop_assert!((0.0..=1.0).contains(f));
        }
        let weights = SimilarityWeights::uniform();
        let r = combined_similarity(&a, &b, &weights, &map);
        prop_assert_eq!(r, combined_similarity(&b, &a, &weights, &map));
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn prop_entropy_weights_valid_and_order_free(
        rows in prop::collection::vec(prop::array::uniform4(0.0f64..=1.0), 2..60),
    ) {
        let weights = entropy_weights(&rows).expect("enough rows");
        weights.validate().expect("weights well-formed");
        let mut reversed = rows.clone();
        reversed.reverse();
        let again = entropy_weights(&reversed).expect("enough rows");
        for (w, v) in weights.as_array().iter().zip(again.as_array()) {
            prop_assert!((w - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn prop_edges_monotone_in_threshold(
        sample in arb_sample(60),
        window in prop::sample::select(vec![0.05f64, 0.2, 1.0]),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let loose = edge_set(&sample, window, lo);
        let strict = edge_set(&sample, window, hi);
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn prop_edges_monotone_in_window(
        sample in arb_sample(60),
        threshold in 0.0f64..1.0,
        w1 in 0.01f64..2.0,
        w2 in 0.01f64..2.0,
    ) {
        let (narrow, wide) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let small = edge_set(&sample, narrow, threshold);
        let large = edge_set(&sample, wide, threshold);
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn prop_metrics_invariant_under_relabeling(
        n in 2usize..12,
        raw_edges in prop::collection::vec((0u32..12, 0u32..12), 0..40),
        perm_seed in prop::collection::vec(0u64..u64::MAX, 12),
    ) {
        let edges: Vec<(u32, u32)> = raw_edges
            .into_iter()
            .filter(|&(u, v)| u != v && (u as usize) < n && (v as usize) < n)
            .collect();
        // Order node ids by their random key to get a permutation.
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.sort_by_key(|&v| perm_seed[v as usize]);
        let relabeled: Vec<(u32, u32)> = edges
            .iter()
            .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();

        let original = measure_projection(&SimpleGraph::from_edges(n, edges.iter().copied()));
        let shuffled = measure_projection(&SimpleGraph::from_edges(n, relabeled.iter().copied()));
        for (i, (a, b)) in original
            .as_array()
            .iter()
            .zip(shuffled.as_array())
            .enumerate()
        {
            prop_assert!(
                (a - b).abs() <= 1e-9,
                "{} changed under relabeling: {} vs {}",
                CHARACTERISTIC_NAMES[i], a, b
            );
        }
    }

    #[test]
    fn prop_triple_construction_consistent(mu in -1.0f64..2.0, gamma in -1.0f64..2.0) {
        let v = IntuitionisticValue::new(mu, gamma);
        prop_assert!((0.0..=1.0).contains(&v.membership));
        prop_assert!((0.0..=1.0).contains(&v.nonmembership));
        prop_assert!(v.membership + v.nonmembership <= 1.0);
        prop_assert!(v.hesitation >= 0.0);
        prop_assert_eq!(v.hesitation, 1.0 - v.membership - v.nonmembership);
    }

    #[test]
    fn prop_yager_nonmembership_bounded(mu in 0.0f64..=1.0, beta in 1e-6f64..=1.0) {
        let gamma = nonmembership(mu, beta).expect("valid inputs");
        prop_assert!((0.0..=1.0).contains(&gamma));
        prop_assert!(gamma <= 1.0 - mu + 1e-12);
        let triple = IntuitionisticValue::new(mu, gamma);
        prop_assert!(triple.membership + triple.nonmembership <= 1.0);
    }

    #[test]
    fn prop_aggregation_idempotent(
        mu in 0.0f64..=1.0,
        slack in 0.0f64..=1.0,
        k in 1usize..6,
    ) {
        let v = IntuitionisticValue::new(mu, slack * (1.0 - mu));
        let values = vec![v; k];
        let weights = vec![1.0 / k as f64; k];
        for out in [
            ifwg(&values, &weights).expect("valid inputs"),
            ifwa(&values, &weights).expect("valid inputs"),
        ] {
            prop_assert!((out.membership - v.membership).abs() <= 1e-9);
            prop_assert!((out.nonmembership - v.nonmembership).abs() <= 1e-9);
        }
    }

    #[test]
    fn prop_ifwg_monotone_in_membership(
        mus in prop::collection::vec(0.0f64..=1.0, 1..6),
        index in any::<prop::sample::Index>(),
        bump in 0.0f64..=1.0,
    ) {
        let k = mus.len();
        let weights = vec![1.0 / k as f64; k];
        let rows: Vec<IntuitionisticValue> = mus
            .iter()
            .map(|&m| IntuitionisticValue::new(m, (1.0 - m) / 2.0))
            .collect();
        let i = index.index(k);
        let mut raised = rows.clone();
        let lifted = mus[i] + bump * (1.0 - mus[i]);
        raised[i] = IntuitionisticValue::new(lifted, rows[i].nonmembership.min(1.0 - lifted));
        let low = ifwg(&rows, &weights).expect("valid inputs");
        let high = ifwg(&raised, &weights).expect("valid inputs");
        prop_assert!(high.membership >= low.membership - 1e-12);
    }

    #[test]
    fn prop_distinction_partitions_all_intervals(
        raw in prop::collection::vec((0u64..30, 0u64..30), 2..10),
    ) {
        let mut tallies: Vec<IntervalTally> = raw
            .into_iter()
            .map(|(abnormal, normal)| IntervalTally { abnormal, normal })
            .collect();
        if tallies.iter().all(|t| t.abnormal + t.normal == 0) {
            tallies[0].abnormal = 1;
        }
        let d = distinction_partition(&tallies).expect("non-empty tallies");
        prop_assert!((0.0..=1.0).contains(&d.tau));
        prop_assert!(!d.abnormal_set.is_empty());
        prop_assert!(!d.normal_set.is_empty());
        let mut all: Vec<usize> = d.abnormal_set.iter().chain(&d.normal_set).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..tallies.len()).collect::<Vec<_>>());
    }

    #[test]
    fn prop_classification_invariant_under_affine_rescale(
        start in -10.0f64..10.0,
        gaps in prop::collection::vec(0.1f64..5.0, 1..7),
        alpha in 0.0f64..0.9,
        beta in 0.05f64..=1.0,
        scale in 0.25f64..4.0,
        shift in -100.0f64..100.0,
        xs in prop::collection::vec(-20.0f64..40.0, 1..20),
        mask in 1u32..30,
    ) {
        let mut centers = vec![start];
        for g in &gaps {
            centers.push(centers.last().unwrap() + g);
        }
        let m = centers.len();
        let mask = 1 + mask % ((1 << m) - 2).max(1);
        let bounds = partition_domain(&centers, &centers, 0.5, 0.5).expect("ascending centers");
        let abnormal_set: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let normal_set: Vec<usize> = (0..m).filter(|i| mask & (1 << i) == 0).collect();
        prop_assume!(!abnormal_set.is_empty() && !normal_set.is_empty());
        let model = CharacteristicModel {
            centers: centers.clone(),
            bounds: bounds.clone(),
            alpha,
            beta,
            abnormal_set: abnormal_set.clone(),
            normal_set: normal_set.clone(),
            tau: 0.5,
            tallies: vec![IntervalTally::default(); m],
            single_class: false,
        };
        let moved = CharacteristicModel {
            centers: centers.iter().map(|c| c * scale + shift).collect(),
            bounds: bounds.iter().map(|b| b * scale + shift).collect(),
            ..model.clone()
        };
        for &x in &xs {
            // Skip near-ties: rounding in the rescaled memberships can
            // legitimately flip the winning interval there.
            let mut row: Vec<f64> = (0..m).map(|i| model.membership(x, i)).collect();
            row.sort_by(|a, b| b.total_cmp(a));
            if row[0] - row[1] < 1e-6 {
                continue;
            }
            prop_assert_eq!(model.classify(x), moved.classify(x * scale + shift));
        }
    }

    #[test]
    fn prop_partition_keeps_every_record_in_its_window(
        records in prop::collection::vec(arb_record(), 1..100),
        dt in prop::sample::select(vec![0.25f64, 0.5, 1.0, 2.0]),
    ) {
        let mut records = records;
        records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        let samples = partition_samples(&records, dt).expect("valid dt");
        let total: usize = samples.iter().map(|s| s.records.len()).sum();
        prop_assert_eq!(total, records.len());
        for (i, sample) in samples.iter().enumerate() {
            prop_assert_eq!(sample.index, i);
            for r in &sample.records {
                prop_assert!(r.ts >= sample.start);
                if i + 1 < samples.len() {
                    prop_assert!(r.ts < samples[i + 1].start);
                }
            }
        }
    }
}
