//! Detector scoring and parameter sweeps.
//!
//! Scoring treats the abnormal class as positive and degrades to 0
//! instead of dividing by zero. The parameter sweep rebuilds graphs over
//! a locality-window and similarity-threshold grid and averages each
//! characteristic across samples; the cluster sweep retrains the fuzzy
//! stage for each interval count and reports test accuracy.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::CollapseMode;
use crate::error::{Error, Result};
use crate::flow::{Label, SamplePartition};
use crate::graph::BuildParams;
use crate::ifs::TrainParams;
use crate::metrics::{
    characteristic_series, CharacteristicVector, CHARACTERISTIC_COUNT, CHARACTERISTIC_NAMES,
};
use crate::pipeline::{classify_series, fit_stage, CharacteristicEntry};
use crate::similarity::{ServicePortMap, SimilarityWeights};

/// Default locality-window grid, in seconds.
pub const DEFAULT_WINDOW_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Default similarity-threshold grid.
pub const DEFAULT_THRESHOLD_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Confusion counts with abnormal as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(verdicts: &[Label], truths: &[Label]) -> Result<ConfusionCounts> {
        if verdicts.len() != truths.len() {
            return Err(Error::InvalidParam(format!(
                "got {} verdicts but {} truths",
                verdicts.len(),
                truths.len()
            )));
        }
        if verdicts.is_empty() {
            return Err(Error::InsufficientData(
                "scoring needs at least one sample".to_string(),
            ));
        }
        let mut counts = ConfusionCounts::default();
        for (&verdict, &truth) in verdicts.iter().zip(truths) {
            match (truth, verdict) {
                (Label::Abnormal, Label::Abnormal) => counts.true_positives += 1,
                (Label::Normal, Label::Normal) => counts.true_negatives += 1,
                (Label::Normal, Label::Abnormal) => counts.false_positives += 1,
                (Label::Abnormal, Label::Normal) => counts.false_negatives += 1,
            }
        }
        Ok(counts)
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    /// Accuracy, precision, recall, and F1; every zero denominator
    /// yields 0 rather than an error.
    pub fn score(&self) -> DetectorScore {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let accuracy = ratio(self.true_positives + self.true_negatives, self.total());
        let precision = ratio(
            self.true_positives,
            self.true_positives + self.false_positives,
        );
        let recall = ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        );
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        DetectorScore {
            accuracy,
            precision,
            recall,
            f1,
        }
    }
}

/// The four headline metrics of one detector run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores one detector's verdicts against ground truth.
pub fn score_detector(
    verdicts: &[Label],
    truths: &[Label],
) -> Result<(ConfusionCounts, DetectorScore)> {
    let counts = ConfusionCounts::from_pairs(verdicts, truths)?;
    let score = counts.score();
    Ok((counts, score))
}

/// Mean characteristic vectors over a rectangular parameter grid,
/// row-major in window order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub windows: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub means: Vec<CharacteristicVector>,
}

impl SweepGrid {
    pub fn mean_at(&self, window_idx: usize, threshold_idx: usize) -> &CharacteristicVector {
        &self.means[window_idx * self.thresholds.len() + threshold_idx]
    }
}

/// Rebuilds every sample's graph for each grid cell and averages the 14
/// characteristics across samples. Cells are independent and run in
/// parallel; results are gathered by grid index.
pub fn param_sweep(
    samples: &[SamplePartition],
    windows: &[f64],
    thresholds: &[f64],
    base: &BuildParams,
    weights: &SimilarityWeights,
    map: &ServicePortMap,
) -> Result<SweepGrid> {
    if windows.is_empty() || thresholds.is_empty() {
        return Err(Error::InvalidParam(
            "sweep grids must be non-empty".to_string(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "sweep needs at least one sample".to_string(),
        ));
    }
    let cells: Vec<(f64, f64)> = windows
        .iter()
        .flat_map(|&dw| thresholds.iter().map(move |&rc| (dw, rc)))
        .collect();
    let means: Vec<CharacteristicVector> = cells
        .par_iter()
        .map(|&(dw, rc)| -> Result<CharacteristicVector> {
            let params = BuildParams {
                window: dw,
                threshold: rc,
                ..base.clone()
            };
            let series = characteristic_series(samples, &params, weights, map)?;
            let mut sums = [0.0f64; CHARACTERISTIC_COUNT];
            for vector in &series {
                for (sum, v) in sums.iter_mut().zip(vector.as_array()) {
                    *sum += v;
                }
            }
            let n = series.len() as f64;
            for sum in &mut sums {
                *sum /= n;
            }
            Ok(CharacteristicVector::from_array(sums))
        })
        .collect::<Result<_>>()?;
    Ok(SweepGrid {
        windows: windows.to_vec(),
        thresholds: thresholds.to_vec(),
        means,
    })
}

/// Writes `dw,rc,metric,name,value` rows, one per grid cell and
/// characteristic, ordered by window, threshold, characteristic.
pub fn write_sweep_csv<W: Write>(writer: W, grid: &SweepGrid) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["dw", "rc", "metric", "name", "value"])?;
    for (wi, &dw) in grid.windows.iter().enumerate() {
        for (ti, &rc) in grid.thresholds.iter().enumerate() {
            let mean = grid.mean_at(wi, ti).as_array();
            for (mi, name) in CHARACTERISTIC_NAMES.iter().enumerate() {
                wtr.write_record([
                    format!("{dw}"),
                    format!("{rc}"),
                    format!("{mi}"),
                    name.to_string(),
                    format!("{}", mean[mi]),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Retrains the fuzzy stage per interval count and scores IFSE-AD on
/// the test series; returns `(m, accuracy)` rows in input order.
#[allow(clippy::too_many_arguments)]
pub fn cluster_sweep(
    train_series: &[CharacteristicVector],
    train_labels: &[Label],
    test_series: &[CharacteristicVector],
    test_labels: &[Label],
    interval_counts: &[usize],
    base: &TrainParams,
    tau_threshold: f64,
    collapse: CollapseMode,
) -> Result<Vec<(usize, f64)>> {
    if interval_counts.is_empty() {
        return Err(Error::InvalidParam(
            "cluster sweep needs at least one interval count".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(interval_counts.len());
    for &m in interval_counts {
        let params = TrainParams {
            intervals: m,
            ..*base
        };
        let (entries, ensemble) = fit_stage(train_series, train_labels, &params, tau_threshold, collapse)?;
        let verdicts: Vec<Label> = classify_series(&entries, &ensemble, test_series)?
            .into_iter()
            .map(|(label, _)| label)
            .collect();
        let (_, score) = score_detector(&verdicts, test_labels)?;
        rows.push((m, score.accuracy));
    }
    Ok(rows)
}

/// Writes `m,acc` rows.
pub fn write_cluster_csv<W: Write>(writer: W, rows: &[(usize, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["m", "acc"])?;
    for (m, acc) in rows {
        wtr.write_record([format!("{m}"), format!("{acc}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Names the per-characteristic detectors used in reports.
pub fn characteristic_entry_names(entries: &[CharacteristicEntry]) -> Vec<String> {
    entries
        .iter()
        .enumerate()
        .map(|(i, _)| CHARACTERISTIC_NAMES[i].to_string())
        .collect()
}
