//! End-to-end orchestration: trace to model, model to report.
//!
//! Training partitions a labeled trace into time samples, splits them
//! chronologically, derives similarity component weights from the
//! training pairs, builds one interaction graph per sample, measures the
//! 14 characteristics, fits one fuzzy model per characteristic, and
//! selects the ensemble. The trained model embeds everything needed to
//! reproduce the decision on the test side, including distribution-band
//! baselines for comparison. Detection replays the same partition and
//! split, then scores IFSE-AD alongside the per-characteristic IFS-AD
//! and band detectors.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    collapse_to_states, fuse_evidence, select_and_weight, CollapseMode, EnsembleModel,
    GaussianBand, StateEvidence,
};
use crate::error::{Error, Result};
use crate::eval::{score_detector, ConfusionCounts, DetectorScore};
use crate::flow::{
    label_sample, partition_samples, split_chronological, DatasetSplit, FlowRecord, Label,
    NodeMode, SamplePartition,
};
use crate::graph::{BuildParams, EdgeMode};
use crate::ifs::{train_characteristic, CharacteristicModel, TrainParams};
use crate::metrics::{
    characteristic_series, CharacteristicVector, CHARACTERISTIC_COUNT, CHARACTERISTIC_NAMES,
};
use crate::similarity::{
    collect_similarity_samples, entropy_weights, ServicePortMap, SimilarityWeights,
};

/// Every knob of a train/detect run. Fields missing from a JSON config
/// take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Sample partition width in seconds.
    pub sample_window: f64,
    /// Locality window for edge candidates, in seconds.
    pub locality_window: f64,
    /// Similarity threshold for edges.
    pub similarity_threshold: f64,
    pub node_mode: NodeMode,
    pub edge_mode: EdgeMode,
    /// Protocols kept when building graphs; `None` keeps everything.
    pub protocol_filter: Option<BTreeSet<u8>>,
    /// Requested interval count per characteristic model.
    pub intervals: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Domain margin as a fraction of each training range.
    pub margin_frac: f64,
    /// Distinction threshold for ensemble membership.
    pub tau_threshold: f64,
    pub collapse: CollapseMode,
    /// Band width parameter of the distribution baseline.
    pub epsilon: f64,
    /// Chronological train fraction.
    pub split_ratio: f64,
    /// Abnormal flow ratio at or above which a sample is abnormal.
    pub label_threshold: f64,
    /// Cap on similarity pairs used for entropy weighting.
    pub pair_cap: usize,
    /// Seed for synthetic generation; recorded for provenance.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sample_window: 60.0,
            locality_window: 0.1,
            similarity_threshold: 0.65,
            node_mode: NodeMode::FiveTuple,
            edge_mode: EdgeMode::Weighted,
            protocol_filter: Some(BTreeSet::from([6, 17])),
            intervals: 10,
            alpha: 0.2,
            beta: 0.8,
            margin_frac: 0.05,
            tau_threshold: 0.5,
            collapse: CollapseMode::WeightedAverage,
            epsilon: 0.1,
            split_ratio: 0.75,
            label_threshold: 0.001,
            pair_cap: 100_000,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn build_params(&self) -> BuildParams {
        BuildParams {
            window: self.locality_window,
            threshold: self.similarity_threshold,
            node_mode: self.node_mode,
            edge_mode: self.edge_mode,
            protocol_filter: self.protocol_filter.clone(),
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            intervals: self.intervals,
            alpha: self.alpha,
            beta: self.beta,
            margin_frac: self.margin_frac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_window > 0.0) || !self.sample_window.is_finite() {
            return Err(Error::InvalidParam(format!(
                "sample window must be positive, got {}",
                self.sample_window
            )));
        }
        self.build_params().validate()?;
        self.train_params().validate()?;
        if !(0.0..=1.0).contains(&self.tau_threshold) {
            return Err(Error::InvalidParam(format!(
                "distinction threshold must lie in [0, 1], got {}",
                self.tau_threshold
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidParam(format!(
                "split ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if !(self.label_threshold > 0.0 && self.label_threshold <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "label threshold must lie in (0, 1], got {}",
                self.label_threshold
            )));
        }
        if self.pair_cap == 0 {
            return Err(Error::InvalidParam(
                "pair cap must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Rejects settings that would change what the trained model means:
    /// everything except the seed must match.
    pub fn ensure_compatible(&self, other: &RunConfig) -> Result<()> {
        let mut a = self.clone();
        let mut b = other.clone();
        a.seed = 0;
        b.seed = 0;
        if a != b {
            return Err(Error::ModelMismatch(
                "run settings differ from the settings the model was trained with".to_string(),
            ));
        }
        Ok(())
    }
}

/// One of the 14 characteristic slots of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CharacteristicEntry {
    Trained { model: CharacteristicModel },
    /// The characteristic could not support a model (for example a
    /// constant training series); it is excluded from selection.
    Untrainable { reason: String },
}

impl CharacteristicEntry {
    pub fn model(&self) -> Option<&CharacteristicModel> {
        match self {
            CharacteristicEntry::Trained { model } => Some(model),
            CharacteristicEntry::Untrainable { .. } => None,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        self.model().map(|m| m.tau)
    }
}

/// Everything a detection run needs, as written to the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: RunConfig,
    /// Service port map in effect at training; detection reuses it.
    pub port_map: ServicePortMap,
    /// Entropy-derived similarity component weights.
    pub weights: SimilarityWeights,
    /// One entry per characteristic, in characteristic order.
    pub characteristics: Vec<CharacteristicEntry>,
    pub ensemble: EnsembleModel,
    /// Distribution-band baselines, one per characteristic, fitted on
    /// normal training samples.
    pub baselines: Vec<GaussianBand>,
}

impl TrainedModel {
    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<TrainedModel> {
        let model: TrainedModel = serde_json::from_reader(reader)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.weights.validate()?;
        if self.characteristics.len() != CHARACTERISTIC_COUNT {
            return Err(Error::ModelMismatch(format!(
                "model must carry {CHARACTERISTIC_COUNT} characteristic entries, found {}",
                self.characteristics.len()
            )));
        }
        for (i, entry) in self.characteristics.iter().enumerate() {
            if let Some(model) = entry.model() {
                model.validate().map_err(|e| {
                    Error::ModelMismatch(format!(
                        "characteristic {} is invalid: {e}",
                        CHARACTERISTIC_NAMES[i]
                    ))
                })?;
            }
        }
        if self.baselines.len() != CHARACTERISTIC_COUNT {
            return Err(Error::ModelMismatch(format!(
                "model must carry {CHARACTERISTIC_COUNT} baselines, found {}",
                self.baselines.len()
            )));
        }
        if self.ensemble.selected.is_empty()
            || self.ensemble.selected.len() != self.ensemble.weights.len()
        {
            return Err(Error::ModelMismatch(
                "ensemble selection and weights must be non-empty and parallel".to_string(),
            ));
        }
        let weight_sum: f64 = self.ensemble.weights.iter().sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::ModelMismatch(format!(
                "ensemble weights must sum to 1, got {weight_sum}"
            )));
        }
        for &i in &self.ensemble.selected {
            if i >= CHARACTERISTIC_COUNT || self.characteristics[i].model().is_none() {
                return Err(Error::ModelMismatch(format!(
                    "ensemble selects characteristic {i}, which has no trained model"
                )));
            }
        }
        Ok(())
    }
}

/// Fits the fuzzy stage from measured series: one model per
/// characteristic (untrainable ones are kept as annotated slots) plus
/// the ensemble selection over their distinction values.
pub fn fit_stage(
    series: &[CharacteristicVector],
    labels: &[Label],
    params: &TrainParams,
    tau_threshold: f64,
    collapse: CollapseMode,
) -> Result<(Vec<CharacteristicEntry>, EnsembleModel)> {
    if series.len() != labels.len() {
        return Err(Error::InvalidParam(format!(
            "got {} series entries but {} labels",
            series.len(),
            labels.len()
        )));
    }
    let has_abnormal = labels.contains(&Label::Abnormal);
    let has_normal = labels.contains(&Label::Normal);
    if !has_abnormal || !has_normal {
        return Err(Error::InsufficientData(
            "training samples must contain both normal and abnormal classes".to_string(),
        ));
    }
    let mut entries = Vec::with_capacity(CHARACTERISTIC_COUNT);
    for i in 0..CHARACTERISTIC_COUNT {
        let column: Vec<f64> = series.iter().map(|v| v.as_array()[i]).collect();
        match train_characteristic(&column, labels, params) {
            Ok(model) => entries.push(CharacteristicEntry::Trained { model }),
            Err(e) => entries.push(CharacteristicEntry::Untrainable {
                reason: e.to_string(),
            }),
        }
    }
    let taus: Vec<Option<f64>> = entries.iter().map(CharacteristicEntry::tau).collect();
    let selection = select_and_weight(&taus, tau_threshold)?;
    let ensemble = EnsembleModel {
        selected: selection.selected,
        weights: selection.weights,
        tau_threshold,
        collapse,
        degenerate: selection.degenerate,
    };
    Ok((entries, ensemble))
}

/// Runs IFSE-AD over a series with an already-fitted stage.
pub fn classify_series(
    entries: &[CharacteristicEntry],
    ensemble: &EnsembleModel,
    series: &[CharacteristicVector],
) -> Result<Vec<(Label, StateEvidence)>> {
    let mut models = Vec::with_capacity(ensemble.selected.len());
    for &i in &ensemble.selected {
        let entry = entries.get(i).ok_or_else(|| {
            Error::ModelMismatch(format!("ensemble selects missing characteristic {i}"))
        })?;
        models.push(entry.model().ok_or_else(|| {
            Error::ModelMismatch(format!(
                "ensemble selects characteristic {i}, which has no trained model"
            ))
        })?);
    }
    series
        .iter()
        .map(|vector| {
            let array = vector.as_array();
            let evidence: Vec<StateEvidence> = models
                .iter()
                .zip(&ensemble.selected)
                .map(|(model, &i)| {
                    let row = model.ifs_of_value(array[i]);
                    collapse_to_states(&row, model, ensemble.collapse)
                })
                .collect::<Result<_>>()?;
            let fused = fuse_evidence(&evidence, &ensemble.weights)?;
            Ok((fused.verdict(), fused))
        })
        .collect()
}

/// Partitions a trace into samples, labels each from its flows, and
/// splits chronologically per the config.
pub fn labeled_split(records: &[FlowRecord], config: &RunConfig) -> Result<DatasetSplit> {
    let mut samples = partition_samples(records, config.sample_window)?;
    for sample in &mut samples {
        sample.label = Some(label_sample(sample, config.label_threshold)?);
    }
    split_chronological(samples, config.split_ratio)
}

fn sample_labels(samples: &[SamplePartition]) -> Vec<Label> {
    samples
        .iter()
        .map(|s| s.label.expect("samples labeled by the pipeline"))
        .collect()
}

/// Trains the full detector from a labeled trace.
pub fn train(
    records: &[FlowRecord],
    config: &RunConfig,
    map: &ServicePortMap,
) -> Result<TrainedModel> {
    config.validate()?;
    let split = labeled_split(records, config)?;

    let pairs = collect_similarity_samples(
        &split.train,
        config.locality_window,
        config.node_mode,
        config.protocol_filter.as_ref(),
        map,
        config.pair_cap,
    );
    let weights = entropy_weights(&pairs)?;

    let series = characteristic_series(&split.train, &config.build_params(), &weights, map)?;
    let labels = sample_labels(&split.train);
    let (characteristics, ensemble) = fit_stage(
        &series,
        &labels,
        &config.train_params(),
        config.tau_threshold,
        config.collapse,
    )?;

    let mut baselines = Vec::with_capacity(CHARACTERISTIC_COUNT);
    for i in 0..CHARACTERISTIC_COUNT {
        let normal_values: Vec<f64> = series
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == Label::Normal)
            .map(|(v, _)| v.as_array()[i])
            .collect();
        baselines.push(GaussianBand::fit(&normal_values, config.epsilon)?);
    }

    Ok(TrainedModel {
        config: config.clone(),
        port_map: map.clone(),
        weights,
        characteristics,
        ensemble,
        baselines,
    })
}

/// One test sample's IFSE-AD outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sample_index: usize,
    pub truth: Label,
    pub verdict: Label,
    pub evidence: StateEvidence,
}

/// Scored verdict set of one detector over the test samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub detector: String,
    pub counts: ConfusionCounts,
    pub score: DetectorScore,
}

/// Full output of a detection run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<ReportRow>,
    pub summaries: Vec<DetectorSummary>,
}

/// Replays partitioning and the chronological split with the model's
/// own config and embedded port map, then classifies every test sample
/// with IFSE-AD, the per-characteristic IFS-AD detectors, and the
/// distribution-band baselines.
pub fn detect(records: &[FlowRecord], model: &TrainedModel) -> Result<DetectionReport> {
    model.validate()?;
    let split = labeled_split(records, &model.config)?;
    let series = characteristic_series(
        &split.test,
        &model.config.build_params(),
        &model.weights,
        &model.port_map,
    )?;
    let truths = sample_labels(&split.test);

    let fused = classify_series(&model.characteristics, &model.ensemble, &series)?;
    let rows: Vec<ReportRow> = split
        .test
        .iter()
        .zip(&truths)
        .zip(&fused)
        .map(|((sample, &truth), &(verdict, evidence))| ReportRow {
            sample_index: sample.index,
            truth,
            verdict,
            evidence,
        })
        .collect();

    let ensemble_verdicts: Vec<Label> = fused.iter().map(|(v, _)| *v).collect();
    let mut summaries = Vec::new();
    let (counts, score) = score_detector(&ensemble_verdicts, &truths)?;
    summaries.push(DetectorSummary {
        detector: "ifse_ad".to_string(),
        counts,
        score,
    });
    for (i, entry) in model.characteristics.iter().enumerate() {
        if let Some(char_model) = entry.model() {
            let verdicts: Vec<Label> = series
                .iter()
                .map(|v| char_model.classify(v.as_array()[i]))
                .collect();
            let (counts, score) = score_detector(&verdicts, &truths)?;
            summaries.push(DetectorSummary {
                detector: format!("ifs_ad:{}", CHARACTERISTIC_NAMES[i]),
                counts,
                score,
            });
        }
    }
    for (i, band) in model.baselines.iter().enumerate() {
        let verdicts: Vec<Label> = series
            .iter()
            .map(|v| band.classify(v.as_array()[i]))
            .collect();
        let (counts, score) = score_detector(&verdicts, &truths)?;
        summaries.push(DetectorSummary {
            detector: format!("gaussian_dist:{}", CHARACTERISTIC_NAMES[i]),
            counts,
            score,
        });
    }

    Ok(DetectionReport { rows, summaries })
}

/// Writes `sample_index,truth,verdict,s_abnormal,s_normal,h_abnormal,h_normal`.
pub fn write_report_csv<W: Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "sample_index",
        "truth",
        "verdict",
        "s_abnormal",
        "s_normal",
        "h_abnormal",
        "h_normal",
    ])?;
    for row in rows {
        wtr.write_record([
            row.sample_index.to_string(),
            row.truth.to_string(),
            row.verdict.to_string(),
            format!("{}", row.evidence.abnormal.score()),
            format!("{}", row.evidence.normal.score()),
            format!("{}", row.evidence.abnormal.precision()),
            format!("{}", row.evidence.normal.precision()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `detector,tp,tn,fp,fn,accuracy,precision,recall,f1`.
pub fn write_summary_csv<W: Write>(writer: W, summaries: &[DetectorSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "detector",
        "tp",
        "tn",
        "fp",
        "fn",
        "accuracy",
        "precision",
        "recall",
        "f1",
    ])?;
    for s in summaries {
        wtr.write_record([
            s.detector.clone(),
            s.counts.true_positives.to_string(),
            s.counts.true_negatives.to_string(),
            s.counts.false_positives.to_string(),
            s.counts.false_negatives.to_string(),
            format!("{}", s.score.accuracy),
            format!("{}", s.score.precision),
            format!("{}", s.score.recall),
            format!("{}", s.score.f1),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
