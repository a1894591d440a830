//! IFSE-AD: ensemble decisions over per-characteristic fuzzy models.
//!
//! Each trained characteristic model turns a sample's value into a row
//! of intuitionistic triples (one per interval). A row collapses into
//! two pieces of evidence, one for the abnormal state and one for the
//! normal state; evidence is fused across characteristics with weights
//! derived from their distinction values, and the fused pair is ranked
//! to produce the verdict. A distribution-band baseline detector lives
//! here too for comparison runs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::flow::Label;
use crate::ifs::{CharacteristicModel, IntuitionisticValue};

/// How a row of interval triples collapses into per-state evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseMode {
    /// Equal-weight intuitionistic weighted average over each side.
    WeightedAverage,
    /// Keep the triple with the largest membership on each side.
    MaxMembership,
}

/// Evidence pair for one sample: support for the abnormal state and
/// support for the normal state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEvidence {
    pub abnormal: IntuitionisticValue,
    pub normal: IntuitionisticValue,
}

/// Which characteristics the ensemble uses and how much each counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    /// Characteristic indices, ascending.
    pub selected: Vec<usize>,
    /// Fusion weights, parallel to `selected`, summing to 1.
    pub weights: Vec<f64>,
    /// Distinction threshold the selection used.
    pub tau_threshold: f64,
    pub collapse: CollapseMode,
    /// True when every candidate distinction was zero and the weights
    /// fell back to uniform.
    pub degenerate: bool,
}

fn validate_weights(count: usize, weights: &[f64]) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidParam(
            "aggregation needs at least one value".to_string(),
        ));
    }
    if weights.len() != count {
        return Err(Error::InvalidParam(format!(
            "got {count} values but {} weights",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParam(
            "aggregation weights must be finite and nonnegative".to_string(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParam(format!(
            "aggregation weights must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Intuitionistic fuzzy weighted average:
/// `(1 - prod (1 - mu_i)^w_i, prod gamma_i^w_i)`. A zero weight leaves
/// the result unaffected.
pub fn ifwa(values: &[IntuitionisticValue], weights: &[f64]) -> Result<IntuitionisticValue> {
    validate_weights(values.len(), weights)?;
    let mut comembership = 1.0f64;
    let mut nonmembership = 1.0f64;
    for (v, w) in values.iter().zip(weights) {
        comembership *= (1.0 - v.membership).powf(*w);
        nonmembership *= v.nonmembership.powf(*w);
    }
    Ok(IntuitionisticValue::new(1.0 - comembership, nonmembership))
}

/// Intuitionistic fuzzy weighted geometric:
/// `(prod mu_i^w_i, 1 - prod (1 - gamma_i)^w_i)`. A zero weight leaves
/// the result unaffected.
pub fn ifwg(values: &[IntuitionisticValue], weights: &[f64]) -> Result<IntuitionisticValue> {
    validate_weights(values.len(), weights)?;
    let mut membership = 1.0f64;
    let mut cononmembership = 1.0f64;
    for (v, w) in values.iter().zip(weights) {
        membership *= v.membership.powf(*w);
        cononmembership *= (1.0 - v.nonmembership).powf(*w);
    }
    Ok(IntuitionisticValue::new(membership, 1.0 - cononmembership))
}

/// Ranks two intuitionistic values by score, then precision.
pub fn compare_values(a: &IntuitionisticValue, b: &IntuitionisticValue) -> Ordering {
    a.score()
        .total_cmp(&b.score())
        .then_with(|| a.precision().total_cmp(&b.precision()))
}

impl StateEvidence {
    /// Abnormal only when the abnormal evidence strictly outranks the
    /// normal evidence; ties resolve to normal.
    pub fn verdict(&self) -> Label {
        if compare_values(&self.abnormal, &self.normal) == Ordering::Greater {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }
}

fn side_evidence(
    row: &[IntuitionisticValue],
    side: &[usize],
    mode: CollapseMode,
) -> Result<IntuitionisticValue> {
    if side.is_empty() {
        return Err(Error::InvalidParam(
            "state collapse needs a nonempty interval set".to_string(),
        ));
    }
    if side.iter().any(|&i| i >= row.len()) {
        return Err(Error::InvalidParam(
            "interval set references a missing row entry".to_string(),
        ));
    }
    match mode {
        CollapseMode::WeightedAverage => {
            let members: Vec<IntuitionisticValue> = side.iter().map(|&i| row[i]).collect();
            let weights = vec![1.0 / side.len() as f64; side.len()];
            ifwa(&members, &weights)
        }
        CollapseMode::MaxMembership => {
            let mut best = row[side[0]];
            for &i in &side[1..] {
                if row[i].membership > best.membership {
                    best = row[i];
                }
            }
            Ok(best)
        }
    }
}

/// Collapses one characteristic's triple row into per-state evidence
/// using the model's abnormal/normal interval split.
pub fn collapse_to_states(
    row: &[IntuitionisticValue],
    model: &CharacteristicModel,
    mode: CollapseMode,
) -> Result<StateEvidence> {
    Ok(StateEvidence {
        abnormal: side_evidence(row, &model.abnormal_set, mode)?,
        normal: side_evidence(row, &model.normal_set, mode)?,
    })
}

/// Outcome of characteristic selection.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionOutcome {
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
    pub degenerate: bool,
}

/// Picks ensemble members from per-characteristic distinction values.
///
/// `taus[i]` is `None` when characteristic `i` has no trained model.
/// Members are those with `tau >= tau_threshold`; when none qualify the
/// top 3 by distinction (ties to the lower index) are taken instead.
/// Weights are proportional to distinction, or uniform (and flagged
/// degenerate) when every chosen distinction is zero.
pub fn select_and_weight(taus: &[Option<f64>], tau_threshold: f64) -> Result<SelectionOutcome> {
    if !(0.0..=1.0).contains(&tau_threshold) {
        return Err(Error::InvalidParam(format!(
            "distinction threshold must lie in [0, 1], got {tau_threshold}"
        )));
    }
    let trained: Vec<(usize, f64)> = taus
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.map(|t| (i, t)))
        .collect();
    if trained.is_empty() {
        return Err(Error::InsufficientData(
            "no characteristic produced a trained model".to_string(),
        ));
    }
    let mut selected: Vec<(usize, f64)> = trained
        .iter()
        .copied()
        .filter(|(_, t)| *t >= tau_threshold)
        .collect();
    if selected.is_empty() {
        let mut ranked = trained.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(3);
        ranked.sort_by_key(|(i, _)| *i);
        selected = ranked;
    }
    let tau_sum: f64 = selected.iter().map(|(_, t)| t).sum();
    let degenerate = tau_sum <= 0.0;
    let weights: Vec<f64> = if degenerate {
        vec![1.0 / selected.len() as f64; selected.len()]
    } else {
        selected.iter().map(|(_, t)| t / tau_sum).collect()
    };
    Ok(SelectionOutcome {
        selected: selected.into_iter().map(|(i, _)| i).collect(),
        weights,
        degenerate,
    })
}

/// Builds the ragged evidence matrix: one triple row per model for the
/// same sample, `values` parallel to `models`.
pub fn build_b_matrix(
    models: &[&CharacteristicModel],
    values: &[f64],
) -> Result<Vec<Vec<IntuitionisticValue>>> {
    if models.len() != values.len() {
        return Err(Error::ModelMismatch(format!(
            "got {} models but {} values",
            models.len(),
            values.len()
        )));
    }
    Ok(models
        .iter()
        .zip(values)
        .map(|(model, &x)| model.ifs_of_value(x))
        .collect())
}

/// Fuses per-characteristic evidence into one pair with the
/// intuitionistic weighted geometric operator.
pub fn fuse_evidence(evidence: &[StateEvidence], weights: &[f64]) -> Result<StateEvidence> {
    let abnormal: Vec<IntuitionisticValue> = evidence.iter().map(|e| e.abnormal).collect();
    let normal: Vec<IntuitionisticValue> = evidence.iter().map(|e| e.normal).collect();
    Ok(StateEvidence {
        abnormal: ifwg(&abnormal, weights)?,
        normal: ifwg(&normal, weights)?,
    })
}

/// IFSE-AD for one sample: rows, collapse, fuse, rank.
///
/// `models` and `values` are parallel and already restricted to the
/// ensemble's selected characteristics; `weights` are the fusion
/// weights.
pub fn ifse_ad_classify(
    models: &[&CharacteristicModel],
    values: &[f64],
    weights: &[f64],
    mode: CollapseMode,
) -> Result<(Label, StateEvidence)> {
    let rows = build_b_matrix(models, values)?;
    let evidence: Vec<StateEvidence> = rows
        .iter()
        .zip(models)
        .map(|(row, model)| collapse_to_states(row, model, mode))
        .collect::<Result<_>>()?;
    let fused = fuse_evidence(&evidence, weights)?;
    Ok((fused.verdict(), fused))
}

/// Distribution-band baseline: flag values outside
/// `mean ± lambda * sd`, with `lambda` the standard normal quantile at
/// `1 - epsilon / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBand {
    pub mean: f64,
    pub sd: f64,
    pub lambda: f64,
}

impl GaussianBand {
    /// Fits the band to normal-state training values.
    pub fn fit(values: &[f64], epsilon: f64) -> Result<GaussianBand> {
        if values.is_empty() {
            return Err(Error::InsufficientData(
                "distribution band needs at least one training value".to_string(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "distribution band values must be finite".to_string(),
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        let standard = Normal::new(0.0, 1.0).expect("unit normal is valid");
        let lambda = standard.inverse_cdf(1.0 - epsilon / 2.0);
        Ok(GaussianBand { mean, sd, lambda })
    }

    /// Abnormal when strictly outside the band; a collapsed band (zero
    /// spread) flags anything different from the mean.
    pub fn classify(&self, x: f64) -> Label {
        if self.sd == 0.0 {
            if x == self.mean {
                Label::Normal
            } else {
                Label::Abnormal
            }
        } else if (x - self.mean).abs() > self.lambda * self.sd {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }
}
