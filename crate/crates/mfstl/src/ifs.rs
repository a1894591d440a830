//! Intuitionistic fuzzy modeling of one characteristic.
//!
//! A characteristic's training series is clustered into `m` interval
//! centers ([`crate::fcm`]), the value domain is cut at the midpoints
//! between neighboring centers, and every value maps to one
//! intuitionistic fuzzy triple per interval: a Gaussian membership
//! centered on the interval's center, a Yager-class nonmembership, and
//! the leftover hesitation. Per-interval class tallies of the training
//! values then split the intervals into an abnormal set and a normal set
//! by maximizing a distinction index; the index also quantifies how well
//! the characteristic separates the classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcm::fcm_centers;
use crate::flow::Label;

/// One intuitionistic fuzzy triple. `membership + nonmembership <= 1`
/// and `hesitation` is exactly the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntuitionisticValue {
    pub membership: f64,
    pub nonmembership: f64,
    pub hesitation: f64,
}

impl IntuitionisticValue {
    /// Builds a triple from membership and nonmembership. Inputs are
    /// clamped into their exact-arithmetic ranges, which only absorbs
    /// float rounding from upstream powers and products.
    pub fn new(membership: f64, nonmembership: f64) -> IntuitionisticValue {
        let membership = membership.clamp(0.0, 1.0);
        let nonmembership = nonmembership.clamp(0.0, 1.0 - membership);
        IntuitionisticValue {
            membership,
            nonmembership,
            hesitation: 1.0 - membership - nonmembership,
        }
    }

    /// Score `S = membership - nonmembership`, in [-1, 1].
    pub fn score(&self) -> f64 {
        self.membership - self.nonmembership
    }

    /// Precision `H = membership + nonmembership`, in [0, 1].
    pub fn precision(&self) -> f64 {
        self.membership + self.nonmembership
    }
}

/// Per-interval counts of abnormal and normal training instances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalTally {
    pub abnormal: u64,
    pub normal: u64,
}

/// Outcome of maximizing the distinction index over interval
/// bipartitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distinction {
    /// Intervals assigned to the abnormal side.
    pub abnormal_set: Vec<usize>,
    /// The remaining intervals.
    pub normal_set: Vec<usize>,
    /// Maximized index value, in [0, 2].
    pub eta: f64,
    /// Normalized distinction, in [0, 1].
    pub tau: f64,
    /// True when the tallies contain only one class; the split is then
    /// meaningless and callers should not trust `tau`.
    pub single_class: bool,
}

/// Trained intuitionistic fuzzy model of one characteristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicModel {
    /// Interval centers, strictly ascending.
    pub centers: Vec<f64>,
    /// Interval bounds, `centers.len() + 1` entries, strictly ascending.
    pub bounds: Vec<f64>,
    /// Membership level at interval boundaries: membership at the
    /// midpoint between adjacent centers equals `(1 - alpha) / 2`.
    pub alpha: f64,
    /// Yager nonmembership class parameter, in (0, 1].
    pub beta: f64,
    pub abnormal_set: Vec<usize>,
    pub normal_set: Vec<usize>,
    pub tau: f64,
    pub tallies: Vec<IntervalTally>,
    /// True when training saw only one class.
    pub single_class: bool,
}

/// Settings for fitting one characteristic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Requested interval count; clamped down to the number of distinct
    /// training values when they are fewer.
    pub intervals: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Domain margin on each side, as a fraction of the training range.
    pub margin_frac: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            intervals: 10,
            alpha: 0.2,
            beta: 0.8,
            margin_frac: 0.05,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=24).contains(&self.intervals) {
            return Err(Error::InvalidParam(format!(
                "interval count must lie in [2, 24], got {}",
                self.intervals
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParam(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.margin_frac > 0.0) || !self.margin_frac.is_finite() {
            return Err(Error::InvalidParam(format!(
                "margin fraction must be positive, got {}",
                self.margin_frac
            )));
        }
        Ok(())
    }
}

/// Cuts the value domain into intervals around the centers: the outer
/// bounds pad the observed range by `eps1`/`eps2`, the inner bounds sit
/// at midpoints between neighboring centers.
pub fn partition_domain(
    values: &[f64],
    centers: &[f64],
    eps1: f64,
    eps2: f64,
) -> Result<Vec<f64>> {
    if values.is_empty() || centers.len() < 2 {
        return Err(Error::InsufficientData(
            "domain partition needs values and at least 2 centers".to_string(),
        ));
    }
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::InvalidParam(format!(
            "domain margins must be positive, got {eps1} and {eps2}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut bounds = Vec::with_capacity(centers.len() + 1);
    bounds.push(lo - eps1);
    for pair in centers.windows(2) {
        bounds.push((pair[0] + pair[1]) / 2.0);
    }
    bounds.push(hi + eps2);
    if !bounds.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParam(format!(
            "domain bounds are not strictly increasing: {bounds:?}"
        )));
    }
    Ok(bounds)
}

/// Yager-class nonmembership: `(1 - mu^beta)^(1/beta)` with beta in
/// (0, 1], which never exceeds `1 - mu`.
pub fn nonmembership(mu: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParam(format!(
            "membership must lie in [0, 1], got {mu}"
        )));
    }
    Ok((1.0 - mu.powf(beta)).max(0.0).powf(1.0 / beta))
}

impl CharacteristicModel {
    pub fn interval_count(&self) -> usize {
        self.centers.len()
    }

    /// Squared Gaussian spread of interval `i`, derived from the gap to
    /// the previous center (the first interval uses the gap to the
    /// next): chosen so membership at the midpoint between adjacent
    /// centers equals `(1 - alpha) / 2`.
    fn spread_sq(&self, i: usize) -> f64 {
        let gap = if i == 0 {
            self.centers[1] - self.centers[0]
        } else {
            self.centers[i] - self.centers[i - 1]
        };
        let level = (1.0 - self.alpha) / 2.0;
        -(gap * gap) / (8.0 * level.ln())
    }

    /// Gaussian membership of `x` in interval `i`; exactly 1 at the
    /// interval's center.
    pub fn membership(&self, x: f64, i: usize) -> f64 {
        let d = x - self.centers[i];
        (-(d * d) / (2.0 * self.spread_sq(i))).exp()
    }

    /// The full triple row of `x`: one intuitionistic value per interval.
    pub fn ifs_of_value(&self, x: f64) -> Vec<IntuitionisticValue> {
        (0..self.interval_count())
            .map(|i| {
                let mu = self.membership(x, i);
                let gamma = nonmembership(mu, self.beta)
                    .expect("model validation fixed beta in (0, 1]");
                IntuitionisticValue::new(mu, gamma)
            })
            .collect()
    }

    /// Index of the interval containing `x`; values outside the padded
    /// domain clamp to the nearest outer interval.
    pub fn interval_of(&self, x: f64) -> usize {
        let m = self.interval_count();
        let after = self.bounds.partition_point(|b| *b <= x);
        after.saturating_sub(1).min(m - 1)
    }

    /// IFS-AD: assign `x` to the interval with the largest membership
    /// (ties go to the interval whose center is nearer, then to the
    /// lower index) and report its side of the distinction split.
    pub fn classify(&self, x: f64) -> Label {
        let mut best = 0usize;
        let mut best_mu = self.membership(x, 0);
        for i in 1..self.interval_count() {
            let mu = self.membership(x, i);
            let better = mu > best_mu
                || (mu == best_mu
                    && (x - self.centers[i]).abs() < (x - self.centers[best]).abs());
            if better {
                best = i;
                best_mu = mu;
            }
        }
        if self.abnormal_set.contains(&best) {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }

    /// Structural checks for models read back from disk.
    pub fn validate(&self) -> Result<()> {
        let m = self.interval_count();
        if m < 2 {
            return Err(Error::InvalidParam(
                "model needs at least 2 intervals".to_string(),
            ));
        }
        if self.bounds.len() != m + 1 {
            return Err(Error::InvalidParam(format!(
                "model has {m} centers but {} bounds",
                self.bounds.len()
            )));
        }
        if !self.centers.windows(2).all(|w| w[0] < w[1])
            || !self.bounds.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidParam(
                "model centers/bounds must be strictly increasing".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParam(format!(
                "model alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "model beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if self.tallies.len() != m {
            return Err(Error::InvalidParam(
                "model tallies must cover every interval".to_string(),
            ));
        }
        let mut seen = vec![false; m];
        for &i in self.abnormal_set.iter().chain(&self.normal_set) {
            if i >= m || seen[i] {
                return Err(Error::InvalidParam(
                    "abnormal/normal sets must partition the intervals".to_string(),
                ));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParam(
                "abnormal/normal sets must cover every interval".to_string(),
            ));
        }
        Ok(())
    }
}

/// Splits intervals into abnormal/normal sets by maximizing the
/// distinction index over all non-trivial bipartitions.
///
/// For a candidate abnormal set AC with complement NC, pooled ratios are
/// formed from the tallies: TT and TF are the abnormal and normal shares
/// of all instances inside AC, FF and FT the normal and abnormal shares
/// inside NC; a side with no instances contributes 0. The index is
/// `eta = TT - TF + FF - FT`, maximized over AC (ties prefer the smaller
/// set, then lexicographic order), and the normalized distinction is
/// `tau = eta / (TT + TF + FF + FT)`.
pub fn distinction_partition(tallies: &[IntervalTally]) -> Result<Distinction> {
    let m = tallies.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "distinction needs at least 2 intervals, got {m}"
        )));
    }
    if m > 24 {
        return Err(Error::InvalidParam(format!(
            "distinction enumerates 2^m partitions; m = {m} is too large"
        )));
    }
    let total_abnormal: u64 = tallies.iter().map(|t| t.abnormal).sum();
    let total_normal: u64 = tallies.iter().map(|t| t.normal).sum();
    if total_abnormal + total_normal == 0 {
        return Err(Error::InsufficientData(
            "distinction needs at least one training instance".to_string(),
        ));
    }

    let full: u32 = (1u32 << m) - 1;
    let mut best_mask = 0u32;
    let mut best_eta = f64::NEG_INFINITY;
    let mut best_tau = 0.0f64;
    for mask in 1..full {
        let (mut ac_abnormal, mut ac_normal) = (0u64, 0u64);
        for (i, t) in tallies.iter().enumerate() {
            if mask & (1 << i) != 0 {
                ac_abnormal += t.abnormal;
                ac_normal += t.normal;
            }
        }
        let nc_abnormal = total_abnormal - ac_abnormal;
        let nc_normal = total_normal - ac_normal;
        let ac_total = ac_abnormal + ac_normal;
        let nc_total = nc_abnormal + nc_normal;
        let (tt, tf) = if ac_total > 0 {
            (
                ac_abnormal as f64 / ac_total as f64,
                ac_normal as f64 / ac_total as f64,
            )
        } else {
            (0.0, 0.0)
        };
        let (ff, ft) = if nc_total > 0 {
            (
                nc_normal as f64 / nc_total as f64,
                nc_abnormal as f64 / nc_total as f64,
            )
        } else {
            (0.0, 0.0)
        };
        let eta = tt - tf + ff - ft;
        if eta > best_eta || (eta == best_eta && mask_precedes(mask, best_mask)) {
            best_eta = eta;
            best_mask = mask;
            let denom = tt + tf + ff + ft;
            best_tau = if denom > 0.0 { eta / denom } else { 0.0 };
        }
    }

    let abnormal_set: Vec<usize> = (0..m).filter(|i| best_mask & (1 << i) != 0).collect();
    let normal_set: Vec<usize> = (0..m).filter(|i| best_mask & (1 << i) == 0).collect();
    Ok(Distinction {
        abnormal_set,
        normal_set,
        eta: best_eta,
        tau: best_tau.clamp(0.0, 1.0),
        single_class: total_abnormal == 0 || total_normal == 0,
    })
}

/// True when `a` is preferred over `b` at equal eta: fewer members,
/// then lexicographically smaller index list.
fn mask_precedes(a: u32, b: u32) -> bool {
    let (ca, cb) = (a.count_ones(), b.count_ones());
    if ca != cb {
        return ca < cb;
    }
    // With equal sizes, the lexicographically smaller sorted index list
    // is the one whose lowest differing bit is set.
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    a & (1 << diff.trailing_zeros()) != 0
}

/// Fits one characteristic model from its training series and labels.
///
/// The interval count is clamped to the number of distinct values so
/// integer-valued characteristics with narrow ranges stay trainable;
/// a constant series still fails (no second cluster is possible).
pub fn train_characteristic(
    values: &[f64],
    labels: &[Label],
    params: &TrainParams,
) -> Result<CharacteristicModel> {
    params.validate()?;
    if values.len() != labels.len() {
        return Err(Error::InvalidParam(format!(
            "got {} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let m = params.intervals.min(distinct.len());
    let centers = fcm_centers(values, m)?;

    let lo = distinct.first().copied().unwrap_or(0.0);
    let hi = distinct.last().copied().unwrap_or(0.0);
    let margin = params.margin_frac * (hi - lo);
    let bounds = partition_domain(values, &centers, margin, margin)?;

    let mut tallies = vec![IntervalTally::default(); m];
    let probe = CharacteristicModel {
        centers: centers.clone(),
        bounds: bounds.clone(),
        alpha: params.alpha,
        beta: params.beta,
        abnormal_set: Vec::new(),
        normal_set: (0..m).collect(),
        tau: 0.0,
        tallies: tallies.clone(),
        single_class: false,
    };
    for (&x, &label) in values.iter().zip(labels) {
        let i = probe.interval_of(x);
        match label {
            Label::Abnormal => tallies[i].abnormal += 1,
            Label::Normal => tallies[i].normal += 1,
        }
    }
    let distinction = distinction_partition(&tallies)?;
    Ok(CharacteristicModel {
        centers,
        bounds,
        alpha: params.alpha,
        beta: params.beta,
        abnormal_set: distinction.abnormal_set,
        normal_set: distinction.normal_set,
        tau: distinction.tau,
        tallies,
        single_class: distinction.single_class,
    })
}
