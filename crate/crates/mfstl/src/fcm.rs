//! One-dimensional fuzzy c-means clustering.
//!
//! Used to place interval centers on a characteristic's training series.
//! Initialization is deterministic (evenly spaced quantiles), so a given
//! series always produces the same centers.

use crate::error::{Error, Result};

/// Membership exponent of the fuzzy objective.
const FUZZIFIER: f64 = 2.0;
/// Convergence threshold on the largest center movement.
const TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 300;

/// Clusters `values` into `m` centers, returned in ascending order.
///
/// Requires `m >= 2` and at least `m` distinct values. Centers start at
/// the `(k - 0.5) / m` quantiles and iterate the standard alternating
/// membership/center updates until the largest center movement falls
/// below 1e-6 or 300 iterations pass.
pub fn fcm_centers(values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidParam(format!(
            "cluster count must be at least 2, got {m}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam(
            "values must be finite for clustering".to_string(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < m {
        return Err(Error::InsufficientData(format!(
            "insufficient distinct values: need {m}, got {}",
            distinct.len()
        )));
    }

    let mut centers = init_quantiles(&sorted, m);
    if !strictly_increasing(&centers) {
        // Heavy point masses can collapse data quantiles; quantiles of
        // the distinct values are always strictly increasing.
        centers = init_quantiles(&distinct, m);
    }

    let exponent = 2.0 / (FUZZIFIER - 1.0);
    let mut memberships = vec![0.0f64; values.len() * m];
    for _ in 0..MAX_ITERATIONS {
        // Membership update.
        for (i, &x) in values.iter().enumerate() {
            let row = &mut memberships[i * m..(i + 1) * m];
            let mut exact = None;
            for (k, &c) in centers.iter().enumerate() {
                if x == c {
                    exact = Some(k);
                    break;
                }
            }
            if let Some(k) = exact {
                row.fill(0.0);
                row[k] = 1.0;
                continue;
            }
            for (k, &c) in centers.iter().enumerate() {
                let dk = (x - c).abs();
                let mut denom = 0.0;
                for &c2 in &centers {
                    denom += (dk / (x - c2).abs()).powf(exponent);
                }
                row[k] = 1.0 / denom;
            }
        }
        // Center update.
        let mut moved = 0.0f64;
        for k in 0..m {
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, &x) in values.iter().enumerate() {
                let u = memberships[i * m + k];
                let w = u.powf(FUZZIFIER);
                num += w * x;
                den += w;
            }
            if den > 0.0 {
                let next = num / den;
                moved = moved.max((next - centers[k]).abs());
                centers[k] = next;
            }
        }
        if moved < TOLERANCE {
            break;
        }
    }
    centers.sort_by(f64::total_cmp);
    if !strictly_increasing(&centers) {
        return Err(Error::InsufficientData(
            "clustering collapsed two centers onto the same value".to_string(),
        ));
    }
    Ok(centers)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Linear-interpolation quantiles of a sorted slice at `(k - 0.5) / m`.
fn init_quantiles(sorted: &[f64], m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let q = (k as f64 + 0.5) / m as f64;
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            if lo == hi {
                sorted[lo]
            } else {
                let t = pos - lo as f64;
                sorted[lo] * (1.0 - t) + sorted[hi] * t
            }
        })
        .collect()
}
