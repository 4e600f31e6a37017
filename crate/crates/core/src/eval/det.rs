//! DET curve and equal error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetResult {
    /// Ascending threshold; FNMR non-decreasing, FMR non-increasing.
    pub points: Vec<DetPoint>,
    pub eer: f64,
}

/// Number of elements of ascending `v` that are `<= t`.
fn count_le(v: &[f64], t: f64) -> usize {
    v.partition_point(|&s| s <= t)
}

/// Sweeps every distinct observed score as threshold. A comparison is
/// rejected when `s <= t`, so FNMR counts mated `s <= t` and FMR counts
/// non-mated `s > t`. The EER is the mean of FNMR and FMR at the first
/// threshold minimizing their gap.
pub fn compute_det(mated: &[f64], nonmated: &[f64]) -> Result<DetResult> {
    if mated.is_empty() || nonmated.is_empty() {
        return Err(Error::Metric("DET needs at least one mated and one non-mated score".into()));
    }
    if mated.iter().chain(nonmated).any(|s| !s.is_finite()) {
        return Err(Error::Metric("scores must be finite".into()));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (m, n) = (sorted(mated), sorted(nonmated));
    let mut thresholds: Vec<f64> = m.iter().chain(&n).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let points: Vec<DetPoint> = thresholds
        .iter()
        .map(|&t| DetPoint {
            threshold: t,
            fnmr: count_le(&m, t) as f64 / m.len() as f64,
            fmr: (n.len() - count_le(&n, t)) as f64 / n.len() as f64,
        })
        .collect();
    let best =
        points.iter().min_by(|a, b| (a.fnmr - a.fmr).abs().total_cmp(&(b.fnmr - b.fmr).abs())).expect("non-empty");
    let eer = (best.fnmr + best.fmr) / 2.0;
    Ok(DetResult { points, eer })
}
