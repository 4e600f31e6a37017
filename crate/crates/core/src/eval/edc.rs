//! Error-versus-discard characteristic and its partial area.

use serde::{Deserialize, Serialize};

use super::{combine_quality, ComparisonRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// All mated comparisons, discarded or not.
    #[default]
    Total,
    /// Only the comparisons that remain after discarding.
    Remaining,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreConvention {
    /// Higher is more similar; a comparison fails when `s <= t` and `t` is
    /// the f-quantile of mated scores.
    #[default]
    Similarity,
    /// Lower is more similar; a comparison fails when `s >= t` and `t` is
    /// the (1 − f)-quantile of mated scores.
    Dissimilarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdcConfig {
    /// Target FNMR before any discarding.
    pub f: f64,
    pub discard_step: f64,
    pub max_discard: f64,
    pub pauc_limit: f64,
    pub denominator: Denominator,
    pub convention: ScoreConvention,
    pub min_mated: usize,
}

impl Default for EdcConfig {
    fn default() -> Self {
        Self {
            f: 0.25,
            discard_step: 0.01,
            max_discard: 0.98,
            pauc_limit: 0.2,
            denominator: Denominator::Total,
            convention: ScoreConvention::Similarity,
            min_mated: 10,
        }
    }
}

impl EdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.f < 1.0) {
            return Err(Error::InvalidParam(format!("f must lie in (0, 1), got {}", self.f)));
        }
        if !(self.discard_step > 0.0 && self.discard_step <= 1.0) {
            return Err(Error::InvalidParam("discard_step must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.max_discard) {
            return Err(Error::InvalidParam("max_discard must lie in [0, 1]".into()));
        }
        if !(self.pauc_limit > 0.0 && self.pauc_limit <= self.max_discard + 1e-12) {
            return Err(Error::InvalidParam("pauc_limit must lie in (0, max_discard]".into()));
        }
        if self.min_mated == 0 {
            return Err(Error::InvalidParam("min_mated must be >= 1".into()));
        }
        Ok(())
    }

    /// `0, step, 2·step, …` up to `max_discard` (inclusive within 1e-9).
    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.max_discard / self.discard_step + 1e-9).floor() as usize;
        (0..=steps).map(|i| i as f64 * self.discard_step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdcPoint {
    pub discard_fraction: f64,
    pub discarded: usize,
    pub fnmr: f64,
    /// Highest discarded quality; `None` when nothing is discarded.
    pub u: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdcCurve {
    pub points: Vec<EdcPoint>,
    pub threshold: f64,
    pub f: f64,
}

/// Records discarded at fraction `g` of `n`: `⌈g·n⌉`, robust to the
/// representation error of `g`.
pub fn discard_count(g: f64, n: usize) -> usize {
    ((g * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Smallest mated score whose empirical CDF reaches `f`.
fn lower_quantile(sorted: &[f64], f: f64) -> f64 {
    let n = sorted.len();
    let k = ((f * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Builds the EDC over the mated records; non-mated records are ignored.
pub fn edc_curve(records: &[ComparisonRecord], cfg: &EdcConfig) -> Result<EdcCurve> {
    cfg.validate()?;
    let mated: Vec<&ComparisonRecord> = records.iter().filter(|r| r.mated).collect();
    let n = mated.len();
    if n < cfg.min_mated {
        return Err(Error::Metric(format!("EDC needs at least {} mated records, got {n}", cfg.min_mated)));
    }
    if mated.iter().any(|r| !r.score.is_finite()) {
        return Err(Error::Metric("scores must be finite".into()));
    }
    // internal scores are similarity-oriented
    let s: Vec<f64> = match cfg.convention {
        ScoreConvention::Similarity => mated.iter().map(|r| r.score).collect(),
        ScoreConvention::Dissimilarity => mated.iter().map(|r| -r.score).collect(),
    };
    let mut sorted = s.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Metric("all mated scores are equal; the FNMR threshold is degenerate".into()));
    }
    let t = lower_quantile(&sorted, cfg.f);
    let fails: Vec<bool> = s.iter().map(|&v| v <= t).collect();

    let q: Vec<u8> = mated.iter().map(|r| combine_quality(r.q1, r.q2)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (q[i], i));
    // remaining[k]: failures among records not in the k lowest
    let total_fail = fails.iter().filter(|&&b| b).count();
    let mut remaining = Vec::with_capacity(n + 1);
    remaining.push(total_fail);
    for &i in &order {
        remaining.push(remaining.last().unwrap() - fails[i] as usize);
    }

    let points = cfg
        .grid()
        .into_iter()
        .map(|g| {
            let k = discard_count(g, n);
            let denom = match cfg.denominator {
                Denominator::Total => n,
                Denominator::Remaining => n - k,
            };
            EdcPoint {
                discard_fraction: g,
                discarded: k,
                fnmr: if denom == 0 { 0.0 } else { remaining[k] as f64 / denom as f64 },
                u: (k > 0).then(|| q[order[k - 1]]),
            }
        })
        .collect();
    let threshold = match cfg.convention {
        ScoreConvention::Similarity => t,
        ScoreConvention::Dissimilarity => -t,
    };
    Ok(EdcCurve { points, threshold, f: cfg.f })
}

/// Trapezoidal area under `(discard_fraction, fnmr)` on `[0, limit]`; a
/// limit between grid points is reached by linear interpolation.
pub fn edc_pauc(curve: &EdcCurve, limit: f64) -> Result<f64> {
    let pts = &curve.points;
    if limit.is_nan() || limit <= 0.0 {
        return Err(Error::Metric(format!("PAUC limit must be positive, got {limit}")));
    }
    let covered = pts.first().is_some_and(|p| p.discard_fraction == 0.0)
        && pts.last().is_some_and(|p| p.discard_fraction >= limit - 1e-12);
    if !covered {
        return Err(Error::Metric(format!("curve does not cover discard range [0, {limit}]")));
    }
    let mut area = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.discard_fraction >= limit - 1e-12 {
            break;
        }
        let (x1, y1) = if b.discard_fraction > limit + 1e-12 {
            let t = (limit - a.discard_fraction) / (b.discard_fraction - a.discard_fraction);
            (limit, a.fnmr + t * (b.fnmr - a.fnmr))
        } else {
            (b.discard_fraction, b.fnmr)
        };
        area += (x1 - a.discard_fraction) * (a.fnmr + y1) / 2.0;
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(s: f64, q: u8) -> ComparisonRecord {
        ComparisonRecord { probe_id: String::new(), reference_id: String::new(), mated: true, score: s, q1: q, q2: q }
    }

    fn cfg_small() -> EdcConfig {
        EdcConfig { min_mated: 1, ..EdcConfig::default() }
    }

    fn curve(points: &[(f64, f64)]) -> EdcCurve {
        EdcCurve {
            points: points
                .iter()
                .map(|&(d, f)| EdcPoint { discard_fraction: d, discarded: 0, fnmr: f, u: None })
                .collect(),
            threshold: 0.0,
            f: 0.0,
        }
    }

    #[test]
    fn four_record_example() {
        let recs = [rec(0.2, 10), rec(0.3, 20), rec(0.8, 70), rec(0.9, 80)];
        let cfg = EdcConfig { f: 0.5, ..cfg_small() };
        let c = edc_curve(&recs, &cfg).unwrap();
        assert_eq!(c.threshold, 0.3);
        assert_eq!(c.points[0].fnmr, 0.5);
        let p25 = c.points.iter().find(|p| (p.discard_fraction - 0.25).abs() < 1e-12).unwrap();
        assert_eq!(p25.discarded, 1);
        assert_eq!(p25.fnmr, 0.25);
        assert_eq!(p25.u, Some(10));
    }

    #[test]
    fn perfect_predictor_reaches_zero_at_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut scores: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        scores.sort_by(f64::total_cmp);
        // quality rank equals score rank
        let recs: Vec<_> = scores.iter().enumerate().map(|(i, &s)| rec(s, (i / 2) as u8)).collect();
        let c = edc_curve(&recs, &EdcConfig::default()).unwrap();
        assert_eq!(c.points[0].fnmr, 0.25);
        let at_f = c.points.iter().find(|p| (p.discard_fraction - 0.25).abs() < 1e-12).unwrap();
        assert_eq!(at_f.fnmr, 0.0);
        assert!(c.points.windows(2).all(|w| w[1].fnmr <= w[0].fnmr));
    }

    #[test]
    fn constant_quality_declines_linearly_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, trials) = (1000, 20);
        let cfg = EdcConfig::default();
        let mut mean = vec![0.0; cfg.grid().len()];
        for _ in 0..trials {
            let recs: Vec<_> = (0..n).map(|_| rec(rng.random(), 50)).collect();
            let c = edc_curve(&recs, &cfg).unwrap();
            // brute force: discarded records are the first k by index
            for (m, p) in mean.iter_mut().zip(&c.points) {
                let k = discard_count(p.discard_fraction, n);
                let fails = recs[k..].iter().filter(|r| r.score <= c.threshold).count();
                assert_eq!(p.fnmr, fails as f64 / n as f64);
                *m += p.fnmr / trials as f64;
            }
        }
        for (g, m) in cfg.grid().iter().zip(&mean) {
            let expected = 0.25 * (1.0 - g);
            assert!((m - expected).abs() < 0.01, "g {g}: {m} vs {expected}");
        }
    }

    #[test]
    fn remaining_denominator() {
        let recs = [rec(0.2, 10), rec(0.3, 20), rec(0.8, 70), rec(0.9, 80)];
        let cfg = EdcConfig { f: 0.5, denominator: Denominator::Remaining, ..cfg_small() };
        let c = edc_curve(&recs, &cfg).unwrap();
        let p25 = c.points.iter().find(|p| p.discarded == 1).unwrap();
        assert!((p25.fnmr - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dissimilarity_convention_mirrors_similarity() {
        let recs = [rec(0.2, 10), rec(0.3, 20), rec(0.8, 70), rec(0.9, 80)];
        let neg: Vec<_> = recs.iter().map(|r| rec(-r.score, r.q1)).collect();
        let cfg = EdcConfig { f: 0.5, ..cfg_small() };
        let a = edc_curve(&recs, &cfg).unwrap();
        let dcfg = EdcConfig { convention: ScoreConvention::Dissimilarity, ..cfg.clone() };
        let b = edc_curve(&neg, &dcfg).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(b.threshold, -0.3);
    }

    #[test]
    fn degenerate_and_small_inputs() {
        let recs: Vec<_> = (0..20).map(|i| rec(0.5, i)).collect();
        assert!(matches!(edc_curve(&recs, &EdcConfig::default()), Err(Error::Metric(_))));
        let few: Vec<_> = (0..5).map(|i| rec(i as f64, i)).collect();
        assert!(edc_curve(&few, &EdcConfig::default()).is_err());
    }

    #[test]
    fn quality_ranking_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let recs: Vec<_> = (0..100).map(|_| rec(rng.random(), rng.random_range(0..50))).collect();
        let mapped: Vec<_> = recs.iter().map(|r| rec(r.score, 2 * r.q1 + 1)).collect();
        let a = edc_curve(&recs, &EdcConfig::default()).unwrap();
        let b = edc_curve(&mapped, &EdcConfig::default()).unwrap();
        let strip = |c: &EdcCurve| c.points.iter().map(|p| (p.discard_fraction, p.fnmr)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn pauc_closed_forms() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.01).collect();
        let constant = curve(&grid.iter().map(|&g| (g, 0.3)).collect::<Vec<_>>());
        assert!((edc_pauc(&constant, 0.2).unwrap() - 0.2 * 0.3).abs() < 1e-12);
        let line = curve(&grid.iter().map(|&g| (g, 0.3 * (1.0 - g / 0.2))).collect::<Vec<_>>());
        assert!((edc_pauc(&line, 0.2).unwrap() - 0.1 * 0.3).abs() < 1e-12);
        let three = curve(&[(0.0, 0.5), (0.1, 0.3), (0.2, 0.2)]);
        assert!((edc_pauc(&three, 0.2).unwrap() - 0.065).abs() < 1e-15);
        // interpolated limit: half of the second trapezoid's base
        assert!((edc_pauc(&three, 0.15).unwrap() - (0.04 + 0.05 * (0.3 + 0.25) / 2.0)).abs() < 1e-15);
        assert!(edc_pauc(&curve(&[(0.0, 0.5), (0.1, 0.3)]), 0.2).is_err());
    }

    #[test]
    fn discard_count_is_exact_ceiling() {
        for n in 1..=200usize {
            for i in 0..=100usize {
                let expected = (i * n).div_ceil(100);
                assert_eq!(discard_count(i as f64 * 0.01, n), expected, "i {i} n {n}");
            }
        }
    }
}
