//! Recognition-performance and quality-predictiveness metrics.

mod det;
mod edc;
mod io;
mod matcher;

use serde::{Deserialize, Serialize};

pub use det::{compute_det, DetPoint, DetResult};
pub use edc::{discard_count, edc_curve, edc_pauc, Denominator, EdcConfig, EdcCurve, EdcPoint, ScoreConvention};
pub use io::{
    attach_quality, read_edc_csv, read_quality_csv, read_quality_csv_file, read_scores_csv, read_scores_csv_file,
    write_det_csv, write_edc_csv, write_pauc_summary_csv, write_quality_csv, write_scores_csv, PaucSummary, QualityRow,
    EDC_HEADER, QUALITY_HEADER, SCORES_HEADER,
};
pub use matcher::{toy_match, toy_matcher, MatchTemplate, MatcherConfig};

/// One comparison with the qualities of both samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub probe_id: String,
    pub reference_id: String,
    pub mated: bool,
    /// Similarity; higher means more alike.
    pub score: f64,
    pub q1: u8,
    pub q2: u8,
}

/// Pairwise quality of a comparison: the worse of the two samples.
pub fn combine_quality(q1: u8, q2: u8) -> u8 {
    q1.min(q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_is_min() {
        assert_eq!(combine_quality(80, 70), 70);
        assert_eq!(combine_quality(0, 100), 0);
        for a in 0..=100 {
            assert_eq!(combine_quality(a, a), a);
            for b in 0..=100 {
                assert_eq!(combine_quality(a, b), combine_quality(b, a));
            }
        }
    }
}
