//! The canonical 65-entry feature vector and its CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::families::{
    histogram_bins, ocl_blocks, orientation_flow_blocks, scalar_features, signature_blocks, BlockValues,
    SignatureFamilies, SignatureFamily, N_BINS,
};
use super::orientation::{coherence_sums, BlockAnalysis};
use crate::error::{Error, Result};
use crate::raster::{ForegroundMask, GrayRaster};

pub const FEATURE_COUNT: usize = 65;

/// Feature names in canonical order. "Local Clarity Score Bin1" carries no
/// space; the string is kept as published so vectors stay interchangeable.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "Frequency Domain Analysis Bin 0",
    "Frequency Domain Analysis Bin 1",
    "Frequency Domain Analysis Bin 2",
    "Frequency Domain Analysis Bin 3",
    "Frequency Domain Analysis Bin 4",
    "Frequency Domain Analysis Bin 5",
    "Frequency Domain Analysis Bin 6",
    "Frequency Domain Analysis Bin 7",
    "Frequency Domain Analysis Bin 8",
    "Frequency Domain Analysis Bin 9",
    "Frequency Domain Analysis Mean",
    "Frequency Domain Analysis Standard Deviation",
    "ROI Area Mean",
    "Local Clarity Score Bin 0",
    "Local Clarity Score Bin1",
    "Local Clarity Score Bin 2",
    "Local Clarity Score Bin 3",
    "Local Clarity Score Bin 4",
    "Local Clarity Score Bin 5",
    "Local Clarity Score Bin 6",
    "Local Clarity Score Bin 7",
    "Local Clarity Score Bin 8",
    "Local Clarity Score Bin 9",
    "Local Clarity Score Mean",
    "Local Clarity Score Standard Deviation",
    "MMB",
    "MU",
    "Orientation Certainty Level Bin 0",
    "Orientation Certainty Level Bin 1",
    "Orientation Certainty Level Bin 2",
    "Orientation Certainty Level Bin 3",
    "Orientation Certainty Level Bin 4",
    "Orientation Certainty Level Bin 5",
    "Orientation Certainty Level Bin 6",
    "Orientation Certainty Level Bin 7",
    "Orientation Certainty Level Bin 8",
    "Orientation Certainty Level Bin 9",
    "Orientation Certainty Level Mean",
    "Orientation Certainty Level Standard Deviation",
    "Orientation Flow Bin 0",
    "Orientation Flow Bin 1",
    "Orientation Flow Bin 2",
    "Orientation Flow Bin 3",
    "Orientation Flow Bin 4",
    "Orientation Flow Bin 5",
    "Orientation Flow Bin 6",
    "Orientation Flow Bin 7",
    "Orientation Flow Bin 8",
    "Orientation Flow Bin 9",
    "Orientation Flow Mean",
    "Orientation Flow Standard Deviation",
    "ROI Relative Orientation Map Coherence Sum",
    "ROI Orientation Map Coherence Sum",
    "Ridge Valley Uniformity Bin 0",
    "Ridge Valley Uniformity Bin 1",
    "Ridge Valley Uniformity Bin 2",
    "Ridge Valley Uniformity Bin 3",
    "Ridge Valley Uniformity Bin 4",
    "Ridge Valley Uniformity Bin 5",
    "Ridge Valley Uniformity Bin 6",
    "Ridge Valley Uniformity Bin 7",
    "Ridge Valley Uniformity Bin 8",
    "Ridge Valley Uniformity Bin 9",
    "Ridge Valley Uniformity Mean",
    "Ridge Valley Uniformity Standard Deviation",
];

/// Minutiae features of the extended 69-entry layout; they sit between
/// the FDA block and "ROI Area Mean". Never computed here.
pub const MINUTIAE_FEATURE_NAMES: [&str; 4] = [
    "FingerJet FX OSE COM Minutiae Count",
    "FingerJet FX OSE Total Minutiae Count",
    "FingerJet FX OSE Mu Minutiae Quality",
    "FingerJet FX OSE OCL Minutiae Quality",
];

/// The 69-entry layout used by models trained with minutiae features.
pub fn extended_feature_names() -> Vec<&'static str> {
    let mut names = FEATURE_NAMES[..12].to_vec();
    names.extend(MINUTIAE_FEATURE_NAMES);
    names.extend(&FEATURE_NAMES[12..]);
    names
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub block_px: usize,
    /// Fallback ridge period for FDA windows whose local period cannot be
    /// measured; matches the normalization target.
    pub nominal_period: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { block_px: 32, nominal_period: 9.0 }
    }
}

/// 65 finite values in [`FEATURE_NAMES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_COUNT {
            return Err(Error::FeatureCount { expected: FEATURE_COUNT, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Feature {
                family: "vector",
                reason: format!("non-finite value for {:?}", FEATURE_NAMES[i]),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }

    /// Values laid out for a model trained on `names`; minutiae entries the
    /// vector does not carry are filled with `pad`.
    pub fn aligned_to<S: AsRef<str>>(&self, names: &[S], pad: f64) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                match feature_index(n) {
                    Some(i) => Ok(self.values[i]),
                    None if MINUTIAE_FEATURE_NAMES.contains(&n) => Ok(pad),
                    None => {
                        Err(Error::Feature { family: "vector", reason: format!("model expects unknown feature {n:?}") })
                    }
                }
            })
            .collect()
    }

    /// Byte image of the values, for determinism checks.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

fn push_family(out: &mut Vec<f64>, values: &BlockValues) -> Result<()> {
    out.extend(histogram_bins(values, N_BINS)?);
    let (mean, std) = values.mean_std()?;
    out.push(mean);
    out.push(std);
    Ok(())
}

/// All families at `cfg.block_px`, assembled in canonical order.
pub fn extract_feature_vector(
    sample: &GrayRaster,
    mask: &ForegroundMask,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    if !mask.matches(sample) {
        return Err(Error::InvalidParam("mask dimensions differ from sample".into()));
    }
    let img = sample.to_float();
    let blocks = BlockAnalysis::new(sample, mask, cfg.block_px)?;
    let omap = blocks.orientation_map();
    let sig = SignatureFamilies::new(cfg.nominal_period);
    let family = |which| signature_blocks(&img, &blocks, &omap, &sig, which);

    let mut v = Vec::with_capacity(FEATURE_COUNT);
    push_family(&mut v, &family(SignatureFamily::Frequency))?;
    let (mu, mmb, area) = scalar_features(sample, mask, cfg.block_px)?;
    v.push(area);
    push_family(&mut v, &family(SignatureFamily::Clarity))?;
    v.push(mmb);
    v.push(mu);
    push_family(&mut v, &ocl_blocks(&blocks))?;
    push_family(&mut v, &orientation_flow_blocks(&omap))?;
    let (roi_sum, roi_relative) = coherence_sums(&blocks.coherence_map())?;
    v.push(roi_relative);
    v.push(roi_sum);
    push_family(&mut v, &family(SignatureFamily::Uniformity))?;
    FeatureVector::new(v)
}

/// One feature row keyed by image id.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub image_id: String,
    pub features: FeatureVector,
}

pub fn feature_csv_header() -> Vec<&'static str> {
    std::iter::once("image_id").chain(FEATURE_NAMES).collect()
}

/// Writes `image_id` plus the 65 named columns. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv { path: Default::default(), line: 0, reason: e.to_string() };
    w.write_record(feature_csv_header()).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.image_id.clone()];
        rec.extend(r.features.values().iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

pub fn write_feature_csv_file(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_csv(std::io::BufWriter::new(f), rows)
}

pub fn read_feature_csv<R: Read>(input: R, label: &str) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(input);
    let err = |line: u64, reason: String| Error::Csv { path: label.into(), line, reason };
    let header = r.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let expected = feature_csv_header();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != *b) {
        return Err(err(1, "header does not match the canonical feature columns".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>().map_err(|e| err(line, format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureVector::new(values).map_err(|e| err(line, e.to_string()))?;
        rows.push(FeatureRow { image_id: rec[0].to_string(), features });
    }
    Ok(rows)
}

pub fn read_feature_csv_file(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_csv(std::io::BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::gaussian_blur_gray;
    use crate::testutil::grating;

    fn full(img: &GrayRaster) -> ForegroundMask {
        ForegroundMask::full(img.width(), img.height()).unwrap()
    }

    #[test]
    fn names_are_unique_and_extended_layout_has_69() {
        let mut sorted = FEATURE_NAMES.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), FEATURE_COUNT);
        let ext = extended_feature_names();
        assert_eq!(ext.len(), 69);
        assert_eq!(ext[12], MINUTIAE_FEATURE_NAMES[0]);
        assert_eq!(ext[16], "ROI Area Mean");
    }

    #[test]
    fn clean_grating_vector() {
        let img = grating(192, 192, 9.0, 1.0, 0.0);
        let fv = extract_feature_vector(&img, &full(&img), &FeatureConfig::default()).unwrap();
        assert_eq!(fv.values().len(), FEATURE_COUNT);
        assert!(fv.get("Orientation Certainty Level Mean").unwrap() >= 0.9);
        assert!(fv.get("Frequency Domain Analysis Mean").unwrap() >= 0.8);
        assert!(fv.get("ROI Relative Orientation Map Coherence Sum").unwrap() >= 0.9);
        for (name, v) in fv.iter() {
            assert!(v.is_finite(), "{name}");
            if name.ends_with("Standard Deviation") {
                assert!(v <= 0.5, "{name} = {v}");
            }
        }
    }

    #[test]
    fn blur_lowers_ocl_mean() {
        let img = grating(192, 192, 9.0, 0.5, 0.0);
        let cfg = FeatureConfig::default();
        let clean = extract_feature_vector(&img, &full(&img), &cfg).unwrap();
        let blurred_img = gaussian_blur_gray(&img, 4.0);
        let blurred = extract_feature_vector(&blurred_img, &full(&img), &cfg).unwrap();
        let key = "Orientation Certainty Level Mean";
        assert!(blurred.get(key).unwrap() < clean.get(key).unwrap());
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = grating(160, 160, 9.5, 2.0, 0.3);
        let a = extract_feature_vector(&img, &full(&img), &FeatureConfig::default()).unwrap();
        let b = extract_feature_vector(&img, &full(&img), &FeatureConfig::default()).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
    }

    #[test]
    fn csv_roundtrip_and_header_check() {
        let img = grating(128, 128, 9.0, 1.3, 0.0);
        let fv = extract_feature_vector(&img, &full(&img), &FeatureConfig::default()).unwrap();
        let rows = vec![FeatureRow { image_id: "a".into(), features: fv }];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_feature_csv(buf.as_slice(), "mem").unwrap(), rows);

        let text = String::from_utf8(buf).unwrap().replacen("MMB", "MMX", 1);
        assert!(matches!(read_feature_csv(text.as_bytes(), "mem"), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn alignment_pads_minutiae_only() {
        let fv = FeatureVector::new((0..65).map(|i| i as f64).collect()).unwrap();
        let aligned = fv.aligned_to(&extended_feature_names(), 0.0).unwrap();
        assert_eq!(aligned.len(), 69);
        assert_eq!(&aligned[12..16], &[0.0; 4]);
        assert_eq!(aligned[16], 12.0);
        assert!(fv.aligned_to(&["nope"], 0.0).is_err());
        assert!(FeatureVector::new(vec![0.0; 64]).is_err());
    }
}
