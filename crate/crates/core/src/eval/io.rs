//! CSV schemas of the evaluation artifacts.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{ComparisonRecord, DetResult, EdcCurve, EdcPoint};
use crate::error::{Error, Result};

pub const SCORES_HEADER: [&str; 6] = ["probe_id", "reference_id", "mated", "score", "q1", "q2"];
pub const EDC_HEADER: [&str; 3] = ["discard_fraction", "fnmr", "u"];
pub const DET_HEADER: [&str; 3] = ["threshold", "fmr", "fnmr"];
pub const QUALITY_HEADER: [&str; 2] = ["image_id", "score"];

struct CsvIn<R: Read> {
    reader: csv::Reader<R>,
    label: String,
}

impl<R: Read> CsvIn<R> {
    fn open(input: R, label: &str, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let got = reader.headers().map_err(|e| Error::Csv { path: label.into(), line: 1, reason: e.to_string() })?;
        if !got.iter().eq(header.iter().copied()) {
            return Err(Error::Csv {
                path: label.into(),
                line: 1,
                reason: format!(
                    "expected header {}, got {}",
                    header.join(","),
                    got.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        Ok(Self { reader, label: label.into() })
    }

    /// Calls `f` with every record and its 1-based line number.
    fn for_each(mut self, mut f: impl FnMut(&csv::StringRecord, u64) -> std::result::Result<(), String>) -> Result<()> {
        let mut rec = csv::StringRecord::new();
        loop {
            let line = self.reader.position().line();
            match self.reader.read_record(&mut rec) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = rec.position().map_or(line, |p| p.line());
                    f(&rec, line).map_err(|reason| Error::Csv { path: self.label.clone().into(), line, reason })?
                }
                Err(e) => {
                    return Err(Error::Csv {
                        path: self.label.clone().into(),
                        line: e.position().map_or(line, |p| p.line()),
                        reason: e.to_string(),
                    })
                }
            }
        }
    }
}

fn parse_f64(field: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("{what} {field:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{what} {field:?} is not finite"));
    }
    Ok(v)
}

fn parse_quality(field: &str, what: &str) -> std::result::Result<u8, String> {
    match field.parse::<u8>() {
        Ok(v) if v <= 100 => Ok(v),
        _ => Err(format!("{what} {field:?} is not an integer in [0, 100]")),
    }
}

fn out_err(e: impl std::fmt::Display) -> Error {
    Error::Csv { path: "<output>".into(), line: 0, reason: e.to_string() }
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(out_err)
}

pub fn read_scores_csv<R: Read>(input: R, label: &str) -> Result<Vec<ComparisonRecord>> {
    let mut out = Vec::new();
    CsvIn::open(input, label, &SCORES_HEADER)?.for_each(|r, _| {
        let mated = match &r[2] {
            "0" => false,
            "1" => true,
            v => return Err(format!("mated {v:?} must be 0 or 1")),
        };
        out.push(ComparisonRecord {
            probe_id: r[0].to_string(),
            reference_id: r[1].to_string(),
            mated,
            score: parse_f64(&r[3], "score")?,
            q1: parse_quality(&r[4], "q1")?,
            q2: parse_quality(&r[5], "q2")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_scores_csv_file(path: &Path) -> Result<Vec<ComparisonRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores_csv(std::io::BufReader::new(f), &path.display().to_string())
}

/// Floats are written in their shortest round-tripping form.
pub fn write_scores_csv<W: Write>(out: W, records: &[ComparisonRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORES_HEADER).map_err(out_err)?;
    for r in records {
        w.write_record([
            r.probe_id.as_str(),
            &r.reference_id,
            if r.mated { "1" } else { "0" },
            &r.score.to_string(),
            &r.q1.to_string(),
            &r.q2.to_string(),
        ])
        .map_err(out_err)?;
    }
    finish(w)
}

pub fn write_edc_csv<W: Write>(out: W, curve: &EdcCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDC_HEADER).map_err(out_err)?;
    for p in &curve.points {
        let u = p.u.map(|u| u.to_string()).unwrap_or_default();
        w.write_record([p.discard_fraction.to_string(), p.fnmr.to_string(), u]).map_err(out_err)?;
    }
    finish(w)
}

/// Reads the points of an EDC CSV; `discarded` is not stored and reads as 0.
pub fn read_edc_csv<R: Read>(input: R, label: &str) -> Result<Vec<EdcPoint>> {
    let mut out = Vec::new();
    CsvIn::open(input, label, &EDC_HEADER)?.for_each(|r, _| {
        out.push(EdcPoint {
            discard_fraction: parse_f64(&r[0], "discard_fraction")?,
            discarded: 0,
            fnmr: parse_f64(&r[1], "fnmr")?,
            u: if r[2].is_empty() { None } else { Some(parse_quality(&r[2], "u")?) },
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_det_csv<W: Write>(out: W, det: &DetResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DET_HEADER).map_err(out_err)?;
    for p in &det.points {
        w.write_record([p.threshold.to_string(), p.fmr.to_string(), p.fnmr.to_string()]).map_err(out_err)?;
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QualityRow {
    pub image_id: String,
    pub score: u8,
}

pub fn write_quality_csv<W: Write>(out: W, rows: &[QualityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QUALITY_HEADER).map_err(out_err)?;
    for r in rows {
        w.write_record([r.image_id.as_str(), &r.score.to_string()]).map_err(out_err)?;
    }
    finish(w)
}

/// Per-image quality scores; duplicate ids are rejected.
pub fn read_quality_csv<R: Read>(input: R, label: &str) -> Result<HashMap<String, u8>> {
    let mut out = HashMap::new();
    CsvIn::open(input, label, &QUALITY_HEADER)?.for_each(|r, _| {
        let q = parse_quality(&r[1], "score")?;
        if out.insert(r[0].to_string(), q).is_some() {
            return Err(format!("duplicate image_id {:?}", &r[0]));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn read_quality_csv_file(path: &Path) -> Result<HashMap<String, u8>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_quality_csv(std::io::BufReader::new(f), &path.display().to_string())
}

/// Replaces `q1`/`q2` from a per-image table. Fails listing every id the
/// table lacks.
pub fn attach_quality(records: &[ComparisonRecord], quality: &HashMap<String, u8>) -> Result<Vec<ComparisonRecord>> {
    let mut missing: Vec<&str> = records
        .iter()
        .flat_map(|r| [r.probe_id.as_str(), r.reference_id.as_str()])
        .filter(|id| !quality.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(Error::Metric(format!("no quality score for ids: {}", missing.join(", "))));
    }
    Ok(records
        .iter()
        .map(|r| ComparisonRecord { q1: quality[&r.probe_id], q2: quality[&r.reference_id], ..r.clone() })
        .collect())
}

/// PAUC per (quality algorithm, dataset).
#[derive(Clone, Debug, PartialEq)]
pub struct PaucSummary {
    pub datasets: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl PaucSummary {
    pub fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Sample standard deviation; 0 for a single dataset.
    pub fn std_dev(values: &[f64]) -> f64 {
        if values.len() < 2 {
            return 0.0;
        }
        let m = Self::mean(values);
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
    }

    pub fn average(&self, algorithm: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == algorithm).map(|r| Self::mean(&r.1))
    }
}

/// `algorithm,<datasets…>,avg,std`.
pub fn write_pauc_summary_csv<W: Write>(out: W, summary: &PaucSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["algorithm".to_string()];
    header.extend(summary.datasets.iter().cloned());
    header.extend(["avg".to_string(), "std".to_string()]);
    w.write_record(&header).map_err(out_err)?;
    for (name, values) in &summary.rows {
        if values.len() != summary.datasets.len() {
            return Err(Error::Metric(format!("summary row {name:?} has {} values", values.len())));
        }
        let mut rec = vec![name.clone()];
        rec.extend(values.iter().map(|v| v.to_string()));
        rec.push(PaucSummary::mean(values).to_string());
        rec.push(PaucSummary::std_dev(values).to_string());
        w.write_record(&rec).map_err(out_err)?;
    }
    finish(w)
}
