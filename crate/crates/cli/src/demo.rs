//! Evaluation flow shared by `evaluate` and the end-to-end demo: per
//! dataset DET and EDC for several quality algorithms, a PAUC summary and
//! plots.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use clfq::eval::{
    compute_det, write_det_csv, write_edc_csv, write_pauc_summary_csv, ComparisonRecord, DetResult, EdcConfig,
    EdcCurve, PaucSummary, ScoreConvention,
};
use clfq::forest::ForestModel;
use serde::Serialize;

use crate::config::{RunConfig, EVAL_SEED_OFFSET};
use crate::plot::{bar_chart, line_chart, Series};
use crate::selfmatch::{edc_for, generate_eval_samples, self_match, QualitySource};
use crate::OutputFormat;

/// One quality algorithm on one dataset.
#[derive(Clone, Debug)]
pub struct AlgorithmEval {
    pub algorithm: String,
    pub curve: EdcCurve,
    pub pauc: f64,
}

#[derive(Clone, Debug)]
pub struct DatasetEval {
    pub dataset: String,
    pub det: DetResult,
    pub algorithms: Vec<AlgorithmEval>,
}

/// DET of the comparison scores and one EDC per quality table.
pub fn evaluate_dataset(
    dataset: &str,
    records: &[ComparisonRecord],
    qualities: &[(String, HashMap<String, u8>)],
    cfg: &EdcConfig,
) -> anyhow::Result<DatasetEval> {
    let similarity = |s: f64| match cfg.convention {
        ScoreConvention::Similarity => s,
        ScoreConvention::Dissimilarity => -s,
    };
    let (mated, non): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.mated);
    let det = compute_det(
        &mated.iter().map(|r| similarity(r.score)).collect::<Vec<_>>(),
        &non.iter().map(|r| similarity(r.score)).collect::<Vec<_>>(),
    )
    .with_context(|| format!("dataset {dataset}: DET"))?;
    let algorithms = qualities
        .iter()
        .map(|(name, q)| {
            let (curve, pauc) =
                edc_for(records, q, cfg).with_context(|| format!("dataset {dataset}, quality {name}"))?;
            Ok(AlgorithmEval { algorithm: name.clone(), curve, pauc })
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(DatasetEval { dataset: dataset.to_string(), det, algorithms })
}

/// Rows in first-seen algorithm order; every dataset must carry the same
/// algorithms.
pub fn summarize(evals: &[DatasetEval]) -> anyhow::Result<PaucSummary> {
    let names: Vec<String> =
        evals.first().map_or_else(Vec::new, |e| e.algorithms.iter().map(|a| a.algorithm.clone()).collect());
    let rows = names
        .iter()
        .map(|name| {
            let values = evals
                .iter()
                .map(|e| {
                    e.algorithms
                        .iter()
                        .find(|a| &a.algorithm == name)
                        .map(|a| a.pauc)
                        .with_context(|| format!("dataset {} lacks quality {name}", e.dataset))
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            Ok((name.clone(), values))
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(PaucSummary { datasets: evals.iter().map(|e| e.dataset.clone()).collect(), rows })
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    datasets: &'a [String],
    rows: Vec<SummaryRowJson<'a>>,
}

#[derive(Serialize)]
struct SummaryRowJson<'a> {
    algorithm: &'a str,
    pauc: &'a [f64],
    avg: f64,
    std: f64,
}

fn create(path: &Path) -> anyhow::Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

/// Layout under `out`:
/// `<dataset>/det.csv`, `<dataset>/edc_<algorithm>.csv`,
/// `pauc_summary.{csv,json}` and, with `plots`, `plots/edc_<dataset>.svg`
/// and `plots/pauc.svg`.
pub fn write_outputs(
    out: &Path,
    evals: &[DatasetEval],
    summary: &PaucSummary,
    format: OutputFormat,
    plots: bool,
    pauc_limit: f64,
) -> anyhow::Result<()> {
    for e in evals {
        let dir = out.join(&e.dataset);
        write_det_csv(create(&dir.join("det.csv"))?, &e.det)?;
        for a in &e.algorithms {
            write_edc_csv(create(&dir.join(format!("edc_{}.csv", a.algorithm)))?, &a.curve)?;
        }
    }
    match format {
        OutputFormat::Csv => write_pauc_summary_csv(create(&out.join("pauc_summary.csv"))?, summary)?,
        OutputFormat::Json => {
            let doc = SummaryJson {
                datasets: &summary.datasets,
                rows: summary
                    .rows
                    .iter()
                    .map(|(name, v)| SummaryRowJson {
                        algorithm: name,
                        pauc: v,
                        avg: PaucSummary::mean(v),
                        std: PaucSummary::std_dev(v),
                    })
                    .collect(),
            };
            let mut w = create(&out.join("pauc_summary.json"))?;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            std::io::Write::write_all(&mut w, b"\n")?;
        }
    }
    if plots {
        let dir = out.join("plots");
        for e in evals {
            let series: Vec<Series> = e
                .algorithms
                .iter()
                .map(|a| Series {
                    name: &a.algorithm,
                    points: a.curve.points.iter().map(|p| (p.discard_fraction, p.fnmr)).collect(),
                })
                .collect();
            let svg = line_chart(&format!("EDC, {}", e.dataset), "fraction discarded", "FNMR", 1.0, &series);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(format!("edc_{}.svg", e.dataset)), svg)?;
        }
        let bars: Vec<(&str, f64, f64)> =
            summary.rows.iter().map(|(n, v)| (n.as_str(), PaucSummary::mean(v), PaucSummary::std_dev(v))).collect();
        fs::create_dir_all(&dir)?;
        fs::write(
            dir.join("pauc.svg"),
            bar_chart(&format!("EDC PAUC up to {pauc_limit}, mean and std"), "PAUC", &bars),
        )?;
    }
    Ok(())
}

/// Evaluation seed of demo run `seed`.
pub fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_add(EVAL_SEED_OFFSET)
}

/// For every seed: a fresh evaluation corpus, self-matched with the toy
/// matcher, scored by the model, AIT sharpness, seeded random quality and
/// constant quality. Datasets are named `seed<N>`.
pub fn run_demo(cfg: &RunConfig, model: &ForestModel, seeds: &[u64]) -> anyhow::Result<Vec<DatasetEval>> {
    seeds
        .iter()
        .map(|&seed| {
            let synth = clfq::synthgen::SynthConfig { seed: eval_seed(seed), ..cfg.eval_synth.clone() };
            let samples = generate_eval_samples(&synth, &cfg.preprocess, &cfg.features)?;
            let records = self_match(&samples, &cfg.matcher)?;
            let sources = [
                QualitySource::Model(model),
                QualitySource::Sharpness(&cfg.sharpness),
                QualitySource::Random(seed),
                QualitySource::Constant(cfg.constant_quality),
            ];
            let qualities = sources
                .iter()
                .map(|s| Ok((s.name().to_string(), s.assess(&samples)?)))
                .collect::<clfq::Result<Vec<_>>>()?;
            let name = format!("seed{seed}");
            log::info!("{name}: {} samples, {} comparisons", samples.len(), records.len());
            evaluate_dataset(&name, &records, &qualities, &cfg.edc)
        })
        .collect()
}
