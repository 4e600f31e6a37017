//! One function per subcommand.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clfq::eval::{read_quality_csv_file, read_scores_csv_file, write_scores_csv, ComparisonRecord};
use clfq::features::{
    extract_feature_vector, feature_index, read_feature_csv_file, write_feature_csv_file, FeatureRow, FEATURE_COUNT,
    MINUTIAE_FEATURE_NAMES,
};
use clfq::forest::{load_model, save_model, train as train_forest, ForestModel, LabeledDataset, TrainingReport};
use clfq::imaging::{preprocess as run_pipeline, to_grayscale};
use clfq::sharpness::ait_sharpness_detail;
use clfq::synthgen::{
    generate_dataset, label_feature_rows, read_manifest_file, read_relabel_csv, validate_labels, write_manifest_file,
    write_relabel_csv, ImageSink, LabelReport, SynthConfig,
};
use clfq::{GrayRaster, InputImage};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::demo::{evaluate_dataset, summarize, write_outputs};
use crate::selfmatch::{load_eval_samples, parse_quality_arg, random_quality, self_match, QualitySource};
use crate::{CliError, CliResult, OutputFormat};

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

/// Expands directories to their PNG/PGM files; ids are file stems and must
/// be unique. Sorted by id.
pub fn collect_images(inputs: &[PathBuf]) -> CliResult<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries =
                fs::read_dir(input).with_context(|| format!("listing {}", input.display())).map_err(CliError::Usage)?;
            for e in entries {
                let path = e.map_err(|e| CliError::Usage(e.into()))?.path();
                let ext = path.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase);
                if path.is_file() && ext.is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.as_str())) {
                    out.push(path);
                }
            }
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(CliError::Usage(anyhow!("input {} does not exist", input.display())));
        }
    }
    let mut named: Vec<(String, PathBuf)> = out
        .into_iter()
        .map(|p| (p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), p))
        .collect();
    named.sort();
    if let Some(w) = named.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CliError::Usage(anyhow!(
            "image id {:?} is used by both {} and {}",
            w[0].0,
            w[0].1.display(),
            w[1].1.display()
        )));
    }
    Ok(named)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn writer(path: &Path) -> anyhow::Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

/// Per-item results where failures are reported and the rest kept.
fn split_failures<T>(results: Vec<(String, anyhow::Result<T>)>) -> (Vec<(String, T)>, Vec<String>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(e) => {
                log::error!("{id}: {e:#}");
                failed.push(id);
            }
        }
    }
    (ok, failed)
}

fn finish(failed: Vec<String>) -> CliResult<()> {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial { failed })
    }
}

fn read_gray(path: &Path) -> anyhow::Result<GrayRaster> {
    Ok(match InputImage::read(path)? {
        InputImage::Gray(g) => g,
        InputImage::Rgb(rgb) => to_grayscale(&rgb)?,
    })
}

/// Writes `samples/<id>.pgm`, `masks/<id>.pgm` and `meta/<id>.json` per
/// input image.
pub fn preprocess(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> CliResult<()> {
    let images = collect_images(inputs)?;
    if images.is_empty() {
        log::warn!("no PNG or PGM images found in the inputs");
        return Ok(());
    }
    for sub in ["samples", "masks", "meta"] {
        create_dir(&out.join(sub))?;
    }
    let results: Vec<(String, anyhow::Result<()>)> = images
        .par_iter()
        .map(|(id, path)| {
            let r = (|| {
                let p = run_pipeline(&InputImage::read(path)?, &cfg.preprocess)?;
                p.sample.write_pgm(out.join("samples").join(format!("{id}.pgm")))?;
                p.mask.to_raster().write_pgm(out.join("masks").join(format!("{id}.pgm")))?;
                let meta = serde_json::to_string_pretty(&p.meta)?;
                fs::write(out.join("meta").join(format!("{id}.json")), meta + "\n")?;
                Ok(())
            })();
            (id.clone(), r)
        })
        .collect();
    let (ok, failed) = split_failures(results);
    log::info!("preprocessed {} image(s), {} failed", ok.len(), failed.len());
    finish(failed)
}

/// Fails unless every model feature is one this extractor produces or a
/// padded minutiae feature.
pub fn check_model_compat(model: &ForestModel) -> anyhow::Result<()> {
    let unknown: Vec<&str> = model
        .feature_names
        .iter()
        .map(String::as_str)
        .filter(|n| feature_index(n).is_none() && !MINUTIAE_FEATURE_NAMES.contains(n))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(anyhow!(
            "incompatible model: it expects {} features, {} of which the extractor's {FEATURE_COUNT} do not cover: {}",
            model.n_features(),
            unknown.len(),
            unknown.join(", ")
        ))
    }
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    image_id: &'a str,
    score: u8,
}

/// Quality CSV `image_id,score`, optionally dumping the feature table.
pub fn score(
    cfg: &RunConfig,
    model_path: &Path,
    inputs: &[PathBuf],
    out: &Path,
    features_csv: Option<&Path>,
    format: OutputFormat,
) -> CliResult<()> {
    let model = load_model(model_path).map_err(|e| CliError::Usage(e.into()))?;
    check_model_compat(&model).map_err(CliError::Usage)?;
    let images = collect_images(inputs)?;
    let results: Vec<(String, anyhow::Result<(FeatureRow, u8)>)> = images
        .par_iter()
        .map(|(id, path)| {
            let r = (|| {
                let p = run_pipeline(&InputImage::read(path)?, &cfg.preprocess)?;
                let features = extract_feature_vector(&p.sample, &p.mask, &cfg.features)?;
                let q = model.score_vector(&features)?;
                Ok((FeatureRow { image_id: id.clone(), features }, q))
            })();
            (id.clone(), r)
        })
        .collect();
    let (ok, failed) = split_failures(results);
    let rows: Vec<ScoreRow> = ok.iter().map(|(id, (_, q))| ScoreRow { image_id: id, score: *q }).collect();
    write_table(out, &rows, format, &["image_id", "score"], |r| vec![r.image_id.to_string(), r.score.to_string()])?;
    if let Some(path) = features_csv {
        let features: Vec<FeatureRow> = ok.into_iter().map(|(_, (f, _))| f).collect();
        write_feature_csv_file(path, &features)?;
    }
    finish(failed)
}

fn write_table<T: Serialize>(
    path: &Path,
    rows: &[T],
    format: OutputFormat,
    header: &[&str],
    fields: impl Fn(&T) -> Vec<String>,
) -> CliResult<()> {
    let mut w = writer(path)?;
    match format {
        OutputFormat::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(header).map_err(anyhow::Error::from)?;
            for r in rows {
                c.write_record(fields(r)).map_err(anyhow::Error::from)?;
            }
            c.flush().map_err(anyhow::Error::from)?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(anyhow::Error::from)?;
            w.write_all(b"\n").map_err(anyhow::Error::from)?;
        }
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct SharpnessRow<'a> {
    image_id: &'a str,
    raw_ratio: f64,
    score: u8,
}

/// Per-image AIT sharpness `image_id,raw_ratio,score`.
pub fn sharpness(cfg: &RunConfig, inputs: &[PathBuf], out: &Path, format: OutputFormat) -> CliResult<()> {
    let images = collect_images(inputs)?;
    let results = images
        .par_iter()
        .map(|(id, path)| {
            let r = read_gray(path).and_then(|g| Ok(ait_sharpness_detail(&g, &cfg.sharpness)?));
            (id.clone(), r)
        })
        .collect();
    let (ok, failed) = split_failures(results);
    let rows: Vec<SharpnessRow> =
        ok.iter().map(|(id, s)| SharpnessRow { image_id: id, raw_ratio: s.raw_ratio, score: s.score }).collect();
    write_table(out, &rows, format, &["image_id", "raw_ratio", "score"], |r| {
        vec![r.image_id.to_string(), r.raw_ratio.to_string(), r.score.to_string()]
    })?;
    finish(failed)
}

/// Which configured corpus `synth` writes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    #[default]
    Train,
    Validation,
    Eval,
}

impl Split {
    pub fn config(self, cfg: &RunConfig) -> &SynthConfig {
        match self {
            Split::Train => &cfg.synth,
            Split::Validation => &cfg.validation,
            Split::Eval => &cfg.eval_synth,
        }
    }
}

/// Writes `manifest.csv`, `features.csv` and the `raw/`, `samples/`,
/// `masks/` images.
pub fn synth(cfg: &RunConfig, split: Split, n_per_class: Option<usize>, out: &Path) -> CliResult<()> {
    let mut synth = split.config(cfg).clone();
    if let Some(n) = n_per_class {
        synth.n_per_class = n;
    }
    synth.validate().map_err(|e| CliError::Usage(e.into()))?;
    create_dir(out)?;
    let corpus = generate_dataset(&synth, &cfg.preprocess, &cfg.features, Some(&ImageSink { dir: out }))?;
    write_manifest_file(&out.join("manifest.csv"), &corpus.manifest)?;
    write_feature_csv_file(out.join("features.csv"), &corpus.features)?;
    log::info!(
        "wrote {} samples to {} ({} regenerated attempts)",
        corpus.manifest.len(),
        out.display(),
        corpus.regenerated()
    );
    Ok(())
}

fn corpus_dataset(dir: &Path) -> CliResult<LabeledDataset> {
    let manifest = read_manifest_file(&dir.join("manifest.csv")).map_err(|e| CliError::Usage(e.into()))?;
    let rows = read_feature_csv_file(dir.join("features.csv")).map_err(|e| CliError::Usage(e.into()))?;
    Ok(label_feature_rows(&rows, &manifest)?)
}

/// Everything `train` reports besides the model file.
#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub training: TrainingReport,
    pub relabeled: usize,
    /// Held-out label check; its mismatches are also written as a relabel
    /// CSV.
    pub label_check: Option<LabelReport>,
}

/// Trains on a corpus directory written by `synth`, or on a fresh
/// corpus from `[synth]` when `corpus` is `None`. The label check runs on
/// `validate` or, in the fresh case, on a corpus from `[validation]`.
pub fn train(
    cfg: &RunConfig,
    corpus: Option<&Path>,
    validate: Option<&Path>,
    relabel: Option<&Path>,
    out_model: &Path,
) -> CliResult<TrainOutcome> {
    let (mut data, check) = match corpus {
        Some(dir) => (corpus_dataset(dir)?, validate.map(corpus_dataset).transpose()?),
        None => {
            let train = generate_dataset(&cfg.synth, &cfg.preprocess, &cfg.features, None)?.labeled()?;
            let check = generate_dataset(&cfg.validation, &cfg.preprocess, &cfg.features, None)?.labeled()?;
            (train, Some(check))
        }
    };
    let relabeled = match relabel {
        Some(path) => {
            let f =
                fs::File::open(path).with_context(|| format!("opening {}", path.display())).map_err(CliError::Usage)?;
            let labels = read_relabel_csv(std::io::BufReader::new(f), &path.display().to_string())
                .map_err(|e| CliError::Usage(e.into()))?;
            data.relabel(&labels)
        }
        None => 0,
    };
    let run = train_forest(&data, &cfg.train)?;
    save_model(&run.model, out_model)?;
    let training = run.report();
    log::info!(
        "trained on {} rows: training error {}, OOB error {} ({} rows without OOB trees)",
        training.rows,
        training.training_error,
        training.oob_error,
        training.oob_excluded
    );
    let label_check = check.map(|c| validate_labels(&run.model, &c)).transpose()?;
    if let Some(report) = &label_check {
        log::info!("label check: {} of {} rows disagree", report.mismatches.len(), report.total);
        write_relabel_csv(writer(&sibling(out_model, "relabel.csv"))?, report)?;
    }
    let outcome = TrainOutcome { training, relabeled, label_check };
    let mut w = writer(&sibling(out_model, "report.json"))?;
    serde_json::to_writer_pretty(&mut w, &outcome).map_err(anyhow::Error::from)?;
    w.write_all(b"\n").map_err(anyhow::Error::from)?;
    Ok(outcome)
}

/// `<dir>/<stem>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Quality algorithm computed by the tool itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Builtin {
    /// AIT sharpness of the raw capture; self-match only.
    Sharpness,
    Random,
    Constant,
}

/// Inputs of `evaluate`.
#[derive(Clone, Debug, Default)]
pub struct EvaluateArgs {
    /// Comparison score files; the dataset name is the file stem.
    pub scores: Vec<PathBuf>,
    /// Corpus directories written by `synth`; the dataset name is the
    /// directory name.
    pub self_match: Vec<PathBuf>,
    /// `NAME=PATH` quality tables; `{dataset}` in PATH is replaced by the
    /// dataset name.
    pub quality: Vec<String>,
    /// Adds the `model` quality algorithm; self-match only.
    pub model: Option<PathBuf>,
    pub builtin: Vec<Builtin>,
    pub out: PathBuf,
    pub plots: bool,
}

fn dataset_name(path: &Path, dir: bool) -> String {
    let part = if dir { path.file_name() } else { path.file_stem() };
    part.map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

/// DET, EDC and PAUC summary per dataset and quality algorithm. Without
/// any quality source, score files are evaluated with their own `q1,q2`.
pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs, format: OutputFormat) -> CliResult<()> {
    if args.scores.is_empty() == args.self_match.is_empty() {
        return Err(CliError::Usage(anyhow!("give either --scores or --self-match inputs, not both or neither")));
    }
    let named_files: Vec<(String, String)> =
        args.quality.iter().map(|q| parse_quality_arg(q)).collect::<anyhow::Result<_>>().map_err(CliError::Usage)?;
    let mut builtins: Vec<Builtin> = args.builtin.clone();
    builtins.sort();
    builtins.dedup();
    let self_matching = !args.self_match.is_empty();
    if !self_matching && (args.model.is_some() || builtins.contains(&Builtin::Sharpness)) {
        return Err(CliError::Usage(anyhow!("--model and --builtin sharpness need --self-match corpora")));
    }
    let model = args
        .model
        .as_deref()
        .map(|p| -> CliResult<ForestModel> {
            let m = load_model(p).map_err(|e| CliError::Usage(e.into()))?;
            check_model_compat(&m).map_err(CliError::Usage)?;
            Ok(m)
        })
        .transpose()?;

    let inputs: Vec<(String, &PathBuf)> = if self_matching {
        args.self_match.iter().map(|p| (dataset_name(p, true), p)).collect()
    } else {
        args.scores.iter().map(|p| (dataset_name(p, false), p)).collect()
    };
    let distinct: BTreeSet<&str> = inputs.iter().map(|i| i.0.as_str()).collect();
    if distinct.len() != inputs.len() {
        return Err(CliError::Usage(anyhow!("dataset names must be unique")));
    }

    let mut evals = Vec::new();
    for (dataset, path) in &inputs {
        let mut qualities: Vec<(String, HashMap<String, u8>)> = Vec::new();
        let records: Vec<ComparisonRecord> = if self_matching {
            let samples = load_eval_samples(path)?;
            let records = self_match(&samples, &cfg.matcher)?;
            write_scores_csv(writer(&args.out.join(dataset).join("scores.csv"))?, &records)?;
            let mut sources = Vec::new();
            if let Some(m) = &model {
                sources.push(QualitySource::Model(m));
            }
            if builtins.contains(&Builtin::Sharpness) {
                sources.push(QualitySource::Sharpness(&cfg.sharpness));
            }
            for s in sources {
                qualities.push((s.name().to_string(), s.assess(&samples)?));
            }
            records
        } else {
            read_scores_csv_file(path).map_err(|e| CliError::Usage(e.into()))?
        };
        let ids: BTreeSet<&str> = records.iter().flat_map(|r| [r.probe_id.as_str(), r.reference_id.as_str()]).collect();
        for b in &builtins {
            let q: HashMap<String, u8> = match b {
                Builtin::Sharpness => continue,
                Builtin::Random => ids.iter().map(|id| (id.to_string(), random_quality(cfg.train.seed, id))).collect(),
                Builtin::Constant => ids.iter().map(|id| (id.to_string(), cfg.constant_quality)).collect(),
            };
            qualities.push((format!("{b:?}").to_lowercase(), q));
        }
        for (name, file) in &named_files {
            let p = PathBuf::from(file.replace("{dataset}", dataset));
            let q = read_quality_csv_file(&p).map_err(|e| CliError::Usage(e.into()))?;
            qualities.push((name.clone(), q));
        }
        let eval = if qualities.is_empty() {
            let mut e = evaluate_dataset(dataset, &records, &[], &cfg.edc)?;
            let curve = clfq::eval::edc_curve(&records, &cfg.edc)?;
            let pauc = clfq::eval::edc_pauc(&curve, cfg.edc.pauc_limit)?;
            e.algorithms.push(crate::demo::AlgorithmEval { algorithm: "scores".into(), curve, pauc });
            e
        } else {
            evaluate_dataset(dataset, &records, &qualities, &cfg.edc)?
        };
        log::info!("{dataset}: {} comparisons, EER {:.4}", records.len(), eval.det.eer);
        evals.push(eval);
    }
    let summary = summarize(&evals)?;
    write_outputs(&args.out, &evals, &summary, format, args.plots, cfg.edc.pauc_limit)?;
    Ok(())
}
