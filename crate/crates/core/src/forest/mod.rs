//! Random-forest quality classifier: training, inference, out-of-bag
//! error, importance and serialization.

mod format;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use format::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use tree::{Node, Tree};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub split_candidates: usize,
    pub min_samples_leaf: usize,
    /// Reduced-error pruning of each tree against its out-of-bag rows.
    pub pruning: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 25, split_candidates: 10, min_samples_leaf: 2, pruning: false, seed: 0 }
    }
}

impl TrainParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParam("n_trees must be >= 1".into()));
        }
        if self.split_candidates == 0 || self.split_candidates > n_features {
            return Err(Error::InvalidParam(format!(
                "split_candidates must lie in [1, {n_features}], got {}",
                self.split_candidates
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParam("min_samples_leaf must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParam("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRow {
    pub id: String,
    pub features: Vec<f64>,
    /// 0 = low quality, 1 = high quality.
    pub label: u8,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<LabeledRow>) -> Result<Self> {
        let n = feature_names.len();
        for r in &rows {
            if r.features.len() != n {
                return Err(Error::FeatureCount { expected: n, actual: r.features.len() });
            }
            if r.label > 1 {
                return Err(Error::InvalidParam(format!("row {:?}: label must be 0 or 1", r.id)));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!("row {:?}: non-finite feature", r.id)));
            }
        }
        Ok(Self { feature_names, rows })
    }

    pub fn from_vectors(rows: impl IntoIterator<Item = (String, FeatureVector, u8, String)>) -> Result<Self> {
        let names = crate::features::FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let rows = rows
            .into_iter()
            .map(|(id, fv, label, provenance)| LabeledRow { id, features: fv.values().to_vec(), label, provenance })
            .collect();
        Self::new(names, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows sorted by id, then label and feature bits; bootstrap indices
    /// refer to this order, so the input row order does not matter.
    pub fn canonical_rows(&self) -> Vec<&LabeledRow> {
        let mut rows: Vec<&LabeledRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.id.cmp(&b.id).then(a.label.cmp(&b.label)).then_with(|| {
                let ka = a.features.iter().map(|v| v.to_bits());
                let kb = b.features.iter().map(|v| v.to_bits());
                ka.cmp(kb)
            })
        });
        rows
    }

    /// Replaces labels of the listed ids; returns how many rows changed.
    pub fn relabel(&mut self, labels: &[(String, u8)]) -> usize {
        let map: std::collections::HashMap<&str, u8> = labels.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let mut changed = 0;
        for r in &mut self.rows {
            if let Some(&l) = map.get(r.id.as_str()) {
                if l != r.label {
                    r.label = l;
                    changed += 1;
                }
            }
        }
        changed
    }
}

/// Trained ensemble and its metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub params: TrainParams,
    /// Per-feature share of the total Gini decrease, percent.
    pub importance: Vec<f64>,
    /// Value written into feature slots the extractor does not compute.
    pub pad_value: f64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Mean of the per-tree leaf class-1 fractions.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::FeatureCount { expected: self.n_features(), actual: x.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_prob(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(0.0, 1.0))
    }

    pub fn predict_vector(&self, fv: &FeatureVector) -> Result<f64> {
        let x = fv.aligned_to(&self.feature_names, self.pad_value)?;
        self.predict_prob(&x)
    }

    pub fn quality_score(&self, x: &[f64]) -> Result<u8> {
        Ok(probability_to_score(self.predict_prob(x)?))
    }

    pub fn score_vector(&self, fv: &FeatureVector) -> Result<u8> {
        Ok(probability_to_score(self.predict_vector(fv)?))
    }

    /// `(name, percent)` sorted by decreasing importance, ties by name.
    pub fn importance_table(&self) -> Vec<(String, f64)> {
        let mut t: Vec<(String, f64)> =
            self.feature_names.iter().cloned().zip(self.importance.iter().copied()).collect();
        t.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        t
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `100·p` rounded half away from zero. The slack absorbs binary
/// representation error so decimal halves such as 0.785 round up.
pub fn probability_to_score(p: f64) -> u8 {
    let s = 100.0 * p.clamp(0.0, 1.0);
    (s + 0.5 + 1e-9).floor().min(100.0) as u8
}

/// Model plus the bootstrap bookkeeping of its training run.
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub model: ForestModel,
    /// Per tree, the multiplicity of every canonical row in its bootstrap.
    in_bag: Vec<Vec<u32>>,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OobReport {
    pub error: f64,
    pub evaluated: usize,
    /// Rows that were in the bootstrap of every tree.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub rows: usize,
    pub training_error: f64,
    pub oob_error: f64,
    pub oob_evaluated: usize,
    pub oob_excluded: usize,
    pub params: TrainParams,
    pub importance: Vec<ImportanceEntry>,
}

impl TrainingRun {
    /// Fraction of training rows misclassified by the full forest at
    /// threshold 0.5 (p ≥ 0.5 predicts class 1).
    pub fn training_error(&self) -> f64 {
        let wrong = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, &y)| {
                let p = self.model.predict_prob(x).expect("training width");
                (p >= 0.5) as u8 != y
            })
            .count();
        wrong as f64 / self.y.len() as f64
    }

    /// Majority hard vote of the trees that did not see a row; an even
    /// split falls back to the mean leaf fraction.
    pub fn oob(&self) -> OobReport {
        let (mut wrong, mut evaluated, mut excluded) = (0usize, 0usize, 0usize);
        for (i, (x, &y)) in self.x.iter().zip(&self.y).enumerate() {
            let (mut votes1, mut votes, mut psum) = (0usize, 0usize, 0.0);
            for (t, bag) in self.model.trees.iter().zip(&self.in_bag) {
                if bag[i] == 0 {
                    let p = t.leaf_prob(x);
                    votes += 1;
                    votes1 += (p >= 0.5) as usize;
                    psum += p;
                }
            }
            if votes == 0 {
                excluded += 1;
                continue;
            }
            evaluated += 1;
            let pred = match (2 * votes1).cmp(&votes) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => (psum / votes as f64 >= 0.5) as u8,
            };
            wrong += (pred != y) as usize;
        }
        OobReport { error: if evaluated > 0 { wrong as f64 / evaluated as f64 } else { 0.0 }, evaluated, excluded }
    }

    pub fn report(&self) -> TrainingReport {
        let oob = self.oob();
        TrainingReport {
            rows: self.y.len(),
            training_error: self.training_error(),
            oob_error: oob.error,
            oob_evaluated: oob.evaluated,
            oob_excluded: oob.excluded,
            params: self.model.params.clone(),
            importance: self
                .model
                .importance_table()
                .into_iter()
                .map(|(feature, percent)| ImportanceEntry { feature, percent })
                .collect(),
        }
    }

    /// Canonical row ids, in bootstrap index order.
    pub fn row_ids(&self) -> &[String] {
        &self.ids
    }
}

/// Seeds the RNG of tree `t`: stream `t` of the ChaCha8 generator keyed by
/// the run seed.
fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

pub fn train(data: &LabeledDataset, p: &TrainParams) -> Result<TrainingRun> {
    let n_features = data.feature_names.len();
    p.validate(n_features)?;
    if data.rows.len() < 2 {
        return Err(Error::Training("need at least 2 rows".into()));
    }
    let rows = data.canonical_rows();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<u8> = rows.iter().map(|r| r.label).collect();
    if x.iter().any(|r| r.len() != n_features) {
        return Err(Error::Training("feature count differs between rows".into()));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::Training(format!("all rows carry label {}", y[0])));
    }
    let n = x.len();
    let matrix = tree::Matrix { x: &x, y: &y, n_features };
    let grow = tree::GrowParams {
        max_depth: p.max_depth,
        split_candidates: p.split_candidates,
        min_samples_leaf: p.min_samples_leaf,
    };
    let grown: Vec<(Tree, Vec<u32>, Vec<f64>)> = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(p.seed, t);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let bag: Vec<(u32, u32)> =
                counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i as u32, c)).collect();
            let mut importance = vec![0.0; n_features];
            let mut tree = tree::grow(&matrix, bag, &grow, &mut rng, &mut importance);
            if p.pruning {
                prune(&mut tree, &x, &y, &counts);
            }
            (tree, counts, importance)
        })
        .collect();

    let mut importance = vec![0.0; n_features];
    let mut trees = Vec::with_capacity(p.n_trees);
    let mut in_bag = Vec::with_capacity(p.n_trees);
    for (tree, counts, imp) in grown {
        importance.iter_mut().zip(&imp).for_each(|(a, b)| *a += b);
        trees.push(tree);
        in_bag.push(counts);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v *= 100.0 / total);
    }
    let model = ForestModel {
        format_version: FORMAT_VERSION,
        feature_names: data.feature_names.clone(),
        params: p.clone(),
        importance,
        pad_value: 0.0,
        trees,
    };
    Ok(TrainingRun { model, in_bag, x, y, ids: rows.iter().map(|r| r.id.clone()).collect() })
}

/// Bottom-up reduced-error pruning: a split collapses into a leaf when
/// that does not increase the misclassification count on the tree's
/// out-of-bag rows. Subtrees no OOB row reaches are kept. Importance is
/// left as grown.
fn prune(tree: &mut Tree, x: &[Vec<f64>], y: &[u8], counts: &[u32]) {
    let oob: Vec<usize> = (0..y.len()).filter(|&i| counts[i] == 0).collect();
    if oob.is_empty() {
        return;
    }
    // subtree leaf probabilities are needed for the collapsed leaf value
    fn collapse(tree: &Tree, i: usize) -> (f64, f64) {
        match tree.nodes[i] {
            Node::Leaf { p } => (p, 1.0),
            Node::Split { left, right, .. } => {
                let (a, wa) = collapse(tree, left as usize);
                let (b, wb) = collapse(tree, right as usize);
                ((a * wa + b * wb) / (wa + wb), wa + wb)
            }
        }
    }
    fn visit(tree: &mut Tree, i: usize, rows: &[usize], x: &[Vec<f64>], y: &[u8]) -> usize {
        match tree.nodes[i] {
            Node::Leaf { p } => rows.iter().filter(|&&r| ((p >= 0.5) as u8) != y[r]).count(),
            Node::Split { feature, threshold, left, right } => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r][feature as usize] <= threshold);
                let err = visit(tree, left as usize, &l, x, y) + visit(tree, right as usize, &r, x, y);
                if rows.is_empty() {
                    return 0;
                }
                let (p, _) = collapse(tree, i);
                let leaf_err = rows.iter().filter(|&&r| ((p >= 0.5) as u8) != y[r]).count();
                if leaf_err <= err {
                    tree.nodes[i] = Node::Leaf { p };
                    leaf_err
                } else {
                    err
                }
            }
        }
    }
    visit(tree, 0, &oob, x, y);
    compact(tree);
}

/// Drops nodes no longer reachable from the root and renumbers in
/// pre-order.
fn compact(tree: &mut Tree) {
    fn copy(src: &Tree, i: usize, out: &mut Vec<Node>) -> u32 {
        let id = out.len() as u32;
        out.push(src.nodes[i]);
        if let Node::Split { feature, threshold, left, right } = src.nodes[i] {
            let l = copy(src, left as usize, out);
            let r = copy(src, right as usize, out);
            out[id as usize] = Node::Split { feature, threshold, left: l, right: r };
        }
        id
    }
    let mut out = Vec::new();
    copy(tree, 0, &mut out);
    tree.nodes = out;
}
