//! CART growth on bootstrap multiplicities.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    /// Class-1 fraction of the (weighted) training rows reaching the leaf.
    Leaf { p: f64 },
}

/// Nodes in pre-order; index 0 is the root and children always follow
/// their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_prob(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { p } => return p,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature as usize] <= threshold { left } else { right } as usize
                }
            }
        }
    }

    /// Index of the leaf `x` reaches.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0usize;
        while let Node::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if x[feature as usize] <= threshold { left } else { right } as usize;
        }
        i
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left as usize).max(walk(t, right as usize)),
            }
        }
        walk(self, 0)
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub split_candidates: usize,
    pub min_samples_leaf: usize,
}

/// Row-major feature matrix with binary labels.
pub(crate) struct Matrix<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [u8],
    pub n_features: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn gini(w: f64, w1: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let p = w1 / w;
    2.0 * p * (1.0 - p)
}

/// Grows one tree over `(row, multiplicity)` pairs; `importance` collects
/// the weighted Gini decrease of every split.
pub(crate) fn grow(
    data: &Matrix,
    rows: Vec<(u32, u32)>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    let mut features: Vec<usize> = (0..data.n_features).collect();
    let mut scratch: Vec<(f64, u32, u8)> = Vec::with_capacity(rows.len());
    build(data, rows, 0, params, rng, importance, &mut tree, &mut features, &mut scratch);
    tree
}

#[allow(clippy::too_many_arguments)]
fn build(
    data: &Matrix,
    rows: Vec<(u32, u32)>,
    depth: usize,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
    tree: &mut Tree,
    features: &mut [usize],
    scratch: &mut Vec<(f64, u32, u8)>,
) -> u32 {
    let id = tree.nodes.len() as u32;
    let w: f64 = rows.iter().map(|r| r.1 as f64).sum();
    let w1: f64 = rows.iter().filter(|r| data.y[r.0 as usize] == 1).map(|r| r.1 as f64).sum();
    tree.nodes.push(Node::Leaf { p: w1 / w });
    let pure = w1 == 0.0 || w1 == w;
    if pure || depth >= params.max_depth || w < (2 * params.min_samples_leaf) as f64 {
        return id;
    }
    let Some(best) = find_split(data, &rows, w, w1, params, rng, features, scratch) else {
        return id;
    };
    importance[best.feature] += best.gain;
    let (left, right): (Vec<_>, Vec<_>) =
        rows.into_iter().partition(|r| data.x[r.0 as usize][best.feature] <= best.threshold);
    let l = build(data, left, depth + 1, params, rng, importance, tree, features, scratch);
    let r = build(data, right, depth + 1, params, rng, importance, tree, features, scratch);
    tree.nodes[id as usize] =
        Node::Split { feature: best.feature as u32, threshold: best.threshold, left: l, right: r };
    id
}

/// Examines `split_candidates` features in random order and keeps going
/// through the rest only while none of them admits a valid split.
#[allow(clippy::too_many_arguments)]
fn find_split(
    data: &Matrix,
    rows: &[(u32, u32)],
    w: f64,
    w1: f64,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    features: &mut [usize],
    scratch: &mut Vec<(f64, u32, u8)>,
) -> Option<Best> {
    features.shuffle(rng);
    let parent = gini(w, w1) * w;
    let min_leaf = params.min_samples_leaf as f64;
    let mut best: Option<Best> = None;
    for (k, &f) in features.iter().enumerate() {
        if k >= params.split_candidates && best.is_some() {
            break;
        }
        scratch.clear();
        scratch.extend(rows.iter().map(|&(r, m)| (data.x[r as usize][f], m, data.y[r as usize])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut lw, mut lw1) = (0.0, 0.0);
        for i in 0..scratch.len() - 1 {
            let (v, m, y) = scratch[i];
            lw += m as f64;
            if y == 1 {
                lw1 += m as f64;
            }
            let next = scratch[i + 1].0;
            if next <= v || lw < min_leaf || w - lw < min_leaf {
                continue;
            }
            let gain = parent - gini(lw, lw1) * lw - gini(w - lw, w1 - lw1) * (w - lw);
            let mut threshold = v + (next - v) / 2.0;
            if threshold >= next {
                threshold = v;
            }
            let better = match &best {
                None => gain > 0.0,
                Some(b) => {
                    gain > b.gain || (gain == b.gain && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Best { gain, feature: f, threshold });
            }
        }
    }
    best
}
