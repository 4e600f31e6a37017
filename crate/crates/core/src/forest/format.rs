//! Binary model file.
//!
//! Little-endian layout:
//!
//! ```text
//! "CLFQ" u32:version
//! u32:n_features  { u32:len utf8:name }*
//! f64:pad_value
//! u64:n_trees u64:max_depth u64:split_candidates u64:min_samples_leaf u8:pruning u64:seed
//! f64:importance * n_features
//! u32:tree_count { u32:node_count { u8:0 f64:p | u8:1 u32:feature f64:threshold u32:left u32:right }* }*
//! ```

use std::path::Path;

use super::{ForestModel, Node, TrainParams, Tree};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CLFQ";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(m: &ForestModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.feature_names.len() as u32).to_le_bytes());
    for name in &m.feature_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&m.pad_value.to_le_bytes());
    let p = &m.params;
    for v in [p.n_trees, p.max_depth, p.split_candidates, p.min_samples_leaf] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(p.pruning as u8);
    out.extend_from_slice(&p.seed.to_le_bytes());
    for v in &m.importance {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(m.trees.len() as u32).to_le_bytes());
    for t in &m.trees {
        out.extend_from_slice(&(t.nodes.len() as u32).to_le_bytes());
        for n in &t.nodes {
            match *n {
                Node::Leaf { p } => {
                    out.push(0);
                    out.extend_from_slice(&p.to_le_bytes());
                }
                Node::Split { feature, threshold, left, right } => {
                    out.push(1);
                    out.extend_from_slice(&feature.to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::ModelFormat { offset: self.pos, reason: reason.into() })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.err(format!("truncated while reading {what}"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| Error::ModelFormat { offset: at, reason: format!("{what} out of range") })
    }

    /// Count prefix, bounded by what the remaining bytes could hold.
    fn count(&mut self, min_item: usize, what: &str) -> Result<usize> {
        let at = self.pos;
        let n = self.u32(what)? as usize;
        if n.saturating_mul(min_item) > self.buf.len() - self.pos {
            return Err(Error::ModelFormat { offset: at, reason: format!("{what} {n} exceeds remaining file size") });
        }
        Ok(n)
    }
}

pub fn decode_model(buf: &[u8]) -> Result<ForestModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        r.pos = 0;
        return r.err("bad magic, not a model file");
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        r.pos -= 4;
        return r.err(format!("unsupported format version {version} (expected {FORMAT_VERSION})"));
    }
    let n_features = r.count(4, "feature count")?;
    if n_features == 0 {
        return r.err("model has no features");
    }
    let mut feature_names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let len = r.count(1, "name length")?;
        let at = r.pos;
        let bytes = r.take(len, "feature name")?;
        let name = std::str::from_utf8(bytes)
            .map_err(|_| Error::ModelFormat { offset: at, reason: "feature name is not UTF-8".into() })?;
        feature_names.push(name.to_string());
    }
    let pad_value = r.f64("pad value")?;
    let params = TrainParams {
        n_trees: r.usize("n_trees")?,
        max_depth: r.usize("max_depth")?,
        split_candidates: r.usize("split_candidates")?,
        min_samples_leaf: r.usize("min_samples_leaf")?,
        pruning: match r.u8("pruning flag")? {
            0 => false,
            1 => true,
            v => {
                r.pos -= 1;
                return r.err(format!("pruning flag {v} is not 0 or 1"));
            }
        },
        seed: r.u64("seed")?,
    };
    let mut importance = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let v = r.f64("importance")?;
        if v.is_nan() || v < 0.0 {
            r.pos -= 8;
            return r.err(format!("importance {v} is negative"));
        }
        importance.push(v);
    }
    let tree_count = r.count(4, "tree count")?;
    if tree_count == 0 {
        return r.err("model has no trees");
    }
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let node_count = r.count(9, "node count")?;
        if node_count == 0 {
            return r.err("tree has no nodes");
        }
        let mut nodes = Vec::with_capacity(node_count);
        for i in 0..node_count {
            let at = r.pos;
            let bad = |reason: String| Err(Error::ModelFormat { offset: at, reason });
            match r.u8("node tag")? {
                0 => {
                    let p = r.f64("leaf probability")?;
                    if !(0.0..=1.0).contains(&p) {
                        return bad(format!("leaf probability {p} outside [0, 1]"));
                    }
                    nodes.push(Node::Leaf { p });
                }
                1 => {
                    let feature = r.u32("split feature")?;
                    let threshold = r.f64("split threshold")?;
                    let left = r.u32("left child")?;
                    let right = r.u32("right child")?;
                    if feature as usize >= n_features {
                        return bad(format!("split feature {feature} >= feature count {n_features}"));
                    }
                    // children after the parent rules out cycles
                    for c in [left, right] {
                        if c as usize <= i || c as usize >= node_count {
                            return bad(format!("child index {c} invalid for node {i} of {node_count}"));
                        }
                    }
                    if !threshold.is_finite() {
                        return bad("split threshold is not finite".into());
                    }
                    nodes.push(Node::Split { feature, threshold, left, right });
                }
                t => return bad(format!("unknown node tag {t}")),
            }
        }
        trees.push(Tree { nodes });
    }
    if r.pos != buf.len() {
        return r.err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(ForestModel { format_version: version, feature_names, params, importance, pad_value, trees })
}

pub fn save_model(m: &ForestModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ForestModel> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{train, LabeledDataset, LabeledRow};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> ForestModel {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = (0..120)
            .map(|i| {
                let f: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                let label = (f[0] + 0.3 * f[1] > 0.6) as u8;
                LabeledRow { id: format!("s{i}"), features: f, label, provenance: String::new() }
            })
            .collect();
        let data = LabeledDataset::new(vec!["a".into(), "b".into(), "c".into()], rows).unwrap();
        let p = TrainParams { n_trees: 10, split_candidates: 2, ..TrainParams::default() };
        train(&data, &p).unwrap().model
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = model();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..1.5)).collect();
            assert_eq!(m.predict_prob(&x).unwrap().to_bits(), back.predict_prob(&x).unwrap().to_bits());
        }
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.clfq");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_model(&model());
        for len in 0..bytes.len() {
            match decode_model(&bytes[..len]) {
                Err(Error::ModelFormat { offset, .. }) => {
                    assert!(offset <= len, "len {len} offset {offset}")
                }
                other => panic!("len {len}: {other:?}"),
            }
        }
    }

    #[test]
    fn header_checks() {
        let mut bytes = encode_model(&model());
        bytes.push(0);
        assert!(matches!(decode_model(&bytes), Err(Error::ModelFormat { .. })));
        bytes.pop();
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        match decode_model(&v2) {
            Err(Error::ModelFormat { offset: 4, reason }) => assert!(reason.contains("version 2")),
            other => panic!("{other:?}"),
        }
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_model(&magic), Err(Error::ModelFormat { offset: 0, .. })));
    }

    #[test]
    fn bad_child_index_is_rejected() {
        let m = ForestModel {
            trees: vec![Tree {
                nodes: vec![Node::Split { feature: 0, threshold: 0.5, left: 0, right: 1 }, Node::Leaf { p: 1.0 }],
            }],
            ..model()
        };
        match decode_model(&encode_model(&m)) {
            Err(Error::ModelFormat { reason, .. }) => assert!(reason.contains("child index 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_export_parses() {
        let m = model();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["feature_names"].as_array().unwrap().len(), 3);
        let back: ForestModel = serde_json::from_value(v).unwrap();
        assert_eq!(back.trees.len(), m.trees.len());
    }
}
