//! Schema-versioned JSON container shared by every trainable detector.
//!
//! ```json
//! {"schema_version": 1, "kind": "knn_dtw", "params": {...},
//!  "normalization": "z_norm", "canonical_len": {"fixed": 100}, "state": {...}}
//! ```
//!
//! Threshold and heuristic models carry everything in `params` and a null
//! `state`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{
    CanonicalLen, ClassifierModel, Normalization, TrainedState, TsfState,
};
use crate::detectors::{Detector, HeuristicModel, ThresholdModel};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    schema_version: u64,
    kind: String,
    params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canonical_len: Option<CanonicalLen>,
    #[serde(default)]
    state: Value,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn from_value<T: DeserializeOwned>(kind: &str, field: &str, v: Value) -> Result<T> {
    serde_json::from_value(v)
        .map_err(|e| Error::ModelFormatError(format!("invalid {field} for '{kind}' model: {e}")))
}

fn encode(model: &Detector) -> Result<Document> {
    let kind = model.kind_name().to_string();
    Ok(match model {
        Detector::Classifier(m) => {
            let (params, state) = match &m.trained {
                TrainedState::KnnDtw { params, state } => (to_value(params)?, to_value(state)?),
                TrainedState::Tsf { params, state } => (to_value(params)?, to_value(state)?),
                TrainedState::SaxVsm { params, state } => (to_value(params)?, to_value(state)?),
            };
            Document {
                schema_version: SCHEMA_VERSION,
                kind,
                params,
                normalization: Some(m.normalization),
                canonical_len: Some(m.canonical_len),
                state,
            }
        }
        Detector::Threshold(t) => Document {
            schema_version: SCHEMA_VERSION,
            kind,
            params: to_value(t)?,
            normalization: None,
            canonical_len: None,
            state: Value::Null,
        },
        Detector::Heuristic(h) => Document {
            schema_version: SCHEMA_VERSION,
            kind,
            params: to_value(h)?,
            normalization: None,
            canonical_len: None,
            state: Value::Null,
        },
    })
}

fn decode(doc: Document) -> Result<Detector> {
    let kind = doc.kind.as_str();
    let classifier = |trained: TrainedState| -> Result<Detector> {
        let missing = |f: &str| Error::ModelFormatError(format!("'{kind}' model lacks '{f}'"));
        let model = ClassifierModel {
            canonical_len: doc.canonical_len.ok_or_else(|| missing("canonical_len"))?,
            normalization: doc.normalization.ok_or_else(|| missing("normalization"))?,
            trained,
        };
        check_classifier(&model)?;
        Ok(Detector::Classifier(model))
    };
    match kind {
        "knn_dtw" => classifier(TrainedState::KnnDtw {
            params: from_value(kind, "params", doc.params.clone())?,
            state: from_value(kind, "state", doc.state.clone())?,
        }),
        "tsf" => classifier(TrainedState::Tsf {
            params: from_value(kind, "params", doc.params.clone())?,
            state: from_value(kind, "state", doc.state.clone())?,
        }),
        "sax_vsm" => classifier(TrainedState::SaxVsm {
            params: from_value(kind, "params", doc.params.clone())?,
            state: from_value(kind, "state", doc.state.clone())?,
        }),
        "threshold" => {
            let t: ThresholdModel = from_value(kind, "params", doc.params)?;
            t.validate()?;
            Ok(Detector::Threshold(t))
        }
        "heuristic" => {
            let h: HeuristicModel = from_value(kind, "params", doc.params)?;
            h.thresholds.validate()?;
            Ok(Detector::Heuristic(h))
        }
        other => Err(Error::ModelFormatError(format!("unknown model kind '{other}'"))),
    }
}

/// Structural checks so a hand-edited file cannot make `predict` panic.
fn check_classifier(m: &ClassifierModel) -> Result<()> {
    let bad = |msg: String| Err(Error::ModelFormatError(msg));
    if let CanonicalLen::Fixed(len) = m.canonical_len {
        if len < 2 {
            return bad(format!("canonical_len {len} is below 2"));
        }
    }
    match &m.trained {
        TrainedState::KnnDtw { params, state } => {
            if state.curves.len() != state.labels.len() {
                return bad("knn_dtw state has mismatched curves and labels".into());
            }
            if params.k == 0 || params.k > state.curves.len() {
                return bad(format!("k = {} does not fit the stored curves", params.k));
            }
            if state.curves.iter().any(|c| c.is_empty()) {
                return bad("knn_dtw state holds an empty curve".into());
            }
        }
        TrainedState::Tsf { state, .. } => {
            let CanonicalLen::Fixed(len) = m.canonical_len else {
                return bad("tsf model needs a fixed canonical_len".into());
            };
            check_forest(state, len).or_else(bad)?;
        }
        TrainedState::SaxVsm { params, .. } => {
            let CanonicalLen::Fixed(len) = m.canonical_len else {
                return bad("sax_vsm model needs a fixed canonical_len".into());
            };
            if params.word_size == 0 || !(2..=10).contains(&params.alphabet_size) || params.window_len > len {
                return bad("sax_vsm parameters are out of range".into());
            }
        }
    }
    Ok(())
}

fn check_forest(state: &TsfState, len: usize) -> std::result::Result<(), String> {
    use crate::classifiers::Node;
    if state.trees.is_empty() {
        return Err("tsf state has no trees".into());
    }
    for (t, tree) in state.trees.iter().enumerate() {
        if tree.nodes.is_empty() {
            return Err(format!("tree {t} has no nodes"));
        }
        if tree.intervals.iter().any(|iv| iv.len < 2 || iv.start + iv.len > len) {
            return Err(format!("tree {t} has an interval outside the canonical length"));
        }
        let n_features = tree.intervals.len() * 3;
        let n = tree.nodes.len();
        for (at, node) in tree.nodes.iter().enumerate() {
            // children always follow their parent, which also rules out cycles
            if let Node::Split { feature, left, right, .. } = node {
                if *feature >= n_features || !(at < *left && *left < n && at < *right && *right < n) {
                    return Err(format!("tree {t} has a dangling split"));
                }
            }
        }
    }
    Ok(())
}

pub fn to_json(model: &Detector) -> Result<String> {
    Ok(serde_json::to_string(&encode(model)?)?)
}

pub fn from_json(text: &str) -> Result<Detector> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::ModelFormatError(format!("not a valid model document: {e}")))?;
    let version = value.get("schema_version").ok_or_else(|| {
        Error::ModelFormatError("model document lacks 'schema_version'".into())
    })?;
    if version.as_u64() != Some(SCHEMA_VERSION) {
        return Err(Error::ModelFormatError(format!(
            "unsupported schema version {version}; this build reads version {SCHEMA_VERSION}"
        )));
    }
    let doc: Document = serde_json::from_value(value)
        .map_err(|e| Error::ModelFormatError(format!("malformed model document: {e}")))?;
    decode(doc)
}

pub fn save(model: &Detector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(model)? + "\n").map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Detector> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
