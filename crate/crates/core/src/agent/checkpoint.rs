use serde::{Deserialize, Serialize};

use super::qnet::QNetParams;
use super::train::TrainConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Attack,
    Defense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointJson {
    version: u32,
    kind: AgentKind,
    layers: Vec<LayerJson>,
    config: TrainConfig,
    seed: u64,
}

/// A trained Q-network together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: AgentKind,
    pub params: QNetParams,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let layers = self
            .params
            .layers()
            .into_iter()
            .map(|(rows, cols, w, b)| LayerJson { rows, cols, w: w.to_vec(), b: b.to_vec() })
            .collect();
        let doc = CheckpointJson {
            version: 1,
            kind: self.kind,
            layers,
            config: self.config.clone(),
            seed: self.config.seed,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CheckpointJson = serde_json::from_str(s)?;
        if doc.version != 1 {
            return Err(Error::Format(format!("unsupported checkpoint version {}", doc.version)));
        }
        let params = QNetParams::from_layers(doc.layers.into_iter().map(|l| (l.rows, l.cols, l.w, l.b)).collect())?;
        if params.sizes() != super::qnet::ARCH {
            return Err(Error::Format(format!("unexpected network shape {:?}", params.sizes())));
        }
        Ok(Self { kind: doc.kind, params, config: doc.config })
    }

    pub fn expect_kind(self, kind: AgentKind) -> Result<Self> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {kind:?} checkpoint, found {:?}", self.kind)));
        }
        Ok(self)
    }
}
