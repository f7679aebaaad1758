use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use ppd_core::agent::TrainConfig;
use ppd_core::eval::EvalSettings;
use ppd_core::segmenter::SegmenterConfig;
use ppd_core::synth::SceneSpec;

use crate::UsageError;

/// Every setting a run can take, read from a JSON object with flat dotted keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub scene: SceneSpec,
    pub eval: EvalSettings,
    pub segmenter: SegmenterConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub const CONFIG_HELP: &str = "\
Config file keys (JSON object, flat dotted keys) and defaults:
  patch_size              = 8
  interval                = 8
  train.episodes          = 200
  train.steps_min         = 5
  train.steps_max         = 20
  train.gamma             = 0.99
  train.batch_size        = 128
  train.target_sync_every = 100
  train.epsilon_start     = 1.0
  train.epsilon_end       = 0.1
  train.lr                = 0.0001
  train.replay_capacity   = 10000
  train.seed              = 0
  scene.size              = 64
  scene.blob_count        = 2
  scene.fg_color          = [150,110,100]
  scene.bg_color          = [100,120,140]
  scene.noise_amp         = 30
  scene.stripe_period     = null
  segmenter.alpha         = 0.5
  eval.attack_steps       = 20
  eval.defense_budget     = 20
  eval.fm_defense_budget  = 10
  eval.q_threshold        = 0.0
  paths.data              = null
  paths.out               = null";

const SHARED: [&str; 2] = ["patch_size", "interval"];
const HIDDEN: [&str; 3] = ["patch_size", "interval", "seed"];

fn section_map<T: Serialize>(value: &T, hidden: &[&str]) -> Map<String, Value> {
    let Value::Object(mut map) = serde_json::to_value(value).expect("config sections serialize") else {
        unreachable!()
    };
    for key in hidden {
        map.remove(*key);
    }
    map
}

fn rebuild<T: DeserializeOwned + Serialize>(
    base: &T,
    section: &str,
    updates: &[(String, Value)],
) -> Result<T, UsageError> {
    let mut map = section_map(base, &[]);
    for (field, value) in updates {
        let mut single = map.clone();
        single.insert(field.clone(), value.clone());
        serde_json::from_value::<T>(Value::Object(single))
            .map_err(|e| UsageError(format!("config key `{section}.{field}`: {e}")))?;
        map.insert(field.clone(), value.clone());
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| UsageError(format!("config section `{section}`: {e}")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, UsageError> {
        let root: Value = serde_json::from_str(text).map_err(|e| UsageError(format!("config is not valid JSON: {e}")))?;
        let Value::Object(entries) = root else {
            return Err(UsageError("config must be a JSON object".into()));
        };
        let mut cfg = Self::default();
        let train_keys = section_map(&cfg.train, &SHARED);
        let scene_keys = section_map(&cfg.scene, &HIDDEN);
        let eval_keys = section_map(&cfg.eval, &SHARED);
        let (mut train, mut scene, mut eval) = (Vec::new(), Vec::new(), Vec::new());
        let mut shared = Vec::new();
        for (key, value) in entries {
            let unknown = || UsageError(format!("unknown config key `{key}`"));
            let Some((section, field)) = key.split_once('.') else {
                if SHARED.contains(&key.as_str()) {
                    shared.push((key.clone(), value));
                    continue;
                }
                return Err(unknown());
            };
            let field = field.to_string();
            match section {
                "train" if train_keys.contains_key(&field) => train.push((field, value)),
                "scene" if scene_keys.contains_key(&field) => scene.push((field, value)),
                "eval" if eval_keys.contains_key(&field) => eval.push((field, value)),
                "segmenter" if field == "alpha" => {
                    cfg.segmenter.alpha =
                        value.as_f64().ok_or_else(|| UsageError(format!("config key `{key}` must be a number")))?;
                }
                "paths" if field == "data" || field == "out" => {
                    let path = match &value {
                        Value::Null => None,
                        Value::String(s) => Some(PathBuf::from(s)),
                        _ => return Err(UsageError(format!("config key `{key}` must be a string"))),
                    };
                    if field == "data" {
                        cfg.data = path;
                    } else {
                        cfg.out = path;
                    }
                }
                _ => return Err(unknown()),
            }
        }
        for (key, value) in &shared {
            train.push((key.clone(), value.clone()));
            eval.push((key.clone(), value.clone()));
        }
        cfg.train = rebuild(&cfg.train, "train", &train)?;
        cfg.scene = rebuild(&cfg.scene, "scene", &scene)?;
        cfg.eval = rebuild(&cfg.eval, "eval", &eval)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                Ok(Self::from_json(&text)?)
            }
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let wrap = |e: ppd_core::Error| UsageError(e.to_string());
        self.train.validate().map_err(wrap)?;
        self.scene.validate().map_err(wrap)?;
        ppd_core::segmenter::ProxySegmenter::new(self.segmenter).map_err(wrap)?;
        Ok(())
    }

    /// Flat dotted view of the configuration, the inverse of `from_json`.
    pub fn to_flat(&self) -> Map<String, Value> {
        let mut out = Map::new();
        out.insert("patch_size".into(), self.train.patch_size.into());
        out.insert("interval".into(), self.train.interval.into());
        for (section, map) in [
            ("train", section_map(&self.train, &SHARED)),
            ("scene", section_map(&self.scene, &HIDDEN)),
            ("eval", section_map(&self.eval, &SHARED)),
        ] {
            for (k, v) in map {
                out.insert(format!("{section}.{k}"), v);
            }
        }
        out.insert("segmenter.alpha".into(), self.segmenter.alpha.into());
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(Value::Null, |p| p.display().to_string().into());
        out.insert("paths.data".into(), path(&self.data));
        out.insert("paths.out".into(), path(&self.out));
        out
    }
}
