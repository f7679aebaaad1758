//! Benchmark evaluation: ideal / attacked / defended ablation rows and raw vs
//! defended feature-matching rows.

use serde::{Deserialize, Serialize};

use crate::agent::{greedy_rollout, infer_defense, QNetParams};
use crate::error::{Error, Result};
use crate::graph_env::{feature_match_grids, init_training_pool, segment_pool, Phase, PromptPool, Scene, Status};
use crate::image::{Image, Mask};
use crate::metrics::Metrics;
use crate::rng::Rng;
use crate::segmenter::Segmenter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub patch_size: usize,
    pub interval: usize,
    /// Greedy attack steps applied to each ideal pool.
    pub attack_steps: usize,
    /// Maximum deactivations allowed to the defender.
    pub defense_budget: usize,
    /// Maximum deactivations when cleaning feature-matched prompts.
    pub fm_defense_budget: usize,
    pub q_threshold: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { patch_size: 8, interval: 8, attack_steps: 20, defense_budget: 20, fm_defense_budget: 10, q_threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub name: String,
    pub n: usize,
    pub dice_mean: f64,
    pub dice_std: f64,
    pub iou_mean: f64,
    pub iou_std: f64,
}

impl RowSummary {
    pub fn from_metrics(name: &str, values: &[Metrics]) -> Self {
        let (dice_mean, dice_std) = mean_std(values.iter().map(|m| m.dice));
        let (iou_mean, iou_std) = mean_std(values.iter().map(|m| m.iou));
        Self { name: name.to_string(), n: values.len(), dice_mean, dice_std, iou_mean, iou_std }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: String,
    pub settings: EvalSettings,
    pub rows: Vec<RowSummary>,
}

impl Report {
    pub fn row(&self, name: &str) -> Option<&RowSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Metrics of one scene through the ideal → attacked → defended pipeline.
#[derive(Debug, Clone)]
pub struct AblationScene {
    pub ideal: Metrics,
    pub attacked: Metrics,
    pub defended: Metrics,
    pub attacked_pool: PromptPool,
}

fn score(seg: &dyn Segmenter, scene: &Scene, pool: &PromptPool) -> Result<Metrics> {
    Metrics::compute(&segment_pool(seg, &scene.image, pool)?, scene.gt()?)
}

pub fn ablation_scene(
    q_att: &QNetParams,
    q_def: &QNetParams,
    scene: &Scene,
    seg: &dyn Segmenter,
    settings: &EvalSettings,
) -> Result<AblationScene> {
    let pool = init_training_pool(scene.gt()?, settings.interval, scene.layout())?;
    let ideal = score(seg, scene, &pool)?;
    let (attacked, _) = greedy_rollout(q_att, pool, Phase::Attack, settings.attack_steps, scene, seg)?;
    let attacked_pool = attacked.pool;
    let defended_pool =
        infer_defense(q_def, &attacked_pool, &scene.features(), settings.defense_budget, settings.q_threshold)?;
    Ok(AblationScene {
        ideal,
        attacked: score(seg, scene, &attacked_pool)?,
        defended: score(seg, scene, &defended_pool)?,
        attacked_pool,
    })
}

pub fn prepare_scenes(dataset: &[(Image, Mask)], patch_size: usize) -> Result<Vec<Scene>> {
    dataset.iter().map(|(i, m)| Scene::new(i.clone(), Some(m.clone()), patch_size)).collect()
}

pub fn ablation_report(
    q_att: &QNetParams,
    q_def: &QNetParams,
    dataset: &[(Image, Mask)],
    seg: &dyn Segmenter,
    settings: &EvalSettings,
) -> Result<Report> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let scenes = prepare_scenes(dataset, settings.patch_size)?;
    let results =
        scenes.iter().map(|s| ablation_scene(q_att, q_def, s, seg, settings)).collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&AblationScene) -> Metrics| results.iter().map(f).collect::<Vec<_>>();
    Ok(Report {
        mode: "ablation".into(),
        settings: settings.clone(),
        rows: vec![
            RowSummary::from_metrics("ideal", &col(|r| r.ideal)),
            RowSummary::from_metrics("attacked", &col(|r| r.attacked)),
            RowSummary::from_metrics("defended", &col(|r| r.defended)),
        ],
    })
}

/// Raw and defended metrics for feature-matched prompts on one target scene.
pub fn fm_scene(
    q_def: &QNetParams,
    reference: &Scene,
    target: &Scene,
    seg: &dyn Segmenter,
    settings: &EvalSettings,
) -> Result<(Metrics, Metrics)> {
    let pool = feature_match_grids(&reference.grid, reference.gt()?, &target.grid)?;
    let defended = infer_defense(q_def, &pool, &target.features(), settings.fm_defense_budget, settings.q_threshold)?;
    Ok((score(seg, target, &pool)?, score(seg, target, &defended)?))
}

/// Scene 0 is the reference; every other scene is a target (scene 0 is its
/// own target only when the dataset has a single scene).
pub fn fm_report(
    q_def: &QNetParams,
    dataset: &[(Image, Mask)],
    seg: &dyn Segmenter,
    settings: &EvalSettings,
) -> Result<Report> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let scenes = prepare_scenes(dataset, settings.patch_size)?;
    let targets = if scenes.len() > 1 { &scenes[1..] } else { &scenes[..] };
    let results =
        targets.iter().map(|t| fm_scene(q_def, &scenes[0], t, seg, settings)).collect::<Result<Vec<_>>>()?;
    let raw: Vec<Metrics> = results.iter().map(|r| r.0).collect();
    let defended: Vec<Metrics> = results.iter().map(|r| r.1).collect();
    Ok(Report {
        mode: "fm".into(),
        settings: settings.clone(),
        rows: vec![RowSummary::from_metrics("feature_matching", &raw), RowSummary::from_metrics("feature_matching+defense", &defended)],
    })
}

/// Deactivates up to `budget` uniformly chosen active prompts, keeping at
/// least one active.
pub fn random_defense(pool: &PromptPool, budget: usize, rng: &mut Rng) -> Result<PromptPool> {
    let mut out = pool.clone();
    for _ in 0..budget {
        let active = out.active_ids();
        if active.len() <= 1 {
            break;
        }
        let pick = active[rng.next_int(active.len())?];
        out.set_status(pick, Status::Inactive);
    }
    Ok(out)
}

/// Mean Dice of `random_defense` over `trials` draws.
pub fn random_defense_dice(
    pool: &PromptPool,
    scene: &Scene,
    seg: &dyn Segmenter,
    budget: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..trials {
        total += score(seg, scene, &random_defense(pool, budget, rng)?)?.dice;
    }
    Ok(total / trials.max(1) as f64)
}
