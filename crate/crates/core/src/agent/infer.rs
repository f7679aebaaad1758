use serde::{Deserialize, Serialize};

use super::policy::argmax;
use super::qnet::QNetParams;
use crate::error::{Error, Result};
use crate::graph_env::{legal_action_features, EnvState, FeatureContext, Phase, PromptPool, Scene, Status};
use crate::segmenter::Segmenter;

/// One environment step as written to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub phase: Phase,
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    pub dice: f64,
}

/// Greedy (ε = 0) rollout of `q` for up to `steps` steps, scored against the
/// scene's ground truth. Returns the final state and a per-step trace.
pub fn greedy_rollout(
    q: &QNetParams,
    pool: PromptPool,
    phase: Phase,
    steps: usize,
    scene: &Scene,
    seg: &dyn Segmenter,
) -> Result<(EnvState, Vec<TraceRecord>)> {
    let gt = scene.gt()?;
    let ctx = scene.features();
    let mut state = EnvState::reset(pool, phase, steps, seg, &scene.image, Some(gt))?;
    let mut trace = Vec::new();
    while !state.is_terminal() {
        let (ids, phis) = legal_action_features(&state, &ctx)?;
        let scores: Vec<f64> = phis.iter().map(|phi| q.q(phi)).collect();
        let action = ids[argmax(&scores).unwrap()];
        let out = state.step(action, seg, &scene.image, gt)?;
        trace.push(TraceRecord { phase, step: state.step, action, reward: out.reward, dice: out.dice });
    }
    Ok((state, trace))
}

/// Ground-truth-free defense: repeatedly deactivates the active prompt with
/// the highest Q-value, for at most `budget` steps, stopping early when the
/// best Q-value falls below `q_threshold` or a single active prompt remains.
/// The defender only sees the active prompts; inactive ones pass through.
pub fn infer_defense(
    q_def: &QNetParams,
    pool: &PromptPool,
    ctx: &FeatureContext,
    budget: usize,
    q_threshold: f64,
) -> Result<PromptPool> {
    if pool.active_count() == 0 {
        return Err(Error::InvalidArgument("pool has no active prompts".into()));
    }
    let (working, origin) = pool.compact_active();
    let mut state = EnvState {
        phase: Phase::Defense,
        pool: working,
        step: 0,
        max_steps: budget,
        last_dice: None,
        terminal: budget == 0,
    };
    let mut out = pool.clone();
    while !state.is_terminal() && state.pool.active_count() > 1 {
        let (ids, phis) = legal_action_features(&state, ctx)?;
        let scores: Vec<f64> = phis.iter().map(|phi| q_def.q(phi)).collect();
        let best = argmax(&scores).unwrap();
        if scores[best] < q_threshold {
            break;
        }
        state.apply_unscored(ids[best])?;
        out.set_status(origin[ids[best]], Status::Inactive);
    }
    Ok(out)
}
