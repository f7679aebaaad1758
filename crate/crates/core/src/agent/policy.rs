use crate::error::{Error, Result};
use crate::graph_env::ActionFeatures;
use crate::rng::Rng;

use super::qnet::QNetParams;
use super::train::TrainConfig;

/// Index of the largest value; the lowest index wins exact ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Epsilon-greedy choice among the candidate actions `phis`.
pub fn select_action(p: &QNetParams, phis: &[ActionFeatures], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("no actions to select from".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0,1]")));
    }
    if rng.next_float() < epsilon {
        return rng.next_int(phis.len());
    }
    let q: Vec<f64> = phis.iter().map(|phi| p.q(phi)).collect();
    Ok(argmax(&q).unwrap())
}

/// Linear annealing from `epsilon_start` at step 0 to `epsilon_end` at
/// `total_steps`, clamped afterwards.
pub fn epsilon_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    let frac = (step as f64 / total_steps.max(1) as f64).min(1.0);
    let eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
    eps.clamp(cfg.epsilon_end, cfg.epsilon_start)
}
