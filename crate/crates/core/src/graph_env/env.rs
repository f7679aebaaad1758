use serde::{Deserialize, Serialize};

use super::graph::DualSpaceGraph;
use super::prompts::{PromptPool, Status};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::metrics::dice;
use crate::segmenter::Segmenter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Attack,
    Defense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub phase: Phase,
    pub pool: PromptPool,
    pub step: usize,
    pub max_steps: usize,
    /// Dice of the current active set; `None` when running without ground truth.
    pub last_dice: Option<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub dice: f64,
    pub pred: Mask,
}

/// Runs `seg` on the active prompts of `pool`.
pub fn segment_pool(seg: &dyn Segmenter, img: &Image, pool: &PromptPool) -> Result<Mask> {
    let active: Vec<_> = pool.active().collect();
    seg.segment(img, &active)
}

fn is_candidate(phase: Phase, status: Status) -> bool {
    match phase {
        Phase::Attack => status == Status::Inactive,
        Phase::Defense => status == Status::Active,
    }
}

impl EnvState {
    /// Starts a phase. With `gt`, the initial Dice is measured so that steps
    /// can be rewarded; without it the state only supports action listing
    /// and feature encoding.
    pub fn reset(
        pool: PromptPool,
        phase: Phase,
        max_steps: usize,
        seg: &dyn Segmenter,
        img: &Image,
        gt: Option<&Mask>,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidArgument("prompt pool is empty".into()));
        }
        let last_dice = match gt {
            Some(gt) => Some(dice(&segment_pool(seg, img, &pool)?, gt)?),
            None => None,
        };
        let mut state = Self { phase, pool, step: 0, max_steps, last_dice, terminal: false };
        state.refresh_terminal();
        Ok(state)
    }

    fn candidate_ids(&self) -> Vec<usize> {
        self.pool
            .prompts
            .iter()
            .filter(|p| is_candidate(self.phase, p.status))
            .map(|p| p.id)
            .collect()
    }

    fn refresh_terminal(&mut self) {
        self.terminal = self.step >= self.max_steps || self.candidate_ids().is_empty();
    }

    /// Inactive prompt ids in the attack phase, active ones in defense,
    /// ascending. Errors once the step budget is spent.
    pub fn legal_actions(&self) -> Result<Vec<usize>> {
        if self.step >= self.max_steps {
            return Err(Error::Terminal);
        }
        Ok(self.candidate_ids())
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Toggles prompt `action`, re-segments, and returns the Dice-delta reward
    /// (negated in the attack phase).
    pub fn step(&mut self, action: usize, seg: &dyn Segmenter, img: &Image, gt: &Mask) -> Result<StepOutcome> {
        if self.terminal {
            return Err(Error::Terminal);
        }
        let prev = self.last_dice.ok_or(Error::MissingGroundTruth)?;
        let status = self
            .pool
            .get(action)
            .map(|p| p.status)
            .ok_or_else(|| Error::IllegalAction { action, reason: "no such prompt".into() })?;
        if !is_candidate(self.phase, status) {
            return Err(Error::IllegalAction {
                action,
                reason: format!("prompt is {status:?} during {:?} phase", self.phase),
            });
        }
        let next = match self.phase {
            Phase::Attack => Status::Active,
            Phase::Defense => Status::Inactive,
        };
        self.pool.set_status(action, next);
        let pred = segment_pool(seg, img, &self.pool)?;
        let d = dice(&pred, gt)?;
        let reward = match self.phase {
            Phase::Attack => -(d - prev),
            Phase::Defense => d - prev,
        };
        self.last_dice = Some(d);
        self.step += 1;
        self.refresh_terminal();
        Ok(StepOutcome { reward, dice: d, pred })
    }
}

pub const FEATURE_LEN: usize = 12;
pub type ActionFeatures = [f64; FEATURE_LEN];

/// Image-level normalizers for feature encoding.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub graph: &'a DualSpaceGraph,
    pub img_diag: f64,
    pub f_max: f64,
}

impl<'a> FeatureContext<'a> {
    pub fn new(graph: &'a DualSpaceGraph, img: &Image) -> Self {
        Self { graph, img_diag: img.diagonal(), f_max: graph.f_max() }
    }
}

fn min_mean(values: impl Iterator<Item = f64>, scale: f64) -> (f64, f64) {
    let (mut lo, mut sum, mut n) = (f64::INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        sum += v;
        n += 1;
    }
    if n == 0 {
        (1.0, 1.0)
    } else {
        ((lo / scale).min(1.0), (sum / n as f64 / scale).min(1.0))
    }
}

/// Ground-truth-free description of toggling prompt `action`.
///
/// Layout: polarity (+1/-1), status (1 active), phase (1 attack), min/mean
/// feature distance to other active positives, min/mean feature distance to
/// other active negatives, min/mean physical distance to other active
/// prompts, active fraction of the pool, positive fraction of the active set,
/// fraction of the phase's step budget still remaining. Empty reference
/// groups read as distance 1.
pub fn encode_action_features(state: &EnvState, ctx: &FeatureContext, action: usize) -> Result<ActionFeatures> {
    let pool = &state.pool;
    let cand = pool
        .get(action)
        .ok_or_else(|| Error::IllegalAction { action, reason: "no such prompt".into() })?;
    let g = ctx.graph;
    let f_scale = if ctx.f_max > 0.0 { ctx.f_max } else { 1.0 };
    let ci = cand.patch_index;
    let others = || pool.active().filter(|p| p.id != cand.id);

    let (fp_min, fp_mean) =
        min_mean(others().filter(|p| p.polarity.is_positive()).map(|p| g.feature(ci, p.patch_index)), f_scale);
    let (fn_min, fn_mean) =
        min_mean(others().filter(|p| !p.polarity.is_positive()).map(|p| g.feature(ci, p.patch_index)), f_scale);
    let (p_min, p_mean) = min_mean(others().map(|p| g.physical(ci, p.patch_index)), ctx.img_diag);

    let active = pool.active_count();
    let active_pos = pool.active().filter(|p| p.polarity.is_positive()).count();
    Ok([
        if cand.polarity.is_positive() { 1.0 } else { -1.0 },
        if cand.is_active() { 1.0 } else { 0.0 },
        if state.phase == Phase::Attack { 1.0 } else { 0.0 },
        fp_min,
        fp_mean,
        fn_min,
        fn_mean,
        p_min,
        p_mean,
        active as f64 / pool.len() as f64,
        if active == 0 { 0.0 } else { active_pos as f64 / active as f64 },
        if state.max_steps == 0 {
            0.0
        } else {
            state.max_steps.saturating_sub(state.step) as f64 / state.max_steps as f64
        },
    ])
}

/// Legal actions of `state` with their feature vectors.
pub fn legal_action_features(state: &EnvState, ctx: &FeatureContext) -> Result<(Vec<usize>, Vec<ActionFeatures>)> {
    let ids = state.legal_actions()?;
    let phis = ids.iter().map(|&a| encode_action_features(state, ctx, a)).collect::<Result<_>>()?;
    Ok((ids, phis))
}

impl EnvState {
    /// Toggles `action` without segmenting; used when no ground truth exists.
    pub(crate) fn apply_unscored(&mut self, action: usize) -> Result<()> {
        if self.terminal {
            return Err(Error::Terminal);
        }
        let status = self
            .pool
            .get(action)
            .map(|p| p.status)
            .ok_or_else(|| Error::IllegalAction { action, reason: "no such prompt".into() })?;
        if !is_candidate(self.phase, status) {
            return Err(Error::IllegalAction { action, reason: format!("prompt is {status:?}") });
        }
        let next = match self.phase {
            Phase::Attack => Status::Active,
            Phase::Defense => Status::Inactive,
        };
        self.pool.set_status(action, next);
        self.step += 1;
        self.refresh_terminal();
        Ok(())
    }
}
