use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::infer::greedy_rollout;
use super::policy::{epsilon_at, select_action};
use super::qnet::{max_q, regression_loss_and_grad, sync_target, QNetParams, Transition, ARCH};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::graph_env::{
    init_training_pool, legal_action_features, ActionFeatures, EnvState, Phase, PromptPool, Scene,
};
use crate::image::{Image, Mask};
use crate::rng::Rng;
use crate::segmenter::Segmenter;

/// Hyperparameters of adversarial training and of the prompt environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Per-phase step counts are drawn uniformly from `[steps_min, steps_max]`.
    pub steps_min: usize,
    pub steps_max: usize,
    pub gamma: f64,
    pub batch_size: usize,
    /// Target networks sync whenever the global environment-step counter
    /// reaches a multiple of this.
    pub target_sync_every: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub lr: f64,
    pub replay_capacity: usize,
    pub patch_size: usize,
    pub interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            steps_min: 5,
            steps_max: 20,
            gamma: 0.99,
            batch_size: 128,
            target_sync_every: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            lr: 1e-4,
            replay_capacity: 10_000,
            patch_size: 8,
            interval: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.steps_min > self.steps_max {
            return bad("steps_min > steps_max");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0,1)");
        }
        if self.epsilon_end > self.epsilon_start
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
        {
            return bad("need 0 <= epsilon_end <= epsilon_start <= 1");
        }
        if self.batch_size == 0 || self.target_sync_every == 0 || self.replay_capacity == 0 {
            return bad("batch_size, target_sync_every and replay_capacity must be positive");
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        if self.patch_size < 2 || self.interval == 0 {
            return bad("patch_size >= 2 and interval >= 1 required");
        }
        Ok(())
    }
}

/// Per-episode training summary (one JSON line in history files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub t_att: usize,
    pub t_def: usize,
    pub dice_ideal: f64,
    pub dice_attacked: f64,
    pub dice_defended: f64,
    /// Mean TD loss over the phase's updates; `None` before warm-up ends.
    pub loss_att: Option<f64>,
    pub loss_def: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub q_att: QNetParams,
    pub q_def: QNetParams,
    pub history: Vec<EpisodeRecord>,
}

/// Emitted after every learning step, once any target sync for that step
/// has happened.
pub struct StepEvent<'a> {
    pub global_step: usize,
    pub phase: Phase,
    pub target_att: &'a QNetParams,
    pub target_def: &'a QNetParams,
}

struct Stored {
    transition: Transition,
    // (target generation, max target Q over next_phis)
    cached_max: Option<(u64, f64)>,
}

struct Learner {
    online: QNetParams,
    target: QNetParams,
    adam: AdamState,
    buffer: ReplayBuffer<Stored>,
}

impl Learner {
    fn new(online: QNetParams, cfg: &TrainConfig) -> Self {
        let adam = AdamState::new(online.len(), cfg.lr);
        Self { target: sync_target(&online), online, adam, buffer: ReplayBuffer::new(cfg.replay_capacity) }
    }

    // One TD update from a replayed batch. The target network only changes
    // at syncs, so max target-Q values are cached per sync generation.
    fn update(&mut self, cfg: &TrainConfig, generation: u64, rng: &mut Rng) -> Result<Option<f64>> {
        if self.buffer.len() < cfg.batch_size {
            return Ok(None);
        }
        let idx = self.buffer.sample_indices(cfg.batch_size, rng);
        let mut phis: Vec<ActionFeatures> = Vec::with_capacity(idx.len());
        let mut ys = Vec::with_capacity(idx.len());
        for i in idx {
            let s = self.buffer.get_mut(i);
            let t = &s.transition;
            let y = if t.terminal || t.next_phis.is_empty() {
                t.reward
            } else {
                let m = match s.cached_max {
                    Some((g, m)) if g == generation => m,
                    _ => {
                        let m = max_q(&self.target, &t.next_phis);
                        s.cached_max = Some((generation, m));
                        m
                    }
                };
                t.reward + cfg.gamma * m
            };
            phis.push(s.transition.phi);
            ys.push(y);
        }
        let refs: Vec<&ActionFeatures> = phis.iter().collect();
        let (loss, grad) = regression_loss_and_grad(&self.online, &refs, &ys)?;
        self.adam.step(self.online.as_mut_slice(), grad.as_slice())?;
        Ok(Some(loss))
    }
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    seg: &'a dyn Segmenter,
    rng: Rng,
    att: Learner,
    def: Learner,
    global_step: usize,
    generation: u64,
}

impl Trainer<'_> {
    fn learning_phase(
        &mut self,
        scene: &Scene,
        pool: PromptPool,
        phase: Phase,
        steps: usize,
        epsilon: f64,
        observer: &mut dyn FnMut(&StepEvent),
    ) -> Result<(EnvState, Option<f64>)> {
        let gt = scene.gt()?;
        let ctx = scene.features();
        let mut state = EnvState::reset(pool, phase, steps, self.seg, &scene.image, Some(gt))?;
        let (mut ids, mut phis) =
            if state.is_terminal() { (vec![], vec![]) } else { legal_action_features(&state, &ctx)? };
        let mut losses = Vec::new();
        while !state.is_terminal() {
            let online = match phase {
                Phase::Attack => &self.att.online,
                Phase::Defense => &self.def.online,
            };
            let k = select_action(online, &phis, epsilon, &mut self.rng)?;
            let out = state.step(ids[k], self.seg, &scene.image, gt)?;
            let (next_ids, next_phis) =
                if state.is_terminal() { (vec![], vec![]) } else { legal_action_features(&state, &ctx)? };
            let transition =
                Transition { phi: phis[k], reward: out.reward, next_phis: next_phis.clone(), terminal: state.is_terminal() };
            let learner = match phase {
                Phase::Attack => &mut self.att,
                Phase::Defense => &mut self.def,
            };
            learner.buffer.push(Stored { transition, cached_max: None });
            if let Some(l) = learner.update(self.cfg, self.generation, &mut self.rng)? {
                losses.push(l);
            }

            self.global_step += 1;
            if self.global_step.is_multiple_of(self.cfg.target_sync_every) {
                self.att.target = sync_target(&self.att.online);
                self.def.target = sync_target(&self.def.online);
                self.generation += 1;
            }
            observer(&StepEvent {
                global_step: self.global_step,
                phase,
                target_att: &self.att.target,
                target_def: &self.def.target,
            });
            ids = next_ids;
            phis = next_phis;
        }
        let mean = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        Ok((state, mean))
    }
}

/// Fresh attack and defense networks for `seed`.
pub fn init_networks(seed: u64) -> (QNetParams, QNetParams) {
    let mut rng = Rng::new(seed);
    let q_att = QNetParams::glorot(&ARCH, &mut rng);
    let q_def = QNetParams::glorot(&ARCH, &mut rng);
    (q_att, q_def)
}

pub fn train_ppd(dataset: &[(Image, Mask)], cfg: &TrainConfig, seg: &dyn Segmenter) -> Result<TrainOutput> {
    train_ppd_observed(dataset, cfg, seg, &mut |_| {})
}

/// Alternating attack/defense training. Each episode cycles to the next
/// scene, lets the attacker learn over a decoy-augmented ideal pool, builds
/// the attacked pool with the greedy attacker, then lets the defender learn
/// to repair its active prompts.
pub fn train_ppd_observed(
    dataset: &[(Image, Mask)],
    cfg: &TrainConfig,
    seg: &dyn Segmenter,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let (q_att, q_def) = init_networks(cfg.seed);
    let mut trainer = Trainer {
        cfg,
        seg,
        // stream 1 keeps exploration draws apart from weight init
        rng: Rng::with_stream(cfg.seed, 1),
        att: Learner::new(q_att, cfg),
        def: Learner::new(q_def, cfg),
        global_step: 0,
        generation: 0,
    };
    let scenes = dataset
        .iter()
        .map(|(img, mask)| Scene::new(img.clone(), Some(mask.clone()), cfg.patch_size))
        .collect::<Result<Vec<_>>>()?;

    let mut history = Vec::with_capacity(cfg.episodes);
    let span = cfg.steps_max - cfg.steps_min + 1;
    for episode in 0..cfg.episodes {
        let scene = &scenes[episode % scenes.len()];
        let epsilon = epsilon_at(episode, cfg.episodes, cfg);
        let t_att = cfg.steps_min + trainer.rng.next_int(span)?;
        let t_def = cfg.steps_min + trainer.rng.next_int(span)?;
        let pool = init_training_pool(scene.gt()?, cfg.interval, scene.layout())?;
        let dice_ideal = EnvState::reset(pool.clone(), Phase::Attack, 0, seg, &scene.image, scene.mask.as_ref())?
            .last_dice
            .unwrap();

        let (_, loss_att) = trainer.learning_phase(scene, pool.clone(), Phase::Attack, t_att, epsilon, observer)?;
        let (attacked, _) = greedy_rollout(&trainer.att.online, pool, Phase::Attack, t_att, scene, seg)?;
        let dice_attacked = attacked.last_dice.unwrap();
        let (defended, loss_def) =
            trainer.learning_phase(scene, attacked.pool.compact_active().0, Phase::Defense, t_def, epsilon, observer)?;

        history.push(EpisodeRecord {
            episode,
            t_att,
            t_def,
            dice_ideal,
            dice_attacked,
            dice_defended: defended.last_dice.unwrap(),
            loss_att,
            loss_def,
        });
    }
    Ok(TrainOutput { q_att: trainer.att.online, q_def: trainer.def.online, history })
}
