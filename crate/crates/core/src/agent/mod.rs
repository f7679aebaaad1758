//! Deep Q-learning for the attack and defense agents.

mod adam;
mod checkpoint;
mod infer;
mod policy;
mod qnet;
mod replay;
mod train;

pub use adam::AdamState;
pub use checkpoint::{AgentKind, Checkpoint};
pub use infer::{greedy_rollout, infer_defense, TraceRecord};
pub use policy::{argmax, epsilon_at, select_action};
pub use qnet::{regression_loss_and_grad, sync_target, td_loss_and_grad, QNetParams, Transition, ARCH};
pub use replay::ReplayBuffer;
pub use train::{init_networks, train_ppd, train_ppd_observed, EpisodeRecord, StepEvent, TrainConfig, TrainOutput};
