//! Dual-space patch graph, prompt pools, and the attack/defense MDP.

mod env;
mod graph;
mod grid;
mod prompts;
mod scene;

pub use env::{
    encode_action_features, legal_action_features, segment_pool, ActionFeatures, EnvState, FeatureContext, Phase,
    StepOutcome, FEATURE_LEN,
};
pub use graph::{feature_distance_matrix, physical_distance_matrix, DualSpaceGraph};
pub use grid::{Descriptor, PatchGrid, PatchLayout, DESCRIPTOR_LEN};
pub use prompts::{
    feature_match_grids, feature_match_prompts, init_ideal_prompts, init_training_pool, Polarity, PromptPoint,
    PromptPool, Status,
};

pub use scene::Scene;
