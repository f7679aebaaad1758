//! Adversarial point-prompt optimization.
//!
//! An attack agent activates harmful point prompts and a defense agent
//! deactivates them, both learning by deep Q-learning over a patch graph that
//! carries descriptor and spatial distances. At inference only the defender
//! runs, thinning arbitrary prompt sets before segmentation.

pub mod agent;
pub mod error;
pub mod eval;
pub mod graph_env;
pub mod image;
pub mod metrics;
pub mod rng;
pub mod segmenter;
pub mod synth;

pub use error::{Error, Result};
