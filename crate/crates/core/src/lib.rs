//! Instruction-guided temporal grounding for video: uniform clip segmentation,
//! reasoning-service orchestration, instruction-aware frame sampling,
//! bidirectional-similarity keyframes, top-k selection and grounding metrics.

pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod keyframe;
pub mod pipeline;
pub mod reasoner;
pub mod sampler;
pub mod selector;
pub mod taxonomy;

pub use error::{Error, FormatError, Result};
