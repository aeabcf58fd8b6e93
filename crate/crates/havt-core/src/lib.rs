//! Audio-visual vehicle state detection at desk scale.
//!
//! The crate generates synthetic surveillance scenes (video plus a
//! multi-microphone audio mix), trains a fusion detector that routes audio
//! evidence to visual locations through joint self-attention and
//! spatial-pulling cross-attention, and evaluates it with standard
//! detection metrics. All numerics are plain f64 on the CPU; batch-level
//! work is data-parallel via rayon behind the `parallel` feature.

pub mod error;
pub mod par;
pub mod tensor;

pub use error::{HavtError, Result};
