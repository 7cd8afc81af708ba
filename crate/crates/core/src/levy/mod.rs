//! Lévy measures with finitely many angular atoms and regularly varying
//! radial tails, and exact-in-law samplers for their jump components.

pub mod measure;
pub mod rng;
pub mod sampler;

pub use measure::{Atom, LevyMeasure, SlowVariation};
pub use rng::{trial_rng, AUX_STREAM, LARGE_JUMP_STREAM, SMALL_JUMP_STREAM};
pub use sampler::{
    sample_large_jumps, small_jump_increment, JumpEvent, LargeJumpStream, SmallJumpConfig,
    SmallJumpStream,
};
