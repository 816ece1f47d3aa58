//! Desk-scale toolkit for sketch-driven sound generation: extraction of
//! time-varying loudness/brightness/pitch controls from audio, median/low-pass
//! sketchification, a small control-conditioned latent diffusion transformer
//! with two-term classifier-free guidance, a procedural training corpus, and
//! a control-adherence evaluation suite.

pub mod audio;
pub mod controls;
pub mod dsp;
pub mod error;
mod ioutil;
pub mod sketch;

pub use audio::AudioClip;
pub use controls::{ControlSet, ControlTrack, PitchProbMatrix};
pub use error::{Error, Result};
