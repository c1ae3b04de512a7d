//! Conditional color-description language models.
//!
//! Given a color in HSV space, the models here assign probabilities to
//! (and generate) short English descriptions such as "dark blue". Three
//! families share the [`models::DescriptionModel`] interface:
//!
//! * a peephole-LSTM decoder conditioned on Fourier (or raw / bucketed)
//!   color features,
//! * an atomic classifier over whole descriptions,
//! * a smoothed histogram baseline with bucket backoff.
//!
//! [`eval`] implements per-description perplexity, AIC, top-1 accuracy and
//! a paired permutation test; [`denotation`] renders cross-sections of
//! `P(d | c)` over HSL space as grayscale PGM images.

pub mod cli;
pub mod corpus;
pub mod denotation;
mod error;
pub mod eval;
pub mod features;
pub mod kernel;
pub mod models;

pub use error::{Error, Result};
