//! Tumor saliency estimation for breast ultrasound images.
//!
//! The pipeline segments an image into quick-shift regions, groups them into
//! horizontal anatomy layers with Neutro-Connectedness, derives foreground,
//! distance and background cues, and solves a box-constrained quadratic
//! program for per-region saliency with a primal-dual interior-point method.

pub mod anatomy;
pub mod config;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod maps;
pub mod phantom;
pub mod pipeline;
pub mod solver;
pub mod superpixel;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{analyze, batch_evaluate, run_pipeline, Analysis};
