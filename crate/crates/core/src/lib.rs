//! Point-based neural rendering toolkit.
//!
//! Builds a neural point field from a point cloud plus posed multi-view
//! images, then renders, finetunes and edits it. The pipeline stages are:
//!
//! 1. estimate a dense visible depth map per view from point density
//!    ([`visibility`]),
//! 2. score per-point physical visibility against those depth maps and
//!    fetch image features onto the points ([`fetch`], [`pyramid`]),
//! 3. sample rays nonuniformly around the estimated surface ([`sampling`]),
//! 4. aggregate point features at ray samples through a learnable spatial
//!    kernel and volume-render ([`kernel`], [`renderer`]),
//! 5. train and hierarchically finetune the scene ([`training`]), and
//! 6. edit the deployed field directly ([`editing`]).
//!
//! All gradients are hand-derived reverse-mode passes over the fixed
//! compute graph and are validated against central finite differences.

pub mod config;
pub mod editing;
pub mod error;
pub mod fetch;
pub mod grid;
pub mod img;
pub mod io;
pub mod kernel;
pub mod math;
pub mod metrics;
pub mod mlp;
pub mod pyramid;
pub mod renderer;
pub mod sampling;
pub mod scene;
pub mod synth;
pub mod training;
pub mod visibility;

pub use error::{Error, Result};
