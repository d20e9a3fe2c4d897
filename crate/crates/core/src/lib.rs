//! Local explanations for black-box classifiers.
//!
//! Perturbations switch off connected groups of superpixels (images) or
//! whole dependency groups of tokens (text), the black box scores the
//! recovered inputs, and a proximity-weighted kernel ε-SVR or weighted
//! ridge surrogate is fit to the responses. Attributions, top-K features
//! and fidelity metrics are reported per explained instance.

pub mod blackbox;
pub mod cli;
mod error;
pub mod image;
pub mod instance;
pub mod metrics;
pub mod sampling;
pub mod segmentation;
pub mod surrogate;

pub use error::{BlackBoxError, Error, Result};
