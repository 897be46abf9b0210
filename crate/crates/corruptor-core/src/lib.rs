//! Visual-corruption augmentation and attention-consistency training at
//! desk scale.
//!
//! The crate provides:
//!
//! - [`imagecore`]: the `[0, 1]`-valued RGB image carrier, file IO, RMSE;
//! - [`fourier`]: 2D DFTs plus the phase-scaling, constant-amplitude and
//!   high-pass corruptions with their fixed severity tables;
//! - [`photometric`]: the 19 pixel-domain corruptions (weather, blur,
//!   noise, digital) parameterized by a severity-table fixture;
//! - [`registry`]: the 22-kind corruption pool, uniform sampling, routing,
//!   and deterministic per-sample random streams;
//! - [`cam`]: class-activation-map extraction with temperature softmax, the
//!   consistency and negative-CAM losses, and their analytic gradients;
//! - [`model`]: a small convolutional classifier with hand-written
//!   backprop, the training loop, evaluation, and a synthetic domain-shift
//!   benchmark;
//! - [`fixtures`]: deterministic reference images for tests and benches.

pub mod cam;
pub mod error;
pub mod fixtures;
pub mod fourier;
pub mod imagecore;
pub mod model;
pub mod photometric;
pub mod registry;

pub use error::{Error, Result};
pub use imagecore::{load_image, rmse, save_image, Dataset, ImageBuffer, LabeledSample};
pub use photometric::{CorruptionKind, Family, Severity, SeverityTable};
pub use registry::{pool_for, CorruptionSpec, PoolDescriptor, SeedPolicy};
