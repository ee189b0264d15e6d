//! Trainable quanvolutional feature extraction over quantum image encodings,
//! simulated exactly on a classical state vector.
//!
//! The crate is organized as a pipeline: [`data`] loads and downsamples MNIST
//! digits, [`encoders`] map image patches to quantum states (threshold, FRQI,
//! NEQR), [`quanvolution`] sweeps a random variational circuit across the
//! patches of an image and measures per-qubit Pauli-Z expectations,
//! [`classifier`] puts a linear softmax head on the extracted features, and
//! [`experiment`] ties it together into a deterministic train/eval loop.
//! [`simulator`] is the shared state-vector engine, [`minimizer`] the boolean
//! minimization used to shrink NEQR preparation circuits, and [`accounting`]
//! the closed-form gate/qubit/parameter cost model.

pub mod accounting;
pub mod classifier;
pub mod data;
pub mod encoders;
pub mod error;
pub mod experiment;
pub mod minimizer;
pub mod quanvolution;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use num_complex::Complex64;
