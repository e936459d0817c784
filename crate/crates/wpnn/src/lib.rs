//! Relay-assisted wireless physical neural networks.
//!
//! Simulates and trains classifiers whose computation happens in the
//! physical layer: programmable-phase metasurface stacks with analog
//! activation layers on both ends of a relay-assisted fading link. The crate
//! provides the propagation model (Rayleigh-Sommerfeld near-field
//! coefficients plus Rayleigh-fading relay hops), the complex-valued forward
//! pass with hardware nonlinearities, exact reverse-mode gradients, Adam
//! training, and Fashion-MNIST ingestion.
//!
//! The numeric core is generic over the scalar type ([`scalar::Scalar`],
//! `f32` or `f64`); the aliases below pin the `f64` instantiation used by the
//! experiments.

pub mod adam;
pub mod backward;
pub mod channel;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod gradcheck;
pub mod linalg;
pub mod matrix;
pub mod nonlinear;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod train;

pub use config::{ExperimentConfig, RxFading, Scheme};
pub use error::{Error, Result};
pub use rng::{SeededRng, RNG_ALGORITHM_ID};
pub use train::{ChannelPolicy, EpochMetrics, TrainConfig};

/// Default experiment scalar type.
pub type Real = f64;
/// Complex scalar at the default precision.
pub type Cplx = num_complex::Complex<f64>;
/// Dense complex matrix at the default precision.
pub type Matrix = matrix::ComplexMatrix<f64>;
/// Model parameters at the default precision.
pub type Params = params::ModelParams<f64>;
/// Precomputed propagation matrices at the default precision.
pub type Propagation = params::FixedPropagation<f64>;
/// Per-parameter gradients at the default precision.
pub type Gradients = backward::GradientSet<f64>;
/// Fading realization at the default precision.
pub type Channels = channel::ChannelDraw<f64>;
/// Training outcome at the default precision.
pub type Trained = train::TrainResult<f64>;
