//! Simulation and likelihood inference for spatial temporal exponential-family
//! point processes (STEPPs).
//!
//! Actors move through a latent Euclidean social space while discrete
//! behaviors coevolve. With a squared-Euclidean norm every ego transition is
//! a conditional isotropic Gaussian, so the likelihood is available in closed
//! form. All numeric code is generic over [`Real`]; the `*64` aliases below
//! are what the CLI and file formats use.

// `!(x > 0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod alignment;
pub mod error;
pub mod etd;
pub mod format;
pub mod geometry;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod simulation;

pub use error::{Result, SteppError};
pub use scalar::Real;

pub use model::{ActorId, CovariateLevel, ForceMode, MigrationParams, ModelConfig, Panel, ParamVector, WaveState};

pub type WaveState64 = model::WaveState<f64>;
pub type Panel64 = model::Panel<f64>;
pub type ModelConfig64 = model::ModelConfig<f64>;
pub type ParamVector64 = model::ParamVector<f64>;
pub type MigrationParams64 = model::MigrationParams<f64>;
pub type FitResult64 = inference::FitResult<f64>;

pub type WaveState32 = model::WaveState<f32>;
pub type Panel32 = model::Panel<f32>;
pub type ModelConfig32 = model::ModelConfig<f32>;
pub type ParamVector32 = model::ParamVector<f32>;
