//! Early exiting for multi-exit transformer classifiers.
//!
//! A small encoder with one classifier after every block is trained with a
//! cost-weighted joint loss ([`model`]). Its per-layer predictions are
//! exported as [`PredictionTrace`]s, which the [`policy`] engine turns into
//! exit decisions under the entropy, patience, hybrid and budgeted
//! strategies. [`eval`] scores those decisions (accuracy, macro-F1, layer
//! speed-up) and sweeps threshold grids; [`data`] provides datasets.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the CLI and checkpoints use.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod policy;
mod scalar;
pub mod tensor;
pub mod trace;

pub use error::{Error, Result};
pub use policy::{decide_exit, ExitOutcome, ExitPolicyConfig, Strategy, Trigger};
pub use scalar::Scalar;
pub use tensor::{Graph, Matrix};
pub use trace::PredictionTrace;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Trace = PredictionTrace<f64>;
pub type Trace32 = PredictionTrace<f32>;
pub type Model = model::MultiExitModel<f64>;
pub type Model32 = model::MultiExitModel<f32>;
