//! Dense matrices and a small reverse-mode autodiff tape.

mod gradcheck;
mod graph;
mod matrix;

pub use gradcheck::{grad_check, grad_check_many, EPSILON_RANGE};
pub use graph::{ComputationNode, Graph, NodeId, LOG_CLAMP_FLOOR};
pub use matrix::Matrix;
