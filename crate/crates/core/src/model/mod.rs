//! The multi-exit transformer classifier: architecture, joint training,
//! checkpoints and trace export.

pub mod checkpoint;
mod config;
mod export;
mod loss;
mod network;
mod train;

pub use config::{ModelConfig, TrainConfig, WeightScheme};
pub use export::{export_traces, write_trace_file};
pub use loss::{joint_loss, joint_loss_node};
pub use network::{param_layout, Init, MultiExitModel, Param, ParamSpec, INIT_RANGE, LAYER_NORM_EPS};
pub use train::{per_layer_accuracy, train, TrainReport};
