//! Exit decisions over prediction traces: the normalized-entropy rule, the
//! patience rule, their hybrid, and fixed-depth (budgeted) exiting.

mod config;
mod decide;
mod entropy;
mod oracle;
mod patience;
pub mod random;
pub mod verify;

pub use config::{ExitPolicyConfig, Strategy};
pub use decide::{decide_exit, ExitOutcome, Trigger};
pub use entropy::{argmax, normalized_entropy, DISTRIBUTION_TOLERANCE};
pub use oracle::decide_exit_oracle;
pub use patience::patience_update;
