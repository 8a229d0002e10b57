//! Scoring exit policies on trace sets: speed-up, accuracy and macro-F1,
//! per-layer budgeted curves, threshold grids and their Pareto frontier.

mod evaluate;
mod grid;
mod metrics;
pub mod report;

pub use evaluate::{budgeted_curve, evaluate, EvalResult, LayerStat};
pub use grid::{grid_search, pareto_frontier, FrontierPoint, GridResult};
pub use metrics::{accuracy, macro_f1, speedup_from_histogram, speedup_ratio};
