//! Text formats for evaluation outputs. Floats are written with six
//! decimals so reruns produce identical bytes.

use std::fmt::Write;

use crate::eval::{EvalResult, FrontierPoint, GridResult, LayerStat};

pub const GRID_HEADER: &str = "tau,patience,accuracy,macro_f1,speedup,n_samples";
pub const CURVE_HEADER: &str = "layer,accuracy,mean_entropy";
pub const HISTOGRAM_HEADER: &str = "layer,count";

/// One grid CSV row (no trailing newline).
pub fn grid_csv_row(r: &EvalResult) -> String {
    format!(
        "{:.6},{},{:.6},{:.6},{:.6},{}",
        r.config.tau, r.config.patience, r.accuracy, r.macro_f1, r.speedup, r.n_samples
    )
}

/// Header plus one row per cell, sorted by (tau, patience).
pub fn grid_csv(grid: &GridResult) -> String {
    let mut cells: Vec<&EvalResult> = grid.cells.iter().collect();
    cells.sort_by(|a, b| {
        a.config
            .tau
            .total_cmp(&b.config.tau)
            .then(a.config.patience.cmp(&b.config.patience))
    });
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&grid_csv_row(c));
        out.push('\n');
    }
    out
}

pub fn curve_csv(curve: &[LayerStat]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for s in curve {
        writeln!(out, "{},{:.6},{:.6}", s.layer, s.accuracy, s.mean_entropy).expect("write to String");
    }
    out
}

pub fn histogram_csv(r: &EvalResult) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (i, c) in r.exit_histogram.iter().enumerate() {
        writeln!(out, "{},{c}", i + 1).expect("write to String");
    }
    out
}

pub fn frontier_json(frontier: &[FrontierPoint]) -> String {
    let mut s = serde_json::to_string_pretty(frontier).expect("frontier serializes");
    s.push('\n');
    s
}
