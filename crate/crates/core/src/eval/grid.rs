use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResult};
use crate::policy::ExitPolicyConfig;
use crate::scalar::Scalar;
use crate::trace::{common_shape, PredictionTrace};

/// Hybrid-policy results over every (tau, patience) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub tau_values: Vec<f64>,
    pub patience_values: Vec<usize>,
    /// Row-major in (tau, patience) order.
    pub cells: Vec<EvalResult>,
}

impl GridResult {
    pub fn cell(&self, tau: f64, patience: usize) -> Option<&EvalResult> {
        self.cells
            .iter()
            .find(|c| c.config.tau == tau && c.config.patience == patience)
    }
}

/// Evaluates the hybrid policy at every (tau, patience) pair against a fixed
/// trace set. Value lists are sorted and de-duplicated first, so the result
/// does not depend on their order. All values are checked before anything
/// is evaluated.
pub fn grid_search<T: Scalar>(
    traces: &[PredictionTrace<T>],
    tau_values: &[f64],
    patience_values: &[usize],
) -> Result<GridResult> {
    let (m, _) = common_shape(traces)?;
    if tau_values.is_empty() || patience_values.is_empty() {
        return Err(Error::config("grid needs at least one tau and one patience value"));
    }
    if let Some(bad) = tau_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::config(format!("tau {bad} outside [0, 1]")));
    }
    if let Some(bad) = patience_values.iter().find(|&&p| p == 0 || p > m) {
        return Err(Error::config(format!("patience {bad} outside [1, {m}]")));
    }

    let mut taus = tau_values.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut patiences = patience_values.to_vec();
    patiences.sort_unstable();
    patiences.dedup();

    let pairs: Vec<(f64, usize)> = taus
        .iter()
        .flat_map(|&t| patiences.iter().map(move |&p| (t, p)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(t, p)| evaluate(traces, &ExitPolicyConfig::epee(t, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        tau_values: taus,
        patience_values: patiences,
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub tau: f64,
    pub patience: usize,
    pub speedup: f64,
    pub accuracy: f64,
}

impl From<&EvalResult> for FrontierPoint {
    fn from(r: &EvalResult) -> Self {
        Self {
            tau: r.config.tau,
            patience: r.config.patience,
            speedup: r.speedup,
            accuracy: r.accuracy,
        }
    }
}

/// Cells not dominated in (speedup, accuracy), sorted by speedup. A cell is
/// dominated when another is at least as good on both and better on one.
/// Cells with identical coordinates are represented once, by the first in
/// grid order.
pub fn pareto_frontier(grid: &GridResult) -> Vec<FrontierPoint> {
    let mut order: Vec<usize> = (0..grid.cells.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&grid.cells[a], &grid.cells[b]);
        cb.speedup
            .total_cmp(&ca.speedup)
            .then(cb.accuracy.total_cmp(&ca.accuracy))
            .then(a.cmp(&b))
    });
    let mut best = f64::NEG_INFINITY;
    let mut frontier = Vec::new();
    for i in order {
        let c = &grid.cells[i];
        if c.accuracy > best {
            best = c.accuracy;
            frontier.push(FrontierPoint::from(c));
        }
    }
    frontier.reverse();
    frontier
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::random::{random_traces, RandomTraceSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traces() -> Vec<PredictionTrace<f64>> {
        random_traces(
            300,
            7,
            RandomTraceSpec {
                layers: (6, 6),
                classes: (4, 4),
            },
        )
    }

    fn fake_grid(points: &[(f64, f64)]) -> GridResult {
        let cells = points
            .iter()
            .enumerate()
            .map(|(i, &(s, a))| EvalResult {
                config: ExitPolicyConfig::epee(i as f64 / 100.0, 1),
                accuracy: a,
                macro_f1: 0.0,
                speedup: s,
                exit_histogram: vec![1],
                n_samples: 1,
            })
            .collect();
        GridResult {
            tau_values: vec![],
            patience_values: vec![1],
            cells,
        }
    }

    fn pairwise_oracle(grid: &GridResult) -> Vec<(f64, f64)> {
        let pts: Vec<(f64, f64)> = grid.cells.iter().map(|c| (c.speedup, c.accuracy)).collect();
        let mut keep = Vec::new();
        for (i, &(s, a)) in pts.iter().enumerate() {
            let dominated = pts.iter().any(|&(s2, a2)| s2 >= s && a2 >= a && (s2 > s || a2 > a));
            let duplicate = pts[..i].contains(&(s, a));
            if !dominated && !duplicate {
                keep.push((s, a));
            }
        }
        keep.sort_by(|x, y| x.0.total_cmp(&y.0));
        keep
    }

    #[test]
    fn full_product_in_order() {
        let g = grid_search(&traces(), &[0.5, 0.0, 0.25], &[3, 1]).unwrap();
        assert_eq!(g.tau_values, vec![0.0, 0.25, 0.5]);
        assert_eq!(g.patience_values, vec![1, 3]);
        let keys: Vec<(f64, usize)> = g.cells.iter().map(|c| (c.config.tau, c.config.patience)).collect();
        assert_eq!(keys, vec![(0.0, 1), (0.0, 3), (0.25, 1), (0.25, 3), (0.5, 1), (0.5, 3)]);
    }

    #[test]
    fn permuted_inputs_same_cells() {
        let t = traces();
        let a = grid_search(&t, &[0.1, 0.4, 0.9], &[1, 2, 5]).unwrap();
        let b = grid_search(&t, &[0.9, 0.1, 0.4], &[5, 1, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn speedup_monotone_in_tau() {
        let taus: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let g = grid_search(&traces(), &taus, &[1, 2, 3, 4, 5, 6]).unwrap();
        for &p in &g.patience_values {
            let row: Vec<f64> = g.tau_values.iter().map(|&t| g.cell(t, p).unwrap().speedup).collect();
            assert!(row.windows(2).all(|w| w[0] <= w[1]), "patience {p}: {row:?}");
        }
    }

    #[test]
    fn invalid_values_rejected_up_front() {
        let t = traces();
        assert!(grid_search(&t, &[], &[1]).is_err());
        assert!(grid_search(&t, &[0.1, 1.5], &[1]).is_err());
        assert!(grid_search(&t, &[0.1], &[0]).is_err());
        assert!(grid_search(&t, &[0.1], &[7]).is_err());
    }

    #[test]
    fn frontier_basics() {
        let g = fake_grid(&[(0.2, 0.9), (0.5, 0.9)]);
        let f = pareto_frontier(&g);
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].speedup, f[0].accuracy), (0.5, 0.9));

        let g = fake_grid(&[(0.3, 0.8); 4]);
        let f = pareto_frontier(&g);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].tau, 0.0);
    }

    #[test]
    fn frontier_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            // Coarse values so ties are common.
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(0..6) as f64 / 5.0, rng.gen_range(0..6) as f64 / 5.0))
                .collect();
            let g = fake_grid(&pts);
            let got: Vec<(f64, f64)> = pareto_frontier(&g).iter().map(|p| (p.speedup, p.accuracy)).collect();
            assert_eq!(got, pairwise_oracle(&g), "{pts:?}");
        }
    }
}
