use crate::error::{Error, Result};

/// Fraction of transformer blocks skipped, averaged over samples.
///
/// A sample leaving at exit `m` runs exactly blocks `1..=m`, so the
/// per-sample indicator sum collapses to the exit layer and the ratio is
/// `1 - Σ exit_layer / (N · M)`.
pub fn speedup_ratio(exit_layers: &[usize], num_layers: usize) -> Result<f64> {
    if exit_layers.is_empty() {
        return Err(Error::input("speed-up of an empty set of exits"));
    }
    if let Some(&bad) = exit_layers.iter().find(|&&m| m == 0 || m > num_layers) {
        return Err(Error::input(format!("exit layer {bad} outside [1, {num_layers}]")));
    }
    let used: usize = exit_layers.iter().sum();
    Ok(1.0 - used as f64 / (exit_layers.len() * num_layers) as f64)
}

/// Same ratio from a histogram of exit counts per layer (`hist[0]` is layer 1).
pub fn speedup_from_histogram(hist: &[usize]) -> Result<f64> {
    let n: usize = hist.iter().sum();
    if n == 0 {
        return Err(Error::input("empty exit histogram"));
    }
    let used: usize = hist.iter().enumerate().map(|(i, &c)| (i + 1) * c).sum();
    Ok(1.0 - used as f64 / (n * hist.len()) as f64)
}

pub fn accuracy(predicted: &[usize], gold: &[usize]) -> f64 {
    debug_assert_eq!(predicted.len(), gold.len());
    if gold.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    hits as f64 / gold.len() as f64
}

/// Unweighted mean of per-class F1 over `num_classes` classes. A class with
/// zero precision and recall (including one that never occurs in gold or
/// predictions) scores 0.
pub fn macro_f1(predicted: &[usize], gold: &[usize], num_classes: usize) -> f64 {
    if num_classes == 0 {
        return 0.0;
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &g) in predicted.iter().zip(gold) {
        if p == g {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if tp[c] == 0 || denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    total / num_classes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Materializes the per-sample, per-layer usage indicators and sums them.
    fn indicator_oracle(exits: &[usize], m: usize) -> f64 {
        let mut used = vec![vec![0u8; m]; exits.len()];
        for (i, &e) in exits.iter().enumerate() {
            for slot in used[i].iter_mut().take(e) {
                *slot = 1;
            }
        }
        let total: usize = used.iter().flatten().map(|&b| b as usize).sum();
        1.0 - total as f64 / (exits.len() * m) as f64
    }

    #[test]
    fn forced_values() {
        assert!((speedup_ratio(&[4; 10], 12).unwrap() - 0.6667).abs() < 1e-4);
        assert_eq!(speedup_ratio(&[6; 3], 6).unwrap(), 0.0);
        assert_eq!(speedup_ratio(&[1, 2, 3, 4], 4).unwrap(), 0.375);
        assert_eq!(indicator_oracle(&[1, 2, 3, 4], 4), 0.375);
    }

    #[test]
    fn all_exit_at_same_layer() {
        for big_m in 1..=16 {
            for m in 1..=big_m {
                let s = speedup_ratio(&[m; 7], big_m).unwrap();
                assert_eq!(s, 1.0 - m as f64 / big_m as f64);
            }
        }
    }

    #[test]
    fn matches_indicator_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let m = rng.gen_range(1..=16);
            let n = rng.gen_range(1..50);
            let exits: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=m)).collect();
            assert_eq!(speedup_ratio(&exits, m).unwrap(), indicator_oracle(&exits, m));
        }
    }

    #[test]
    fn invalid_exits() {
        assert!(speedup_ratio(&[], 4).is_err());
        assert!(speedup_ratio(&[0], 4).is_err());
        assert!(speedup_ratio(&[5], 4).is_err());
    }

    #[test]
    fn histogram_route() {
        assert_eq!(speedup_from_histogram(&[1, 1, 1, 1]).unwrap(), 0.375);
        assert!(speedup_from_histogram(&[0, 0]).is_err());
    }

    #[test]
    fn f1_conventions() {
        assert_eq!(macro_f1(&[0, 1, 0, 1], &[0, 1, 0, 1], 2), 1.0);
        // Class 2 never appears anywhere and drags the mean down.
        assert!((macro_f1(&[0, 1], &[0, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
        // Class 0: tp=1, fp=1, fn=0 -> 2/3; class 1: tp=0 -> 0.
        assert!((macro_f1(&[0, 0], &[0, 1], 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[0, 0], &[0, 1]), 0.5);
    }
}
