use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `Σ p = 1` accepted for an input distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// Shannon entropy of `p` divided by `ln |K|`, so that a uniform
/// distribution scores 1 and a one-hot distribution scores 0.
///
/// Zero-probability classes contribute nothing. The result is clamped to
/// `[0, 1]` to absorb rounding at the two ends.
pub fn normalized_entropy<T: Scalar>(p: &[T]) -> Result<T> {
    if p.len() < 2 {
        return Err(Error::input(format!(
            "normalized entropy needs at least 2 classes, got {}",
            p.len()
        )));
    }
    check_distribution(p)?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked<T: Scalar>(p: &[T]) -> T {
    let h: T = p.iter().filter(|&&x| x > T::zero()).map(|&x| -x * x.ln()).sum();
    (h / T::of_usize(p.len()).ln()).max(T::zero()).min(T::one())
}

pub(crate) fn check_distribution<T: Scalar>(p: &[T]) -> Result<()> {
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < T::zero()) {
        return Err(Error::input(format!("invalid probability {bad}")));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > T::of(DISTRIBUTION_TOLERANCE) {
        return Err(Error::input(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = k;
        }
    }
    best
}
