//! Central finite-difference check of graph gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Graph, Matrix, NodeId};

/// Accepted range for the finite-difference step.
pub const EPSILON_RANGE: (f64, f64) = (1e-7, 1e-3);

/// Compares the analytic gradient of a scalar function of one parameter
/// matrix against central differences.
///
/// `f` receives a fresh graph and the leaf holding the parameters and must
/// return a 1x1 node. The result is the largest
/// `|analytic - numeric| / max(1, |numeric|)` over all entries.
pub fn grad_check<T, F>(f: F, params: &Matrix<T>, epsilon: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, NodeId) -> Result<NodeId>,
{
    grad_check_many(|g, ids| f(g, ids[0]), std::slice::from_ref(params), epsilon)
}

/// [`grad_check`] over several parameter matrices at once.
pub fn grad_check_many<T, F>(f: F, params: &[Matrix<T>], epsilon: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &[NodeId]) -> Result<NodeId>,
{
    let (lo, hi) = EPSILON_RANGE;
    if !(epsilon >= T::of(lo) && epsilon <= T::of(hi)) {
        return Err(Error::config(format!(
            "finite-difference step {epsilon} outside [{lo}, {hi}]"
        )));
    }

    let evaluate = |values: &[Matrix<T>]| -> Result<T> {
        let mut g = Graph::new();
        let ids = values.iter().map(|v| g.leaf(v.clone())).collect::<Result<Vec<_>>>()?;
        let root = f(&mut g, &ids)?;
        let loss = g.value(root).item();
        if !loss.is_finite() {
            return Err(Error::NonFinite { op: "grad_check" });
        }
        Ok(loss)
    };

    let mut g = Graph::new();
    let ids = params.iter().map(|v| g.leaf(v.clone())).collect::<Result<Vec<_>>>()?;
    let root = f(&mut g, &ids)?;
    if !g.value(root).item().is_finite() {
        return Err(Error::NonFinite { op: "grad_check" });
    }
    g.backward(root)?;
    let analytic: Vec<Matrix<T>> = ids
        .iter()
        .map(|&id| g.grad(id).cloned().expect("leaf reached by backward"))
        .collect();

    let two = T::of(2.0);
    let mut worst = T::zero();
    let mut probe = params.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for k in 0..params[p].len() {
            let orig = params[p].data()[k];
            probe[p].data_mut()[k] = orig + epsilon;
            let up = evaluate(&probe)?;
            probe[p].data_mut()[k] = orig - epsilon;
            let down = evaluate(&probe)?;
            probe[p].data_mut()[k] = orig;

            let numeric = (up - down) / (two * epsilon);
            let err = (grad.data()[k] - numeric).abs() / numeric.abs().max(T::one());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
