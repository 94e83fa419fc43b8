//! Pareto stationarity and the per-task performance drop `Δm`.

use alloc::format;

use crate::error::{Error, Result};
use crate::solvers::mgda_weights;
use crate::types::{dot, largest_eigenvalue, GradientMatrix};

/// Projected-GD iterations used by [`pareto_stationarity_default`].
pub const STATIONARITY_STEPS: usize = 2000;

/// `min_{w ∈ Δ} ‖G w‖²`, approximated by `steps` projected-GD iterations.
///
/// The result is also capped by the vertex values `‖g_i‖²`, which are
/// feasible, so it never exceeds `min_i ‖g_i‖²`.
pub fn pareto_stationarity(g: &GradientMatrix, steps: usize, step_size: f64) -> Result<f64> {
    let w = mgda_weights(g, steps, step_size)?;
    let k = g.k();
    let q = g.gram();
    let value = q
        .chunks_exact(k)
        .zip(w.as_slice())
        .map(|(row, wi)| wi * dot(row, w.as_slice()))
        .sum::<f64>()
        .max(0.0);
    let best_vertex = (0..k).map(|i| q[i * k + i]).fold(f64::INFINITY, f64::min);
    Ok(value.min(best_vertex))
}

/// [`pareto_stationarity`] with 2000 steps of size `1 / σ_max(G)²`.
pub fn pareto_stationarity_default(g: &GradientMatrix) -> f64 {
    let l = largest_eigenvalue(&g.gram(), g.k());
    if l == 0.0 {
        return 0.0;
    }
    // Step size is positive and the Gram matrix is finite, so this cannot fail.
    pareto_stationarity(g, STATIONARITY_STEPS, 1.0 / l).unwrap_or(f64::NAN)
}

/// Average relative performance drop against a baseline, in percent:
/// `100/K Σ_k (−1)^{l_k} (M_m,k − M_b,k) / M_b,k` with `l_k = 1` when higher
/// is better for metric `k`.
pub fn delta_m(method: &[f64], baseline: &[f64], higher_better: &[bool]) -> Result<f64> {
    if method.len() != baseline.len() || method.len() != higher_better.len() {
        return Err(Error::shape(
            format!("{} metrics", baseline.len()),
            format!(
                "{} method metrics and {} orientation flags",
                method.len(),
                higher_better.len()
            ),
        ));
    }
    if method.is_empty() {
        return Err(Error::InvalidInput("no metrics given".into()));
    }
    let mut total = 0.0;
    for (i, ((m, b), hb)) in method.iter().zip(baseline).zip(higher_better).enumerate() {
        if *b == 0.0 {
            return Err(Error::ZeroBaseline { index: i });
        }
        let rel = (m - b) / b;
        total += if *hb { -rel } else { rel };
    }
    Ok(100.0 * total / method.len() as f64)
}
