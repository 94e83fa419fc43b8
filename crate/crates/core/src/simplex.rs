//! Euclidean projection onto the probability simplex.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::SimplexWeights;

/// Returns `argmin_{w ∈ Δ} ‖w − v‖²` using the sort-and-threshold method.
///
/// Entries are sorted in descending order (ties keep their original index
/// order), the largest prefix whose entries stay above the running threshold
/// `τ_k = (Σ_{j≤k} v_(j) − 1) / k` is found, and every entry is shifted down
/// by that threshold and clipped at zero.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("entry {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));

    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        cumulative += v[i];
        let candidate = (cumulative - 1.0) / (rank + 1) as f64;
        if v[i] - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(SimplexWeights::from_projection(
        v.iter().map(|x| (x - tau).max(0.0)).collect(),
    ))
}
