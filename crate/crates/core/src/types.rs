//! Shared value types: parameters, gradient matrices, simplex weights and
//! solver configuration.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum allowed deviation of a simplex vector's sum from 1.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Most negative entry a simplex vector may carry.
pub const SIMPLEX_NEG_TOL: f64 = 1e-12;

fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Model parameters θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("parameter vector is empty".to_string()));
        }
        if let Some(i) = first_non_finite(&values) {
            return Err(Error::InvalidInput(format!(
                "parameter entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `K` objective gradients of length `m`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    k: usize,
    m: usize,
    data: Vec<f64>,
}

impl GradientMatrix {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != m) {
            return Err(Error::shape(
                format!("column length {m}"),
                format!("column {i} of length {}", c.len()),
            ));
        }
        Self::from_column_major(k, m, columns.into_iter().flatten().collect())
    }

    pub fn from_column_major(k: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "gradient matrix needs K >= 1 and m >= 1, got K={k}, m={m}"
            )));
        }
        if data.len() != k * m {
            return Err(Error::shape(
                format!("{} entries", k * m),
                format!("{}", data.len()),
            ));
        }
        if let Some(i) = first_non_finite(&data) {
            return Err(Error::InvalidInput(format!(
                "gradient entry {} of objective {} is not finite",
                i % m,
                i / m
            )));
        }
        Ok(Self { k, m, data })
    }

    pub fn zeros(k: usize, m: usize) -> Result<Self> {
        Self::from_column_major(k, m, vec![0.0; k * m])
    }

    /// Number of objectives.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Parameter dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub(crate) fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn check_same_shape(&self, other: &GradientMatrix) -> Result<()> {
        if self.k != other.k || self.m != other.m {
            return Err(Error::shape(
                format!("{}x{}", self.m, self.k),
                format!("{}x{}", other.m, other.k),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_k(&self, len: usize, what: &str) -> Result<()> {
        if len != self.k {
            return Err(Error::shape(
                format!("{what} of length {}", self.k),
                format!("{len}"),
            ));
        }
        Ok(())
    }

    /// `G w`, skipping columns whose weight is exactly zero.
    pub fn combine(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_k(w.len(), "weights")?;
        let mut out = vec![0.0; self.m];
        for (col, &wi) in self.columns().zip(w) {
            if wi == 0.0 {
                continue;
            }
            for (o, g) in out.iter_mut().zip(col) {
                *o += wi * g;
            }
        }
        Ok(out)
    }

    /// `Gᵀ v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.m {
            return Err(Error::shape(
                format!("vector of length {}", self.m),
                format!("{}", v.len()),
            ));
        }
        Ok(self.columns().map(|c| dot(c, v)).collect())
    }

    /// Row-major `K x K` Gram matrix `GᵀG`.
    pub fn gram(&self) -> Vec<f64> {
        let k = self.k;
        let mut q = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = dot(self.column(i), self.column(j));
                q[i * k + j] = v;
                q[j * k + i] = v;
            }
        }
        q
    }

    /// Squared largest singular value of `G`.
    pub fn spectral_norm_sq(&self) -> f64 {
        largest_eigenvalue(&self.gram(), self.k)
    }
}

/// Power iteration for the top eigenvalue of a symmetric PSD row-major matrix.
pub(crate) fn largest_eigenvalue(q: &[f64], k: usize) -> f64 {
    let trace: f64 = (0..k).map(|i| q[i * k + i]).sum();
    if trace <= 0.0 {
        return 0.0;
    }
    // Start off-axis so a diagonal matrix still mixes every coordinate.
    let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let y: Vec<f64> = (0..k).map(|i| dot(&q[i * k..(i + 1) * k], &x)).collect();
        let ny = libm::sqrt(norm_sq(&y));
        if ny == 0.0 {
            return 0.0;
        }
        let next = ny / libm::sqrt(norm_sq(&x));
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - estimate).abs() <= 1e-12 * next {
            return next;
        }
        estimate = next;
    }
    // Rayleigh quotient never exceeds the trace; take the larger of the two
    // lower bounds when iteration stalls on a near-degenerate spectrum.
    estimate.max(trace / k as f64)
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

/// Accepts `v` when every entry is `>= -1e-12` and the sum is within `1e-9` of 1.
pub fn validate_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::InvalidInput("weight vector is empty".to_string()));
    }
    if let Some(i) = first_non_finite(v) {
        return Err(Error::NotOnSimplex(format!("entry {i} is not finite")));
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| **x < -SIMPLEX_NEG_TOL) {
        return Err(Error::NotOnSimplex(format!("entry {i} is negative ({x})")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
    }
    Ok(SimplexWeights(v.to_vec()))
}

impl SimplexWeights {
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput(
                "simplex dimension must be at least 1".to_string(),
            ));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub(crate) fn from_projection(v: Vec<f64>) -> Self {
        debug_assert!(validate_simplex(&v).is_ok());
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The target combination `w̃`; its direction `g₀ = G w̃` is the one the update
/// is pulled toward.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCombination(SimplexWeights);

impl TargetCombination {
    pub fn new(weights: SimplexWeights) -> Self {
        Self(weights)
    }

    /// Average of all objectives.
    pub fn uniform(k: usize) -> Result<Self> {
        SimplexWeights::uniform(k).map(Self)
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// An update direction `d`; callers step along `-α d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = first_non_finite(&values) {
            return Err(Error::InvalidInput(format!(
                "direction entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(norm_sq(&self.0))
    }

    /// Cosine similarity with `other`; zero when either vector vanishes.
    pub fn cosine(&self, other: &[f64]) -> f64 {
        let denom = self.norm() * libm::sqrt(norm_sq(other));
        if denom == 0.0 {
            0.0
        } else {
            dot(&self.0, other) / denom
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Scalar hyperparameters shared by all methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Pull toward the target direction (λ).
    pub lambda: f64,
    /// Quadratic smoothing of the weight problem (ρ).
    pub rho: f64,
    /// Inner projected-SGD step size (β).
    pub beta: f64,
    /// Inner steps per outer iteration (S).
    pub inner_steps: usize,
    pub inner_momentum: f64,
    /// Outer step size (α).
    pub alpha: f64,
    /// Expected number of sampled objectives for SDMGrad-OS; `None` means all.
    pub sample_count: Option<usize>,
    pub seed: u64,
    /// Positive constant multiplying the inner objective.
    pub objective_scale: f64,
    /// CAGrad radius `c`.
    pub cagrad_c: f64,
    /// Projected-GD steps for the CAGrad weight problem.
    pub baseline_steps: usize,
    /// Starting weights `w₀`; uniform when absent.
    pub initial_weights: Option<Vec<f64>>,
    /// Target combination `w̃`; uniform when absent.
    pub target_weights: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            rho: 0.0,
            beta: 10.0,
            inner_steps: 20,
            inner_momentum: 0.5,
            alpha: 0.01,
            sample_count: None,
            seed: 0,
            objective_scale: 1.0,
            cagrad_c: 0.5,
            baseline_steps: 200,
            initial_weights: None,
            target_weights: None,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<alloc::string::String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl SolverConfig {
    /// Checks every range against a problem with `k` objectives.
    pub fn validate(&self, k: usize) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda) {
            return Err(invalid(
                "lambda",
                format!("must be >= 0, got {}", self.lambda),
            ));
        }
        if !finite_nonneg(self.rho) {
            return Err(invalid("rho", format!("must be >= 0, got {}", self.rho)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta", format!("must be > 0, got {}", self.beta)));
        }
        if self.inner_steps == 0 {
            return Err(invalid("inner_steps", "must be >= 1"));
        }
        if !(self.inner_momentum.is_finite() && (0.0..1.0).contains(&self.inner_momentum)) {
            return Err(invalid(
                "inner_momentum",
                format!("must lie in [0, 1), got {}", self.inner_momentum),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if let Some(n) = self.sample_count {
            if n == 0 || n > k {
                return Err(invalid(
                    "sample_count",
                    format!("must lie in [1, {k}], got {n}"),
                ));
            }
        }
        if !(self.objective_scale.is_finite() && self.objective_scale > 0.0) {
            return Err(invalid("objective_scale", "must be > 0"));
        }
        if !(self.cagrad_c.is_finite() && (0.0..1.0).contains(&self.cagrad_c)) {
            return Err(invalid(
                "cagrad_c",
                format!("must lie in [0, 1), got {}", self.cagrad_c),
            ));
        }
        if let Some(w) = &self.initial_weights {
            if w.len() != k {
                return Err(invalid("initial_weights", format!("expected {k} entries")));
            }
            validate_simplex(w).map_err(|e| invalid("initial_weights", e.to_string()))?;
        }
        if let Some(w) = &self.target_weights {
            if w.len() != k {
                return Err(invalid("target_weights", format!("expected {k} entries")));
            }
            validate_simplex(w).map_err(|e| invalid("target_weights", e.to_string()))?;
        }
        Ok(())
    }

    /// Effective `n`, defaulting to all `k` objectives.
    pub fn samples(&self, k: usize) -> usize {
        self.sample_count.unwrap_or(k)
    }

    pub fn target(&self, k: usize) -> Result<TargetCombination> {
        match &self.target_weights {
            Some(w) => Ok(TargetCombination::new(validate_simplex(w)?)),
            None => TargetCombination::uniform(k),
        }
    }

    pub fn start_weights(&self, k: usize) -> Result<SimplexWeights> {
        match &self.initial_weights {
            Some(w) => validate_simplex(w),
            None => SimplexWeights::uniform(k),
        }
    }
}

/// One logged outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Number of completed outer steps.
    pub iteration: usize,
    /// Exact losses at the current iterate.
    pub losses: Vec<f64>,
    /// `min_w ‖G w‖²` at the current iterate, from exact gradients.
    pub stationarity: f64,
    pub weight_snapshot: SimplexWeights,
    pub direction_norm: f64,
    /// Cosine between the applied direction and `g₀` from the same draw.
    pub target_cosine: f64,
    pub theta_snapshot: Option<ParameterVector>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_examples() {
        assert!(validate_simplex(&[0.5, 0.5]).is_ok());
        assert!(validate_simplex(&[1.0]).is_ok());
        assert!(matches!(
            validate_simplex(&[0.7, 0.4]),
            Err(Error::NotOnSimplex(_))
        ));
        assert!(matches!(
            validate_simplex(&[1.5, -0.5]),
            Err(Error::NotOnSimplex(_))
        ));
        assert!(validate_simplex(&[]).is_err());
    }

    #[test]
    fn simplex_tolerances() {
        assert!(validate_simplex(&[1.0 + 5e-10, 0.0]).is_ok());
        assert!(validate_simplex(&[1.0 + 5e-9, 0.0]).is_err());
        assert!(validate_simplex(&[1.0 + 1e-13, -1e-13]).is_ok());
        assert!(validate_simplex(&[1.0 + 1e-11, -1e-11]).is_err());
    }

    #[test]
    fn gradient_matrix_rejects_non_finite() {
        assert!(GradientMatrix::new(vec![vec![1.0, f64::NAN]]).is_err());
        assert!(GradientMatrix::new(vec![vec![1.0, f64::INFINITY]]).is_err());
        assert!(GradientMatrix::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(GradientMatrix::new(vec![]).is_err());
    }

    #[test]
    fn products() {
        let g = GradientMatrix::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.combine(&[0.2, 0.8]).unwrap(), vec![0.4, 0.8]);
        assert_eq!(g.transpose_mul(&[1.0, 3.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(g.gram(), vec![4.0, 0.0, 0.0, 1.0]);
        assert!((g.spectral_norm_sq() - 4.0).abs() < 1e-9);
        assert!(g.combine(&[1.0]).is_err());
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = SolverConfig {
            sample_count: Some(5),
            ..SolverConfig::default()
        };
        match cfg.validate(3) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "sample_count"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SolverConfig::default().validate(1).is_ok());
        let cfg = SolverConfig {
            inner_momentum: 1.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate(2).is_err());
    }
}
