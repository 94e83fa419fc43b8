//! Update directions for SDMGrad, SDMGrad-OS and the MGDA, GD, PCGrad and
//! CAGrad baselines, plus the outer loop that drives them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::pareto_stationarity_default;
use crate::optimizers::{apply_step, OptimizerState, OuterOptimizer};
use crate::problems::{stochastic_gradients, stochastic_gradients_masked, NoiseSpec, Problem};
use crate::rng::{stream, Domain};
use crate::simplex::project_simplex;
use crate::types::{
    dot, norm_sq, Direction, GradientMatrix, ParameterVector, SimplexWeights, SolverConfig,
    TargetCombination, TrajectoryRecord,
};

/// Warm-started weights and the momentum buffer of the inner projected SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub w: SimplexWeights,
    pub velocity: Vec<f64>,
}

impl InnerState {
    pub fn new(w: SimplexWeights) -> Self {
        let velocity = vec![0.0; w.len()];
        Self { w, velocity }
    }

    pub fn uniform(k: usize) -> Result<Self> {
        SimplexWeights::uniform(k).map(Self::new)
    }
}

/// Which objectives a sampled draw evaluates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveMask(Vec<bool>);

impl ObjectiveMask {
    pub fn new(included: Vec<bool>) -> Self {
        Self(included)
    }

    pub fn all(k: usize) -> Self {
        Self(vec![true; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn includes(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// Independent Bernoulli(`n / k`) inclusion per objective.
pub fn sample_mask<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<ObjectiveMask> {
    if n == 0 || n > k {
        return Err(Error::InvalidInput(format!(
            "sample count must lie in [1, {k}], got {n}"
        )));
    }
    if n == k {
        return Ok(ObjectiveMask::all(k));
    }
    let p = n as f64 / k as f64;
    Ok(ObjectiveMask((0..k).map(|_| rng.random_bool(p)).collect()))
}

/// A gradient draw where only the masked-in objectives were evaluated; the
/// remaining columns are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGradients {
    matrix: GradientMatrix,
    mask: ObjectiveMask,
}

impl SampledGradients {
    /// Zeroes the columns of `matrix` that `mask` leaves out.
    pub fn from_full(mut matrix: GradientMatrix, mask: ObjectiveMask) -> Result<Self> {
        matrix.check_k(mask.len(), "mask")?;
        for i in (0..mask.len()).filter(|i| !mask.includes(*i)) {
            matrix.column_mut(i).fill(0.0);
        }
        Ok(Self { matrix, mask })
    }

    pub(crate) fn from_masked_draw(matrix: GradientMatrix, mask: ObjectiveMask) -> Self {
        Self { matrix, mask }
    }

    pub fn matrix(&self) -> &GradientMatrix {
        &self.matrix
    }

    pub fn mask(&self) -> &ObjectiveMask {
        &self.mask
    }

    // H v over the included columns only.
    fn combine(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.matrix.m()];
        for i in (0..self.mask.len()).filter(|i| self.mask.includes(*i)) {
            for (o, g) in out.iter_mut().zip(self.matrix.column(i)) {
                *o += v[i] * g;
            }
        }
        out
    }

    fn transpose_mul(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mask.len())
            .map(|i| {
                if self.mask.includes(i) {
                    dot(self.matrix.column(i), u)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

// w + λ w̃
fn target_blend(w: &[f64], target: &TargetCombination, lambda: f64) -> Vec<f64> {
    w.iter()
        .zip(target.as_slice())
        .map(|(wi, ti)| wi + lambda * ti)
        .collect()
}

fn check_inner(state: &InnerState, k: usize, target: &TargetCombination) -> Result<()> {
    if state.w.len() != k || state.velocity.len() != k {
        return Err(Error::shape(
            format!("inner state of length {k}"),
            format!("{}", state.w.len()),
        ));
    }
    if target.as_slice().len() != k {
        return Err(Error::shape(
            format!("target of length {k}"),
            format!("{}", target.as_slice().len()),
        ));
    }
    Ok(())
}

// velocity ← μ velocity + grad; w ← Π(w − β velocity)
fn momentum_projected_step(
    state: &InnerState,
    grad: &[f64],
    beta: f64,
    momentum: f64,
) -> Result<InnerState> {
    let velocity: Vec<f64> = state
        .velocity
        .iter()
        .zip(grad)
        .map(|(v, g)| momentum * v + g)
        .collect();
    let moved: Vec<f64> = state
        .w
        .as_slice()
        .iter()
        .zip(&velocity)
        .map(|(w, v)| w - beta * v)
        .collect();
    Ok(InnerState {
        w: project_simplex(&moved)?,
        velocity,
    })
}

/// One projected stochastic step on `½‖G w + λ G w̃‖² + ρ/2 ‖w‖²`.
///
/// The stochastic gradient `G_ξᵀ(G_ξ′ w + λ G_ξ′ w̃) + ρ w` uses two
/// independent draws so that it is unbiased.
pub fn sdmgrad_inner_step(
    state: &InnerState,
    g_xi: &GradientMatrix,
    g_xiprime: &GradientMatrix,
    target: &TargetCombination,
    cfg: &SolverConfig,
) -> Result<InnerState> {
    g_xi.check_same_shape(g_xiprime)?;
    check_inner(state, g_xi.k(), target)?;
    let w = state.w.as_slice();
    let inner = g_xiprime.combine(&target_blend(w, target, cfg.lambda))?;
    let grad: Vec<f64> = g_xi
        .transpose_mul(&inner)?
        .into_iter()
        .zip(w)
        .map(|(v, wi)| cfg.objective_scale * (v + cfg.rho * wi))
        .collect();
    momentum_projected_step(state, &grad, cfg.beta, cfg.inner_momentum)
}

/// Runs `cfg.inner_steps` inner steps, asking `oracle(s)` for a fresh
/// independent pair `(G_ξ, G_ξ′)` at every step `s`.
pub fn sdmgrad_solve_weights<F>(
    init: InnerState,
    mut oracle: F,
    target: &TargetCombination,
    cfg: &SolverConfig,
) -> Result<InnerState>
where
    F: FnMut(usize) -> Result<(GradientMatrix, GradientMatrix)>,
{
    let mut state = init;
    for s in 0..cfg.inner_steps {
        let (g_xi, g_xiprime) = oracle(s)?;
        state = sdmgrad_inner_step(&state, &g_xi, &g_xiprime, target, cfg)?;
    }
    Ok(state)
}

/// `G_ζ w + λ G_ζ w̃`.
pub fn sdmgrad_direction(
    g_zeta: &GradientMatrix,
    w: &SimplexWeights,
    target: &TargetCombination,
    lambda: f64,
) -> Result<Direction> {
    g_zeta.check_k(target.as_slice().len(), "target")?;
    Direction::new(g_zeta.combine(&target_blend(w.as_slice(), target, lambda))?)
}

/// The objective-sampled inner gradient
/// `(K/n)² H_ξᵀ(H_ξ′ w + λ H_ξ′ w̃) + ρ w`, before objective rescaling.
pub fn sdmgrad_os_inner_gradient(
    state: &InnerState,
    h_xi: &SampledGradients,
    h_xiprime: &SampledGradients,
    target: &TargetCombination,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    h_xi.matrix.check_same_shape(&h_xiprime.matrix)?;
    let k = h_xi.matrix.k();
    check_inner(state, k, target)?;
    let n = cfg.samples(k);
    if n == 0 || n > k {
        return Err(Error::InvalidInput(format!(
            "sample count must lie in [1, {k}], got {n}"
        )));
    }
    let gamma = k as f64 / n as f64;
    let w = state.w.as_slice();
    let inner = h_xiprime.combine(&target_blend(w, target, cfg.lambda));
    Ok(h_xi
        .transpose_mul(&inner)
        .into_iter()
        .zip(w)
        .map(|(v, wi)| gamma * gamma * v + cfg.rho * wi)
        .collect())
}

/// Momentum + projection step driven by [`sdmgrad_os_inner_gradient`].
pub fn sdmgrad_os_inner_step(
    state: &InnerState,
    h_xi: &SampledGradients,
    h_xiprime: &SampledGradients,
    target: &TargetCombination,
    cfg: &SolverConfig,
) -> Result<InnerState> {
    let grad: Vec<f64> = sdmgrad_os_inner_gradient(state, h_xi, h_xiprime, target, cfg)?
        .into_iter()
        .map(|g| cfg.objective_scale * g)
        .collect();
    momentum_projected_step(state, &grad, cfg.beta, cfg.inner_momentum)
}

/// `(K/n) H_ζ w + (K/n) λ H_ζ w̃`; zero when the mask is empty.
pub fn sdmgrad_os_direction(
    h_zeta: &SampledGradients,
    w: &SimplexWeights,
    target: &TargetCombination,
    lambda: f64,
    k: usize,
    n: usize,
) -> Result<Direction> {
    h_zeta.matrix.check_k(k, "objective count")?;
    h_zeta.matrix.check_k(w.len(), "weights")?;
    h_zeta.matrix.check_k(target.as_slice().len(), "target")?;
    if n == 0 || n > k {
        return Err(Error::InvalidInput(format!(
            "sample count must lie in [1, {k}], got {n}"
        )));
    }
    let gamma = k as f64 / n as f64;
    let d = h_zeta.combine(&target_blend(w.as_slice(), target, lambda));
    Direction::new(d.into_iter().map(|x| gamma * x).collect())
}

/// Projected gradient descent on `½‖G w‖²` from uniform weights.
///
/// Uses the same momentum-free projected step as the SDMGrad inner loop with
/// `λ = 0, ρ = 0` and a fixed `G`, but works on the `K x K` Gram matrix.
pub fn mgda_weights(g: &GradientMatrix, steps: usize, step_size: f64) -> Result<SimplexWeights> {
    let k = g.k();
    let q = g.gram();
    let mut state = InnerState::uniform(k)?;
    for _ in 0..steps {
        let grad: Vec<f64> = q
            .chunks_exact(k)
            .map(|row| dot(row, state.w.as_slice()))
            .collect();
        state = momentum_projected_step(&state, &grad, step_size, 0.0)?;
    }
    Ok(state.w)
}

/// The target direction `g₀ = G w̃`.
pub fn gd_direction(g: &GradientMatrix, target: &TargetCombination) -> Result<Direction> {
    Direction::new(g.combine(target.as_slice())?)
}

/// PCGrad: each gradient is projected off every conflicting other gradient
/// (visited in random order), then the results are averaged.
pub fn pcgrad_direction<R: Rng + ?Sized>(g: &GradientMatrix, rng: &mut R) -> Result<Direction> {
    let (k, m) = (g.k(), g.m());
    let mut mean = vec![0.0; m];
    let mut order: Vec<usize> = Vec::with_capacity(k);
    for i in 0..k {
        let mut gi = g.column(i).to_vec();
        order.clear();
        order.extend((0..k).filter(|j| *j != i));
        order.shuffle(rng);
        for &j in &order {
            let gj = g.column(j);
            let gj_sq = norm_sq(gj);
            if gj_sq == 0.0 {
                continue;
            }
            let conflict = dot(&gi, gj);
            if conflict < 0.0 {
                for (a, b) in gi.iter_mut().zip(gj) {
                    *a -= conflict / gj_sq * b;
                }
            }
        }
        for (a, b) in mean.iter_mut().zip(&gi) {
            *a += b / k as f64;
        }
    }
    Direction::new(mean)
}

/// CAGrad: minimizes `g_wᵀh₀ + c‖h₀‖‖g_w‖` over the simplex by projected
/// gradient descent, then returns `h₀ + (c‖h₀‖ / ‖g_w‖) g_w`.
pub fn cagrad_direction(
    g: &GradientMatrix,
    c: f64,
    steps: usize,
    step_size: f64,
) -> Result<Direction> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidInput(format!(
            "CAGrad radius must lie in [0, 1), got {c}"
        )));
    }
    let k = g.k();
    let avg = vec![1.0 / k as f64; k];
    let h0 = g.combine(&avg)?;
    if c == 0.0 {
        return Direction::new(h0);
    }
    let q = g.gram();
    let q_avg: Vec<f64> = q.chunks_exact(k).map(|row| dot(row, &avg)).collect();
    let radius = c * libm::sqrt(norm_sq(&h0));
    let mut state = InnerState::uniform(k)?;
    for _ in 0..steps {
        let w = state.w.as_slice();
        let qw: Vec<f64> = q.chunks_exact(k).map(|row| dot(row, w)).collect();
        let gw_norm = libm::sqrt(dot(w, &qw).max(0.0));
        let grad: Vec<f64> = if gw_norm > 1e-12 {
            q_avg
                .iter()
                .zip(&qw)
                .map(|(a, b)| a + radius * b / gw_norm)
                .collect()
        } else {
            q_avg.clone()
        };
        state = momentum_projected_step(&state, &grad, step_size, 0.0)?;
    }
    let gw = g.combine(state.w.as_slice())?;
    let gw_norm = libm::sqrt(norm_sq(&gw));
    if gw_norm < 1e-12 {
        return Direction::new(h0);
    }
    Direction::new(
        h0.iter()
            .zip(&gw)
            .map(|(h, x)| h + radius / gw_norm * x)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sdmgrad,
    SdmgradOs,
    Mgda,
    Gd,
    Pcgrad,
    Cagrad,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sdmgrad,
        Method::SdmgradOs,
        Method::Mgda,
        Method::Gd,
        Method::Pcgrad,
        Method::Cagrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sdmgrad => "sdmgrad",
            Method::SdmgradOs => "sdmgrad-os",
            Method::Mgda => "mgda",
            Method::Gd => "gd",
            Method::Pcgrad => "pcgrad",
            Method::Cagrad => "cagrad",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Method::ALL
            .into_iter()
            .find(|m| m.name().replace('-', "") == norm)
            .ok_or_else(|| Error::InvalidConfig {
                field: "method",
                reason: format!("unknown method `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Log every `record_every`-th outer step (and always the last one).
    pub record_every: usize,
    pub record_theta: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            record_theta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_theta: ParameterVector,
    pub final_weights: SimplexWeights,
}

/// Runs `outer_steps` iterations of `method` from `theta0`.
///
/// Draws are indexed per outer step `t` with stride `2S + 1`: inner step `s`
/// uses indices `2s` (ξ) and `2s + 1` (ξ′), and the update direction uses
/// index `2S` (ζ). Objective masks for SDMGrad-OS and PCGrad's visiting order
/// are keyed by `cfg.seed` and the same indices. The inner state (weights and
/// momentum buffer) is carried over between outer steps.
#[allow(clippy::too_many_arguments)]
pub fn run_solver<P: Problem + ?Sized>(
    problem: &P,
    method: Method,
    cfg: &SolverConfig,
    noise: &NoiseSpec,
    theta0: ParameterVector,
    outer_steps: usize,
    outer: &OuterOptimizer,
    options: &RunOptions,
) -> Result<Trajectory> {
    let desc = problem.descriptor();
    let (k, m) = (desc.k, desc.m);
    cfg.validate(k)?;
    outer.kind.validate()?;
    outer.schedule.validate()?;
    if options.record_every == 0 {
        return Err(Error::InvalidConfig {
            field: "record_every",
            reason: "must be >= 1".into(),
        });
    }
    if theta0.len() != m {
        return Err(Error::shape(
            format!("initial parameter of length {m}"),
            format!("{}", theta0.len()),
        ));
    }
    let target = cfg.target(k)?;
    let n = cfg.samples(k);
    let mut state = InnerState::new(cfg.start_weights(k)?);
    let mut opt_state = OptimizerState::new(outer.kind, m);
    let mut theta = theta0;
    let mut records = Vec::new();
    let stride = 2 * cfg.inner_steps as u64 + 1;
    let mgda_cfg = SolverConfig {
        lambda: 0.0,
        rho: 0.0,
        ..cfg.clone()
    };

    for t in 0..outer_steps {
        let base = t as u64 * stride;
        let zeta = base + stride - 1;
        let draw = |index: u64| stochastic_gradients(problem, &theta, noise, index);
        let sampled = |index: u64| -> Result<SampledGradients> {
            let mut rng = stream(cfg.seed, Domain::ObjectiveMask, index, 0);
            let mask = sample_mask(k, n, &mut rng)?;
            let h = stochastic_gradients_masked(problem, &theta, noise, index, Some(&mask))?;
            Ok(SampledGradients::from_masked_draw(h, mask))
        };

        let (direction, weights, g0) = match method {
            Method::Sdmgrad => {
                state = sdmgrad_solve_weights(
                    state,
                    |s| Ok((draw(base + 2 * s as u64)?, draw(base + 2 * s as u64 + 1)?)),
                    &target,
                    cfg,
                )?;
                let g = draw(zeta)?;
                let d = sdmgrad_direction(&g, &state.w, &target, cfg.lambda)?;
                (d, state.w.clone(), g.combine(target.as_slice())?)
            }
            Method::SdmgradOs => {
                for s in 0..cfg.inner_steps as u64 {
                    let h_xi = sampled(base + 2 * s)?;
                    let h_xiprime = sampled(base + 2 * s + 1)?;
                    state = sdmgrad_os_inner_step(&state, &h_xi, &h_xiprime, &target, cfg)?;
                }
                let h = sampled(zeta)?;
                let d = sdmgrad_os_direction(&h, &state.w, &target, cfg.lambda, k, n)?;
                let gamma = k as f64 / n as f64;
                let g0 = h
                    .combine(target.as_slice())
                    .into_iter()
                    .map(|x| gamma * x)
                    .collect();
                (d, state.w.clone(), g0)
            }
            Method::Mgda => {
                let g = draw(zeta)?;
                state = sdmgrad_solve_weights(
                    state,
                    |_| Ok((g.clone(), g.clone())),
                    &target,
                    &mgda_cfg,
                )?;
                let d = sdmgrad_direction(&g, &state.w, &target, 0.0)?;
                (d, state.w.clone(), g.combine(target.as_slice())?)
            }
            Method::Gd => {
                let g = draw(zeta)?;
                (
                    gd_direction(&g, &target)?,
                    target.weights().clone(),
                    g.combine(target.as_slice())?,
                )
            }
            Method::Pcgrad => {
                let g = draw(zeta)?;
                let mut rng = stream(cfg.seed, Domain::Pcgrad, zeta, 0);
                let d = pcgrad_direction(&g, &mut rng)?;
                (d, target.weights().clone(), g.combine(target.as_slice())?)
            }
            Method::Cagrad => {
                let g = draw(zeta)?;
                let l = g.spectral_norm_sq();
                let step = if l > 0.0 { 1.0 / l } else { 1.0 };
                let d = cagrad_direction(&g, cfg.cagrad_c, cfg.baseline_steps, step)?;
                let uniform = SimplexWeights::uniform(k)?;
                let g0 = g.combine(uniform.as_slice())?;
                (d, uniform, g0)
            }
        };

        let alpha = cfg.alpha * outer.schedule.factor(t);
        theta = apply_step(&theta, &direction, alpha, &mut opt_state)?;

        let done = t + 1;
        if done % options.record_every == 0 || done == outer_steps {
            let exact = problem.gradients(&theta)?;
            records.push(TrajectoryRecord {
                iteration: done,
                losses: problem.losses(&theta)?,
                stationarity: pareto_stationarity_default(&exact),
                weight_snapshot: weights,
                direction_norm: direction.norm(),
                target_cosine: direction.cosine(&g0),
                theta_snapshot: options.record_theta.then(|| theta.clone()),
            });
        }
    }

    Ok(Trajectory {
        records,
        final_theta: theta,
        final_weights: state.w,
    })
}
