//! Benchmark problems with exact gradients, plus a seeded Gaussian noise
//! oracle on top of them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::solvers::ObjectiveMask;
use crate::types::{dot, GradientMatrix, ParameterVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDescriptor {
    pub name: String,
    pub k: usize,
    pub m: usize,
    pub has_known_stationary_set: bool,
}

/// A multi-objective problem with explicit gradients.
pub trait Problem {
    fn descriptor(&self) -> ProblemDescriptor;

    fn num_objectives(&self) -> usize {
        self.descriptor().k
    }

    fn dim(&self) -> usize {
        self.descriptor().m
    }

    fn losses(&self, x: &ParameterVector) -> Result<Vec<f64>>;

    /// Writes the exact gradient of objective `objective` at `x` into `out`.
    fn gradient_into(&self, x: &ParameterVector, objective: usize, out: &mut [f64]) -> Result<()>;

    fn gradients(&self, x: &ParameterVector) -> Result<GradientMatrix> {
        let (k, m) = (self.num_objectives(), self.dim());
        let mut g = GradientMatrix::zeros(k, m)?;
        for i in 0..k {
            self.gradient_into(x, i, g.column_mut(i))?;
        }
        Ok(g)
    }
}

fn check_dim(x: &ParameterVector, m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::shape(
            format!("parameter of length {m}"),
            format!("{}", x.len()),
        ));
    }
    Ok(())
}

/// Per-entry zero-mean Gaussian noise added to every objective gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "noise.sigma",
                reason: format!("must be >= 0, got {sigma}"),
            });
        }
        Ok(Self { sigma, seed })
    }

    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Exact gradients plus i.i.d. `N(0, σ²)` noise per entry.
///
/// The noise of objective `i` comes from the stream keyed by
/// `(noise.seed, draw_index)` on lane `i`, so distinct draw indices give
/// independent matrices and the same index always gives the same matrix.
pub fn stochastic_gradients<P: Problem + ?Sized>(
    problem: &P,
    x: &ParameterVector,
    noise: &NoiseSpec,
    draw_index: u64,
) -> Result<GradientMatrix> {
    stochastic_gradients_masked(problem, x, noise, draw_index, None)
}

/// Like [`stochastic_gradients`], but objectives excluded by `mask` are never
/// evaluated and their columns stay zero.
pub fn stochastic_gradients_masked<P: Problem + ?Sized>(
    problem: &P,
    x: &ParameterVector,
    noise: &NoiseSpec,
    draw_index: u64,
    mask: Option<&ObjectiveMask>,
) -> Result<GradientMatrix> {
    let (k, m) = (problem.num_objectives(), problem.dim());
    if let Some(mask) = mask {
        if mask.len() != k {
            return Err(Error::shape(
                format!("mask of length {k}"),
                format!("{}", mask.len()),
            ));
        }
    }
    let mut g = GradientMatrix::zeros(k, m)?;
    for i in 0..k {
        if mask.is_some_and(|mask| !mask.includes(i)) {
            continue;
        }
        let col = g.column_mut(i);
        problem.gradient_into(x, i, col)?;
        if noise.sigma > 0.0 {
            let mut rng = stream(noise.seed, Domain::GradientNoise, draw_index, i as u64);
            for v in col.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += noise.sigma * z;
            }
        }
    }
    Ok(g)
}

/// Starting points used for the two-objective toy problem.
pub const TOY_INITIALIZATIONS: [[f64; 2]; 3] = [[-8.5, 7.5], [-8.5, 5.0], [9.0, 9.0]];

const TOY_FLOOR: f64 = 0.000005;
const KINK_RADIUS: f64 = 1e-9;

// Inner arguments of the two log terms.
fn toy_log_args(x1: f64, x2: f64) -> [f64; 2] {
    [
        0.5 * (-x1 - 7.0) - libm::tanh(-x2),
        0.5 * (-x1 + 3.0) - libm::tanh(-x2) + 2.0,
    ]
}

fn toy_h(x1: f64) -> [f64; 2] {
    let sq = |v: f64| v * v;
    [
        (sq(-x1 + 7.0) + 0.1 * sq(-x1 - 8.0)) / 10.0 - 20.0,
        (sq(-x1 - 7.0) + 0.1 * sq(-x1 - 8.0)) / 10.0 - 20.0,
    ]
}

fn toy_check(x: &ParameterVector) -> Result<(f64, f64)> {
    check_dim(x, 2)?;
    Ok((x.as_slice()[0], x.as_slice()[1]))
}

/// The two-objective toy problem, evaluated exactly as written in its
/// closed form (natural log, `0.000005` floor inside the max).
pub fn toy_losses(x: &ParameterVector) -> Result<[f64; 2]> {
    let (x1, x2) = toy_check(x)?;
    let f1 = libm::tanh(0.5 * x2).max(0.0);
    let f2 = libm::tanh(-0.5 * x2).max(0.0);
    let [u1, u2] = toy_log_args(x1, x2);
    let g1 = libm::log(u1.abs().max(TOY_FLOOR)) + 6.0;
    let g2 = libm::log(u2.abs().max(TOY_FLOOR)) + 6.0;
    let [h1, h2] = toy_h(x1);
    Ok([f1 * g1 + f2 * h1, f1 * g2 + f2 * h2])
}

/// Analytic gradients of [`toy_losses`] as a 2x2 matrix (one column per
/// objective).
///
/// Fails with [`Error::NonDifferentiablePoint`] within `1e-9` of `x₂ = 0` or,
/// on the `x₂ > 0` side where the log terms are active, within `1e-9` of the
/// `0.000005` floor.
pub fn toy_gradients(x: &ParameterVector) -> Result<GradientMatrix> {
    let (x1, x2) = toy_check(x)?;
    let kink = Error::NonDifferentiablePoint { x1, x2 };
    if x2.abs() <= KINK_RADIUS {
        return Err(kink);
    }
    let columns = if x2 > 0.0 {
        // L_i = tanh(x2/2) * g_i
        let a = libm::tanh(0.5 * x2);
        let da = 0.5 * (1.0 - a * a);
        let t = libm::tanh(x2);
        let dt = 1.0 - t * t;
        let args = toy_log_args(x1, x2);
        let mut cols = [[0.0; 2]; 2];
        for (col, u) in cols.iter_mut().zip(args) {
            if (u.abs() - TOY_FLOOR).abs() <= KINK_RADIUS {
                return Err(kink);
            }
            let g = libm::log(u.abs().max(TOY_FLOOR)) + 6.0;
            // d/du log|u| = 1/u; du/dx1 = -1/2, du/dx2 = 1 - tanh²(x2)
            let (dg1, dg2) = if u.abs() > TOY_FLOOR {
                (-0.5 / u, dt / u)
            } else {
                (0.0, 0.0)
            };
            *col = [a * dg1, da * g + a * dg2];
        }
        cols
    } else {
        // L_i = tanh(-x2/2) * h_i(x1)
        let b = libm::tanh(-0.5 * x2);
        let db = -0.5 * (1.0 - b * b);
        let [h1, h2] = toy_h(x1);
        let dh1 = (2.0 * (x1 - 7.0) + 0.2 * (x1 + 8.0)) / 10.0;
        let dh2 = (2.0 * (x1 + 7.0) + 0.2 * (x1 + 8.0)) / 10.0;
        [[b * dh1, db * h1], [b * dh2, db * h2]]
    };
    GradientMatrix::new(columns.iter().map(|c| c.to_vec()).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ToyProblem;

impl Problem for ToyProblem {
    fn descriptor(&self) -> ProblemDescriptor {
        ProblemDescriptor {
            name: "toy".into(),
            k: 2,
            m: 2,
            has_known_stationary_set: false,
        }
    }

    fn losses(&self, x: &ParameterVector) -> Result<Vec<f64>> {
        toy_losses(x).map(|l| l.to_vec())
    }

    fn gradient_into(&self, x: &ParameterVector, objective: usize, out: &mut [f64]) -> Result<()> {
        let g = toy_gradients(x)?;
        out.copy_from_slice(g.column(objective));
        Ok(())
    }

    fn gradients(&self, x: &ParameterVector) -> Result<GradientMatrix> {
        toy_gradients(x)
    }
}

/// Curvature `A_i` of one quadratic objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Curvature {
    Identity,
    /// Positive diagonal entries.
    Diagonal(Vec<f64>),
    /// Row-major symmetric positive definite `m x m` matrix.
    Dense(Vec<f64>),
}

impl Curvature {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Curvature::Identity => out.copy_from_slice(v),
            Curvature::Diagonal(d) => {
                for ((o, a), x) in out.iter_mut().zip(d).zip(v) {
                    *o = a * x;
                }
            }
            Curvature::Dense(a) => {
                let m = v.len();
                for (row, o) in a.chunks_exact(m).zip(out.iter_mut()) {
                    *o = dot(row, v);
                }
            }
        }
    }

    fn validate(&self, m: usize) -> core::result::Result<(), String> {
        match self {
            Curvature::Identity => Ok(()),
            Curvature::Diagonal(d) => {
                if d.len() != m {
                    return Err(format!("diagonal has {} entries, expected {m}", d.len()));
                }
                if d.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err("diagonal entries must be finite and positive".into());
                }
                Ok(())
            }
            Curvature::Dense(a) => {
                if a.len() != m * m {
                    return Err(format!(
                        "dense curvature has {} entries, expected {}",
                        a.len(),
                        m * m
                    ));
                }
                if a.iter().any(|x| !x.is_finite()) {
                    return Err("dense curvature has non-finite entries".into());
                }
                for i in 0..m {
                    for j in 0..i {
                        if (a[i * m + j] - a[j * m + i]).abs() > 1e-12 * (1.0 + a[i * m + j].abs())
                        {
                            return Err("dense curvature is not symmetric".into());
                        }
                    }
                }
                if !cholesky_succeeds(a, m) {
                    return Err("dense curvature is not positive definite".into());
                }
                Ok(())
            }
        }
    }
}

fn cholesky_succeeds(a: &[f64], m: usize) -> bool {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let s = a[i * m + j] - dot(&l[i * m..i * m + j], &l[j * m..j * m + j]);
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * m + i] = libm::sqrt(s);
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    true
}

/// Objectives `L_i(θ) = ½ (θ − c_i)ᵀ A_i (θ − c_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    curvatures: Vec<Curvature>,
    centers: Vec<Vec<f64>>,
    m: usize,
}

impl QuadraticProblem {
    pub fn new(curvatures: Vec<Curvature>, centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() || centers[0].is_empty() {
            return Err(Error::InvalidInput(
                "quadratic problem needs k >= 1 and m >= 1".into(),
            ));
        }
        if curvatures.len() != centers.len() {
            return Err(Error::shape(
                format!("{} curvatures", centers.len()),
                format!("{}", curvatures.len()),
            ));
        }
        let m = centers[0].len();
        for (i, c) in centers.iter().enumerate() {
            if c.len() != m {
                return Err(Error::shape(
                    format!("center of length {m}"),
                    format!("center {i} of length {}", c.len()),
                ));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("center {i} is not finite")));
            }
        }
        for (i, a) in curvatures.iter().enumerate() {
            a.validate(m)
                .map_err(|e| Error::InvalidInput(format!("curvature {i}: {e}")))?;
        }
        Ok(Self {
            curvatures,
            centers,
            m,
        })
    }

    /// All `A_i = I`; the Pareto set is then the convex hull of the centers.
    pub fn identity(centers: Vec<Vec<f64>>) -> Result<Self> {
        let curvatures = vec![Curvature::Identity; centers.len()];
        Self::new(curvatures, centers)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn curvatures(&self) -> &[Curvature] {
        &self.curvatures
    }
}

impl Problem for QuadraticProblem {
    fn descriptor(&self) -> ProblemDescriptor {
        ProblemDescriptor {
            name: "quadratic".into(),
            k: self.centers.len(),
            m: self.m,
            has_known_stationary_set: self.curvatures.iter().all(|a| *a == Curvature::Identity),
        }
    }

    fn num_objectives(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn losses(&self, x: &ParameterVector) -> Result<Vec<f64>> {
        check_dim(x, self.m)?;
        let mut diff = vec![0.0; self.m];
        let mut ad = vec![0.0; self.m];
        Ok(self
            .curvatures
            .iter()
            .zip(&self.centers)
            .map(|(a, c)| {
                for ((d, t), ci) in diff.iter_mut().zip(x.as_slice()).zip(c) {
                    *d = t - ci;
                }
                a.apply(&diff, &mut ad);
                0.5 * dot(&diff, &ad)
            })
            .collect())
    }

    fn gradient_into(&self, x: &ParameterVector, objective: usize, out: &mut [f64]) -> Result<()> {
        check_dim(x, self.m)?;
        let diff: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(&self.centers[objective])
            .map(|(t, c)| t - c)
            .collect();
        self.curvatures[objective].apply(&diff, out);
        Ok(())
    }
}

/// A seeded random quadratic problem with `k` objectives in `m` dimensions.
///
/// Centers have i.i.d. standard normal entries; each `A_i` is diagonal with
/// entries drawn uniformly from `[0.5, 2]`.
pub fn quadratic_problem(k: usize, m: usize, seed: u64) -> Result<QuadraticProblem> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidInput(
            "quadratic problem needs k >= 1 and m >= 1".into(),
        ));
    }
    let mut centers = Vec::with_capacity(k);
    let mut curvatures = Vec::with_capacity(k);
    for i in 0..k {
        let mut rng = stream(seed, Domain::ProblemData, i as u64, 0);
        centers.push((0..m).map(|_| rng.sample(StandardNormal)).collect());
        let mut rng = stream(seed, Domain::ProblemData, i as u64, 1);
        curvatures.push(Curvature::Diagonal(
            (0..m).map(|_| rng.random_range(0.5..2.0)).collect(),
        ));
    }
    QuadraticProblem::new(curvatures, centers)
}
