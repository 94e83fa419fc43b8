//! Outer-loop update rules for θ.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::{Direction, ParameterVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `θ ← θ − α d`
    Plain,
    /// Heavy ball: `v ← μ v + d`, `θ ← θ − α v`.
    Momentum { momentum: f64 },
    /// Bias-corrected Adam treating `d` as the gradient.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |field, reason: alloc::string::String| Err(Error::InvalidConfig { field, reason });
        match *self {
            OptimizerKind::Plain => Ok(()),
            OptimizerKind::Momentum { momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return bad(
                        "optimizer.momentum",
                        format!("must lie in [0, 1), got {momentum}"),
                    );
                }
                Ok(())
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if !(0.0..1.0).contains(&beta1) {
                    return bad(
                        "optimizer.beta1",
                        format!("must lie in [0, 1), got {beta1}"),
                    );
                }
                if !(0.0..1.0).contains(&beta2) {
                    return bad(
                        "optimizer.beta2",
                        format!("must lie in [0, 1), got {beta2}"),
                    );
                }
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return bad("optimizer.epsilon", format!("must be > 0, got {epsilon}"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Plain,
    Momentum { momentum: f64, velocity: Vec<f64> },
    Adam(AdamState),
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, m: usize) -> Self {
        match kind {
            OptimizerKind::Plain => OptimizerState::Plain,
            OptimizerKind::Momentum { momentum } => OptimizerState::Momentum {
                momentum,
                velocity: vec![0.0; m],
            },
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => OptimizerState::Adam(AdamState {
                first_moment: vec![0.0; m],
                second_moment: vec![0.0; m],
                step_count: 0,
                beta1,
                beta2,
                epsilon,
            }),
        }
    }
}

/// Moves `theta` against `d` with step size `alpha`, updating the optimizer state.
pub fn apply_step(
    theta: &ParameterVector,
    d: &Direction,
    alpha: f64,
    state: &mut OptimizerState,
) -> Result<ParameterVector> {
    if theta.len() != d.len() {
        return Err(Error::shape(
            format!("direction of length {}", theta.len()),
            format!("{}", d.len()),
        ));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "step size must be > 0, got {alpha}"
        )));
    }
    let (theta, d) = (theta.as_slice(), d.as_slice());
    let next: Vec<f64> = match state {
        OptimizerState::Plain => theta.iter().zip(d).map(|(t, g)| t - alpha * g).collect(),
        OptimizerState::Momentum { momentum, velocity } => {
            check_state_len(velocity.len(), d.len())?;
            for (v, g) in velocity.iter_mut().zip(d) {
                *v = *momentum * *v + g;
            }
            theta
                .iter()
                .zip(velocity.iter())
                .map(|(t, v)| t - alpha * v)
                .collect()
        }
        OptimizerState::Adam(s) => {
            check_state_len(s.first_moment.len(), d.len())?;
            s.step_count += 1;
            let bias1 = 1.0 - libm::pow(s.beta1, s.step_count as f64);
            let bias2 = 1.0 - libm::pow(s.beta2, s.step_count as f64);
            theta
                .iter()
                .zip(d)
                .zip(s.first_moment.iter_mut().zip(s.second_moment.iter_mut()))
                .map(|((t, g), (m1, m2))| {
                    *m1 = s.beta1 * *m1 + (1.0 - s.beta1) * g;
                    *m2 = s.beta2 * *m2 + (1.0 - s.beta2) * g * g;
                    let m_hat = *m1 / bias1;
                    let v_hat = *m2 / bias2;
                    t - alpha * m_hat / (libm::sqrt(v_hat) + s.epsilon)
                })
                .collect()
        }
    };
    ParameterVector::new(next)
}

fn check_state_len(state: usize, d: usize) -> Result<()> {
    if state != d {
        return Err(Error::shape(
            format!("optimizer state of length {d}"),
            format!("{state}"),
        ));
    }
    Ok(())
}

/// Multi-step decay: the step size is multiplied by `factor` once the outer
/// iteration reaches `step`, cumulatively over all milestones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningRateSchedule {
    pub milestones: Vec<(usize, f64)>,
}

impl LearningRateSchedule {
    pub fn constant() -> Self {
        Self::default()
    }

    pub fn factor(&self, iteration: usize) -> f64 {
        self.milestones
            .iter()
            .filter(|(step, _)| iteration >= *step)
            .map(|(_, f)| f)
            .product()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((_, f)) = self
            .milestones
            .iter()
            .find(|(_, f)| !(f.is_finite() && *f > 0.0))
        {
            return Err(Error::InvalidConfig {
                field: "optimizer.milestones",
                reason: format!("decay factor must be > 0, got {f}"),
            });
        }
        Ok(())
    }
}

/// The outer update rule together with its step-size schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterOptimizer {
    pub kind: OptimizerKind,
    pub schedule: LearningRateSchedule,
}

impl OuterOptimizer {
    pub fn plain() -> Self {
        Self {
            kind: OptimizerKind::Plain,
            schedule: LearningRateSchedule::constant(),
        }
    }

    pub fn adam() -> Self {
        Self {
            kind: OptimizerKind::adam(),
            schedule: LearningRateSchedule::constant(),
        }
    }
}
