//! Running costs and horizon cost functionals.

use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, ControlSource, MeanFieldState, ModelConfig, Trajectory};
use crate::error::{Error, Result};
use crate::measures::MomentSummary;
use crate::scalar::{pairwise_sum, Real};

/// A running cost `ℓ(f, u)` that only sees the moments of `f`, together with
/// its pointwise minimum `ℓ*(f) = min_u ℓ(f, u)`.
pub trait RunningCost<T: Real> {
    fn running(&self, m: &MomentSummary<T>, u: T) -> T;

    fn optimal(&self, m: &MomentSummary<T>) -> T;
}

/// `ℓ(f, u) = ½·mean(f)² + (ν/2)·u²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMeanCost<T> {
    nu: T,
}

impl<T: Real> QuadraticMeanCost<T> {
    pub fn new(nu: T) -> Result<Self> {
        if !(nu > T::zero() && nu.is_finite()) {
            return Err(Error::invalid(format!("nu must be positive, got {nu}")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn of_mean(&self, y: T, u: T) -> T {
        let half = T::lit(0.5);
        half * y * y + half * self.nu * u * u
    }
}

impl<T: Real> RunningCost<T> for QuadraticMeanCost<T> {
    fn running(&self, m: &MomentSummary<T>, u: T) -> T {
        self.of_mean(m.mean, u)
    }

    fn optimal(&self, m: &MomentSummary<T>) -> T {
        T::lit(0.5) * m.mean * m.mean
    }
}

/// Adapter turning a pair of closures into a [`RunningCost`].
pub struct FnCost<F, G> {
    pub running: F,
    pub optimal: G,
}

impl<T, F, G> RunningCost<T> for FnCost<F, G>
where
    T: Real,
    F: Fn(&MomentSummary<T>, T) -> T,
    G: Fn(&MomentSummary<T>) -> T,
{
    fn running(&self, m: &MomentSummary<T>, u: T) -> T {
        (self.running)(m, u)
    }

    fn optimal(&self, m: &MomentSummary<T>) -> T {
        (self.optimal)(m)
    }
}

pub fn running_cost<T: Real>(y: T, u: T, cost: &QuadraticMeanCost<T>) -> T {
    cost.of_mean(y, u)
}

pub fn optimal_running_cost<T: Real>(y: T, cost: &QuadraticMeanCost<T>) -> T {
    cost.optimal(&MomentSummary::point(y))
}

/// `J_N = Σ_{n=0}^{N-1} ℓ(f_n, u_n)` over the first `N` recorded steps.
pub fn horizon_cost<T: Real, S: MeanFieldState<T>>(traj: &Trajectory<T, S>, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if traj.step_costs.len() < n || traj.states.len() < n {
        return Err(Error::invalid(format!(
            "trajectory has {} steps, horizon {n} requested",
            traj.step_costs.len()
        )));
    }
    Ok(pairwise_sum(&traj.step_costs[..n]))
}

/// Horizon-`T` stand-in for the infinite-horizon cost of a feedback law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCost<T> {
    /// `Σ_{n=0}^{T} ℓ(f_n, u_n)`.
    pub value: T,
    /// Last summand `ℓ(f_T, u_T)`; small means the truncation is harmless.
    pub tail: T,
}

pub fn truncated_infinite_cost<T: Real, S: MeanFieldState<T>>(
    f0: S,
    feedback: &dyn Fn(usize, &MomentSummary<T>) -> Result<T>,
    horizon: usize,
    cfg: &ModelConfig<T>,
    cost: &dyn RunningCost<T>,
) -> Result<TruncatedCost<T>> {
    if horizon == 0 {
        return Err(Error::invalid("truncation horizon must be positive"));
    }
    let traj = simulate(f0, ControlSource::Feedback(feedback), horizon, cfg, cost)?;
    let last = traj.states.last().expect("at least one state").moments();
    let tail = cost.running(&last, feedback(horizon, &last)?);
    let mut terms = traj.step_costs;
    terms.push(tail);
    Ok(TruncatedCost {
        value: pairwise_sum(&terms),
        tail,
    })
}
