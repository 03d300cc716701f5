//! Horizon-`N` optimal control of the mean and the receding-horizon feedback
//! built from it.
//!
//! For mean-dependent quadratic costs the horizon problem lives on the scalar
//! system `Y_{k+1} = Y_k + Δt·v_k` with
//! `J_N(v) = Σ_{k=0}^{N-1} ½Y_k² + (ν/2)v_k²` and no terminal cost. Its value
//! function is `V_k(Y) = p_k·Y²` with `p_N = 0` and
//! `p_k = ½ + p_{k+1}·ν / (ν + 2p_{k+1}Δt²)`.

use serde::{Deserialize, Serialize};

use crate::costs::QuadraticMeanCost;
use crate::dynamics::{simulate, ControlSource, MeanFieldState, ModelConfig, Trajectory};
use crate::error::{Error, Result};
use crate::measures::MomentSummary;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonSolver {
    /// Backward Riccati recursion; exact when the control is unconstrained.
    #[default]
    RiccatiClosedForm,
    /// Accelerated projected gradient on the `N`-dimensional quadratic.
    ProjectedGradient,
}

/// How the prediction horizon is chosen along a closed loop of length `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonPolicy {
    /// Always predict `N` steps ahead.
    #[default]
    Receding,
    /// Predict `min(N, T - n)` steps at time `n`, never past the evaluation window.
    ShrinkToWindow,
}

#[derive(Clone, Debug)]
pub struct MpcConfig<T> {
    pub horizon: usize,
    pub model: ModelConfig<T>,
    pub cost: QuadraticMeanCost<T>,
    pub solver: HorizonSolver,
    pub tolerance: T,
    pub max_iters: usize,
}

impl<T: Real> MpcConfig<T> {
    /// Riccati solver, tolerance `1e-12`, at most `10⁴` iterations; the cost uses `model.nu`.
    pub fn new(horizon: usize, model: ModelConfig<T>) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::invalid(format!(
                "MPC horizon must be at least 2, got {horizon}"
            )));
        }
        let cost = QuadraticMeanCost::new(model.nu)?;
        Ok(Self {
            horizon,
            model,
            cost,
            solver: HorizonSolver::RiccatiClosedForm,
            tolerance: T::lit(1e-12),
            max_iters: 10_000,
        })
    }

    pub fn with_solver(mut self, solver: HorizonSolver) -> Self {
        self.solver = solver;
        self
    }

    fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonSolution<T> {
    /// `v_0, ..., v_{N-1}`.
    pub controls: Vec<T>,
    /// Predicted means `Y_0, ..., Y_N`.
    pub means: Vec<T>,
    /// `J_N` at `controls`; equals `V_N(Y_0)` at the optimum.
    pub value: T,
    /// Gradient iterations used (zero for the closed form).
    pub iterations: usize,
}

/// Coefficients `p_0, ..., p_N` of `V_k(Y) = p_k Y²` and feedback gains
/// `g_0, ..., g_{N-1}` with optimal `v_k = -g_k·Y_k`.
pub fn riccati<T: Real>(horizon: usize, nu: T, dt: T) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut p = vec![T::zero(); horizon + 1];
    let mut gains = vec![T::zero(); horizon];
    for k in (0..horizon).rev() {
        let next = p[k + 1];
        let denom = nu + two * next * dt * dt;
        gains[k] = two * next * dt / denom;
        p[k] = half + next * nu / denom;
    }
    (p, gains)
}

/// `J_N(v)` for the reduced problem started at `y0`.
pub fn horizon_objective<T: Real>(y0: T, controls: &[T], nu: T, dt: T) -> T {
    let cost = QuadraticMeanCost::new(nu).expect("validated nu");
    let mut y = y0;
    let mut total = T::zero();
    for &v in controls {
        total = total + cost.of_mean(y, v);
        y = y + dt * v;
    }
    total
}

/// `∂J_N/∂v_j = ν·v_j + Δt·Σ_{k=j+1}^{N-1} Y_k`.
pub fn horizon_gradient<T: Real>(y0: T, controls: &[T], nu: T, dt: T) -> Vec<T> {
    let n = controls.len();
    let means = predict_means(y0, controls, dt);
    let mut grad = vec![T::zero(); n];
    let mut tail = T::zero();
    for j in (0..n).rev() {
        grad[j] = nu * controls[j] + dt * tail;
        tail = tail + means[j];
    }
    grad
}

fn predict_means<T: Real>(y0: T, controls: &[T], dt: T) -> Vec<T> {
    let mut means = Vec::with_capacity(controls.len() + 1);
    let mut y = y0;
    means.push(y);
    for &v in controls {
        y = y + dt * v;
        means.push(y);
    }
    means
}

/// Solves the horizon problem from mean `y0`.
///
/// A control bound on the model routes the problem to the projected gradient
/// solver, warm-started from the clipped closed-form solution.
pub fn solve_horizon<T: Real>(y0: T, mpc: &MpcConfig<T>) -> Result<HorizonSolution<T>> {
    let model = &mpc.model;
    let n = mpc.horizon;
    if n == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let (p, gains) = riccati(n, mpc.cost.nu(), model.dt);
    let closed_form = || {
        let mut controls = Vec::with_capacity(n);
        let mut y = y0;
        for &g in &gains {
            let v = -g * y;
            controls.push(v);
            y = y + model.dt * v;
        }
        controls
    };
    match (mpc.solver, model.control_bound) {
        (HorizonSolver::RiccatiClosedForm, None) => {
            let controls = closed_form();
            let means = predict_means(y0, &controls, model.dt);
            Ok(HorizonSolution {
                controls,
                means,
                value: p[0] * y0 * y0,
                iterations: 0,
            })
        }
        (HorizonSolver::RiccatiClosedForm, Some(b)) => {
            let start: Vec<T> = closed_form()
                .into_iter()
                .map(|v| v.max(-b).min(b))
                .collect();
            projected_gradient(y0, start, mpc)
        }
        (HorizonSolver::ProjectedGradient, _) => projected_gradient(y0, vec![T::zero(); n], mpc),
    }
}

fn projected_gradient<T: Real>(
    y0: T,
    start: Vec<T>,
    mpc: &MpcConfig<T>,
) -> Result<HorizonSolution<T>> {
    let (nu, dt) = (mpc.cost.nu(), mpc.model.dt);
    let n = start.len();
    let project = |v: T| match mpc.model.control_bound {
        Some(b) => v.max(-b).min(b),
        None => v,
    };
    // Hessian is νI + Δt²·A with A PSD and trace(A) = N(N-1)/2
    let lipschitz = nu + dt * dt * T::from_usize_lossy(n * n.saturating_sub(1) / 2);
    let step = T::one() / lipschitz;
    let threshold = mpc.tolerance * (T::one() + y0 * y0);

    // projected-gradient residual in gradient units; equals |∇J| when unconstrained
    let residual = |x: &[T]| -> T {
        let g = horizon_gradient(y0, x, nu, dt);
        x.iter()
            .zip(&g)
            .map(|(&xi, &gi)| ((xi - project(xi - step * gi)) * lipschitz).abs())
            .fold(T::zero(), T::max)
    };

    let mut x = start;
    let mut y = x.clone();
    let mut t = T::one();
    let mut res = residual(&x);
    let mut iterations = 0;
    while res > threshold {
        if iterations == mpc.max_iters {
            return Err(Error::IterationLimit {
                iterations,
                residual: res.as_f64(),
            });
        }
        iterations += 1;
        let g = horizon_gradient(y0, &y, nu, dt);
        let next: Vec<T> = y
            .iter()
            .zip(&g)
            .map(|(&yi, &gi)| project(yi - step * gi))
            .collect();
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
        // restart momentum when it points uphill
        let uphill = y
            .iter()
            .zip(&next)
            .zip(&x)
            .fold(T::zero(), |acc, ((&yi, &ni), &xi)| {
                acc + (yi - ni) * (ni - xi)
            });
        if uphill > T::zero() {
            t = T::one();
            y = next.clone();
        } else {
            let beta = (t - T::one()) / t_next;
            y = next
                .iter()
                .zip(&x)
                .map(|(&ni, &xi)| ni + beta * (ni - xi))
                .collect();
            t = t_next;
        }
        x = next;
        res = residual(&x);
    }
    let value = horizon_objective(y0, &x, nu, dt);
    let means = predict_means(y0, &x, dt);
    Ok(HorizonSolution {
        controls: x,
        means,
        value,
        iterations,
    })
}

/// First control of the horizon solution.
pub fn mpc_feedback<T: Real>(y: T, mpc: &MpcConfig<T>) -> Result<T> {
    Ok(solve_horizon(y, mpc)?.controls[0])
}

/// `μ(Y) = -Y/(1+ν)`, the horizon-2 MPC law at `Δt = 1`.
pub fn instantaneous_feedback<T: Real>(y: T, nu: T) -> T {
    -y / (T::one() + nu)
}

/// Feedback law of a closed loop over a window of `window` steps.
///
/// Unconstrained Riccati feedback is linear in `Y`, so first-step gains are
/// precomputed per horizon length; otherwise each call solves the horizon problem.
pub struct MpcController<T: Real> {
    mpc: MpcConfig<T>,
    policy: HorizonPolicy,
    window: usize,
    gains: Option<Vec<T>>,
}

impl<T: Real> MpcController<T> {
    pub fn new(mpc: MpcConfig<T>, policy: HorizonPolicy, window: usize) -> Self {
        let linear =
            mpc.solver == HorizonSolver::RiccatiClosedForm && mpc.model.control_bound.is_none();
        let gains = linear.then(|| {
            (0..=mpc.horizon)
                .map(|h| {
                    if h == 0 {
                        T::zero()
                    } else {
                        riccati(h, mpc.cost.nu(), mpc.model.dt).1[0]
                    }
                })
                .collect()
        });
        Self {
            mpc,
            policy,
            window,
            gains,
        }
    }

    pub fn horizon_at(&self, n: usize) -> usize {
        match self.policy {
            HorizonPolicy::Receding => self.mpc.horizon,
            HorizonPolicy::ShrinkToWindow => {
                self.mpc.horizon.min(self.window.saturating_sub(n)).max(1)
            }
        }
    }

    pub fn control(&self, n: usize, y: T) -> Result<T> {
        let h = self.horizon_at(n);
        match &self.gains {
            Some(g) => Ok(-g[h] * y),
            None => Ok(solve_horizon(y, &self.mpc.with_horizon(h))?.controls[0]),
        }
    }
}

/// Receding-horizon closed loop for `steps` steps from `f0` (particles or moments).
pub fn closed_loop<T: Real, S: MeanFieldState<T>>(
    f0: S,
    mpc: &MpcConfig<T>,
    steps: usize,
    policy: HorizonPolicy,
) -> Result<Trajectory<T, S>> {
    if steps == 0 {
        return Err(Error::invalid("closed loop needs at least one step"));
    }
    let controller = MpcController::new(mpc.clone(), policy, steps);
    let feedback = |n: usize, m: &MomentSummary<T>| controller.control(n, m.mean);
    simulate(
        f0,
        ControlSource::Feedback(&feedback),
        steps,
        &mpc.model,
        &mpc.cost,
    )
}

/// Inputs of the bound verifier built from one optimal horizon solution:
/// `λ_n = ℓ(Y_n*, v_n*)` and `ν̃ = V_N(Y_1*)`.
pub fn bound_certificate_inputs<T: Real>(y0: T, mpc: &MpcConfig<T>) -> Result<(Vec<T>, T)> {
    let sol = solve_horizon(y0, mpc)?;
    let lambdas = sol
        .controls
        .iter()
        .zip(&sol.means)
        .map(|(&v, &y)| mpc.cost.of_mean(y, v))
        .collect();
    let nu_tilde = solve_horizon(sol.means[1], mpc)?.value;
    Ok((lambdas, nu_tilde))
}
