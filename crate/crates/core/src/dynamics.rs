//! Discrete-time interacting particle dynamics and their moment reductions.
//!
//! One step moves every particle by
//! `x_i' = x_i + Δt·P/M · Σ_j K(x_j - x_i) + Δt·u`.
//! For the linear alignment kernel `K(r) = r` the interaction collapses to
//! `Δt·P·(mean - x_i)`, so the mean evolves autonomously as `Y' = Y + Δt·u`
//! and the second moment has a closed-form update.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::costs::RunningCost;
use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, Interval, MomentSummary};
use crate::scalar::{fmt17, pairwise_sum, Real};

/// Pairwise interaction kernel `K`, scaled by the kernel gain `P`.
#[derive(Clone, Default)]
pub enum Kernel<T> {
    /// `K(r) = r`: every agent is attracted towards the others at unit rate.
    #[default]
    LinearAlignment,
    /// Arbitrary scalar kernel, evaluated through the O(M²) double sum.
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T> Kernel<T> {
    pub fn custom(k: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Kernel::Custom(Arc::new(k))
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Kernel::LinearAlignment)
    }
}

impl<T> fmt::Debug for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::LinearAlignment => f.write_str("LinearAlignment"),
            Kernel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelConfig<T> {
    pub kernel: Kernel<T>,
    /// Interaction gain `P ≥ 0`.
    pub kernel_gain: T,
    /// Time step `Δt > 0`.
    pub dt: T,
    /// Control regularization `ν > 0`.
    pub nu: T,
    /// Half-width of the admissible control box `U = [-b, b]`; `None` means unbounded.
    pub control_bound: Option<T>,
    pub domain: Interval<T>,
}

impl<T: Real> ModelConfig<T> {
    /// Linear alignment on `[-1, 1]` with `P = Δt = 1` and no control bound.
    pub fn linear(nu: T) -> Result<Self> {
        Self::new(
            Kernel::LinearAlignment,
            T::one(),
            T::one(),
            nu,
            None,
            Interval::symmetric_unit(),
        )
    }

    pub fn new(
        kernel: Kernel<T>,
        kernel_gain: T,
        dt: T,
        nu: T,
        control_bound: Option<T>,
        domain: Interval<T>,
    ) -> Result<Self> {
        let cfg = Self {
            kernel,
            kernel_gain,
            dt,
            nu,
            control_bound,
            domain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dt_gain(mut self, dt: T, kernel_gain: T) -> Result<Self> {
        self.dt = dt;
        self.kernel_gain = kernel_gain;
        self.validate()?;
        Ok(self)
    }

    pub fn with_control_bound(mut self, bound: Option<T>) -> Result<Self> {
        self.control_bound = bound;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::invalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.nu > T::zero() && self.nu.is_finite()) {
            return Err(Error::invalid(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if !(self.kernel_gain >= T::zero() && self.kernel_gain.is_finite()) {
            return Err(Error::invalid(format!(
                "kernel gain must be nonnegative, got {}",
                self.kernel_gain
            )));
        }
        if let Some(b) = self.control_bound {
            if b.is_nan() || b < T::zero() {
                return Err(Error::invalid(format!(
                    "control bound must be nonnegative, got {b}"
                )));
            }
        }
        if self.kernel.is_linear() && self.contraction() > T::one() {
            log::warn!(
                "dt*P = {} exceeds 1: the uncontrolled variance is no longer monotone",
                self.contraction()
            );
        }
        Ok(())
    }

    /// `Δt·P`, the per-step relaxation towards the mean.
    pub fn contraction(&self) -> T {
        self.dt * self.kernel_gain
    }
}

/// One step of the particle system under control `u`.
pub fn step_particles<T: Real>(
    f: &EmpiricalMeasure<T>,
    u: T,
    cfg: &ModelConfig<T>,
) -> EmpiricalMeasure<T> {
    let drift = cfg.dt * u;
    match &cfg.kernel {
        Kernel::LinearAlignment => {
            let a = cfg.contraction();
            let mean = f.mean();
            let next: Vec<T> = f
                .particles()
                .iter()
                .map(|&x| x + a * (mean - x) + drift)
                .collect();
            if a <= T::one() {
                // x ↦ (1-a)x + const is nondecreasing, so order is preserved
                EmpiricalMeasure::from_sorted_unchecked(next, f.domain())
            } else {
                EmpiricalMeasure::new(next, f.domain()).expect("finite particles")
            }
        }
        Kernel::Custom(k) => {
            let next =
                interaction_step_reference(f.particles(), |r| k(r), cfg.kernel_gain, cfg.dt, drift);
            EmpiricalMeasure::new(next, f.domain()).expect("finite particles")
        }
    }
}

/// Direct O(M²) evaluation of `x_i + Δt·P/M Σ_j K(x_j - x_i) + drift`.
pub fn interaction_step_reference<T: Real>(
    xs: &[T],
    kernel: impl Fn(T) -> T,
    gain: T,
    dt: T,
    drift: T,
) -> Vec<T> {
    let m = T::from_usize_lossy(xs.len());
    let mut row = vec![T::zero(); xs.len()];
    xs.iter()
        .map(|&xi| {
            for (slot, &xj) in row.iter_mut().zip(xs) {
                *slot = kernel(xj - xi);
            }
            xi + dt * gain * pairwise_sum(&row) / m + drift
        })
        .collect()
}

/// Mean update `Y' = Y + Δt·u`. Exact for linear alignment and any antisymmetric kernel.
pub fn step_mean<T: Real>(y: T, u: T, cfg: &ModelConfig<T>) -> T {
    y + cfg.dt * u
}

/// Second moment of the pushforward of the linear alignment particle map.
///
/// With `a = Δt·P` every particle maps to `(1-a)x + aY + Δt·u`, hence
/// `E' = (1-a)²E + 2(1-a)(aY + Δt·u)Y + (aY + Δt·u)²`.
pub fn step_second_moment<T: Real>(y: T, e: T, u: T, cfg: &ModelConfig<T>) -> Result<T> {
    if !cfg.kernel.is_linear() {
        return Err(Error::invalid(
            "closed-form second moment needs the linear alignment kernel",
        ));
    }
    if e < y * y - MomentSummary::slack(e) {
        return Err(Error::invalid(format!(
            "second moment {e} below squared mean {}",
            y * y
        )));
    }
    let a = cfg.contraction();
    let keep = T::one() - a;
    let shift = a * y + cfg.dt * u;
    Ok(keep * keep * e + (keep + keep) * shift * y + shift * shift)
}

/// A state the closed loop can advance: a particle ensemble, or its reduction to moments.
pub trait MeanFieldState<T: Real>: Clone {
    fn moments(&self) -> MomentSummary<T>;

    fn advance(&self, u: T, cfg: &ModelConfig<T>) -> Result<Self>;

    /// Particle count outside the domain; zero for reduced states.
    fn excursions(&self) -> usize {
        0
    }
}

impl<T: Real> MeanFieldState<T> for EmpiricalMeasure<T> {
    fn moments(&self) -> MomentSummary<T> {
        EmpiricalMeasure::moments(self)
    }

    fn advance(&self, u: T, cfg: &ModelConfig<T>) -> Result<Self> {
        Ok(step_particles(self, u, cfg))
    }

    fn excursions(&self) -> usize {
        EmpiricalMeasure::excursions(self)
    }
}

/// Reduced representation: evolves `(mean, second moment)` exactly.
impl<T: Real> MeanFieldState<T> for MomentSummary<T> {
    fn moments(&self) -> MomentSummary<T> {
        *self
    }

    fn advance(&self, u: T, cfg: &ModelConfig<T>) -> Result<Self> {
        let e = step_second_moment(self.mean, self.second_moment, u, cfg)?;
        let mean = step_mean(self.mean, u, cfg);
        // contraction of the variance is exact; keep it rather than recomputing E - Y²
        let keep = T::one() - cfg.contraction();
        Ok(MomentSummary {
            mean,
            second_moment: e,
            variance: keep * keep * self.variance,
        })
    }
}

/// Where the controls of a simulation come from.
pub enum ControlSource<'a, T> {
    /// Open loop: `u_n = seq[n]`.
    Sequence(&'a [T]),
    /// Closed loop: `u_n = μ(n, moments(f_n))`.
    Feedback(&'a dyn Fn(usize, &MomentSummary<T>) -> Result<T>),
}

#[derive(Clone, Debug)]
pub struct Trajectory<T, S> {
    pub states: Vec<S>,
    pub controls: Vec<T>,
    pub step_costs: Vec<T>,
    pub total_cost: T,
}

impl<T: Real, S: MeanFieldState<T>> Trajectory<T, S> {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn means(&self) -> Vec<T> {
        self.states.iter().map(|s| s.moments().mean).collect()
    }

    pub fn moment_series(&self) -> Vec<MomentSummary<T>> {
        self.states.iter().map(|s| s.moments()).collect()
    }

    /// Largest excursion count over all states.
    pub fn max_excursions(&self) -> usize {
        self.states
            .iter()
            .map(|s| s.excursions())
            .max()
            .unwrap_or(0)
    }

    /// CSV with columns `n,mean,second_moment,variance,u,step_cost`. The final
    /// state has no control, so its last two fields are empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,mean,second_moment,variance,u,step_cost")?;
        for (n, state) in self.states.iter().enumerate() {
            let m = state.moments();
            write!(
                out,
                "{n},{},{},{}",
                fmt17(m.mean.as_f64()),
                fmt17(m.second_moment.as_f64()),
                fmt17(m.variance.as_f64())
            )?;
            match (self.controls.get(n), self.step_costs.get(n)) {
                (Some(u), Some(c)) => {
                    writeln!(out, ",{},{}", fmt17(u.as_f64()), fmt17(c.as_f64()))?
                }
                _ => writeln!(out, ",,")?,
            }
        }
        Ok(())
    }
}

impl<T: Real> Trajectory<T, EmpiricalMeasure<T>> {
    /// Writes `step_0000.csv`, `step_0001.csv`, ... (single column `x`) into `dir`.
    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (n, f) in self.states.iter().enumerate() {
            let file = std::fs::File::create(dir.join(format!("step_{n:04}.csv")))?;
            f.write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

/// Runs `steps` steps from `f0`, recording `ℓ(f_n, u_n)` for every applied control.
pub fn simulate<T: Real, S: MeanFieldState<T>>(
    f0: S,
    policy: ControlSource<'_, T>,
    steps: usize,
    cfg: &ModelConfig<T>,
    cost: &dyn RunningCost<T>,
) -> Result<Trajectory<T, S>> {
    if let ControlSource::Sequence(seq) = policy {
        if seq.len() < steps {
            return Err(Error::invalid(format!(
                "control sequence has {} entries, {steps} steps requested",
                seq.len()
            )));
        }
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    let mut step_costs = Vec::with_capacity(steps);
    states.push(f0);
    for n in 0..steps {
        let current = &states[n];
        let m = current.moments();
        let u = match &policy {
            ControlSource::Sequence(seq) => seq[n],
            ControlSource::Feedback(mu) => mu(n, &m)?,
        };
        step_costs.push(cost.running(&m, u));
        controls.push(u);
        let next = current.advance(u, cfg)?;
        states.push(next);
    }
    let total_cost = pairwise_sum(&step_costs);
    Ok(Trajectory {
        states,
        controls,
        step_costs,
        total_cost,
    })
}
