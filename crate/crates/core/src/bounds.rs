//! Exponential controllability and the a-priori performance bound `α_N`.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{LpScalar, Real};

/// `(C, σ)` of the exponential controllability bound `β(r, n) = C·σⁿ·r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityParams<T> {
    c: T,
    sigma: T,
}

impl<T: Real> ControllabilityParams<T> {
    /// Requires `C ≥ 1` and `0 ≤ σ < 1`; `σ = 0` is the one-step controllable limit.
    pub fn new(c: T, sigma: T) -> Result<Self> {
        if !(c >= T::one() && c.is_finite()) {
            return Err(Error::invalid(format!(
                "overshoot constant must be >= 1, got {c}"
            )));
        }
        if !(sigma >= T::zero() && sigma < T::one()) {
            return Err(Error::invalid(format!(
                "decay rate must lie in [0, 1), got {sigma}"
            )));
        }
        Ok(Self { c, sigma })
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `B_m = C·Σ_{n<m} σⁿ`, the summed bound over `m` steps (so `γ_i = B_i`).
    pub fn gamma(&self, m: usize) -> T {
        let (c, s) = (self.c, self.sigma);
        if m == 0 {
            return T::zero();
        }
        if (T::one() - s).abs() < T::lit(1e-8) {
            let mut term = T::one();
            let mut sum = T::zero();
            for _ in 0..m {
                sum = sum + term;
                term = term * s;
            }
            return c * sum;
        }
        // 1 - σ^m without cancellation for σ near 1
        let one_minus_pow = if s.is_zero() {
            T::one()
        } else {
            -(T::from_usize_lossy(m) * s.ln()).exp_m1()
        };
        c * one_minus_pow / (T::one() - s)
    }
}

/// `C = 1 + ν/(1+ν)²`, `σ = (1 - 1/(1+ν))²`, the constants of the instantaneous feedback.
pub fn controllability_from_nu<T: Real>(nu: T) -> Result<ControllabilityParams<T>> {
    if !(nu > T::zero() && nu.is_finite()) {
        return Err(Error::invalid(format!("nu must be positive, got {nu}")));
    }
    let one = T::one();
    let c = one + nu / ((one + nu) * (one + nu));
    let ratio = nu / (one + nu);
    ControllabilityParams::new(c, ratio * ratio)
}

/// Exact `(C, σ)` for a rational `ν`.
pub fn controllability_from_nu_exact(nu: &BigRational) -> Result<(BigRational, BigRational)> {
    if *nu <= BigRational::zero() {
        return Err(Error::invalid(format!("nu must be positive, got {nu}")));
    }
    let one = BigRational::one();
    let denom = &one + nu;
    let c = &one + nu / (&denom * &denom);
    let ratio = nu / &denom;
    Ok((c, &ratio * &ratio))
}

pub fn beta<T: Real>(r: T, n: usize, p: &ControllabilityParams<T>) -> T {
    p.c * p.sigma.powi(n as i32) * r
}

/// `γ_2, ..., γ_N` with `γ_i = C·Σ_{n=0}^{i-1} σⁿ`.
pub fn gamma_sequence<T: Real>(p: &ControllabilityParams<T>, horizon: usize) -> Result<Vec<T>> {
    check_horizon(horizon)?;
    Ok((2..=horizon).map(|i| p.gamma(i)).collect())
}

/// `α_N = 1 - (γ_N - 1)·Π(γ_i - 1) / (Π γ_i - Π(γ_i - 1))`, products over `i = 2..N`.
///
/// Evaluated through `R = Π(1 - 1/γ_i)` as `α_N = 1 - (γ_N - 1)·R/(1 - R)`, with
/// `ln R` accumulated by `ln_1p` so large horizons neither overflow nor cancel.
pub fn alpha_n<T: Real>(p: &ControllabilityParams<T>, horizon: usize) -> Result<T> {
    let gammas = gamma_sequence(p, horizon)?;
    let log_r = gammas
        .iter()
        .fold(T::zero(), |acc, &g| acc + (-g.recip()).ln_1p());
    let r = log_r.exp();
    let one_minus_r = -log_r.exp_m1();
    if !(one_minus_r > T::zero() && one_minus_r.is_finite()) {
        return Err(Error::Internal(format!(
            "alpha_N denominator vanished for N = {horizon}"
        )));
    }
    let last = *gammas.last().expect("N >= 2");
    Ok(T::one() - (last - T::one()) * r / one_minus_r)
}

/// Direct product form of `α_N` from `γ_2..γ_N`, for exact scalars.
pub fn alpha_from_gammas<T: LpScalar>(gammas: &[T]) -> Result<T> {
    let last = gammas
        .last()
        .ok_or_else(|| Error::invalid("need at least one gamma"))?
        .clone();
    let one = T::one();
    let prod = gammas.iter().fold(T::one(), |acc, g| acc * g.clone());
    let prod_minus = gammas
        .iter()
        .fold(T::one(), |acc, g| acc * (g.clone() - one.clone()));
    let denom = prod - prod_minus.clone();
    if denom.is_negligible() {
        return Err(Error::Internal("alpha_N denominator vanished".into()));
    }
    Ok(one - (last - T::one()) * prod_minus / denom)
}

/// Exact `γ_1..γ_N` (index `m` holds `B_m`, index 0 is zero) by direct summation.
pub fn gamma_table_exact<T: LpScalar>(c: &T, sigma: &T, horizon: usize) -> Vec<T> {
    let mut table = Vec::with_capacity(horizon + 1);
    let mut sum = T::zero();
    let mut power = T::one();
    table.push(T::zero());
    for _ in 0..horizon {
        sum = sum + power.clone();
        power = power * sigma.clone();
        table.push(c.clone() * sum.clone());
    }
    table
}

/// `1 - (Cσ)²`, the horizon-2 decrease rate of the instantaneous feedback.
pub fn example2_alpha<T: Real>(nu: T) -> Result<T> {
    let p = controllability_from_nu(nu)?;
    let cs = p.c * p.sigma;
    Ok(T::one() - cs * cs)
}

pub(crate) fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 2 {
        return Err(Error::invalid(format!(
            "horizon must be at least 2, got {horizon}"
        )));
    }
    Ok(())
}

/// `α_N` for one horizon, from the closed form and from the LP, with its γ-sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult<T> {
    pub horizon: usize,
    pub gammas: Vec<T>,
    pub alpha_closed_form: T,
    pub alpha_lp: T,
    /// The bound is usable: `α_N > 0`.
    pub feasible: bool,
}

impl<T: Real + LpScalar> BoundResult<T> {
    pub fn compute(p: &ControllabilityParams<T>, horizon: usize) -> Result<Self> {
        let gammas = gamma_sequence(p, horizon)?;
        let alpha_closed_form = alpha_n(p, horizon)?;
        let alpha_lp = crate::lp::alpha_via_lp(p, horizon)?;
        Ok(Self {
            horizon,
            gammas,
            alpha_closed_form,
            alpha_lp,
            feasible: alpha_closed_form > T::zero(),
        })
    }

    /// CSV row `nu,N,C,sigma,alpha_closed,alpha_lp,feasible` (see [`BOUND_CSV_HEADER`]).
    pub fn csv_row(&self, nu: T, p: &ControllabilityParams<T>) -> String {
        use crate::scalar::fmt17;
        format!(
            "{},{},{},{},{},{},{}",
            fmt17(nu.as_f64()),
            self.horizon,
            fmt17(p.c().as_f64()),
            fmt17(p.sigma().as_f64()),
            fmt17(self.alpha_closed_form.as_f64()),
            fmt17(self.alpha_lp.as_f64()),
            self.feasible
        )
    }
}

pub const BOUND_CSV_HEADER: &str = "nu,N,C,sigma,alpha_closed,alpha_lp,feasible";

/// One checked inequality: `holds` iff `slack ≥ -tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// Tail bounds `Σ_{n=k}^{N-1} λ_n ≤ γ_{N-k}·λ_k`, `k = 0..N-2`.
    pub tail_bounds: Vec<InequalityCheck>,
    /// Value bounds `ν̃ ≤ Σ_{n=0}^{j-1} λ_{n+1} + γ_{N-j}·λ_{j+1}`, `j = 0..N-2`.
    pub value_bounds: Vec<InequalityCheck>,
    /// Indices `j` of the value bounds that reference `λ` past the end of the sequence.
    pub skipped_value_indices: Vec<usize>,
    /// Decrease `Σ λ_n - ν̃ ≥ λ_0·α`.
    pub decrease: InequalityCheck,
    pub tolerance: f64,
}

impl InequalityReport {
    pub fn all_hold(&self) -> bool {
        self.tail_bounds
            .iter()
            .chain(&self.value_bounds)
            .all(|c| c.holds)
            && self.decrease.holds
    }

    pub fn min_slack(&self) -> f64 {
        self.tail_bounds
            .iter()
            .chain(&self.value_bounds)
            .chain(std::iter::once(&self.decrease))
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks the controllability inequalities on `λ_0..λ_{N-1}` and `ν̃`, and the
/// decrease condition for `alpha`. Slack below `-1e-9·max(1, Σλ)` is a violation.
pub fn verify_inequalities<T: Real>(
    lambdas: &[T],
    nu_tilde: T,
    p: &ControllabilityParams<T>,
    alpha: T,
) -> Result<InequalityReport> {
    let n = lambdas.len();
    check_horizon(n)?;
    let lam: Vec<f64> = lambdas.iter().map(|x| x.as_f64()).collect();
    let nu_tilde = nu_tilde.as_f64();
    let total: f64 = lam.iter().sum();
    let tolerance = 1e-9 * total.abs().max(1.0);
    let check = |index, lhs: f64, rhs: f64| {
        let slack = rhs - lhs;
        InequalityCheck {
            index,
            lhs,
            rhs,
            slack,
            holds: slack >= -tolerance,
        }
    };
    let gamma = |m: usize| p.gamma(m).as_f64();

    let tail_bounds = (0..n - 1)
        .map(|k| check(k, lam[k..].iter().sum(), gamma(n - k) * lam[k]))
        .collect();
    let value_bounds = (0..n - 1)
        .map(|j| {
            let prefix: f64 = lam[1..=j].iter().sum();
            check(j, nu_tilde, prefix + gamma(n - j) * lam[j + 1])
        })
        .collect();
    let decrease = check(0, lam[0] * alpha.as_f64(), total - nu_tilde);
    Ok(InequalityReport {
        tail_bounds,
        value_bounds,
        skipped_value_indices: vec![n - 1, n],
        decrease,
        tolerance,
    })
}
