//! Dense two-phase simplex with Bland's rule, and the LP form of the performance bound.
//!
//! Works over any [`LpScalar`]; with `BigRational` every pivot is exact.

use crate::bounds::{check_horizon, gamma_table_exact, ControllabilityParams};
use crate::error::{Error, Result};
use crate::scalar::{LpScalar, Real};

pub const MAX_VARIABLES: usize = 500;
pub const MAX_CONSTRAINTS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    pub coefficients: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `minimize c·x` subject to the constraints and `x ≥ lower_bounds`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub lower_bounds: Vec<T>,
}

impl<T: LpScalar> LpProblem<T> {
    /// Problem with all lower bounds zero.
    pub fn new(objective: Vec<T>) -> Self {
        let lower_bounds = vec![T::zero(); objective.len()];
        Self {
            objective,
            constraints: Vec::new(),
            lower_bounds,
        }
    }

    pub fn constrain(&mut self, coefficients: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::invalid("LP needs at least one variable"));
        }
        if n > MAX_VARIABLES || self.constraints.len() > MAX_CONSTRAINTS {
            return Err(Error::invalid(format!(
                "LP of {n} variables and {} constraints exceeds the dense solver limits",
                self.constraints.len()
            )));
        }
        if self.lower_bounds.len() != n {
            return Err(Error::invalid(
                "lower bound vector length differs from objective",
            ));
        }
        if let Some(i) = self
            .constraints
            .iter()
            .position(|c| c.coefficients.len() != n)
        {
            return Err(Error::invalid(format!(
                "constraint {i} has the wrong number of coefficients"
            )));
        }
        Ok(())
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        let mut bump = |v: T| {
            if v > worst {
                worst = v;
            }
        };
        for (xi, lo) in x.iter().zip(&self.lower_bounds) {
            bump(lo.clone() - xi.clone());
        }
        for c in &self.constraints {
            let lhs = dot(&c.coefficients, x);
            match c.relation {
                Relation::Le => bump(lhs - c.rhs.clone()),
                Relation::Ge => bump(c.rhs.clone() - lhs),
                Relation::Eq => bump((lhs - c.rhs.clone()).abs()),
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { value: T, point: Vec<T> },
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn optimal_value(&self) -> Option<&T> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

fn dot<T: LpScalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    /// Columns that may never enter (artificials during phase two).
    blocked: Vec<bool>,
}

enum Pivoting {
    Optimal,
    Unbounded,
}

impl<T: LpScalar> Tableau<T> {
    fn reduced_costs(&self, costs: &[T]) -> Vec<T> {
        let mut d = costs.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if costs[b].is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(row) {
                *dj = dj.clone() - costs[b].clone() * a.clone();
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for a in self.rows[r].iter_mut() {
            *a = a.clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][col].clone();
            if factor.is_zero() {
                continue;
            }
            for (a, pa) in self.rows[i].iter_mut().zip(&pivot_row) {
                *a = a.clone() - factor.clone() * pa.clone();
            }
            self.rhs[i] = self.rhs[i].clone() - factor * pivot_rhs.clone();
            // exact zero in the pivot column keeps float tableaux canonical
            self.rows[i][col] = T::zero();
        }
        self.basis[r] = col;
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test by lowest basic index.
    fn run(&mut self, costs: &[T]) -> Pivoting {
        let tol = T::pivot_tolerance();
        loop {
            let d = self.reduced_costs(costs);
            let entering = (0..d.len()).find(|&j| !self.blocked[j] && d[j] < -tol.clone());
            let Some(col) = entering else {
                return Pivoting::Optimal;
            };
            let mut leaving: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] <= tol {
                    continue;
                }
                let ratio = self.rhs[i].clone() / row[col].clone();
                let better = match &leaving {
                    None => true,
                    Some((best_i, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*best_i])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            match leaving {
                Some((r, _)) => self.pivot(r, col),
                None => return Pivoting::Unbounded,
            }
        }
    }

    fn objective(&self, costs: &[T]) -> T {
        self.basis
            .iter()
            .zip(&self.rhs)
            .fold(T::zero(), |acc, (&b, v)| acc + costs[b].clone() * v.clone())
    }
}

/// Solves `p` to an optimal vertex, or reports why there is none.
///
/// The returned point is re-checked against every constraint.
pub fn solve_lp<T: LpScalar>(p: &LpProblem<T>) -> Result<LpOutcome<T>> {
    p.validate()?;
    let n = p.num_variables();

    // shift x = lower + x', then normalise every row to a nonnegative rhs
    let mut rows = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let mut coeffs = c.coefficients.clone();
        let mut rhs = c.rhs.clone() - dot(&c.coefficients, &p.lower_bounds);
        let mut relation = c.relation;
        if rhs < T::zero() {
            coeffs.iter_mut().for_each(|a| *a = -a.clone());
            rhs = -rhs;
            relation = match relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push((coeffs, relation, rhs));
    }

    let n_slack = rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let n_art = rows.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let width = n + n_slack + n_art;
    let art_start = n + n_slack;

    let mut tableau = Tableau {
        rows: Vec::with_capacity(rows.len()),
        rhs: Vec::with_capacity(rows.len()),
        basis: Vec::with_capacity(rows.len()),
        blocked: vec![false; width],
    };
    let (mut next_slack, mut next_art) = (n, art_start);
    for (coeffs, relation, rhs) in rows {
        let mut row = coeffs;
        row.resize(width, T::zero());
        let basic = match relation {
            Relation::Le => {
                row[next_slack] = T::one();
                next_slack += 1;
                next_slack - 1
            }
            Relation::Ge => {
                row[next_slack] = -T::one();
                next_slack += 1;
                row[next_art] = T::one();
                next_art += 1;
                next_art - 1
            }
            Relation::Eq => {
                row[next_art] = T::one();
                next_art += 1;
                next_art - 1
            }
        };
        tableau.rows.push(row);
        tableau.rhs.push(rhs);
        tableau.basis.push(basic);
    }

    if n_art > 0 {
        let mut phase_one = vec![T::zero(); width];
        phase_one[art_start..]
            .iter_mut()
            .for_each(|c| *c = T::one());
        tableau.run(&phase_one);
        if tableau.objective(&phase_one) > T::feasibility_tolerance() {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining (zero-valued) artificials out of the basis
        let mut r = 0;
        while r < tableau.rows.len() {
            if tableau.basis[r] >= art_start {
                let col = (0..art_start).find(|&j| !tableau.rows[r][j].is_negligible());
                match col {
                    Some(j) => tableau.pivot(r, j),
                    None => {
                        // redundant row
                        tableau.rows.remove(r);
                        tableau.rhs.remove(r);
                        tableau.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        tableau.blocked[art_start..]
            .iter_mut()
            .for_each(|b| *b = true);
    }

    let mut costs = p.objective.clone();
    costs.resize(width, T::zero());
    if let Pivoting::Unbounded = tableau.run(&costs) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut point = p.lower_bounds.clone();
    for (&b, v) in tableau.basis.iter().zip(&tableau.rhs) {
        if b < n {
            point[b] = point[b].clone() + v.clone();
        }
    }
    let violation = p.max_violation(&point);
    if violation > T::feasibility_tolerance() {
        return Err(Error::Solver(format!(
            "returned point violates constraints by {violation:?}"
        )));
    }
    let value = dot(&p.objective, &point);
    Ok(LpOutcome::Optimal { value, point })
}

/// The bound LP for horizon `N` from a table `γ_0..γ_N` (`γ_m = C Σ_{n<m} σⁿ`).
///
/// Variables `λ_0..λ_{N-1}, ν̃ ≥ 0` with `λ_0 = 1`; minimise `Σλ_n - ν̃` subject to
/// `Σ_{n=k}^{N-1} λ_n ≤ γ_{N-k}·λ_k` (`k = 0..N-2`) and
/// `ν̃ ≤ Σ_{n=1}^{j} λ_n + γ_{N-j}·λ_{j+1}` (`j = 0..N-2`).
pub fn bound_lp<T: LpScalar>(gamma_table: &[T], horizon: usize) -> Result<LpProblem<T>> {
    check_horizon(horizon)?;
    if gamma_table.len() <= horizon {
        return Err(Error::invalid("gamma table shorter than the horizon"));
    }
    let width = horizon + 1;
    let nu_tilde = horizon;
    let mut objective = vec![T::one(); width];
    objective[nu_tilde] = -T::one();
    let mut lp = LpProblem::new(objective);

    let mut normalise = vec![T::zero(); width];
    normalise[0] = T::one();
    lp.constrain(normalise, Relation::Eq, T::one());

    for k in 0..horizon - 1 {
        let mut row = vec![T::zero(); width];
        row[k..horizon].iter_mut().for_each(|a| *a = T::one());
        row[k] = row[k].clone() - gamma_table[horizon - k].clone();
        lp.constrain(row, Relation::Le, T::zero());
    }
    for j in 0..horizon - 1 {
        let mut row = vec![T::zero(); width];
        row[nu_tilde] = T::one();
        row[1..=j].iter_mut().for_each(|a| *a = -T::one());
        row[j + 1] = row[j + 1].clone() - gamma_table[horizon - j].clone();
        lp.constrain(row, Relation::Le, T::zero());
    }
    Ok(lp)
}

fn solve_bound_lp<T: LpScalar>(gamma_table: &[T], horizon: usize) -> Result<T> {
    match solve_lp(&bound_lp(gamma_table, horizon)?)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible => Err(Error::Solver("bound LP infeasible".into())),
        LpOutcome::Unbounded => Err(Error::Solver("bound LP unbounded".into())),
    }
}

/// Tightest `α` in the decrease condition implied by the controllability inequalities.
pub fn alpha_via_lp<T: Real + LpScalar>(p: &ControllabilityParams<T>, horizon: usize) -> Result<T> {
    let table: Vec<T> = (0..=horizon).map(|m| p.gamma(m)).collect();
    solve_bound_lp(&table, horizon)
}

/// [`alpha_via_lp`] in exact arithmetic.
pub fn alpha_via_lp_exact<T: LpScalar>(c: &T, sigma: &T, horizon: usize) -> Result<T> {
    solve_bound_lp(&gamma_table_exact(c, sigma, horizon), horizon)
}
