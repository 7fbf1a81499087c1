//! Fairness audit of a single allocation: efficiency, no envy, fair share and
//! the weak core from equal split.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{Relation, Sense};
use crate::model::{check_feasible, utility_profile, Allocation, Problem, FEAS_TOL};
use crate::program::AllocationProgram;

/// Slack on envy and fair-share margins, relative to the agent's stakes.
pub const AUDIT_TOL: f64 = 1e-9;
/// A coalition blocks only if every member gains more than this (normalized).
pub const BLOCK_TOL: f64 = 1e-9;
/// Largest population for which coalitions are enumerated.
pub const WEAK_CORE_MAX_AGENTS: usize = 8;
/// Normalized Pareto gain below which an allocation counts as efficient.
const EFFICIENCY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvyWitness {
    pub envier: usize,
    pub envied: usize,
    /// `u_i . (z_i - z_j)`; negative means envy.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WeakCore {
    Holds,
    Blocked { coalition: Vec<usize> },
    Skipped { reason: String },
}

impl WeakCore {
    pub fn holds(&self) -> bool {
        matches!(self, WeakCore::Holds)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FairnessReport {
    pub envy_free: bool,
    /// Pair with the smallest envy margin (none with a single agent).
    pub worst_envy: Option<EnvyWitness>,
    pub fair_share: bool,
    /// Agent with the smallest `U_i - u_i . w / n`, and that margin.
    pub worst_fair_share: (usize, f64),
    pub weak_core: WeakCore,
    pub efficient: bool,
    /// Optimum of the Pareto-improvement LP on row-normalized utilities.
    pub pareto_gain: f64,
}

impl FairnessReport {
    /// Every check passed (a skipped weak-core check counts as passed).
    pub fn all_pass(&self) -> bool {
        self.envy_free && self.fair_share && self.efficient && !matches!(self.weak_core, WeakCore::Blocked { .. })
    }
}

fn row_scale(problem: &Problem, i: usize) -> f64 {
    let s = problem.utilities()[i].iter().fold(0.0f64, |acc, u| acc.max(u.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn stake(problem: &Problem, i: usize) -> f64 {
    let total: f64 = (0..problem.m()).map(|a| problem.u(i, a).abs() * problem.w(a)).sum();
    total.max(1.0)
}

pub fn audit_allocation(problem: &Problem, allocation: &Allocation) -> Result<FairnessReport> {
    let n = problem.n();
    if !check_feasible(problem, allocation, FEAS_TOL) {
        return Err(Error::InvalidProblem("allocation is not feasible".into()));
    }
    let profile = utility_profile(problem, allocation)?;
    let u = &profile.values;

    let mut worst_envy: Option<EnvyWitness> = None;
    let mut envy_free = true;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let margin = u[i] - problem.value_of(i, &allocation.shares[j]);
            envy_free &= margin >= -AUDIT_TOL * stake(problem, i);
            if worst_envy.as_ref().is_none_or(|w| margin < w.margin) {
                worst_envy = Some(EnvyWitness { envier: i, envied: j, margin });
            }
        }
    }

    let mut worst_fair_share = (0, f64::INFINITY);
    let mut fair_share = true;
    for i in 0..n {
        let share = problem.value_of(i, problem.endowment()) / n as f64;
        let margin = u[i] - share;
        fair_share &= margin >= -AUDIT_TOL * stake(problem, i);
        if margin < worst_fair_share.1 {
            worst_fair_share = (i, margin);
        }
    }

    let pareto_gain = pareto_gain(problem, u)?;
    let weak_core = if n > WEAK_CORE_MAX_AGENTS {
        WeakCore::Skipped { reason: format!("{n} agents exceed the coalition cap of {WEAK_CORE_MAX_AGENTS}") }
    } else {
        weak_core(problem, u)?
    };
    Ok(FairnessReport {
        envy_free,
        worst_envy,
        fair_share,
        worst_fair_share,
        weak_core,
        efficient: pareto_gain <= EFFICIENCY_TOL,
        pareto_gain,
    })
}

/// `max sum_i d_i` over feasible `z'` with `u_i . z'_i / s_i >= U_i / s_i + d_i`, `d >= 0`.
fn pareto_gain(problem: &Problem, profile: &[f64]) -> Result<f64> {
    let n = problem.n();
    let mut program = AllocationProgram::new(problem, n, &vec![false; n]);
    for (i, &u) in profile.iter().enumerate() {
        let s = row_scale(problem, i);
        let mut terms = program.utility(problem, i, 1.0 / s);
        terms.push((program.extra(i), -1.0));
        program.lp.constrain_sparse(&terms, Relation::Ge, u / s);
    }
    let mut objective = vec![0.0; program.num_vars()];
    for i in 0..n {
        objective[program.extra(i)] = 1.0;
    }
    program.lp.set_objective(Sense::Maximize, objective);
    // The current allocation is feasible, so the LP is; a numerical miss
    // on a tight start is reported as a failure rather than hidden.
    Ok(program.lp.solve()?.optimal()?.1)
}

/// A coalition `S` blocks when, sharing `|S|/n` of the manna, every member
/// can get strictly more than now.
fn weak_core(problem: &Problem, profile: &[f64]) -> Result<WeakCore> {
    let n = problem.n();
    let sub_endowment: Vec<f64> = problem.endowment().to_vec();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let fraction = members.len() as f64 / n as f64;
        let rows: Vec<Vec<f64>> = members.iter().map(|&i| problem.utilities()[i].clone()).collect();
        let endowment: Vec<f64> = sub_endowment.iter().map(|w| w * fraction).collect();
        let sub = Problem::from_rows(rows, endowment)?;
        let k = members.len();
        let mut program = AllocationProgram::new(&sub, 1, &vec![false; k]);
        let t = program.extra(0);
        program.lp.free(t);
        for (pos, &i) in members.iter().enumerate() {
            let s = row_scale(problem, i);
            let mut terms = program.utility(&sub, pos, 1.0 / s);
            terms.push((t, -1.0));
            program.lp.constrain_sparse(&terms, Relation::Ge, profile[i] / s);
        }
        let mut objective = vec![0.0; program.num_vars()];
        objective[t] = 1.0;
        program.lp.set_objective(Sense::Maximize, objective);
        let (_, gain) = program.lp.solve()?.optimal()?;
        if gain > BLOCK_TOL {
            return Ok(WeakCore::Blocked { coalition: members });
        }
    }
    Ok(WeakCore::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_example_with_a_satiated_third() {
        let p = Problem::unit(vec![vec![1.0], vec![1.0], vec![-1.0]]).unwrap();
        let z = Allocation::new(vec![vec![0.5], vec![0.5], vec![0.0]]);
        let r = audit_allocation(&p, &z).unwrap();
        assert!(r.envy_free && r.fair_share && r.efficient);
        assert_eq!(r.weak_core, WeakCore::Holds);
        assert_eq!(r.worst_fair_share.0, 0);
    }

    #[test]
    fn equal_split_is_envy_free_with_zero_fair_share_margin() {
        let p = Problem::from_rows(vec![vec![2.0, -1.0], vec![-3.0, 4.0], vec![1.0, 1.0]], vec![1.0, 2.0]).unwrap();
        let r = audit_allocation(&p, &p.equal_split()).unwrap();
        assert!(r.envy_free && r.fair_share);
        assert!(r.worst_fair_share.1.abs() < 1e-12);
        assert!(!r.efficient);
    }

    #[test]
    fn envy_and_blocking_are_reported() {
        let p = Problem::unit(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let z = Allocation::new(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let r = audit_allocation(&p, &z).unwrap();
        assert!(!r.envy_free && !r.fair_share && r.efficient);
        let w = r.worst_envy.unwrap();
        assert_eq!((w.envier, w.envied), (1, 0));
        assert_eq!(r.weak_core, WeakCore::Blocked { coalition: vec![1] });
    }

    #[test]
    fn inefficiency_is_caught() {
        let p = Problem::unit(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let z = Allocation::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let r = audit_allocation(&p, &z).unwrap();
        assert!(!r.efficient);
        assert!(r.pareto_gain > 0.5);
    }

    #[test]
    fn large_populations_skip_the_core() {
        let p = Problem::unit(vec![vec![-1.0]; 9]).unwrap();
        let r = audit_allocation(&p, &p.equal_split()).unwrap();
        assert!(matches!(r.weak_core, WeakCore::Skipped { .. }));
        assert!(r.all_pass());
    }

    #[test]
    fn infeasible_allocation_is_an_error() {
        let p = Problem::unit(vec![vec![1.0]]).unwrap();
        assert!(audit_allocation(&p, &Allocation::new(vec![vec![0.5]])).is_err());
    }
}
