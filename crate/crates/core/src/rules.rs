//! Division rules with one interface: competitive, egalitarian and equal split.
//!
//! Rules are set-valued. The competitive rule on a negative problem returns
//! every competitive profile it found and marks the canonical selection.

use serde::{Deserialize, Serialize};

use crate::classify::{classify, Kind};
use crate::enumerate::{enumerate, select_index, Limits, DEDUP_TOL};
use crate::error::{Error, Result};
use crate::lp::{Relation, Sense};
use crate::model::{
    check_feasible, partition_agents, utility_profile, Allocation, Division, Problem, UtilityProfile, FEAS_TOL,
};
use crate::null::solve_null;
use crate::positive::{solve_positive_with, PositiveOptions};
use crate::program::AllocationProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Competitive,
    Egalitarian,
    EqualSplit,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Competitive, Rule::Egalitarian, Rule::EqualSplit];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Competitive => "competitive",
            Rule::Egalitarian => "egalitarian",
            Rule::EqualSplit => "equal-split",
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "competitive" => Ok(Rule::Competitive),
            "egalitarian" => Ok(Rule::Egalitarian),
            "equal-split" | "equal_split" => Ok(Rule::EqualSplit),
            other => Err(Error::Parse(format!("unknown rule {other:?}"))),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleOutput {
    pub rule: Rule,
    pub kind: Kind,
    pub profiles: Vec<UtilityProfile>,
    pub allocations: Vec<Allocation>,
    /// Supporting prices, aligned with `profiles`; competitive rule only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divisions: Option<Vec<Division>>,
    pub selected: usize,
    /// False when the negative-problem search stopped at a limit.
    pub exhaustive: bool,
}

impl RuleOutput {
    fn single(
        rule: Rule,
        kind: Kind,
        problem: &Problem,
        allocation: Allocation,
        division: Option<Division>,
    ) -> Result<Self> {
        let profile = utility_profile(problem, &allocation)?;
        Ok(Self {
            rule,
            kind,
            profiles: vec![profile],
            allocations: vec![allocation],
            divisions: division.map(|d| vec![d]),
            selected: 0,
            exhaustive: true,
        })
    }

    pub fn selected_profile(&self) -> &UtilityProfile {
        &self.profiles[self.selected]
    }

    pub fn selected_allocation(&self) -> &Allocation {
        &self.allocations[self.selected]
    }

    /// Pareto-indifferent membership: a feasible allocation is in the output
    /// when its profile matches one of the output profiles.
    pub fn contains(&self, problem: &Problem, allocation: &Allocation) -> bool {
        if !check_feasible(problem, allocation, FEAS_TOL) {
            return false;
        }
        let Ok(profile) = utility_profile(problem, allocation) else { return false };
        self.profiles.iter().any(|p| same_profile(p, &profile))
    }
}

pub(crate) fn same_profile(a: &UtilityProfile, b: &UtilityProfile) -> bool {
    a.len() == b.len()
        && a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= DEDUP_TOL * 1f64.max(x.abs()).max(y.abs()))
}

pub fn apply_rule(rule: Rule, problem: &Problem, limits: &Limits) -> Result<RuleOutput> {
    match rule {
        Rule::Competitive => competitive_rule(problem, limits),
        Rule::Egalitarian => egalitarian_rule(problem),
        Rule::EqualSplit => equal_split_rule(problem),
    }
}

pub fn competitive_rule(problem: &Problem, limits: &Limits) -> Result<RuleOutput> {
    let kind = classify(problem)?.kind;
    match kind {
        Kind::Positive => {
            let options = PositiveOptions { cancel: limits.cancel.clone(), ..PositiveOptions::default() };
            let division = solve_positive_with(problem, &options)?.division;
            RuleOutput::single(Rule::Competitive, kind, problem, division.allocation.clone(), Some(division))
        }
        Kind::Null => {
            let division = solve_null(problem)?.division;
            RuleOutput::single(Rule::Competitive, kind, problem, division.allocation.clone(), Some(division))
        }
        Kind::Negative => {
            let result = enumerate(problem, limits)?;
            let selected = select_index(&result.profiles).ok_or_else(|| result.nothing_found())?;
            Ok(RuleOutput {
                rule: Rule::Competitive,
                kind,
                allocations: result.divisions.iter().map(|d| d.allocation.clone()).collect(),
                profiles: result.profiles,
                divisions: Some(result.divisions),
                selected,
                exhaustive: result.exhaustive,
            })
        }
    }
}

pub fn equal_split_rule(problem: &Problem) -> Result<RuleOutput> {
    let kind = classify(problem)?.kind;
    RuleOutput::single(Rule::EqualSplit, kind, problem, problem.equal_split(), None)
}

/// Efficient profile on the ray through each agent's best (positive
/// problems) or worst (negative problems) feasible utility. The ray scale is
/// the optimum of one LP; a second LP at that scale removes any slack so the
/// result is efficient. Null problems get the zero profile.
pub fn egalitarian_rule(problem: &Problem) -> Result<RuleOutput> {
    let kind = classify(problem)?.kind;
    let n = problem.n();
    let agents = partition_agents(problem);
    let allocation = match kind {
        Kind::Null => solve_null(problem)?.division.allocation,
        Kind::Positive => {
            let pinned: Vec<bool> = (0..n).map(|i| !agents.is_attracted(i)).collect();
            let anchor: Vec<f64> = agents
                .n_plus
                .iter()
                .map(|&i| extreme_utility(problem, &pinned, i, Sense::Maximize))
                .collect::<Result<_>>()?;
            ray_point(problem, &pinned, &agents.n_plus, &anchor, Sense::Maximize)?
        }
        Kind::Negative => {
            // Every agent is on the ray, including repulsed ones.
            let pinned = vec![false; n];
            let everyone: Vec<usize> = (0..n).collect();
            let anchor: Vec<f64> = everyone
                .iter()
                .map(|&i| extreme_utility(problem, &pinned, i, Sense::Minimize))
                .collect::<Result<_>>()?;
            ray_point(problem, &pinned, &everyone, &anchor, Sense::Minimize)?
        }
    };
    RuleOutput::single(Rule::Egalitarian, kind, problem, allocation, None)
}

fn extreme_utility(problem: &Problem, pinned: &[bool], i: usize, sense: Sense) -> Result<f64> {
    let mut program = AllocationProgram::new(problem, 0, pinned);
    let mut objective = vec![0.0; program.num_vars()];
    for (v, c) in program.utility(problem, i, 1.0) {
        objective[v] = c;
    }
    program.lp.set_objective(sense, objective);
    Ok(program.lp.solve()?.optimal()?.1)
}

/// `U_i >= t * anchor_i` over `agents`, optimizing `t` in `sense`, then
/// maximizing the total normalized utility at that `t`.
fn ray_point(problem: &Problem, pinned: &[bool], agents: &[usize], anchor: &[f64], sense: Sense) -> Result<Allocation> {
    let mut program = AllocationProgram::new(problem, 1, pinned);
    let t = program.extra(0);
    program.lp.free(t);
    for (k, &i) in agents.iter().enumerate() {
        let scale = anchor[k].abs().max(1e-300);
        let mut terms = program.utility(problem, i, 1.0 / scale);
        terms.push((t, -anchor[k] / scale));
        program.lp.constrain_sparse(&terms, Relation::Ge, 0.0);
    }
    let mut objective = vec![0.0; program.num_vars()];
    objective[t] = 1.0;
    program.lp.set_objective(sense, objective);
    let (_, t_star) = program.lp.solve()?.optimal()?;
    let t_star = if sense == Sense::Maximize { t_star * (1.0 - 1e-12) } else { t_star * (1.0 + 1e-12) };
    program.lp.bounds(t, Some(t_star), Some(t_star));
    let mut objective = vec![0.0; program.num_vars()];
    for (k, &i) in agents.iter().enumerate() {
        for (v, c) in program.utility(problem, i, 1.0 / anchor[k].abs().max(1e-300)) {
            objective[v] += c;
        }
    }
    program.lp.set_objective(Sense::Maximize, objective);
    let (x, _) = program.lp.solve()?.optimal()?;
    Ok(program.allocation(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lambda(l: f64) -> Problem {
        Problem::unit(vec![vec![-1.0, -3.0, l], vec![-2.0, -1.0, l]]).unwrap()
    }

    fn close(p: &UtilityProfile, want: &[f64], eps: f64) {
        assert_eq!(p.len(), want.len());
        for (x, y) in p.values.iter().zip(want) {
            assert_abs_diff_eq!(*x, *y, epsilon = eps);
        }
    }

    #[test]
    fn competitive_dispatch() {
        let out = competitive_rule(&lambda(3.0), &Limits::default()).unwrap();
        assert_eq!((out.kind, out.profiles.len()), (Kind::Positive, 1));
        assert!(out.profiles[0].values.iter().all(|u| *u > 0.0));

        let out = competitive_rule(&lambda(-1.0), &Limits::default()).unwrap();
        assert_eq!(out.profiles.len(), 4);
        close(out.selected_profile(), &[-1.5, -1.5], 1e-9);

        let out = competitive_rule(&lambda(2.0), &Limits::default()).unwrap();
        close(&out.profiles[0], &[0.0, 0.0], 1e-9);
    }

    #[test]
    fn egalitarian_negative() {
        let out = egalitarian_rule(&lambda(-1.0)).unwrap();
        close(&out.profiles[0], &[-5.0 / 3.0, -4.0 / 3.0], 1e-8);
    }

    #[test]
    fn egalitarian_positive() {
        let out = egalitarian_rule(&lambda(4.0)).unwrap();
        close(&out.profiles[0], &[1.0, 1.0], 1e-8);
    }

    #[test]
    fn egalitarian_twins_are_equal() {
        let p = Problem::from_rows(vec![vec![3.0, -1.0, 2.0], vec![3.0, -1.0, 2.0]], vec![1.0, 2.0, 0.5]).unwrap();
        let out = egalitarian_rule(&p).unwrap();
        assert_abs_diff_eq!(out.profiles[0].values[0], out.profiles[0].values[1], epsilon = 1e-8);
    }

    #[test]
    fn equal_split() {
        close(&equal_split_rule(&lambda(-1.0)).unwrap().profiles[0], &[-2.5, -2.0], 1e-12);
        let goods = Problem::unit(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(equal_split_rule(&goods).unwrap().profiles[0].values[0], 1.5);
    }

    #[test]
    fn membership_is_by_profile() {
        let p = lambda(-1.0);
        let out = competitive_rule(&p, &Limits::default()).unwrap();
        assert!(out.contains(&p, out.selected_allocation()));
        assert!(!out.contains(&p, &p.equal_split()));
    }

    #[test]
    fn rule_names_round_trip() {
        for rule in Rule::ALL {
            assert_eq!(rule.name().parse::<Rule>().unwrap(), rule);
            assert_eq!(serde_json::to_string(&rule).unwrap(), format!("\"{}\"", rule.name()));
        }
    }
}
