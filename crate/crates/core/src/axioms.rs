//! Executable checks of the rule axioms (equal treatment, solidarity,
//! independence of lost bids, scale invariance, Pareto indifference) and the
//! resource-monotonicity demonstration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::enumerate::Limits;
use crate::error::{Error, Result};
use crate::kkt::{kkt_verify, KKT_TOL};
use crate::lp::{Relation, Sense};
use crate::model::{Allocation, Division, Problem, UtilityProfile};
use crate::program::AllocationProgram;
use crate::random::{random_problem, Family};
use crate::rules::{apply_rule, same_profile, Rule, RuleOutput};
use crate::scalar::{format_rational, rat, Rational};

/// Slack on utility comparisons, relative to the agent's stakes.
const AXIOM_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemData {
    pub utilities: Vec<Vec<f64>>,
    pub endowment: Vec<f64>,
}

impl From<&Problem> for ProblemData {
    fn from(p: &Problem) -> Self {
        Self { utilities: p.utilities().to_vec(), endowment: p.endowment().to_vec() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    /// Position of the problem in the audited list.
    pub index: usize,
    pub problem: ProblemData,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomOutcome {
    pub passed: bool,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl AxiomOutcome {
    fn new() -> Self {
        Self { passed: true, checks: 0, counterexample: None }
    }

    fn record(&mut self, ok: bool, index: usize, problem: &Problem, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.passed {
            self.passed = false;
            self.counterexample = Some(Counterexample { index, problem: problem.into(), detail: detail() });
        }
    }

    fn merge(&mut self, other: AxiomOutcome) {
        self.checks += other.checks;
        if self.passed && !other.passed {
            self.passed = false;
            self.counterexample = other.counterexample;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub rule: Rule,
    pub problems: usize,
    pub ete: AxiomOutcome,
    pub sol: AxiomOutcome,
    pub ilb: AxiomOutcome,
    pub scale_invariance: AxiomOutcome,
    pub pareto_indifference: AxiomOutcome,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes().iter().all(|(_, o)| o.passed)
    }

    pub fn outcomes(&self) -> [(&'static str, &AxiomOutcome); 5] {
        [
            ("ete", &self.ete),
            ("sol", &self.sol),
            ("ilb", &self.ilb),
            ("scale_invariance", &self.scale_invariance),
            ("pareto_indifference", &self.pareto_indifference),
        ]
    }
}

fn stake(problem: &Problem, i: usize) -> f64 {
    let total: f64 = (0..problem.m()).map(|a| problem.u(i, a).abs() * problem.w(a)).sum();
    total.max(1.0)
}

fn near(problem: &Problem, i: usize, x: f64, y: f64) -> bool {
    (x - y).abs() <= AXIOM_TOL * stake(problem, i)
}

/// Runs every axiom on every problem. `trials` bounds the random
/// perturbations per problem and axiom; each problem gets its own seed
/// derived from `seed`, so the report does not depend on thread count.
pub fn check_rule_axioms(rule: Rule, problems: &[Problem], trials: usize, seed: u64) -> Result<AxiomReport> {
    let parts: Vec<[AxiomOutcome; 5]> = problems
        .par_iter()
        .enumerate()
        .map(|(index, problem)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            check_one(rule, index, problem, trials.max(1), &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut report = AxiomReport {
        rule,
        problems: problems.len(),
        ete: AxiomOutcome::new(),
        sol: AxiomOutcome::new(),
        ilb: AxiomOutcome::new(),
        scale_invariance: AxiomOutcome::new(),
        pareto_indifference: AxiomOutcome::new(),
    };
    for [ete, sol, ilb, scale, pi] in parts {
        report.ete.merge(ete);
        report.sol.merge(sol);
        report.ilb.merge(ilb);
        report.scale_invariance.merge(scale);
        report.pareto_indifference.merge(pi);
    }
    Ok(report)
}

fn check_one(
    rule: Rule,
    index: usize,
    problem: &Problem,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<[AxiomOutcome; 5]> {
    let limits = Limits { parallel: false, ..Limits::default() };
    let output = apply_rule(rule, problem, &limits)?;
    let (n, m) = (problem.n(), problem.m());
    let mut ete = AxiomOutcome::new();
    let mut sol = AxiomOutcome::new();
    let mut ilb = AxiomOutcome::new();
    let mut scale = AxiomOutcome::new();
    let mut pi = AxiomOutcome::new();

    // Solidarity: nobody gains while someone loses.
    for profile in &output.profiles {
        let up = (0..n).any(|i| profile.values[i] > AXIOM_TOL * stake(problem, i));
        let down = (0..n).any(|i| profile.values[i] < -AXIOM_TOL * stake(problem, i));
        sol.record(!(up && down), index, problem, || format!("mixed-sign profile {:?}", profile.values));
    }

    // Equal treatment: a duplicated agent ends up with its twin's utility.
    for _ in 0..trials.min(2) {
        let twin = rng.gen_range(0..n);
        let mut rows = problem.utilities().to_vec();
        rows.push(rows[twin].clone());
        let doubled = Problem::from_rows(rows, problem.endowment().to_vec())?;
        let out = apply_rule(rule, &doubled, &limits)?;
        for profile in &out.profiles {
            let ok = near(problem, twin, profile.values[twin], profile.values[n]);
            ete.record(ok, index, problem, || format!("agent {twin} and its copy get {:?}", profile.values));
        }
    }

    // Independence of lost bids: lowering a bid on an item the agent does not
    // consume keeps the allocation in the rule's output.
    for (k, allocation) in output.allocations.iter().enumerate() {
        let lost: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..m).map(move |a| (i, a)))
            .filter(|&(i, a)| allocation.shares[i][a] <= KKT_TOL * problem.w(a).max(1.0))
            .collect();
        for _ in 0..trials.min(lost.len()) {
            let (i, a) = lost[rng.gen_range(0..lost.len())];
            let u = *problem.u(i, a);
            let drop = rng.gen_range(0.1..=2.0) * u.abs() + 0.1;
            let mut rows = problem.utilities().to_vec();
            rows[i][a] = u - drop;
            let lowered = problem.with_utilities(rows)?;
            let ok = still_selected(rule, &output, k, &lowered, allocation, &limits)?;
            ilb.record(ok, index, problem, || {
                format!("lowering u[{i}][{a}] from {u} to {} drops allocation {k}", u - drop)
            });
        }
    }

    // Scale invariance: rescaling rows rescales the profiles and keeps the allocations.
    for _ in 0..trials.min(2) {
        let factors: Vec<f64> = (0..n).map(|_| rng.gen_range(0.25..=4.0)).collect();
        let rows: Vec<Vec<f64>> =
            problem.utilities().iter().zip(&factors).map(|(r, f)| r.iter().map(|u| u * f).collect()).collect();
        let scaled = problem.with_utilities(rows)?;
        let out = apply_rule(rule, &scaled, &limits)?;
        let expected: Vec<UtilityProfile> = output
            .profiles
            .iter()
            .map(|p| UtilityProfile { values: p.values.iter().zip(&factors).map(|(u, f)| u * f).collect() })
            .collect();
        let same_sets = expected.len() == out.profiles.len()
            && expected.iter().all(|p| out.profiles.iter().any(|q| same_profile(p, q)));
        let kept = output.allocations.iter().all(|z| out.contains(&scaled, z));
        scale.record(same_sets && kept, index, problem, || {
            format!("factors {factors:?}: {} profiles before, {} after", expected.len(), out.profiles.len())
        });
    }

    // Pareto indifference: another allocation with the same profile is also chosen.
    for (k, allocation) in output.allocations.iter().enumerate().take(trials) {
        let Some(other) = indifferent_allocation(problem, &output.profiles[k], rng)? else { continue };
        let ok = match (&output.divisions, rule) {
            (Some(divisions), Rule::Competitive) => {
                let d = Division { allocation: other.clone(), ..divisions[k].clone() };
                kkt_verify(problem, &d, KKT_TOL).passed
            }
            _ => output.contains(problem, &other),
        };
        pi.record(ok, index, problem, || {
            format!("allocation {:?} matches profile {k} of {:?} but is not chosen", other.shares, allocation.shares)
        });
    }
    Ok([ete, sol, ilb, scale, pi])
}

/// Membership after a bid change. For the competitive rule this is the
/// certificate with the original prices; other rules are rerun.
fn still_selected(
    rule: Rule,
    output: &RuleOutput,
    k: usize,
    lowered: &Problem,
    allocation: &Allocation,
    limits: &Limits,
) -> Result<bool> {
    match (&output.divisions, rule) {
        (Some(divisions), Rule::Competitive) => Ok(kkt_verify(lowered, &divisions[k], KKT_TOL).passed),
        _ => Ok(apply_rule(rule, lowered, limits)?.contains(lowered, allocation)),
    }
}

/// A feasible allocation with the given profile, pushed toward a random vertex.
fn indifferent_allocation(
    problem: &Problem,
    profile: &UtilityProfile,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Allocation>> {
    let n = problem.n();
    let mut program = AllocationProgram::new(problem, 0, &vec![false; n]);
    for i in 0..n {
        let s = stake(problem, i);
        program.lp.constrain_sparse(&program.utility(problem, i, 1.0 / s), Relation::Eq, profile.values[i] / s);
    }
    let objective: Vec<f64> = (0..program.num_vars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    program.lp.set_objective(Sense::Maximize, objective);
    let solution = program.lp.solve()?;
    Ok(solution.is_optimal().then(|| program.allocation(&solution.point)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Improvement {
    /// More of a unanimous good.
    MoreGood,
    /// Less of a unanimous bad.
    LessBad,
}

/// Analytic bounds for the two-agent two-bad pair used in the demo.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalBounds {
    /// The agent whose base utility is at least -1.
    pub agent: usize,
    /// Fair share of the other agent after the change, `u_2 . w' / 2`.
    pub other_fair_share: String,
    /// Upper bound on `agent`'s utility after the change under EFF and GFS.
    pub utility_bound: String,
    pub utility_bound_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RmReport {
    pub rule: Rule,
    /// Changed item and the kind of change; none when nothing changed.
    pub item: Option<usize>,
    pub improvement: Option<Improvement>,
    pub base_profile: UtilityProfile,
    pub improved_profile: UtilityProfile,
    pub deltas: Vec<f64>,
    pub worse_off: Vec<usize>,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<CanonicalBounds>,
}

/// Two agents, two bads: `u_1 = (-1, -4)`, `u_2 = (-4, -1)`, and the second
/// problem has only a ninth of the first bad.
pub fn canonical_rm_pair() -> (Problem, Problem) {
    let rows = vec![vec![-1.0, -4.0], vec![-4.0, -1.0]];
    let base = Problem::unit(rows.clone()).expect("valid");
    let improved = Problem::from_rows(rows, vec![1.0 / 9.0, 1.0]).expect("valid");
    (base, improved)
}

fn improvement(base: &Problem, improved: &Problem) -> Result<Option<(usize, Improvement)>> {
    if base.utilities() != improved.utilities() {
        return Err(Error::InvalidProblem("an improvement keeps the utilities".into()));
    }
    let changed: Vec<usize> = (0..base.m()).filter(|&a| base.w(a) != improved.w(a)).collect();
    match changed.as_slice() {
        [] => Ok(None),
        [a] => {
            let a = *a;
            let column: Vec<f64> = (0..base.n()).map(|i| *base.u(i, a)).collect();
            if column.iter().all(|u| *u > 0.0) && improved.w(a) > base.w(a) {
                Ok(Some((a, Improvement::MoreGood)))
            } else if column.iter().all(|u| *u < 0.0) && improved.w(a) < base.w(a) {
                Ok(Some((a, Improvement::LessBad)))
            } else {
                Err(Error::InvalidProblem(format!("item {a} is not a unanimous good or bad moving the right way")))
            }
        }
        _ => Err(Error::InvalidProblem("an improvement changes a single item".into())),
    }
}

/// Runs `rule` on both problems, compares the selected profiles, and for the
/// canonical pair adds the analytic bounds any efficient rule guaranteeing
/// fair shares must respect.
pub fn rm_demo(base: &Problem, improved: &Problem, rule: Rule) -> Result<RmReport> {
    let change = improvement(base, improved)?;
    let limits = Limits::default();
    let before = apply_rule(rule, base, &limits)?.selected_profile().clone();
    let after = apply_rule(rule, improved, &limits)?.selected_profile().clone();
    let deltas: Vec<f64> = after.values.iter().zip(&before.values).map(|(a, b)| a - b).collect();
    let worse_off: Vec<usize> = (0..base.n()).filter(|&i| deltas[i] < -AXIOM_TOL * stake(base, i)).collect();
    let (canon_base, canon_improved) = canonical_rm_pair();
    let bounds = (*base == canon_base && *improved == canon_improved).then(canonical_bounds);
    Ok(RmReport {
        rule,
        item: change.map(|c| c.0),
        improvement: change.map(|c| c.1),
        monotone: worse_off.is_empty(),
        base_profile: before,
        improved_profile: after,
        deltas,
        worse_off,
        bounds,
    })
}

/// Resource monotonicity on random all-goods problems: one good grows and
/// nobody may lose. Each problem is a separate check.
pub fn rm_goods_spot_check(rule: Rule, count: usize, seed: u64) -> Result<AxiomOutcome> {
    let outcomes: Vec<Result<AxiomOutcome>> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (n, m) = (rng.gen_range(2..=4), rng.gen_range(1..=4));
            let base = random_problem(&mut rng, n, m, Family::Goods);
            let mut w = base.endowment().to_vec();
            let a = rng.gen_range(0..m);
            w[a] *= rng.gen_range(1.1..3.0);
            let improved = base.with_endowment(w)?;
            let report = rm_demo(&base, &improved, rule)?;
            let mut outcome = AxiomOutcome::new();
            outcome.record(report.monotone, idx, &base, || {
                format!("growing item {a} hurts agents {:?} (deltas {:?})", report.worse_off, report.deltas)
            });
            Ok(outcome)
        })
        .collect();
    let mut total = AxiomOutcome::new();
    for outcome in outcomes {
        total.merge(outcome?);
    }
    Ok(total)
}

/// Agent 2 must keep its fair share `u_2 . w' / 2`, so it absorbs at most
/// `|u_2 . w'| / 2` units of its cheapest bad; agent 1 eats the rest of it.
fn canonical_bounds() -> CanonicalBounds {
    let u1 = [rat(-1, 1), rat(-4, 1)];
    let u2 = [rat(-4, 1), rat(-1, 1)];
    let w = [rat(1, 9), rat(1, 1)];
    let share: Rational = (u2[0].clone() * w[0].clone() + u2[1].clone() * w[1].clone()) / rat(2, 1);
    let absorbed = share.clone() / u2[1].clone();
    let bound = u1[1].clone() * (w[1].clone() - absorbed);
    CanonicalBounds {
        agent: 0,
        other_fair_share: format_rational(&share),
        utility_bound_value: crate::scalar::Scalar::to_f64(&bound),
        utility_bound: format_rational(&bound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda(l: f64) -> Problem {
        Problem::unit(vec![vec![-1.0, -3.0, l], vec![-2.0, -1.0, l]]).unwrap()
    }

    #[test]
    fn competitive_axioms_on_the_family() {
        let problems: Vec<Problem> = [4.0, 2.0, -1.0].iter().map(|&l| lambda(l)).collect();
        let report = check_rule_axioms(Rule::Competitive, &problems, 3, 1).unwrap();
        assert!(report.all_pass(), "{report:#?}");
        assert!(report.sol.checks >= 6);
    }

    #[test]
    fn lost_bid_on_the_footnote_problem() {
        let p = Problem::unit(vec![vec![6.0, 2.0], vec![0.0, -1.0]]).unwrap();
        let out = apply_rule(Rule::Competitive, &p, &Limits::default()).unwrap();
        let lowered = Problem::unit(vec![vec![6.0, 2.0], vec![0.0, -5.0]]).unwrap();
        assert!(kkt_verify(&lowered, &out.divisions.unwrap()[0], KKT_TOL).passed);
    }

    #[test]
    fn canonical_pair_bounds_are_exact() {
        let (base, improved) = canonical_rm_pair();
        let report = rm_demo(&base, &improved, Rule::Competitive).unwrap();
        let bounds = report.bounds.clone().unwrap();
        assert_eq!(bounds.other_fair_share, "-13/18");
        assert_eq!(bounds.utility_bound, "-10/9");
        assert!(report.base_profile.values[0] >= -1.0);
        assert!(report.improved_profile.values[0] <= bounds.utility_bound_value);
        assert_eq!((report.monotone, report.worse_off.clone()), (false, vec![0]));
        assert_eq!(report.improvement, Some(Improvement::LessBad));
    }

    #[test]
    fn egalitarian_also_violates_on_the_pair() {
        let (base, improved) = canonical_rm_pair();
        assert!(!rm_demo(&base, &improved, Rule::Egalitarian).unwrap().monotone);
    }

    #[test]
    fn goods_are_monotone_and_no_change_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let base = random_problem(&mut rng, 3, 3, Family::Goods);
            let mut w = base.endowment().to_vec();
            w[1] *= 1.5;
            let improved = base.with_endowment(w).unwrap();
            assert!(rm_demo(&base, &improved, Rule::Competitive).unwrap().monotone);
        }
        let p = lambda(-1.0);
        let same = rm_demo(&p, &p, Rule::Competitive).unwrap();
        assert!(same.deltas.iter().all(|d| *d == 0.0) && same.item.is_none());
    }

    #[test]
    fn non_improvements_are_rejected() {
        let p = lambda(-1.0);
        let q = p.with_endowment(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(rm_demo(&p, &q, Rule::Competitive).is_err());
    }
}
