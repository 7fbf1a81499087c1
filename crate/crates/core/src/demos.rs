//! Named reference instances replayed against stored golden values.
//!
//! Golden numbers are exact rationals. In exact mode the enumerations run
//! over rationals and compare exactly; in float mode they compare at
//! [`GOLDEN_TOL`].

use serde::Serialize;
use serde_json::{json, Value};

use crate::axioms::{canonical_rm_pair, rm_demo, rm_goods_spot_check};
use crate::classify::{classify, Kind};
use crate::document::{problem_to_json, Mode};
use crate::enumerate::{enumerate, select_index, EnumerationResult, Limits};
use crate::error::{Error, Result};
use crate::kkt::{kkt_verify, kkt_verify_null};
use crate::model::{utility_profile, Allocation, Budget, Division, Problem, UtilityProfile};
use crate::null::solve_null;
use crate::rules::Rule;
use crate::scalar::{rat, Rational, Scalar};
use crate::topology::{brute_force_components, ef_components_two_bads, pattern_ratios, ratio_instance, selection_path};

pub const GOLDEN_TOL: f64 = 1e-9;
/// Grid used by the component oracle in the topology demo.
pub const ORACLE_GRID: usize = 200;
/// Random problems in the all-goods monotonicity spot check.
pub const RM_SPOT_CHECKS: usize = 200;
const RM_SEED: u64 = 0x5EED;

pub const DEMOS: [(&str, &str); 6] = [
    ("lambda-family", "Two agents, two bads and a third item worth lambda to both"),
    ("prop1-two-agents", "Two agents and six bads with eleven competitive profiles"),
    ("prop1-two-items", "Six agents and two bads with eleven competitive profiles"),
    ("prop1-general", "Five specialists and a generalist sharing five bads"),
    ("prop4-rm", "Less of a bad can hurt someone under any efficient fair-share rule"),
    ("lemma5", "Connected components of the envy-free efficient set with two bads"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub name: String,
    pub title: String,
    pub mode: Mode,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub details: Value,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, expected: impl ToString, actual: impl ToString, passed: bool) {
        self.0.push(Check { name: name.into(), expected: expected.to_string(), actual: actual.to_string(), passed });
    }

    fn equal<T: PartialEq + ToString>(&mut self, name: impl Into<String>, expected: T, actual: T) {
        let passed = expected == actual;
        self.push(name, expected, actual, passed);
    }
}

pub fn demo_names() -> impl Iterator<Item = &'static str> {
    DEMOS.iter().map(|(name, _)| *name)
}

pub fn run_demo(name: &str, mode: Mode) -> Result<DemoReport> {
    let title = DEMOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        Error::Unsupported(format!("unknown demo {name:?}; known: {}", demo_names().collect::<Vec<_>>().join(", ")))
    })?;
    let mut checks = Checks::default();
    let mut notes = Vec::new();
    let exact = mode == Mode::Exact;
    let details = match (name, exact) {
        ("lambda-family", false) => lambda_family::<f64>(&mut checks)?,
        ("lambda-family", true) => lambda_family::<Rational>(&mut checks)?,
        ("prop1-two-agents", false) => two_agents::<f64>(&mut checks)?,
        ("prop1-two-agents", true) => two_agents::<Rational>(&mut checks)?,
        ("prop1-two-items", false) => two_items::<f64>(&mut checks)?,
        ("prop1-two-items", true) => two_items::<Rational>(&mut checks)?,
        ("prop1-general", false) => general::<f64>(&mut checks, &mut notes)?,
        ("prop1-general", true) => general::<Rational>(&mut checks, &mut notes)?,
        ("prop4-rm", _) => resource_monotonicity(&mut checks)?,
        ("lemma5", _) => components(&mut checks)?,
        _ => unreachable!("names come from DEMOS"),
    };
    let checks = checks.0;
    Ok(DemoReport {
        name: name.to_owned(),
        title: title.to_owned(),
        mode,
        passed: checks.iter().all(|c| c.passed),
        checks,
        notes,
        details,
    })
}

fn int_problem<S: Scalar>(rows: &[&[i64]]) -> Problem<S> {
    Problem::unit(rows.iter().map(|r| r.iter().map(|&v| S::from_int(v)).collect()).collect())
        .expect("valid demo instance")
}

fn lambda_problem<S: Scalar>(lambda: i64) -> Problem<S> {
    int_problem(&[&[-1, -3, lambda], &[-2, -1, lambda]])
}

fn close<S: Scalar>(actual: &[S], golden: &[Rational]) -> bool {
    actual.len() == golden.len() && actual.iter().zip(golden).all(|(a, g)| a.eq_tol(&S::from_rational(g), GOLDEN_TOL))
}

fn show<T: std::fmt::Display>(values: &[T]) -> String {
    format!("({})", values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))
}

fn show_rows<T: std::fmt::Display>(rows: &[Vec<T>]) -> String {
    rows.iter().map(|r| show(r)).collect::<Vec<_>>().join(" | ")
}

fn values_json<S: Scalar>(values: &[S]) -> Value {
    Value::Array(values.iter().map(Scalar::to_json).collect())
}

fn rows_json<S: Scalar>(rows: &[Vec<S>]) -> Value {
    Value::Array(rows.iter().map(|r| values_json(r)).collect())
}

fn division_json<S: Scalar>(division: &Division<S>, profile: &UtilityProfile<S>) -> Value {
    json!({
        "profile": values_json(&profile.values),
        "allocation": rows_json(&division.allocation.shares),
        "price": values_json(&division.price),
        "budget": division.budget,
    })
}

fn enumeration_json<S: Scalar>(result: &EnumerationResult<S>) -> Value {
    let profiles: Vec<Value> = result.profiles.iter().map(|p| values_json(&p.values)).collect();
    json!({
        "profiles": profiles,
        "selected": select_index(&result.profiles),
        "exhaustive": result.exhaustive,
    })
}

fn golden(values: &[(i64, i64)]) -> Vec<Rational> {
    values.iter().map(|&(p, q)| rat(p, q)).collect()
}

fn find_division<S: Scalar>(result: &EnumerationResult<S>, shares: &[Vec<Rational>]) -> Option<usize> {
    (0..result.divisions.len()).find(|&k| {
        let z = &result.divisions[k].allocation.shares;
        z.len() == shares.len() && z.iter().zip(shares).all(|(a, g)| close(a, g))
    })
}

fn lambda_family<S: Scalar>(checks: &mut Checks) -> Result<Value> {
    let mut kinds = Vec::new();
    for lambda in [4, 3, 2, 1, 0, -1, -2, -3] {
        let expected = match lambda {
            3.. => Kind::Positive,
            2 => Kind::Null,
            _ => Kind::Negative,
        };
        let c = classify(&lambda_problem::<S>(lambda))?;
        checks.equal(format!("classification at lambda = {lambda}"), expected, c.kind);
        kinds.push(json!({"lambda": lambda, "kind": c.kind, "margin": c.margin}));
    }

    let p = lambda_problem::<S>(-1);
    let result = enumerate(&p, &Limits::default())?;
    let expected = [
        golden(&[(-1, 1), (-2, 1)]),
        golden(&[(-3, 2), (-3, 2)]),
        golden(&[(-2, 1), (-1, 1)]),
        golden(&[(-5, 2), (-5, 6)]),
    ];
    checks.equal("profile count at lambda = -1", 4, result.profiles.len());
    let actual: Vec<Vec<S>> = result.profiles.iter().map(|p| p.values.clone()).collect();
    let all_found = expected.iter().all(|g| actual.iter().any(|a| close(a, g)));
    checks.push(
        "profiles at lambda = -1",
        show_rows(&expected),
        show_rows(&actual),
        all_found && actual.len() == expected.len(),
    );
    let selected = select_index(&result.profiles).ok_or_else(|| Error::Empty("no competitive profile".into()))?;
    let chosen = &result.profiles[selected].values;
    checks.push("selected profile", show(&expected[1]), show(chosen), close(chosen, &expected[1]));
    let z1 = &result.divisions[selected].allocation.shares[0];
    let want_z1 = golden(&[(1, 1), (0, 1), (1, 2)]);
    checks.push("selected bundle of agent 1", show(&want_z1), show(z1), close(z1, &want_z1));

    // The null member of the family, certified by its multipliers.
    let null = lambda_problem::<f64>(2);
    let solution = solve_null(&null)?;
    let profile = utility_profile(&null, &solution.division.allocation)?;
    checks.push(
        "null profile at lambda = 2",
        "(0, 0)",
        show(&profile.values),
        profile.values.iter().all(|u| u.abs() <= GOLDEN_TOL),
    );
    let kkt = kkt_verify_null(&null, &solution.division, &solution.lambda, GOLDEN_TOL);
    checks.push(
        "null certificate residual",
        format!("<= {GOLDEN_TOL:e}"),
        format!("{:e}", kkt.max_residual),
        kkt.passed,
    );

    Ok(json!({
        "classifications": kinds,
        "problem": problem_to_json(&p),
        "enumeration": enumeration_json(&result),
        "selected_division": division_json(&result.divisions[selected], &result.profiles[selected]),
        "null": {
            "profile": values_json(&profile.values),
            "allocation": rows_json(&solution.division.allocation.shares),
            "price": values_json(&solution.division.price),
            "lambda": solution.lambda,
            "residual": kkt.max_residual,
        },
    }))
}

fn two_agents<S: Scalar>(checks: &mut Checks) -> Result<Value> {
    let p = int_problem::<S>(&[&[-1, -1, -2, -4, -8, -17], &[-17, -8, -4, -2, -1, -1]]);
    let result = enumerate(&p, &Limits::default())?;
    checks.equal("profile count", 11, result.profiles.len());

    // Agent 1 eats a and b, agent 2 the rest.
    let cut_shares = vec![
        golden(&[(1, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]),
        golden(&[(0, 1), (0, 1), (1, 1), (1, 1), (1, 1), (1, 1)]),
    ];
    let cut_price = golden(&[(-1, 2), (-1, 2), (-1, 2), (-1, 4), (-1, 8), (-1, 8)]);
    let cut = Division {
        allocation: Allocation::new(cut_shares.iter().map(|r| r.iter().map(S::from_rational).collect()).collect()),
        price: cut_price.iter().map(S::from_rational).collect(),
        budget: Budget::Negative,
    };
    let kkt = kkt_verify(&p, &cut, 1e-8);
    checks.push(
        "cut {a,b} | {c,d,e,f} at the printed prices",
        "KKT residual <= 1e-8",
        format!("{:e}", kkt.max_residual),
        kkt.passed,
    );
    checks.push(
        "cut {a,b} | {c,d,e,f} is enumerated",
        "present",
        find_division(&result, &cut_shares).is_some(),
        find_division(&result, &cut_shares).is_some(),
    );

    // Agent 1 takes a..e and part of f.
    let split = (0..result.divisions.len()).find(|&k| {
        let f = &result.divisions[k].allocation.shares[0][5];
        f.is_pos_tol(GOLDEN_TOL) && (S::one() - f.clone()).is_pos_tol(GOLDEN_TOL)
    });
    let fair_share = rat(-33, 2);
    match split {
        Some(k) => {
            let u1 = &result.profiles[k].values[0];
            checks.push("agent 1 when f is split", "-33/2", u1, u1.eq_tol(&S::from_rational(&fair_share), GOLDEN_TOL));
        }
        None => checks.push("agent 1 when f is split", "-33/2", "no division splits f", false),
    }
    let share = p.value_of(0, p.endowment()) / S::from_int(2);
    checks.push("agent 1 fair share", "-33/2", &share, share.eq_tol(&S::from_rational(&fair_share), 0.0));

    Ok(json!({
        "problem": problem_to_json(&p),
        "enumeration": enumeration_json(&result),
        "cut": {"allocation": rows_json(&cut.allocation.shares), "price": values_json(&cut.price), "residual": kkt.max_residual},
        "split_f": split.map(|k| division_json(&result.divisions[k], &result.profiles[k])),
    }))
}

fn two_items<S: Scalar>(checks: &mut Checks) -> Result<Value> {
    let p = int_problem::<S>(&[&[-1, -6], &[-1, -3], &[-2, -3], &[-3, -2], &[-3, -1], &[-6, -1]]);
    let result = enumerate(&p, &Limits::default())?;
    checks.equal("profile count", 11, result.profiles.len());
    let table = vec![
        golden(&[(5, 12), (0, 1)]),
        golden(&[(5, 12), (0, 1)]),
        golden(&[(1, 6), (1, 6)]),
        golden(&[(0, 1), (5, 18)]),
        golden(&[(0, 1), (5, 18)]),
        golden(&[(0, 1), (5, 18)]),
    ];
    let found = find_division(&result, &table);
    checks.push(
        "split at agent 3",
        show_rows(&table),
        found.map_or("absent".into(), |k| show_rows(&result.divisions[k].allocation.shares)),
        found.is_some(),
    );
    let price = golden(&[(-12, 5), (-18, 5)]);
    match found {
        Some(k) => {
            let actual = &result.divisions[k].price;
            checks.push("split-at-3 price", show(&price), show(actual), close(actual, &price));
        }
        None => checks.push("split-at-3 price", show(&price), "no such division", false),
    }
    Ok(json!({
        "problem": problem_to_json(&p),
        "enumeration": enumeration_json(&result),
        "split_at_3": found.map(|k| division_json(&result.divisions[k], &result.profiles[k])),
    }))
}

/// Profile of the division where the specialists in `shared` (a nonempty
/// subset of the first five agents, as a bitmask) split their own bads with
/// the generalist and everyone else eats their own bad in full.
fn subset_profile(shared: u32) -> Vec<Rational> {
    let k = shared.count_ones() as i64;
    let mut profile: Vec<Rational> =
        (0..5).map(|i| if shared & (1 << i) != 0 { rat(-k, k + 1) } else { rat(-1, 1) }).collect();
    profile.push(rat(-k, k + 1));
    profile
}

fn general<S: Scalar>(checks: &mut Checks, notes: &mut Vec<String>) -> Result<Value> {
    let mut rows: Vec<Vec<i64>> = (0..5).map(|i| (0..5).map(|a| if a == i { -1 } else { -3 }).collect()).collect();
    rows.push(vec![-1; 5]);
    let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
    let p = int_problem::<S>(&refs);
    let result = enumerate(&p, &Limits::default())?;

    checks.equal("search is exhaustive", true, result.exhaustive);
    let actual: Vec<&[S]> = result.profiles.iter().map(|p| p.values.as_slice()).collect();
    let constructed = (1u32..32).filter(|&s| actual.iter().any(|a| close(a, &subset_profile(s)))).count();
    checks.equal("constructed subset divisions found", 31, constructed);

    let symmetric_shares: Vec<Vec<Rational>> = (0..6)
        .map(|i| {
            (0..5)
                .map(|a| {
                    if i == 5 {
                        rat(1, 6)
                    } else if a == i {
                        rat(5, 6)
                    } else {
                        rat(0, 1)
                    }
                })
                .collect()
        })
        .collect();
    let symmetric = find_division(&result, &symmetric_shares);
    let uniform = vec![rat(-6, 5); 5];
    checks.push(
        "symmetric division at price -6/5",
        "all U_i = -5/6",
        symmetric.map_or("absent".into(), |k| show(&result.profiles[k].values)),
        symmetric.is_some_and(|k| {
            close(&result.divisions[k].price, &uniform) && close(&result.profiles[k].values, &vec![rat(-5, 6); 6])
        }),
    );

    let f = |p, q| rat(p, q);
    let table = vec![
        vec![f(2, 3), f(0, 1), f(0, 1), f(0, 1), f(0, 1)],
        vec![f(0, 1), f(2, 3), f(0, 1), f(0, 1), f(0, 1)],
        vec![f(0, 1), f(0, 1), f(1, 1), f(0, 1), f(0, 1)],
        vec![f(0, 1), f(0, 1), f(0, 1), f(1, 1), f(0, 1)],
        vec![f(0, 1), f(0, 1), f(0, 1), f(0, 1), f(1, 1)],
        vec![f(1, 3), f(1, 3), f(0, 1), f(0, 1), f(0, 1)],
    ];
    let subset = find_division(&result, &table);
    let price = golden(&[(-3, 2), (-3, 2), (-1, 1), (-1, 1), (-1, 1)]);
    checks.push(
        "agents 3, 4, 5 eat their own bad",
        format!("table with price {}", show(&price)),
        subset.map_or("absent".into(), |k| format!("price {}", show(&result.divisions[k].price))),
        subset.is_some_and(|k| close(&result.divisions[k].price, &price)),
    );

    checks.equal("profile count", 31, result.profiles.len());
    if result.exhaustive && result.profiles.len() != 31 {
        notes.push(format!(
            "The exhaustive search certifies {} competitive profiles; every one passes the KKT certificate. \
             The 31 constructed subset divisions are among them.",
            result.profiles.len()
        ));
    }

    let certified = result.divisions.iter().all(|d| kkt_verify(&p, d, GOLDEN_TOL).passed);
    checks.equal("every enumerated division is certified", true, certified);

    Ok(json!({
        "problem": problem_to_json(&p),
        "enumeration": enumeration_json(&result),
        "symmetric": symmetric.map(|k| division_json(&result.divisions[k], &result.profiles[k])),
        "subset_345": subset.map(|k| division_json(&result.divisions[k], &result.profiles[k])),
    }))
}

fn resource_monotonicity(checks: &mut Checks) -> Result<Value> {
    let (base, improved) = canonical_rm_pair();
    let competitive = rm_demo(&base, &improved, Rule::Competitive)?;
    let egalitarian = rm_demo(&base, &improved, Rule::Egalitarian)?;
    let bounds = competitive.bounds.clone().ok_or_else(|| Error::Empty("canonical bounds missing".into()))?;
    checks.equal("fair share of agent 2 after the change", "-13/18", &bounds.other_fair_share);
    checks.equal("bound on agent 1 after the change", "-10/9", &bounds.utility_bound);
    let before = competitive.base_profile.values[0];
    checks.push("competitive agent 1 before", ">= -1", before, before >= -1.0 - GOLDEN_TOL);
    let after = competitive.improved_profile.values[0];
    checks.push("competitive agent 1 after", "<= -10/9", after, after <= bounds.utility_bound_value + GOLDEN_TOL);
    checks.equal("competitive rule violates monotonicity", false, competitive.monotone);
    checks.equal("egalitarian rule violates monotonicity", false, egalitarian.monotone);
    let spot = rm_goods_spot_check(Rule::Competitive, RM_SPOT_CHECKS, RM_SEED)?;
    checks.push(
        "all-goods monotonicity spot check",
        format!("{RM_SPOT_CHECKS} of {RM_SPOT_CHECKS}"),
        if spot.passed { format!("{0} of {0}", spot.checks) } else { format!("failed: {:?}", spot.counterexample) },
        spot.passed && spot.checks == RM_SPOT_CHECKS,
    );
    Ok(json!({
        "base": problem_to_json(&base),
        "improved": problem_to_json(&improved),
        "competitive": competitive,
        "egalitarian": egalitarian,
        "goods_spot_check": spot,
    }))
}

fn components(checks: &mut Checks) -> Result<Value> {
    let mut instances = Vec::new();
    let witnesses: [(&str, &[f64], usize); 2] =
        [("three components", &[0.2, 0.3, 3.5, 4.0], 3), ("one interior component", &[0.2, 0.3, 0.5, 0.9], 1)];
    for (label, ratios, want) in witnesses {
        let p = ratio_instance(ratios)?;
        let report = ef_components_two_bads(&p)?;
        let oracle = brute_force_components(&p, ORACLE_GRID)?;
        checks.equal(format!("{label}: formula"), want, report.count);
        checks.equal(format!("{label}: grid oracle"), want, oracle);
        instances.push(json!({"ratios": ratios, "report": report, "oracle": oracle}));
    }
    for n in 3..=9 {
        let ratios = pattern_ratios(n);
        let p = ratio_instance(&ratios)?;
        let report = ef_components_two_bads(&p)?;
        let oracle = brute_force_components(&p, ORACLE_GRID)?;
        let bound = (2 * n + 1) / 3;
        checks.equal(format!("pattern n = {n}: formula"), bound, report.count);
        checks.equal(format!("pattern n = {n}: grid oracle"), bound, oracle);
        instances.push(json!({"ratios": ratios, "report": report, "oracle": oracle}));
    }
    let path = selection_path(witnesses[0].1, witnesses[1].1, 40)?;
    Ok(json!({
        "grid": ORACLE_GRID,
        "instances": instances,
        "selection_path": {
            "start_components": path.start.count,
            "end_components": path.end.count,
            "largest_jump": path.largest_jump,
            "jump_at": path.jump_at,
        },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_demo_is_an_error() {
        assert!(matches!(run_demo("nope", Mode::Float), Err(Error::Unsupported(_))));
    }

    #[test]
    fn subset_profiles() {
        assert_eq!(subset_profile(0b11111), vec![rat(-5, 6); 6]);
        let p = subset_profile(0b00011);
        assert_eq!(p[0], rat(-2, 3));
        assert_eq!(p[2], rat(-1, 1));
        assert_eq!(p[5], rat(-2, 3));
    }

    #[test]
    fn lambda_family_passes_in_both_modes() {
        for mode in [Mode::Float, Mode::Exact] {
            let r = run_demo("lambda-family", mode).unwrap();
            assert!(r.passed, "{:#?}", r.checks);
        }
    }

    #[test]
    fn closed_form_demos_pass() {
        for name in ["prop1-two-agents", "prop1-two-items"] {
            for mode in [Mode::Float, Mode::Exact] {
                let r = run_demo(name, mode).unwrap();
                assert!(r.passed, "{name}: {:#?}", r.checks);
            }
        }
    }

    #[test]
    fn rm_demo_passes() {
        let r = run_demo("prop4-rm", Mode::Float).unwrap();
        assert!(r.passed, "{:#?}", r.checks);
    }
}
