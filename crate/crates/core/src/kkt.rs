//! First-order certificate of a competitive division, price recovery and the
//! criticality test for negative profiles.

use serde::Serialize;

use crate::classify::{classify, Kind};
use crate::error::{Error, Result};
use crate::lp::{LpSpec, Relation};
use crate::model::{
    check_feasible, partition_agents, partition_items, utility_profile, Budget, Division, ItemClass, Problem,
    UtilityProfile,
};
use crate::scalar::Scalar;

/// Default tolerance for certificates of floating divisions.
pub const KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub passed: bool,
    pub feasible: bool,
    /// `|p.z_i - target_i|` per agent.
    pub budget_residuals: Vec<f64>,
    /// Violation of the ratio condition per (agent, item); zero where it holds.
    pub demand_residuals: Vec<Vec<f64>>,
    pub price_sign_violations: Vec<usize>,
    /// Agents consuming something they should not (e.g. repulsed agents eating priced items).
    pub parsimony_violations: Vec<usize>,
    /// Agents whose utility has the wrong sign for the budget regime.
    pub profile_sign_violations: Vec<usize>,
    /// Multipliers used for a null division (recovered or supplied).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub max_residual: f64,
}

/// Residual of `value == target` (`lhs <= rhs` when `one_sided`), relative to
/// the magnitudes involved in floating mode and exact otherwise.
fn residual<S: Scalar>(lhs: &S, rhs: &S, one_sided: bool, tol: f64) -> (f64, bool) {
    let diff = lhs.clone() - rhs.clone();
    let diff = if one_sided && !diff.gt0() { S::zero() } else { diff };
    if S::EXACT {
        (diff.to_f64().abs(), diff.is_zero())
    } else {
        let scale = 1f64.max(lhs.to_f64().abs()).max(rhs.to_f64().abs());
        let r = diff.to_f64().abs() / scale;
        (r, r <= tol)
    }
}

fn consumed<S: Scalar>(z: &S, w: &S, tol: f64) -> bool {
    if S::EXACT {
        z.gt0()
    } else {
        z.to_f64() > tol * 1f64.max(w.to_f64())
    }
}

pub fn kkt_verify<S: Scalar>(problem: &Problem<S>, division: &Division<S>, tol: f64) -> KktReport {
    let ones = vec![S::one(); problem.n()];
    verify(problem, division, &ones, None, tol)
}

/// Certificate for a positive division with income weights `theta`
/// (`p.z_i = theta_i` on attracted agents).
pub fn kkt_verify_weighted<S: Scalar>(
    problem: &Problem<S>,
    division: &Division<S>,
    theta: &[S],
    tol: f64,
) -> KktReport {
    verify(problem, division, theta, None, tol)
}

/// Certificate for a null division against a given multiplier vector
/// (entries for repulsed agents are ignored).
pub fn kkt_verify_null<S: Scalar>(problem: &Problem<S>, division: &Division<S>, lambda: &[S], tol: f64) -> KktReport {
    let ones = vec![S::one(); problem.n()];
    verify(problem, division, &ones, Some(lambda), tol)
}

fn verify<S: Scalar>(
    problem: &Problem<S>,
    division: &Division<S>,
    theta: &[S],
    lambda: Option<&[S]>,
    tol: f64,
) -> KktReport {
    let (n, m) = (problem.n(), problem.m());
    let z = &division.allocation;
    let p = &division.price;
    let mut report = KktReport {
        passed: false,
        feasible: false,
        budget_residuals: vec![0.0; n],
        demand_residuals: vec![vec![0.0; m]; n],
        price_sign_violations: Vec::new(),
        parsimony_violations: Vec::new(),
        profile_sign_violations: Vec::new(),
        lambda: None,
        max_residual: 0.0,
    };
    if p.len() != m || z.shares.len() != n || z.shares.iter().any(|r| r.len() != m) {
        report.max_residual = f64::INFINITY;
        return report;
    }
    report.feasible = check_feasible(problem, z, tol.max(crate::model::FEAS_TOL));
    let items = partition_items(problem);
    let agents = partition_agents(problem);
    let classes = items.classes(m);

    for (a, class) in classes.iter().enumerate() {
        let ok = match class {
            ItemClass::Good => p[a].is_pos_tol(0.0),
            ItemClass::Bad => p[a].is_neg_tol(0.0),
            ItemClass::Neutral => p[a].is_zero_tol(tol),
        };
        if !ok {
            report.price_sign_violations.push(a);
        }
    }

    let profile = utility_profile(problem, z).expect("dimensions checked");
    let mut ok = report.feasible && report.price_sign_violations.is_empty();
    let mut worst = 0.0f64;
    let mut note = |r: f64, good: bool, ok: &mut bool| {
        worst = worst.max(r);
        *ok &= good;
    };

    let attracted: Vec<bool> = (0..n).map(|i| agents.is_attracted(i)).collect();
    // Agents subject to the ratio conditions, and the budget each must spend.
    let (ratio_agents, targets): (Vec<bool>, Vec<S>) = match division.budget {
        Budget::Positive => {
            (attracted.clone(), (0..n).map(|i| if attracted[i] { theta[i].clone() } else { S::zero() }).collect())
        }
        Budget::Negative => (vec![true; n], vec![-S::one(); n]),
        Budget::Null => (attracted.clone(), vec![S::zero(); n]),
    };

    for i in 0..n {
        let spent = z.shares[i].iter().zip(p).fold(S::zero(), |acc, (x, q)| acc + x.clone() * q.clone());
        let (r, good) = residual(&spent, &targets[i], false, tol);
        report.budget_residuals[i] = r;
        note(r, good, &mut ok);

        let u = &profile.values[i];
        let sign_ok = match division.budget {
            Budget::Positive if attracted[i] => u.is_pos_tol(0.0),
            Budget::Negative => u.is_neg_tol(0.0),
            _ => u.is_zero_tol(tol),
        };
        if !sign_ok {
            report.profile_sign_violations.push(i);
            ok = false;
        }

        if !ratio_agents[i] {
            // Repulsed agents (positive or null regime) may only take free, worthless items.
            let bad = (0..m).any(|a| {
                consumed(z.get(i, a), problem.w(a), tol) && !(problem.u(i, a).is_zero() && p[a].is_zero_tol(tol))
            });
            if bad {
                report.parsimony_violations.push(i);
                ok = false;
            }
        }
    }

    // Ratio conditions: rho_ia = weight_i * u_ia <= p_a, with equality where consumed.
    let weight: Vec<Option<S>> = match division.budget {
        Budget::Positive => (0..n)
            .map(|i| {
                let u = &profile.values[i];
                (attracted[i] && u.gt0()).then(|| theta[i].clone() / u.clone())
            })
            .collect(),
        Budget::Negative => (0..n)
            .map(|i| {
                let u = &profile.values[i];
                u.lt0().then(|| S::one() / (-u.clone()))
            })
            .collect(),
        Budget::Null => {
            let lam = match lambda {
                Some(l) => (0..n).map(|i| attracted[i].then(|| l[i].clone())).collect(),
                None => recover_lambda(problem, division, &attracted, tol),
            };
            report.lambda = Some(lam.iter().map(|l| l.as_ref().map_or(0.0, Scalar::to_f64)).collect());
            for i in 0..n {
                if attracted[i] && !lam[i].as_ref().is_some_and(Scalar::gt0) {
                    report.parsimony_violations.push(i);
                    ok = false;
                }
            }
            lam
        }
    };
    for i in 0..n {
        if !ratio_agents[i] {
            continue;
        }
        let Some(w) = &weight[i] else {
            continue;
        };
        for a in 0..m {
            let rho = w.clone() * problem.u(i, a).clone();
            let eats = consumed(z.get(i, a), problem.w(a), tol);
            let (r, good) = residual(&rho, &p[a], !eats, tol);
            report.demand_residuals[i][a] = r;
            note(r, good, &mut ok);
        }
    }
    report.parsimony_violations.sort_unstable();
    report.parsimony_violations.dedup();
    report.max_residual = worst;
    report.passed = ok;
    report
}

/// Multipliers for a null division: pinned by a consumed pair with nonzero
/// utility when there is one, otherwise any point of the admissible interval.
fn recover_lambda<S: Scalar>(
    problem: &Problem<S>,
    division: &Division<S>,
    attracted: &[bool],
    tol: f64,
) -> Vec<Option<S>> {
    let p = &division.price;
    (0..problem.n())
        .map(|i| {
            if !attracted[i] {
                return None;
            }
            let mut pinned: Option<(S, S)> = None;
            let mut lower: Option<S> = None;
            let mut upper: Option<S> = None;
            for a in 0..problem.m() {
                let u = problem.u(i, a);
                if u.is_zero() {
                    continue;
                }
                let ratio = p[a].clone() / u.clone();
                let z = division.allocation.get(i, a);
                if consumed(z, problem.w(a), tol) && pinned.as_ref().is_none_or(|(best, _)| z > best) {
                    pinned = Some((z.clone(), ratio.clone()));
                }
                if u.gt0() {
                    upper = Some(match upper {
                        Some(v) if v <= ratio => v,
                        _ => ratio,
                    });
                } else {
                    lower = Some(match lower {
                        Some(v) if v >= ratio => v,
                        _ => ratio,
                    });
                }
            }
            if let Some((_, l)) = pinned {
                return Some(l);
            }
            let two = S::from_int(2);
            Some(match (lower, upper) {
                (Some(l), Some(u)) => (l + u) / two,
                (Some(l), None) => {
                    if l.gt0() {
                        l * two
                    } else {
                        S::one()
                    }
                }
                (None, Some(u)) => u / two,
                (None, None) => S::one(),
            })
        })
        .collect()
}

/// Prices supporting a utility profile: `p_a = max_j w_j u_ja` over the
/// agents the regime ranges over (`w_j = theta_j / U_j` positive,
/// `1 / |U_j|` negative), zero on neutral items.
pub fn recover_prices<S: Scalar>(
    problem: &Problem<S>,
    profile: &UtilityProfile<S>,
    budget: Budget,
    theta: Option<&[S]>,
) -> Result<Vec<S>> {
    let (n, m) = (problem.n(), problem.m());
    if profile.len() != n {
        return Err(Error::Dimension(format!("profile has {} entries, expected {n}", profile.len())));
    }
    let items = partition_items(problem);
    let agents = partition_agents(problem);
    let weights: Vec<Option<S>> = match budget {
        Budget::Positive => (0..n)
            .map(|i| {
                let u = &profile.values[i];
                let t = theta.map_or(S::one(), |t| t[i].clone());
                (agents.is_attracted(i) && u.gt0()).then(|| t / u.clone())
            })
            .collect(),
        Budget::Negative => (0..n)
            .map(|i| {
                let u = &profile.values[i];
                u.lt0().then(|| S::one() / (-u.clone()))
            })
            .collect(),
        Budget::Null => return Err(Error::InvalidProblem("null prices are not determined by the profile".into())),
    };
    if weights.iter().enumerate().any(|(i, w)| w.is_none() && (budget == Budget::Negative || agents.is_attracted(i))) {
        return Err(Error::InvalidProblem("profile has the wrong sign for the budget regime".into()));
    }
    Ok((0..m)
        .map(|a| {
            if items.class(a) == ItemClass::Neutral {
                return S::zero();
            }
            let mut best: Option<S> = None;
            for (i, w) in weights.iter().enumerate() {
                if let Some(w) = w {
                    let v = w.clone() * problem.u(i, a).clone();
                    if best.as_ref().is_none_or(|b| v > *b) {
                        best = Some(v);
                    }
                }
            }
            best.unwrap_or_else(S::zero)
        })
        .collect())
}

/// Optimal value of `max sum_i (u_i . z_i) / |U_i|` over feasible allocations.
pub fn criticality_value(problem: &Problem<f64>, profile: &UtilityProfile<f64>) -> Result<f64> {
    let (n, m) = (problem.n(), problem.m());
    if profile.len() != n {
        return Err(Error::Dimension(format!("profile has {} entries, expected {n}", profile.len())));
    }
    if profile.values.iter().any(|u| *u >= 0.0) {
        return Err(Error::InvalidProblem("criticality needs a strictly negative profile".into()));
    }
    let mut objective = vec![0.0; n * m];
    for i in 0..n {
        for a in 0..m {
            objective[i * m + a] = problem.u(i, a) / profile.values[i].abs();
        }
    }
    let mut lp = LpSpec::maximize(objective);
    for a in 0..m {
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (i * m + a, 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, *problem.w(a));
    }
    let (_, value) = lp.solve()?.optimal()?;
    Ok(value)
}

/// True iff the negative profile is a critical point of the product of
/// disutilities on the efficient frontier: the optimum of
/// [`criticality_value`] equals `-n`.
pub fn verify_criticality<S: Scalar>(problem: &Problem<S>, profile: &UtilityProfile<S>) -> Result<bool> {
    let problem = problem.to_f64();
    let kind = classify(&problem)?.kind;
    if kind != Kind::Negative {
        return Err(Error::ClassificationMismatch { expected: "negative".into(), found: kind });
    }
    let n = problem.n() as f64;
    let value = criticality_value(&problem, &profile.to_f64())?;
    Ok((value + n).abs() <= 1e-7 * n)
}
