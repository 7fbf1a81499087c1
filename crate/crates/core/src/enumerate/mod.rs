//! Enumeration of the competitive divisions of negative problems.
//!
//! Two agents and two items have closed forms; the general case searches
//! forest-shaped supports. All paths share the final filter: every candidate
//! is re-checked by [`kkt_verify`], profiles are deduplicated and the output
//! is sorted so it does not depend on search order.

use std::cmp::Ordering;
use std::time::Instant;

use crate::cancel::CancelToken;
use crate::classify::{classify, Kind};
use crate::error::{Error, Result};
use crate::kkt::kkt_verify;
use crate::model::{partition_items, utility_profile, Allocation, Budget, Division, Problem, UtilityProfile};
use crate::scalar::Scalar;

mod general;
pub mod instances;
mod two_agents;
mod two_items;

pub use general::enumerate_general;
pub use instances::{generate_lower_bound_instance, InstanceKind};
pub use two_agents::{enumerate_two_agents, merge_equal_ratios};
pub use two_items::enumerate_two_items;

/// Profiles closer than this (relative, per agent) are treated as one.
pub const DEDUP_TOL: f64 = 1e-6;
/// Tolerance of the final certificate applied to floating candidates.
pub const CANDIDATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EnumerationResult<S = f64> {
    /// One division per distinct profile, aligned with `profiles`.
    pub divisions: Vec<Division<S>>,
    pub profiles: Vec<UtilityProfile<S>>,
    /// False when a search limit cut the enumeration short.
    pub exhaustive: bool,
}

impl<S> EnumerationResult<S> {
    /// Error for an empty result: a limit if the search was cut short,
    /// otherwise a certificate failure on every candidate.
    pub fn nothing_found(&self) -> Error {
        if self.exhaustive {
            Error::Empty("no competitive division passed the certificate".into())
        } else {
            Error::LimitExceeded("search stopped at a limit before finding a competitive division".into())
        }
    }
}

#[derive(Debug, Clone)]
pub struct Limits {
    /// Cap on support nodes visited by the general search.
    pub max_supports: u64,
    /// Cap on `n + m` for the general search.
    pub max_size: usize,
    pub deadline: Option<Instant>,
    pub cancel: Option<CancelToken>,
    /// Split the general search across threads.
    pub parallel: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_supports: 2_000_000, max_size: 12, deadline: None, cancel: None, parallel: true }
    }
}

impl Limits {
    pub(crate) fn check_cancel(&self) -> Result<()> {
        match &self.cancel {
            Some(c) if c.is_cancelled() => Err(Error::Cancelled),
            _ => Ok(()),
        }
    }

    pub(crate) fn past_deadline(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// Dispatches to the closed forms when `n = 2` or `m = 2`, to the general
/// search otherwise.
pub fn enumerate<S: Scalar>(problem: &Problem<S>, limits: &Limits) -> Result<EnumerationResult<S>> {
    if problem.n() == 2 {
        enumerate_two_agents(problem)
    } else if problem.m() == 2 {
        enumerate_two_items(problem)
    } else {
        enumerate_general(problem, limits)
    }
}

pub(crate) fn require_negative<S: Scalar>(problem: &Problem<S>) -> Result<()> {
    let kind = classify(problem)?.kind;
    if kind != Kind::Negative {
        return Err(Error::ClassificationMismatch { expected: "negative".into(), found: kind });
    }
    Ok(())
}

/// The problem without neutral items, and the original indices of the kept items.
pub(crate) fn drop_neutral<S: Scalar>(problem: &Problem<S>) -> Result<(Problem<S>, Vec<usize>)> {
    let items = partition_items(problem);
    let mut kept: Vec<usize> = items.a_plus.iter().chain(&items.a_minus).copied().collect();
    kept.sort_unstable();
    let reduced = Problem::new(
        problem.agents().to_vec(),
        kept.iter().map(|&a| problem.items()[a].clone()).collect(),
        kept.iter().map(|&a| problem.w(a).clone()).collect(),
        problem.utilities().iter().map(|row| kept.iter().map(|&a| row[a].clone()).collect()).collect(),
    )?;
    Ok((reduced, kept))
}

/// Lifts a division of the reduced problem back: neutral items are free and
/// go to the first agent indifferent to them.
pub(crate) fn restore_neutral<S: Scalar>(problem: &Problem<S>, kept: &[usize], division: Division<S>) -> Division<S> {
    let (n, m) = (problem.n(), problem.m());
    let mut z = Allocation::zeros(n, m);
    let mut price = vec![S::zero(); m];
    for (k, &a) in kept.iter().enumerate() {
        price[a] = division.price[k].clone();
        for i in 0..n {
            z.shares[i][a] = division.allocation.shares[i][k].clone();
        }
    }
    for a in 0..m {
        if kept.contains(&a) {
            continue;
        }
        let eater = (0..n).find(|&i| problem.u(i, a).is_zero()).unwrap_or(0);
        z.shares[eater][a] = problem.w(a).clone();
    }
    Division { allocation: z, price, budget: division.budget }
}

fn cmp_profiles<S: Scalar>(a: &UtilityProfile<S>, b: &UtilityProfile<S>) -> Ordering {
    for (x, y) in a.values.iter().zip(&b.values) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

fn same_profile<S: Scalar>(a: &UtilityProfile<S>, b: &UtilityProfile<S>) -> bool {
    a.values.iter().zip(&b.values).all(|(x, y)| x.eq_tol(y, DEDUP_TOL))
}

/// Certifies, deduplicates and sorts candidate divisions (profiles in
/// decreasing lexicographic order).
pub(crate) fn finish<S: Scalar>(
    problem: &Problem<S>,
    candidates: Vec<Division<S>>,
    exhaustive: bool,
) -> EnumerationResult<S> {
    let mut kept: Vec<(UtilityProfile<S>, Division<S>)> = Vec::new();
    for mut division in candidates {
        if !S::EXACT {
            clamp_negative_zeros(&mut division);
        }
        if !kkt_verify(problem, &division, CANDIDATE_TOL).passed {
            continue;
        }
        let profile = utility_profile(problem, &division.allocation).expect("dimensions");
        if kept.iter().any(|(p, _)| same_profile(p, &profile)) {
            continue;
        }
        kept.push((profile, division));
    }
    kept.sort_by(|a, b| cmp_profiles(&b.0, &a.0));
    let (profiles, divisions) = kept.into_iter().unzip();
    EnumerationResult { divisions, profiles, exhaustive }
}

fn clamp_negative_zeros<S: Scalar>(division: &mut Division<S>) {
    for row in &mut division.allocation.shares {
        for z in row {
            if z.lt0() && z.to_f64() >= -crate::model::NEG_CUTOFF * 1e3 {
                *z = S::zero();
            }
        }
    }
}

/// Product of disutilities, the selection criterion.
fn nash_product<S: Scalar>(profile: &UtilityProfile<S>) -> S {
    profile.values.iter().fold(S::one(), |acc, u| acc * u.abs())
}

/// Index of the profile maximizing the product of `|U_i|`; ties go to the
/// lexicographically greatest profile.
pub fn select_index<S: Scalar>(profiles: &[UtilityProfile<S>]) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (k, profile) in profiles.iter().enumerate() {
        let value = nash_product(profile);
        best = match best {
            None => Some((k, value)),
            Some((j, bv)) => {
                let better = if value.eq_tol(&bv, crate::scalar::REL_EPS) {
                    cmp_profiles(profile, &profiles[j]) == Ordering::Greater
                } else {
                    value > bv
                };
                if better {
                    Some((k, value))
                } else {
                    Some((j, bv))
                }
            }
        };
    }
    best.map(|(k, _)| k)
}

pub fn select_division<S: Scalar>(result: &EnumerationResult<S>) -> Result<Division<S>> {
    select_index(&result.profiles)
        .map(|k| result.divisions[k].clone())
        .ok_or_else(|| Error::Empty("no competitive division to select from".into()))
}

/// Prices `p_a = max_i u_ia / d_i` for positive scales `d` (zero where nobody cares).
pub(crate) fn max_ratio_prices<S: Scalar>(problem: &Problem<S>, scale: &[S]) -> Vec<S> {
    (0..problem.m())
        .map(|a| {
            let mut best: Option<S> = None;
            for (i, d) in scale.iter().enumerate() {
                let v = problem.u(i, a).clone() / d.clone();
                if best.as_ref().is_none_or(|b| v > *b) {
                    best = Some(v);
                }
            }
            let best = best.unwrap_or_else(S::zero);
            if best.gt0() || best.lt0() {
                best
            } else {
                S::zero()
            }
        })
        .collect()
}

pub(crate) fn negative_division<S: Scalar>(allocation: Allocation<S>, price: Vec<S>) -> Division<S> {
    Division { allocation, price, budget: Budget::Negative }
}
