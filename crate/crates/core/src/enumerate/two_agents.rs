//! Two agents: sort items by the ratio `u_1a / u_2a`; every competitive
//! division gives agent 1 the bads left of some threshold and the goods right
//! of it, sharing at most the items sitting exactly at the threshold.

use crate::error::{Error, Result};
use crate::model::{Allocation, ItemClass, Problem};
use crate::scalar::Scalar;

use super::{
    drop_neutral, finish, max_ratio_prices, negative_division, require_negative, restore_neutral, EnumerationResult,
};

pub fn enumerate_two_agents<S: Scalar>(problem: &Problem<S>) -> Result<EnumerationResult<S>> {
    if problem.n() != 2 {
        return Err(Error::Arity(format!("expected 2 agents, found {}", problem.n())));
    }
    require_negative(problem)?;
    let (reduced, kept) = drop_neutral(problem)?;
    let candidates = candidates(&reduced).into_iter().map(|d| restore_neutral(problem, &kept, d)).collect();
    Ok(finish(problem, candidates, true))
}

/// Ratio key of an item; `None` stands for `+inf` (a good only agent 1 likes).
fn ratio<S: Scalar>(problem: &Problem<S>, a: usize) -> Option<S> {
    let (u1, u2) = (problem.u(0, a), problem.u(1, a));
    if is_bad(problem, a) || u2.gt0() {
        Some(u1.clone() / u2.clone())
    } else {
        None
    }
}

fn is_bad<S: Scalar>(problem: &Problem<S>, a: usize) -> bool {
    problem.u(0, a).lt0() && problem.u(1, a).lt0()
}

/// Items grouped by equal ratio, in increasing ratio order.
fn ratio_groups<S: Scalar>(problem: &Problem<S>) -> Vec<(Option<S>, Vec<usize>)> {
    let mut items: Vec<(Option<S>, usize)> = (0..problem.m()).map(|a| (ratio(problem, a), a)).collect();
    items.sort_by(|x, y| match (&x.0, &y.0) {
        (Some(a), Some(b)) => a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => x.1.cmp(&y.1),
    });
    let mut groups: Vec<(Option<S>, Vec<usize>)> = Vec::new();
    for (r, a) in items {
        let same = match (groups.last().map(|g| &g.0), &r) {
            (Some(Some(prev)), Some(r)) => prev.eq_tol(r, 1e-12),
            (Some(None), None) => true,
            _ => false,
        };
        if same {
            groups.last_mut().unwrap().1.push(a);
        } else {
            groups.push((r, vec![a]));
        }
    }
    groups
}

fn candidates<S: Scalar>(problem: &Problem<S>) -> Vec<crate::model::Division<S>> {
    let m = problem.m();
    let groups = ratio_groups(problem);
    let k_max = groups.len();
    let mut out = Vec::new();
    let value = |i: usize, items: &[usize]| {
        items.iter().fold(S::zero(), |acc, &a| acc + problem.u(i, a).clone() * problem.w(a).clone())
    };

    // Agent 1's fixed items when the threshold sits at group k (exclusive).
    let sides = |k: usize, include_k: bool| {
        let mut one = Vec::new();
        let mut two = Vec::new();
        for (g, (_, items)) in groups.iter().enumerate() {
            if g == k && !include_k {
                continue;
            }
            for &a in items {
                let first = if is_bad(problem, a) { g < k } else { g >= k };
                if first {
                    one.push(a);
                } else {
                    two.push(a);
                }
            }
        }
        (one, two)
    };

    // Cuts: the threshold lies strictly between group k-1 and group k.
    for k in 0..=k_max {
        let (one, two) = sides(k, true);
        let (u1, u2) = (value(0, &one), value(1, &two));
        if !(u1.lt0() && u2.lt0()) {
            continue;
        }
        let mut z = Allocation::zeros(2, m);
        for &a in &one {
            z.shares[0][a] = problem.w(a).clone();
        }
        for &a in &two {
            z.shares[1][a] = problem.w(a).clone();
        }
        let price = max_ratio_prices(problem, &[-u1, -u2]);
        out.push(negative_division(z, price));
    }

    // Splits: the threshold equals the ratio of group k, whose items are shared.
    for (k, (r, shared)) in groups.iter().enumerate() {
        let Some(rho) = r.clone().filter(|r| r.gt0()) else {
            continue;
        };
        let (one, two) = sides(k, false);
        let (c1, c2) = (value(0, &one), value(1, &two));
        let w2 = value(1, shared);
        let two_s = S::from_int(2);
        let x = (rho.clone() * (c2 + w2) - c1.clone()) / two_s;
        let (mut pos, mut neg) = (S::zero(), S::zero());
        for &a in shared {
            let v = problem.u(0, a).clone() * problem.w(a).clone();
            if v.gt0() {
                pos = pos + v;
            } else {
                neg = neg + v;
            }
        }
        if !(x > neg && x < pos) {
            continue;
        }
        let d1 = -(c1 + x.clone());
        let d2 = d1.clone() / rho;
        if !(d1.gt0() && d2.gt0()) {
            continue;
        }
        let t = (x - neg.clone()) / (pos - neg);
        let mut z = Allocation::zeros(2, m);
        for &a in &one {
            z.shares[0][a] = problem.w(a).clone();
        }
        for &a in &two {
            z.shares[1][a] = problem.w(a).clone();
        }
        for &a in shared {
            let frac = if problem.u(0, a).gt0() { t.clone() } else { S::one() - t.clone() };
            let mine = frac * problem.w(a).clone();
            z.shares[1][a] = problem.w(a).clone() - mine.clone();
            z.shares[0][a] = mine;
        }
        let price = max_ratio_prices(problem, &[d1, d2]);
        out.push(negative_division(z, price));
    }
    out
}

/// Merges items of the same sign class whose ratios coincide into one item of
/// unit endowment with utility `sum u_ia w_a`. Competitive profiles are unchanged.
pub fn merge_equal_ratios<S: Scalar>(problem: &Problem<S>) -> Result<Problem<S>> {
    if problem.n() != 2 {
        return Err(Error::Arity(format!("expected 2 agents, found {}", problem.n())));
    }
    let classes = crate::model::partition_items(problem).classes(problem.m());
    let mut merged: Vec<(ItemClass, Option<S>, Vec<usize>)> = Vec::new();
    for a in 0..problem.m() {
        let r = ratio(problem, a);
        let slot = merged.iter_mut().find(|(c, key, _)| {
            *c == classes[a]
                && classes[a] != ItemClass::Neutral
                && match (key, &r) {
                    (Some(x), Some(y)) => x.eq_tol(y, 1e-12),
                    (None, None) => true,
                    _ => false,
                }
        });
        match slot {
            Some((_, _, items)) => items.push(a),
            None => merged.push((classes[a], r, vec![a])),
        }
    }
    let names = merged
        .iter()
        .map(|(_, _, items)| items.iter().map(|&a| problem.items()[a].clone()).collect::<Vec<_>>().join("+"));
    let utilities = (0..2)
        .map(|i| {
            merged
                .iter()
                .map(|(_, _, items)| {
                    items.iter().fold(S::zero(), |acc, &a| acc + problem.u(i, a).clone() * problem.w(a).clone())
                })
                .collect()
        })
        .collect();
    Problem::new(problem.agents().to_vec(), names.collect(), vec![S::one(); merged.len()], utilities)
}
