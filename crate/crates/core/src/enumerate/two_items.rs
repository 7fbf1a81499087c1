//! Two items. With two bads, sort agents by `r_i = u_ia / u_ib` (per unit of
//! endowment): the candidates are the cuts, where the first `i` agents share
//! `a` and the others share `b`, and the splits, where a single agent eats
//! from both. A good paired with a bad, or a neutral item paired with a bad,
//! has a single competitive profile.

use crate::error::{Error, Result};
use crate::model::{partition_items, Allocation, Division, ItemClass, Problem};
use crate::scalar::Scalar;

use super::{finish, negative_division, require_negative, EnumerationResult, CANDIDATE_TOL};

pub fn enumerate_two_items<S: Scalar>(problem: &Problem<S>) -> Result<EnumerationResult<S>> {
    if problem.m() != 2 {
        return Err(Error::Arity(format!("expected 2 items, found {}", problem.m())));
    }
    require_negative(problem)?;
    let classes = partition_items(problem).classes(2);
    let candidates = match (classes[0], classes[1]) {
        (ItemClass::Bad, ItemClass::Bad) => two_bads(problem),
        (ItemClass::Good, ItemClass::Bad) => vec![good_and_bad(problem, 0, 1)],
        (ItemClass::Bad, ItemClass::Good) => vec![good_and_bad(problem, 1, 0)],
        (ItemClass::Neutral, ItemClass::Bad) => vec![neutral_and_bad(problem, 0, 1)],
        (ItemClass::Bad, ItemClass::Neutral) => vec![neutral_and_bad(problem, 1, 0)],
        _ => return Err(Error::Unsupported("a negative problem needs a bad".into())),
    };
    Ok(finish(problem, candidates.into_iter().flatten().collect(), true))
}

/// Agents in increasing order of `r_i` (ties by index), with per-unit-endowment utilities.
pub(crate) fn sorted_ratios<S: Scalar>(problem: &Problem<S>) -> Vec<(usize, S, S, S)> {
    let mut agents: Vec<(usize, S, S, S)> = (0..problem.n())
        .map(|i| {
            let ua = problem.u(i, 0).clone() * problem.w(0).clone();
            let ub = problem.u(i, 1).clone() * problem.w(1).clone();
            let r = ua.clone() / ub.clone();
            (i, r, ua, ub)
        })
        .collect();
    agents.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal).then(x.0.cmp(&y.0)));
    agents
}

/// `i / (n - i)`, `None` standing for infinity.
fn bound<S: Scalar>(i: usize, n: usize) -> Option<S> {
    (i < n).then(|| S::from_int(i as i64) / S::from_int((n - i) as i64))
}

fn below<S: Scalar>(x: &S, limit: &Option<S>) -> bool {
    limit.as_ref().is_none_or(|l| x < l)
}

/// Division from per-unit shares `(x_i, y_i)` and per-unit prices.
fn lift<S: Scalar>(problem: &Problem<S>, unit_shares: &[(usize, S, S)], unit_price: (S, S)) -> Division<S> {
    let mut z = Allocation::zeros(problem.n(), 2);
    for (i, x, y) in unit_shares {
        z.shares[*i][0] = x.clone() * problem.w(0).clone();
        z.shares[*i][1] = y.clone() * problem.w(1).clone();
    }
    let price = vec![unit_price.0 / problem.w(0).clone(), unit_price.1 / problem.w(1).clone()];
    negative_division(z, price)
}

fn two_bads<S: Scalar>(problem: &Problem<S>) -> Vec<Option<Division<S>>> {
    let n = problem.n();
    let agents = sorted_ratios(problem);
    let ns = S::from_int(n as i64);
    let mut out = Vec::new();

    // Cut after position i: r_i <= i/(n-i) <= r_{i+1}.
    for i in 1..n {
        let q = bound::<S>(i, n).expect("finite");
        // Tolerant in float mode: KKT certification in `finish` has the last word.
        if agents[i - 1].1.le_tol(&q, CANDIDATE_TOL) && q.le_tol(&agents[i].1, CANDIDATE_TOL) {
            let (is, rest) = (S::from_int(i as i64), S::from_int((n - i) as i64));
            let shares: Vec<(usize, S, S)> = agents
                .iter()
                .enumerate()
                .map(|(pos, (agent, ..))| {
                    if pos < i {
                        (*agent, S::one() / is.clone(), S::zero())
                    } else {
                        (*agent, S::zero(), S::one() / rest.clone())
                    }
                })
                .collect();
            out.push(Some(lift(problem, &shares, (-is, -rest))));
        }
    }

    // Strict split at position i: (i-1)/(n-i+1) < r_i < i/(n-i).
    for i in 1..=n {
        let (agent, r, ua, ub) = &agents[i - 1];
        let lower = S::from_int(i as i64 - 1) / S::from_int((n - i + 1) as i64);
        if !(lower < *r && below(r, &bound::<S>(i, n))) {
            continue;
        }
        let before = S::from_int(i as i64 - 1);
        let after = S::from_int((n - i) as i64);
        let x =
            (S::from_int((n - i + 1) as i64) * ua.clone() - before.clone() * ub.clone()) / (ns.clone() * ua.clone());
        let y = (S::from_int(i as i64) * ub.clone() - after.clone() * ua.clone()) / (ns.clone() * ub.clone());
        let shares: Vec<(usize, S, S)> = agents
            .iter()
            .enumerate()
            .map(|(pos, (j, ..))| {
                if pos + 1 < i {
                    (*j, (S::one() - x.clone()) / before.clone(), S::zero())
                } else if pos + 1 > i {
                    (*j, S::zero(), (S::one() - y.clone()) / after.clone())
                } else {
                    (*agent, x.clone(), y.clone())
                }
            })
            .collect();
        let total = ua.clone() + ub.clone();
        let price = (-(ns.clone() * ua.clone()) / total.clone(), -(ns.clone() * ub.clone()) / total);
        out.push(Some(lift(problem, &shares, price)));
    }
    out
}

/// The agent with the highest `u_ig / |u_ib|` eats the whole good and the
/// bad is shared so that everyone spends exactly -1.
fn good_and_bad<S: Scalar>(problem: &Problem<S>, g: usize, b: usize) -> Option<Division<S>> {
    let n = problem.n();
    let mut best: Option<(usize, S)> = None;
    for i in 0..n {
        let ug = problem.u(i, g).clone();
        let ug = if ug.gt0() { ug } else { S::zero() };
        let rho = ug / problem.u(i, b).abs();
        if best.as_ref().is_none_or(|(_, r)| rho > *r) {
            best = Some((i, rho));
        }
    }
    let (star, rho) = best?;
    let slack = problem.w(b).clone() - rho.clone() * problem.w(g).clone();
    if !slack.gt0() {
        return None;
    }
    let q = S::from_int(n as i64) / slack;
    let mut z = Allocation::zeros(n, 2);
    for i in 0..n {
        z.shares[i][b] = S::one() / q.clone();
    }
    z.shares[star][g] = problem.w(g).clone();
    z.shares[star][b] = rho.clone() * problem.w(g).clone() + S::one() / q.clone();
    let mut price = vec![S::zero(); 2];
    price[g] = q.clone() * rho;
    price[b] = -q;
    Some(negative_division(z, price))
}

fn neutral_and_bad<S: Scalar>(problem: &Problem<S>, zero: usize, b: usize) -> Option<Division<S>> {
    let n = problem.n();
    let ns = S::from_int(n as i64);
    let mut z = Allocation::zeros(n, 2);
    for i in 0..n {
        z.shares[i][b] = problem.w(b).clone() / ns.clone();
    }
    let eater = (0..n).find(|&i| problem.u(i, zero).is_zero())?;
    z.shares[eater][zero] = problem.w(zero).clone();
    let mut price = vec![S::zero(); 2];
    price[b] = -ns / problem.w(b).clone();
    Some(negative_division(z, price))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    fn exact(rows: &[&[i64]]) -> Problem<Rational> {
        Problem::unit(rows.iter().map(|r| r.iter().map(|&v| rat(v, 1)).collect()).collect()).unwrap()
    }

    fn prop1_two_items() -> Problem<Rational> {
        exact(&[&[-1, -6], &[-1, -3], &[-2, -3], &[-3, -2], &[-3, -1], &[-6, -1]])
    }

    #[test]
    fn six_agents_give_eleven_profiles() {
        let p = prop1_two_items();
        let r = enumerate_two_items(&p).unwrap();
        assert_eq!(r.profiles.len(), 11);
        let table = vec![
            vec![rat(5, 12), rat(0, 1)],
            vec![rat(5, 12), rat(0, 1)],
            vec![rat(1, 6), rat(1, 6)],
            vec![rat(0, 1), rat(5, 18)],
            vec![rat(0, 1), rat(5, 18)],
            vec![rat(0, 1), rat(5, 18)],
        ];
        let k = r.divisions.iter().position(|d| d.allocation.shares == table).expect("split at agent 3");
        assert_eq!(r.divisions[k].price, vec![rat(-12, 5), rat(-18, 5)]);
        let cut = r.divisions.iter().find(|d| d.price == vec![rat(-2, 1), rat(-4, 1)]).expect("cut 2/3");
        assert_eq!(cut.allocation.shares[0], vec![rat(1, 2), rat(0, 1)]);
        assert_eq!(cut.allocation.shares[1], vec![rat(1, 2), rat(0, 1)]);
    }

    #[test]
    fn canonical_pair() {
        let r = enumerate_two_items(&exact(&[&[-1, -4], &[-4, -1]])).unwrap();
        let values: Vec<_> = r.profiles.iter().map(|p| p.values.clone()).collect();
        assert_eq!(
            values,
            vec![vec![rat(-5, 8), rat(-5, 2)], vec![rat(-1, 1), rat(-1, 1)], vec![rat(-5, 2), rat(-5, 8)]]
        );
        let one_split = &r.divisions[2];
        assert_eq!(one_split.allocation.shares[0], vec![rat(1, 1), rat(3, 8)]);
    }

    #[test]
    fn good_with_a_bad_has_one_profile() {
        let p = exact(&[&[1, -2], &[1, -3], &[-1, -2]]);
        let r = enumerate_two_items(&p).unwrap();
        assert_eq!(r.profiles.len(), 1);
        assert_eq!(r.divisions[0].allocation.shares[0][0], rat(1, 1));
        assert_eq!(r.divisions[0].allocation.shares[0][1], rat(2, 3));
        assert_eq!(r.divisions[0].price, vec![rat(3, 1), rat(-6, 1)]);
    }

    #[test]
    fn neutral_with_a_bad() {
        let p = exact(&[&[0, -1], &[-2, -1]]);
        let r = enumerate_two_items(&p).unwrap();
        assert_eq!(r.profiles.len(), 1);
        assert_eq!(r.divisions[0].price, vec![rat(0, 1), rat(-2, 1)]);
    }

    #[test]
    fn non_unit_endowments() {
        let p = Problem::from_rows(
            vec![vec![rat(-1, 1), rat(-4, 1)], vec![rat(-4, 1), rat(-1, 1)]],
            vec![rat(1, 9), rat(1, 1)],
        )
        .unwrap();
        let r = enumerate_two_items(&p).unwrap();
        assert_eq!(r.profiles.len(), 1);
        assert_eq!(r.profiles[0].values, vec![rat(-37, 18), rat(-37, 72)]);
    }
}
