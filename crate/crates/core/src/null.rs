//! The competitive divisions of a null problem: any allocation with the zero
//! profile, priced by a positive separating vector `lambda` over the
//! attracted agents.

use serde::Serialize;

use crate::classify::{classify, Kind};
use crate::error::{Error, Result};
use crate::lp::{LpSpec, Relation};
use crate::model::{partition_agents, partition_items, Allocation, Budget, Division, ItemClass, Problem};

/// Optimal value of the separation LP accepted as zero.
const SEPARATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct NullSolution {
    pub division: Division,
    /// Per agent; zero for repulsed agents, at least 1 (minimum exactly 1) otherwise.
    pub lambda: Vec<f64>,
}

pub fn solve_null(problem: &Problem) -> Result<NullSolution> {
    let kind = classify(problem)?.kind;
    if kind != Kind::Null {
        return Err(Error::ClassificationMismatch { expected: "null".into(), found: kind });
    }
    let allocation = zero_profile_allocation(problem)?;
    let (lambda, price) = separation(problem)?;
    Ok(NullSolution { division: Division { allocation, price, budget: Budget::Null }, lambda })
}

/// Feasible allocation with every utility zero, repulsed agents eating only
/// neutral items they are indifferent to.
fn zero_profile_allocation(problem: &Problem) -> Result<Allocation> {
    let (n, m) = (problem.n(), problem.m());
    let agents = partition_agents(problem);
    let classes = partition_items(problem).classes(m);
    let allowed =
        |i: usize, a: usize| agents.is_attracted(i) || (classes[a] == ItemClass::Neutral && *problem.u(i, a) == 0.0);
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..m).map(move |a| (i, a))).filter(|&(i, a)| allowed(i, a)).collect();
    let mut lp = LpSpec::maximize(vec![0.0; pairs.len()]);
    for a in 0..m {
        let terms: Vec<(usize, f64)> =
            pairs.iter().enumerate().filter(|(_, p)| p.1 == a).map(|(v, _)| (v, 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, *problem.w(a));
    }
    for &i in &agents.n_plus {
        let scale = problem.utilities()[i].iter().fold(0.0f64, |acc, u| acc.max(u.abs()));
        let terms: Vec<(usize, f64)> = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0 == i)
            .map(|(v, &(_, a))| (v, problem.u(i, a) / scale))
            .collect();
        lp.constrain_sparse(&terms, Relation::Eq, 0.0);
    }
    let (x, _) = lp.solve()?.optimal().map_err(|e| Error::Lp(format!("no zero-profile allocation: {e}")))?;
    let mut z = Allocation::zeros(n, m);
    for (v, &(i, a)) in pairs.iter().enumerate() {
        z.shares[i][a] = x[v].max(0.0);
    }
    Ok(z)
}

/// `min sum_a w_a s_a` over `s_a >= lambda_i u_ia`, `lambda_i >= 1` (and
/// `s_a >= 0` on neutral items); a zero
/// optimum certifies the problem is null and yields `p_a = max_i lambda_i u_ia`.
fn separation(problem: &Problem) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (problem.n(), problem.m());
    let agents = partition_agents(problem);
    let classes = partition_items(problem).classes(m);
    let k = agents.n_plus.len();
    if k == 0 {
        return Ok((vec![0.0; n], vec![0.0; m]));
    }
    // Variables: lambda (k), then s (m).
    let mut objective = vec![0.0; k + m];
    for a in 0..m {
        objective[k + a] = *problem.w(a);
    }
    let mut lp = LpSpec::minimize(objective);
    // Neutral items are free, so their price is pinned at zero from below.
    for a in (0..m).filter(|&a| classes[a] != ItemClass::Neutral) {
        lp.free(k + a);
    }
    for v in 0..k {
        lp.bounds(v, Some(1.0), None);
    }
    for (v, &i) in agents.n_plus.iter().enumerate() {
        for a in 0..m {
            lp.constrain_sparse(&[(k + a, 1.0), (v, -problem.u(i, a))], Relation::Ge, 0.0);
        }
    }
    let (x, value) = lp.solve()?.optimal()?;
    let total: f64 = problem.endowment().iter().sum();
    if value.abs() > SEPARATION_TOL * total.max(1.0) {
        return Err(Error::Lp(format!("separation optimum {value:e} is not zero")));
    }
    let least = x[..k].iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lambda = vec![0.0; n];
    for (v, &i) in agents.n_plus.iter().enumerate() {
        lambda[i] = x[v] / least;
    }
    let price = (0..m)
        .map(|a| {
            if classes[a] == ItemClass::Neutral {
                return 0.0;
            }
            agents.n_plus.iter().map(|&i| lambda[i] * problem.u(i, a)).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok((lambda, price))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::{kkt_verify, kkt_verify_null, KKT_TOL};
    use crate::model::utility_profile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_two() {
        let p = Problem::unit(vec![vec![-1.0, -3.0, 2.0], vec![-2.0, -1.0, 2.0]]).unwrap();
        let s = solve_null(&p).unwrap();
        let z = &s.division.allocation;
        for (x, y) in z.shares[0].iter().zip([1.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
        for (x, y) in s.lambda.iter().zip([1.0, 1.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
        for (x, y) in s.division.price.iter().zip([-1.0, -1.0, 2.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
        assert!(kkt_verify_null(&p, &s.division, &s.lambda, KKT_TOL).passed);
        assert!(kkt_verify(&p, &s.division, KKT_TOL).passed);
    }

    #[test]
    fn neutral_bad_for_the_attracted_agents() {
        let p =
            Problem::unit(vec![vec![-3.0, -9.0, 6.0, -1.0], vec![-8.0, -4.0, 8.0, -6.0], vec![-4.0, -1.0, -2.0, 0.0]])
                .unwrap();
        let s = solve_null(&p).unwrap();
        assert_eq!(s.division.price[3], 0.0);
        assert!(kkt_verify_null(&p, &s.division, &s.lambda, KKT_TOL).passed);
    }

    #[test]
    fn worthless_manna() {
        let p = Problem::unit(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let s = solve_null(&p).unwrap();
        assert_eq!(s.division.price, vec![0.0, 0.0]);
        assert!(kkt_verify(&p, &s.division, KKT_TOL).passed);
    }

    #[test]
    fn everyone_repulsed_eats_own_zero() {
        let p = Problem::unit(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let s = solve_null(&p).unwrap();
        assert_eq!(s.division.allocation.shares, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(s.division.price, vec![0.0, 0.0]);
        let u = utility_profile(&p, &s.division.allocation).unwrap();
        assert_eq!(u.values, vec![0.0, 0.0]);
    }

    #[test]
    fn other_kinds_are_rejected() {
        let p = Problem::unit(vec![vec![1.0]]).unwrap();
        assert!(matches!(solve_null(&p), Err(Error::ClassificationMismatch { .. })));
    }
}
