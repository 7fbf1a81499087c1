//! Positive / negative / null classification of a problem.
//!
//! A problem is positive when some feasible allocation gives every attracted
//! agent strictly positive utility while repulsed agents stay at zero, null
//! when the zero profile is the best such outcome, and negative otherwise.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::{LpSpec, Relation};
use crate::model::{partition_agents, Allocation, Problem};
use crate::scalar::Scalar;

/// Threshold on the normalized margin separating the three kinds.
pub const CLASSIFY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Positive,
    Negative,
    Null,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Positive => "Positive",
            Kind::Negative => "Negative",
            Kind::Null => "Null",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" => Ok(Kind::Positive),
            "negative" => Ok(Kind::Negative),
            "null" => Ok(Kind::Null),
            _ => Err(crate::error::Error::Parse(format!("unknown classification {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub kind: Kind,
    /// Feasible allocation attaining the margin.
    pub witness: Allocation,
    /// Optimal value of the max-min program on row-normalized utilities,
    /// snapped to zero inside the null band.
    pub margin: f64,
}

/// Rows scaled to `max_a |u_ia| = 1`; all-zero rows are left alone.
pub(crate) fn normalized_rows(problem: &Problem<f64>) -> Vec<Vec<f64>> {
    problem
        .utilities()
        .iter()
        .map(|row| {
            let scale = row.iter().fold(0.0f64, |acc, u| acc.max(u.abs()));
            if scale > 0.0 {
                row.iter().map(|u| u / scale).collect()
            } else {
                row.clone()
            }
        })
        .collect()
}

pub fn classify<S: Scalar>(problem: &Problem<S>) -> Result<Classification> {
    let problem = problem.to_f64();
    let (n, m) = (problem.n(), problem.m());
    let agents = partition_agents(&problem);
    let rows = normalized_rows(&problem);

    if agents.n_plus.is_empty() {
        let all_negative = (0..m).any(|a| (0..n).all(|i| problem.u(i, a) < &0.0));
        if !all_negative {
            let mut witness = Allocation::zeros(n, m);
            for a in 0..m {
                let eater = (0..n).find(|&i| *problem.u(i, a) == 0.0).expect("zero consumer");
                witness.shares[eater][a] = *problem.w(a);
            }
            return Ok(Classification { kind: Kind::Null, witness, margin: 0.0 });
        }
        let (witness, t) = max_min(&problem, &rows, &(0..n).collect::<Vec<_>>(), &[])?;
        return Ok(Classification { kind: Kind::Negative, witness, margin: t.min(-CLASSIFY_EPS) });
    }

    let (witness, t) = max_min(&problem, &rows, &agents.n_plus, &agents.n_minus)?;
    let (kind, margin) = if t > CLASSIFY_EPS {
        (Kind::Positive, t)
    } else if t < -CLASSIFY_EPS {
        (Kind::Negative, t)
    } else {
        (Kind::Null, 0.0)
    };
    Ok(Classification { kind, witness, margin })
}

/// max t s.t. z feasible, `rows_i . z_i >= t` on `counted`, and zero shares of
/// disliked items for the `pinned` agents.
fn max_min(
    problem: &Problem<f64>,
    rows: &[Vec<f64>],
    counted: &[usize],
    pinned: &[usize],
) -> Result<(Allocation, f64)> {
    let (n, m) = (problem.n(), problem.m());
    let var = |i: usize, a: usize| i * m + a;
    let t = n * m;
    let mut objective = vec![0.0; n * m + 1];
    objective[t] = 1.0;
    let mut lp = LpSpec::maximize(objective);
    lp.free(t);
    for a in 0..m {
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (var(i, a), 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, *problem.w(a));
    }
    for &i in counted {
        let mut terms: Vec<(usize, f64)> =
            (0..m).filter(|&a| rows[i][a] != 0.0).map(|a| (var(i, a), rows[i][a])).collect();
        terms.push((t, -1.0));
        lp.constrain_sparse(&terms, Relation::Ge, 0.0);
    }
    for &i in pinned {
        for a in 0..m {
            if *problem.u(i, a) < 0.0 {
                lp.bounds(var(i, a), Some(0.0), Some(0.0));
            }
        }
    }
    let (x, value) = lp.solve()?.optimal()?;
    let mut witness = Allocation::zeros(n, m);
    for i in 0..n {
        for a in 0..m {
            witness.shares[i][a] = x[var(i, a)].max(0.0);
        }
    }
    Ok((witness, value))
}
