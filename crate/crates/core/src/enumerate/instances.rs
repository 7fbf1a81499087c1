//! Parametric families of negative problems with many competitive profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// `n != m` bads: specialists who dislike "their" bad least, plus indifferent agents or shared bads.
    General,
    /// Two agents with powers-of-two utilities: `2m - 1` profiles.
    TwoAgents,
    /// Two bads with a ladder of ratios: `2n - 1` profiles.
    TwoItems,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::General),
            "two_agents" | "two-agents" => Ok(Self::TwoAgents),
            "two_items" | "two-items" => Ok(Self::TwoItems),
            other => Err(Error::Parse(format!("unknown instance kind {other:?}"))),
        }
    }
}

pub fn generate_lower_bound_instance(kind: InstanceKind, n: usize, m: usize) -> Result<Problem> {
    if n == 0 || m == 0 {
        return Err(Error::Unsupported("need at least one agent and one item".into()));
    }
    let rows = match kind {
        InstanceKind::General => general(n, m)?,
        InstanceKind::TwoAgents => {
            if n != 2 || m < 2 {
                return Err(Error::Unsupported(format!("two_agents needs n = 2 and m >= 2, got {n}x{m}")));
            }
            if m > 60 {
                return Err(Error::Unsupported("utilities overflow beyond 60 items".into()));
            }
            two_agents(m)
        }
        InstanceKind::TwoItems => {
            if m != 2 {
                return Err(Error::Unsupported(format!("two_items needs m = 2, got {n}x{m}")));
            }
            two_items(n)
        }
    };
    Problem::unit(rows)
}

fn general(n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    if n == m {
        return Err(Error::Unsupported("the general family needs n != m".into()));
    }
    let rows = if n > m {
        (0..n).map(|i| (0..m).map(|a| if i >= m || a == i { -1.0 } else { -3.0 }).collect()).collect()
    } else {
        (0..n).map(|i| (0..m).map(|a| if a == i || a >= n { -1.0 } else { -3.0 }).collect()).collect()
    };
    Ok(rows)
}

fn two_agents(m: usize) -> Vec<Vec<f64>> {
    let pow = |e: i64| 2f64.powi(e.max(0) as i32);
    let top = pow(m as i64 - 2) + 1.0;
    let first = (1..=m).map(|k| if k == m { -top } else { -pow(k as i64 - 2) }).collect();
    let second = (1..=m).map(|k| if k == 1 { -top } else { -pow(m as i64 - 1 - k as i64) }).collect();
    vec![first, second]
}

/// Agent `i` (1-based) has ratio `(2i-1)/(2n-2i+1)`, strictly between the
/// consecutive cut thresholds `(i-1)/(n-i+1)` and `i/(n-i)`.
fn two_items(n: usize) -> Vec<Vec<f64>> {
    (1..=n).map(|i| vec![-((2 * i - 1) as f64), -((2 * (n - i) + 1) as f64)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_six_by_five_is_the_specialist_table() {
        let p = generate_lower_bound_instance(InstanceKind::General, 6, 5).unwrap();
        assert_eq!(p.utilities()[0], vec![-1.0, -3.0, -3.0, -3.0, -3.0]);
        assert_eq!(p.utilities()[4], vec![-3.0, -3.0, -3.0, -3.0, -1.0]);
        assert_eq!(p.utilities()[5], vec![-1.0; 5]);
    }

    #[test]
    fn general_wide_shares_the_extra_bads() {
        let p = generate_lower_bound_instance(InstanceKind::General, 2, 4).unwrap();
        assert_eq!(p.utilities()[0], vec![-1.0, -3.0, -1.0, -1.0]);
        assert_eq!(p.utilities()[1], vec![-3.0, -1.0, -1.0, -1.0]);
        assert!(generate_lower_bound_instance(InstanceKind::General, 3, 3).is_err());
    }

    #[test]
    fn two_agents_six_items() {
        let p = generate_lower_bound_instance(InstanceKind::TwoAgents, 2, 6).unwrap();
        assert_eq!(p.utilities()[0], vec![-1.0, -1.0, -2.0, -4.0, -8.0, -17.0]);
        assert_eq!(p.utilities()[1], vec![-17.0, -8.0, -4.0, -2.0, -1.0, -1.0]);
    }

    #[test]
    fn two_agents_four_items() {
        let p = generate_lower_bound_instance(InstanceKind::TwoAgents, 2, 4).unwrap();
        assert_eq!(p.utilities()[0], vec![-1.0, -1.0, -2.0, -5.0]);
        assert_eq!(p.utilities()[1], vec![-5.0, -2.0, -1.0, -1.0]);
    }

    #[test]
    fn kind_and_size_checks() {
        assert!(generate_lower_bound_instance(InstanceKind::TwoAgents, 3, 4).is_err());
        assert!(generate_lower_bound_instance(InstanceKind::TwoItems, 3, 4).is_err());
        assert_eq!("two-items".parse::<InstanceKind>().unwrap(), InstanceKind::TwoItems);
    }
}
