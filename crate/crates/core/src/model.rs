//! Problems, allocations, divisions and the sign partitions of agents and items.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-item balance tolerance factor: `|sum_i z_ia - w_a| <= FEAS_TOL * max(1, w_a)`.
pub const FEAS_TOL: f64 = 1e-9;
/// Shares above `-NEG_CUTOFF` count as nonnegative (and are clamped to zero).
pub const NEG_CUTOFF: f64 = 1e-12;

/// A division problem with additive utilities: agents, items, endowment and
/// the matrix of marginal utilities (`utilities[i][a]` per unit of item `a`).
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<S = f64> {
    agents: Vec<String>,
    items: Vec<String>,
    endowment: Vec<S>,
    utilities: Vec<Vec<S>>,
}

pub fn default_agent_name(i: usize) -> String {
    (i + 1).to_string()
}

pub fn default_item_name(a: usize) -> String {
    if a < 26 {
        ((b'a' + a as u8) as char).to_string()
    } else {
        format!("x{}", a + 1)
    }
}

impl<S: Scalar> Problem<S> {
    pub fn new(agents: Vec<String>, items: Vec<String>, endowment: Vec<S>, utilities: Vec<Vec<S>>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidProblem("at least one agent is required".into()));
        }
        if items.is_empty() {
            return Err(Error::InvalidProblem("at least one item is required".into()));
        }
        if endowment.len() != items.len() {
            return Err(Error::Dimension(format!("{} items but {} endowment entries", items.len(), endowment.len())));
        }
        if utilities.len() != agents.len() {
            return Err(Error::Dimension(format!("{} agents but {} utility rows", agents.len(), utilities.len())));
        }
        for (i, row) in utilities.iter().enumerate() {
            if row.len() != items.len() {
                return Err(Error::Dimension(format!(
                    "utility row {i} has {} entries, expected {}",
                    row.len(),
                    items.len()
                )));
            }
            if row.iter().any(|u| !u.to_f64().is_finite()) {
                return Err(Error::InvalidProblem(format!("utility row {i} is not finite")));
            }
        }
        for (a, w) in endowment.iter().enumerate() {
            if !w.gt0() || !w.to_f64().is_finite() {
                return Err(Error::InvalidProblem(format!("endowment of item {} must be positive, got {w}", items[a])));
            }
        }
        Ok(Self { agents, items, endowment, utilities })
    }

    /// Problem with default names (agents `1..n`, items `a, b, ...`).
    pub fn from_rows(utilities: Vec<Vec<S>>, endowment: Vec<S>) -> Result<Self> {
        let n = utilities.len();
        let m = endowment.len();
        Self::new(
            (0..n).map(default_agent_name).collect(),
            (0..m).map(default_item_name).collect(),
            endowment,
            utilities,
        )
    }

    /// Problem with unit endowments and default names.
    pub fn unit(utilities: Vec<Vec<S>>) -> Result<Self> {
        let m = utilities.first().map_or(0, Vec::len);
        Self::from_rows(utilities, vec![S::one(); m])
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn m(&self) -> usize {
        self.items.len()
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn endowment(&self) -> &[S] {
        &self.endowment
    }

    pub fn utilities(&self) -> &[Vec<S>] {
        &self.utilities
    }

    pub fn u(&self, i: usize, a: usize) -> &S {
        &self.utilities[i][a]
    }

    pub fn w(&self, a: usize) -> &S {
        &self.endowment[a]
    }

    pub fn to_f64(&self) -> Problem<f64> {
        Problem {
            agents: self.agents.clone(),
            items: self.items.clone(),
            endowment: self.endowment.iter().map(Scalar::to_f64).collect(),
            utilities: self.utilities.iter().map(|row| row.iter().map(Scalar::to_f64).collect()).collect(),
        }
    }

    /// Same agents and items with a different utility matrix.
    pub fn with_utilities(&self, utilities: Vec<Vec<S>>) -> Result<Self> {
        Self::new(self.agents.clone(), self.items.clone(), self.endowment.clone(), utilities)
    }

    /// Same agents, items and utilities with a different endowment.
    pub fn with_endowment(&self, endowment: Vec<S>) -> Result<Self> {
        Self::new(self.agents.clone(), self.items.clone(), endowment, self.utilities.clone())
    }

    /// The endowment split equally: `w / n` for every agent.
    pub fn equal_split(&self) -> Allocation<S> {
        let n = S::from_int(self.n() as i64);
        let share: Vec<S> = self.endowment.iter().map(|w| w.clone() / n.clone()).collect();
        Allocation::new(vec![share; self.n()])
    }

    /// `u_i . v` for an arbitrary bundle `v`.
    pub fn value_of(&self, i: usize, bundle: &[S]) -> S {
        self.utilities[i].iter().zip(bundle).fold(S::zero(), |acc, (u, z)| acc + u.clone() * z.clone())
    }
}

impl Problem<f64> {
    /// Exact copy of a floating problem (every `f64` is a dyadic rational).
    pub fn to_exact(&self) -> Problem<crate::scalar::Rational> {
        let conv = |x: &f64| <crate::scalar::Rational as Scalar>::from_f64(*x).expect("finite");
        Problem {
            agents: self.agents.clone(),
            items: self.items.clone(),
            endowment: self.endowment.iter().map(conv).collect(),
            utilities: self.utilities.iter().map(|r| r.iter().map(conv).collect()).collect(),
        }
    }
}

/// Allocation matrix `shares[i][a]`, units of item `a` given to agent `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation<S = f64> {
    pub shares: Vec<Vec<S>>,
}

impl<S: Scalar> Allocation<S> {
    pub fn new(shares: Vec<Vec<S>>) -> Self {
        Self { shares }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { shares: vec![vec![S::zero(); m]; n] }
    }

    pub fn get(&self, i: usize, a: usize) -> &S {
        &self.shares[i][a]
    }

    pub fn to_f64(&self) -> Allocation<f64> {
        Allocation { shares: self.shares.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect() }
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.shares.len() != n || self.shares.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("allocation is not {n}x{m}")));
        }
        Ok(())
    }
}

/// Per-agent utilities `U_i = u_i . z_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile<S = f64> {
    pub values: Vec<S>,
}

impl<S: Scalar> UtilityProfile<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> UtilityProfile<f64> {
        UtilityProfile { values: self.values.iter().map(Scalar::to_f64).collect() }
    }

    /// Componentwise equality (`tol` relative in floating mode, exact otherwise).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| {
                if S::EXACT {
                    a == b
                } else {
                    (a.to_f64() - b.to_f64()).abs() <= tol
                }
            })
    }
}

/// Common individual budget of a competitive division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Budget {
    Negative,
    Null,
    Positive,
}

impl Budget {
    pub fn value(self) -> i64 {
        match self {
            Budget::Negative => -1,
            Budget::Null => 0,
            Budget::Positive => 1,
        }
    }
}

/// Allocation, price and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Division<S = f64> {
    pub allocation: Allocation<S>,
    pub price: Vec<S>,
    pub budget: Budget,
}

impl<S: Scalar> Division<S> {
    pub fn to_f64(&self) -> Division<f64> {
        Division {
            allocation: self.allocation.to_f64(),
            price: self.price.iter().map(Scalar::to_f64).collect(),
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ItemPartition {
    /// Collective goods: someone has `u_ia > 0`.
    pub a_plus: Vec<usize>,
    /// Collective bads: everyone has `u_ia < 0`.
    pub a_minus: Vec<usize>,
    /// Neutral items: `max_i u_ia = 0`.
    pub a_zero: Vec<usize>,
}

/// Sign class of a single item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ItemClass {
    Good,
    Bad,
    Neutral,
}

impl ItemPartition {
    pub fn class(&self, a: usize) -> ItemClass {
        if self.a_plus.contains(&a) {
            ItemClass::Good
        } else if self.a_minus.contains(&a) {
            ItemClass::Bad
        } else {
            ItemClass::Neutral
        }
    }

    pub fn classes(&self, m: usize) -> Vec<ItemClass> {
        (0..m).map(|a| self.class(a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AgentPartition {
    /// Attracted agents: some share gives strictly positive utility.
    pub n_plus: Vec<usize>,
    /// Repulsed agents.
    pub n_minus: Vec<usize>,
}

impl AgentPartition {
    pub fn is_attracted(&self, i: usize) -> bool {
        self.n_plus.contains(&i)
    }
}

pub fn utility_profile<S: Scalar>(problem: &Problem<S>, allocation: &Allocation<S>) -> Result<UtilityProfile<S>> {
    allocation.check_dims(problem.n(), problem.m())?;
    Ok(UtilityProfile { values: (0..problem.n()).map(|i| problem.value_of(i, &allocation.shares[i])).collect() })
}

pub fn partition_items<S: Scalar>(problem: &Problem<S>) -> ItemPartition {
    let mut out = ItemPartition::default();
    for a in 0..problem.m() {
        let column = (0..problem.n()).map(|i| problem.u(i, a));
        if column.clone().any(|u| u.gt0()) {
            out.a_plus.push(a);
        } else if column.clone().all(|u| u.lt0()) {
            out.a_minus.push(a);
        } else {
            out.a_zero.push(a);
        }
    }
    out
}

pub fn partition_agents<S: Scalar>(problem: &Problem<S>) -> AgentPartition {
    let mut out = AgentPartition::default();
    for i in 0..problem.n() {
        if problem.utilities()[i].iter().any(|u| u.gt0()) {
            out.n_plus.push(i);
        } else {
            out.n_minus.push(i);
        }
    }
    out
}

/// Nonnegativity (down to `-NEG_CUTOFF`) and per-item balance within `tol * max(1, w_a)`.
pub fn check_feasible<S: Scalar>(problem: &Problem<S>, allocation: &Allocation<S>, tol: f64) -> bool {
    if allocation.check_dims(problem.n(), problem.m()).is_err() {
        return false;
    }
    for a in 0..problem.m() {
        let mut total = S::zero();
        for i in 0..problem.n() {
            let z = allocation.get(i, a);
            let negative = if S::EXACT { z.lt0() } else { z.to_f64() < -NEG_CUTOFF };
            if negative {
                return false;
            }
            total = total + z.clone();
        }
        let w = problem.w(a);
        let ok = if S::EXACT { &total == w } else { (total.to_f64() - w.to_f64()).abs() <= tol * 1f64.max(w.to_f64()) };
        if !ok {
            return false;
        }
    }
    true
}

/// Clamps tiny negative floating shares (above `-NEG_CUTOFF`) to zero.
pub fn clamp_allocation(allocation: &mut Allocation<f64>) {
    for row in &mut allocation.shares {
        for z in row {
            if *z < 0.0 && *z >= -NEG_CUTOFF {
                *z = 0.0;
            }
        }
    }
}
