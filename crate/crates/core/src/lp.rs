//! Dense two-phase simplex with Bland's rule.
//!
//! The programs built by this crate are small (a few hundred columns at
//! most), so a dense tableau is simpler and fast enough. Duals are read off
//! the reduced costs of the columns that formed the initial identity basis.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const PHASE1_EPS: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
struct Constraint {
    coef: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// A linear program over `n` variables. Variables default to `x >= 0`.
#[derive(Debug, Clone)]
pub struct LpSpec {
    sense: Sense,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Vec<f64>,
    pub value: f64,
    /// One multiplier per user constraint, in the sign convention of the
    /// objective sense (nonnegative on binding `<=` rows when maximizing).
    pub dual: Vec<f64>,
    /// Dual objective, including the contribution of variable bounds.
    pub dual_value: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self { status, point: Vec::new(), value: f64::NAN, dual: Vec::new(), dual_value: f64::NAN }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// The optimal point and value, or an error describing the status.
    pub fn optimal(self) -> Result<(Vec<f64>, f64)> {
        match self.status {
            LpStatus::Optimal => Ok((self.point, self.value)),
            LpStatus::Infeasible => Err(Error::Lp("infeasible".into())),
            LpStatus::Unbounded => Err(Error::Lp("unbounded".into())),
        }
    }
}

impl LpSpec {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense, objective, constraints: Vec::new(), lower: vec![Some(0.0); n], upper: vec![None; n] }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    /// Replaces the objective, keeping constraints and bounds (for staged solves).
    pub fn set_objective(&mut self, sense: Sense, objective: Vec<f64>) -> &mut Self {
        assert_eq!(objective.len(), self.num_vars(), "objective length");
        self.sense = sense;
        self.objective = objective;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constrain(&mut self, coef: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coef, rel, rhs });
        self
    }

    /// Adds a constraint from `(index, coefficient)` pairs; repeated indices add up.
    pub fn constrain_sparse(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) -> &mut Self {
        let mut coef = vec![0.0; self.num_vars()];
        for &(j, c) in terms {
            coef[j] += c;
        }
        self.constrain(coef, rel, rhs)
    }

    pub fn bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.bounds(var, None, None)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if !self.objective.iter().all(|c| c.is_finite()) {
            return Err(Error::Lp("objective has a non-finite coefficient".into()));
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coef.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {r} has {} coefficients, expected {n}",
                    c.coef.len()
                )));
            }
            if !c.rhs.is_finite() || !c.coef.iter().all(|v| v.is_finite()) {
                return Err(Error::Lp(format!("constraint {r} is not finite")));
            }
        }
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.lower[j], self.upper[j]) {
                if !(l.is_finite() && u.is_finite()) {
                    return Err(Error::Lp(format!("variable {j} has non-finite bounds")));
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        Standard::build(self).solve(self)
    }
}

/// Shorthand for [`LpSpec::solve`].
pub fn solve_lp(spec: &LpSpec) -> Result<LpSolution> {
    spec.solve()
}

/// How a user variable maps to nonnegative internal columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = shift + col`
    Shifted { col: usize, shift: f64 },
    /// `x = shift - col` (only an upper bound)
    Mirrored { col: usize, shift: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

/// The problem rewritten as `min c.x, A x (rel) b, x >= 0, b >= 0`.
struct Standard {
    map: Vec<VarMap>,
    cols: usize,
    cost: Vec<f64>,
    constant: f64,
    rows: Vec<Vec<f64>>,
    rel: Vec<Relation>,
    rhs: Vec<f64>,
    /// `-1` where the row was negated to make the right-hand side nonnegative.
    flip: Vec<f64>,
    /// Number of user constraints (the remaining rows are upper bounds).
    user_rows: usize,
}

impl Standard {
    fn build(spec: &LpSpec) -> Self {
        let n = spec.num_vars();
        let sign = match spec.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let mut map = Vec::with_capacity(n);
        let mut cols = 0;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let entry = match (spec.lower[j], spec.upper[j]) {
                (Some(l), u) => {
                    let col = cols;
                    cols += 1;
                    if let Some(u) = u {
                        bound_rows.push((col, u - l));
                    }
                    VarMap::Shifted { col, shift: l }
                }
                (None, Some(u)) => {
                    let col = cols;
                    cols += 1;
                    VarMap::Mirrored { col, shift: u }
                }
                (None, None) => {
                    let pos = cols;
                    cols += 2;
                    VarMap::Split { pos, neg: pos + 1 }
                }
            };
            map.push(entry);
        }

        let mut cost = vec![0.0; cols];
        let mut constant = 0.0;
        for (j, m) in map.iter().enumerate() {
            let c = sign * spec.objective[j];
            match *m {
                VarMap::Shifted { col, shift } => {
                    cost[col] += c;
                    constant += c * shift;
                }
                VarMap::Mirrored { col, shift } => {
                    cost[col] -= c;
                    constant += c * shift;
                }
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut rows = Vec::new();
        let mut rel = Vec::new();
        let mut rhs = Vec::new();
        for c in &spec.constraints {
            let mut row = vec![0.0; cols];
            let mut b = c.rhs;
            for (j, m) in map.iter().enumerate() {
                let a = c.coef[j];
                if a == 0.0 {
                    continue;
                }
                match *m {
                    VarMap::Shifted { col, shift } => {
                        row[col] += a;
                        b -= a * shift;
                    }
                    VarMap::Mirrored { col, shift } => {
                        row[col] -= a;
                        b -= a * shift;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += a;
                        row[neg] -= a;
                    }
                }
            }
            rows.push(row);
            rel.push(c.rel);
            rhs.push(b);
        }
        let user_rows = rows.len();
        for (col, cap) in bound_rows {
            let mut row = vec![0.0; cols];
            row[col] = 1.0;
            rows.push(row);
            rel.push(Relation::Le);
            rhs.push(cap);
        }

        let mut flip = vec![1.0; rows.len()];
        for r in 0..rows.len() {
            if rhs[r] < 0.0 {
                flip[r] = -1.0;
                rhs[r] = -rhs[r];
                for v in &mut rows[r] {
                    *v = -*v;
                }
                rel[r] = match rel[r] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        Self { map, cols, cost, constant, rows, rel, rhs, flip, user_rows }
    }

    fn solve(self, spec: &LpSpec) -> Result<LpSolution> {
        let m = self.rows.len();
        // Column layout: structural | slack/surplus | artificial | rhs.
        let n_slack = self.rel.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = self.rel.iter().filter(|r| **r != Relation::Le).count();
        let slack0 = self.cols;
        let art0 = slack0 + n_slack;
        let width = art0 + n_art;
        let mut tab = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0; m];
        // Column holding B^{-1} e_r for each row r (initial identity column).
        let mut unit_col = vec![0; m];
        let (mut s, mut a) = (slack0, art0);
        for r in 0..m {
            tab[r][..self.cols].copy_from_slice(&self.rows[r]);
            tab[r][width] = self.rhs[r];
            match self.rel[r] {
                Relation::Le => {
                    tab[r][s] = 1.0;
                    basis[r] = s;
                    unit_col[r] = s;
                    s += 1;
                }
                Relation::Ge => {
                    tab[r][s] = -1.0;
                    tab[r][a] = 1.0;
                    basis[r] = a;
                    unit_col[r] = a;
                    s += 1;
                    a += 1;
                }
                Relation::Eq => {
                    tab[r][a] = 1.0;
                    basis[r] = a;
                    unit_col[r] = a;
                    a += 1;
                }
            }
        }

        let mut t = Tableau { tab, basis, width, active: vec![true; m], pivots: 0 };

        if n_art > 0 {
            let mut c1 = vec![0.0; width];
            for v in c1.iter_mut().skip(art0) {
                *v = 1.0;
            }
            let mut d = t.reduced_costs(&c1);
            if t.run(&mut d, width)? == LpStatus::Unbounded {
                return Err(Error::Lp("phase one reported unbounded".into()));
            }
            let scale = 1f64.max(self.rhs.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
            if -d[width] > PHASE1_EPS * scale {
                return Ok(LpSolution::without_point(LpStatus::Infeasible));
            }
            // Drive artificials out of the basis, dropping redundant rows.
            for r in 0..m {
                if t.basis[r] < art0 {
                    continue;
                }
                let entering = (0..art0).find(|&j| t.tab[r][j].abs() > PIVOT_EPS);
                match entering {
                    Some(j) => t.pivot(r, j, &mut d),
                    None => t.active[r] = false,
                }
            }
        }

        let mut c2 = vec![0.0; width];
        c2[..self.cols].copy_from_slice(&self.cost);
        let mut d = t.reduced_costs(&c2);
        if t.run(&mut d, art0)? == LpStatus::Unbounded {
            return Ok(LpSolution::without_point(LpStatus::Unbounded));
        }

        let mut internal = vec![0.0; self.cols];
        for r in 0..m {
            if t.active[r] && t.basis[r] < self.cols {
                internal[t.basis[r]] = t.tab[r][width];
            }
        }
        let point: Vec<f64> = self
            .map
            .iter()
            .map(|m| match *m {
                VarMap::Shifted { col, shift } => shift + internal[col],
                VarMap::Mirrored { col, shift } => shift - internal[col],
                VarMap::Split { pos, neg } => internal[pos] - internal[neg],
            })
            .collect();
        let value: f64 = point.iter().zip(&spec.objective).map(|(x, c)| x * c).sum();

        // y_r = c_col - d_col for the identity column of row r, and both slack
        // and artificial columns cost nothing in phase two.
        let sign = match spec.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let y: Vec<f64> =
            (0..m).map(|r| if t.active[r] { -d[unit_col[r]] * self.flip[r] * sign } else { 0.0 }).collect();
        let raw_rhs: Vec<f64> = (0..m).map(|r| self.rhs[r] * self.flip[r]).collect();
        let dual_value = y.iter().zip(&raw_rhs).map(|(y, b)| y * b).sum::<f64>() + sign * self.constant;
        Ok(LpSolution { status: LpStatus::Optimal, point, value, dual: y[..self.user_rows].to_vec(), dual_value })
    }
}

struct Tableau {
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    active: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    /// Reduced-cost row for cost vector `c`; the last entry is minus the objective.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        d.push(0.0);
        for (r, row) in self.tab.iter().enumerate() {
            if !self.active[r] {
                continue;
            }
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for (dj, v) in d.iter_mut().zip(row) {
                    *dj -= cb * v;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        self.pivots += 1;
        let pv = self.tab[r][j];
        for v in &mut self.tab[r] {
            *v /= pv;
        }
        self.tab[r][j] = 1.0;
        let prow = self.tab[r].clone();
        for (k, row) in self.tab.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for (v, p) in d.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            d[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving basic variable on ties.
    fn run(&mut self, d: &mut [f64], allowed: usize) -> Result<LpStatus> {
        let w = self.width;
        loop {
            let Some(j) = (0..allowed).find(|&j| d[j] < -COST_EPS) else {
                return Ok(LpStatus::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.tab.len() {
                if !self.active[r] {
                    continue;
                }
                let a = self.tab[r][j];
                if a > PIVOT_EPS {
                    let ratio = self.tab[r][w] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((r0, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[r] < self.basis[r0]) {
                                Some((r, ratio))
                            } else {
                                Some((r0, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(r, j, d);
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Lp(format!("no termination after {MAX_PIVOTS} pivots")));
            }
            for row in &mut self.tab {
                if row[w] < 0.0 && row[w] > -1e-11 {
                    row[w] = 0.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-9 * 1f64.max(b.abs()), "{a} != {b}");
    }

    #[test]
    fn bounded_maximum() {
        let mut lp = LpSpec::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 3.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.value, 3.0);
        assert_close(sol.dual[0], 1.0);
    }

    #[test]
    fn infeasible_program() {
        let mut lp = LpSpec::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, -1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_program() {
        let mut lp = LpSpec::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_program_with_duals() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut lp = LpSpec::maximize(vec![3.0, 5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0).constrain(vec![0.0, 2.0], Relation::Le, 12.0).constrain(
            vec![3.0, 2.0],
            Relation::Le,
            18.0,
        );
        let sol = lp.solve().unwrap();
        assert_close(sol.value, 36.0);
        assert_close(sol.point[0], 2.0);
        assert_close(sol.point[1], 6.0);
        assert_close(sol.dual[0], 0.0);
        assert_close(sol.dual[1], 1.5);
        assert_close(sol.dual[2], 1.0);
        assert_close(sol.dual_value, 36.0);
    }

    #[test]
    fn equality_and_free_variables() {
        // min x + y with x - y = 1, x free, y in [-2, 5] -> x = -1, y = -2
        let mut lp = LpSpec::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Eq, 1.0);
        lp.free(0).bounds(1, Some(-2.0), Some(5.0));
        let sol = lp.solve().unwrap();
        assert_close(sol.value, -3.0);
        assert_close(sol.point[0], -1.0);
        assert_close(sol.point[1], -2.0);
        assert_close(sol.dual_value, sol.value);
    }

    #[test]
    fn upper_bound_only_variable() {
        // max x with x <= 2 as a bound and no lower bound
        let mut lp = LpSpec::maximize(vec![1.0]);
        lp.bounds(0, None, Some(2.0));
        let sol = lp.solve().unwrap();
        assert_close(sol.value, 2.0);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LpSpec::maximize(vec![1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 1.0).constrain(vec![2.0, 2.0], Relation::Eq, 2.0);
        let sol = lp.solve().unwrap();
        assert_close(sol.value, 2.0);
        assert_close(sol.dual_value, 2.0);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let mut lp = LpSpec::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = lp.solve().unwrap();
        assert_close(sol.value, -0.05);
    }

    #[test]
    fn ge_rows_and_negative_rhs() {
        // min 2x + 3y, x + y >= 4, x - y >= -2, x <= 3
        let mut lp = LpSpec::minimize(vec![2.0, 3.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 4.0).constrain(vec![1.0, -1.0], Relation::Ge, -2.0).constrain(
            vec![1.0, 0.0],
            Relation::Le,
            3.0,
        );
        let sol = lp.solve().unwrap();
        assert_close(sol.value, 9.0);
        assert_close(sol.dual_value, 9.0);
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LpSpec::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Dimension(_))));
    }

    fn random_program(sense_max: bool, c: Vec<f64>, rows: Vec<(Vec<f64>, u8, f64)>) -> LpSpec {
        let mut lp = if sense_max { LpSpec::maximize(c) } else { LpSpec::minimize(c) };
        for (coef, rel, rhs) in rows {
            let rel = match rel % 3 {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            lp.constrain(coef, rel, rhs);
        }
        for j in 0..lp.num_vars() {
            lp.bounds(j, Some(-1.0), Some(4.0));
        }
        lp
    }

    proptest! {
        #[test]
        fn strong_duality_and_feasibility(
            sense_max in any::<bool>(),
            c in prop::collection::vec(-5i32..=5, 4),
            rows in prop::collection::vec((prop::collection::vec(-4i32..=4, 4), 0u8..3, -6i32..=6), 1..5),
        ) {
            let c: Vec<f64> = c.into_iter().map(f64::from).collect();
            let rows: Vec<(Vec<f64>, u8, f64)> = rows
                .into_iter()
                .map(|(r, k, b)| (r.into_iter().map(f64::from).collect(), k, f64::from(b)))
                .collect();
            let lp = random_program(sense_max, c, rows.clone());
            let sol = lp.solve().unwrap();
            if sol.status == LpStatus::Optimal {
                prop_assert!((sol.value - sol.dual_value).abs() <= 1e-7 * 1f64.max(sol.value.abs()));
                for (coef, rel, rhs) in &rows {
                    let lhs: f64 = coef.iter().zip(&sol.point).map(|(a, x)| a * x).sum();
                    match rel % 3 {
                        0 => prop_assert!(lhs <= rhs + 1e-8),
                        1 => prop_assert!(lhs >= rhs - 1e-8),
                        _ => prop_assert!((lhs - rhs).abs() <= 1e-8),
                    }
                }
                for x in &sol.point {
                    prop_assert!(*x >= -1.0 - 1e-8 && *x <= 4.0 + 1e-8);
                }
                let mut reversed = rows.clone();
                reversed.reverse();
                let other = random_program(sense_max, lp.objective.clone(), reversed).solve().unwrap();
                prop_assert_eq!(other.status, LpStatus::Optimal);
                prop_assert!((other.value - sol.value).abs() <= 1e-9 * 1f64.max(sol.value.abs()));
            }
        }
    }
}
