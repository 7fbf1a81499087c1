//! Allocation programs: the feasible set `z >= 0, sum_i z_ia = w_a` as an LP,
//! with optional extra variables after the `n * m` shares.

use crate::lp::{LpSpec, Relation, Sense};
use crate::model::{Allocation, Problem};

pub(crate) struct AllocationProgram {
    pub lp: LpSpec,
    n: usize,
    m: usize,
}

impl AllocationProgram {
    /// `pinned[i]` forbids agent `i` every item it dislikes, holding its utility at or above zero.
    pub fn new(problem: &Problem<f64>, extra: usize, pinned: &[bool]) -> Self {
        let (n, m) = (problem.n(), problem.m());
        let mut lp = LpSpec::new(Sense::Maximize, vec![0.0; n * m + extra]);
        for a in 0..m {
            let terms: Vec<(usize, f64)> = (0..n).map(|i| (i * m + a, 1.0)).collect();
            lp.constrain_sparse(&terms, Relation::Eq, *problem.w(a));
        }
        for i in (0..n).filter(|&i| pinned[i]) {
            for a in (0..m).filter(|&a| *problem.u(i, a) < 0.0) {
                lp.bounds(i * m + a, Some(0.0), Some(0.0));
            }
        }
        Self { lp, n, m }
    }

    pub fn z(&self, i: usize, a: usize) -> usize {
        i * self.m + a
    }

    pub fn extra(&self, k: usize) -> usize {
        self.n * self.m + k
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    /// Terms of `scale * u_i . z_i`.
    pub fn utility(&self, problem: &Problem<f64>, i: usize, scale: f64) -> Vec<(usize, f64)> {
        (0..self.m).map(|a| (self.z(i, a), scale * problem.u(i, a))).collect()
    }

    pub fn allocation(&self, x: &[f64]) -> Allocation {
        let mut z = Allocation::zeros(self.n, self.m);
        for i in 0..self.n {
            for a in 0..self.m {
                z.shares[i][a] = x[self.z(i, a)].max(0.0);
            }
        }
        z
    }
}
