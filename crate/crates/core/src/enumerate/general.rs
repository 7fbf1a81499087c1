//! General negative problems: depth-first search over forest supports.
//!
//! Items are placed one at a time, each with a nonempty set of eaters taken
//! from distinct trees, so the support stays a forest. Within a tree the
//! stationarity relations fix prices and agent scales up to one factor, which
//! is enough to prune on the maximum condition between members of the same
//! tree. A complete support is handed to [`solve_forest`] and the result goes
//! through the common certificate filter.
//!
//! Forests suffice: any cycle in the support of a competitive allocation has
//! unit gain (the stationarity ratios multiply to one around it), so shifting
//! shares around the cycle keeps every utility and budget fixed and reaches a
//! forest-supported allocation with the same profile.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::solve_forest;
use crate::model::{Division, Problem};
use crate::scalar::Scalar;

use super::{drop_neutral, finish, negative_division, require_negative, restore_neutral, EnumerationResult, Limits};

const NONE: usize = usize::MAX;
/// Slack on the in-tree maximum condition; the final certificate is strict.
const PRUNE_TOL: f64 = 1e-9;

pub fn enumerate_general<S: Scalar>(problem: &Problem<S>, limits: &Limits) -> Result<EnumerationResult<S>> {
    if problem.n() + problem.m() > limits.max_size {
        return Err(Error::LimitExceeded(format!(
            "n + m = {} exceeds the enumeration limit {}",
            problem.n() + problem.m(),
            limits.max_size
        )));
    }
    require_negative(problem)?;
    let (reduced, kept) = drop_neutral(problem)?;
    let nodes = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let search = Search::new(&reduced, limits, &nodes, &stop);
    let candidates = search.run()?;
    let candidates = candidates.into_iter().map(|d| restore_neutral(problem, &kept, d)).collect();
    Ok(finish(problem, candidates, !stop.load(Ordering::Relaxed)))
}

struct Search<'a, S> {
    problem: &'a Problem<S>,
    /// Agents allowed to eat each item: everyone for a bad, likers for a good.
    eligible: Vec<Vec<usize>>,
    /// Last item each agent may eat; an agent still idle past it kills the branch.
    last_chance: Vec<usize>,
    limits: &'a Limits,
    nodes: &'a AtomicU64,
    stop: &'a AtomicBool,
}

#[derive(Clone)]
struct State<S> {
    /// Tree label per agent (`NONE` while idle) and per placed item.
    agent_tree: Vec<usize>,
    item_tree: Vec<usize>,
    /// Agent scales and prices relative to their tree.
    rel_d: Vec<S>,
    rel_p: Vec<S>,
    edges: Vec<(usize, usize)>,
}

impl<'a, S: Scalar> Search<'a, S> {
    fn new(problem: &'a Problem<S>, limits: &'a Limits, nodes: &'a AtomicU64, stop: &'a AtomicBool) -> Self {
        let (n, m) = (problem.n(), problem.m());
        let eligible: Vec<Vec<usize>> = (0..m)
            .map(|a| {
                let good = (0..n).any(|i| problem.u(i, a).gt0());
                (0..n).filter(|&i| if good { problem.u(i, a).gt0() } else { problem.u(i, a).lt0() }).collect()
            })
            .collect();
        let mut last_chance = vec![NONE; n];
        for (a, agents) in eligible.iter().enumerate() {
            for &i in agents {
                last_chance[i] = a;
            }
        }
        Self { problem, eligible, last_chance, limits, nodes, stop }
    }

    fn run(&self) -> Result<Vec<Division<S>>> {
        let (n, m) = (self.problem.n(), self.problem.m());
        self.limits.check_cancel()?;
        if self.last_chance.contains(&NONE) {
            // Some agent can eat nothing, so no support covers everyone.
            return Ok(Vec::new());
        }
        let root = State {
            agent_tree: vec![NONE; n],
            item_tree: vec![NONE; m],
            rel_d: vec![S::zero(); n],
            rel_p: vec![S::zero(); m],
            edges: Vec::new(),
        };
        let mut first = Vec::new();
        self.place(&root, 0, 0, &mut |s| {
            first.push(s);
            Ok(())
        })?;
        let branch = |state: &State<S>| -> Result<Vec<Division<S>>> {
            let mut out = Vec::new();
            self.visit(state, 1, &mut out)?;
            Ok(out)
        };
        let results: Vec<Result<Vec<Division<S>>>> = if self.limits.parallel {
            first.par_iter().map(branch).collect()
        } else {
            first.iter().map(branch).collect()
        };
        let mut all = Vec::new();
        for r in results {
            all.extend(r?);
        }
        Ok(all)
    }

    fn visit(&self, state: &State<S>, a: usize, out: &mut Vec<Division<S>>) -> Result<()> {
        if a == self.problem.m() {
            if let Some(d) = self.leaf(state) {
                out.push(d);
            }
            return Ok(());
        }
        self.place(state, a, 0, &mut |next| self.visit(&next, a + 1, out))
    }

    /// Hands every admissible eater set of item `a` drawn from
    /// `eligible[a][from..]` (on top of those already in `state`) to `emit`.
    /// Eaters are added in index order; a rejected set prunes all its supersets.
    fn place(
        &self,
        state: &State<S>,
        a: usize,
        from: usize,
        emit: &mut dyn FnMut(State<S>) -> Result<()>,
    ) -> Result<()> {
        let eligible = &self.eligible[a];
        for k in from..eligible.len() {
            if self.stop.load(Ordering::Relaxed) {
                return Ok(());
            }
            let Some(next) = self.add_eater(state, a, eligible[k]) else {
                continue;
            };
            let stranded = (0..self.problem.n()).any(|i| next.agent_tree[i] == NONE && self.last_chance[i] <= a);
            if !stranded {
                if !self.tick()? {
                    return Ok(());
                }
                emit(next.clone())?;
            }
            self.place(&next, a, k + 1, emit)?;
        }
        Ok(())
    }

    /// Counts a placed item; false once a limit stops the search.
    fn tick(&self) -> Result<bool> {
        let count = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if count > self.limits.max_supports {
            self.stop.store(true, Ordering::Relaxed);
            return Ok(false);
        }
        if count.is_multiple_of(1024) {
            self.limits.check_cancel()?;
            if self.limits.past_deadline() {
                self.stop.store(true, Ordering::Relaxed);
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Adds agent `s` as an eater of item `a`, merging its tree into the
    /// item's tree; `None` when that closes a cycle or breaks the maximum
    /// condition `u_kb <= p_b d_k` between the two merged parts.
    fn add_eater(&self, state: &State<S>, a: usize, s: usize) -> Option<State<S>> {
        let p = self.problem;
        let label = state.item_tree[a];
        let mut next;
        let (moved_agents, moved_items): (Vec<usize>, Vec<usize>);
        let label = if label == NONE {
            next = state.clone();
            let label = if next.agent_tree[s] == NONE {
                next.agent_tree[s] = s;
                next.rel_d[s] = S::one();
                s
            } else {
                next.agent_tree[s]
            };
            next.rel_p[a] = p.u(s, a).clone() / next.rel_d[s].clone();
            next.item_tree[a] = label;
            moved_agents = Vec::new();
            moved_items = vec![a];
            label
        } else {
            let old = state.agent_tree[s];
            if old == label {
                return None;
            }
            let target = p.u(s, a).clone() / state.rel_p[a].clone();
            if !target.gt0() {
                return None;
            }
            next = state.clone();
            if old == NONE {
                next.rel_d[s] = target;
                next.agent_tree[s] = label;
                moved_agents = vec![s];
                moved_items = Vec::new();
            } else {
                let f = target / next.rel_d[s].clone();
                moved_agents = (0..p.n()).filter(|&i| next.agent_tree[i] == old).collect();
                moved_items = (0..a).filter(|&b| next.item_tree[b] == old).collect();
                for &i in &moved_agents {
                    next.rel_d[i] = next.rel_d[i].clone() * f.clone();
                    next.agent_tree[i] = label;
                }
                for &b in &moved_items {
                    next.rel_p[b] = next.rel_p[b].clone() / f.clone();
                    next.item_tree[b] = label;
                }
            }
            label
        };
        next.edges.push((s, a));

        // Maximum condition across the two merged parts.
        let ok = |k: usize, b: usize| {
            let bound = next.rel_p[b].clone() * next.rel_d[k].clone();
            p.u(k, b).le_tol(&bound, PRUNE_TOL)
        };
        let items: Vec<usize> = (0..=a).filter(|&b| next.item_tree[b] == label).collect();
        for k in (0..p.n()).filter(|&k| next.agent_tree[k] == label) {
            let k_moved = moved_agents.contains(&k);
            for &b in &items {
                if k_moved != moved_items.contains(&b) && !ok(k, b) {
                    return None;
                }
            }
        }
        Some(next)
    }

    fn leaf(&self, state: &State<S>) -> Option<Division<S>> {
        if !self.across_trees(state) {
            return None;
        }
        let budget = vec![-S::one(); self.problem.n()];
        let sol = solve_forest(self.problem, &state.edges, &budget).ok()?;
        let cutoff = crate::model::NEG_CUTOFF;
        let nonneg = sol.allocation.shares.iter().flatten().all(|z| !z.is_neg_tol(cutoff));
        nonneg.then(|| negative_division(sol.allocation, sol.price))
    }

    /// Pins each tree by its money identity `sum_b p_b w_b = -|agents|` and
    /// checks the maximum condition between different trees.
    fn across_trees(&self, state: &State<S>) -> bool {
        let p = self.problem;
        let (n, m) = (p.n(), p.m());
        let mut money = vec![S::zero(); n];
        let mut members = vec![0i64; n];
        for b in 0..m {
            let t = state.item_tree[b];
            money[t] = money[t].clone() + state.rel_p[b].clone() * p.w(b).clone();
        }
        for i in 0..n {
            members[state.agent_tree[i]] += 1;
        }
        // True values: p = rel_p / s, d = rel_d * s with s = money / -members.
        let mut scale = vec![S::zero(); n];
        for t in 0..n {
            if members[t] > 0 {
                let s = money[t].clone() / S::from_int(-members[t]);
                if !s.gt0() {
                    return false;
                }
                scale[t] = s;
            }
        }
        let d: Vec<S> = (0..n).map(|i| state.rel_d[i].clone() * scale[state.agent_tree[i]].clone()).collect();
        let price: Vec<S> = (0..m).map(|b| state.rel_p[b].clone() / scale[state.item_tree[b]].clone()).collect();
        (0..n).all(|k| {
            (0..m).all(|b| {
                state.agent_tree[k] == state.item_tree[b]
                    || p.u(k, b).le_tol(&(price[b].clone() * d[k].clone()), PRUNE_TOL)
            })
        })
    }
}


#[cfg(test)]
mod specialists {
    use super::*;
    use crate::enumerate::instances::{generate_lower_bound_instance, InstanceKind};
    use crate::scalar::Rational;

    #[test]
    fn six_specialists_five_bads() {
        let p = generate_lower_bound_instance(InstanceKind::General, 6, 5).unwrap();
        let r = enumerate_general(&p, &Limits::default()).unwrap();
        assert!(r.exhaustive);
        // Every one of these passes the certificate; see the acceptance notes.
        assert_eq!(r.profiles.len(), 211);
        let symmetric = r.profiles.iter().any(|u| u.values.iter().all(|v| (v + 5.0 / 6.0).abs() < 1e-9));
        assert!(symmetric);
    }

    #[test]
    fn small_family_in_exact_mode() {
        let p = generate_lower_bound_instance(InstanceKind::General, 3, 2).unwrap();
        let exact: Problem<Rational> = p.to_exact();
        let r = enumerate_general(&exact, &Limits::default()).unwrap();
        let f = enumerate_general(&p, &Limits::default()).unwrap();
        assert_eq!(r.profiles.len(), f.profiles.len());
        assert!(r.profiles.len() >= 3);
    }
}
