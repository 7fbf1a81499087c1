//! Exact solve of the equilibrium conditions on a forest-shaped support.
//!
//! Given which (agent, item) pairs are consumed, and assuming the support
//! graph has no cycle, the stationarity relations `u_ia = p_a * d_i` fix
//! prices and agent scales up to one factor per tree, the money identity of
//! each tree pins that factor, and item balance plus budgets determine the
//! shares by peeling leaves.

use crate::model::{Allocation, Problem};
use crate::scalar::Scalar;

/// Prices, agent scales and shares solving the support equations.
#[derive(Debug, Clone)]
pub struct ForestSolution<S> {
    pub price: Vec<S>,
    /// `d_i` with `u_ia = p_a d_i` on every edge; `None` for agents off the support.
    pub scale: Vec<Option<S>>,
    pub allocation: Allocation<S>,
    /// Connected components as (agents, items).
    pub components: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Why a support was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestReject {
    Cycle,
    UncoveredItem,
    ZeroUtilityEdge,
    /// An agent with nonzero budget consumes nothing.
    IdleAgent,
    SignMismatch,
    /// The leaf-peeling residual at the last vertex of a tree is off.
    Inconsistent,
}

/// Solves the support equations for `edges` with per-agent budgets `budget`
/// (agents with a zero budget and no edge are left out). Shares may come out
/// negative; the caller decides what to do with that.
pub fn solve_forest<S: Scalar>(
    problem: &Problem<S>,
    edges: &[(usize, usize)],
    budget: &[S],
) -> Result<ForestSolution<S>, ForestReject> {
    let (n, m) = (problem.n(), problem.m());
    // Vertices: agents 0..n, items n..n+m.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + m];
    for &(i, a) in edges {
        if problem.u(i, a).is_zero() {
            return Err(ForestReject::ZeroUtilityEdge);
        }
        adj[i].push(n + a);
        adj[n + a].push(i);
    }
    if (0..m).any(|a| adj[n + a].is_empty()) {
        return Err(ForestReject::UncoveredItem);
    }
    for i in 0..n {
        if adj[i].is_empty() && !budget[i].is_zero() {
            return Err(ForestReject::IdleAgent);
        }
    }

    let mut price: Vec<Option<S>> = vec![None; m];
    let mut scale: Vec<Option<S>> = vec![None; n];
    let mut seen = vec![false; n + m];
    let mut components = Vec::new();
    for root in 0..n {
        if seen[root] || adj[root].is_empty() {
            continue;
        }
        let mut comp_agents = vec![root];
        let mut comp_items = Vec::new();
        seen[root] = true;
        scale[root] = Some(S::one());
        let mut stack = vec![(root, usize::MAX)];
        let mut edge_count = 0usize;
        while let Some((v, parent)) = stack.pop() {
            for &w in &adj[v] {
                if w == parent {
                    continue;
                }
                edge_count += 1;
                if seen[w] {
                    return Err(ForestReject::Cycle);
                }
                seen[w] = true;
                if v < n {
                    let a = w - n;
                    let d = scale[v].clone().expect("scale set");
                    price[a] = Some(problem.u(v, a).clone() / d);
                    comp_items.push(a);
                } else {
                    let a = v - n;
                    let p = price[a].clone().expect("price set");
                    let d = problem.u(w, a).clone() / p;
                    if !d.gt0() {
                        return Err(ForestReject::SignMismatch);
                    }
                    scale[w] = Some(d);
                    comp_agents.push(w);
                }
                stack.push((w, v));
            }
        }
        debug_assert_eq!(edge_count, comp_agents.len() + comp_items.len() - 1);

        // Money identity: sum_a p_a w_a = sum_i b_i, with true p = rel_p / s.
        let money = comp_items.iter().fold(S::zero(), |acc, &a| acc + price[a].clone().unwrap() * problem.w(a).clone());
        let owed = comp_agents.iter().fold(S::zero(), |acc, &i| acc + budget[i].clone());
        if money.is_zero() || owed.is_zero() {
            return Err(ForestReject::SignMismatch);
        }
        let s = money / owed;
        if !s.gt0() {
            return Err(ForestReject::SignMismatch);
        }
        for &a in &comp_items {
            price[a] = Some(price[a].clone().unwrap() / s.clone());
        }
        for &i in &comp_agents {
            scale[i] = Some(scale[i].clone().unwrap() * s.clone());
        }
        comp_agents.sort_unstable();
        comp_items.sort_unstable();
        components.push((comp_agents, comp_items));
    }
    if seen[n..].iter().any(|s| !s) {
        // An item reachable from no agent: impossible once every item has an
        // edge, kept as a guard.
        return Err(ForestReject::UncoveredItem);
    }
    let price: Vec<S> = price.into_iter().map(|p| p.expect("covered")).collect();

    // Leaf peeling.
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed_edge = std::collections::HashSet::new();
    let mut z = Allocation::zeros(n, m);
    // Remaining requirement per vertex: items need w_a units, agents need b_i money.
    let mut need: Vec<S> = (0..n).map(|i| budget[i].clone()).collect();
    need.extend(problem.endowment().iter().cloned());
    let mut queue: Vec<usize> = (0..n + m).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = queue.pop() {
        if degree[v] != 1 {
            continue;
        }
        let w = *adj[v].iter().find(|&&w| !removed_edge.contains(&edge_key(v, w))).expect("one live edge");
        let (i, a) = if v < n { (v, w - n) } else { (w, v - n) };
        let amount = if v < n { need[v].clone() / price[a].clone() } else { need[v].clone() };
        z.shares[i][a] = amount.clone();
        need[i] = need[i].clone() - price[a].clone() * amount.clone();
        need[n + a] = need[n + a].clone() - amount;
        removed_edge.insert(edge_key(v, w));
        degree[v] -= 1;
        degree[w] -= 1;
        if degree[w] == 1 {
            queue.push(w);
        }
    }
    for (v, need) in need.iter().enumerate() {
        let reference = if v < n { budget[v].clone() } else { problem.w(v - n).clone() };
        if !need.eq_tol(&S::zero(), 1e-9 * (1.0 + reference.to_f64().abs())) {
            return Err(ForestReject::Inconsistent);
        }
    }
    Ok(ForestSolution { price, scale, allocation: z, components })
}

fn edge_key(v: usize, w: usize) -> (usize, usize) {
    (v.min(w), v.max(w))
}

/// Greedy spanning forest: keeps each edge that joins two separate trees, in order.
pub fn spanning_forest(n: usize, m: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut out = Vec::new();
    for &(i, a) in edges {
        let (ri, ra) = (find(&mut parent, i), find(&mut parent, n + a));
        if ri != ra {
            parent[ri] = ra;
            out.push((i, a));
        }
    }
    out
}
