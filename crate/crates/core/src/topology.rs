//! Connected components of the efficient and envy-free allocations when two
//! bads are shared.
//!
//! Items are rescaled to unit endowment and agents sorted by
//! `r_i = |u_ia| / |u_ib|`. Every efficient envy-free allocation, up to
//! utility equivalence, lies in some rectangle `S^i`: agents before `i` each
//! eat `x` of `a`, agents after `i` each eat `y` of `b`, and agent `i` eats
//! the rest. Consecutive rectangles meet at the cuts, where agents `1..=i`
//! share `a` and the others share `b`.

use serde::Serialize;

use crate::enumerate::{enumerate_two_items, select_index};
use crate::error::{Error, Result};
use crate::model::Problem;

/// Two ratios closer than this (relative) are treated as equal.
const TIE_TOL: f64 = 1e-12;
/// Largest population and grid accepted by the sampling oracle.
pub const ORACLE_MAX_AGENTS: usize = 12;
pub const ORACLE_MAX_GRID: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub count: usize,
    /// 1-based `i` such that the cut between agents `i` and `i + 1` is envy-free.
    pub ef_cuts: Vec<usize>,
    /// 1-based `i` whose rectangle holds a component touching no cut.
    pub interior_splits: Vec<usize>,
    /// Sorted ratios, one per agent after merging equal ratios.
    pub ratio_order: Vec<f64>,
}

/// Per-unit disutilities `(alpha_i, beta_i)` sorted by ratio, equal ratios
/// merged into one agent.
fn sorted_disutilities(problem: &Problem) -> Result<Vec<(f64, f64)>> {
    let problem = merge_clones(problem)?;
    if problem.m() != 2 {
        return Err(Error::Arity(format!("two bads expected, got {} items", problem.m())));
    }
    let mut agents: Vec<(f64, f64)> =
        (0..problem.n()).map(|i| (-problem.u(i, 0) * problem.w(0), -problem.u(i, 1) * problem.w(1))).collect();
    if agents.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
        return Err(Error::InvalidProblem("every utility must be strictly negative".into()));
    }
    agents.sort_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)));
    agents.dedup_by(|x, y| {
        let (rx, ry) = (x.0 / x.1, y.0 / y.1);
        (rx - ry).abs() <= TIE_TOL * rx.max(ry)
    });
    Ok(agents)
}

/// Collapses bads whose columns are proportional (clones) back into one
/// item of unit endowment; problems with two items pass through.
fn merge_clones(problem: &Problem) -> Result<Problem> {
    let (n, m) = (problem.n(), problem.m());
    if m <= 2 {
        return Ok(problem.clone());
    }
    let columns: Vec<Vec<f64>> = (0..m).map(|a| (0..n).map(|i| problem.u(i, a) * problem.w(a)).collect()).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for a in 0..m {
        let proportional = |g: &Vec<usize>| {
            let b = g[0];
            let k = columns[a][0] / columns[b][0];
            (0..n).all(|i| (columns[a][i] - k * columns[b][i]).abs() <= 1e-12 * columns[a][i].abs().max(1.0))
        };
        match groups.iter_mut().find(|g| proportional(g)) {
            Some(g) => g.push(a),
            None => groups.push(vec![a]),
        }
    }
    if groups.len() != 2 {
        return Err(Error::Arity(format!("{m} items do not reduce to two bads")));
    }
    let rows = (0..n).map(|i| groups.iter().map(|g| g.iter().map(|&a| columns[a][i]).sum()).collect()).collect();
    Problem::unit(rows)
}

fn ratios(agents: &[(f64, f64)]) -> Vec<f64> {
    agents.iter().map(|(a, b)| a / b).collect()
}

/// Threshold `i / (n - i)` (infinite at `i = n`).
fn threshold(i: usize, n: usize) -> f64 {
    if i >= n {
        f64::INFINITY
    } else {
        i as f64 / (n - i) as f64
    }
}

/// Counts components from the ratio chain: envy-free cuts are those with
/// `r_i <= i/(n-i) <= r_{i+1}`, consecutive ones share a rectangle, and
/// rectangle `i` holds a component of its own when
/// `(i-1)/(n-i+1) < r_{i-1} < r_i < r_{i+1} < i/(n-i)` (missing neighbours
/// drop out at the ends).
pub fn ef_components_two_bads(problem: &Problem) -> Result<ComponentReport> {
    let agents = sorted_disutilities(problem)?;
    let r = ratios(&agents);
    let n = r.len();
    if n == 1 {
        return Ok(ComponentReport { count: 1, ef_cuts: vec![], interior_splits: vec![], ratio_order: r });
    }
    let ef_cuts: Vec<usize> = (1..n).filter(|&i| r[i - 1] <= threshold(i, n) && threshold(i, n) <= r[i]).collect();
    let interior_splits: Vec<usize> = (1..=n)
        .filter(|&i| {
            let mut chain = vec![threshold(i - 1, n)];
            if i >= 2 {
                chain.push(r[i - 2]);
            }
            chain.push(r[i - 1]);
            if i < n {
                chain.push(r[i]);
            }
            chain.push(threshold(i, n));
            // The outer thresholds of the end rectangles (0 and infinity) are vacuous.
            let lo = if i == 1 { 1 } else { 0 };
            let hi = if i == n { chain.len() - 1 } else { chain.len() };
            chain[lo..hi].windows(2).all(|w| w[0] < w[1])
        })
        .collect();
    let runs = ef_cuts.iter().enumerate().filter(|&(k, &c)| k == 0 || ef_cuts[k - 1] + 1 != c).count();
    Ok(ComponentReport { count: runs + interior_splits.len(), ef_cuts, interior_splits, ratio_order: r })
}

/// Grid oracle: cuts every rectangle into a `grid x grid` lattice of cells,
/// keeps the cells the envy-free region reaches (clipping each cell by the
/// pairwise envy constraints), joins cells that touch, glues rectangles at
/// envy-free cuts, and counts the pieces.
pub fn brute_force_components(problem: &Problem, grid: usize) -> Result<usize> {
    let agents = sorted_disutilities(problem)?;
    let n = agents.len();
    if problem.n() > ORACLE_MAX_AGENTS || grid > ORACLE_MAX_GRID || grid == 0 {
        return Err(Error::LimitExceeded(format!(
            "oracle takes at most {ORACLE_MAX_AGENTS} agents and grid {ORACLE_MAX_GRID}"
        )));
    }
    if n == 1 {
        return Ok(1);
    }
    let g = grid;
    // Node layout: rectangle i (0-based) owns g * g cells, cut nodes follow.
    let per = g * g;
    let cut_base = n * per;
    let mut dsu = Dsu::new(cut_base + n);
    let mut alive = vec![false; cut_base + n];

    for i in 0..n {
        let rect = Rect::new(&agents, i);
        let constraints = rect.constraints();
        let (kmax, lmax) = (rect.cells_x(g), rect.cells_y(g));
        for k in 0..kmax {
            for l in 0..lmax {
                let (x0, x1, y0, y1) = rect.cell(k, l, g);
                if !reaches(&constraints, x0, x1, y0, y1) {
                    continue;
                }
                let node = i * per + k * g + l;
                alive[node] = true;
                let neighbours = [(1, 0), (0, 1), (1, 1), (1, -1)];
                for (dk, dl) in neighbours {
                    let (pk, pl) = (k as i64 - dk, l as i64 - dl);
                    if pk >= 0 && pl >= 0 && (pl as usize) < lmax {
                        let other = i * per + pk as usize * g + pl as usize;
                        if alive[other] {
                            dsu.union(node, other);
                        }
                    }
                }
            }
        }
    }
    // Cut between agents c and c+1 (1-based c): agents 1..=c share a, the
    // rest share b. It is the point (1/c, y_max) of rectangle c and
    // (x_max, 1/(n-c)) of rectangle c+1.
    for c in 1..n {
        let left = Rect::new(&agents, c - 1);
        let right = Rect::new(&agents, c);
        let x = 1.0 / c as f64;
        if !left.envy_free(x, left.y_max()) {
            continue;
        }
        let cut = cut_base + c;
        alive[cut] = true;
        for (rect, index, point) in
            [(&left, c - 1, (x, left.y_max())), (&right, c, (right.x_max(), 1.0 / (n - c) as f64))]
        {
            // A flat axis has nothing to locate; pin it at 0.
            let point =
                (if rect.x_max() > 0.0 { point.0 } else { 0.0 }, if rect.y_max() > 0.0 { point.1 } else { 0.0 });
            for k in 0..rect.cells_x(g) {
                for l in 0..rect.cells_y(g) {
                    let (x0, x1, y0, y1) = rect.cell(k, l, g);
                    let inside = |v: f64, lo: f64, hi: f64| v >= lo - 1e-12 && v <= hi + 1e-12;
                    let node = index * per + k * g + l;
                    if alive[node] && inside(point.0, x0, x1) && inside(point.1, y0, y1) {
                        dsu.union(cut, node);
                    }
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..alive.len()).filter(|&v| alive[v]).map(|v| dsu.find(v)).collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(roots.len())
}

/// Whether the box (possibly flat) meets `{c0 + cx x + cy y >= 0}` for every
/// constraint: clip the box polygon by each half-plane in turn.
fn reaches(constraints: &[(f64, f64, f64)], x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
    let mut poly = vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    for &(c0, cx, cy) in constraints {
        let f = |p: (f64, f64)| c0 + cx * p.0 + cy * p.1;
        let scale = c0.abs() + cx.abs() + cy.abs();
        let keep = |v: f64| v >= -1e-12 * scale.max(1.0);
        let mut next = Vec::with_capacity(poly.len() + 2);
        for e in 0..poly.len() {
            let (p, q) = (poly[e], poly[(e + 1) % poly.len()]);
            let (fp, fq) = (f(p), f(q));
            if keep(fp) {
                next.push(p);
            }
            if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                let t = fp / (fp - fq);
                next.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
        if next.is_empty() {
            return false;
        }
        poly = next;
    }
    true
}

/// Rectangle `S^{i+1}` (0-based `i`) over `(x, y)`.
struct Rect<'a> {
    agents: &'a [(f64, f64)],
    i: usize,
}

impl<'a> Rect<'a> {
    fn new(agents: &'a [(f64, f64)], i: usize) -> Self {
        Self { agents, i }
    }

    fn before(&self) -> usize {
        self.i
    }

    fn after(&self) -> usize {
        self.agents.len() - 1 - self.i
    }

    fn x_max(&self) -> f64 {
        if self.before() == 0 {
            0.0
        } else {
            1.0 / self.before() as f64
        }
    }

    fn y_max(&self) -> f64 {
        if self.after() == 0 {
            0.0
        } else {
            1.0 / self.after() as f64
        }
    }

    /// A flat axis (end rectangles) has a single cell.
    fn cells_x(&self, g: usize) -> usize {
        if self.before() == 0 {
            1
        } else {
            g
        }
    }

    fn cells_y(&self, g: usize) -> usize {
        if self.after() == 0 {
            1
        } else {
            g
        }
    }

    fn cell(&self, k: usize, l: usize, g: usize) -> (f64, f64, f64, f64) {
        let (hx, hy) = (self.x_max() / g as f64, self.y_max() / g as f64);
        (hx * k as f64, hx * (k + 1) as f64, hy * l as f64, hy * (l + 1) as f64)
    }

    /// Share of `(a, b)` in bundle `j` as affine forms `(const, per x, per y)`.
    fn bundle_form(&self, j: usize) -> [(f64, f64, f64); 2] {
        use std::cmp::Ordering::*;
        match j.cmp(&self.i) {
            Less => [(0.0, 1.0, 0.0), (0.0, 0.0, 0.0)],
            Greater => [(0.0, 0.0, 0.0), (0.0, 0.0, 1.0)],
            Equal => [(1.0, -(self.before() as f64), 0.0), (1.0, 0.0, -(self.after() as f64))],
        }
    }

    /// `cost_k(bundle_j) - cost_k(bundle_k) >= 0` for all `k != j`, with
    /// costs divided by `alpha_k + beta_k`.
    fn constraints(&self) -> Vec<(f64, f64, f64)> {
        let n = self.agents.len();
        let forms: Vec<_> = (0..n).map(|j| self.bundle_form(j)).collect();
        let mut out = Vec::with_capacity(n * (n - 1));
        for k in 0..n {
            let (al, be) = self.agents[k];
            let cost = |f: &[(f64, f64, f64); 2]| {
                let s = al + be;
                ((al * f[0].0 + be * f[1].0) / s, (al * f[0].1 + be * f[1].1) / s, (al * f[0].2 + be * f[1].2) / s)
            };
            let own = cost(&forms[k]);
            for j in (0..n).filter(|&j| j != k) {
                let other = cost(&forms[j]);
                out.push((other.0 - own.0, other.1 - own.1, other.2 - own.2));
            }
        }
        out
    }

    fn envy_free(&self, x: f64, y: f64) -> bool {
        self.constraints().iter().all(|&(c0, cx, cy)| c0 + cx * x + cy * y >= -1e-12)
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, v: usize) -> usize {
        let mut root = v;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut v = v;
        while self.0[v] != root {
            let next = self.0[v];
            self.0[v] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Replaces bad `b` by `m - 1` equal clones carrying its utility in equal
/// parts; all endowments become one unit.
pub fn clone_bads(problem: &Problem, m: usize) -> Result<Problem> {
    if problem.m() != 2 {
        return Err(Error::Arity(format!("cloning needs two items, got {}", problem.m())));
    }
    if m < 3 {
        return Err(Error::Unsupported("cloning needs m >= 3".into()));
    }
    let parts = (m - 1) as f64;
    let rows = (0..problem.n())
        .map(|i| {
            let a = problem.u(i, 0) * problem.w(0);
            let b = problem.u(i, 1) * problem.w(1);
            std::iter::once(a).chain(std::iter::repeat_n(b / parts, m - 1)).collect()
        })
        .collect();
    Problem::unit(rows)
}

/// A two-bad problem with the given ratios (`u_i = (-r_i, -1)`).
pub fn ratio_instance(ratios: &[f64]) -> Result<Problem> {
    Problem::unit(ratios.iter().map(|&r| vec![-r, -1.0]).collect())
}

/// Ratios realizing `floor((2n + 1) / 3)` components: interior components
/// in rectangles 1, 4, 7, ... separated by envy-free cuts.
pub fn pattern_ratios(n: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    let mut assigned = vec![false; n];
    let mut i = 1;
    while i <= n {
        // Agents i-1, i, i+1 (1-based, those that exist) sit strictly inside
        // the open interval between the rectangle's thresholds.
        let lo = if i == 1 { 0.0 } else { threshold(i - 1, n) };
        let hi = threshold(i, n);
        let members: Vec<usize> = (i.saturating_sub(1).max(1)..=(i + 1).min(n)).collect();
        for (k, &j) in members.iter().enumerate() {
            let t = (k + 1) as f64 / (members.len() + 1) as f64;
            r[j - 1] = if hi.is_finite() { lo + (hi - lo) * t } else { lo + (k + 1) as f64 };
            assigned[j - 1] = true;
        }
        i += 3;
    }
    // A leftover last agent sits above every threshold, closing with an envy-free cut.
    for j in 0..n {
        if !assigned[j] {
            r[j] = n as f64 + j as f64;
        }
    }
    r
}

/// Samples of the competitive selection along the straight path between
/// two ratio vectors.
#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub start: ComponentReport,
    pub end: ComponentReport,
    /// `(t, selected profile)` at each step.
    pub samples: Vec<(f64, Vec<f64>)>,
    /// Largest change of the selected profile between consecutive samples.
    pub largest_jump: f64,
    pub jump_at: f64,
}

pub fn selection_path(from: &[f64], to: &[f64], steps: usize) -> Result<PathReport> {
    if from.len() != to.len() || steps == 0 {
        return Err(Error::Dimension("paths need equal-length ratio vectors and at least one step".into()));
    }
    let mut samples = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let r: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + (b - a) * t).collect();
        let result = enumerate_two_items(&ratio_instance(&r)?)?;
        let k = select_index(&result.profiles).ok_or_else(|| Error::Empty("no competitive profile".into()))?;
        samples.push((t, result.profiles[k].values.clone()));
    }
    let (mut largest_jump, mut jump_at) = (0.0, 0.0);
    for w in samples.windows(2) {
        let d = w[0].1.iter().zip(&w[1].1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d > largest_jump {
            largest_jump = d;
            jump_at = w[1].0;
        }
    }
    Ok(PathReport {
        start: ef_components_two_bads(&ratio_instance(from)?)?,
        end: ef_components_two_bads(&ratio_instance(to)?)?,
        samples,
        largest_jump,
        jump_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_component_witness() {
        let p = ratio_instance(&[0.2, 0.3, 3.5, 4.0]).unwrap();
        let r = ef_components_two_bads(&p).unwrap();
        assert_eq!((r.count, r.ef_cuts.clone(), r.interior_splits.clone()), (3, vec![2], vec![1, 4]));
        assert_eq!(brute_force_components(&p, 200).unwrap(), 3);
    }

    #[test]
    fn single_interior_witness() {
        let p = ratio_instance(&[0.2, 0.3, 0.5, 0.9]).unwrap();
        let r = ef_components_two_bads(&p).unwrap();
        assert_eq!((r.count, r.interior_splits.clone()), (1, vec![1]));
        assert_eq!(brute_force_components(&p, 200).unwrap(), 1);
    }

    #[test]
    fn five_agent_pattern() {
        let p = ratio_instance(&[0.1, 0.2, 1.6, 1.7, 1.8]).unwrap();
        assert_eq!(ef_components_two_bads(&p).unwrap().count, 3);
        assert_eq!(brute_force_components(&p, 200).unwrap(), 3);
    }

    #[test]
    fn patterns_reach_the_bound() {
        for n in 3..=8 {
            let p = ratio_instance(&pattern_ratios(n)).unwrap();
            let want = (2 * n + 1) / 3;
            assert_eq!(ef_components_two_bads(&p).unwrap().count, want, "n = {n}");
            assert_eq!(brute_force_components(&p, 120).unwrap(), want, "n = {n}");
        }
    }

    #[test]
    fn two_agents_and_twins_are_connected() {
        for r in [[0.5, 2.0], [0.2, 0.4], [3.0, 5.0], [0.7, 0.7]] {
            let p = ratio_instance(&r).unwrap();
            assert_eq!(ef_components_two_bads(&p).unwrap().count, 1, "{r:?}");
            assert_eq!(brute_force_components(&p, 100).unwrap(), 1, "{r:?}");
        }
        let p = ratio_instance(&[1.5, 1.5, 1.5]).unwrap();
        assert_eq!(ef_components_two_bads(&p).unwrap().count, 1);
        assert_eq!(brute_force_components(&p, 50).unwrap(), 1);
    }

    #[test]
    fn cloning_keeps_the_count() {
        let p = ratio_instance(&[0.2, 0.3, 3.5, 4.0]).unwrap();
        let c = clone_bads(&p, 3).unwrap();
        assert_eq!(c.m(), 3);
        for i in 0..4 {
            assert_eq!(c.u(i, 1) + c.u(i, 2), *p.u(i, 1));
        }
        assert_eq!(ef_components_two_bads(&c).unwrap().count, 3);
        let sym = clone_bads(&ratio_instance(&[0.5, 2.0]).unwrap(), 3).unwrap();
        assert_eq!(ef_components_two_bads(&sym).unwrap().count, 1);
    }

    #[test]
    fn cuts_agree_with_the_enumerator() {
        let p = ratio_instance(&[0.2, 0.3, 3.5, 4.0]).unwrap();
        let cuts = ef_components_two_bads(&p).unwrap().ef_cuts;
        let result = enumerate_two_items(&p).unwrap();
        // A cut gives agents 1..=i only item a.
        let emitted: Vec<usize> = (1..4)
            .filter(|&i| {
                result.divisions.iter().any(|d| {
                    (0..4).all(
                        |j| if j < i { d.allocation.shares[j][1] == 0.0 } else { d.allocation.shares[j][0] == 0.0 },
                    )
                })
            })
            .collect();
        assert_eq!(cuts, emitted);
    }

    #[test]
    fn bad_inputs() {
        assert!(ef_components_two_bads(&Problem::unit(vec![vec![-1.0, 1.0]]).unwrap()).is_err());
        let p = ratio_instance(&[1.0; ORACLE_MAX_AGENTS + 1]).unwrap();
        assert!(brute_force_components(&p, 10).is_err());
    }

    #[test]
    fn path_between_witnesses() {
        let report = selection_path(&[0.2, 0.3, 3.5, 4.0], &[0.2, 0.3, 0.5, 0.9], 40).unwrap();
        assert_eq!((report.start.count, report.end.count), (3, 1));
        assert_eq!(report.samples.len(), 41);
    }
}
