//! The competitive division of a positive problem: the maximizer of the
//! (weighted) product of utilities of the attracted agents.
//!
//! Projected gradient ascent on `sum theta_i log U_i` finds the neighbourhood
//! of the optimum. From there the equality graph (pairs where
//! `theta_i u_ia / U_i` attains the price) is read off, a spanning forest of
//! it fixes exact prices, and a small LP on the graph recovers shares that
//! meet every budget. The final division must pass the KKT certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cancel::CancelToken;
use crate::classify::{classify, Kind};
use crate::error::{Error, Result};
use crate::forest::{solve_forest, spanning_forest};
use crate::kkt::{kkt_verify_weighted, KktReport, KKT_TOL};
use crate::lp::{LpSpec, Relation};
use crate::model::{partition_agents, partition_items, Allocation, Budget, Division, ItemClass, Problem};

/// Income shares of the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(t) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidProblem(format!("weights must be positive and finite, found {t}")));
        }
        Ok(Self(theta))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// The classification witness.
    Witness,
    /// A seeded random feasible point with positive utilities.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct PositiveOptions {
    pub weights: Option<Weights>,
    pub start: Start,
    pub max_iterations: usize,
    pub tol: f64,
    pub cancel: Option<CancelToken>,
}

impl Default for PositiveOptions {
    fn default() -> Self {
        Self { weights: None, start: Start::Witness, max_iterations: 100_000, tol: KKT_TOL, cancel: None }
    }
}

#[derive(Debug, Clone)]
pub struct PositiveSolution {
    pub division: Division,
    pub kkt: KktReport,
    pub iterations: usize,
    /// True when the division came out of the exact support polish.
    pub polished: bool,
}

/// Competitive division of a positive problem with the given income weights.
pub fn solve_positive(problem: &Problem, weights: &Weights) -> Result<Division> {
    let options = PositiveOptions { weights: Some(weights.clone()), ..PositiveOptions::default() };
    Ok(solve_positive_with(problem, &options)?.division)
}

pub fn solve_positive_with(problem: &Problem, options: &PositiveOptions) -> Result<PositiveSolution> {
    let (n, m) = (problem.n(), problem.m());
    let theta = options.weights.clone().unwrap_or_else(|| Weights::uniform(n));
    if theta.0.len() != n {
        return Err(Error::Dimension(format!("{} weights for {n} agents", theta.0.len())));
    }
    let classification = classify(problem)?;
    if classification.kind != Kind::Positive {
        return Err(Error::ClassificationMismatch { expected: "positive".into(), found: classification.kind });
    }
    let agents = partition_agents(problem);
    let classes = partition_items(problem).classes(m);
    let live =
        Live { agents: agents.n_plus.clone(), items: (0..m).filter(|&a| classes[a] != ItemClass::Neutral).collect() };
    let theta_live: Vec<f64> = live.agents.iter().map(|&i| theta.0[i]).collect();
    let mut pg = Ascent::new(problem, &live, theta_live);
    let start = start_point(problem, &live, &classification.witness, options.start);
    pg.set(start);

    let mut next_polish = 10usize;
    let mut iterations = 0usize;
    loop {
        if iterations >= next_polish || iterations >= options.max_iterations || pg.stalled {
            if let Some(division) = polish(problem, &live, &pg, &theta.0) {
                let kkt = kkt_verify_weighted(problem, &division, &theta.0, options.tol);
                if kkt.passed {
                    return Ok(PositiveSolution { division, kkt, iterations, polished: true });
                }
            }
            next_polish = iterations + (iterations / 4).max(10);
        }
        if iterations >= options.max_iterations || pg.stalled {
            break;
        }
        if iterations.is_multiple_of(256) {
            if let Some(c) = &options.cancel {
                if c.is_cancelled() {
                    return Err(Error::Cancelled);
                }
            }
        }
        pg.step();
        iterations += 1;
    }

    // Fall back on the raw iterate when it already certifies.
    let division = raw_division(problem, &live, &pg, &theta.0);
    let kkt = kkt_verify_weighted(problem, &division, &theta.0, options.tol);
    if kkt.passed {
        return Ok(PositiveSolution { division, kkt, iterations, polished: false });
    }
    Err(Error::NonConvergence { iterations, residual: kkt.max_residual })
}

/// Attracted agents and non-neutral items: the variables of the program.
struct Live {
    agents: Vec<usize>,
    items: Vec<usize>,
}

struct Ascent<'a> {
    problem: &'a Problem,
    live: &'a Live,
    theta: Vec<f64>,
    /// Shares indexed [live agent][live item].
    z: Vec<Vec<f64>>,
    utility: Vec<f64>,
    value: f64,
    step: f64,
    stalled: bool,
}

impl<'a> Ascent<'a> {
    fn new(problem: &'a Problem, live: &'a Live, theta: Vec<f64>) -> Self {
        Self { problem, live, theta, z: Vec::new(), utility: Vec::new(), value: 0.0, step: 1.0, stalled: false }
    }

    fn utilities(&self, z: &[Vec<f64>]) -> Vec<f64> {
        self.live
            .agents
            .iter()
            .enumerate()
            .map(|(k, &i)| self.live.items.iter().enumerate().map(|(l, &a)| self.problem.u(i, a) * z[k][l]).sum())
            .collect()
    }

    fn objective(&self, utility: &[f64]) -> Option<f64> {
        if utility.iter().any(|u| *u <= 0.0) {
            return None;
        }
        Some(utility.iter().zip(&self.theta).map(|(u, t)| t * u.ln()).sum())
    }

    fn set(&mut self, z: Vec<Vec<f64>>) {
        self.utility = self.utilities(&z);
        self.value = self.objective(&self.utility).expect("start has positive utilities");
        self.z = z;
    }

    /// `theta_i u_ia / U_i` per live pair.
    fn gradient(&self) -> Vec<Vec<f64>> {
        self.live
            .agents
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                self.live.items.iter().map(|&a| self.theta[k] * self.problem.u(i, a) / self.utility[k]).collect()
            })
            .collect()
    }

    /// One Armijo-backtracked projected gradient step.
    fn step(&mut self) {
        let g = self.gradient();
        let (agents, items) = (self.live.agents.len(), self.live.items.len());
        let mut s = self.step;
        while s > 1e-18 {
            let mut trial = vec![vec![0.0; items]; agents];
            let mut column = vec![0.0; agents];
            for (l, &a) in self.live.items.iter().enumerate() {
                for k in 0..agents {
                    column[k] = self.z[k][l] + s * g[k][l];
                }
                let projected = project_simplex(&column, *self.problem.w(a));
                for k in 0..agents {
                    trial[k][l] = projected[k];
                }
            }
            let utility = self.utilities(&trial);
            if let Some(value) = self.objective(&utility) {
                let ascent: f64 = (0..agents)
                    .flat_map(|k| (0..items).map(move |l| (k, l)))
                    .map(|(k, l)| g[k][l] * (trial[k][l] - self.z[k][l]))
                    .sum();
                if value >= self.value + 1e-4 * ascent && value >= self.value {
                    let moved = ascent.abs() > 0.0;
                    self.z = trial;
                    self.utility = utility;
                    self.value = value;
                    self.step = (s * 2.0).min(1e6);
                    self.stalled = !moved;
                    return;
                }
            }
            s *= 0.5;
        }
        self.stalled = true;
    }
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - total) / (k + 1) as f64;
        if x - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

fn start_point(problem: &Problem, live: &Live, witness: &Allocation, start: Start) -> Vec<Vec<f64>> {
    // The witness may park goods with repulsed agents (who value them at 0);
    // hand those to the first attracted agent who likes the item.
    let mut base = vec![vec![0.0; live.items.len()]; live.agents.len()];
    for (l, &a) in live.items.iter().enumerate() {
        let mut parked = 0.0;
        for i in 0..problem.n() {
            match live.agents.iter().position(|&j| j == i) {
                Some(k) => base[k][l] = witness.shares[i][a],
                None => parked += witness.shares[i][a],
            }
        }
        if parked > 0.0 {
            let k = live.agents.iter().position(|&i| *problem.u(i, a) > 0.0).unwrap_or(0);
            base[k][l] += parked;
        }
    }
    let Start::Random(seed) = start else {
        return base;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = vec![vec![0.0; live.items.len()]; live.agents.len()];
    for (l, &a) in live.items.iter().enumerate() {
        let draws: Vec<f64> = (0..live.agents.len()).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = draws.iter().sum();
        for k in 0..live.agents.len() {
            noise[k][l] = draws[k] / total * problem.w(a);
        }
    }
    // Blend towards the witness until every utility is positive.
    let utility = |z: &[Vec<f64>]| -> bool {
        live.agents
            .iter()
            .enumerate()
            .all(|(k, &i)| live.items.iter().enumerate().map(|(l, &a)| problem.u(i, a) * z[k][l]).sum::<f64>() > 0.0)
    };
    let mut t = rng.gen_range(0.0..0.9);
    for _ in 0..60 {
        let mix: Vec<Vec<f64>> = base
            .iter()
            .zip(&noise)
            .map(|(b, r)| b.iter().zip(r).map(|(x, y)| t * x + (1.0 - t) * y).collect())
            .collect();
        if utility(&mix) {
            return mix;
        }
        t = 1.0 - (1.0 - t) / 2.0;
    }
    base
}

/// Relative slack of the candidate equality graphs tried by the polish.
const EQUALITY_SLACK: [f64; 4] = [1e-2, 1e-3, 1e-5, 1e-7];

fn polish(problem: &Problem, live: &Live, pg: &Ascent, theta: &[f64]) -> Option<Division> {
    let g = pg.gradient();
    let price: Vec<f64> = (0..live.items.len())
        .map(|l| (0..live.agents.len()).map(|k| g[k][l]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for slack in EQUALITY_SLACK {
        let mut graph: Vec<(f64, usize, usize)> = Vec::new();
        for (k, &i) in live.agents.iter().enumerate() {
            for (l, &a) in live.items.iter().enumerate() {
                if g[k][l] >= price[l] - slack * price[l].abs() && *problem.u(i, a) != 0.0 {
                    graph.push((pg.z[k][l], i, a));
                }
            }
        }
        // Heavily consumed pairs first so the forest follows the actual support.
        graph.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let edges: Vec<(usize, usize)> = graph.iter().map(|&(_, i, a)| (i, a)).collect();
        if let Some(d) = solve_on_graph(problem, live, &edges, theta) {
            return Some(d);
        }
    }
    None
}

/// Exact prices from a spanning forest of `edges`, then shares on the
/// consistent edges by LP.
fn solve_on_graph(problem: &Problem, live: &Live, edges: &[(usize, usize)], theta: &[f64]) -> Option<Division> {
    let (n, m) = (problem.n(), problem.m());
    // Work on the live part only: neutral items and repulsed agents drop out.
    let keep_items = &live.items;
    let reduced = Problem::new(
        live.agents.iter().map(|&i| problem.agents()[i].clone()).collect(),
        keep_items.iter().map(|&a| problem.items()[a].clone()).collect(),
        keep_items.iter().map(|&a| *problem.w(a)).collect(),
        live.agents.iter().map(|&i| keep_items.iter().map(|&a| *problem.u(i, a)).collect()).collect(),
    )
    .ok()?;
    let index_of = |i: usize, a: usize| {
        Some((live.agents.iter().position(|&j| j == i)?, keep_items.iter().position(|&b| b == a)?))
    };
    let local: Vec<(usize, usize)> = edges.iter().filter_map(|&(i, a)| index_of(i, a)).collect();
    let forest = spanning_forest(live.agents.len(), keep_items.len(), &local);
    let budget: Vec<f64> = live.agents.iter().map(|&i| theta[i]).collect();
    let sol = solve_forest(&reduced, &forest, &budget).ok()?;

    // Keep the graph edges the exact prices support.
    let consistent: Vec<(usize, usize)> = local
        .iter()
        .copied()
        .filter(|&(k, l)| {
            let d = sol.scale[k].expect("covered agent");
            let u = *reduced.u(k, l);
            (u - sol.price[l] * d).abs() <= 1e-9 * u.abs().max(1.0)
        })
        .collect();

    let mut shares = if sol.allocation.shares.iter().flatten().all(|&x| x >= -crate::model::NEG_CUTOFF) {
        sol.allocation.shares.clone()
    } else {
        shares_by_lp(&reduced, &consistent, &sol.price, &budget)?
    };
    for row in &mut shares {
        for x in row.iter_mut() {
            *x = x.max(0.0);
        }
    }

    let mut z = Allocation::zeros(n, m);
    let mut price = vec![0.0; m];
    for (l, &a) in keep_items.iter().enumerate() {
        price[a] = sol.price[l];
        for (k, &i) in live.agents.iter().enumerate() {
            z.shares[i][a] = shares[k][l];
        }
    }
    for a in (0..m).filter(|a| !keep_items.contains(a)) {
        let eater = (0..n).find(|&i| *problem.u(i, a) == 0.0).unwrap_or(0);
        z.shares[eater][a] = *problem.w(a);
    }
    Some(Division { allocation: z, price, budget: Budget::Positive })
}

/// Nonnegative shares on `edges` balancing every item and meeting every budget.
fn shares_by_lp(problem: &Problem, edges: &[(usize, usize)], price: &[f64], budget: &[f64]) -> Option<Vec<Vec<f64>>> {
    let (n, m) = (problem.n(), problem.m());
    let mut lp = LpSpec::maximize(vec![0.0; edges.len()]);
    for a in 0..m {
        let terms: Vec<(usize, f64)> =
            edges.iter().enumerate().filter(|(_, e)| e.1 == a).map(|(v, _)| (v, 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, *problem.w(a));
    }
    for (i, b) in budget.iter().enumerate() {
        let terms: Vec<(usize, f64)> =
            edges.iter().enumerate().filter(|(_, e)| e.0 == i).map(|(v, e)| (v, price[e.1])).collect();
        lp.constrain_sparse(&terms, Relation::Eq, *b);
    }
    let (point, _) = lp.solve().ok()?.optimal().ok()?;
    let mut z = vec![vec![0.0; m]; n];
    for (v, &(i, a)) in edges.iter().enumerate() {
        z[i][a] = point[v];
    }
    Some(z)
}

/// The current iterate as a division, prices from the stationarity maximum.
fn raw_division(problem: &Problem, live: &Live, pg: &Ascent, theta: &[f64]) -> Division {
    let (n, m) = (problem.n(), problem.m());
    let g = pg.gradient();
    let mut z = Allocation::zeros(n, m);
    let mut price = vec![0.0; m];
    for (l, &a) in live.items.iter().enumerate() {
        price[a] = (0..live.agents.len()).map(|k| g[k][l]).fold(f64::NEG_INFINITY, f64::max);
        for (k, &i) in live.agents.iter().enumerate() {
            z.shares[i][a] = pg.z[k][l];
        }
    }
    for a in (0..m).filter(|a| !live.items.contains(a)) {
        let eater = (0..n).find(|&i| *problem.u(i, a) == 0.0).unwrap_or(0);
        z.shares[eater][a] = *problem.w(a);
    }
    // Scale prices so the money identity matches the weights.
    let money: f64 = (0..m).map(|a| price[a] * problem.w(a)).sum();
    let owed: f64 = live.agents.iter().map(|&i| theta[i]).sum();
    if money != 0.0 {
        for p in &mut price {
            *p *= owed / money;
        }
    }
    Division { allocation: z, price, budget: Budget::Positive }
}
