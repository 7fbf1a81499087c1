//! Seeded random problems for property tests, audits and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classify::{classify, Kind};
use crate::model::Problem;

/// Sign pattern of the utility entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Goods,
    Bads,
    Mixed,
}

const ENDOWMENTS: [f64; 4] = [1.0, 2.0, 0.5, 3.0];

/// Integer utilities in `1..=9` (signed per family), endowments from a small set.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, family: Family) -> Problem {
    let utilities = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let v = rng.gen_range(1..=9) as f64;
                    match family {
                        Family::Goods => v,
                        Family::Bads => -v,
                        Family::Mixed => match rng.gen_range(0..7) {
                            0..=2 => v,
                            3..=5 => -v,
                            _ => 0.0,
                        },
                    }
                })
                .collect()
        })
        .collect();
    let endowment = (0..m).map(|_| *ENDOWMENTS.choose(rng).expect("nonempty")).collect();
    Problem::from_rows(utilities, endowment).expect("valid by construction")
}

/// A problem of the requested kind. Positive and negative problems come from
/// rejection sampling over mixed matrices; null problems are built directly.
pub fn random_of_kind<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, kind: Kind) -> Problem {
    match kind {
        Kind::Null => random_null(rng, n, m),
        Kind::Positive | Kind::Negative => loop {
            let family = match (kind, rng.gen_range(0..3)) {
                (Kind::Positive, 0) => Family::Goods,
                (Kind::Negative, 0) => Family::Bads,
                _ => Family::Mixed,
            };
            let p = random_problem(rng, n, m, family);
            if classify(&p).map(|c| c.kind) == Ok(kind) {
                return p;
            }
        },
    }
}

/// Null problems: either nobody likes anything and every item has an
/// indifferent consumer, or a rescaled copy of a two-agent knife-edge instance
/// padded with indifferent agents and items.
pub fn random_null<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Problem {
    if n >= 2 && m >= 3 && rng.gen_bool(0.5) {
        // Agent 1 hates a, agent 2 hates b, both value c at 2: spending on c
        // exactly cancels the bads, so the best common profile is zero.
        let s1 = rng.gen_range(1..=4) as f64;
        let s2 = rng.gen_range(1..=4) as f64;
        let mut rows = vec![vec![0.0; m]; n];
        rows[0][0] = -s1;
        rows[0][1] = -3.0 * s1;
        rows[0][2] = 2.0 * s1;
        rows[1][0] = -2.0 * s2;
        rows[1][1] = -s2;
        rows[1][2] = 2.0 * s2;
        for (i, row) in rows.iter_mut().enumerate().skip(2) {
            for (a, v) in row.iter_mut().enumerate() {
                // A free bad for a padding agent would unload agents 1 and 2,
                // so zeros only go on the extra items.
                *v = if m > 3 && a == 3 + i % (m - 3) { 0.0 } else { -(rng.gen_range(1..=9) as f64) };
            }
        }
        for row in rows.iter_mut().take(2) {
            for v in row.iter_mut().skip(3) {
                *v = -(rng.gen_range(1..=9) as f64);
            }
        }
        // Extra items need an indifferent consumer among the padding agents;
        // fall back on agent 1 when there is none.
        for a in 3..m {
            if !rows.iter().any(|r| r[a] == 0.0) {
                rows[0][a] = 0.0;
            }
        }
        return Problem::unit(rows).expect("valid by construction");
    }
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| -(rng.gen_range(0..=9) as f64)).collect()).collect();
    for a in 0..m {
        let i = rng.gen_range(0..n);
        rows[i][a] = 0.0;
    }
    let endowment = (0..m).map(|_| *ENDOWMENTS.choose(rng).expect("nonempty")).collect();
    Problem::from_rows(rows, endowment).expect("valid by construction")
}
