//! Instances shared by the benchmarks.

use manna_core::random::random_of_kind;
use manna_core::{Kind, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit(rows: &[&[f64]]) -> Problem {
    Problem::unit(rows.iter().map(|r| r.to_vec()).collect()).expect("fixed instance is valid")
}

/// Two agents, two bads and an item worth `l` to both.
pub fn lambda(l: f64) -> Problem {
    unit(&[&[-1.0, -3.0, l], &[-2.0, -1.0, l]])
}

pub fn two_agents_six_bads() -> Problem {
    unit(&[&[-1.0, -1.0, -2.0, -4.0, -8.0, -17.0], &[-17.0, -8.0, -4.0, -2.0, -1.0, -1.0]])
}

pub fn six_agents_two_bads() -> Problem {
    unit(&[&[-1.0, -6.0], &[-1.0, -3.0], &[-2.0, -3.0], &[-3.0, -2.0], &[-3.0, -1.0], &[-6.0, -1.0]])
}

/// Five specialists and a generalist over five bads.
pub fn six_by_five() -> Problem {
    let mut rows: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|a| if a == i { -1.0 } else { -3.0 }).collect()).collect();
    rows.push(vec![-1.0; 5]);
    Problem::unit(rows).expect("fixed instance is valid")
}

pub fn random(kind: Kind, n: usize, m: usize, seed: u64) -> Problem {
    random_of_kind(&mut ChaCha8Rng::seed_from_u64(seed), n, m, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use manna_core::classify;

    #[test]
    fn fixtures_have_the_expected_kinds() {
        assert_eq!(classify(&lambda(-1.0)).unwrap().kind, Kind::Negative);
        assert_eq!(classify(&lambda(4.0)).unwrap().kind, Kind::Positive);
        for p in [two_agents_six_bads(), six_agents_two_bads(), six_by_five()] {
            assert_eq!(classify(&p).unwrap().kind, Kind::Negative);
        }
        assert_eq!(classify(&random(Kind::Positive, 4, 4, 1)).unwrap().kind, Kind::Positive);
    }
}
