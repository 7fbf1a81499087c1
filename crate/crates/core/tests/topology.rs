use manna_core::topology::{pattern_ratios, ratio_instance};
use manna_core::{brute_force_components, clone_bads, ef_components_two_bads};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ratios at least this far (relative) from every threshold and from each
/// other, so a 200-cell grid resolves every region.
fn well_separated(r: &[f64]) -> bool {
    let n = r.len();
    let thresholds: Vec<f64> = (1..n).map(|i| i as f64 / (n - i) as f64).collect();
    let mut sorted = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[1] - w[0] > 0.02 * w[1])
        && r.iter().all(|x| thresholds.iter().all(|t| (x - t).abs() > 0.02 * t))
}

#[test]
fn formula_matches_grid_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 60 {
        let n = rng.gen_range(2..=6);
        let r: Vec<f64> = (0..n).map(|_| (rng.gen_range(-2.5f64..2.5)).exp()).collect();
        if !well_separated(&r) {
            continue;
        }
        let p = ratio_instance(&r).unwrap();
        let formula = ef_components_two_bads(&p).unwrap().count;
        let oracle = brute_force_components(&p, 200).unwrap();
        assert_eq!(formula, oracle, "ratios {r:?}");
        checked += 1;
    }
}

#[test]
fn pattern_family_up_to_nine() {
    for n in 3..=9 {
        let p = ratio_instance(&pattern_ratios(n)).unwrap();
        assert_eq!(ef_components_two_bads(&p).unwrap().count, (2 * n + 1) / 3, "n = {n}");
    }
}

#[test]
fn clones_keep_random_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(2..=6);
        let r: Vec<f64> = (0..n).map(|_| (rng.gen_range(-2.0f64..2.0)).exp()).collect();
        let p = ratio_instance(&r).unwrap();
        let m = rng.gen_range(3..=5);
        assert_eq!(
            ef_components_two_bads(&clone_bads(&p, m).unwrap()).unwrap().count,
            ef_components_two_bads(&p).unwrap().count
        );
    }
}

#[test]
fn non_unit_endowments_are_rescaled() {
    let p = ratio_instance(&[0.2, 0.3, 3.5, 4.0]).unwrap();
    let rows: Vec<Vec<f64>> = p.utilities().iter().map(|r| vec![r[0] * 2.0, r[1] / 4.0]).collect();
    let q = manna_core::Problem::from_rows(rows, vec![0.5, 4.0]).unwrap();
    assert_eq!(ef_components_two_bads(&q).unwrap(), ef_components_two_bads(&p).unwrap());
}
