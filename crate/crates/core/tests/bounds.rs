use bai_core::allocation::oracle_allocation;
use bai_core::bounds::{
    minimax_lower, minimax_lower_multi, rs_aipw_upper, worst_case_gap,
    worst_case_gap_from_variance, VarianceIntegrals,
};
use bai_core::estimators::variance_functional;
use bai_core::model::{make_synthetic_model, ContextDistribution, LocationShiftBandit};
use bai_core::rng::from_seed;
use rand::Rng;

// Synthetic design drawn with seed 2024; integrals use seed 2025 and 10^6 draws.
const DESIGN_SEED: u64 = 2024;
const DRAW_SEED: u64 = 2025;

fn rel_close(got: f64, want: f64) -> bool {
    ((got - want) / want).abs() < 1e-9
}

#[test]
fn golden_three_arm_integrals() {
    let m = make_synthetic_model(3, 2, 1.0, 0.8, &mut from_seed(DESIGN_SEED)).unwrap();
    let vi = VarianceIntegrals::estimate(&m, 1_000_000, &mut from_seed(DRAW_SEED)).unwrap();
    let s = vi.sum_expected_variance;
    assert!(s.std_err < 0.01 * s.value);
    assert!(
        rel_close(minimax_lower_multi(&vi).value, 0.254476602833),
        "{}",
        minimax_lower_multi(&vi).value
    );
    assert!(
        rel_close(rs_aipw_upper(&vi).value, 3.817149042492),
        "{}",
        rs_aipw_upper(&vi).value
    );
}

#[test]
fn golden_two_arm_gap() {
    let m = make_synthetic_model(2, 2, 1.0, 0.8, &mut from_seed(DESIGN_SEED)).unwrap();
    let v = variance_functional(
        &m,
        |x: &[f64]| oracle_allocation(&m, x),
        0,
        1,
        1_000_000,
        &mut from_seed(DRAW_SEED),
    )
    .unwrap();
    assert!(v.std_err < 0.01 * v.value);
    assert!(rel_close(v.value, 10.103483913254), "{}", v.value);
    let g = worst_case_gap(&m, 0, 1, 1000, 1_000_000, &mut from_seed(DRAW_SEED)).unwrap();
    assert!(rel_close(g, 0.071075607325), "{g}");
    assert!(rel_close(
        g,
        worst_case_gap_from_variance(v.value, 1000).unwrap()
    ));
}

#[test]
fn lower_never_exceeds_upper_on_constant_models() {
    let mut rng = from_seed(3);
    for _ in 0..500 {
        let k = rng.random_range(2..=10);
        let means: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let vars: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
        let m =
            LocationShiftBandit::constant(&means, &vars, ContextDistribution::synthetic_default())
                .unwrap();
        let vi = VarianceIntegrals::estimate(&m, 10, &mut rng).unwrap();
        let (lo, hi) = (minimax_lower(&vi).value, rs_aipw_upper(&vi).value);
        assert!(lo.is_finite() && lo >= 0.0 && lo <= hi);
    }
}
