mod common;

use holland_core::stats::{fit_lmm, studentized_range_cdf, studentized_range_quantile};
use proptest::prelude::*;

fn assert_check(c: common::Check) {
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn survey_design_dfs() {
    assert_check(common::check_survey_dfs());
}

#[test]
fn reml_matches_dense_grid() {
    assert_check(common::check_lmm_oracle());
}

#[test]
fn oracle_agrees_with_library_criterion_off_optimum() {
    let frame = common::random_lmm_frame(7);
    let oracle = common::RemlOracle::new(&frame);
    for theta in [0.0, 0.1, 1.0, 10.0] {
        let lib = holland_core::stats::reml_criterion(&frame, theta).unwrap();
        assert!((lib - oracle.criterion(theta)).abs() < 1e-9, "theta {theta}");
    }
    assert!(fit_lmm(&frame).unwrap().theta >= 0.0);
}

#[test]
fn boundary_fit_is_ols() {
    assert_check(common::check_ols_boundary());
}

#[test]
fn studentized_range_identity_and_table() {
    assert_check(common::check_studentized_range());
}

#[test]
fn studentized_range_matches_simpson_oracle() {
    for (k, df) in [(3u32, 10.0), (4, 20.0), (6, 60.0), (10, 5.0)] {
        for q in [0.5, 1.5, 3.0, 4.5, 7.0] {
            let lib = studentized_range_cdf(q, k, df);
            let oracle = common::oracle_sr_cdf(q, k, df);
            assert!((lib - oracle).abs() < 1e-6, "k={k} df={df} q={q}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn published_critical_values() {
    // Upper 5% points of the studentized range.
    for (k, df, table) in [(2u32, 10.0, 3.151), (3, 10.0, 3.877), (4, 20.0, 3.958), (5, 30.0, 4.102)] {
        let q = studentized_range_quantile(0.95, k, df);
        assert!((q - table).abs() < 6e-4, "k={k} df={df}: {q} vs {table}");
    }
}

#[test]
fn correlation_summaries() {
    assert_check(common::check_correlation());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sr_cdf_is_monotone_in_q(k in 2u32..8, df in 3.0f64..200.0, q in 0.0f64..8.0, dq in 0.01f64..2.0) {
        let a = studentized_range_cdf(q, k, df);
        let b = studentized_range_cdf(q + dq, k, df);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn sr_cdf_decreases_with_more_groups(k in 2u32..8, df in 3.0f64..200.0, q in 0.1f64..8.0) {
        prop_assert!(studentized_range_cdf(q, k + 1, df) <= studentized_range_cdf(q, k, df) + 1e-12);
    }

    #[test]
    fn sr_quantile_inverts_cdf(k in 2u32..8, df in 3.0f64..200.0, p in 0.05f64..0.99) {
        let q = studentized_range_quantile(p, k, df);
        prop_assert!((studentized_range_cdf(q, k, df) - p).abs() < 1e-8);
    }
}
