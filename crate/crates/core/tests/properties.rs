use adoption_core::benchmark::{integrate_transparent, solve_transparent};
use adoption_core::designer::optimal_policy;
use adoption_core::disclosure::{solve_equilibrium, welfare, DisclosurePolicy};
use adoption_core::export::plot_end;
use adoption_core::model::{Cohort, Market};
use adoption_core::verify::myopic_crossings;
use proptest::prelude::*;
use proptest::test_runner::Config;

fn market() -> impl Strategy<Value = Market> {
    (
        1.0..10.0f64,
        0.5..10.0f64,
        0.05..0.95f64,
        0.2..3.0f64,
        0.2..3.0f64,
        0.5..3.0f64,
        prop::collection::vec((0.3..0.9f64, 0.2..2.0f64), 1..=3),
    )
        .prop_map(|(v_good, loss, share, rate_good, rate_bad, r1, steps)| {
            let v_bad = -loss;
            let threshold = loss / (v_good + loss);
            let prior = threshold + share * (1.0 - threshold);
            let mut r = r1;
            let cohorts = steps
                .iter()
                .map(|&(shrink, mass)| {
                    let c = Cohort::new(r, mass);
                    r *= shrink;
                    c
                })
                .collect();
            Market { v_good, v_bad, prior, rate_good, rate_bad, cohorts }
        })
}

proptest! {
    #![proptest_config(Config { failure_persistence: None, ..Config::default() })]

    #[test]
    fn belief_monotone_in_evidence(m in market(), z in 0.0..5.0f64, other in 0.0..5.0f64, dz in 1e-3..1.0f64) {
        prop_assert!(m.posterior_no_news(z + dz, other) < m.posterior_no_news(z, other));
        prop_assert!(m.posterior_no_news(other, z + dz) > m.posterior_no_news(other, z));
    }

    #[test]
    fn symmetric_rates_are_neutral(m in market(), z in 0.0..20.0f64) {
        let m = Market { rate_bad: m.rate_good, ..m };
        prop_assert!((m.posterior_no_news(z, z) - m.prior).abs() < 1e-14);
    }

    #[test]
    fn expected_value_affine_and_zero_at_threshold(m in market(), a in 0.0..1.0f64, b in 0.0..1.0f64, w in 0.0..1.0f64) {
        let mix = m.expected_value(w * a + (1.0 - w) * b);
        let split = w * m.expected_value(a) + (1.0 - w) * m.expected_value(b);
        prop_assert!((mix - split).abs() < 1e-12);
        prop_assert!(m.expected_value(m.myopic_threshold()).abs() < 1e-14);
    }

    #[test]
    fn bayes_consistency(m in market(), zg in 0.0..5.0f64, zb in 0.0..5.0f64) {
        let numerator = m.prior * (-m.rate_good * zg).exp();
        let denominator = numerator + (1.0 - m.prior) * (-m.rate_bad * zb).exp();
        prop_assert!((m.posterior_no_news(zg, zb) * denominator - numerator).abs() < 1e-14);
        prop_assert!((m.no_news_probability(zg, zb) - denominator).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(Config { cases: 48, failure_persistence: None, ..Config::default() })]

    #[test]
    fn benchmark_closed_form_matches_integration(m in market()) {
        let closed = solve_transparent(&m).unwrap();
        let times = closed.phase_times();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        let shortest = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let numeric = integrate_transparent(&m, if shortest.is_finite() { shortest / 2000.0 } else { 1e-4 }).unwrap();
        let end = plot_end(&times, 1.0);
        for k in 0..=400 {
            let t = end * k as f64 / 400.0;
            prop_assert!((closed.q_at(t) - numeric.q_at(t)).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn optimal_plan_is_consistent_and_beats_transparency(m in market()) {
        let plan = optimal_policy(&m).unwrap();
        let path = solve_equilibrium(&m, &plan.policy, 1e3).unwrap();
        let w = welfare(&m, &path);
        prop_assert!((w.total - plan.welfare).abs() < 1e-7, "{} vs {}", w.total, plan.welfare);
        let transparent = welfare(&m, &solve_equilibrium(&m, &DisclosurePolicy::transparent(), 1e3).unwrap());
        prop_assert!(plan.welfare >= transparent.total - 1e-9, "{} < {}", plan.welfare, transparent.total);
    }

    #[test]
    fn optimal_paths_cross_the_threshold_at_most_once(m in market()) {
        let plan = optimal_policy(&m).unwrap();
        let path = solve_equilibrium(&m, &plan.policy, 1e3).unwrap();
        let report = myopic_crossings(&path, plot_end(&path.breakpoints(), 1.0), 300, 1e-12);
        prop_assert!(report.single_downward(), "{report:?}");
    }
}
