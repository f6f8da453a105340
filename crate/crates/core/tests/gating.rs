use hhlab::gating::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn drift_relaxes_toward_steady_state(v in -80.0f64..120.0, x in 0.0f64..1.0) {
        for kind in RateKind::ALL {
            let g = gating_drift(kind, v, x);
            let target = steady_state(kind, v);
            let lambda = relaxation_rate(kind, v);
            prop_assert!((g - lambda * (target - x)).abs() <= 1e-12 * lambda.max(1.0));
            prop_assert!(g * (target - x) >= 0.0);
        }
    }

    #[test]
    fn gates_point_inward_on_the_box(v in -80.0f64..120.0) {
        for kind in RateKind::ALL {
            prop_assert!(gating_drift(kind, v, 0.0) > 0.0);
            prop_assert!(gating_drift(kind, v, 1.0) < 0.0);
        }
    }

    #[test]
    fn steady_current_matches_full_current(v in -30.0f64..60.0) {
        let s = State4::on_steady_state_curve(v);
        prop_assert_eq!(f_infty(v), current_f(&s));
        prop_assert!((f_infty_jet(v, 2).value() - f_infty(v)).abs() <= 1e-12 * f_infty(v).abs().max(1.0));
    }

    #[test]
    fn state_validation_matches_open_box(n in -0.5f64..1.5, m in 0.01f64..0.99, h in 0.01f64..0.99) {
        let inside = n > 0.0 && n < 1.0;
        prop_assert_eq!(State4::new(0.0, n, m, h).is_ok(), inside);
    }
}

#[test]
fn steady_current_crosses_reference_levels() {
    // F∞ is increasing across the input range reached at ±10 mV.
    let mut prev = f_infty(-10.0);
    for i in 1..=200 {
        let f = f_infty(-10.0 + 0.1 * i as f64);
        assert!(f > prev);
        prev = f;
    }
    assert!(f_infty(-10.0) < 0.0 && f_infty(10.0) > 20.0);
}

#[test]
fn phi_is_smooth_across_the_series_switch() {
    let t = PHI_SERIES_THRESHOLD;
    for x in [t * (1.0 - 1e-12), t * (1.0 + 1e-12), -t * (1.0 - 1e-12), -t * (1.0 + 1e-12)] {
        assert!((phi(x) - phi_series(x)).abs() < 1e-14, "{x}");
    }
}
