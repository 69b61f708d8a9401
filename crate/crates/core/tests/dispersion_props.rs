use std::f64::consts::PI;

use fput2d_core::dispersion::{
    amplitude_ratio, correction_denominator, group_velocity, hessian, kernel_n, nls_coefficients, omega, wrap_angle,
    WaveVector,
};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

/// Carriers away from the zero-frequency point and the axes, where finite
/// differences of `omega` are well conditioned.
fn carrier() -> impl Strategy<Value = WaveVector> {
    (angle(), angle())
        .prop_filter("bounded away from zero frequency", |(k, l)| k.abs() > 0.1 && l.abs() > 0.1)
        .prop_map(|(k, l)| WaveVector::new(k, l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn omega_is_even(k in angle(), l in angle()) {
        let (a, b) = (omega(WaveVector::new(k, l)), omega(WaveVector::new(-k, -l)));
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.max(1.0));
    }

    #[test]
    fn derivatives_match_finite_differences(kv in carrier()) {
        let h = 1e-5;
        let w = |dk: f64, dl: f64| omega(WaveVector::new(kv.k() + dk, kv.l() + dl));
        let c = group_velocity(kv).unwrap();
        prop_assert!((c[0] - (w(h, 0.0) - w(-h, 0.0)) / (2.0 * h)).abs() < 1e-8);
        prop_assert!((c[1] - (w(0.0, h) - w(0.0, -h)) / (2.0 * h)).abs() < 1e-8);

        let hs = 1e-4;
        let hm = hessian(kv).unwrap();
        let fd_kk = (w(hs, 0.0) - 2.0 * w(0.0, 0.0) + w(-hs, 0.0)) / (hs * hs);
        let fd_ll = (w(0.0, hs) - 2.0 * w(0.0, 0.0) + w(0.0, -hs)) / (hs * hs);
        let fd_kl = (w(hs, hs) - w(hs, -hs) - w(-hs, hs) + w(-hs, -hs)) / (4.0 * hs * hs);
        prop_assert!((hm[0][0] - fd_kk).abs() < 1e-5);
        prop_assert!((hm[1][1] - fd_ll).abs() < 1e-5);
        prop_assert!((hm[0][1] - fd_kl).abs() < 1e-5);
        prop_assert_eq!(hm[0][1], hm[1][0]);
    }

    #[test]
    fn nonlinear_coefficients_are_imaginary(kv in carrier()) {
        let d = nls_coefficients(kv).unwrap();
        let (ga, gb) = (d.gamma_a.unwrap(), d.gamma_b.unwrap());
        prop_assert_eq!(ga.re, 0.0);
        prop_assert_eq!(gb.re, 0.0);
        prop_assert_eq!(d.gamma_q.re, 0.0);
        let wx2 = 2.0 - 2.0 * kv.k().cos();
        let wy2 = 2.0 - 2.0 * kv.l().cos();
        prop_assert!((gb.im * wy2 - ga.im * wx2).abs() <= 1e-12 * (ga.im * wx2).abs().max(1.0));
    }

    #[test]
    fn kernel_is_symmetric_and_bounded(k1 in angle(), k2 in angle(), k3 in angle()) {
        let n = kernel_n(k1, k2, k3);
        for perm in [(k1, k3, k2), (k2, k1, k3), (k2, k3, k1), (k3, k1, k2), (k3, k2, k1)] {
            prop_assert!((kernel_n(perm.0, perm.1, perm.2) - n).abs() < 1e-12);
        }
        prop_assert!(n.abs() <= 14.0 * wrap_angle(k1 + k2 + k3).abs() + 1e-12);
    }

    #[test]
    fn denominator_flips_sign_with_carrier_and_branch(kv in carrier(), m in prop::sample::select(vec![-3, -1, 1, 3])) {
        let neg = WaveVector::new(-kv.k(), -kv.l());
        prop_assert!((correction_denominator(neg, -m, -1) + correction_denominator(kv, m, 1)).norm() < 1e-12);
    }

    #[test]
    fn amplitude_ratio_is_conjugation_covariant(kv in carrier()) {
        let neg = WaveVector::new(-kv.k(), -kv.l());
        let r = amplitude_ratio(kv).unwrap();
        prop_assert!((amplitude_ratio(neg).unwrap() - r.conj()).norm() < 1e-12);
    }
}

#[test]
fn corner_carrier_has_equal_hessian_entries() {
    let h = hessian(WaveVector::from_pi_units(0.5, 0.5)).unwrap();
    for v in h.iter().flatten() {
        assert!((v + 0.125).abs() < 1e-15);
    }
}
