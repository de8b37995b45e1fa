use coulomb_tmat::basis::{eta_recurrence_residual, eta_sequence, upsilon};
use coulomb_tmat::coeffs::{beta_seq, beta_seq_normalised, CoeffContext};
use coulomb_tmat::opmatrix::{a_matrix, b_factor, b_inverse, g_recurrence_residual, g_sequence, phi_sequence};
use coulomb_tmat::oracle::linalg::{asymmetry, max_abs, max_abs_block};
use coulomb_tmat::params::sqrt_upper;
use coulomb_tmat::specfun::{hyp2f1, Hyp2F1Params};
use coulomb_tmat::tmatrix::tau_diagonal_special;
use coulomb_tmat::{CMatrix, Complex64, DimensionlessState};
use proptest::prelude::*;

fn upper_y() -> impl Strategy<Value = Complex64> {
    (-5.0f64..5.0, 0.3f64..3.0).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sqrt_upper_lies_in_upper_half_plane(re in -10.0f64..10.0, im in -10.0f64..10.0) {
        let y = Complex64::new(re, im);
        let s = sqrt_upper(y);
        prop_assert!(s.im >= 0.0);
        prop_assert!((s * s - y).norm() <= 1e-12 * y.norm().max(1.0));
    }

    #[test]
    fn eta_recurrence_holds(n in 1usize..30, l in 0usize..6, k in 0.05f64..8.0) {
        prop_assert!(eta_recurrence_residual(n, l, k) < 1e-10);
    }

    #[test]
    fn eta_is_finite_and_upsilon_positive(n in 0usize..60, l in 0usize..10, k in 0.0f64..50.0) {
        prop_assert!(eta_sequence(n, l, k).iter().all(|v| v.is_finite()));
        prop_assert!(upsilon(n, l) > 0.0);
    }

    #[test]
    fn terminating_hypergeometric_is_a_polynomial(m in 0usize..8, b in -3.0f64..3.0, c in 0.5f64..4.0, x in -0.9f64..0.9) {
        let p = Hyp2F1Params::new(Complex64::new(-(m as f64), 0.0), Complex64::new(b, 0.0), Complex64::new(c, 0.0), Complex64::new(x, 0.0));
        let v = hyp2f1(&p).unwrap().value;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..m {
            let kf = k as f64;
            term *= (kf - m as f64) * (b + kf) / ((c + kf) * (kf + 1.0)) * x;
            sum += term;
        }
        prop_assert!((v.re - sum).abs() < 1e-12 * sum.abs().max(1.0));
    }

    #[test]
    fn a_is_symmetric_tridiagonal(y in upper_y(), rho in 0.2f64..3.0, l in 0usize..4) {
        let st = DimensionlessState::from_reduced(y, rho).unwrap();
        let a = a_matrix(l, &st, 12).unwrap().entries;
        prop_assert_eq!(asymmetry(&a), 0.0);
        for i in 0..12usize {
            for j in 0..12 {
                if i.abs_diff(j) > 1 {
                    prop_assert_eq!(a[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn factorisation_chain(y in upper_y(), rho in 0.3f64..2.0, l in 0usize..3, attractive in any::<bool>()) {
        let sigma = if attractive { -1.0 } else { 1.0 };
        let st = DimensionlessState::from_reduced(y, rho).unwrap();
        let n = 24;
        let seq = beta_seq(n + 1, &CoeffContext::new(l, st, sigma).unwrap()).unwrap();
        let phi = phi_sequence(l, &st, n + 2);
        let b = b_factor(&seq, &phi, n).unwrap().entries;
        let shifted = a_matrix(l, &st, n).unwrap().shift(sigma).unwrap().entries;
        let bbt = &b * b.transpose();
        prop_assert!(max_abs_block(&(&bbt - &shifted), n - 1) < 1e-9 * max_abs(&shifted));
        let bi = b_inverse(&seq, &phi, n).unwrap().entries;
        prop_assert!(max_abs(&(&bi * &b - CMatrix::identity(n, n))) < 1e-10);
        let g = g_sequence(&seq, &phi, sigma, n).unwrap();
        for k in 0..n - 1 {
            prop_assert!(g_recurrence_residual(k, &g, &seq, &phi, sigma) < 1e-9);
        }
    }

    #[test]
    fn beta_ignores_normalisation(y in upper_y(), c_re in -3.0f64..3.0, c_im in 0.1f64..3.0) {
        let st = DimensionlessState::from_reduced(y, 1.0).unwrap();
        let ctx = CoeffContext::new(1, st, -1.0).unwrap();
        let a = beta_seq(10, &ctx).unwrap();
        let b = beta_seq_normalised(10, &ctx, Complex64::new(c_re, c_im)).unwrap();
        for n in 0..=10 {
            prop_assert!((a.beta[n] - b.beta[n]).norm() <= 1e-12 * a.beta[n].norm());
        }
    }

    #[test]
    fn repulsive_special_tau_is_between_zero_and_one(n in 0usize..10, l in 0usize..5, e in 1e-3f64..10.0) {
        let t = tau_diagonal_special(n, l, e, 1.0, 0.5).unwrap();
        prop_assert!(t > 0.0 && t < 1.0);
    }
}
