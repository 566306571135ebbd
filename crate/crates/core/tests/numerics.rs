use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use safe_wncs::fbl::{self, erfc, gaussian_q, gaussian_q_inv};

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact `floor((alpha - m/B) / h)` and `p^n <= 1 - delta` over rationals.
fn paoi_exact(h: &BigRational, m: u32, p: &BigRational, alpha: &BigRational, delta: &BigRational, b: &BigRational) -> (u64, bool) {
    let window = alpha - BigRational::from_integer(BigInt::from(m)) / b;
    let n = (window / h).floor().to_integer().to_u64().unwrap();
    let mut pow = BigRational::one();
    for _ in 0..n {
        pow *= p;
    }
    (n, pow <= BigRational::one() - delta)
}

#[test]
fn erfc_far_tail() {
    // mpmath references, rounded to double.
    let cases = [
        (5.773773527645829, 3.205_076_827_780_857e-16),
        (10.0, 2.088_487_583_762_545e-45),
        (20.0, 5.395_865_611_607_901e-176),
        (25.36245266882006, 9.665_668_439_396_572e-282),
    ];
    for (x, want) in cases {
        let got = erfc(x);
        assert!((got - want).abs() <= 1e-14 * want, "x={x} got={got:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn erfc_matches_statrs(x in -5.0f64..26.0) {
        // statrs is only good to ~1e-10 relative past x = 5, so this is a
        // coarse cross-check; precision is pinned by the fixed points above.
        let want = statrs::function::erf::erfc(x);
        let got = erfc(x);
        prop_assume!(want > 1e-290);
        prop_assert!((got - want).abs() <= 1e-9 * want, "x={x} got={got} want={want}");
    }

    #[test]
    fn erfc_is_decreasing(a in -6.0f64..26.0, d in 1e-6f64..1.0) {
        prop_assert!(erfc(a + d) <= erfc(a));
    }

    #[test]
    fn erfc_reflection(x in 0.0f64..6.0) {
        prop_assert!((erfc(x) + erfc(-x) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn q_inverse_round_trips(e in -300.0f64..-0.302) {
        let p = 10f64.powf(e);
        let x = gaussian_q_inv(p).unwrap();
        let back = gaussian_q(x).unwrap();
        prop_assert!((back - p).abs() <= 1e-10 * p, "p={p} back={back}");
    }

    #[test]
    fn transmit_power_falls_with_error_prob(m in 1u32..300, l in 1u32..64, a in 1e-9f64..0.49, r in 1.01f64..2.0) {
        let c1 = 1e-9;
        let lo = fbl::transmit_power(m, a, c1, l).unwrap();
        let hi = fbl::transmit_power(m, (a * r).min(0.99), c1, l).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn transmit_power_is_linear_in_c1(m in 1u32..300, l in 1u32..64, p in 1e-9f64..0.5, c in 1e-12f64..1e-3, s in 1.0f64..100.0) {
        let a = fbl::transmit_power(m, p, c, l).unwrap();
        let b = fbl::transmit_power(m, p, c * s, l).unwrap();
        prop_assert!((b - s * a).abs() <= 1e-12 * b.abs().max(1e-300));
    }

    #[test]
    fn paoi_test_agrees_with_exact_arithmetic(
        h_us in 1_000i64..100_000,
        m in 1u32..200,
        p_milli in 1i64..999,
        alpha_ms in 20i64..120,
        delta_milli in 900i64..999,
    ) {
        let b = rat(100_000, 1);
        let h = rat(h_us, 1_000_000);
        let p = rat(p_milli, 1000);
        let alpha = rat(alpha_ms, 1000);
        let delta = rat(delta_milli, 1000);
        prop_assume!(alpha.clone() - BigRational::from_integer(BigInt::from(m)) / &b > BigRational::zero());
        let (n, ok) = paoi_exact(&h, m, &p, &alpha, &delta, &b);
        prop_assume!(n <= 200);

        let hf = h_us as f64 / 1e6;
        let af = alpha_ms as f64 / 1e3;
        let pf = p_milli as f64 / 1e3;
        let df = delta_milli as f64 / 1e3;
        prop_assert_eq!(fbl::reception_opportunities(hf, m, af, 1e5).unwrap(), n);

        // Skip draws whose exact margin is too small for doubles.
        let margin = (pf.powf(n as f64) - (1.0 - df)).abs();
        prop_assume!(margin > 1e-12);
        prop_assert_eq!(fbl::paoi_feasible(hf, m, pf, af, df, 1e5).unwrap(), ok);
    }
}
