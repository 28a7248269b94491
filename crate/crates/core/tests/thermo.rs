use hydromac::GasLaw;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root of `r (h'(b) - h'(a)) = b^γ - a^γ` on `[a, b]` by bisection.
fn gmean_bisect(g: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let dh = g / (g - 1.0) * (hi.powf(g - 1.0) - lo.powf(g - 1.0));
    let dp = hi.powf(g) - lo.powf(g);
    let (mut l, mut r) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (l + r);
        if m * dh < dp {
            l = m;
        } else {
            r = m;
        }
    }
    0.5 * (l + r)
}

#[test]
fn gamma_mean_against_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in [1.1, 1.4, 2.0, 3.0] {
        let law = GasLaw::new(g).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let a: f64 = 10f64.powf(rng.random_range(-2.0..1.0));
            // keep the pair separated so the oracle's differences stay accurate
            let r = 10f64.powf(rng.random_range(1e-3..2.0));
            let b = if rng.random_bool(0.5) { a * r } else { a / r };
            let v = law.gmean(a, b);
            let o = gmean_bisect(g, a, b);
            worst = worst.max((v - o).abs() / o);
        }
        assert!(worst <= 1e-12, "γ = {g}: relative error {worst:e}");
    }
}

#[test]
fn gamma_two_is_arithmetic() {
    let law = GasLaw::new(2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (a, b) = (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0));
        assert!((law.gmean(a, b) - 0.5 * (a + b)).abs() <= 1e-14 * (a + b));
    }
}

proptest! {
    #[test]
    fn gamma_mean_is_a_symmetric_mean(g in 1.05f64..3.5, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let law = GasLaw::new(g).unwrap();
        let v = law.gmean(a, b);
        prop_assert_eq!(v, law.gmean(b, a));
        prop_assert!(v >= a.min(b) && v <= a.max(b));
        let s = law.gmean(2.0 * a, 2.0 * b);
        prop_assert!((s - 2.0 * v).abs() <= 1e-12 * v);
    }

    #[test]
    fn gamma_mean_derivatives_match_differences(g in 1.1f64..3.0, a in 0.1f64..5.0, r in 1.01f64..4.0) {
        let law = GasLaw::new(g).unwrap();
        let b = a * r;
        let (da, db) = law.gmean_derivatives(a, b);
        let h = 1e-6 * a;
        let fa = (law.gmean(a + h, b) - law.gmean(a - h, b)) / (2.0 * h);
        let fb = (law.gmean(a, b + h) - law.gmean(a, b - h)) / (2.0 * h);
        prop_assert!((da - fa).abs() < 1e-6, "{} vs {}", da, fa);
        prop_assert!((db - fb).abs() < 1e-6, "{} vs {}", db, fb);
    }

    #[test]
    fn relative_energy_properties(g in 1.05f64..3.5, rho_ref in 1e-2f64..1e2, x in -0.99f64..5.0) {
        let law = GasLaw::new(g).unwrap();
        let rho = rho_ref * (1.0 + x);
        let pi = law.pi_rel(rho, rho_ref);
        prop_assert!(pi >= 0.0);
        prop_assert_eq!(law.pi_rel(rho_ref, rho_ref), 0.0);
        // against the definition when cancellation is harmless
        if x.abs() > 0.1 {
            let direct = law.h(rho) - law.h(rho_ref) - law.h_prime(rho_ref) * (rho - rho_ref);
            prop_assert!((pi - direct).abs() <= 1e-12 * (law.h(rho).abs() + law.h(rho_ref).abs()));
        }
        // convex in ρ: the chord midpoint lies above
        let (r1, r2) = (rho_ref * (1.0 + 0.5 * x), rho);
        let mid = law.pi_rel(0.5 * (r1 + r2), rho_ref);
        prop_assert!(mid <= 0.5 * (law.pi_rel(r1, rho_ref) + pi) * (1.0 + 1e-12) + 1e-300);
        // quadratic for small perturbations: Π ≈ ½ h''(ρ̃) w²
        let w = 1e-6 * rho_ref;
        let quad = 0.5 * law.h_second(rho_ref) * w * w;
        prop_assert!((law.pi_rel(rho_ref + w, rho_ref) - quad).abs() <= 1e-5 * quad);
    }

    #[test]
    fn enthalpy_difference_is_accurate(g in 1.05f64..3.5, rho_ref in 0.1f64..10.0, x in -0.5f64..0.5) {
        let law = GasLaw::new(g).unwrap();
        let w = rho_ref * x;
        let direct = law.h_prime(rho_ref + w) - law.h_prime(rho_ref);
        prop_assert!((law.h_prime_diff(w, rho_ref) - direct).abs() <= 1e-13 * law.h_prime(rho_ref).max(1.0));
    }
}
