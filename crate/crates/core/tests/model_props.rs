mod common;

use fshedge::{AdditiveModel, AssumptionItem, ComplexPair, LevyParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn pair(a: f64, b: f64, c: f64, d: f64) -> ComplexPair {
    ComplexPair::new(Complex64::new(a, b), Complex64::new(c, d)).unwrap()
}

fn piecewise() -> AdditiveModel {
    let p1 = LevyParams::from_vols([0.02, 0.04], 0.3, 0.2, 0.5).with_jumps(
        1.0,
        [-0.1, -0.05],
        [[0.02, 0.005], [0.005, 0.01]],
    );
    let p2 = LevyParams::from_vols([0.01, -0.01], 0.2, 0.35, -0.3);
    AdditiveModel::piecewise(&[(0.4, p1), (1.0, p2)], 100.0, 100.0).unwrap()
}

fn models() -> Vec<AdditiveModel> {
    vec![common::merton(), common::basis_risk_model(), piecewise()]
}

fn frequency() -> impl Strategy<Value = ComplexPair> {
    (-1.0..1.5f64, -15.0..15.0f64, -1.0..1.5f64, -15.0..15.0f64).prop_map(|(a, b, c, d)| pair(a, b, c, d))
}

#[test]
fn gamma_and_kappa_identities() {
    for m in models() {
        for t in [0.0, 0.2, 0.4, 0.9] {
            assert_eq!(m.gamma(t, ComplexPair::S), Complex64::new(1.0, 0.0));
            assert_eq!(m.gamma(t, ComplexPair::ORIGIN), Complex64::new(0.0, 0.0));
            assert_eq!(m.kappa(t, ComplexPair::ORIGIN), Complex64::new(0.0, 0.0));
            assert_eq!(m.lambda(t, ComplexPair::S), Complex64::new(1.0, 0.0));
        }
    }
}

#[test]
fn vanishing_clock_names_first_item() {
    let p = LevyParams::brownian([0.0, 0.0], [[0.04, 0.0], [0.0, 0.0]]);
    let e = AdditiveModel::levy(p, 1.0, 1.0, 1.0).unwrap_err();
    assert_eq!(e.assumption_item(), Some(AssumptionItem::StrictlyIncreasingClock));
    assert!(e.to_string().contains("item 1"), "{e}");
}

#[test]
fn black_scholes_tradeoff() {
    // μ = 8%, σ = 20%: K_T = μ²/σ² · T
    let m = AdditiveModel::levy(LevyParams::from_vols([0.0, 0.06], 0.3, 0.2, 0.1), 2.0, 1.0, 1.0).unwrap();
    let k = m.tradeoff(&[0.0, 1.0, 2.0]).unwrap();
    assert!((k.values[2] - 0.32).abs() < 1e-14);
    assert!((k.values[1] - 0.16).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_is_additive_in_time(z in frequency(), t in 0.0..0.5f64, u in 0.0..0.5f64) {
        for m in [common::merton(), common::basis_risk_model()] {
            let lhs = m.kappa(t + u, z);
            let rhs = m.kappa(t, z) + m.kappa(u, z);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn rho_on_conjugates_is_a_nondecreasing_variance(z in frequency(), t in 0.0..0.9f64, dt in 0.0..0.1f64) {
        for m in models() {
            let r0 = m.rho(t, z, z.conj());
            let r1 = m.rho(t + dt, z, z.conj());
            prop_assert!(r0.im.abs() <= 1e-10 * (1.0 + r0.re.abs()));
            prop_assert!(r0.re >= -1e-12);
            prop_assert!(r1.re >= r0.re - 1e-10 * (1.0 + r0.re.abs()));
        }
    }

    #[test]
    fn lambda_is_conjugation_symmetric(z in frequency(), t in 0.0..1.0f64) {
        for m in models() {
            let a = m.lambda(t, z.conj());
            let b = m.lambda(t, z).conj();
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn lambda_is_one_at_the_horizon(z in frequency()) {
        for m in models() {
            prop_assert_eq!(m.lambda(m.horizon(), z), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lambda_is_bounded_on_contours(r in -0.5..1.5f64, u in -200.0..200.0f64, t in 0.0..1.0f64) {
        for m in models() {
            for z in [pair(r, u, 0.0, 0.0), pair(0.0, 0.0, r, u)] {
                let (a, b) = z.re();
                let c1 = m.lambda_growth_constant(&[(a, b)]);
                let bound = (c1 * m.rho_s(m.horizon())).exp();
                prop_assert!(m.lambda(t, z).norm() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn lambda_solves_its_ode(z in frequency(), t in 0.05..0.95f64) {
        // dλ/dt = λ(γ(z) ψ(0,1) - ψ(z)), central differences at Δt = 1e-4 T
        for m in models() {
            let h = 1e-4 * m.horizon();
            if (t - 0.4).abs() < 2.0 * h {
                continue;
            }
            let fd = (m.lambda(t + h, z) - m.lambda(t - h, z)) / (2.0 * h);
            let p = m.params_at(t);
            let rhs = m.lambda(t, z) * (p.gamma(z) * p.exponent(ComplexPair::S) - p.exponent(z));
            let scale = m.lambda(t, z).norm() * (1.0 + (p.exponent(z)).norm()).powi(3);
            prop_assert!((fd - rhs).norm() <= 1e-6 * scale, "{fd} vs {rhs}");
        }
    }
}
