mod common;

use common::*;
use fshedge::engine::{decompose, FsDecomposition};
use fshedge::quadrature::QuadratureConfig;
use fshedge::tolerances::TRIVIAL_ABS;
use fshedge::{power_claim, put_measure, vanilla_call, AdditiveModel, ComplexPair, PayoffMeasure};
use num_complex::Complex64;

fn tight(m: PayoffMeasure) -> PayoffMeasure {
    m.with_quadrature(QuadratureConfig {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        max_panels: 4096,
        fail_tol: 1e-8,
    })
}

// Call on X plus a put on S: depends on both coordinates.
fn mixed_claim() -> PayoffMeasure {
    call_on_x(100.0) + put_measure(90.0, 1.5).unwrap()
}

fn interior() -> Vec<(f64, f64, f64)> {
    let mut pts = Vec::new();
    for t in [0.0, 0.35, 0.7] {
        for x in [80.0, 100.0, 125.0] {
            for s in [75.0, 95.0, 115.0] {
                pts.push((t, x, s));
            }
        }
    }
    pts
}

#[test]
fn replicable_claims() {
    for model in [merton(), basis_risk_model()] {
        let s_t = decompose(&model, &power_claim(ComplexPair::S, Complex64::new(1.0, 0.0))).unwrap();
        assert!((s_t.h0() - 100.0).abs() <= TRIVIAL_ABS * 100.0);
        assert!(s_t.residual_process_spec().replicable);
        let one = decompose(&model, &power_claim(ComplexPair::ORIGIN, Complex64::new(1.0, 0.0))).unwrap();
        assert!((one.h0() - 1.0).abs() <= TRIVIAL_ABS);
        let call = decompose(&model, &call_on_x(100.0)).unwrap();
        assert!(!call.residual_process_spec().replicable);
        assert!(!call.residual_process_spec().recipe.is_empty());
    }
}

#[test]
fn basis_risk_price_matches_adjusted_lognormal() {
    let dec = decompose(&basis_risk_model(), &call_on_x(100.0)).unwrap();
    let b = 0.08 - 0.06 * 0.8 * 0.3 / 0.25;
    let fwd = 100.0 * f64::exp(b);
    let exact = black_scholes_call(fwd, 100.0, 0.3, 1.0);
    assert!((dec.h0() - exact).abs() < 1e-5 * exact, "{} {exact}", dec.h0());
    assert!(dec.quadrature_report().h0_imaginary.abs() < 1e-10);
}

#[test]
fn terminal_condition() {
    for model in [merton(), basis_risk_model()] {
        let m = mixed_claim();
        let dec = decompose(&model, &m).unwrap();
        for x in [30.0, 70.0, 100.0, 140.0, 300.0] {
            for s in [30.0, 70.0, 90.0, 140.0, 300.0] {
                let y = dec.y(model.horizon(), x, s).unwrap();
                let g = m.evaluate(x, s).unwrap();
                assert!((y - g).norm() <= 1e-6 * 190.0, "{x} {s}: {y} vs {g}");
            }
        }
    }
}

#[test]
fn real_claims_have_real_decompositions() {
    for model in [merton(), basis_risk_model()] {
        let dec = decompose(&model, &mixed_claim()).unwrap();
        for (t, x, s) in interior() {
            let p = dec.point(t, x, s).unwrap();
            assert!(p.y.im.abs() < 1e-10 && p.z.im.abs() < 1e-10, "{p:?}");
        }
    }
}

fn fd_partials(dec: &FsDecomposition, t: f64, x: f64, s: f64) -> (f64, f64) {
    let (hx, hs) = (1e-4 * x, 1e-4 * s);
    let dx = (dec.y(t, x + hx, s).unwrap().re - dec.y(t, x - hx, s).unwrap().re) / (2.0 * hx);
    let ds = (dec.y(t, x, s + hs).unwrap().re - dec.y(t, x, s - hs).unwrap().re) / (2.0 * hs);
    (dx, ds)
}

#[test]
fn black_scholes_hedge_is_the_projected_gradient() {
    let model = basis_risk_model();
    let dec = decompose(&model, &tight(mixed_claim())).unwrap();
    let beta = 0.06 / 0.0625;
    for (t, x, s) in interior() {
        let (dx, ds) = fd_partials(&dec, t, x, s);
        let expect = ds + beta * (x / s) * dx;
        let z = dec.z(t, x, s).unwrap().re;
        assert!((z - expect).abs() <= 1e-4 * z.abs().max(1e-2), "({t},{x},{s}): {z} vs {expect}");
    }
}

#[test]
fn linear_driver_identity() {
    // ∂_t y + L y = s ψ(0,1) z, with L x^{z₁}s^{z₂} = ψ(z) x^{z₁}s^{z₂}
    for model in [merton(), basis_risk_model()] {
        let dec = decompose(&model, &tight(mixed_claim())).unwrap();
        let h = 1e-4 * model.horizon();
        for (t, x, s) in interior().into_iter().filter(|p| p.0 > 0.0) {
            let dt = (dec.y(t + h, x, s).unwrap() - dec.y(t - h, x, s).unwrap()) / (2.0 * h);
            let p = *model.params_at(t);
            let ly = dec
                .contour_integral(t, x, s, |z| model.lambda(t, z) * p.exponent(z))
                .unwrap();
            let rhs = s * p.exponent(ComplexPair::S) * dec.z(t, x, s).unwrap();
            let scale = ly.norm() + rhs.norm() + 1.0;
            assert!((dt + ly - rhs).norm() <= 1e-5 * scale, "({t},{x},{s}): {} vs {rhs}", dt + ly);
        }
    }
}

#[test]
fn surfaces_match_pointwise_and_are_monotone() {
    let model = merton();
    let dec = decompose(&model, &vanilla_call(100.0, 0.5).unwrap()).unwrap();
    let one = dec.hedge_surface(&[0.3], &[90.0], &[110.0]).unwrap();
    let p = dec.point(0.3, 90.0, 110.0).unwrap();
    assert_eq!(one.y[0], p.y);
    assert_eq!(one.z[0], p.z);

    let s_grid: Vec<f64> = (0..40).map(|i| 50.0 + 4.0 * i as f64).collect();
    let surf = dec.hedge_surface(&[0.0, 0.5, 1.0], &[100.0], &s_grid).unwrap();
    for it in 0..3 {
        for is in 1..s_grid.len() {
            let a = surf.y[surf.index(it, 0, is - 1)].re;
            let b = surf.y[surf.index(it, 0, is)].re;
            assert!(b >= a - 1e-9, "t index {it}: {a} > {b}");
        }
    }
    for (is, s) in s_grid.iter().enumerate() {
        let y = surf.y[surf.index(2, 0, is)].re;
        assert!((y - (s - 100.0).max(0.0)).abs() <= 1e-6 * 101.0);
    }
}

#[test]
fn surface_errors_carry_coordinates() {
    let dec = decompose(&merton(), &call_on_x(100.0)).unwrap();
    let e = dec.hedge_surface(&[0.0], &[100.0], &[-1.0]).unwrap_err();
    assert!(e.to_string().contains("-1"), "{e}");
}

#[test]
fn piecewise_model_prices_between_its_pieces() {
    // two identical pieces reproduce the homogeneous model
    let m = merton();
    let p = m.segments()[0].params;
    let split = AdditiveModel::piecewise(&[(0.3, p), (1.0, p)], 100.0, 100.0).unwrap();
    let a = decompose(&m, &call_on_x(100.0)).unwrap().h0();
    let b = decompose(&split, &call_on_x(100.0)).unwrap().h0();
    assert!((a - b).abs() < 1e-9 * a);
}
