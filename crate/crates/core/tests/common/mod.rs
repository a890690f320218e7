#![allow(dead_code)]

use fshedge::pde::DiffusionSpec;
use fshedge::{vanilla_call, AdditiveModel, LevyParams, PayoffMeasure};

/// Merton jump-diffusion on both coordinates, X₀ = S₀ = 100, T = 1.
pub fn merton() -> AdditiveModel {
    let p = LevyParams::from_vols([0.03, 0.05], 0.25, 0.2, 0.6).with_jumps(
        0.8,
        [-0.05, -0.08],
        [[0.02, 0.01], [0.01, 0.03]],
    );
    AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap()
}

/// Correlated Black–Scholes pair of the basis-risk benchmark:
/// μ_U = 10%, μ_S = 8%, r = 2%, σ_U = 30%, σ_S = 25%, ρ = 0.8.
pub fn basis_risk_model() -> AdditiveModel {
    let p = LevyParams::brownian([0.035, 0.02875], [[0.09, 0.06], [0.06, 0.0625]]);
    AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap()
}

pub fn basis_risk_spec() -> DiffusionSpec {
    DiffusionSpec::hulley_mcwalter(0.10, 0.08, 0.02, 0.3, 0.25, 0.8).unwrap()
}

/// (X_T - K)⁺.
pub fn call_on_x(strike: f64) -> PayoffMeasure {
    vanilla_call(strike, 0.5).unwrap().swap_axes()
}

pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(x)
}

/// Zero-rate lognormal call price.
pub fn black_scholes_call(spot: f64, strike: f64, vol: f64, tau: f64) -> f64 {
    let sd = vol * tau.sqrt();
    let d1 = (spot / strike).ln() / sd + 0.5 * sd;
    spot * normal_cdf(d1) - strike * normal_cdf(d1 - sd)
}
