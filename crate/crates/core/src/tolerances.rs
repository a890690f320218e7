//! Thresholds of the acceptance suite. The CLI uses them as defaults.

/// Payoff inversion: |error| ≤ this · (1 + K).
pub const INVERSION_ABS: f64 = 1e-6;
pub const INVERSION_SECONDS: f64 = 1.0;
pub const INVERSION_GRID: usize = 50;

/// Trivial claims: (y, z) exact to this.
pub const TRIVIAL_ABS: f64 = 1e-10;
/// Trivial claims: pathwise residual relative to S₀.
pub const TRIVIAL_RESIDUAL_REL: f64 = 1e-10;

/// λ against backward integration of its ODE, relative.
pub const LAMBDA_ODE_REL: f64 = 1e-7;
pub const LAMBDA_ODE_FREQUENCIES: usize = 10;

/// Black–Scholes call without basis risk, relative.
pub const BS_PRICE_REL: f64 = 1e-5;
pub const BS_PRICE_SECONDS: f64 = 5.0;

/// Route agreement on h₀: max(this, 3·stderr).
pub const ROUTE_PRICE_ABS: f64 = 1e-2;
pub const ROUTE_STDERRS: f64 = 3.0;
/// Route agreement at sample points of a comparison table, relative.
pub const ROUTE_COMPARE_REL: f64 = 1e-2;
/// Route agreement on the interior hedge surface, relative.
pub const ROUTE_HEDGE_REL: f64 = 2e-2;

/// Monte Carlo suite.
pub const SUITE_PATHS: usize = 100_000;
pub const SUITE_STEPS: usize = 250;
pub const SUITE_SECONDS: f64 = 60.0;
pub const MEAN_STDERRS: f64 = 3.0;
pub const ORTHOGONALITY_CORR: f64 = 0.02;
pub const MARTINGALE_T: f64 = 3.0;

/// Trade-off gap, relative.
pub const TRADEOFF_BS_REL: f64 = 0.05;
pub const TRADEOFF_MERTON_REL: f64 = 0.10;

/// Generator finite difference at this step, relative gap.
pub const GENERATOR_DT: f64 = 1e-3;
pub const GENERATOR_REL: f64 = 0.01;
pub const GENERATOR_POINTS: usize = 10;

/// Baselines must exceed the F-S variance by this many pooled stderrs.
pub const BASELINE_STDERRS: f64 = 2.0;
