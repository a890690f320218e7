//! Bivariate exponential-additive models (X, S) = (exp Z¹, exp Z²) with
//! Gaussian diffusion and Gaussian-jump compound Poisson parts, possibly
//! piecewise constant in time.

mod generator;

pub use generator::{levy_generator_check, GeneratorCheck, LevyMarginal};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{AssumptionItem, Error, Result};
use crate::payoff::ComplexPair;

/// Per-unit-time characteristics of one Lévy segment. Index 0 is X, 1 is S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    /// Drift b of (Z¹, Z²).
    pub drift: [f64; 2],
    /// Diffusion covariance Σ.
    pub covariance: [[f64; 2]; 2],
    pub jump_intensity: f64,
    pub jump_mean: [f64; 2],
    pub jump_covariance: [[f64; 2]; 2],
}

impl LevyParams {
    pub fn brownian(drift: [f64; 2], covariance: [[f64; 2]; 2]) -> Self {
        LevyParams {
            drift,
            covariance,
            jump_intensity: 0.0,
            jump_mean: [0.0; 2],
            jump_covariance: [[0.0; 2]; 2],
        }
    }

    /// Covariance from volatilities of log X, log S and their correlation.
    pub fn from_vols(drift: [f64; 2], sigma_x: f64, sigma_s: f64, correlation: f64) -> Self {
        let c = correlation * sigma_x * sigma_s;
        Self::brownian(drift, [[sigma_x * sigma_x, c], [c, sigma_s * sigma_s]])
    }

    pub fn with_jumps(mut self, intensity: f64, mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Self {
        self.jump_intensity = intensity;
        self.jump_mean = mean;
        self.jump_covariance = covariance;
        self
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_intensity > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .drift
            .iter()
            .chain(self.covariance.iter().flatten())
            .chain(self.jump_mean.iter())
            .chain(self.jump_covariance.iter().flatten())
            .chain(std::iter::once(&self.jump_intensity));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite model parameter"));
        }
        if self.jump_intensity < 0.0 {
            return Err(Error::domain("jump intensity must be nonnegative"));
        }
        check_psd(&self.covariance, "covariance")?;
        check_psd(&self.jump_covariance, "jump covariance")?;
        let rate = self.variance_rate();
        if !(rate > 0.0) {
            return Err(Error::Assumption {
                item: AssumptionItem::StrictlyIncreasingClock,
                detail: format!(
                    "variance rate psi(0,2) - 2 psi(0,1) = {rate:.3e} is not positive; the structure condition fails"
                ),
            });
        }
        Ok(())
    }

    /// Lévy exponent ψ(z) = b·z + ½zᵀΣz + λ_J(exp(m·z + ½zᵀΔz) - 1).
    pub fn exponent(&self, z: ComplexPair) -> Complex64 {
        let v = [z.z1(), z.z2()];
        let quad = |m: &[[f64; 2]; 2]| {
            v[0] * v[0] * m[0][0] + v[0] * v[1] * (m[0][1] + m[1][0]) + v[1] * v[1] * m[1][1]
        };
        let lin = v[0] * self.drift[0] + v[1] * self.drift[1];
        let mut psi = lin + 0.5 * quad(&self.covariance);
        if self.jump_intensity != 0.0 {
            let j = v[0] * self.jump_mean[0] + v[1] * self.jump_mean[1] + 0.5 * quad(&self.jump_covariance);
            psi += self.jump_intensity * (j.exp() - 1.0);
        }
        psi
    }

    pub fn exponent_real(&self, a: f64, b: f64) -> f64 {
        self.exponent(ComplexPair::raw(Complex64::new(a, 0.0), Complex64::new(b, 0.0))).re
    }

    /// ρ̄ = ψ(0,2) - ψ(0,1) - ψ(0,1), the rate of the reference clock ρ^S.
    pub fn variance_rate(&self) -> f64 {
        let e2 = ComplexPair::S;
        let two = ComplexPair::raw(Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0));
        (self.exponent(two) - self.exponent(e2) - self.exponent(e2)).re
    }

    /// γ(z) = [ψ(z + (0,1)) - ψ(z) - ψ(0,1)] / ρ̄.
    pub fn gamma(&self, z: ComplexPair) -> Complex64 {
        let e2 = ComplexPair::S;
        let num = self.exponent(z + e2) - self.exponent(z) - self.exponent(e2);
        num / self.variance_rate()
    }

    /// Time density of η: ψ(z) - γ(z)ψ(0,1).
    pub fn eta_rate(&self, z: ComplexPair) -> Complex64 {
        self.exponent(z) - self.gamma(z) * self.exponent(ComplexPair::S)
    }

    /// Time density of the mean-variance trade-off, ψ(0,1)²/ρ̄.
    pub fn tradeoff_rate(&self) -> f64 {
        let a = self.exponent(ComplexPair::S).re;
        a * a / self.variance_rate()
    }

    /// Upper bound on Re η-rate(a + iv)/ρ̄ over all v for a real point a.
    pub fn eta_bound(&self, a: (f64, f64)) -> f64 {
        let rate = self.variance_rate();
        let e = |p: f64, q: f64| {
            if self.jump_intensity == 0.0 {
                return 0.0;
            }
            let m = p * self.jump_mean[0] + q * self.jump_mean[1];
            let d = &self.jump_covariance;
            (m + 0.5 * (p * p * d[0][0] + 2.0 * p * q * d[0][1] + q * q * d[1][1])).exp()
        };
        let psi_a = self.exponent_real(a.0, a.1);
        let psi01 = self.exponent_real(0.0, 1.0);
        let cross = (a.0 * self.covariance[0][1] + a.1 * self.covariance[1][1]).abs();
        let jumps = self.jump_intensity * (e(a.0, a.1 + 1.0) + e(a.0, a.1) + e(0.0, 1.0) + 1.0);
        (psi_a + psi01.abs() / rate * (cross + jumps)) / rate
    }

    fn digest_text(&self) -> String {
        format!(
            "b={:?} sigma={:?} lambda={:?} m={:?} delta={:?}",
            self.drift, self.covariance, self.jump_intensity, self.jump_mean, self.jump_covariance
        )
    }
}

fn check_psd(m: &[[f64; 2]; 2], name: &str) -> Result<()> {
    let tol = 1e-14 * (m[0][0].abs() + m[1][1].abs()).max(1.0);
    if (m[0][1] - m[1][0]).abs() > tol {
        return Err(Error::domain(format!("{name} matrix is not symmetric")));
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if m[0][0] < 0.0 || m[1][1] < 0.0 || det < -tol * tol.max(m[0][0] * m[1][1]) {
        return Err(Error::domain(format!("{name} matrix is not positive semidefinite")));
    }
    Ok(())
}

/// A time interval on which the characteristics are constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub params: LevyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    BlackScholes,
    Merton,
}

/// Piecewise-Lévy exponential-additive model on [0, T].
///
/// The last segment is continued beyond T, so cumulants at t > T are those
/// of the continued Lévy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    segments: Vec<Segment>,
    x0: f64,
    s0: f64,
}

/// K_t on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl AdditiveModel {
    /// Time-homogeneous model on [0, horizon].
    pub fn levy(params: LevyParams, horizon: f64, x0: f64, s0: f64) -> Result<Self> {
        Self::piecewise(&[(horizon, params)], x0, s0)
    }

    /// Segments given by (end time, parameters) in increasing order of end time.
    pub fn piecewise(pieces: &[(f64, LevyParams)], x0: f64, s0: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::domain("model needs at least one segment"));
        }
        if !(x0 > 0.0 && s0 > 0.0 && x0.is_finite() && s0.is_finite()) {
            return Err(Error::domain(format!("initial values must be positive, got ({x0}, {s0})")));
        }
        let mut segments = Vec::with_capacity(pieces.len());
        let mut start = 0.0;
        for (end, params) in pieces {
            if !(*end > start && end.is_finite()) {
                return Err(Error::domain(format!("segment end times must increase from 0, got {end}")));
            }
            params.validate()?;
            segments.push(Segment {
                start,
                end: *end,
                params: *params,
            });
            start = *end;
        }
        Ok(AdditiveModel { segments, x0, s0 })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn with_initial(mut self, x0: f64, s0: f64) -> Result<Self> {
        if !(x0 > 0.0 && s0 > 0.0) {
            return Err(Error::domain("initial values must be positive"));
        }
        self.x0 = x0;
        self.s0 = s0;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        if self.segments.iter().any(|s| s.params.has_jumps()) {
            ModelKind::Merton
        } else {
            ModelKind::BlackScholes
        }
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].params == w[1].params)
    }

    /// Parameters in force at time t (right-continuous; the last segment from T on).
    pub fn params_at(&self, t: f64) -> &LevyParams {
        self.segments
            .iter()
            .find(|s| t < s.end)
            .map_or(&self.segments[self.segments.len() - 1].params, |s| &s.params)
    }

    /// Σ_k |[t0, t1] ∩ segment_k| · f(params_k), last segment extended.
    fn integrate<T, F>(&self, t0: f64, t1: f64, f: F) -> T
    where
        T: Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
        F: Fn(&LevyParams) -> T,
    {
        let mut acc = T::default();
        let n = self.segments.len();
        for (i, seg) in self.segments.iter().enumerate() {
            let end = if i + 1 == n { f64::INFINITY } else { seg.end };
            let len = t1.min(end) - t0.max(seg.start);
            if len > 0.0 {
                acc += f(&seg.params) * len;
            }
        }
        acc
    }

    /// κ_t(z) = log E[X_t^{z₁} S_t^{z₂}] - z·(log X₀, log S₀).
    pub fn kappa(&self, t: f64, z: ComplexPair) -> Complex64 {
        self.integrate(0.0, t, |p| p.exponent(z))
    }

    /// κ_{t1}(z) - κ_{t0}(z).
    pub fn kappa_between(&self, t0: f64, t1: f64, z: ComplexPair) -> Complex64 {
        self.integrate(t0, t1, |p| p.exponent(z))
    }

    /// ρ_t(z, y) = κ_t(z + y) - κ_t(z) - κ_t(y).
    pub fn rho(&self, t: f64, z: ComplexPair, y: ComplexPair) -> Complex64 {
        self.kappa(t, z + y) - self.kappa(t, z) - self.kappa(t, y)
    }

    /// ρ^S_t = κ_t(0,2) - 2κ_t(0,1).
    pub fn rho_s(&self, t: f64) -> f64 {
        self.integrate(0.0, t, LevyParams::variance_rate)
    }

    pub fn rho_s_between(&self, t0: f64, t1: f64) -> f64 {
        self.integrate(t0, t1, LevyParams::variance_rate)
    }

    /// γ_t(z) = dρ_t(z, (0,1)) / dρ^S_t.
    pub fn gamma(&self, t: f64, z: ComplexPair) -> Complex64 {
        self.params_at(t).gamma(z)
    }

    /// η(z, t) = κ_t(z) - ∫_0^t γ_u(z) κ_{du}(0,1).
    pub fn eta(&self, t: f64, z: ComplexPair) -> Complex64 {
        self.integrate(0.0, t, |p| p.eta_rate(z))
    }

    /// λ(t, z) = exp(η(z, T) - η(z, t)); λ(T, z) = 1.
    pub fn lambda(&self, t: f64, z: ComplexPair) -> Complex64 {
        self.log_lambda(t, z).exp()
    }

    /// η(z, T) - η(z, t).
    pub fn log_lambda(&self, t: f64, z: ComplexPair) -> Complex64 {
        self.integrate(t, self.horizon(), |p| p.eta_rate(z))
    }

    /// ∫_{t0}^{t1} Σ_ii du for coordinate i.
    pub fn diffusion_variance(&self, t0: f64, t1: f64, coordinate: usize) -> f64 {
        self.integrate(t0, t1, |p| p.covariance[coordinate][coordinate])
    }

    /// Variance of Z^i_{t1} - Z^i_{t0}, diffusion plus jumps.
    pub fn log_variance(&self, t0: f64, t1: f64, coordinate: usize) -> f64 {
        self.integrate(t0, t1, |p| {
            let m = p.jump_mean[coordinate];
            p.covariance[coordinate][coordinate]
                + p.jump_intensity * (p.jump_covariance[coordinate][coordinate] + m * m)
        })
    }

    /// Mean of Z^i_{t1} - Z^i_{t0}.
    pub fn log_mean(&self, t0: f64, t1: f64, coordinate: usize) -> f64 {
        self.integrate(t0, t1, |p| p.drift[coordinate] + p.jump_intensity * p.jump_mean[coordinate])
    }

    /// Mean-variance trade-off K_t = ∫_0^t (dκ(0,1)/dρ^S)² dρ^S.
    pub fn tradeoff(&self, times: &[f64]) -> Result<TradeoffCurve> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::domain("trade-off grid must be nonnegative and sorted"));
        }
        let values = times
            .iter()
            .map(|&t| self.integrate(0.0, t, LevyParams::tradeoff_rate))
            .collect();
        Ok(TradeoffCurve {
            times: times.to_vec(),
            values,
        })
    }

    /// Constant c₁ with |λ(t, z)| ≤ exp(c₁ ρ^S_T) for z on the contours through `support`.
    pub fn lambda_growth_constant(&self, support: &[(f64, f64)]) -> f64 {
        self.segments
            .iter()
            .flat_map(|seg| support.iter().map(move |a| seg.params.eta_bound(*a)))
            .fold(0.0, f64::max)
    }

    /// Jump part of one coordinate as a 1-D compound Poisson law.
    pub fn jump_marginal(&self, coordinate: usize) -> Result<LevyMarginal> {
        if !self.is_time_homogeneous() || coordinate > 1 {
            return Err(Error::domain("jump marginal needs a time-homogeneous model and coordinate 0 or 1"));
        }
        let p = &self.segments[0].params;
        LevyMarginal::new(
            p.jump_intensity,
            p.jump_mean[coordinate],
            p.jump_covariance[coordinate][coordinate],
        )
    }

    /// SHA-256 of a canonical rendering of all parameters.
    pub fn digest(&self) -> String {
        let mut text = format!("x0={:?} s0={:?}\n", self.x0, self.s0);
        for s in &self.segments {
            text.push_str(&format!("[{:?},{:?}) {}\n", s.start, s.end, s.params.digest_text()));
        }
        sha256_hex(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merton() -> AdditiveModel {
        let p = LevyParams::from_vols([0.03, 0.05], 0.25, 0.2, 0.6).with_jumps(
            0.8,
            [-0.05, -0.08],
            [[0.02, 0.01], [0.01, 0.03]],
        );
        AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap()
    }

    fn z(a: f64, b: f64, c: f64, d: f64) -> ComplexPair {
        ComplexPair::new(Complex64::new(a, b), Complex64::new(c, d)).unwrap()
    }

    #[test]
    fn black_scholes_moments() {
        let (mu, sigma) = (0.08, 0.2);
        let p = LevyParams::from_vols([0.01, mu - 0.5 * sigma * sigma], 0.3, sigma, 0.5);
        let m = AdditiveModel::levy(p, 2.0, 1.0, 1.0).unwrap();
        assert!((m.kappa(1.5, ComplexPair::S).re - mu * 1.5).abs() < 1e-15);
        assert!((m.rho_s(1.0) - 0.04).abs() < 1e-15);
        assert!((m.rho(1.0, ComplexPair::S, ComplexPair::S).re - 0.04).abs() < 1e-15);
        // γ(z) = (z₁ ρσ_Xσ_S + z₂σ_S²)/σ_S²
        let w = z(0.7, 1.3, -0.2, 4.0);
        let g = m.gamma(0.5, w);
        let expect = (w.z1() * 0.5 * 0.3 * 0.2 + w.z2() * 0.04) / 0.04;
        assert!((g - expect).norm() < 1e-12);
        let k = m.tradeoff(&[0.0, 1.0]).unwrap();
        assert!((k.values[1] - 0.16).abs() < 1e-14);
        assert_eq!(k.values[0], 0.0);
    }

    #[test]
    fn exact_identities_at_special_frequencies() {
        let m = merton();
        assert_eq!(m.kappa(0.7, ComplexPair::ORIGIN), Complex64::new(0.0, 0.0));
        assert_eq!(m.gamma(0.3, ComplexPair::S), Complex64::new(1.0, 0.0));
        assert_eq!(m.gamma(0.3, ComplexPair::ORIGIN), Complex64::new(0.0, 0.0));
        assert_eq!(m.eta(0.6, ComplexPair::S), Complex64::new(0.0, 0.0));
        assert_eq!(m.lambda(0.2, ComplexPair::S), Complex64::new(1.0, 0.0));
        let w = z(0.3, 2.0, 0.4, -1.0);
        assert_eq!(m.lambda(1.0, w), Complex64::new(1.0, 0.0));
        assert_eq!(m.eta(0.0, w), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn merton_variance_rate_matches_hand_expansion() {
        let m = merton();
        let p = m.segments()[0].params;
        let (m2, d22) = (p.jump_mean[1], p.jump_covariance[1][1]);
        let expect = p.covariance[1][1]
            + p.jump_intensity * ((2.0 * m2 + 2.0 * d22).exp() - 2.0 * (m2 + 0.5 * d22).exp() + 1.0);
        assert!((p.variance_rate() - expect).abs() < 1e-14);
        assert!((m.rho_s(1.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_variance_rate_is_rejected() {
        let p = LevyParams::from_vols([0.0, 0.0], 0.2, 0.0, 0.0);
        let err = AdditiveModel::levy(p, 1.0, 1.0, 1.0).unwrap_err();
        assert_eq!(err.assumption_item(), Some(AssumptionItem::StrictlyIncreasingClock));
        let p = LevyParams::from_vols([0.0, 0.0], 0.2, 0.2, 0.0);
        assert!(AdditiveModel::levy(p, 1.0, 1.0, -1.0).is_err());
        let bad = LevyParams::brownian([0.0, 0.0], [[0.04, 0.05], [0.05, 0.04]]);
        assert!(AdditiveModel::levy(bad, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn piecewise_segments_add_up() {
        let a = LevyParams::from_vols([0.01, 0.02], 0.2, 0.3, 0.4);
        let b = LevyParams::from_vols([0.03, -0.01], 0.1, 0.2, -0.3).with_jumps(1.0, [0.0, 0.1], [[0.01, 0.0], [0.0, 0.01]]);
        let m = AdditiveModel::piecewise(&[(0.4, a), (1.0, b)], 1.0, 1.0).unwrap();
        let w = z(0.2, 1.0, 0.5, -2.0);
        let expect = a.exponent(w) * 0.4 + b.exponent(w) * 0.3;
        assert!((m.kappa(0.7, w) - expect).norm() < 1e-14);
        let lam = (a.eta_rate(w) * 0.2 + b.eta_rate(w) * 0.6).exp();
        assert!((m.lambda(0.2, w) - lam).norm() < 1e-13);
        assert_eq!(m.gamma(0.4, w), b.gamma(w));
        assert_eq!(m.kind(), ModelKind::Merton);
        assert!(!m.is_time_homogeneous());
    }

    #[test]
    fn digest_changes_with_parameters() {
        let m = merton();
        assert_eq!(m.digest(), merton().digest());
        assert_ne!(m.digest(), m.clone().with_initial(1.0, 1.0).unwrap().digest());
    }
}
