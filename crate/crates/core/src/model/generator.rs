//! Numerical check of the Lévy generator formula on a 1-D compound Poisson
//! marginal with Gaussian (or point-mass) jumps.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real, QuadratureConfig};

/// ν = intensity · N(jump_mean, jump_variance); variance 0 is a point mass.
///
/// The process is Λ_t = CP_t - t∫_{|y|<1} y ν(dy), so its generator is
/// Lf(s) = ∫ (f(s+y) - f(s) - y f'(s) 1_{|y|<1}) ν(dy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyMarginal {
    pub intensity: f64,
    pub jump_mean: f64,
    pub jump_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    /// (E[f(s + Λ_dt)] - f(s)) / dt.
    pub finite_difference: f64,
    /// Lf(s) by quadrature.
    pub generator: f64,
    pub gap: f64,
}

impl LevyMarginal {
    pub fn new(intensity: f64, jump_mean: f64, jump_variance: f64) -> Result<Self> {
        if !(intensity >= 0.0 && jump_variance >= 0.0) || !jump_mean.is_finite() || !intensity.is_finite() {
            return Err(Error::domain("jump marginal needs intensity >= 0 and variance >= 0"));
        }
        Ok(LevyMarginal {
            intensity,
            jump_mean,
            jump_variance,
        })
    }

    fn sd(&self) -> f64 {
        self.jump_variance.sqrt()
    }

    // ∫_a^b y φ(y) dy for the jump law.
    fn partial_mean(&self, a: f64, b: f64) -> f64 {
        let m = self.jump_mean;
        if self.jump_variance == 0.0 {
            return if m > a && m < b { m } else { 0.0 };
        }
        let sd = self.sd();
        let n = Normal::standard();
        let (al, be) = ((a - m) / sd, (b - m) / sd);
        m * (n.cdf(be) - n.cdf(al)) + sd * (n.pdf(al) - n.pdf(be))
    }

    /// c₁ = ∫_{|y|≥1} y ν(dy).
    pub fn c1(&self) -> f64 {
        self.intensity * (self.jump_mean - self.partial_mean(-1.0, 1.0))
    }

    /// c₂ = ∫ y² ν(dy).
    pub fn c2(&self) -> f64 {
        self.intensity * (self.jump_mean * self.jump_mean + self.jump_variance)
    }

    /// ∫_{|y|<1} y ν(dy), the drift removed from the compound Poisson part.
    pub fn small_jump_drift(&self) -> f64 {
        self.intensity * self.partial_mean(-1.0, 1.0)
    }

    // E[g(center + N(mean, var))]
    fn gaussian_expectation<G: Fn(f64) -> f64>(
        &self,
        g: G,
        mean: f64,
        var: f64,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        if var == 0.0 {
            return Ok(g(mean));
        }
        let sd = var.sqrt();
        let pts: Vec<f64> = (-12..=12).map(|k| mean + k as f64 * sd).collect();
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let (v, _) = integrate_real(
            |y| {
                let d = (y - mean) / sd;
                g(y) * norm * (-0.5 * d * d).exp()
            },
            &pts,
            cfg,
        )?;
        Ok(v)
    }

    /// Lf(s) by quadrature against the jump law.
    pub fn generator<F, D>(&self, f: F, df: D, s: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let (fs, dfs) = (f(s), df(s));
        let integrand = |y: f64| f(s + y) - fs - if y.abs() < 1.0 { y * dfs } else { 0.0 };
        if self.jump_variance == 0.0 {
            return Ok(self.intensity * integrand(self.jump_mean));
        }
        let cfg = QuadratureConfig {
            rel_tol: 1e-11,
            ..QuadratureConfig::default()
        };
        let sd = self.sd();
        let m = self.jump_mean;
        let mut pts: Vec<f64> = (-12..=12).map(|k| m + k as f64 * sd).collect();
        pts.extend([-1.0, 1.0].iter().filter(|b| (**b - m).abs() < 12.0 * sd));
        pts.sort_by(f64::total_cmp);
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let (v, _) = integrate_real(
            |y| {
                let d = (y - m) / sd;
                integrand(y) * norm * (-0.5 * d * d).exp()
            },
            &pts,
            &cfg,
        )?;
        Ok(self.intensity * v)
    }

    /// E[f(s + Λ_dt)] - f(s), summing the Poisson series of jump counts.
    pub fn semigroup_increment<F>(&self, f: F, s: f64, dt: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let cfg = QuadratureConfig {
            rel_tol: 1e-12,
            ..QuadratureConfig::default()
        };
        let fs = f(s);
        let shift = s - dt * self.small_jump_drift();
        let rate = self.intensity * dt;
        let mut p = (-rate).exp();
        let mut acc = p * (f(shift) - fs);
        let mut n = 1usize;
        loop {
            p *= rate / n as f64;
            if p == 0.0 || (n as f64 > rate && p < 1e-20) {
                break;
            }
            let nf = n as f64;
            let e = self.gaussian_expectation(|y| f(shift + y) - fs, nf * self.jump_mean, nf * self.jump_variance, &cfg)?;
            acc += p * e;
            n += 1;
            if n > 10_000 {
                return Err(Error::NotConverged {
                    residual: p,
                    tolerance: 1e-20,
                    panels: n,
                });
            }
        }
        Ok(acc)
    }
}

/// Compare (E[f(s + Λ_dt)] - f(s))/dt with Lf(s).
pub fn levy_generator_check<F, D>(marginal: &LevyMarginal, f: F, df: D, s: f64, dt: f64) -> Result<GeneratorCheck>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(dt > 0.0) {
        return Err(Error::domain("time step must be positive"));
    }
    let finite_difference = marginal.semigroup_increment(&f, s, dt)? / dt;
    let generator = marginal.generator(&f, &df, s)?;
    Ok(GeneratorCheck {
        finite_difference,
        generator,
        gap: (finite_difference - generator).abs(),
    })
}
