//! Gauss–Legendre rules and an adaptive composite integrator for
//! vector-valued complex integrands.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per panel of the composite rule.
pub const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [-1, 1], nodes found by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// The cached 16-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn panel<const N: usize, F>(&self, a: f64, b: f64, f: &F) -> [Complex64; N]
    where
        F: Fn(f64) -> [Complex64; N],
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [Complex64::new(0.0, 0.0); N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            for k in 0..N {
                acc[k] += v[k] * *w;
            }
        }
        for a in acc.iter_mut() {
            *a *= half;
        }
        acc
    }
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Stopping rule for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Target error relative to the integrand's absolute mass.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Panel budget.
    pub max_panels: usize,
    /// Residual (relative to mass) above which an exhausted budget is an error.
    pub fail_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_panels: 512,
            fail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [Complex64; N],
    /// Estimated absolute error per component.
    pub error: [f64; N],
    /// Σ |panel integral| per component, the scale the tolerance refers to.
    pub mass: [f64; N],
    pub panels: usize,
    pub converged: bool,
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [Complex64; N],
    error: [f64; N],
}

fn make_panel<const N: usize, F>(a: f64, b: f64, f: &F) -> Panel<N>
where
    F: Fn(f64) -> [Complex64; N],
{
    let rule = GaussLegendre::standard();
    let coarse = rule.panel(a, b, f);
    let m = 0.5 * (a + b);
    let left = rule.panel(a, m, f);
    let right = rule.panel(m, b, f);
    let mut value = [Complex64::new(0.0, 0.0); N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = left[k] + right[k];
        error[k] = (value[k] - coarse[k]).norm();
    }
    Panel { a, b, value, error }
}

/// Integrate `f` over the union of consecutive intervals given by `breakpoints`,
/// refining the worst panel until every component meets its tolerance.
pub fn integrate_adaptive<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Integral<N>>
where
    F: Fn(f64) -> [Complex64; N],
{
    if breakpoints.len() < 2 {
        return Ok(Integral {
            value: [Complex64::new(0.0, 0.0); N],
            error: [0.0; N],
            mass: [0.0; N],
            panels: 0,
            converged: true,
        });
    }
    let mut panels: Vec<Panel<N>> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| make_panel(w[0], w[1], &f))
        .collect();
    let budget = cfg.max_panels.max(panels.len());

    loop {
        let mut total_err = [0.0; N];
        let mut mass = [0.0; N];
        for p in &panels {
            for k in 0..N {
                total_err[k] += p.error[k];
                mass[k] += p.value[k].norm();
            }
        }
        let tol: [f64; N] = std::array::from_fn(|k| cfg.rel_tol * mass[k] + cfg.abs_tol);
        let done = (0..N).all(|k| total_err[k] <= tol[k]);
        if done || panels.len() >= budget {
            let mut value = [Complex64::new(0.0, 0.0); N];
            for p in &panels {
                for k in 0..N {
                    value[k] += p.value[k];
                }
            }
            if !done {
                let (k, _) = (0..N)
                    .map(|k| (k, total_err[k] / (mass[k] + cfg.abs_tol)))
                    .fold((0, f64::MIN), |acc, c| if c.1 > acc.1 { c } else { acc });
                let limit = cfg.fail_tol * mass[k] + cfg.abs_tol;
                if total_err[k] > limit || !total_err[k].is_finite() {
                    return Err(Error::NotConverged {
                        residual: total_err[k],
                        tolerance: tol[k],
                        panels: panels.len(),
                    });
                }
            }
            return Ok(Integral {
                value,
                error: total_err,
                mass,
                panels: panels.len(),
                converged: done,
            });
        }
        let score = |p: &Panel<N>| {
            (0..N)
                .map(|k| p.error[k] / tol[k])
                .fold(0.0_f64, f64::max)
        };
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .fold((0, f64::MIN), |acc, c| if c.1 > acc.1 { c } else { acc });
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        panels.push(make_panel(p.a, m, &f));
        panels.push(make_panel(m, p.b, &f));
    }
}

/// Real-valued convenience wrapper; returns (value, error estimate).
pub fn integrate_real<F>(f: F, breakpoints: &[f64], cfg: &QuadratureConfig) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let out = integrate_adaptive(|x| [Complex64::new(f(x), 0.0)], breakpoints, cfg)?;
    Ok((out.value[0].re, out.error[0]))
}

/// Breakpoints on [0, upper]: widths 0.25, 0.25, 0.5, 1, ... doubling up to
/// `max_width`, then uniform panels no wider than `max_width`.
pub fn graded_breakpoints(upper: f64, max_width: f64) -> Vec<f64> {
    let max_width = max_width.max(1e-3);
    let mut pts = vec![0.0];
    let mut x = 0.0;
    let mut w: f64 = 0.25_f64.min(max_width);
    while x + w < upper {
        x += w;
        pts.push(x);
        if x >= 0.5 {
            w = (2.0 * w).min(max_width);
        }
    }
    if upper > 0.0 {
        pts.push(upper);
    }
    pts
}

/// Fixed composite rule: (node, weight) pairs of the 16-point rule on every
/// interval between consecutive breakpoints.
pub fn composite_rule(breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::standard();
    let mut out = Vec::with_capacity(PANEL_ORDER * breakpoints.len());
    for w in breakpoints.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (x, wt) in rule.nodes().iter().zip(rule.weights()) {
            out.push((mid + half * x, wt * half));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_31() {
        let rule = GaussLegendre::standard();
        // ∫_{-1}^{1} x^30 dx = 2/31
        let v = rule.integrate(-1.0, 1.0, |x| x.powi(30));
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_rules_match_tabulated_nodes() {
        let r = GaussLegendre::new(3);
        assert!((r.nodes()[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((r.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_oscillation_and_peaks() {
        let cfg = QuadratureConfig::default();
        // ∫_0^50 cos(7x) dx = sin(350)/7
        let (v, _) = integrate_real(|x| (7.0 * x).cos(), &graded_breakpoints(50.0, 4.0), &cfg).unwrap();
        assert!((v - (350.0f64).sin() / 7.0).abs() < 1e-10);
        // ∫_0^1 1/(1e-4 + x²) dx = atan(100)/0.01
        let (v, _) = integrate_real(|x| 1.0 / (1e-4 + x * x), &[0.0, 1.0], &cfg).unwrap();
        assert!((v - 100.0 * (100.0f64).atan()).abs() < 1e-6);
    }

    #[test]
    fn exhausted_budget_reports_residual() {
        let cfg = QuadratureConfig {
            max_panels: 4,
            ..QuadratureConfig::default()
        };
        let err = integrate_real(|x| (400.0 * x).sin().abs(), &[0.0, 10.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::NotConverged { residual, .. } if residual > 0.0));
    }

    #[test]
    fn composite_rule_integrates_polynomials() {
        let rule = composite_rule(&graded_breakpoints(10.0, 2.0));
        let v: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
        assert!((v - 1000.0 / 3.0).abs() < 1e-10);
    }
}
