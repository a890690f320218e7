//! Föllmer–Schweizer decomposition of h = ∫ dΠ X_T^{z₁} S_T^{z₂} under an
//! exponential-additive model:
//!
//! y(t, x, s) = ∫ dΠ x^{z₁} s^{z₂} λ(t, z),
//! z(t, x, s) = ∫ dΠ x^{z₁} s^{z₂-1} λ(t, z) γ_t(z),
//! h₀ = y(0, X₀, S₀).

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AssumptionItem, Error, Result};
use crate::model::AdditiveModel;
use crate::payoff::{integrate_line, Axis, ComplexPair, ContourLine, LineDensity, PayoffMeasure};
use crate::quadrature::{composite_rule, graded_breakpoints};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Cap on the damped truncation, as a multiple of the line's U_max.
    pub truncation_cap: f64,
    /// Gaussian decay, in standard deviations of log λ, at the damped truncation.
    pub damping_sigmas: f64,
    /// Largest tolerated |Im h₀| for a real claim.
    pub imaginary_limit: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            truncation_cap: 16.0,
            damping_sigmas: 6.0,
            imaginary_limit: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub h0_imaginary: f64,
    pub error_estimate: f64,
    pub tail_bound: f64,
    pub panels: usize,
    /// Truncation used on each line at t = 0.
    pub truncations: Vec<f64>,
    pub rel_tol: f64,
    pub max_panels: usize,
}

/// y and z at one point with quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub y: Complex64,
    pub z: Complex64,
    pub error_estimate: f64,
    pub tail_bound: f64,
    pub panels: usize,
}

/// How the residual O of the decomposition is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpec {
    /// O_t = Y_t - Y_0 - ∫_0^t Z_u dS_u with Y_t = y(t, X_t, S_t), Z_u = z(u, X_{u-}, S_{u-}).
    pub recipe: String,
    /// The claim lies in span{1, S_T}, so O ≡ 0 pathwise.
    pub replicable: bool,
}

#[derive(Debug, Clone)]
pub struct FsDecomposition {
    model: AdditiveModel,
    measure: PayoffMeasure,
    config: EngineConfig,
    h0: Complex64,
    report: QuadratureReport,
}

/// Verify the standing assumptions on (model, measure); names the failing item.
pub fn check_assumptions(model: &AdditiveModel, measure: &PayoffMeasure) -> Result<()> {
    for seg in model.segments() {
        let rate = seg.params.variance_rate();
        if !(rate > 0.0) {
            return Err(Error::Assumption {
                item: AssumptionItem::StrictlyIncreasingClock,
                detail: format!("variance rate {rate:.3e} on [{}, {})", seg.start, seg.end),
            });
        }
    }
    let support = measure.real_support();
    if let Some(p) = support.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Assumption {
            item: AssumptionItem::BoundedSupport,
            detail: format!("support point {p:?}"),
        });
    }
    for seg in model.segments() {
        let p = &seg.params;
        let rate = p.variance_rate();
        for &(a, b) in &support {
            if !p.exponent_real(a, b).is_finite() || !p.exponent_real(a, b + 1.0).is_finite() {
                return Err(Error::Assumption {
                    item: AssumptionItem::SupportInDomain,
                    detail: format!("cumulant not finite at ({a}, {b}) or its unit shift"),
                });
            }
            let doubled = p.exponent_real(2.0 * a, 2.0 * b) / rate;
            if !doubled.is_finite() || !p.eta_bound((a, b)).is_finite() {
                return Err(Error::Assumption {
                    item: AssumptionItem::BoundedCumulantDensity,
                    detail: format!("cumulant density unbounded at 2*({a}, {b})"),
                });
            }
        }
    }
    Ok(())
}

/// Decompose the claim encoded by `measure` under `model`.
pub fn decompose(model: &AdditiveModel, measure: &PayoffMeasure) -> Result<FsDecomposition> {
    decompose_with(model, measure, EngineConfig::default())
}

pub fn decompose_with(model: &AdditiveModel, measure: &PayoffMeasure, config: EngineConfig) -> Result<FsDecomposition> {
    check_assumptions(model, measure)?;
    let mut dec = FsDecomposition {
        model: model.clone(),
        measure: measure.clone(),
        config,
        h0: Complex64::new(0.0, 0.0),
        report: QuadratureReport {
            h0_imaginary: 0.0,
            error_estimate: 0.0,
            tail_bound: 0.0,
            panels: 0,
            truncations: vec![],
            rel_tol: measure.quadrature().rel_tol,
            max_panels: measure.quadrature().max_panels,
        },
    };
    let v = dec.point(0.0, model.x0(), model.s0()).map_err(|e| e.at("h0"))?;
    if measure.is_conjugate_symmetric() && v.y.im.abs() > config.imaginary_limit {
        return Err(Error::ImaginaryResidue {
            residue: v.y.im,
            limit: config.imaginary_limit,
        });
    }
    dec.h0 = v.y;
    dec.report.h0_imaginary = v.y.im;
    dec.report.error_estimate = v.error_estimate;
    dec.report.tail_bound = v.tail_bound;
    dec.report.panels = v.panels;
    dec.report.truncations = measure.lines().iter().map(|l| dec.truncation(l, 0.0)).collect();
    Ok(dec)
}

impl FsDecomposition {
    pub fn model(&self) -> &AdditiveModel {
        &self.model
    }

    pub fn measure(&self) -> &PayoffMeasure {
        &self.measure
    }

    /// Initial capital, real part.
    pub fn h0(&self) -> f64 {
        self.h0.re
    }

    pub fn h0_complex(&self) -> Complex64 {
        self.h0
    }

    pub fn quadrature_report(&self) -> &QuadratureReport {
        &self.report
    }

    fn axis_index(line: &ContourLine) -> usize {
        match line.axis {
            Axis::X => 0,
            Axis::S => 1,
        }
    }

    /// Contour truncation at time t: U_max when λ(t, ·) is undamped, otherwise
    /// where the Gaussian envelope of λ has fallen by `damping_sigmas`².
    pub fn truncation(&self, line: &ContourLine, t: f64) -> f64 {
        let v = self.model.diffusion_variance(t, self.model.horizon(), Self::axis_index(line));
        if v > 0.0 {
            let env = (2.0 * self.config.damping_sigmas.powi(2) / v).sqrt();
            env.min(self.config.truncation_cap * line.truncation)
        } else {
            line.truncation
        }
    }

    // Phase slope of λ along the line near the truncation.
    fn phase_rate(&self, line: &ContourLine, t: f64, upper: f64) -> f64 {
        if t >= self.model.horizon() {
            return 0.0;
        }
        let a = self.model.log_lambda(t, line.point(upper));
        let b = self.model.log_lambda(t, line.point(0.5 * upper));
        ((a.im - b.im) / (0.5 * upper)).abs()
    }

    fn check_point(&self, t: f64, x: f64, s: f64) -> Result<()> {
        if !(x > 0.0 && s > 0.0 && x.is_finite() && s.is_finite()) {
            return Err(Error::domain(format!("state must be positive, got ({x}, {s})")));
        }
        if !(t >= 0.0 && t <= self.model.horizon()) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.model.horizon())));
        }
        Ok(())
    }

    /// y and z at (t, x, s) with diagnostics.
    pub fn point(&self, t: f64, x: f64, s: f64) -> Result<PointValue> {
        self.check_point(t, x, s)?;
        let (lx, ls) = (x.ln(), s.ln());
        let at_horizon = t >= self.model.horizon();
        let mut y = Complex64::new(0.0, 0.0);
        let mut zs = Complex64::new(0.0, 0.0);
        for atom in self.measure.atoms() {
            let lam = self.model.lambda(t, atom.point);
            let base = atom.weight * atom.point.monomial_log(lx, ls) * lam;
            y += base;
            zs += base * self.model.gamma(t, atom.point);
        }
        let mut error_estimate = 0.0;
        let mut tail_bound = 0.0;
        let mut panels = 0;
        for line in self.measure.lines() {
            let upper = self.truncation(line, t);
            let out = integrate_line(
                line,
                lx,
                ls,
                upper,
                self.phase_rate(line, t, upper),
                line.is_conjugate_symmetric(),
                self.measure.quadrature(),
                |p| {
                    let lam = self.model.lambda(t, p);
                    [lam, lam * self.model.gamma(t, p)]
                },
            )?;
            y += out.value[0];
            zs += out.value[1];
            error_estimate += out.error[0] + out.error[1] / s;
            panels += out.panels;
            if at_horizon {
                if let Some(tail) = line.mellin_tail(lx, ls, upper) {
                    y += tail;
                }
            }
            tail_bound += out.tail_bound * self.model.lambda(t, line.point(upper)).norm();
        }
        Ok(PointValue {
            y,
            z: zs / s,
            error_estimate,
            tail_bound,
            panels,
        })
    }

    pub fn y(&self, t: f64, x: f64, s: f64) -> Result<Complex64> {
        Ok(self.point(t, x, s)?.y)
    }

    pub fn z(&self, t: f64, x: f64, s: f64) -> Result<Complex64> {
        Ok(self.point(t, x, s)?.z)
    }

    /// ∫ dΠ x^{z₁} s^{z₂} w(z) with the truncation used for y at time t.
    pub fn contour_integral<W>(&self, t: f64, x: f64, s: f64, w: W) -> Result<Complex64>
    where
        W: Fn(ComplexPair) -> Complex64,
    {
        self.check_point(t, x, s)?;
        let (lx, ls) = (x.ln(), s.ln());
        let mut acc: Complex64 = self
            .measure
            .atoms()
            .iter()
            .map(|a| a.weight * a.point.monomial_log(lx, ls) * w(a.point))
            .sum();
        for line in self.measure.lines() {
            let upper = self.truncation(line, t);
            let out = integrate_line(
                line,
                lx,
                ls,
                upper,
                self.phase_rate(line, t, upper),
                false,
                self.measure.quadrature(),
                |p| [w(p)],
            )?;
            acc += out.value[0];
        }
        Ok(acc)
    }

    /// y and z on a (t, x, s) grid; identical to pointwise evaluation.
    pub fn hedge_surface(&self, t_grid: &[f64], x_grid: &[f64], s_grid: &[f64]) -> Result<HedgeSurface> {
        for (name, g) in [("t", t_grid), ("x", x_grid), ("s", s_grid)] {
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::domain(format!("{name} grid must be strictly increasing")));
            }
        }
        let mut points = Vec::with_capacity(t_grid.len() * x_grid.len() * s_grid.len());
        for &t in t_grid {
            for &x in x_grid {
                for &s in s_grid {
                    points.push((t, x, s));
                }
            }
        }
        let values: Vec<(Complex64, Complex64)> = points
            .par_iter()
            .map(|&(t, x, s)| {
                self.point(t, x, s)
                    .map(|v| (v.y, v.z))
                    .map_err(|e| e.at(format!("t={t}, x={x}, s={s}")))
            })
            .collect::<Result<_>>()?;
        Ok(HedgeSurface {
            t: t_grid.to_vec(),
            x: x_grid.to_vec(),
            s: s_grid.to_vec(),
            y: values.iter().map(|v| v.0).collect(),
            z: values.iter().map(|v| v.1).collect(),
        })
    }

    pub fn residual_process_spec(&self) -> ResidualSpec {
        let replicable = self.measure.lines().is_empty()
            && self
                .measure
                .atoms()
                .iter()
                .all(|a| a.point == ComplexPair::ORIGIN || a.point == ComplexPair::S);
        ResidualSpec {
            recipe: "O_t = y(t, X_t, S_t) - h0 - sum over rebalancing dates of z(t_i, X_ti, S_ti) (S_ti+1 - S_ti)"
                .to_string(),
            replicable,
        }
    }

    /// Tabulate y and z at the given times (all < T) for fast repeated lookups.
    pub fn hedge_table(&self, times: &[f64]) -> Result<HedgeTable<'_>> {
        HedgeTable::build(self, times)
    }
}

/// y and z on a rectangular grid, stored t-major then x then s.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeSurface {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<Complex64>,
    pub z: Vec<Complex64>,
}

impl HedgeSurface {
    pub fn index(&self, it: usize, ix: usize, is: usize) -> usize {
        (it * self.x.len() + ix) * self.s.len() + is
    }

    /// CSV with columns t,x,s,y,z (real parts).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,s,y,z")?;
        for (it, t) in self.t.iter().enumerate() {
            for (ix, x) in self.x.iter().enumerate() {
                for (is, s) in self.s.iter().enumerate() {
                    let k = self.index(it, ix, is);
                    writeln!(w, "{t},{x},{s},{},{}", self.y[k].re, self.z[k].re)?;
                }
            }
        }
        Ok(())
    }
}

struct LineGrid {
    l0: f64,
    dl: f64,
    values: Vec<[Complex64; 2]>,
}

impl LineGrid {
    fn interpolate(&self, l: f64) -> Option<[Complex64; 2]> {
        let n = self.values.len();
        let p = (l - self.l0) / self.dl;
        if !(p >= 1.0 && p <= (n - 3) as f64) {
            return None;
        }
        let i = (p.floor() as usize).min(n - 3);
        let f = p - i as f64;
        // 4-point Lagrange weights on nodes i-1, i, i+1, i+2
        let w = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (k, wk) in w.iter().enumerate() {
            let v = self.values[i + k - 1];
            out[0] += v[0] * wk;
            out[1] += v[1] * wk;
        }
        Some(out)
    }
}

struct Slice {
    t: f64,
    // weight · λ, weight · λ · γ per atom
    atoms: Vec<(Complex64, Complex64)>,
    lines: Vec<LineGrid>,
}

/// Per-time tables of the contour integrals on a log-price grid, with
/// cubic interpolation and a pointwise fallback outside the grid.
pub struct HedgeTable<'a> {
    dec: &'a FsDecomposition,
    slices: Vec<Slice>,
}

impl<'a> HedgeTable<'a> {
    fn build(dec: &'a FsDecomposition, times: &[f64]) -> Result<Self> {
        let horizon = dec.model.horizon();
        if times.iter().any(|t| !(*t >= 0.0 && *t < horizon)) {
            return Err(Error::domain("hedge table times must lie in [0, T)"));
        }
        let slices = times
            .par_iter()
            .map(|&t| Self::slice(dec, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(HedgeTable { dec, slices })
    }

    fn slice(dec: &FsDecomposition, t: f64) -> Result<Slice> {
        let model = &dec.model;
        let horizon = model.horizon();
        let atoms = dec
            .measure
            .atoms()
            .iter()
            .map(|a| {
                let lam = a.weight * model.lambda(t, a.point);
                (lam, lam * model.gamma(t, a.point))
            })
            .collect();
        let mut lines = Vec::with_capacity(dec.measure.lines().len());
        for line in dec.measure.lines() {
            let axis = FsDecomposition::axis_index(line);
            let origin = if axis == 0 { model.x0() } else { model.s0() };
            let center = origin.ln() + model.log_mean(0.0, horizon, axis);
            let half = 9.0 * model.log_variance(0.0, horizon, axis).sqrt() + 0.5;
            let (lo, hi) = (center - half, center + half);
            let remaining = model.log_variance(t, horizon, axis);
            let mut dl = (hi - lo) / 256.0;
            if remaining > 0.0 {
                dl = dl.min(remaining.sqrt() / 8.0);
            }
            let n = (((hi - lo) / dl).ceil() as usize).clamp(256, 8192) + 1;
            let dl = (hi - lo) / (n - 1) as f64;

            let upper = dec.truncation(line, t);
            let shift = match line.density {
                LineDensity::Mellin { strike } => strike.ln(),
                LineDensity::Custom { .. } => 0.0,
            };
            let freq = (lo - shift).abs().max((hi - shift).abs()) + dec.phase_rate(line, t, upper);
            let width = (3.0 / freq.max(1e-9)).min(upper / 8.0);
            let rule = composite_rule(&graded_breakpoints(upper, width));
            let symmetric = line.is_conjugate_symmetric();
            let mut nodes: Vec<(f64, [Complex64; 2])> = Vec::with_capacity(2 * rule.len());
            for &(u, w) in &rule {
                let signs: &[f64] = if symmetric { &[1.0] } else { &[1.0, -1.0] };
                for &sg in signs {
                    let p = line.point(sg * u);
                    let lam = model.lambda(t, p);
                    let a = line.density_at(sg * u) * w * lam;
                    nodes.push((sg * u, [a, a * model.gamma(t, p)]));
                }
            }
            let mut acc = vec![[Complex64::new(0.0, 0.0); 2]; n];
            for (u, a) in &nodes {
                let step = Complex64::new(0.0, u * dl).exp();
                let mut c = Complex64::new(0.0, u * lo).exp();
                for v in acc.iter_mut() {
                    v[0] += a[0] * c;
                    v[1] += a[1] * c;
                    c *= step;
                }
            }
            let r = line.abscissa;
            let values = acc
                .into_iter()
                .enumerate()
                .map(|(j, v)| {
                    let e = (r * (lo + j as f64 * dl)).exp();
                    if symmetric {
                        [Complex64::new(2.0 * v[0].re * e, 0.0), Complex64::new(2.0 * v[1].re * e, 0.0)]
                    } else {
                        [v[0] * e, v[1] * e]
                    }
                })
                .collect();
            lines.push(LineGrid { l0: lo, dl, values });
        }
        Ok(Slice { t, atoms, lines })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn time(&self, step: usize) -> f64 {
        self.slices[step].t
    }

    /// (y, z) at table time `step`.
    pub fn lookup(&self, step: usize, x: f64, s: f64) -> Result<(Complex64, Complex64)> {
        let slice = &self.slices[step];
        let (lx, ls) = (x.ln(), s.ln());
        let mut y = Complex64::new(0.0, 0.0);
        let mut zs = Complex64::new(0.0, 0.0);
        for (atom, (cy, cz)) in self.dec.measure.atoms().iter().zip(&slice.atoms) {
            let m = atom.point.monomial_log(lx, ls);
            y += m * cy;
            zs += m * cz;
        }
        for (line, grid) in self.dec.measure.lines().iter().zip(&slice.lines) {
            let (lv, lf) = match line.axis {
                Axis::X => (lx, ls),
                Axis::S => (ls, lx),
            };
            let Some(v) = grid.interpolate(lv) else {
                let p = self.dec.point(slice.t, x, s)?;
                return Ok((p.y, p.z));
            };
            let fixed = (line.fixed_exponent * lf).exp();
            y += fixed * v[0];
            zs += fixed * v[1];
        }
        Ok((y, zs / s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyParams;
    use crate::payoff::{power_claim, vanilla_call};

    fn bs() -> AdditiveModel {
        let p = LevyParams::from_vols([0.01, 0.03], 0.3, 0.2, 0.7);
        AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap()
    }

    #[test]
    fn underlying_and_bond_are_replicated() {
        let m = bs();
        let one = Complex64::new(1.0, 0.0);
        let d = decompose(&m, &power_claim(ComplexPair::S, one)).unwrap();
        assert!((d.h0() - 100.0).abs() < 1e-12);
        let v = d.point(0.3, 80.0, 120.0).unwrap();
        assert!((v.y - Complex64::new(120.0, 0.0)).norm() < 1e-12);
        assert!((v.z - one).norm() < 1e-15);
        let d = decompose(&m, &power_claim(ComplexPair::ORIGIN, one)).unwrap();
        let v = d.point(0.3, 80.0, 120.0).unwrap();
        assert_eq!(v.y, one);
        assert_eq!(v.z, Complex64::new(0.0, 0.0));
        assert!(d.residual_process_spec().replicable);
    }

    #[test]
    fn terminal_value_is_the_payoff() {
        let m = bs();
        let claim = vanilla_call(100.0, 0.5).unwrap();
        let d = decompose(&m, &claim).unwrap();
        for s in [40.0, 90.0, 100.0, 130.0, 300.0] {
            let y = d.y(1.0, 100.0, s).unwrap();
            assert!((y.re - (s - 100.0f64).max(0.0)).abs() < 1e-6 * 101.0, "s={s} y={y}");
        }
        assert!(!d.residual_process_spec().replicable);
    }

    #[test]
    fn table_matches_pointwise() {
        let p = LevyParams::from_vols([0.01, 0.03], 0.3, 0.2, 0.7).with_jumps(0.5, [-0.05, -0.1], [[0.02, 0.01], [0.01, 0.02]]);
        let m = AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap();
        let claim = vanilla_call(100.0, 0.5).unwrap().swap_axes();
        let d = decompose(&m, &claim).unwrap();
        let times = [0.0, 0.5, 0.99, 0.999];
        let table = d.hedge_table(&times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            for (x, s) in [(70.0, 90.0), (100.0, 100.0), (101.3, 80.0), (160.0, 130.0)] {
                let (ty, tz) = table.lookup(k, x, s).unwrap();
                let p = d.point(t, x, s).unwrap();
                assert!((ty - p.y).norm() < 1e-6 * 100.0, "t={t} x={x} y {ty} vs {}", p.y);
                assert!((tz - p.z).norm() < 1e-5, "t={t} x={x} z {tz} vs {}", p.z);
            }
        }
    }

    #[test]
    fn surface_equals_pointwise() {
        let d = decompose(&bs(), &vanilla_call(100.0, 0.5).unwrap()).unwrap();
        let surf = d.hedge_surface(&[0.0, 0.5], &[90.0, 110.0], &[80.0, 100.0, 120.0]).unwrap();
        let k = surf.index(1, 0, 2);
        let p = d.point(0.5, 90.0, 120.0).unwrap();
        assert_eq!(surf.y[k], p.y);
        assert_eq!(surf.z[k], p.z);
        assert!(d.hedge_surface(&[0.5, 0.0], &[1.0], &[1.0]).is_err());
    }
}
