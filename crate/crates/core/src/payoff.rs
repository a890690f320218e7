//! Claims g(x, s) represented as finite complex measures Π on ℂ²,
//! g(x, s) = ∫ dΠ(z₁, z₂) x^{z₁} s^{z₂}.
//!
//! A measure is a list of atoms plus vertical contour lines. Lines carry the
//! 1/(2πi) normalisation inside their density, so a line contributes
//! ∫ density(u) x^{z₁(u)} s^{z₂(u)} du over the real line.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::quadrature::{graded_breakpoints, integrate_adaptive, Integral, QuadratureConfig};
use crate::special::oscillatory_tails;

/// Default contour truncation.
pub const DEFAULT_TRUNCATION: f64 = 200.0;
/// Default per-line panel budget.
pub const DEFAULT_PANELS: usize = 512;
pub const DEFAULT_CALL_ABSCISSA: f64 = 0.5;
pub const DEFAULT_PUT_ABSCISSA: f64 = 1.5;

// Terms of the asymptotic expansion of 1/(ζ(ζ-1)) used for the tail.
const TAIL_TERMS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A frequency (z₁, z₂) of the power payoff x^{z₁} s^{z₂}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair {
    z1: Complex64,
    z2: Complex64,
}

impl ComplexPair {
    pub const ORIGIN: ComplexPair = ComplexPair { z1: ZERO, z2: ZERO };
    /// (1, 0): the claim X_T.
    pub const X: ComplexPair = ComplexPair {
        z1: Complex64::new(1.0, 0.0),
        z2: ZERO,
    };
    /// (0, 1): the claim S_T.
    pub const S: ComplexPair = ComplexPair {
        z1: ZERO,
        z2: Complex64::new(1.0, 0.0),
    };

    pub fn new(z1: Complex64, z2: Complex64) -> Result<Self> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if finite(z1) && finite(z2) {
            Ok(ComplexPair { z1, z2 })
        } else {
            Err(Error::domain(format!("non-finite frequency ({z1}, {z2})")))
        }
    }

    pub fn real(a: f64, b: f64) -> Result<Self> {
        Self::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    }

    // Callers guarantee finiteness.
    pub(crate) fn raw(z1: Complex64, z2: Complex64) -> Self {
        ComplexPair { z1, z2 }
    }

    pub fn z1(&self) -> Complex64 {
        self.z1
    }

    pub fn z2(&self) -> Complex64 {
        self.z2
    }

    pub fn re(&self) -> (f64, f64) {
        (self.z1.re, self.z2.re)
    }

    pub fn conj(&self) -> Self {
        ComplexPair {
            z1: self.z1.conj(),
            z2: self.z2.conj(),
        }
    }

    pub fn swapped(&self) -> Self {
        ComplexPair {
            z1: self.z2,
            z2: self.z1,
        }
    }

    /// x^{z₁} s^{z₂} from logarithms of x and s.
    pub fn monomial_log(&self, log_x: f64, log_s: f64) -> Complex64 {
        (self.z1 * log_x + self.z2 * log_s).exp()
    }

    pub fn monomial(&self, x: f64, s: f64) -> Complex64 {
        self.monomial_log(x.ln(), s.ln())
    }
}

impl Add for ComplexPair {
    type Output = ComplexPair;
    fn add(self, rhs: ComplexPair) -> ComplexPair {
        ComplexPair {
            z1: self.z1 + rhs.z1,
            z2: self.z2 + rhs.z2,
        }
    }
}

impl fmt::Display for ComplexPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.z1, self.z2)
    }
}

/// The coordinate that varies along a contour line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    S,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::S,
            Axis::S => Axis::X,
        }
    }
}

#[derive(Clone)]
pub enum LineDensity {
    /// K^{1-ζ} / (2π ζ(ζ-1)) at ζ = R + iu.
    Mellin { strike: f64 },
    /// Arbitrary density in u; `conjugate_symmetric` promises
    /// density(-u) = conj(density(u)).
    Custom {
        label: String,
        density: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
        conjugate_symmetric: bool,
    },
}

impl fmt::Debug for LineDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineDensity::Mellin { strike } => f.debug_struct("Mellin").field("strike", strike).finish(),
            LineDensity::Custom { label, .. } => f.debug_struct("Custom").field("label", label).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContourLine {
    pub axis: Axis,
    /// Value of the non-varying coordinate.
    pub fixed_exponent: Complex64,
    /// Real part R of the varying coordinate.
    pub abscissa: f64,
    pub weight: Complex64,
    pub density: LineDensity,
    pub truncation: f64,
    /// Panel budget of the adaptive quadrature.
    pub panels: usize,
}

impl ContourLine {
    pub fn mellin(axis: Axis, strike: f64, abscissa: f64) -> Result<Self> {
        let line = ContourLine {
            axis,
            fixed_exponent: ZERO,
            abscissa,
            weight: Complex64::new(1.0, 0.0),
            density: LineDensity::Mellin { strike },
            truncation: DEFAULT_TRUNCATION,
            panels: DEFAULT_PANELS,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if !self.abscissa.is_finite() || !finite(self.fixed_exponent) || !finite(self.weight) {
            return Err(Error::domain("contour line with non-finite parameters"));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::domain(format!("truncation must be positive, got {}", self.truncation)));
        }
        if self.panels == 0 {
            return Err(Error::domain("panel budget must be positive"));
        }
        if let LineDensity::Mellin { strike } = self.density {
            if !(strike > 0.0 && strike.is_finite()) {
                return Err(Error::domain(format!("strike must be positive, got {strike}")));
            }
            if self.abscissa == 0.0 || self.abscissa == 1.0 {
                return Err(Error::domain("Mellin line passes through a pole (abscissa 0 or 1)"));
            }
        }
        Ok(())
    }

    pub fn point(&self, u: f64) -> ComplexPair {
        let moving = Complex64::new(self.abscissa, u);
        match self.axis {
            Axis::X => ComplexPair::raw(moving, self.fixed_exponent),
            Axis::S => ComplexPair::raw(self.fixed_exponent, moving),
        }
    }

    /// Weighted density at u, 1/(2πi) and dz = i du already folded in.
    pub fn density_at(&self, u: f64) -> Complex64 {
        let kernel = match &self.density {
            LineDensity::Mellin { strike } => {
                let zeta = Complex64::new(self.abscissa, u);
                let k = strike.ln();
                ((1.0 - zeta) * k).exp() / (2.0 * PI * zeta * (zeta - 1.0))
            }
            LineDensity::Custom { density, .. } => density(u),
        };
        self.weight * kernel
    }

    pub fn is_conjugate_symmetric(&self) -> bool {
        let density_ok = match &self.density {
            LineDensity::Mellin { .. } => true,
            LineDensity::Custom { conjugate_symmetric, .. } => *conjugate_symmetric,
        };
        density_ok && self.weight.im == 0.0 && self.fixed_exponent.im == 0.0
    }

    fn logs(&self, log_x: f64, log_s: f64) -> (f64, f64) {
        match self.axis {
            Axis::X => (log_x, log_s),
            Axis::S => (log_s, log_x),
        }
    }

    /// Declared tail bound K^{1-R} |fixed power| v^R / (π U) for Mellin lines.
    pub fn tail_bound(&self, log_x: f64, log_s: f64, truncation: f64) -> f64 {
        let (lv, lf) = self.logs(log_x, log_s);
        match self.density {
            LineDensity::Mellin { strike } => {
                self.weight.norm() * strike.powf(1.0 - self.abscissa) * (self.fixed_exponent.re * lf).exp()
                    * (self.abscissa * lv).exp()
                    / (PI * truncation)
            }
            LineDensity::Custom { .. } => {
                let mono = |u: f64| self.point(u).monomial_log(log_x, log_s).norm();
                (self.density_at(truncation).norm() * mono(truncation)
                    + self.density_at(-truncation).norm() * mono(-truncation))
                    * truncation
            }
        }
    }

    /// ∫_{|u|>U} density·x^{z₁}s^{z₂} du from the asymptotic expansion of the
    /// Mellin kernel. None for custom densities.
    pub(crate) fn mellin_tail(&self, log_x: f64, log_s: f64, truncation: f64) -> Option<Complex64> {
        let LineDensity::Mellin { strike } = self.density else {
            return None;
        };
        let (lv, lf) = self.logs(log_x, log_s);
        let l = lv - strike.ln();
        let r = self.abscissa;
        let amplitude = self.weight * strike / (2.0 * PI) * (self.fixed_exponent * lf).exp() * (r * l).exp();
        let tails = oscillatory_tails(l, truncation, TAIL_TERMS + 1);
        let mut acc = 0.0;
        let mut i_pow = Complex64::new(-1.0, 0.0); // i^{-2}
        let i_inv = Complex64::new(0.0, -1.0);
        for n in 0..TAIL_TERMS {
            let h = r.powi(n as i32 + 1) - (r - 1.0).powi(n as i32 + 1);
            let c = if n % 2 == 0 { h } else { -h };
            acc += c * 2.0 * (i_pow * tails[n]).re;
            i_pow *= i_inv;
        }
        Some(amplitude * acc)
    }

    fn oscillation(&self, log_x: f64, log_s: f64) -> f64 {
        let (lv, _) = self.logs(log_x, log_s);
        match self.density {
            LineDensity::Mellin { strike } => (lv - strike.ln()).abs(),
            LineDensity::Custom { .. } => lv.abs(),
        }
    }

    fn digest_text(&self) -> String {
        let density = match &self.density {
            LineDensity::Mellin { strike } => format!("mellin:{strike:?}"),
            LineDensity::Custom { label, conjugate_symmetric, .. } => {
                format!("custom:{label}:{conjugate_symmetric}")
            }
        };
        format!(
            "line axis={:?} fixed={:?},{:?} R={:?} w={:?},{:?} {density} U={:?} panels={}",
            self.axis,
            self.fixed_exponent.re,
            self.fixed_exponent.im,
            self.abscissa,
            self.weight.re,
            self.weight.im,
            self.truncation,
            self.panels
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub weight: Complex64,
    pub point: ComplexPair,
}

/// Result of integrating a weighted function along one line.
pub(crate) struct LineIntegral<const N: usize> {
    pub value: [Complex64; N],
    pub error: [f64; N],
    pub panels: usize,
    pub tail_bound: f64,
}

/// ∫ density(u) x^{z₁}s^{z₂} w_k(z(u)) du over |u| ≤ upper.
///
/// `symmetric` asserts the whole integrand is conjugate symmetric in u, in
/// which case only u ≥ 0 is sampled and doubled through the real part.
/// `phase_rate` is an estimate of extra oscillation carried by `w`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_line<const N: usize, W>(
    line: &ContourLine,
    log_x: f64,
    log_s: f64,
    upper: f64,
    phase_rate: f64,
    symmetric: bool,
    cfg: &QuadratureConfig,
    w: W,
) -> Result<LineIntegral<N>>
where
    W: Fn(ComplexPair) -> [Complex64; N],
{
    let half = |u: f64| -> [Complex64; N] {
        let z = line.point(u);
        let base = line.density_at(u) * z.monomial_log(log_x, log_s);
        let wv = w(z);
        std::array::from_fn(|k| base * wv[k])
    };
    let f = |u: f64| -> [Complex64; N] {
        let a = half(u);
        if symmetric {
            std::array::from_fn(|k| Complex64::new(2.0 * a[k].re, 0.0))
        } else {
            let b = half(-u);
            std::array::from_fn(|k| a[k] + b[k])
        }
    };
    let freq = line.oscillation(log_x, log_s) + phase_rate.abs();
    let width = (3.0 / freq.max(1e-9)).min(upper / 8.0).max(upper / line.panels as f64);
    let cfg = QuadratureConfig {
        max_panels: line.panels,
        ..*cfg
    };
    let out: Integral<N> = integrate_adaptive(f, &graded_breakpoints(upper, width), &cfg)?;
    Ok(LineIntegral {
        value: out.value,
        error: out.error,
        panels: out.panels,
        tail_bound: line.tail_bound(log_x, log_s, upper),
    })
}

/// Diagnostics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: Complex64,
    pub error_estimate: f64,
    /// Declared bound on the neglected contour tail.
    pub tail_bound: f64,
    /// Analytic tail correction added to the truncated integral.
    pub tail_correction: f64,
    pub panels: usize,
}

/// A finite complex measure on ℂ²: atoms plus contour lines.
#[derive(Debug, Clone, Default)]
pub struct PayoffMeasure {
    atoms: Vec<Atom>,
    lines: Vec<ContourLine>,
    quadrature: QuadratureConfig,
}

/// Measure of s ↦ (s - K)⁺ - s: one Mellin line on the s-axis at 0 < R < 1.
pub fn call_measure(strike: f64, abscissa: f64) -> Result<PayoffMeasure> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::domain(format!("strike must be positive, got {strike}")));
    }
    if !(abscissa > 0.0 && abscissa < 1.0) {
        return Err(Error::domain(format!("call abscissa must lie in (0,1), got {abscissa}")));
    }
    PayoffMeasure::empty().with_line(ContourLine::mellin(Axis::S, strike, abscissa)?)
}

/// Measure of s ↦ (K - s)⁺ built from a Mellin line at U > 0, U ≠ 1.
///
/// The line alone gives (s - K)⁺ for U > 1 and (s - K)⁺ - s for 0 < U < 1;
/// put-call parity atoms complete the put.
pub fn put_measure(strike: f64, abscissa: f64) -> Result<PayoffMeasure> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::domain(format!("strike must be positive, got {strike}")));
    }
    if !(abscissa > 0.0 && abscissa.is_finite()) || abscissa == 1.0 {
        return Err(Error::domain(format!("put abscissa must be positive and not 1, got {abscissa}")));
    }
    let mut m = PayoffMeasure::empty()
        .with_line(ContourLine::mellin(Axis::S, strike, abscissa)?)?
        .with_atom(Complex64::new(strike, 0.0), ComplexPair::ORIGIN);
    if abscissa > 1.0 {
        m = m.with_atom(Complex64::new(-1.0, 0.0), ComplexPair::S);
    }
    Ok(m)
}

/// weight · x^{z₁} s^{z₂} as a single atom.
pub fn power_claim(z: ComplexPair, weight: Complex64) -> PayoffMeasure {
    PayoffMeasure::empty().with_atom(weight, z)
}

/// (s - K)⁺: the call line plus the atom at (0, 1).
pub fn vanilla_call(strike: f64, abscissa: f64) -> Result<PayoffMeasure> {
    Ok(call_measure(strike, abscissa)?.with_atom(Complex64::new(1.0, 0.0), ComplexPair::S))
}

impl PayoffMeasure {
    pub fn empty() -> Self {
        PayoffMeasure::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn lines(&self) -> &[ContourLine] {
        &self.lines
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quadrature
    }

    pub fn with_atom(mut self, weight: Complex64, point: ComplexPair) -> Self {
        self.atoms.push(Atom { weight, point });
        self
    }

    pub fn with_line(mut self, line: ContourLine) -> Result<Self> {
        line.validate()?;
        self.lines.push(line);
        Ok(self)
    }

    pub fn with_quadrature(mut self, cfg: QuadratureConfig) -> Self {
        self.quadrature = cfg;
        self
    }

    /// Set U_max on every line.
    pub fn with_truncation(mut self, truncation: f64) -> Result<Self> {
        for l in &mut self.lines {
            l.truncation = truncation;
            l.validate()?;
        }
        Ok(self)
    }

    pub fn with_panels(mut self, panels: usize) -> Result<Self> {
        for l in &mut self.lines {
            l.panels = panels;
            l.validate()?;
        }
        Ok(self)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.weight *= c;
        }
        for l in &mut out.lines {
            l.weight *= c;
        }
        out
    }

    /// Exchange the roles of x and s.
    pub fn swap_axes(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.point = a.point.swapped();
        }
        for l in &mut out.lines {
            l.axis = l.axis.other();
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.lines.is_empty()
    }

    /// Whether the measure is invariant under conjugation, i.e. encodes a real payoff.
    pub fn is_conjugate_symmetric(&self) -> bool {
        let atoms_ok = self.atoms.iter().all(|a| {
            let mirrored = Atom {
                weight: a.weight.conj(),
                point: a.point.conj(),
            };
            (a.weight.im == 0.0 && a.point == a.point.conj())
                || self.atoms.contains(&mirrored)
        });
        atoms_ok && self.lines.iter().all(ContourLine::is_conjugate_symmetric)
    }

    /// Real parts of the support; lines contribute their constant real part.
    pub fn real_support(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.atoms.iter().map(|a| a.point.re()).collect();
        pts.extend(self.lines.iter().map(|l| l.point(0.0).re()));
        pts
    }

    /// Support points whose frequencies must be carried by a model: atoms and
    /// the u = 0 point of every line.
    pub fn representative_points(&self) -> Vec<ComplexPair> {
        let mut pts: Vec<ComplexPair> = self.atoms.iter().map(|a| a.point).collect();
        pts.extend(self.lines.iter().map(|l| l.point(0.0)));
        pts
    }

    /// Σ|atom weights| + Σ ∫_{-U}^{U} |density| du.
    pub fn total_variation(&self) -> Result<f64> {
        let mut tv: f64 = self.atoms.iter().map(|a| a.weight.norm()).sum();
        for line in &self.lines {
            let f = |u: f64| [Complex64::new(line.density_at(u).norm() + line.density_at(-u).norm(), 0.0)];
            let pts = graded_breakpoints(line.truncation, line.truncation / 16.0);
            tv += integrate_adaptive(f, &pts, &self.quadrature)?.value[0].re;
        }
        Ok(tv)
    }

    pub fn evaluate(&self, x: f64, s: f64) -> Result<Complex64> {
        Ok(self.evaluate_detailed(x, s)?.value)
    }

    pub fn evaluate_detailed(&self, x: f64, s: f64) -> Result<Evaluation> {
        if !(x > 0.0 && s > 0.0) {
            return Err(Error::domain(format!("evaluate needs x, s > 0, got ({x}, {s})")));
        }
        let (lx, ls) = (x.ln(), s.ln());
        let mut value: Complex64 = self
            .atoms
            .iter()
            .map(|a| a.weight * a.point.monomial_log(lx, ls))
            .sum();
        let mut error_estimate = 0.0;
        let mut tail_bound = 0.0;
        let mut tail_correction = 0.0;
        let mut panels = 0;
        for line in &self.lines {
            let out = integrate_line(
                line,
                lx,
                ls,
                line.truncation,
                0.0,
                line.is_conjugate_symmetric(),
                &self.quadrature,
                |_| [Complex64::new(1.0, 0.0)],
            )?;
            value += out.value[0];
            error_estimate += out.error[0];
            tail_bound += out.tail_bound;
            panels += out.panels;
            if let Some(t) = line.mellin_tail(lx, ls, line.truncation) {
                value += t;
                tail_correction += t.norm();
            }
        }
        Ok(Evaluation {
            value,
            error_estimate,
            tail_bound,
            tail_correction,
            panels,
        })
    }

    /// Declared tail bound summed over lines.
    pub fn tail_bound(&self, x: f64, s: f64) -> f64 {
        self.lines
            .iter()
            .map(|l| l.tail_bound(x.ln(), s.ln(), l.truncation))
            .sum()
    }

    /// Closed-form value when every line has a Mellin density.
    pub fn exact_value(&self, x: f64, s: f64) -> Option<Complex64> {
        let mut v: Complex64 = self.atoms.iter().map(|a| a.weight * a.point.monomial(x, s)).sum();
        for line in &self.lines {
            let LineDensity::Mellin { strike } = line.density else {
                return None;
            };
            let (vv, fixed) = match line.axis {
                Axis::X => (x, s),
                Axis::S => (s, x),
            };
            let r = line.abscissa;
            let base = if r > 1.0 {
                (vv - strike).max(0.0)
            } else if r > 0.0 && r < 1.0 {
                (vv - strike).max(0.0) - vv
            } else if r < 0.0 {
                (strike - vv).max(0.0)
            } else {
                return None;
            };
            v += line.weight * (line.fixed_exponent * fixed.ln()).exp() * base;
        }
        Some(v)
    }

    pub fn digest(&self) -> String {
        let mut text = String::new();
        for a in &self.atoms {
            text.push_str(&format!(
                "atom w={:?},{:?} z=({:?},{:?},{:?},{:?})\n",
                a.weight.re,
                a.weight.im,
                a.point.z1.re,
                a.point.z1.im,
                a.point.z2.re,
                a.point.z2.im
            ));
        }
        for l in &self.lines {
            text.push_str(&l.digest_text());
            text.push('\n');
        }
        text.push_str(&format!("{:?}", self.quadrature));
        sha256_hex(&text)
    }
}

impl Add for PayoffMeasure {
    type Output = PayoffMeasure;
    fn add(mut self, rhs: PayoffMeasure) -> PayoffMeasure {
        self.atoms.extend(rhs.atoms);
        self.lines.extend(rhs.lines);
        self
    }
}

impl Mul<PayoffMeasure> for f64 {
    type Output = PayoffMeasure;
    fn mul(self, rhs: PayoffMeasure) -> PayoffMeasure {
        rhs.scaled(Complex64::new(self, 0.0))
    }
}
