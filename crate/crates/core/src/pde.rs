//! Diffusion route: the terminal-value PDE for y with drift-adjusted X and
//! driftless S, solved by an explicit finite-difference scheme in
//! log coordinates ξ = ln x, η = ln s; hedge
//! z = ∂_s y + (⟨σ_S, σ_X⟩/|σ_S|²) ∂_x y.

use std::io::Write;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AdditiveModel;
use crate::stats::{path_rng, Moments, BLOCK};

/// Largest admissible CFL number of the explicit scheme.
pub const CFL_LIMIT: f64 = 0.4;
const DEGENERATE: f64 = 1e-12;

pub type DriftFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type VolatilityFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Coefficients of dX = b_X dt + σ_X·dW, dS = b_S dt + σ_S·dW at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCoefficients {
    pub b_x: f64,
    pub b_s: f64,
    pub sigma_x: [f64; 2],
    pub sigma_s: [f64; 2],
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl PointCoefficients {
    /// B = b_X - b_S ⟨σ_S, σ_X⟩/|σ_S|².
    pub fn adjusted_drift(&self) -> Result<f64> {
        let ss = dot(self.sigma_s, self.sigma_s);
        if ss < DEGENERATE {
            return Err(Error::DegenerateVolatility { value: ss });
        }
        Ok(self.b_x - self.b_s * dot(self.sigma_s, self.sigma_x) / ss)
    }

    /// ⟨σ_S, σ_X⟩/|σ_S|².
    pub fn hedge_ratio(&self) -> f64 {
        dot(self.sigma_s, self.sigma_x) / dot(self.sigma_s, self.sigma_s)
    }
}

#[derive(Clone)]
enum Coefficients {
    /// b = b̂·(x, s), σ = σ̂·(x, s).
    BlackScholes {
        b_x: f64,
        b_s: f64,
        sigma_x: [f64; 2],
        sigma_s: [f64; 2],
    },
    General {
        b_x: DriftFn,
        b_s: DriftFn,
        sigma_x: VolatilityFn,
        sigma_s: VolatilityFn,
    },
}

#[derive(Clone)]
pub struct DiffusionSpec {
    coefficients: Coefficients,
}

impl std::fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.coefficients {
            Coefficients::BlackScholes { b_x, b_s, sigma_x, sigma_s } => f
                .debug_struct("BlackScholes")
                .field("b_x", b_x)
                .field("b_s", b_s)
                .field("sigma_x", sigma_x)
                .field("sigma_s", sigma_s)
                .finish(),
            Coefficients::General { .. } => f.write_str("General"),
        }
    }
}

impl DiffusionSpec {
    /// Proportional coefficients b_X = b̂_X x, σ_X = σ̂_X x, and likewise for S.
    pub fn black_scholes(b_x: f64, b_s: f64, sigma_x: [f64; 2], sigma_s: [f64; 2]) -> Result<Self> {
        let ss = dot(sigma_s, sigma_s);
        if ss < DEGENERATE {
            return Err(Error::DegenerateVolatility { value: ss });
        }
        let xx = dot(sigma_x, sigma_x);
        let xs = dot(sigma_x, sigma_s);
        if !(xs < (xx * ss).sqrt() * (1.0 - 1e-12)) {
            return Err(Error::Regime(
                "Black-Scholes case needs strict correlation <sigma_X, sigma_S> < |sigma_X||sigma_S|".into(),
            ));
        }
        Ok(DiffusionSpec {
            coefficients: Coefficients::BlackScholes {
                b_x,
                b_s,
                sigma_x,
                sigma_s,
            },
        })
    }

    /// Excess drifts μ - r and volatilities σ_U, σ_S with correlation ρ.
    pub fn hulley_mcwalter(mu_u: f64, mu_s: f64, r: f64, sigma_u: f64, sigma_s: f64, rho: f64) -> Result<Self> {
        Self::black_scholes(
            mu_u - r,
            mu_s - r,
            [rho * sigma_u, (1.0 - rho * rho).max(0.0).sqrt() * sigma_u],
            [sigma_s, 0.0],
        )
    }

    /// Arbitrary coefficient functions of (t, x, s).
    pub fn general(b_x: DriftFn, b_s: DriftFn, sigma_x: VolatilityFn, sigma_s: VolatilityFn) -> Self {
        DiffusionSpec {
            coefficients: Coefficients::General {
                b_x,
                b_s,
                sigma_x,
                sigma_s,
            },
        }
    }

    /// The diffusion with the same law as a jump-free, time-homogeneous additive model.
    pub fn from_model(model: &AdditiveModel) -> Result<Self> {
        if model.segments().len() != 1 || model.segments()[0].params.has_jumps() {
            return Err(Error::Regime(
                "the PDE route needs a time-homogeneous model without jumps".into(),
            ));
        }
        let p = &model.segments()[0].params;
        let c = &p.covariance;
        let vs = c[1][1].sqrt();
        if vs * vs < DEGENERATE {
            return Err(Error::DegenerateVolatility { value: c[1][1] });
        }
        let cross = c[0][1] / vs;
        let rest = (c[0][0] - cross * cross).max(0.0).sqrt();
        Self::black_scholes(
            p.drift[0] + 0.5 * c[0][0],
            p.drift[1] + 0.5 * c[1][1],
            [cross, rest],
            [vs, 0.0],
        )
    }

    pub fn is_black_scholes(&self) -> bool {
        matches!(self.coefficients, Coefficients::BlackScholes { .. })
    }

    pub fn coefficients(&self, t: f64, x: f64, s: f64) -> PointCoefficients {
        match &self.coefficients {
            Coefficients::BlackScholes { b_x, b_s, sigma_x, sigma_s } => PointCoefficients {
                b_x: b_x * x,
                b_s: b_s * s,
                sigma_x: [sigma_x[0] * x, sigma_x[1] * x],
                sigma_s: [sigma_s[0] * s, sigma_s[1] * s],
            },
            Coefficients::General { b_x, b_s, sigma_x, sigma_s } => PointCoefficients {
                b_x: b_x(t, x, s),
                b_s: b_s(t, x, s),
                sigma_x: sigma_x(t, x, s),
                sigma_s: sigma_s(t, x, s),
            },
        }
    }

    pub fn adjusted_drift(&self, t: f64, x: f64, s: f64) -> Result<f64> {
        self.coefficients(t, x, s).adjusted_drift()
    }

    // Log-coordinate coefficients (a_ξ, a_η, c_ξξ, c_ηη, c_ξη, hedge ratio · s/x).
    fn log_coefficients(&self, t: f64, x: f64, s: f64) -> Result<LogCoefficients> {
        let p = self.coefficients(t, x, s);
        let b = p.adjusted_drift()?;
        let cxx = dot(p.sigma_x, p.sigma_x) / (x * x);
        let css = dot(p.sigma_s, p.sigma_s) / (s * s);
        let cxs = dot(p.sigma_x, p.sigma_s) / (x * s);
        Ok(LogCoefficients {
            a_xi: b / x - 0.5 * cxx,
            a_eta: -0.5 * css,
            cxx,
            css,
            cxs,
            beta: p.hedge_ratio() * s / x,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct LogCoefficients {
    a_xi: f64,
    a_eta: f64,
    cxx: f64,
    css: f64,
    cxs: f64,
    // ⟨σ_S, σ_X⟩ s / (|σ_S|² x), constant in the Black–Scholes case
    beta: f64,
}

impl LogCoefficients {
    fn rate(&self, dxi: f64, deta: f64) -> f64 {
        self.cxx / (dxi * dxi) + self.css / (deta * deta) + self.cxs.abs() / (dxi * deta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Nodes in ξ = ln x (made odd so the centre is a node).
    pub nx: usize,
    /// Nodes in η = ln s.
    pub ns: usize,
    /// Minimum number of time steps; raised to meet the CFL limit when `auto_time_steps`.
    pub nt: usize,
    /// Half-width of the domain in standard deviations of log-price at the horizon.
    pub radius_stddevs: f64,
    pub horizon: f64,
    pub x0: f64,
    pub s0: f64,
    /// Stored time slices, including t = 0 and t = T.
    pub snapshots: usize,
    pub auto_time_steps: bool,
}

impl GridConfig {
    pub fn new(horizon: f64, x0: f64, s0: f64) -> Self {
        GridConfig {
            nx: 241,
            ns: 241,
            nt: 100,
            radius_stddevs: 6.0,
            horizon,
            x0,
            s0,
            snapshots: 11,
            auto_time_steps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSolution {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Snapshot times, increasing.
    pub times: Vec<f64>,
    /// y per snapshot, row-major in (ξ, η).
    pub values: Vec<Vec<f64>>,
    /// z per snapshot; boundary nodes copy their inner neighbour.
    pub hedges: Vec<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
    pub cfl: f64,
    pub warnings: Vec<String>,
    pub x0: f64,
    pub s0: f64,
}

/// Solve the terminal-value problem for y with terminal data g(x, s).
pub fn solve<G>(spec: &DiffusionSpec, g: G, grid: &GridConfig) -> Result<PdeSolution>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    let nx = grid.nx | 1;
    let ns = grid.ns | 1;
    if nx < 5 || ns < 5 || grid.nt == 0 || grid.snapshots < 2 {
        return Err(Error::domain("grid needs nx, ns >= 5, nt >= 1, snapshots >= 2"));
    }
    if !(grid.horizon > 0.0 && grid.x0 > 0.0 && grid.s0 > 0.0 && grid.radius_stddevs > 0.0) {
        return Err(Error::domain("grid needs positive horizon, centre and radius"));
    }
    let t_end = grid.horizon;
    let c0 = spec.log_coefficients(t_end, grid.x0, grid.s0)?;
    let sd_s = (c0.css * t_end).sqrt();
    let sd_x = if c0.cxx > 0.0 { (c0.cxx * t_end).sqrt() } else { sd_s };
    let (cx, cs) = (grid.x0.ln(), grid.s0.ln());
    let half_x = grid.radius_stddevs * sd_x;
    let half_s = grid.radius_stddevs * sd_s;
    let dxi = 2.0 * half_x / (nx - 1) as f64;
    let deta = 2.0 * half_s / (ns - 1) as f64;
    let xi: Vec<f64> = (0..nx).map(|i| cx - half_x + i as f64 * dxi).collect();
    let eta: Vec<f64> = (0..ns).map(|j| cs - half_s + j as f64 * deta).collect();

    // Coefficient field; constant in time for the Black-Scholes case.
    let constant = spec.is_black_scholes();
    let field = |t: f64| -> Result<Vec<LogCoefficients>> {
        if constant {
            return Ok(vec![c0; nx * ns]);
        }
        let mut out = Vec::with_capacity(nx * ns);
        for &a in &xi {
            for &b in &eta {
                out.push(spec.log_coefficients(t, a.exp(), b.exp())?);
            }
        }
        Ok(out)
    };
    let check = field(t_end)?;
    check_regime(&check, constant)?;
    let mut max_rate = check.iter().map(|c| c.rate(dxi, deta)).fold(0.0, f64::max);
    if !constant {
        let early = field(0.0)?;
        check_regime(&early, false)?;
        max_rate = early.iter().map(|c| c.rate(dxi, deta)).fold(max_rate, f64::max);
    }
    let mut steps = grid.nt;
    if grid.auto_time_steps {
        steps = steps.max((t_end * max_rate / CFL_LIMIT).ceil() as usize);
    }
    let dt = t_end / steps as f64;
    let cfl = dt * max_rate;
    if cfl > CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            number: cfl,
            limit: CFL_LIMIT,
        });
    }

    let mut y: Vec<f64> = Vec::with_capacity(nx * ns);
    for &a in &xi {
        for &b in &eta {
            y.push(g(a.exp(), b.exp()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("terminal data is not finite on the grid"));
    }
    let mut warnings = Vec::new();
    if let Some(w) = boundary_warning(&y, nx, ns) {
        warnings.push(w);
    }

    let snap_steps: Vec<usize> = (0..grid.snapshots)
        .map(|k| ((k as f64 / (grid.snapshots - 1) as f64) * steps as f64).round() as usize)
        .collect();
    let mut snapshots: Vec<(usize, Vec<f64>, Vec<LogCoefficients>)> = Vec::new();
    let mut coef = field(t_end)?;
    if snap_steps.contains(&steps) {
        snapshots.push((steps, y.clone(), coef.clone()));
    }
    let mut next = vec![0.0; nx * ns];
    for n in (0..steps).rev() {
        let t_next = (n + 1) as f64 * dt;
        if !constant {
            coef = field(t_next)?;
        }
        explicit_step(&y, &mut next, &coef, nx, ns, dxi, deta, dt);
        extrapolate_boundary(&mut next, nx, ns);
        std::mem::swap(&mut y, &mut next);
        if snap_steps.contains(&n) {
            let c = if constant { coef.clone() } else { field(n as f64 * dt)? };
            snapshots.push((n, y.clone(), c));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("PDE solution blew up"));
    }
    snapshots.reverse();
    let times = snapshots.iter().map(|(n, _, _)| *n as f64 * dt).collect();
    let hedges = snapshots
        .iter()
        .map(|(_, v, c)| hedge_field(v, c, &xi, &eta, dxi, deta))
        .collect();
    let values = snapshots.into_iter().map(|(_, v, _)| v).collect();
    Ok(PdeSolution {
        xi,
        eta,
        times,
        values,
        hedges,
        dt,
        steps,
        cfl,
        warnings,
        x0: grid.x0,
        s0: grid.s0,
    })
}

fn check_regime(field: &[LogCoefficients], constant: bool) -> Result<()> {
    if constant {
        return Ok(());
    }
    // bounded and uniformly elliptic normalised coefficients
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for c in field {
        let tr = c.cxx + c.css;
        let det = c.cxx * c.css - c.cxs * c.cxs;
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        lo = lo.min(0.5 * tr - disc);
        hi = hi.max(0.5 * tr + disc);
        if !(c.a_xi.is_finite() && c.a_eta.is_finite()) {
            return Err(Error::Regime("unbounded drift".into()));
        }
    }
    if !(lo > 1e-10 * hi.max(1e-300)) || !hi.is_finite() {
        return Err(Error::Regime(format!(
            "normalised diffusion matrix not uniformly elliptic (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    Ok(())
}

fn boundary_warning(y: &[f64], nx: usize, ns: usize) -> Option<String> {
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let second = |a: f64, b: f64, c: f64| (a - 2.0 * b + c).abs();
    let mut worst: f64 = 0.0;
    for j in 0..ns {
        for i in [1, nx - 2] {
            worst = worst.max(second(y[(i - 1) * ns + j], y[i * ns + j], y[(i + 1) * ns + j]));
        }
    }
    for i in 0..nx {
        for j in [1, ns - 2] {
            worst = worst.max(second(y[i * ns + j - 1], y[i * ns + j], y[i * ns + j + 1]));
        }
    }
    (worst > 1e-6 * scale).then(|| {
        format!("payoff curvature {:.3e} reaches the truncation boundary; widen radius_stddevs", worst / scale)
    })
}

#[allow(clippy::too_many_arguments)]
fn explicit_step(
    y: &[f64],
    out: &mut [f64],
    coef: &[LogCoefficients],
    nx: usize,
    ns: usize,
    dxi: f64,
    deta: f64,
    dt: f64,
) {
    out.par_chunks_mut(ns).enumerate().for_each(|(i, row)| {
        if i == 0 || i == nx - 1 {
            return;
        }
        for j in 1..ns - 1 {
            let k = i * ns + j;
            let c = &coef[k];
            let v = |di: isize, dj: isize| y[((i as isize + di) as usize) * ns + (j as isize + dj) as usize];
            let y0 = y[k];
            let d_xi = (v(1, 0) - v(-1, 0)) / (2.0 * dxi);
            let d_eta = (v(0, 1) - v(0, -1)) / (2.0 * deta);
            let d_xixi = (v(1, 0) - 2.0 * y0 + v(-1, 0)) / (dxi * dxi);
            let d_etaeta = (v(0, 1) - 2.0 * y0 + v(0, -1)) / (deta * deta);
            let ring = v(1, 0) + v(-1, 0) + v(0, 1) + v(0, -1) - 2.0 * y0;
            let d_cross = if c.cxs >= 0.0 {
                (v(1, 1) + v(-1, -1) - ring) / (2.0 * dxi * deta)
            } else {
                (ring - v(1, -1) - v(-1, 1)) / (2.0 * dxi * deta)
            };
            let ly = c.a_xi * d_xi
                + c.a_eta * d_eta
                + 0.5 * (c.cxx * d_xixi + c.css * d_etaeta + 2.0 * c.cxs * d_cross);
            row[j] = y0 + dt * ly;
        }
    });
}

fn extrapolate_boundary(y: &mut [f64], nx: usize, ns: usize) {
    for i in 1..nx - 1 {
        y[i * ns] = 2.0 * y[i * ns + 1] - y[i * ns + 2];
        y[i * ns + ns - 1] = 2.0 * y[i * ns + ns - 2] - y[i * ns + ns - 3];
    }
    for j in 0..ns {
        y[j] = 2.0 * y[ns + j] - y[2 * ns + j];
        y[(nx - 1) * ns + j] = 2.0 * y[(nx - 2) * ns + j] - y[(nx - 3) * ns + j];
    }
}

fn hedge_field(y: &[f64], coef: &[LogCoefficients], xi: &[f64], eta: &[f64], dxi: f64, deta: f64) -> Vec<f64> {
    let (nx, ns) = (xi.len(), eta.len());
    let mut z = vec![0.0; nx * ns];
    for i in 1..nx - 1 {
        for j in 1..ns - 1 {
            let k = i * ns + j;
            let d_xi = (y[k + ns] - y[k - ns]) / (2.0 * dxi);
            let d_eta = (y[k + 1] - y[k - 1]) / (2.0 * deta);
            z[k] = (d_eta + coef[k].beta * d_xi) / eta[j].exp();
        }
    }
    for i in 0..nx {
        z[i * ns] = z[i * ns + 1];
        z[i * ns + ns - 1] = z[i * ns + ns - 2];
    }
    for j in 0..ns {
        z[j] = z[ns + j];
        z[(nx - 1) * ns + j] = z[(nx - 2) * ns + j];
    }
    z
}

impl PdeSolution {
    fn bilinear(&self, field: &[f64], x: f64, s: f64) -> Option<f64> {
        let (a, b) = (x.ln(), s.ln());
        let (nx, ns) = (self.xi.len(), self.eta.len());
        let dxi = self.xi[1] - self.xi[0];
        let deta = self.eta[1] - self.eta[0];
        let p = (a - self.xi[0]) / dxi;
        let q = (b - self.eta[0]) / deta;
        if !(p >= 0.0 && q >= 0.0 && p <= (nx - 1) as f64 && q <= (ns - 1) as f64) {
            return None;
        }
        let i = (p.floor() as usize).min(nx - 2);
        let j = (q.floor() as usize).min(ns - 2);
        let (fp, fq) = (p - i as f64, q - j as f64);
        let at = |i: usize, j: usize| field[i * ns + j];
        Some(
            (1.0 - fp) * (1.0 - fq) * at(i, j)
                + fp * (1.0 - fq) * at(i + 1, j)
                + (1.0 - fp) * fq * at(i, j + 1)
                + fp * fq * at(i + 1, j + 1),
        )
    }

    /// Index of the snapshot closest to t.
    pub fn snapshot(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// y at snapshot k, bilinear in log coordinates; None outside the grid.
    pub fn value_at(&self, k: usize, x: f64, s: f64) -> Option<f64> {
        self.bilinear(&self.values[k], x, s)
    }

    pub fn hedge_at(&self, k: usize, x: f64, s: f64) -> Option<f64> {
        self.bilinear(&self.hedges[k], x, s)
    }

    /// y(0, x₀, s₀).
    pub fn price(&self) -> f64 {
        let (nx, ns) = (self.xi.len(), self.eta.len());
        self.values[0][(nx / 2) * ns + ns / 2]
    }

    /// CSV with columns t,x,s,y,z over all snapshots.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,s,y,z")?;
        let ns = self.eta.len();
        for (k, t) in self.times.iter().enumerate() {
            for (i, a) in self.xi.iter().enumerate() {
                for (j, b) in self.eta.iter().enumerate() {
                    let idx = i * ns + j;
                    writeln!(w, "{t},{},{},{},{}", a.exp(), b.exp(), self.values[k][idx], self.hedges[k][idx])?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// E[g(X̃_T, S̃_T) | X̃_t = x, S̃_t = s] where X̃ has drift B and S̃ is driftless.
///
/// Exact lognormal sampling in the Black–Scholes case, log-Euler with
/// 256 steps per unit time otherwise.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_representation<G>(
    spec: &DiffusionSpec,
    t: f64,
    x: f64,
    s: f64,
    horizon: f64,
    g: G,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    if n_paths == 0 || !(x > 0.0 && s > 0.0) || !(t <= horizon) {
        return Err(Error::domain("need n_paths >= 1, positive state and t <= T"));
    }
    let tau = horizon - t;
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<f64> {
        match &spec.coefficients {
            Coefficients::BlackScholes { sigma_x, sigma_s, .. } => {
                let c = spec.coefficients(t, x, s);
                let bhat = c.adjusted_drift()? / x;
                let w = [normal(rng) * tau.sqrt(), normal(rng) * tau.sqrt()];
                let lx = (bhat - 0.5 * dot(*sigma_x, *sigma_x)) * tau + dot(*sigma_x, w);
                let ls = -0.5 * dot(*sigma_s, *sigma_s) * tau + dot(*sigma_s, w);
                Ok(g(x * lx.exp(), s * ls.exp()))
            }
            Coefficients::General { .. } => {
                let n = ((256.0 * tau).ceil() as usize).max(1);
                let h = tau / n as f64;
                let (mut a, mut b) = (x.ln(), s.ln());
                for k in 0..n {
                    let c = spec.log_coefficients(t + k as f64 * h, a.exp(), b.exp())?;
                    let p = spec.coefficients(t + k as f64 * h, a.exp(), b.exp());
                    let w = [normal(rng) * h.sqrt(), normal(rng) * h.sqrt()];
                    a += c.a_xi * h + dot(p.sigma_x, w) / a.exp();
                    b += c.a_eta * h + dot(p.sigma_s, w) / b.exp();
                }
                Ok(g(a.exp(), b.exp()))
            }
        }
    };
    let blocks: Vec<Moments> = (0..n_paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let mut m = Moments::default();
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                m.push(sample(&mut rng)?);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let mut total = Moments::default();
    blocks.iter().for_each(|b| total.merge(b));
    Ok(McEstimate {
        mean: total.mean,
        stderr: total.stderr(),
        n_paths,
    })
}

fn normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
