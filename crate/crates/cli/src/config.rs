//! Experiment configuration. Every section rejects unknown keys.

use std::path::{Path, PathBuf};

use fshedge::mc::{Baseline, LambdaChoice};
use fshedge::pde::{DiffusionSpec, GridConfig};
use fshedge::tolerances as tol;
use fshedge::{
    power_claim, put_measure, vanilla_call, AdditiveModel, Axis, ComplexPair, LevyParams, PayoffMeasure,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub route: Route,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Fourier,
    Pde,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Levy,
    Piecewise,
    HulleyMcwalter,
}

/// One Lévy segment: drift plus either a covariance or (sigma_x, sigma_s, correlation).
#[derive(Debug, Clone, Default)]
pub struct ParamsConfig {
    pub drift: Option<[f64; 2]>,
    pub covariance: Option<[[f64; 2]; 2]>,
    pub sigma_x: Option<f64>,
    pub sigma_s: Option<f64>,
    pub correlation: Option<f64>,
    pub jumps: Option<JumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub intensity: f64,
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub end: f64,
    pub drift: Option<[f64; 2]>,
    pub covariance: Option<[[f64; 2]; 2]>,
    pub sigma_x: Option<f64>,
    pub sigma_s: Option<f64>,
    pub correlation: Option<f64>,
    pub jumps: Option<JumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub x0: f64,
    pub s0: f64,
    pub horizon: Option<f64>,
    // levy
    pub drift: Option<[f64; 2]>,
    pub covariance: Option<[[f64; 2]; 2]>,
    pub sigma_x: Option<f64>,
    pub sigma_s: Option<f64>,
    pub correlation: Option<f64>,
    pub jumps: Option<JumpConfig>,
    // piecewise
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    // hulley_mcwalter
    pub mu_u: Option<f64>,
    pub mu_s: Option<f64>,
    pub r: Option<f64>,
    pub sigma_u: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Call,
    Put,
    Power,
    Constant,
    Stock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Underlying {
    X,
    #[default]
    S,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kind: ClaimKind,
    #[serde(default)]
    pub on: Underlying,
    pub strike: Option<f64>,
    pub abscissa: Option<f64>,
    /// Exponents (a, b) of x^a s^b for power claims.
    pub exponents: Option<[f64; 2]>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub t: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub nx: Option<usize>,
    pub ns: Option<usize>,
    pub nt: Option<usize>,
    pub radius_stddevs: Option<f64>,
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Test {
    Residual,
    Replication,
    Orthogonality,
    Martingale,
    Normalization,
    Baselines,
    Tradeoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineName {
    NoHedge,
    NaiveDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaName {
    Unit,
    #[default]
    FollmerSchweizer,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<Test>,
    #[serde(default = "default_frequencies")]
    pub martingale_frequencies: Vec<[f64; 2]>,
    #[serde(default)]
    pub martingale_lambda: LambdaName,
    #[serde(default = "default_frequencies")]
    pub normalization_frequencies: Vec<[f64; 2]>,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<BaselineName>,
    #[serde(default)]
    pub residual_csv: bool,
}

fn default_paths() -> usize {
    tol::SUITE_PATHS
}

fn default_steps() -> usize {
    tol::SUITE_STEPS
}

fn default_tests() -> Vec<Test> {
    vec![
        Test::Residual,
        Test::Replication,
        Test::Orthogonality,
        Test::Martingale,
        Test::Normalization,
    ]
}

fn default_frequencies() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [-0.5, 1.0], [1.0, 1.0]]
}

fn default_baselines() -> Vec<BaselineName> {
    vec![BaselineName::NoHedge, BaselineName::NaiveDelta]
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_paths: default_paths(),
            n_steps: default_steps(),
            seed: 0,
            tests: default_tests(),
            martingale_frequencies: default_frequencies(),
            martingale_lambda: LambdaName::default(),
            normalization_frequencies: default_frequencies(),
            baselines: default_baselines(),
            residual_csv: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_compare_paths")]
    pub mc_paths: usize,
    /// Sample points (x, s) at t = 0; defaults to a 3×3 grid around (X₀, S₀).
    pub points: Option<Vec<[f64; 2]>>,
}

fn default_compare_paths() -> usize {
    100_000
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            mc_paths: default_compare_paths(),
            points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub trivial_residual_rel: f64,
    pub mean_stderrs: f64,
    pub orthogonality_corr: f64,
    pub martingale_t: f64,
    pub baseline_stderrs: f64,
    pub tradeoff_bs_rel: f64,
    pub tradeoff_merton_rel: f64,
    pub route_compare_rel: f64,
    pub route_stderrs: f64,
    pub route_hedge_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            trivial_residual_rel: tol::TRIVIAL_RESIDUAL_REL,
            mean_stderrs: tol::MEAN_STDERRS,
            orthogonality_corr: tol::ORTHOGONALITY_CORR,
            martingale_t: tol::MARTINGALE_T,
            baseline_stderrs: tol::BASELINE_STDERRS,
            tradeoff_bs_rel: tol::TRADEOFF_BS_REL,
            tradeoff_merton_rel: tol::TRADEOFF_MERTON_REL,
            route_compare_rel: tol::ROUTE_COMPARE_REL,
            route_stderrs: tol::ROUTE_STDERRS,
            route_hedge_rel: tol::ROUTE_HEDGE_REL,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::Config(format!("`{key}`: {why}")));
        if self.payoff.terms.is_empty() {
            return bad("payoff.terms", "at least one term is required");
        }
        let v = &self.validation;
        if v.n_paths == 0 || v.n_steps == 0 {
            return bad("validation", "n_paths and n_steps must be at least 1");
        }
        if v.tests.contains(&Test::Tradeoff) && v.n_steps < 100 {
            return bad("validation.tests", "tradeoff needs n_steps >= 100");
        }
        if self.compare.mc_paths < 1000 {
            return bad("compare.mc_paths", "at least 1000 paths");
        }
        for (name, grid) in [("surface.t", &self.surface.t), ("surface.x", &self.surface.x), ("surface.s", &self.surface.s)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return bad(name, "must not be empty");
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<AdditiveModel, CliError> {
        let m = &self.model;
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::Config(format!("`model.{key}` is required for kind {:?}", m.kind)))
        };
        let built = match m.kind {
            ModelKind::Levy => {
                let p = params(
                    "model",
                    &ParamsConfig {
                        drift: m.drift,
                        covariance: m.covariance,
                        sigma_x: m.sigma_x,
                        sigma_s: m.sigma_s,
                        correlation: m.correlation,
                        jumps: m.jumps.clone(),
                    },
                )?;
                AdditiveModel::levy(p, need(m.horizon, "horizon")?, m.x0, m.s0)
            }
            ModelKind::Piecewise => {
                if m.segments.is_empty() {
                    return Err(CliError::Config("`model.segments` is required for kind Piecewise".into()));
                }
                let mut pieces = Vec::new();
                for (i, s) in m.segments.iter().enumerate() {
                    let p = params(
                        &format!("model.segments[{i}]"),
                        &ParamsConfig {
                            drift: s.drift,
                            covariance: s.covariance,
                            sigma_x: s.sigma_x,
                            sigma_s: s.sigma_s,
                            correlation: s.correlation,
                            jumps: s.jumps.clone(),
                        },
                    )?;
                    pieces.push((s.end, p));
                }
                AdditiveModel::piecewise(&pieces, m.x0, m.s0)
            }
            ModelKind::HulleyMcwalter => {
                let (mu_u, mu_s, r) = (need(m.mu_u, "mu_u")?, need(m.mu_s, "mu_s")?, need(m.r, "r")?);
                let (su, ss, rho) = (need(m.sigma_u, "sigma_u")?, need(m.sigma_s, "sigma_s")?, need(m.rho, "rho")?);
                let c = rho * su * ss;
                let p = LevyParams::brownian(
                    [mu_u - r - 0.5 * su * su, mu_s - r - 0.5 * ss * ss],
                    [[su * su, c], [c, ss * ss]],
                );
                AdditiveModel::levy(p, need(m.horizon, "horizon")?, m.x0, m.s0)
            }
        };
        built.map_err(CliError::from_core)
    }

    /// The diffusion the PDE route solves; only jump-free homogeneous models qualify.
    pub fn diffusion(&self, model: &AdditiveModel) -> Result<DiffusionSpec, CliError> {
        DiffusionSpec::from_model(model).map_err(|e| CliError::Config(format!("`route`: {e}")))
    }

    pub fn payoff(&self) -> Result<PayoffMeasure, CliError> {
        let mut total = PayoffMeasure::empty();
        for (i, t) in self.payoff.terms.iter().enumerate() {
            let key = format!("payoff.terms[{i}]");
            let cfg_err = |why: String| CliError::Config(format!("`{key}`: {why}"));
            let axis = match t.on {
                Underlying::X => Axis::X,
                Underlying::S => Axis::S,
            };
            let strike = || t.strike.ok_or_else(|| cfg_err("strike is required".into()));
            let measure = match t.kind {
                ClaimKind::Call => on_axis(
                    vanilla_call(strike()?, t.abscissa.unwrap_or(0.5)).map_err(|e| cfg_err(e.to_string()))?,
                    axis,
                ),
                ClaimKind::Put => {
                    let k = strike()?;
                    on_axis(
                        put_measure(k, t.abscissa.unwrap_or(1.5)).map_err(|e| cfg_err(e.to_string()))?,
                        axis,
                    )
                }
                ClaimKind::Power => {
                    let [a, b] = t.exponents.ok_or_else(|| cfg_err("exponents are required".into()))?;
                    let z = ComplexPair::real(a, b).map_err(|e| cfg_err(e.to_string()))?;
                    power_claim(z, Complex64::new(1.0, 0.0))
                }
                ClaimKind::Constant => power_claim(ComplexPair::ORIGIN, Complex64::new(1.0, 0.0)),
                ClaimKind::Stock => on_axis(power_claim(ComplexPair::S, Complex64::new(1.0, 0.0)), axis),
            };
            total = total + t.weight * measure;
        }
        Ok(total)
    }

    /// Payoff as a plain function, for the PDE and its probabilistic representation.
    pub fn payoff_fn(&self) -> impl Fn(f64, f64) -> f64 + Sync + Clone {
        let terms: Vec<TermConfig> = self.payoff.terms.clone();
        move |x, s| {
            terms
                .iter()
                .map(|t| {
                    let u = match t.on {
                        Underlying::X => x,
                        Underlying::S => s,
                    };
                    let k = t.strike.unwrap_or(0.0);
                    let v = match t.kind {
                        ClaimKind::Call => (u - k).max(0.0),
                        ClaimKind::Put => (k - u).max(0.0),
                        ClaimKind::Power => {
                            let [a, b] = t.exponents.unwrap_or([0.0, 0.0]);
                            x.powf(a) * s.powf(b)
                        }
                        ClaimKind::Constant => 1.0,
                        ClaimKind::Stock => u,
                    };
                    t.weight * v
                })
                .sum()
        }
    }

    pub fn grid(&self, model: &AdditiveModel) -> GridConfig {
        let d = GridConfig::new(model.horizon(), model.x0(), model.s0());
        let p = &self.pde;
        GridConfig {
            nx: p.nx.unwrap_or(d.nx),
            ns: p.ns.unwrap_or(d.ns),
            nt: p.nt.unwrap_or(d.nt),
            radius_stddevs: p.radius_stddevs.unwrap_or(d.radius_stddevs),
            snapshots: p.snapshots.unwrap_or(d.snapshots),
            ..d
        }
    }

    /// Surface grids; defaults span ±2 terminal standard deviations of each log-price.
    pub fn surface_grids(&self, model: &AdditiveModel) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let horizon = model.horizon();
        let t = self
            .surface
            .t
            .clone()
            .unwrap_or_else(|| (0..11).map(|i| horizon * i as f64 / 10.0).collect());
        let around = |centre: f64, coordinate: usize| {
            let sd = model.log_variance(0.0, horizon, coordinate).sqrt().max(1e-3);
            (0..21)
                .map(|i| centre * (2.0 * sd * (i as f64 / 10.0 - 1.0)).exp())
                .collect::<Vec<_>>()
        };
        let x = self.surface.x.clone().unwrap_or_else(|| around(model.x0(), 0));
        let s = self.surface.s.clone().unwrap_or_else(|| around(model.s0(), 1));
        (t, x, s)
    }

    pub fn compare_points(&self, model: &AdditiveModel) -> Vec<[f64; 2]> {
        if let Some(p) = &self.compare.points {
            return p.clone();
        }
        let horizon = model.horizon();
        let sx = model.log_variance(0.0, horizon, 0).sqrt();
        let ss = model.log_variance(0.0, horizon, 1).sqrt();
        let mut pts = Vec::new();
        for i in [-1.0, 0.0, 1.0] {
            for j in [-1.0, 0.0, 1.0] {
                pts.push([model.x0() * (0.5 * i * sx).exp(), model.s0() * (0.5 * j * ss).exp()]);
            }
        }
        pts
    }

    pub fn martingale_probes(&self) -> Result<Vec<(ComplexPair, LambdaChoice)>, CliError> {
        let lambda = match self.validation.martingale_lambda {
            LambdaName::Unit => LambdaChoice::Unit,
            LambdaName::FollmerSchweizer => LambdaChoice::FollmerSchweizer,
        };
        frequencies(&self.validation.martingale_frequencies, "validation.martingale_frequencies")
            .map(|zs| zs.into_iter().map(|z| (z, lambda)).collect())
    }

    pub fn normalization_frequencies(&self) -> Result<Vec<ComplexPair>, CliError> {
        frequencies(&self.validation.normalization_frequencies, "validation.normalization_frequencies")
    }

    pub fn baselines(&self) -> Vec<Baseline> {
        self.validation
            .baselines
            .iter()
            .map(|b| match b {
                BaselineName::NoHedge => Baseline::NoHedge,
                BaselineName::NaiveDelta => Baseline::NaiveDelta,
            })
            .collect()
    }
}

fn frequencies(raw: &[[f64; 2]], key: &str) -> Result<Vec<ComplexPair>, CliError> {
    raw.iter()
        .map(|[a, b]| ComplexPair::real(*a, *b).map_err(|e| CliError::Config(format!("`{key}`: {e}"))))
        .collect()
}

fn on_axis(m: PayoffMeasure, axis: Axis) -> PayoffMeasure {
    match axis {
        Axis::S => m,
        Axis::X => m.swap_axes(),
    }
}

fn params(key: &str, p: &ParamsConfig) -> Result<LevyParams, CliError> {
    let drift = p
        .drift
        .ok_or_else(|| CliError::Config(format!("`{key}.drift` is required")))?;
    let base = match (p.covariance, p.sigma_x, p.sigma_s) {
        (Some(c), None, None) if p.correlation.is_none() => LevyParams::brownian(drift, c),
        (None, Some(sx), Some(ss)) => LevyParams::from_vols(drift, sx, ss, p.correlation.unwrap_or(0.0)),
        _ => {
            return Err(CliError::Config(format!(
                "`{key}`: give either covariance or sigma_x, sigma_s (and correlation)"
            )))
        }
    };
    Ok(match &p.jumps {
        Some(j) => base.with_jumps(j.intensity, j.mean, j.covariance),
        None => base,
    })
}
