use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use fshedge::engine::{decompose, FsDecomposition, QuadratureReport};
use fshedge::mc::{tradeoff_check, validate, LazyPaths, SimReport, SuiteConfig, TradeoffReport, Validation};
use fshedge::pde::{monte_carlo_representation, solve, PdeSolution};
use fshedge::AdditiveModel;
use serde::Serialize;

use crate::config::{ExperimentConfig, Route, Test};
use crate::{CliError, Command};

#[derive(Debug, Serialize)]
struct PdeSummary {
    h0: f64,
    steps: usize,
    dt: f64,
    cfl: f64,
    nx: usize,
    ns: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    x: f64,
    s: f64,
    y_fourier: f64,
    y_pde: f64,
    y_mc: f64,
    mc_stderr: f64,
    z_fourier: f64,
    z_pde: f64,
    max_gap: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    timestamp: u64,
    command: String,
    model_digest: String,
    measure_digest: String,
    route: Option<Route>,
    horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    h0_fourier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature: Option<QuadratureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pde: Option<PdeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tradeoff_kt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tradeoff: Option<TradeoffReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_variance: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    compare: Vec<CompareRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    checks: Vec<Check>,
}

/// Files collected in memory and written only once the run has succeeded.
#[derive(Default)]
struct Artifacts {
    files: Vec<(&'static str, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push(b'\n');
        self.add(name, text);
        Ok(())
    }

    fn csv<F>(&mut self, name: &'static str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.add(name, buf);
        Ok(())
    }

    // each file goes through a temporary in the same directory and a rename
    fn commit(self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(&bytes).map_err(io)?;
            tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
        }
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: AdditiveModel,
    dec: FsDecomposition,
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let measure = cfg.payoff()?;
    if matches!(cfg.route, Route::Pde | Route::Both) || matches!(command, Command::Pde | Command::Compare) {
        cfg.diffusion(&model)?;
    }
    cfg.martingale_probes()?;
    cfg.normalization_frequencies()?;
    let dec = decompose(&model, &measure).map_err(CliError::from_core)?;
    let ctx = Context { cfg, model, dec };

    let mut summary = Summary {
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        command: format!("{command:?}"),
        model_digest: ctx.model.digest(),
        measure_digest: ctx.dec.measure().digest(),
        route: Some(cfg.route),
        horizon: ctx.model.horizon(),
        tradeoff_kt: ctx.model.tradeoff(&[ctx.model.horizon()]).ok().and_then(|k| k.values.last().copied()),
        ..Default::default()
    };
    let mut out = Artifacts::default();
    let mut checks = Vec::new();

    match command {
        Command::Price => price(&ctx, &mut summary)?,
        Command::HedgeSurface => {
            price(&ctx, &mut summary)?;
            surface(&ctx, &mut out)?;
        }
        Command::Simulate => {
            let v = simulation(&ctx)?;
            record_simulation(&ctx, &v, &mut summary, &mut out)?;
        }
        Command::Pde => {
            let sol = pde(&ctx)?;
            summary.pde = Some(pde_summary(&sol));
            out.csv("pde_solution.csv", |w| sol.write_csv(w))?;
        }
        Command::Compare => {
            price(&ctx, &mut summary)?;
            let rows = compare(&ctx)?;
            checks.extend(route_checks(&rows));
            summary.compare = rows;
        }
        Command::Check => {
            price(&ctx, &mut summary)?;
            surface(&ctx, &mut out)?;
            if cfg.route == Route::Both {
                let rows = compare(&ctx)?;
                checks.extend(route_checks(&rows));
                summary.compare = rows;
            }
            let v = simulation(&ctx)?;
            checks.extend(simulation_checks(&ctx, &v.report));
            record_simulation(&ctx, &v, &mut summary, &mut out)?;
            if cfg.validation.tests.contains(&Test::Tradeoff) {
                let (report, check) = tradeoff(&ctx)?;
                summary.tradeoff = Some(report);
                checks.push(check);
            }
        }
    }

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let failure = (!failed.is_empty()).then(|| CliError::Failed(failed.join(", ")));
    if matches!(command, Command::Compare | Command::Check) {
        let mut log = String::new();
        for c in &checks {
            log.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        out.add("checks.log", log.into_bytes());
        summary.checks = checks;
    }
    out.json("summary.json", &summary)?;
    out.commit(&cfg.output_dir)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn price(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    if ctx.cfg.route != Route::Pde {
        summary.h0_fourier = Some(ctx.dec.h0());
        summary.quadrature = Some(ctx.dec.quadrature_report().clone());
    }
    if ctx.cfg.route != Route::Fourier {
        summary.pde = Some(pde_summary(&pde(ctx)?));
    }
    Ok(())
}

fn pde(ctx: &Context) -> Result<PdeSolution, CliError> {
    let spec = ctx.cfg.diffusion(&ctx.model)?;
    solve(&spec, ctx.cfg.payoff_fn(), &ctx.cfg.grid(&ctx.model)).map_err(CliError::from_core)
}

fn pde_summary(sol: &PdeSolution) -> PdeSummary {
    PdeSummary {
        h0: sol.price(),
        steps: sol.steps,
        dt: sol.dt,
        cfl: sol.cfl,
        nx: sol.xi.len(),
        ns: sol.eta.len(),
        warnings: sol.warnings.clone(),
    }
}

fn surface(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let (t, x, s) = ctx.cfg.surface_grids(&ctx.model);
    let surf = ctx.dec.hedge_surface(&t, &x, &s).map_err(CliError::from_core)?;
    out.csv("hedge_surface.csv", |w| surf.write_csv(w))
}

fn simulation(ctx: &Context) -> Result<Validation, CliError> {
    let v = &ctx.cfg.validation;
    let paths = LazyPaths::new(&ctx.model, v.n_paths, v.n_steps, v.seed).map_err(CliError::from_core)?;
    let mut suite = SuiteConfig::default();
    if v.tests.contains(&Test::Martingale) {
        suite.martingale = ctx.cfg.martingale_probes()?;
    }
    if v.tests.contains(&Test::Normalization) {
        suite.normalization = ctx.cfg.normalization_frequencies()?;
    }
    if v.tests.contains(&Test::Baselines) {
        suite.baselines = ctx.cfg.baselines();
    }
    validate(&paths, &ctx.dec, &suite).map_err(CliError::from_core)
}

fn record_simulation(ctx: &Context, v: &Validation, summary: &mut Summary, out: &mut Artifacts) -> Result<(), CliError> {
    summary.residual_mean = Some(v.report.residual_mean);
    summary.residual_variance = Some(v.report.residual_variance);
    out.json("sim_report.json", &v.report)?;
    if ctx.cfg.validation.residual_csv {
        out.csv("residuals.csv", |w| v.write_residuals_csv(w))?;
    }
    Ok(())
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn simulation_checks(ctx: &Context, r: &SimReport) -> Vec<Check> {
    let tol = &ctx.cfg.tolerances;
    let tests = &ctx.cfg.validation.tests;
    let mut out = Vec::new();
    if tests.contains(&Test::Residual) {
        let limit = tol.mean_stderrs * r.residual_mean_stderr;
        out.push(check(
            "residual_mean",
            r.residual_mean.abs() <= limit,
            format!("mean {:.6e}, limit {:.6e}", r.residual_mean, limit),
        ));
    }
    if tests.contains(&Test::Replication) && ctx.dec.residual_process_spec().replicable {
        let limit = tol.trivial_residual_rel * ctx.model.s0().max(ctx.dec.h0().abs()).max(1.0);
        out.push(check(
            "replication",
            r.max_abs_residual <= limit,
            format!("max |O_T| {:.3e}, limit {:.3e}", r.max_abs_residual, limit),
        ));
    }
    if tests.contains(&Test::Orthogonality) {
        out.push(check(
            "orthogonality",
            r.orthogonality_corr.abs() < tol.orthogonality_corr,
            format!("corr {:.5} ± {:.5}, limit {}", r.orthogonality_corr, r.orthogonality_stderr, tol.orthogonality_corr),
        ));
    }
    for m in &r.martingale_tests {
        let (a, b) = m.z.re();
        out.push(check(
            format!("martingale ({a}, {b})"),
            m.max_abs_t() < tol.martingale_t,
            format!("max |t| {:.3}, limit {}", m.max_abs_t(), tol.martingale_t),
        ));
    }
    for n in &r.normalization {
        let (a, b) = n.z.re();
        out.push(check(
            format!("normalization ({a}, {b})"),
            n.max_abs_t() < tol.mean_stderrs,
            format!("mean {:.6} ± {:.6}, max |t| {:.3}", n.mean[0], n.stderr[0], n.max_abs_t()),
        ));
    }
    for b in &r.baselines {
        let pooled = (r.residual_variance_stderr.powi(2) + b.variance_stderr.powi(2)).sqrt();
        let passed = r.residual_variance <= b.variance - tol.baseline_stderrs * pooled;
        out.push(check(
            format!("baseline {:?}", b.baseline),
            passed,
            format!(
                "F-S {:.6} ± {:.6} vs {:.6} ± {:.6}",
                r.residual_variance, r.residual_variance_stderr, b.variance, b.variance_stderr
            ),
        ));
    }
    out
}

fn tradeoff(ctx: &Context) -> Result<(TradeoffReport, Check), CliError> {
    let v = &ctx.cfg.validation;
    let paths = LazyPaths::new(&ctx.model, v.n_paths, v.n_steps, v.seed).map_err(CliError::from_core)?;
    let report = tradeoff_check(&paths, &ctx.model).map_err(CliError::from_core)?;
    let limit = match ctx.model.kind() {
        fshedge::model::ModelKind::BlackScholes => ctx.cfg.tolerances.tradeoff_bs_rel,
        fshedge::model::ModelKind::Merton => ctx.cfg.tolerances.tradeoff_merton_rel,
    };
    let c = check(
        "tradeoff",
        report.relative_gap <= limit,
        format!(
            "analytic {:.6}, empirical {:.6} ± {:.6}, gap {:.4}, limit {limit}",
            report.analytic, report.empirical, report.stderr, report.relative_gap
        ),
    );
    Ok((report, c))
}

fn compare(ctx: &Context) -> Result<Vec<CompareRow>, CliError> {
    let cfg = ctx.cfg;
    let spec = cfg.diffusion(&ctx.model)?;
    let g = cfg.payoff_fn();
    let sol = solve(&spec, g.clone(), &cfg.grid(&ctx.model)).map_err(CliError::from_core)?;
    let tol = &cfg.tolerances;
    let horizon = ctx.model.horizon();
    let mut rows = Vec::new();
    for (i, [x, s]) in cfg.compare_points(&ctx.model).into_iter().enumerate() {
        let p = ctx.dec.point(0.0, x, s).map_err(CliError::from_core)?;
        let y_pde = sol
            .value_at(0, x, s)
            .ok_or_else(|| CliError::Config(format!("`compare.points[{i}]` lies outside the PDE grid")))?;
        let z_pde = sol.hedge_at(0, x, s).unwrap_or(f64::NAN);
        let seed = cfg.validation.seed.wrapping_add(i as u64);
        let mc = monte_carlo_representation(&spec, 0.0, x, s, horizon, g.clone(), cfg.compare.mc_paths, seed)
            .map_err(CliError::from_core)?;
        let yf = p.y.re;
        let allowed = tol.route_compare_rel * yf.abs();
        let gaps = [(yf - y_pde).abs(), (yf - mc.mean).abs(), (y_pde - mc.mean).abs()];
        let price_ok = gaps[0] <= allowed
            && gaps[1] <= allowed.max(tol.route_stderrs * mc.stderr)
            && gaps[2] <= allowed.max(tol.route_stderrs * mc.stderr);
        let hedge_ok = (z_pde - p.z.re).abs() <= tol.route_hedge_rel * p.z.re.abs() + 1e-8;
        rows.push(CompareRow {
            x,
            s,
            y_fourier: yf,
            y_pde,
            y_mc: mc.mean,
            mc_stderr: mc.stderr,
            z_fourier: p.z.re,
            z_pde,
            max_gap: gaps.iter().fold(0.0, |m, g| m.max(*g)),
            passed: price_ok && hedge_ok,
        });
    }
    Ok(rows)
}

fn route_checks(rows: &[CompareRow]) -> Vec<Check> {
    rows.iter()
        .map(|r| {
            check(
                format!("routes at ({:.4}, {:.4})", r.x, r.s),
                r.passed,
                format!(
                    "fourier {:.6}, pde {:.6}, mc {:.6} ± {:.6}; z fourier {:.6}, pde {:.6}",
                    r.y_fourier, r.y_pde, r.y_mc, r.mc_stderr, r.z_fourier, r.z_pde
                ),
            )
        })
        .collect()
}
