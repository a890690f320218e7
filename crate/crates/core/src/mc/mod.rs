//! Simulation of (X, S), discrete hedging backtests and statistical checks
//! of the martingale and orthogonality properties.

mod paths;

pub use paths::{simulate, LazyPaths, PathEnsemble, PathSource};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{decompose, FsDecomposition, HedgeTable};
use crate::error::{Error, Result};
use crate::model::AdditiveModel;
use crate::payoff::ComplexPair;
use crate::stats::{CoMoments, Moments, BLOCK};

/// Which λ enters M^λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaChoice {
    /// λ ≡ 1: the compensated power X^{z₁}S^{z₂}.
    Unit,
    /// λ(t, z) = exp(η(z, T) − η(z, t)).
    FollmerSchweizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStat {
    pub z: ComplexPair,
    pub lambda: LambdaChoice,
    /// t-statistics of the mean of Σ ΔM (real, imaginary).
    pub mean_t: [f64; 2],
    /// t-statistics of Σ ΔM·(ln S_{t_i} − E ln S_{t_i}) (real, imaginary).
    pub covariance_t: [f64; 2],
}

impl MartingaleStat {
    pub fn max_abs_t(&self) -> f64 {
        self.mean_t
            .iter()
            .chain(&self.covariance_t)
            .fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// E[X_T^{z₁} S_T^{z₂} e^{−κ_T(z)}] / (X₀^{z₁} S₀^{z₂}), which should be 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStat {
    pub z: ComplexPair,
    pub mean: [f64; 2],
    pub stderr: [f64; 2],
}

impl NormalizationStat {
    /// Largest |t| of (mean − 1) and of the imaginary mean.
    pub fn max_abs_t(&self) -> f64 {
        t_stat(self.mean[0] - 1.0, self.stderr[0])
            .abs()
            .max(t_stat(self.mean[1], self.stderr[1]).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    /// z ≡ 0.
    NoHedge,
    /// Delta of the claim re-read on S, applied at (t, S_t, S_t).
    NaiveDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub baseline: Baseline,
    pub variance: f64,
    pub variance_stderr: f64,
    /// F-S variance ≤ baseline variance − 2·√(se_FS² + se_baseline²).
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub model_digest: String,
    pub measure_digest: String,
    pub h0: f64,
    pub residual_mean: f64,
    pub residual_mean_stderr: f64,
    pub residual_variance: f64,
    pub residual_variance_stderr: f64,
    pub max_abs_residual: f64,
    /// Pooled sample correlation of ΔO with ΔS − S(e^{Δκ(0,1)} − 1).
    pub orthogonality_corr: f64,
    pub orthogonality_stderr: f64,
    pub martingale_tests: Vec<MartingaleStat>,
    pub normalization: Vec<NormalizationStat>,
    pub baselines: Vec<BaselineRow>,
}

/// What a single pass over the paths computes besides the hedge residual.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteConfig {
    pub martingale: Vec<(ComplexPair, LambdaChoice)>,
    pub normalization: Vec<ComplexPair>,
    pub baselines: Vec<Baseline>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub report: SimReport,
    /// O_T per path, in path order.
    pub residuals: Vec<f64>,
}

impl Validation {
    pub fn write_residuals_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,residual")?;
        for (i, r) in self.residuals.iter().enumerate() {
            writeln!(w, "{i},{r}")?;
        }
        Ok(())
    }
}

fn t_stat(mean: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        mean / stderr
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(mean)
    }
}

// Per-step constants of one M^λ test.
struct Probe {
    z: ComplexPair,
    choice: LambdaChoice,
    lambda: Vec<Complex64>,
    dkappa: Vec<Complex64>,
}

impl Probe {
    fn new(model: &AdditiveModel, times: &[f64], z: ComplexPair, choice: LambdaChoice) -> Self {
        let lambda = times
            .iter()
            .map(|&t| match choice {
                LambdaChoice::Unit => Complex64::new(1.0, 0.0),
                LambdaChoice::FollmerSchweizer => model.lambda(t, z),
            })
            .collect();
        let dkappa = times.windows(2).map(|w| model.kappa_between(w[0], w[1], z)).collect();
        Probe {
            z,
            choice,
            lambda,
            dkappa,
        }
    }

    // (Σ ΔM, Σ ΔM·(ln S − E ln S)) with the left-point compensator.
    fn run(&self, lx: &[f64], ls: &[f64], centre: &[f64]) -> (Complex64, Complex64) {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut cov = Complex64::new(0.0, 0.0);
        let mut h = self.z.monomial_log(lx[0], ls[0]);
        for i in 0..self.dkappa.len() {
            let h1 = self.z.monomial_log(lx[i + 1], ls[i + 1]);
            let dm = self.lambda[i + 1] * (h1 - h) - h * self.lambda[i] * self.dkappa[i];
            sum += dm;
            cov += dm * (ls[i] - centre[i]);
            h = h1;
        }
        (sum, cov)
    }
}

struct Hedging<'a> {
    dec: &'a FsDecomposition,
    table: HedgeTable<'a>,
    naive: Option<(&'a FsDecomposition, HedgeTable<'a>)>,
    no_hedge: bool,
    exact_payoff: bool,
    growth: Vec<f64>,
}

#[derive(Default)]
struct Block {
    residuals: Vec<f64>,
    ortho: CoMoments,
    baselines: Vec<Vec<f64>>,
    martingale: Vec<[Moments; 4]>,
    normalization: Vec<[Moments; 2]>,
}

impl Block {
    fn merge(&mut self, o: Block) {
        self.residuals.extend(o.residuals);
        self.ortho.merge(&o.ortho);
        if self.baselines.is_empty() {
            self.baselines = o.baselines;
        } else {
            for (a, b) in self.baselines.iter_mut().zip(o.baselines) {
                a.extend(b);
            }
        }
        if self.martingale.is_empty() {
            self.martingale = o.martingale;
            self.normalization = o.normalization;
            return;
        }
        for (a, b) in self.martingale.iter_mut().zip(&o.martingale) {
            for k in 0..4 {
                a[k].merge(&b[k]);
            }
        }
        for (a, b) in self.normalization.iter_mut().zip(&o.normalization) {
            for k in 0..2 {
                a[k].merge(&b[k]);
            }
        }
    }
}

fn payoff(dec: &FsDecomposition, exact: bool, x: f64, s: f64) -> Result<f64> {
    let m = dec.measure();
    match exact.then(|| m.exact_value(x, s)).flatten() {
        Some(v) => Ok(v.re),
        None => Ok(m.evaluate(x, s)?.re),
    }
}

fn check_digest(source: &dyn PathSource, model: &AdditiveModel) -> Result<()> {
    let d = model.digest();
    if source.model_digest() != d {
        return Err(Error::ModelMismatch {
            ensemble: source.model_digest().to_string(),
            decomposition: d,
        });
    }
    Ok(())
}

fn variance_stderr(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mut m = Moments::default();
    xs.iter().for_each(|x| m.push(*x));
    let var = m.variance();
    let m4 = xs.iter().map(|x| (x - m.mean).powi(4)).sum::<f64>() / n;
    let se_var = if xs.len() > 3 {
        ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    } else {
        0.0
    };
    (m.mean, m.stderr(), var, se_var)
}

fn pass(
    source: &dyn PathSource,
    model: &AdditiveModel,
    hedging: Option<&Hedging>,
    probes: &[Probe],
    normalization: &[(ComplexPair, Complex64)],
) -> Result<Block> {
    let times = source.times();
    let n_steps = source.n_steps();
    let centre: Vec<f64> = times
        .iter()
        .map(|&t| model.s0().ln() + model.log_mean(0.0, t, 1))
        .collect();
    let n_blocks = source.n_paths().div_ceil(BLOCK);
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<Block> {
            let mut lx = vec![0.0; n_steps + 1];
            let mut ls = vec![0.0; n_steps + 1];
            let mut out = Block {
                martingale: vec![Default::default(); probes.len()],
                normalization: vec![Default::default(); normalization.len()],
                baselines: hedging.map_or(Vec::new(), |h| {
                    vec![Vec::new(); usize::from(h.no_hedge) + usize::from(h.naive.is_some())]
                }),
                ..Default::default()
            };
            for i in b * BLOCK..((b + 1) * BLOCK).min(source.n_paths()) {
                source.fill(i, &mut lx, &mut ls);
                for (p, acc) in probes.iter().zip(out.martingale.iter_mut()) {
                    let (sum, cov) = p.run(&lx, &ls, &centre);
                    acc[0].push(sum.re);
                    acc[1].push(sum.im);
                    acc[2].push(cov.re);
                    acc[3].push(cov.im);
                }
                for ((z, scale), acc) in normalization.iter().zip(out.normalization.iter_mut()) {
                    let v = z.monomial_log(lx[n_steps], ls[n_steps]) * scale;
                    acc[0].push(v.re);
                    acc[1].push(v.im);
                }
                let Some(h) = hedging else { continue };
                let (xt, st) = (lx[n_steps].exp(), ls[n_steps].exp());
                let g = payoff(h.dec, h.exact_payoff, xt, st)?;
                let mut gains = 0.0;
                let mut naive_gains = 0.0;
                let mut s = ls[0].exp();
                let (mut y, mut z) = h.table.lookup(0, lx[0].exp(), s)?;
                for k in 0..n_steps {
                    let s1 = ls[k + 1].exp();
                    let ds = s1 - s;
                    gains += z.re * ds;
                    if let Some((_, naive)) = &h.naive {
                        naive_gains += naive.lookup(k, s, s)?.1.re * ds;
                    }
                    let (y1, z1) = if k + 1 < n_steps {
                        h.table.lookup(k + 1, lx[k + 1].exp(), s1)?
                    } else {
                        (Complex64::new(g, 0.0), Complex64::new(0.0, 0.0))
                    };
                    let d_o = y1.re - y.re - z.re * ds;
                    out.ortho.push(d_o, s1 - s * h.growth[k]);
                    y = y1;
                    z = z1;
                    s = s1;
                }
                out.residuals.push(g - h.dec.h0() - gains);
                let mut k = 0;
                if h.no_hedge {
                    out.baselines[k].push(g);
                    k += 1;
                }
                if h.naive.is_some() {
                    out.baselines[k].push(g - naive_gains);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Block::default();
    for b in blocks {
        total.merge(b);
    }
    Ok(total)
}

fn probe_stats(probes: &[Probe], acc: &[[Moments; 4]]) -> Vec<MartingaleStat> {
    probes
        .iter()
        .zip(acc)
        .map(|(p, m)| MartingaleStat {
            z: p.z,
            lambda: p.choice,
            mean_t: [t_stat(m[0].mean, m[0].stderr()), t_stat(m[1].mean, m[1].stderr())],
            covariance_t: [t_stat(m[2].mean, m[2].stderr()), t_stat(m[3].mean, m[3].stderr())],
        })
        .collect()
}

fn normalization_inputs(model: &AdditiveModel, zs: &[ComplexPair]) -> Vec<(ComplexPair, Complex64)> {
    let t = model.horizon();
    zs.iter()
        .map(|z| {
            let scale = (-model.kappa(t, *z)).exp() / z.monomial(model.x0(), model.s0());
            (*z, scale)
        })
        .collect()
}

fn normalization_stats(inputs: &[(ComplexPair, Complex64)], acc: &[[Moments; 2]]) -> Vec<NormalizationStat> {
    inputs
        .iter()
        .zip(acc)
        .map(|((z, _), m)| NormalizationStat {
            z: *z,
            mean: [m[0].mean, m[1].mean],
            stderr: [m[0].stderr(), m[1].stderr()],
        })
        .collect()
}

/// t-statistics of the discrete M^λ(z) increments and of their covariance
/// with the centred log-price.
pub fn martingale_test(
    source: &dyn PathSource,
    model: &AdditiveModel,
    z: ComplexPair,
    lambda: LambdaChoice,
) -> Result<MartingaleStat> {
    check_digest(source, model)?;
    let probes = [Probe::new(model, source.times(), z, lambda)];
    let acc = pass(source, model, None, &probes, &[])?;
    Ok(probe_stats(&probes, &acc.martingale)[0])
}

/// Normalised terminal powers; the means should be 1.
pub fn normalization_test(
    source: &dyn PathSource,
    model: &AdditiveModel,
    zs: &[ComplexPair],
) -> Result<Vec<NormalizationStat>> {
    check_digest(source, model)?;
    let inputs = normalization_inputs(model, zs);
    let acc = pass(source, model, None, &[], &inputs)?;
    Ok(normalization_stats(&inputs, &acc.normalization))
}

/// Hedge every path with z at the left end point of each step and collect
/// residual and orthogonality statistics, plus whatever `config` asks for,
/// in one pass.
pub fn validate(source: &dyn PathSource, dec: &FsDecomposition, config: &SuiteConfig) -> Result<Validation> {
    let model = dec.model();
    check_digest(source, model)?;
    let times = source.times();
    let n_steps = source.n_steps();
    let naive_dec = if config.baselines.contains(&Baseline::NaiveDelta) {
        Some(decompose(model, &dec.measure().swap_axes())?)
    } else {
        None
    };
    let table_times = &times[..n_steps];
    let hedging = Hedging {
        dec,
        table: dec.hedge_table(table_times)?,
        naive: match &naive_dec {
            Some(d) => Some((d, d.hedge_table(table_times)?)),
            None => None,
        },
        no_hedge: config.baselines.contains(&Baseline::NoHedge),
        exact_payoff: dec.measure().exact_value(model.x0(), model.s0()).is_some(),
        growth: times
            .windows(2)
            .map(|w| model.kappa_between(w[0], w[1], ComplexPair::S).re.exp())
            .collect(),
    };
    let probes: Vec<Probe> = config
        .martingale
        .iter()
        .map(|(z, c)| Probe::new(model, times, *z, *c))
        .collect();
    let norm = normalization_inputs(model, &config.normalization);
    let acc = pass(source, model, Some(&hedging), &probes, &norm)?;

    let (mean, mean_se, var, var_se) = variance_stderr(&acc.residuals);
    let mut baselines = Vec::new();
    let mut kinds = Vec::new();
    if hedging.no_hedge {
        kinds.push(Baseline::NoHedge);
    }
    if hedging.naive.is_some() {
        kinds.push(Baseline::NaiveDelta);
    }
    for (kind, res) in kinds.into_iter().zip(&acc.baselines) {
        let (_, _, v, se) = variance_stderr(res);
        baselines.push(BaselineRow {
            baseline: kind,
            variance: v,
            variance_stderr: se,
            dominated: var <= v - crate::tolerances::BASELINE_STDERRS * (var_se * var_se + se * se).sqrt(),
        });
    }
    let report = SimReport {
        seed: source.seed(),
        n_paths: source.n_paths(),
        n_steps,
        model_digest: model.digest(),
        measure_digest: dec.measure().digest(),
        h0: dec.h0(),
        residual_mean: mean,
        residual_mean_stderr: mean_se,
        residual_variance: var,
        residual_variance_stderr: var_se,
        max_abs_residual: acc.residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        orthogonality_corr: acc.ortho.correlation(),
        orthogonality_stderr: acc.ortho.correlation_stderr(),
        martingale_tests: probe_stats(&probes, &acc.martingale),
        normalization: normalization_stats(&norm, &acc.normalization),
        baselines,
    };
    Ok(Validation {
        report,
        residuals: acc.residuals,
    })
}

/// Residual and orthogonality statistics of the discrete F-S hedge.
pub fn hedge_run(source: &dyn PathSource, dec: &FsDecomposition) -> Result<SimReport> {
    Ok(validate(source, dec, &SuiteConfig::default())?.report)
}

/// Residual variances of the baselines on the same paths.
pub fn baseline_comparison(
    source: &dyn PathSource,
    dec: &FsDecomposition,
    baselines: &[Baseline],
) -> Result<Vec<BaselineRow>> {
    let config = SuiteConfig {
        baselines: baselines.to_vec(),
        ..Default::default()
    };
    Ok(validate(source, dec, &config)?.report.baselines)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub analytic: f64,
    pub empirical: f64,
    pub stderr: f64,
    /// |empirical − analytic| / analytic; 0 when both vanish.
    pub relative_gap: f64,
}

/// Realised Σ α_i² (ΔM^S_i)² against the analytic trade-off K_T.
pub fn tradeoff_check(source: &dyn PathSource, model: &AdditiveModel) -> Result<TradeoffReport> {
    check_digest(source, model)?;
    if source.n_steps() < 100 {
        return Err(Error::domain("trade-off check needs at least 100 steps"));
    }
    let times = source.times();
    let n_steps = source.n_steps();
    let analytic = *model.tradeoff(&[model.horizon()])?.values.last().unwrap_or(&0.0);
    // α_i S_i and one-step growth of E[S]
    let alpha: Vec<f64> = times
        .windows(2)
        .map(|w| {
            let dk = model.kappa_between(w[0], w[1], ComplexPair::S).re;
            dk / model.rho_s_between(w[0], w[1])
        })
        .collect();
    let growth: Vec<f64> = times
        .windows(2)
        .map(|w| model.kappa_between(w[0], w[1], ComplexPair::S).re.exp())
        .collect();
    let blocks = (0..source.n_paths().div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut lx = vec![0.0; n_steps + 1];
            let mut ls = vec![0.0; n_steps + 1];
            let mut m = Moments::default();
            for i in b * BLOCK..((b + 1) * BLOCK).min(source.n_paths()) {
                source.fill(i, &mut lx, &mut ls);
                let k: f64 = (0..n_steps)
                    .map(|j| {
                        let r = (ls[j + 1] - ls[j]).exp() - growth[j];
                        alpha[j] * alpha[j] * r * r
                    })
                    .sum();
                m.push(k);
            }
            m
        })
        .collect::<Vec<_>>();
    let mut total = Moments::default();
    blocks.iter().for_each(|b| total.merge(b));
    let relative_gap = if analytic > 0.0 {
        (total.mean - analytic).abs() / analytic
    } else if total.mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(TradeoffReport {
        analytic,
        empirical: total.mean,
        stderr: total.stderr(),
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyParams;
    use crate::payoff::{call_measure, power_claim};

    fn merton() -> AdditiveModel {
        let p = LevyParams::from_vols([0.03, 0.05], 0.25, 0.2, 0.6).with_jumps(
            0.8,
            [-0.05, -0.08],
            [[0.02, 0.01], [0.01, 0.03]],
        );
        AdditiveModel::levy(p, 1.0, 100.0, 100.0).unwrap()
    }

    #[test]
    fn deterministic_coordinate() {
        // Σ = 0 is not a valid model (ρ^S would vanish); only X is frozen.
        let p = LevyParams::brownian([0.05, -0.02], [[0.0, 0.0], [0.0, 0.04]]);
        let m = AdditiveModel::levy(p, 2.0, 1.0, 3.0).unwrap();
        let e = simulate(&m, 3, 4, 9).unwrap();
        for i in 0..3 {
            for (k, t) in e.times.iter().enumerate() {
                assert!((e.x_path(i)[k] - (0.05 * t).exp()).abs() < 1e-14);
            }
            assert_eq!(e.s_path(i)[0], 3.0);
        }
    }

    #[test]
    fn seeds_reproduce() {
        let a = simulate(&merton(), 50, 10, 3).unwrap();
        let b = simulate(&merton(), 50, 10, 3).unwrap();
        let c = simulate(&merton(), 50, 10, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.s_paths, c.s_paths);
        assert!(a.x_paths.iter().chain(&a.s_paths).all(|v| *v > 0.0));
    }

    #[test]
    fn zero_frequency_statistic_is_exactly_zero() {
        let m = merton();
        let src = LazyPaths::new(&m, 2000, 20, 1).unwrap();
        let st = martingale_test(&src, &m, ComplexPair::ORIGIN, LambdaChoice::FollmerSchweizer).unwrap();
        assert_eq!(st.max_abs_t(), 0.0);
    }

    #[test]
    fn replicable_claims_have_zero_residual() {
        let m = merton();
        let src = LazyPaths::new(&m, 2000, 25, 5).unwrap();
        let one = power_claim(ComplexPair::ORIGIN, Complex64::new(1.0, 0.0));
        let r = hedge_run(&src, &decompose(&m, &one).unwrap()).unwrap();
        assert_eq!(r.max_abs_residual, 0.0);
        let s = power_claim(ComplexPair::S, Complex64::new(1.0, 0.0));
        let r = hedge_run(&src, &decompose(&m, &s).unwrap()).unwrap();
        assert!(r.max_abs_residual < 1e-10 * 100.0, "{}", r.max_abs_residual);
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let m = merton();
        let src = LazyPaths::new(&m, 10, 5, 5).unwrap();
        let other = m.clone().with_initial(90.0, 100.0).unwrap();
        let dec = decompose(&other, &call_measure(100.0, 0.5).unwrap()).unwrap();
        assert!(matches!(hedge_run(&src, &dec), Err(Error::ModelMismatch { .. })));
    }

    #[test]
    fn driftless_tradeoff_vanishes() {
        let p = LevyParams::brownian([0.0, -0.02], [[0.04, 0.0], [0.0, 0.04]]);
        let m = AdditiveModel::levy(p, 1.0, 1.0, 1.0).unwrap();
        let r = tradeoff_check(&LazyPaths::new(&m, 100, 100, 1).unwrap(), &m).unwrap();
        assert_eq!(r.analytic, 0.0);
        assert_eq!(r.empirical, 0.0);
        assert_eq!(r.relative_gap, 0.0);
    }
}
