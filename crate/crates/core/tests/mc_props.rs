mod common;

use common::*;
use fshedge::engine::decompose;
use fshedge::mc::{
    baseline_comparison, hedge_run, martingale_test, normalization_test, simulate, validate, Baseline, LambdaChoice,
    LazyPaths, SuiteConfig,
};
use fshedge::tolerances as tol;
use fshedge::{power_claim, AdditiveModel, ComplexPair, LevyParams};
use num_complex::Complex64;

fn pair(a: f64, b: f64) -> ComplexPair {
    ComplexPair::real(a, b).unwrap()
}

fn s_claim() -> fshedge::PayoffMeasure {
    power_claim(ComplexPair::S, Complex64::new(1.0, 0.0))
}

fn correlated(rho: f64) -> AdditiveModel {
    AdditiveModel::levy(LevyParams::from_vols([0.02, 0.03], 0.3, 0.25, rho), 1.0, 100.0, 100.0).unwrap()
}

#[test]
fn ensembles_start_at_the_initial_state_and_stay_positive() {
    let e = simulate(&merton(), 200, 20, 3).unwrap();
    assert_eq!(e.times.len(), 21);
    for i in 0..200 {
        assert_eq!((e.x_path(i)[0], e.s_path(i)[0]), (100.0, 100.0));
        assert!(e.x_path(i).iter().chain(e.s_path(i)).all(|v| *v > 0.0 && v.is_finite()));
    }
}

#[test]
fn terminal_powers_are_normalised() {
    let zs = [pair(0.0, 1.0), pair(1.0, 0.0), pair(0.5, 0.5), pair(-0.5, 1.0), pair(1.0, 1.0)];
    for model in [merton(), basis_risk_model()] {
        let paths = LazyPaths::new(&model, 100_000, 4, 21).unwrap();
        for stat in normalization_test(&paths, &model, &zs).unwrap() {
            assert!(stat.max_abs_t() < tol::MEAN_STDERRS, "{stat:?}");
        }
    }
}

#[test]
fn compensated_powers_are_martingales() {
    let model = merton();
    let paths = LazyPaths::new(&model, 100_000, 50, 5).unwrap();
    for (z, lambda) in [
        (ComplexPair::S, LambdaChoice::Unit),
        (pair(0.5, 0.5), LambdaChoice::Unit),
        (pair(0.5, 0.5), LambdaChoice::FollmerSchweizer),
    ] {
        let stat = martingale_test(&paths, &model, z, lambda).unwrap();
        assert!(stat.max_abs_t() < tol::MARTINGALE_T, "{stat:?}");
    }
    let zero = martingale_test(&paths, &model, ComplexPair::ORIGIN, LambdaChoice::FollmerSchweizer).unwrap();
    assert_eq!(zero.max_abs_t(), 0.0);
}

#[test]
fn basis_risk_hedge_is_orthogonal_and_incomplete() {
    let model = basis_risk_model();
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let paths = LazyPaths::new(&model, tol::SUITE_PATHS, tol::SUITE_STEPS, 8).unwrap();
    let r = hedge_run(&paths, &dec).unwrap();
    assert!(r.residual_mean.abs() < tol::MEAN_STDERRS * r.residual_mean_stderr, "{r:?}");
    assert!(r.orthogonality_corr.abs() < tol::ORTHOGONALITY_CORR, "{r:?}");
    assert!(r.residual_variance > 0.0 && r.residual_variance_stderr > 0.0);
}

#[test]
fn stock_claim_is_replicated_and_unhedged_variance_is_var_s() {
    let model = merton();
    let dec = decompose(&model, &s_claim()).unwrap();
    let paths = LazyPaths::new(&model, 50_000, 20, 9).unwrap();
    let v = validate(
        &paths,
        &dec,
        &SuiteConfig {
            baselines: vec![Baseline::NoHedge],
            ..Default::default()
        },
    )
    .unwrap();
    assert!(v.report.max_abs_residual <= tol::TRIVIAL_RESIDUAL_REL * 100.0, "{:?}", v.report);
    let row = v.report.baselines[0];
    let t = model.horizon();
    let var_s = 1e4 * (model.kappa(t, pair(0.0, 2.0)).re.exp() - (2.0 * model.kappa(t, ComplexPair::S).re).exp());
    assert!(row.variance > 0.0);
    assert!((row.variance - var_s).abs() < tol::MEAN_STDERRS * row.variance_stderr, "{row:?} vs {var_s}");
}

#[test]
fn uncorrelated_hedge_is_no_worse_than_no_hedge() {
    let model = correlated(0.0);
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let paths = LazyPaths::new(&model, 20_000, 100, 4).unwrap();
    let rows = baseline_comparison(&paths, &dec, &[Baseline::NoHedge]).unwrap();
    let fs = hedge_run(&paths, &dec).unwrap();
    assert!(fs.residual_variance <= rows[0].variance, "{} vs {rows:?}", fs.residual_variance);
}

#[test]
fn perfect_correlation_approaches_replication() {
    let model = correlated(1.0);
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let var = |steps| {
        hedge_run(&LazyPaths::new(&model, 20_000, steps, 6).unwrap(), &dec)
            .unwrap()
            .residual_variance
    };
    let (coarse, fine) = (var(25), var(400));
    let unhedged = baseline_comparison(&LazyPaths::new(&model, 20_000, 25, 6).unwrap(), &dec, &[Baseline::NoHedge])
        .unwrap()[0]
        .variance;
    assert!(fine < coarse / 4.0, "{coarse} -> {fine}");
    assert!(fine < 0.01 * unhedged, "{fine} vs {unhedged}");
}

#[test]
fn finer_rebalancing_does_not_increase_variance() {
    let model = basis_risk_model();
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let run = |steps| hedge_run(&LazyPaths::new(&model, 20_000, steps, 13).unwrap(), &dec).unwrap();
    let (a, b) = (run(50), run(100));
    let pooled = (a.residual_variance_stderr.powi(2) + b.residual_variance_stderr.powi(2)).sqrt();
    assert!(
        b.residual_variance <= a.residual_variance + tol::BASELINE_STDERRS * pooled,
        "{} -> {}",
        a.residual_variance,
        b.residual_variance
    );
}

#[test]
fn reports_are_bitwise_reproducible_across_thread_counts() {
    let model = merton();
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let config = SuiteConfig {
        martingale: vec![(pair(0.5, 0.5), LambdaChoice::FollmerSchweizer)],
        normalization: vec![ComplexPair::S],
        baselines: vec![Baseline::NoHedge, Baseline::NaiveDelta],
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let paths = LazyPaths::new(&model, 5_000, 30, 99).unwrap();
            serde_json::to_string(&validate(&paths, &dec, &config).unwrap().report).unwrap()
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(4));
}

#[test]
fn residual_csv_has_one_row_per_path() {
    let model = basis_risk_model();
    let dec = decompose(&model, &call_on_x(100.0)).unwrap();
    let v = validate(&LazyPaths::new(&model, 300, 10, 1).unwrap(), &dec, &SuiteConfig::default()).unwrap();
    let mut buf = Vec::new();
    v.write_residuals_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(text.lines().next(), Some("path,residual"));
}
