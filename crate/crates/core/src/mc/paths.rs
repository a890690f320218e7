use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AdditiveModel;
use crate::stats::path_rng;

/// Anything that can hand out log-price paths on a fixed time grid.
pub trait PathSource: Sync {
    fn n_paths(&self) -> usize;
    /// Rebalance grid t₀ = 0 < … < t_n = T.
    fn times(&self) -> &[f64];
    fn seed(&self) -> u64;
    fn model_digest(&self) -> &str;
    /// Write ln X and ln S of path `index` into the buffers (length n_steps + 1).
    fn fill(&self, index: usize, log_x: &mut [f64], log_s: &mut [f64]);

    fn n_steps(&self) -> usize {
        self.times().len() - 1
    }
}

#[derive(Debug, Clone, Copy)]
struct JumpLaw {
    count: Poisson<f64>,
    mean: [f64; 2],
    chol: [f64; 3],
}

#[derive(Debug, Clone)]
struct StepLaw {
    mean: [f64; 2],
    chol: [f64; 3],
    jumps: Vec<JumpLaw>,
}

fn cholesky(m: [[f64; 2]; 2]) -> [f64; 3] {
    let l11 = m[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { m[0][1] / l11 } else { 0.0 };
    let l22 = (m[1][1] - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

fn correlated(rng: &mut ChaCha8Rng, chol: &[f64; 3], scale: f64) -> [f64; 2] {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    [scale * chol[0] * a, scale * (chol[1] * a + chol[2] * b)]
}

/// Exact one-step laws of (ln X, ln S) increments on a grid.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    origin: [f64; 2],
    steps: Vec<StepLaw>,
}

impl Stepper {
    pub(crate) fn new(model: &AdditiveModel, times: &[f64]) -> Result<Self> {
        let mut steps = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mut mean = [0.0; 2];
            let mut cov = [[0.0; 2]; 2];
            let mut jumps = Vec::new();
            let n = model.segments().len();
            for (k, seg) in model.segments().iter().enumerate() {
                let end = if k + 1 == n { f64::INFINITY } else { seg.end };
                let len = t1.min(end) - t0.max(seg.start);
                if len <= 0.0 {
                    continue;
                }
                let p = &seg.params;
                for i in 0..2 {
                    mean[i] += p.drift[i] * len;
                    for j in 0..2 {
                        cov[i][j] += p.covariance[i][j] * len;
                    }
                }
                if p.has_jumps() {
                    let rate = p.jump_intensity * len;
                    let count = Poisson::new(rate)
                        .map_err(|e| Error::domain(format!("jump count law: {e}")))?;
                    jumps.push(JumpLaw {
                        count,
                        mean: p.jump_mean,
                        chol: cholesky(p.jump_covariance),
                    });
                }
            }
            steps.push(StepLaw {
                mean,
                chol: cholesky(cov),
                jumps,
            });
        }
        Ok(Stepper {
            origin: [model.x0().ln(), model.s0().ln()],
            steps,
        })
    }

    pub(crate) fn path(&self, rng: &mut ChaCha8Rng, log_x: &mut [f64], log_s: &mut [f64]) {
        log_x[0] = self.origin[0];
        log_s[0] = self.origin[1];
        for (i, law) in self.steps.iter().enumerate() {
            let g = correlated(rng, &law.chol, 1.0);
            let mut d = [law.mean[0] + g[0], law.mean[1] + g[1]];
            for j in &law.jumps {
                let n = j.count.sample(rng);
                if n > 0.0 {
                    let e = correlated(rng, &j.chol, n.sqrt());
                    d[0] += n * j.mean[0] + e[0];
                    d[1] += n * j.mean[1] + e[1];
                }
            }
            log_x[i + 1] = log_x[i] + d[0];
            log_s[i + 1] = log_s[i] + d[1];
        }
    }
}

fn uniform_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|i| if i == n_steps { horizon } else { horizon * i as f64 / n_steps as f64 })
        .collect()
}

/// Paths regenerated on demand from their RNG streams; O(1) memory.
#[derive(Debug, Clone)]
pub struct LazyPaths {
    stepper: Stepper,
    times: Vec<f64>,
    n_paths: usize,
    seed: u64,
    digest: String,
    start: [f64; 2],
}

impl LazyPaths {
    pub fn new(model: &AdditiveModel, n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 || n_steps == 0 {
            return Err(Error::domain("need at least one path and one step"));
        }
        let times = uniform_grid(model.horizon(), n_steps);
        Ok(LazyPaths {
            stepper: Stepper::new(model, &times)?,
            times,
            n_paths,
            seed,
            digest: model.digest(),
            start: [model.x0(), model.s0()],
        })
    }

    /// Copy every path into memory.
    pub fn materialize(&self) -> PathEnsemble {
        let m = self.times.len();
        let mut x_paths = vec![0.0; self.n_paths * m];
        let mut s_paths = vec![0.0; self.n_paths * m];
        use rayon::prelude::*;
        x_paths
            .par_chunks_mut(m)
            .zip(s_paths.par_chunks_mut(m))
            .enumerate()
            .for_each(|(i, (x, s))| {
                self.fill(i, x, s);
                x.iter_mut().for_each(|v| *v = v.exp());
                s.iter_mut().for_each(|v| *v = v.exp());
                x[0] = self.start[0];
                s[0] = self.start[1];
            });
        PathEnsemble {
            times: self.times.clone(),
            n_paths: self.n_paths,
            x_paths,
            s_paths,
            seed: self.seed,
            model_digest: self.digest.clone(),
        }
    }
}

impl PathSource for LazyPaths {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn model_digest(&self) -> &str {
        &self.digest
    }

    fn fill(&self, index: usize, log_x: &mut [f64], log_s: &mut [f64]) {
        let mut rng = path_rng(self.seed, index as u64);
        self.stepper.path(&mut rng, log_x, log_s);
    }
}

/// Simulated prices, row-major: path i occupies `[i·(n_steps+1), (i+1)·(n_steps+1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub x_paths: Vec<f64>,
    pub s_paths: Vec<f64>,
    pub seed: u64,
    pub model_digest: String,
}

impl PathEnsemble {
    pub fn x_path(&self, i: usize) -> &[f64] {
        let m = self.times.len();
        &self.x_paths[i * m..(i + 1) * m]
    }

    pub fn s_path(&self, i: usize) -> &[f64] {
        let m = self.times.len();
        &self.s_paths[i * m..(i + 1) * m]
    }
}

impl PathSource for PathEnsemble {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn model_digest(&self) -> &str {
        &self.model_digest
    }

    fn fill(&self, index: usize, log_x: &mut [f64], log_s: &mut [f64]) {
        for (o, v) in log_x.iter_mut().zip(self.x_path(index)) {
            *o = v.ln();
        }
        for (o, v) in log_s.iter_mut().zip(self.s_path(index)) {
            *o = v.ln();
        }
    }
}

/// Exact-in-law simulation of (X, S) on a uniform grid of `n_steps` steps.
pub fn simulate(model: &AdditiveModel, n_paths: usize, n_steps: usize, seed: u64) -> Result<PathEnsemble> {
    Ok(LazyPaths::new(model, n_paths, n_steps, seed)?.materialize())
}
