//! Running moments with order-stable merging, and per-path RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Paths per reduction block; fixes the summation order independently of threads.
pub const BLOCK: usize = 1024;

/// Generator for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Count, mean and centred second moment (Welford, Chan merge).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Sums for a correlation between paired samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoMoments {
    pub count: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub m2_a: f64,
    pub m2_b: f64,
    pub cross: f64,
}

impl CoMoments {
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        let n = self.count as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.cross += da * (b - self.mean_b);
    }

    pub fn merge(&mut self, o: &CoMoments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let (n1, n2) = (self.count as f64, o.count as f64);
        let n = n1 + n2;
        let da = o.mean_a - self.mean_a;
        let db = o.mean_b - self.mean_b;
        self.mean_a += da * n2 / n;
        self.mean_b += db * n2 / n;
        self.m2_a += o.m2_a + da * da * n1 * n2 / n;
        self.m2_b += o.m2_b + db * db * n1 * n2 / n;
        self.cross += o.cross + da * db * n1 * n2 / n;
        self.count += o.count;
    }

    pub fn correlation(&self) -> f64 {
        let d = (self.m2_a * self.m2_b).sqrt();
        if d > 0.0 {
            self.cross / d
        } else {
            0.0
        }
    }

    /// Large-sample standard error (1 - r²)/√(n - 2).
    pub fn correlation_stderr(&self) -> f64 {
        let r = self.correlation();
        if self.count < 3 {
            return f64::INFINITY;
        }
        (1.0 - r * r) / ((self.count - 2) as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..300].iter().for_each(|x| a.push(*x));
        xs[300..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-13);
        assert!((a.variance() - all.variance()).abs() < 1e-11);
    }

    #[test]
    fn constant_samples_have_zero_spread() {
        let mut a = Moments::default();
        let mut b = Moments::default();
        (0..10).for_each(|_| a.push(0.7));
        (0..5).for_each(|_| b.push(0.7));
        a.merge(&b);
        assert_eq!(a.stderr(), 0.0);
    }

    #[test]
    fn correlation_of_linear_pairs() {
        let mut c = CoMoments::default();
        for i in 0..100 {
            c.push(i as f64, -2.0 * i as f64 + 1.0);
        }
        assert!((c.correlation() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        use rand::Rng;
        let a: u64 = path_rng(7, 3).random();
        let b: u64 = path_rng(7, 3).random();
        let c: u64 = path_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
