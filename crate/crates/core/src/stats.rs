//! Running moments and the normal-approximation helpers used by the
//! statistical tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Mergeable running mean/variance (Chan et al. parallel update of Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.mean = mean;
        self.n = n;
    }

    /// Unbiased sample variance (0 for fewer than two observations).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Two-sided standard normal quantile `z_{1-alpha/2}`.
pub fn two_sided_z(alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - alpha / 2.0)
}

/// Normal-approximation confidence interval for a mean.
pub fn mean_ci(m: &Moments, alpha: f64) -> (f64, f64) {
    let h = two_sided_z(alpha) * m.std_error();
    (m.mean - h, m.mean + h)
}

/// `|successes/n − p| ≤ sigmas · sqrt(p(1−p)/n)`.
pub fn within_binomial_sigmas(successes: u64, n: u64, p: f64, sigmas: f64) -> bool {
    let freq = successes as f64 / n as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (freq - p).abs() <= sigmas * sd + 1e-12
}
