//! Online moments, Monte Carlo estimates, bootstrap intervals, log-log scaling
//! fits and distribution diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Number of resamples used by every bootstrap in the crate.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Mergeable single-pass moments (Welford update, Chan merge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for SummaryStats {
    fn default() -> Self {
        Self::new()
    }
}

impl SummaryStats {
    pub fn new() -> Self {
        SummaryStats {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.accumulate(x);
        }
        s
    }

    pub fn accumulate(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&self, other: &SummaryStats) -> SummaryStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        SummaryStats {
            count: self.count + other.count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Sum of squared deviations from the mean.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased variance; NaN with fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        self.std_dev() / (self.count as f64).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

/// A point estimate with its standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

impl Estimate {
    /// Binomial proportion `hits / n` with standard error `sqrt(p(1-p)/n)`.
    pub fn proportion(hits: u64, n: u64) -> Estimate {
        let p = if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_samples: n,
        }
    }

    pub fn from_stats(s: &SummaryStats) -> Estimate {
        Estimate {
            value: s.mean(),
            std_error: s.std_error(),
            n_samples: s.count(),
        }
    }

    pub fn scaled(self, c: f64) -> Estimate {
        Estimate {
            value: self.value * c,
            std_error: self.std_error * c.abs(),
            n_samples: self.n_samples,
        }
    }

    /// Normal-approximation interval `value ± z * std_error`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.std_error, self.value + z * self.std_error)
    }
}

/// Power law `y ≈ exp(intercept) * (log n)^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_ci: (f64, f64),
    pub n_points: usize,
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 1e-300) {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some((slope, my - slope * mx, r2))
}

/// Least squares of `ln y` on `ln ln n`, with a seeded percentile bootstrap
/// over the pairs for the slope.
pub fn scaling_fit(pairs: &[(f64, f64)], seed: u64) -> Result<ScalingFit> {
    if pairs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: pairs.len(),
        });
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(n, y) in pairs {
        if !(n >= 3.0) {
            return Err(Error::InvalidN(n.max(0.0) as u64));
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveValue(y));
        }
        xs.push(n.ln().ln());
        ys.push(y.ln());
    }
    let (slope, intercept, r_squared) = ols(&xs, &ys).ok_or(Error::DegenerateSample)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = xs.len();
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let (mut bx, mut by) = (vec![0.0; k], vec![0.0; k]);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for j in 0..k {
            let i = rng.random_range(0..k);
            bx[j] = xs[i];
            by[j] = ys[i];
        }
        // Resamples that repeat a single abscissa carry no slope information.
        if let Some((s, _, _)) = ols(&bx, &by) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let slope_ci = if slopes.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975))
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        slope_ci,
        n_points: k,
    })
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Percentile bootstrap interval of `statistic` at confidence `level`.
pub fn bootstrap_ci<F>(sample: &[f64], statistic: F, level: f64, seed: u64) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    if sample.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sample.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = sample[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .filter(|s| s.is_finite())
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    (quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha))
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    SummaryStats::from_slice(xs).variance()
}

/// Large-sample standard error of the unbiased variance,
/// `sqrt((mu4 - (n-3)/(n-1) sigma^4) / n)`.
pub fn variance_std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n).max(0.0).sqrt()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance between the standardized sample and `N(0,1)`.
pub fn normality_diagnostic(sample: &[f64]) -> Result<f64> {
    if sample.len() < 30 {
        return Err(Error::TooFewSamples {
            needed: 30,
            got: sample.len(),
        });
    }
    let s = SummaryStats::from_slice(sample);
    let sd = s.std_dev();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let mut z: Vec<f64> = sample.iter().map(|x| (x - s.mean()) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    Ok(z.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = std_normal_cdf(x);
        acc.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Fraction of the sample with `|x - mean| >= y * stdev`.
pub fn tail_frequency(sample: &[f64], y: f64) -> Result<Estimate> {
    if sample.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: sample.len(),
        });
    }
    let s = SummaryStats::from_slice(sample);
    let sd = s.std_dev();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let hits = sample
        .iter()
        .filter(|&&x| (x - s.mean()).abs() >= y * sd)
        .count();
    Ok(Estimate::proportion(hits as u64, sample.len() as u64))
}
