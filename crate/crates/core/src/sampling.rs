//! Seeded random streams and the Gaussian samplers built on them.
//!
//! Frozen generator choices: ChaCha8 keyed by `(master_seed, stream_id)`,
//! ziggurat normals (`rand_distr::StandardNormal`), Poisson counts by
//! inversion below intensity 30 and `rand_distr::Poisson` above.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson, StandardNormal};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Region, Simplex};
use crate::linalg::{dot, norm};
use crate::stats::{Estimate, SummaryStats};

/// Proposal budget of [`gaussian_restricted`].
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Deterministic generator identified by `(master_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RandomStream {
            master_seed,
            stream_id,
            rng,
        }
    }

    /// Stream of replication `rep` at grid index `grid`: id `grid * 2^32 + rep`.
    pub fn for_replication(master_seed: u64, grid: u64, rep: u64) -> Self {
        Self::new(master_seed, (grid << 32) + rep)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Point-count law of a cloud: `n` points, or a Poisson number with mean `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Model {
    #[default]
    Binomial,
    Poisson,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Binomial => "binomial",
            Model::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "binomial" => Ok(Model::Binomial),
            "poisson" => Ok(Model::Poisson),
            other => Err(Error::Parse(format!(
                "unknown model '{other}' (expected binomial or poisson)"
            ))),
        }
    }
}

/// `(2 pi)^{-d/2} exp(-|x|^2 / 2)`
pub fn gaussian_density(x: &[f64]) -> f64 {
    (2.0 * PI).powf(-(x.len() as f64) / 2.0) * (-dot(x, x) / 2.0).exp()
}

fn fill_normals<R: Rng + ?Sized>(buf: &mut [f64], rng: &mut R) {
    for x in buf {
        *x = StandardNormal.sample(rng);
    }
}

pub fn gaussian_cloud<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> PointCloud {
    let mut coords = vec![0.0; n * d];
    fill_normals(&mut coords, rng);
    PointCloud::from_flat(d, coords).expect("positive dimension")
}

pub fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    if lambda < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k
    } else {
        Poisson::new(lambda)
            .expect("finite positive intensity")
            .sample(rng) as u64
    }
}

/// Poisson process with intensity measure `lambda * gamma_d`.
pub fn poisson_gaussian_cloud<R: Rng + ?Sized>(lambda: f64, d: usize, rng: &mut R) -> PointCloud {
    let n = poisson_count(lambda, rng) as usize;
    gaussian_cloud(n, d, rng)
}

/// `n` points (binomial model) or a Poisson number with mean `n`.
pub fn model_cloud<R: Rng + ?Sized>(model: Model, n: u64, d: usize, rng: &mut R) -> PointCloud {
    match model {
        Model::Binomial => gaussian_cloud(n as usize, d, rng),
        Model::Poisson => poisson_gaussian_cloud(n as f64, d, rng),
    }
}

pub fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; d];
    loop {
        fill_normals(&mut v, rng);
        let len = norm(&v);
        if len > 1e-12 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

/// `P(|X| >= rho)` for a standard Gaussian `X` in `R^d`.
pub fn gaussian_tail_probability(d: usize, rho: f64) -> f64 {
    if rho <= 0.0 {
        1.0
    } else {
        gamma_ur(d as f64 / 2.0, rho * rho / 2.0)
    }
}

/// `|X|^2 / 2` conditioned on `|X| >= rho`, i.e. a Gamma(d/2) variable
/// truncated to `[rho^2/2, inf)`.
fn truncated_half_chi2<R: Rng + ?Sized>(d: usize, rho: f64, rng: &mut R) -> f64 {
    let k = d as f64 / 2.0;
    let t0 = rho * rho / 2.0;
    if k > 1.0 && t0 <= 2.0 * (k - 1.0) {
        // Not deep in the tail: plain rejection keeps a good acceptance rate.
        loop {
            let mut s = 0.0;
            for _ in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                s += z * z;
            }
            if s >= rho * rho {
                return s / 2.0;
            }
        }
    }
    // Shifted exponential proposal with rate `rate`; the density ratio is
    // maximal at the truncation point.
    let rate = if k > 1.0 { 1.0 - (k - 1.0) / t0 } else { 1.0 };
    loop {
        let e: f64 = Exp1.sample(rng);
        let s = t0 + e / rate;
        if k == 1.0 {
            return s;
        }
        let log_ratio = (k - 1.0) * (s / t0).ln() - (1.0 - rate) * (s - t0);
        let u: f64 = rng.random();
        if u.ln() <= log_ratio {
            return s;
        }
    }
}

/// The points with `|x| >= rho` of a Gaussian cloud of the given model.
///
/// Equal in law to filtering a full cloud, without generating the inner points:
/// the count is Binomial(n, q) or Poisson(n q) with `q = P(|X| >= rho)`, and
/// each kept point has a truncated chi radius and a uniform direction.
pub fn gaussian_tail_cloud<R: Rng + ?Sized>(
    model: Model,
    n: u64,
    d: usize,
    rho: f64,
    rng: &mut R,
) -> PointCloud {
    let q = gaussian_tail_probability(d, rho);
    let count = match model {
        Model::Binomial => {
            if q >= 1.0 {
                n
            } else {
                Binomial::new(n, q).expect("probability in [0, 1]").sample(rng)
            }
        }
        Model::Poisson => poisson_count(n as f64 * q, rng),
    } as usize;
    let mut coords = vec![0.0; count * d];
    for p in coords.chunks_exact_mut(d) {
        fill_tail_point(p, rho, rng);
    }
    PointCloud::from_flat(d, coords).expect("positive dimension")
}

fn fill_tail_point<R: Rng + ?Sized>(p: &mut [f64], rho: f64, rng: &mut R) {
    let radius = (2.0 * truncated_half_chi2(p.len(), rho, rng)).sqrt();
    loop {
        fill_normals(p, rng);
        let len = norm(p);
        if len > 1e-12 {
            let c = radius / len;
            p.iter_mut().for_each(|x| *x *= c);
            return;
        }
    }
}

/// A draw from `gamma_d` conditioned on `|x| >= rho`.
pub fn gaussian_tail_point<R: Rng + ?Sized>(d: usize, rho: f64, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; d];
    fill_tail_point(&mut p, rho, rng);
    p
}

/// Fraction of `samples` Gaussian points satisfying `region`.
pub fn estimate_gaussian_measure<F, R>(region: F, d: usize, samples: u64, rng: &mut R) -> Estimate
where
    F: Fn(&[f64]) -> bool,
    R: Rng + ?Sized,
{
    let mut x = vec![0.0; d];
    let mut hits = 0u64;
    for _ in 0..samples {
        fill_normals(&mut x, rng);
        if region(&x) {
            hits += 1;
        }
    }
    Estimate::proportion(hits, samples)
}

/// Uniform point of a simplex (normalized exponential weights).
pub fn sample_uniform_simplex<R: Rng + ?Sized>(simplex: &Simplex, rng: &mut R) -> Vec<f64> {
    let d = simplex.dim();
    let w: Vec<f64> = (0..=d).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    let mut x = vec![0.0; d];
    for (v, wk) in simplex.vertices().iter().zip(&w) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += wk / total * vi;
        }
    }
    x
}

/// Importance-sampled `gamma_d(simplex ∩ region)`: uniform points in the
/// simplex, `vol * mean(phi_d * 1_region)`.
pub fn simplex_gaussian_measure<R: Rng + ?Sized>(
    simplex: &Simplex,
    region: Option<&dyn Region>,
    samples: u64,
    rng: &mut R,
) -> Estimate {
    let vol = simplex.volume();
    let mut acc = SummaryStats::new();
    for _ in 0..samples {
        let x = sample_uniform_simplex(simplex, rng);
        let inside = region.is_none_or(|r| r.contains(&x));
        acc.accumulate(if inside { gaussian_density(&x) } else { 0.0 });
    }
    Estimate::from_stats(&acc).scaled(vol)
}

/// Lower bound of `|x|` over the simplex via the centroid direction.
fn min_norm_bound(simplex: &Simplex) -> f64 {
    let c = simplex.centroid();
    let len = norm(&c);
    if len == 0.0 {
        return 0.0;
    }
    simplex
        .vertices()
        .iter()
        .map(|v| dot(v, &c) / len)
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// A draw from `gamma_d` conditioned on the simplex: uniform proposals accepted
/// with probability `phi_d(x) / sup phi_d`.
pub fn gaussian_restricted<R: Rng + ?Sized>(simplex: &Simplex, rng: &mut R) -> Result<Vec<f64>> {
    let m = min_norm_bound(simplex);
    for _ in 0..REJECTION_BUDGET {
        let x = sample_uniform_simplex(simplex, rng);
        let u: f64 = rng.random();
        if u.ln() <= -(dot(&x, &x) - m * m) / 2.0 {
            return Ok(x);
        }
    }
    Err(Error::RejectionBudgetExceeded(REJECTION_BUDGET))
}
