//! Experiment runner: configuration, replication scheduling and CSV rows for
//! each subcommand.
//!
//! Replication `r` at grid index `g` draws from stream `g * 2^32 + r`; shared
//! per-grid randomness (subspace samples, scaffolds, bootstrap seeds) uses the
//! top of the same stream block, counting down from `2^32 - 1`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;

use crate::construction::{
    self, check_cone_containment, conditional_local_variance, estimate_event_probability,
    event_indicator, event_probability_formula, local_variance_estimate,
    local_variance_with_points, paired_monotonicity, Scaffold,
};
use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::geom::{PointCloud, Region};
use crate::grassmann::{cap_measure_estimate, cap_measure_exact, sample_subspaces, Subspace};
use crate::intrinsic::{default_method, exact_measures, kappa, kubota_estimate, Method};
use crate::linalg::binomial;
use crate::sampling::{gaussian_restricted, model_cloud, simplex_gaussian_measure, Model, RandomStream};
use crate::stats::{
    bootstrap_ci, normality_diagnostic, sample_variance, scaling_fit, tail_frequency,
    variance_std_error, SummaryStats,
};

/// CSV header shared by all experiments.
pub const CSV_HEADER: [&str; 8] = ["experiment", "n", "d", "ell", "statistic", "value", "std_error", "extra"];

/// `Z` draws per local-variance evaluation inside the lower-bound audit.
const LOCAL_Z_DRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub ell: usize,
    pub n_grid: Vec<u64>,
    pub reps: usize,
    pub model: Model,
    pub subspaces: usize,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Cap angles for `angle-measure`.
    pub angles: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 2,
            ell: 2,
            n_grid: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            reps: 500,
            model: Model::Binomial,
            subspaces: 2000,
            c1: construction::DEFAULT_C1,
            c2: construction::DEFAULT_C2,
            seed: 1,
            out: None,
            angles: vec![0.05, 0.1, 0.2],
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for {key}")))
}

/// Point counts may be written as `1e4` as well as `10000`.
fn parse_count(key: &str, value: &str) -> Result<u64> {
    if let Ok(n) = value.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = parse_value(key, value)?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(Error::InvalidConfig(format!("bad count '{value}' for {key}")))
    }
}

impl ExperimentConfig {
    /// Sets one key; keys are the config-file names (`n_grid`, `subspaces`, ...).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dim" => self.dim = parse_value(key, value)?,
            "ell" => self.ell = parse_value(key, value)?,
            "n_grid" => {
                self.n_grid = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_count(key, s))
                    .collect::<Result<_>>()?
            }
            "reps" => self.reps = parse_count(key, value)? as usize,
            "model" => self.model = value.parse().map_err(|e: Error| Error::InvalidConfig(e.to_string()))?,
            "subspaces" => self.subspaces = parse_count(key, value)? as usize,
            "c1" => self.c1 = parse_value(key, value)?,
            "c2" => self.c2 = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "angles" => self.angles = parse_list(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// All keys in config-file form; `from_text(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let join_n = self.n_grid.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let join_a = self.angles.iter().map(|a| fmt_g17(*a)).collect::<Vec<_>>().join(",");
        let out = self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        format!(
            "dim = {}\nell = {}\nn_grid = {}\nreps = {}\nmodel = {}\nsubspaces = {}\nc1 = {}\nc2 = {}\nseed = {}\nout = {}\nangles = {}\n",
            self.dim,
            self.ell,
            join_n,
            self.reps,
            self.model.name(),
            self.subspaces,
            fmt_g17(self.c1),
            fmt_g17(self.c2),
            self.seed,
            out,
            join_a
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.ell == 0 || self.ell > self.dim {
            return bad(format!("need 1 <= ell <= dim, got ell = {}, dim = {}", self.ell, self.dim));
        }
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < self.dim as u64 + 1) {
            return bad(format!("n_grid entry {n} is below dim + 1"));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.subspaces == 0 {
            return bad("subspaces must be at least 1".into());
        }
        if !(self.c1 > 0.0) {
            return bad(format!("c1 must be positive, got {}", self.c1));
        }
        if !(self.c2 > 0.0 && self.c2 < 1.0) {
            return bad(format!("c2 must lie in (0, 1), got {}", self.c2));
        }
        if self.angles.iter().any(|a| !(*a > 0.0 && *a < std::f64::consts::FRAC_PI_2)) {
            return bad("angles must lie in (0, pi/2)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Moments,
    ExpectationScaling,
    VarianceScaling,
    ConstructionAudit,
    AngleMeasure,
    LocalVariance,
    LowerBoundAudit,
    CltDiagnostic,
    ConcentrationReport,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Moments,
        Experiment::ExpectationScaling,
        Experiment::VarianceScaling,
        Experiment::ConstructionAudit,
        Experiment::AngleMeasure,
        Experiment::LocalVariance,
        Experiment::LowerBoundAudit,
        Experiment::CltDiagnostic,
        Experiment::ConcentrationReport,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Moments => "moments",
            Experiment::ExpectationScaling => "expectation-scaling",
            Experiment::VarianceScaling => "variance-scaling",
            Experiment::ConstructionAudit => "construction-audit",
            Experiment::AngleMeasure => "angle-measure",
            Experiment::LocalVariance => "local-variance",
            Experiment::LowerBoundAudit => "lower-bound-audit",
            Experiment::CltDiagnostic => "clt-diagnostic",
            Experiment::ConcentrationReport => "concentration-report",
        }
    }

    /// Command-specific preconditions on top of [`ExperimentConfig::validate`].
    pub fn check(self, config: &ExperimentConfig) -> Result<()> {
        config.validate()?;
        let need_reps = |k: usize| {
            if config.reps < k {
                Err(Error::InvalidConfig(format!("{} needs reps >= {k}", self.tag())))
            } else {
                Ok(())
            }
        };
        let fitted = matches!(self, Experiment::ExpectationScaling | Experiment::VarianceScaling);
        if fitted && config.n_grid.len() < 3 {
            return Err(Error::InvalidConfig(format!("{} fits a slope and needs at least 3 grid points", self.tag())));
        }
        match self {
            Experiment::ExpectationScaling => {
                let lo = *config.n_grid.iter().min().expect("non-empty grid") as f64;
                let hi = *config.n_grid.iter().max().expect("non-empty grid") as f64;
                if hi < 1000.0 * lo {
                    return Err(Error::InvalidConfig(
                        "expectation-scaling needs an n grid spanning at least 3 decades".into(),
                    ));
                }
                Ok(())
            }
            Experiment::VarianceScaling => need_reps(500),
            Experiment::LocalVariance | Experiment::LowerBoundAudit => need_reps(1000),
            Experiment::CltDiagnostic | Experiment::ConcentrationReport => need_reps(2000),
            Experiment::ConstructionAudit => {
                if config.dim < 2 {
                    return Err(Error::InvalidConfig("construction-audit needs dim >= 2".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub n: u64,
    pub d: usize,
    pub ell: usize,
    pub statistic: String,
    pub value: f64,
    pub std_error: f64,
    /// `key=value` pairs separated by `;`.
    pub extra: String,
}

impl ResultRow {
    pub fn new(experiment: Experiment, n: u64, d: usize, ell: usize, statistic: &str, value: f64, std_error: f64) -> Self {
        ResultRow {
            experiment: experiment.tag().to_string(),
            n,
            d,
            ell,
            statistic: statistic.to_string(),
            value,
            std_error,
            extra: String::new(),
        }
    }

    pub fn extra(mut self, extra: impl Into<String>) -> Self {
        self.extra = extra.into();
        self
    }

    /// Value of `key` in the extra field.
    pub fn extra_value(&self, key: &str) -> Option<&str> {
        self.extra
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    /// Grid points whose construction failed (flagged rows, run continued).
    pub construction_failures: usize,
    pub grid_points: usize,
}

impl Report {
    /// Every grid point failed with a construction error.
    pub fn construction_failure_only(&self) -> bool {
        self.grid_points > 0 && self.construction_failures == self.grid_points
    }

    pub fn find(&self, n: u64, statistic: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.n == n && r.statistic == statistic)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_csv(&self.rows, &mut buf)?;
        Ok(String::from_utf8(buf).expect("ASCII output"))
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.experiment.as_str(),
            &r.n.to_string(),
            &r.d.to_string(),
            &r.ell.to_string(),
            r.statistic.as_str(),
            &fmt_g17(r.value),
            &fmt_g17(r.std_error),
            r.extra.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Caps the global worker pool; later calls are ignored.
pub fn init_thread_pool(threads: Option<usize>) {
    if let Some(t) = threads.filter(|&t| t > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

/// Per-grid auxiliary stream `k` (0: subspaces, 1: construction, 2: bootstrap).
fn aux_stream(seed: u64, g: usize, k: u64) -> RandomStream {
    RandomStream::new(seed, ((g as u64) << 32) | (0xFFFF_FFFF - k))
}

fn replicate<T, F>(seed: u64, g: usize, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RandomStream) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| f(&mut RandomStream::for_replication(seed, g as u64, r as u64)))
        .collect()
}

/// Per-cloud intrinsic volumes at one grid point.
#[derive(Debug, Clone)]
pub struct IvSample {
    pub n: u64,
    pub ells: Vec<usize>,
    pub methods: Vec<Method>,
    /// `values[k][r]`: `V_{ells[k]}` of replication `r`.
    pub values: Vec<Vec<f64>>,
    /// Mean squared Monte Carlo standard error per `l` (0 for exact methods).
    pub mc_variance: Vec<f64>,
}

impl IvSample {
    pub fn of(&self, ell: usize) -> &[f64] {
        let k = self.ells.iter().position(|&e| e == ell).expect("requested l");
        &self.values[k]
    }
}

/// `V_l` of one cloud for each requested `l`. Exact methods fall back to the
/// projection estimator on degenerate clouds.
pub fn cloud_intrinsic_volumes(
    cloud: &PointCloud,
    ells: &[usize],
    subspaces: &[Option<Vec<Subspace>>],
) -> Result<Vec<(f64, f64)>> {
    let d = cloud.dim();
    let needs_exact = ells.iter().any(|&e| default_method(d, e).is_exact());
    let exact = if needs_exact { exact_measures(cloud).ok() } else { None };
    ells.iter()
        .zip(subspaces)
        .map(|(&ell, subs)| match (default_method(d, ell), exact, subs) {
            (Method::ExactVolume, Some((vol, _)), _) => Ok((vol, 0.0)),
            (Method::ExactSurface, Some((_, area)), _) => Ok((area / 2.0, 0.0)),
            (_, _, Some(subs)) => {
                let e = kubota_estimate(cloud, ell, subs)?;
                Ok((e.value, e.std_error))
            }
            _ => Ok((0.0, 0.0)),
        })
        .collect()
}

/// `reps` clouds per grid point with `V_l` for each `l` in `ells`. Kubota
/// estimates reuse one subspace sample per grid point.
pub fn sample_intrinsic_volumes(config: &ExperimentConfig, ells: &[usize]) -> Result<Vec<IvSample>> {
    let d = config.dim;
    config
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let mut aux = aux_stream(config.seed, g, 0);
            // Degenerate clouds fall back to projections, so every l keeps a sample.
            let subspaces: Vec<Option<Vec<Subspace>>> = ells
                .iter()
                .map(|&ell| {
                    let k = if default_method(d, ell).is_exact() { 64 } else { config.subspaces };
                    sample_subspaces(d, ell, k, &mut aux).map(Some)
                })
                .collect::<Result<_>>()?;
            let per_rep = replicate(config.seed, g, config.reps, |rng| {
                let cloud = model_cloud(config.model, n, d, rng);
                cloud_intrinsic_volumes(&cloud, ells, &subspaces)
            })?;
            let mut values = vec![Vec::with_capacity(config.reps); ells.len()];
            let mut mc = vec![SummaryStats::new(); ells.len()];
            for rep in per_rep {
                for (k, (v, se)) in rep.into_iter().enumerate() {
                    values[k].push(v);
                    mc[k].accumulate(se * se);
                }
            }
            Ok(IvSample {
                n,
                ells: ells.to_vec(),
                methods: ells.iter().map(|&e| default_method(d, e)).collect(),
                values,
                mc_variance: mc.iter().map(SummaryStats::mean).collect(),
            })
        })
        .collect()
}

fn bootstrap_seed(seed: u64, g: usize) -> u64 {
    aux_stream(seed, g, 2).next_u64()
}

fn ci_extra(ci: (f64, f64)) -> String {
    format!("ci_lo={};ci_hi={}", fmt_g17(ci.0), fmt_g17(ci.1))
}

pub fn moments_rows(config: &ExperimentConfig, samples: &[IvSample], ell: usize) -> Vec<ResultRow> {
    let e = Experiment::Moments;
    let d = config.dim;
    let mut rows = Vec::new();
    for s in samples {
        let k = s.ells.iter().position(|&x| x == ell).expect("requested l");
        let stats = SummaryStats::from_slice(&s.values[k]);
        let method = format!("method={};reps={}", s.methods[k].tag(), s.values[k].len());
        rows.push(ResultRow::new(e, s.n, d, ell, "mean", stats.mean(), stats.std_error()).extra(method.clone()));
        rows.push(
            ResultRow::new(e, s.n, d, ell, "variance", stats.variance(), variance_std_error(&s.values[k]))
                .extra(method),
        );
        if !s.methods[k].is_exact() {
            rows.push(ResultRow::new(e, s.n, d, ell, "mc_variance", s.mc_variance[k], f64::NAN));
        }
    }
    rows
}

/// `binom(d, l) kappa_d / kappa_{d-l}`
pub fn limit_constant(d: usize, ell: usize) -> f64 {
    binomial(d, ell) * kappa(d) / kappa(d - ell)
}

pub fn expectation_rows(config: &ExperimentConfig, samples: &[IvSample], ell: usize) -> Result<Vec<ResultRow>> {
    let e = Experiment::ExpectationScaling;
    let d = config.dim;
    let target = limit_constant(d, ell);
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for s in samples {
        let stats = SummaryStats::from_slice(s.of(ell));
        let l = (s.n as f64).ln();
        let half = ell as f64 / 2.0;
        rows.push(ResultRow::new(e, s.n, d, ell, "mean", stats.mean(), stats.std_error()));
        let a = l.powf(-half);
        let b = (2.0 * l).powf(-half);
        rows.push(
            ResultRow::new(e, s.n, d, ell, "mean_over_log_pow", stats.mean() * a, stats.std_error() * a)
                .extra(format!("limit_constant={}", fmt_g17(target))),
        );
        rows.push(
            ResultRow::new(e, s.n, d, ell, "mean_over_2log_pow", stats.mean() * b, stats.std_error() * b)
                .extra(format!("limit_constant={}", fmt_g17(target))),
        );
        pairs.push((s.n as f64, stats.mean()));
    }
    let fit = scaling_fit(&pairs, config.seed)?;
    rows.extend(fit_rows(e, d, ell, &fit, ell as f64 / 2.0));
    Ok(rows)
}

fn fit_rows(e: Experiment, d: usize, ell: usize, fit: &crate::stats::ScalingFit, target: f64) -> Vec<ResultRow> {
    vec![
        ResultRow::new(e, 0, d, ell, "slope", fit.slope, f64::NAN)
            .extra(format!("{};target={}", ci_extra(fit.slope_ci), fmt_g17(target))),
        ResultRow::new(e, 0, d, ell, "intercept", fit.intercept, f64::NAN),
        ResultRow::new(e, 0, d, ell, "r_squared", fit.r_squared, f64::NAN),
    ]
}

pub fn variance_rows(config: &ExperimentConfig, samples: &[IvSample], ell: usize) -> Result<Vec<ResultRow>> {
    let e = Experiment::VarianceScaling;
    let d = config.dim;
    let power = (d as f64 + 3.0) / 2.0 - ell as f64;
    let target = ell as f64 - (d as f64 + 3.0) / 2.0;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut worst: Option<(u64, f64, (f64, f64))> = None;
    for (g, s) in samples.iter().enumerate() {
        let v = s.of(ell);
        let var = sample_variance(v);
        let ci = bootstrap_ci(v, sample_variance, 0.95, bootstrap_seed(config.seed, g));
        let scale = (s.n as f64).ln().powf(power);
        rows.push(ResultRow::new(e, s.n, d, ell, "variance", var, variance_std_error(v)).extra(ci_extra(ci)));
        let norm_ci = (ci.0 * scale, ci.1 * scale);
        rows.push(
            ResultRow::new(e, s.n, d, ell, "normalized_variance", var * scale, variance_std_error(v) * scale)
                .extra(ci_extra(norm_ci)),
        );
        if worst.is_none_or(|w| var * scale < w.1) {
            worst = Some((s.n, var * scale, norm_ci));
        }
        pairs.push((s.n as f64, var));
    }
    let fit = scaling_fit(&pairs, config.seed)?;
    rows.extend(fit_rows(e, d, ell, &fit, target));
    if let Some((n, v, ci)) = worst {
        rows.push(
            ResultRow::new(e, 0, d, ell, "min_normalized_variance", v, f64::NAN)
                .extra(format!("{};at_n={n}", ci_extra(ci))),
        );
    }
    Ok(rows)
}

pub fn clt_rows(config: &ExperimentConfig, samples: &[IvSample], ell: usize) -> Result<Vec<ResultRow>> {
    samples
        .iter()
        .map(|s| {
            let v = s.of(ell);
            let ks = normality_diagnostic(v)?;
            // 95% asymptotic critical value of the one-sample KS statistic.
            Ok(ResultRow::new(Experiment::CltDiagnostic, s.n, config.dim, ell, "ks_distance", ks, f64::NAN)
                .extra(format!("reps={};ks_critical_95={}", v.len(), fmt_g17(1.358 / (v.len() as f64).sqrt()))))
        })
        .collect()
}

/// Gaussian branch `2 exp(-y^2 / (4 * 2^(2d+l+5)))` of the concentration bound;
/// the other branch has an unknown constant.
pub fn concentration_bound_gaussian_branch(d: usize, ell: usize, y: f64) -> f64 {
    let k = 2f64.powi((2 * d + ell + 5) as i32);
    2.0 * (-(y * y) / (4.0 * k)).exp()
}

pub fn concentration_rows(config: &ExperimentConfig, samples: &[IvSample], ell: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for s in samples {
        for y in [0.0, 1.0, 2.0, 3.0] {
            let t = tail_frequency(s.of(ell), y)?;
            rows.push(
                ResultRow::new(Experiment::ConcentrationReport, s.n, config.dim, ell, "tail_frequency", t.value, t.std_error)
                    .extra(format!(
                        "y={};bound_gaussian_branch={};c=unknown",
                        fmt_g17(y),
                        fmt_g17(concentration_bound_gaussian_branch(config.dim, ell, y))
                    )),
            );
        }
    }
    Ok(rows)
}

fn flagged(e: Experiment, n: u64, config: &ExperimentConfig, err: &Error) -> ResultRow {
    ResultRow::new(e, n, config.dim, config.ell, "construction_failure", f64::NAN, f64::NAN)
        .extra(format!("error={}", err.to_string().replace([',', ';', '\n'], " ")))
}

pub fn cmd_construction_audit(config: &ExperimentConfig) -> Result<Report> {
    let e = Experiment::ConstructionAudit;
    e.check(config)?;
    let d = config.dim;
    let mut report = Report {
        grid_points: config.n_grid.len(),
        ..Default::default()
    };
    for (g, &n) in config.n_grid.iter().enumerate() {
        let a = match estimate_event_probability(
            config.model,
            n,
            d,
            config.c1,
            config.c2,
            config.reps as u64,
            config.seed,
            aux_stream(config.seed, g, 1).stream_id(),
        ) {
            Ok(a) => a,
            Err(err @ Error::ConstructionFailure(_)) => {
                report.construction_failures += 1;
                report.rows.push(flagged(e, n, config, &err));
                continue;
            }
            Err(err) => return Err(err),
        };
        let ell = config.ell;
        let sqrt_log = (n as f64).ln().sqrt();
        let vol = 2f64.sqrt() / a.r;
        let pairs = a
            .cone
            .violations
            .iter()
            .map(|(i, k)| format!("{i}-{k}"))
            .collect::<Vec<_>>()
            .join(" ");
        let rows = [
            ResultRow::new(e, n, d, ell, "r", a.r, f64::NAN),
            ResultRow::new(e, n, d, ell, "m", a.m as f64, f64::NAN),
            ResultRow::new(e, n, d, ell, "m_over_log_pow", a.m as f64 / (n as f64).ln().powf((d as f64 - 1.0) / 2.0), f64::NAN),
            ResultRow::new(e, n, d, ell, "n_gamma_delta", a.gamma_delta_n.value, a.gamma_delta_n.std_error),
            ResultRow::new(e, n, d, ell, "cone_violations", a.cone.violations.len() as f64, f64::NAN)
                .extra(format!("pairs_checked={};violating={pairs}", a.cone.pairs_checked)),
            ResultRow::new(e, n, d, ell, "p_event", a.pooled.value, a.pooled.std_error).extra(format!(
                "reps={};hits={};model={}",
                a.reps,
                a.site_hits.iter().sum::<u64>(),
                config.model.name()
            )),
            ResultRow::new(e, n, d, ell, "p_event_formula", a.formula, f64::NAN).extra("model=binomial"),
        ];
        report.rows.extend(rows);
        if d == 2 {
            report.rows.push(ResultRow::new(e, n, d, ell, "delta_area_sqrt_log", vol * sqrt_log, f64::NAN));
        }
    }
    Ok(report)
}

pub fn cmd_angle_measure(config: &ExperimentConfig) -> Result<Report> {
    let e = Experiment::AngleMeasure;
    e.check(config)?;
    let (d, ell) = (config.dim, config.ell);
    let mut z = vec![0.0; d];
    z[0] = 1.0;
    let mut rows = Vec::new();
    for (g, &a) in config.angles.iter().enumerate() {
        let mut rng = RandomStream::for_replication(config.seed, g as u64, 0);
        let est = cap_measure_estimate(&z, a, d, ell, config.reps as u64, &mut rng)?;
        let exact = cap_measure_exact(d, ell, a)?;
        let scale = a.powi((d - ell) as i32);
        let extra = format!("a={};exact={}", fmt_g17(a), fmt_g17(exact));
        rows.push(ResultRow::new(e, 0, d, ell, "cap_measure", est.value, est.std_error).extra(extra.clone()));
        rows.push(ResultRow::new(e, 0, d, ell, "cap_ratio", est.value / scale, est.std_error / scale).extra(extra));
    }
    Ok(Report {
        rows,
        construction_failures: 0,
        grid_points: config.angles.len(),
    })
}

pub fn cmd_local_variance(config: &ExperimentConfig) -> Result<Report> {
    let e = Experiment::LocalVariance;
    e.check(config)?;
    let (d, ell) = (config.dim, config.ell);
    let mut report = Report {
        grid_points: config.n_grid.len(),
        ..Default::default()
    };
    for (g, &n) in config.n_grid.iter().enumerate() {
        let mut rng = aux_stream(config.seed, g, 1);
        let scaffold = match Scaffold::build(n, d, config.c1, config.c2, &mut rng) {
            Ok(s) => s,
            Err(err @ Error::ConstructionFailure(_)) => {
                report.construction_failures += 1;
                report.rows.push(flagged(e, n, config, &err));
                continue;
            }
            Err(err) => return Err(err),
        };
        let site = &scaffold.sites[0];
        let lv = local_variance_estimate(site, ell, config.reps, config.subspaces, &mut rng)?;
        let scale = (n as f64).ln().powi((d - ell + 1) as i32);
        report.rows.push(ResultRow::new(e, n, d, ell, "local_variance", lv.variance, f64::NAN).extra(ci_extra(lv.ci)));
        report.rows.push(
            ResultRow::new(e, n, d, ell, "normalized_local_variance", lv.variance * scale, f64::NAN)
                .extra(ci_extra((lv.ci.0 * scale, lv.ci.1 * scale))),
        );
        let mono = paired_monotonicity(site, ell, config.reps, config.subspaces.min(500), &mut rng)?;
        report.rows.push(
            ResultRow::new(e, n, d, ell, "monotone_fraction", mono.holds as f64 / mono.pairs as f64, f64::NAN)
                .extra(format!("pairs={};min_gap={};nested={}", mono.pairs, fmt_g17(mono.min_gap), mono.nested)),
        );
    }
    Ok(report)
}

/// Points of `cloud` in `Delta^1, ..., Delta^d` of the site, in order, when
/// each holds exactly one.
fn event_points(cloud: &PointCloud, site: &construction::SiteFrame) -> Option<PointCloud> {
    let d = site.dim();
    let mut f = PointCloud::with_capacity(d, d);
    for s in &site.delta_j[1..] {
        let mut found = cloud.iter().filter(|x| s.contains(x));
        let p = found.next()?;
        if found.next().is_some() {
            return None;
        }
        f.push(p);
    }
    Some(f)
}

pub fn cmd_lower_bound_audit(config: &ExperimentConfig) -> Result<Report> {
    let e = Experiment::LowerBoundAudit;
    e.check(config)?;
    let (d, ell) = (config.dim, config.ell);
    let mut report = Report {
        grid_points: config.n_grid.len(),
        ..Default::default()
    };
    for (g, &n) in config.n_grid.iter().enumerate() {
        let mut aux = aux_stream(config.seed, g, 1);
        let scaffold = match Scaffold::build(n, d, config.c1, config.c2, &mut aux) {
            Ok(s) => s,
            Err(err @ Error::ConstructionFailure(_)) => {
                report.construction_failures += 1;
                report.rows.push(flagged(e, n, config, &err));
                continue;
            }
            Err(err) => return Err(err),
        };
        let mut sub_rng = aux_stream(config.seed, g, 0);
        let subspaces = sample_subspaces(d, ell, config.subspaces, &mut sub_rng)?;
        let kubota_subs = if default_method(d, ell).is_exact() {
            sample_subspaces(d, ell, 64, &mut sub_rng)?
        } else {
            subspaces.clone()
        };
        let kubota_subs = [Some(kubota_subs)];
        let per_rep: Vec<(f64, f64, usize)> = replicate(config.seed, g, config.reps, |rng| {
            let cloud = model_cloud(config.model, n, d, rng);
            let v = cloud_intrinsic_volumes(&cloud, &[ell], &kubota_subs)?[0].0;
            let mut rhs = 0.0;
            let mut events = 0;
            for site in &scaffold.sites {
                if !event_indicator(&cloud, site) {
                    continue;
                }
                let f = event_points(&cloud, site).expect("event implies one point per homothet");
                let zs: Vec<Vec<f64>> = (0..LOCAL_Z_DRAWS)
                    .map(|_| gaussian_restricted(site.delta_j[0].simplex(), rng))
                    .collect::<Result<_>>()?;
                let seed = rng.next_u64();
                rhs += local_variance_with_points(site, &f, ell, &zs, &subspaces, seed)?.variance;
                events += 1;
            }
            Ok((v, rhs, events))
        })?;
        let lhs_values: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
        let rhs_stats = SummaryStats::from_slice(&per_rep.iter().map(|r| r.1).collect::<Vec<_>>());
        let events: usize = per_rep.iter().map(|r| r.2).sum();
        let lhs = sample_variance(&lhs_values);
        let lhs_se = variance_std_error(&lhs_values);
        let ratio = lhs / rhs_stats.mean();
        report.rows.push(ResultRow::new(e, n, d, ell, "lhs_variance", lhs, lhs_se));
        report.rows.push(
            ResultRow::new(e, n, d, ell, "rhs_same_clouds", rhs_stats.mean(), rhs_stats.std_error())
                .extra(format!("events={events};reps={}", config.reps)),
        );
        report.rows.push(ResultRow::new(e, n, d, ell, "ratio_same_clouds", ratio, f64::NAN));

        // Decomposed right-hand side: sum_i P(A_i) E[V_i | A_i].
        let site = &scaffold.sites[0];
        let p = event_probability_formula(site, n, 100_000, &mut aux);
        let cond = conditional_local_variance(site, ell, 50, LOCAL_Z_DRAWS, config.subspaces.min(500), &mut aux)?;
        let m = scaffold.m() as f64;
        let rhs_dec = m * p * cond.value;
        let rhs_dec_se = m * p * cond.std_error;
        report.rows.push(
            ResultRow::new(e, n, d, ell, "rhs_decomposed", rhs_dec, rhs_dec_se).extra(format!(
                "m={};p_event_formula={};conditional_local_variance={}",
                scaffold.m(),
                fmt_g17(p),
                fmt_g17(cond.value)
            )),
        );
        report.rows.push(ResultRow::new(e, n, d, ell, "ratio_decomposed", lhs / rhs_dec, f64::NAN));
        let power = (d as f64 + 3.0) / 2.0 - ell as f64;
        report.rows.push(ResultRow::new(
            e,
            n,
            d,
            ell,
            "rhs_decomposed_normalized",
            rhs_dec * (n as f64).ln().powf(power),
            rhs_dec_se * (n as f64).ln().powf(power),
        ));
    }
    Ok(report)
}

/// Runs one experiment from a validated config.
pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<Report> {
    experiment.check(config)?;
    let ell = config.ell;
    let grid = config.n_grid.len();
    let sampled = |f: fn(&ExperimentConfig, &[IvSample], usize) -> Result<Vec<ResultRow>>| -> Result<Report> {
        let samples = sample_intrinsic_volumes(config, &[ell])?;
        Ok(Report {
            rows: f(config, &samples, ell)?,
            construction_failures: 0,
            grid_points: grid,
        })
    };
    match experiment {
        Experiment::Moments => sampled(|c, s, l| Ok(moments_rows(c, s, l))),
        Experiment::ExpectationScaling => sampled(expectation_rows),
        Experiment::VarianceScaling => sampled(variance_rows),
        Experiment::CltDiagnostic => sampled(clt_rows),
        Experiment::ConcentrationReport => sampled(concentration_rows),
        Experiment::ConstructionAudit => cmd_construction_audit(config),
        Experiment::AngleMeasure => cmd_angle_measure(config),
        Experiment::LocalVariance => cmd_local_variance(config),
        Experiment::LowerBoundAudit => cmd_lower_bound_audit(config),
    }
}

/// Importance-sampled `n * gamma_d(Delta_i)` and `vol(Delta_i)` of the first
/// site for each `n`, without the event simulation.
pub fn simplex_scale(n: u64, d: usize, c1: f64, c2: f64, samples: u64, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = RandomStream::new(seed, 0);
    let s = Scaffold::build(n, d, c1, c2, &mut rng)?;
    let site = &s.sites[0];
    let g = simplex_gaussian_measure(&site.delta, None, samples, &mut rng).scaled(n as f64);
    Ok((g.value, g.std_error, site.delta.volume()))
}

/// Cone containment of a freshly packed scaffold.
pub fn cone_violations(n: u64, d: usize, c1: f64, c2: f64, seed: u64) -> Result<usize> {
    let mut rng = RandomStream::new(seed, 0);
    Ok(check_cone_containment(&Scaffold::build(n, d, c1, c2, &mut rng)?).violations.len())
}
