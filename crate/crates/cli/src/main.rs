use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gplab_core::experiments::{init_thread_pool, run, write_csv, Experiment, ExperimentConfig};
use gplab_core::{Error, Model};

/// Monte Carlo experiments on convex hulls of Gaussian samples. Results are
/// written as CSV (`experiment,n,d,ell,statistic,value,std_error,extra`).
#[derive(Parser, Debug)]
#[command(name = "gplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean and variance of V_l per n.
    Moments(Common),
    /// Growth of E[V_l] against log log n, with both normalizations.
    ExpectationScaling(Common),
    /// Growth of Var[V_l] against log log n and the positivity report.
    VarianceScaling(Common),
    /// Site packing, simplex measures, cone containment and event frequencies.
    ConstructionAudit(Common),
    /// Haar measure of subspaces within angle a of a fixed direction.
    AngleMeasure(Common),
    /// Normalized local variance and paired monotonicity.
    LocalVariance(Common),
    /// Var[V_l] against the sum of local variances over occurring events.
    LowerBoundAudit(Common),
    /// Kolmogorov-Smirnov distance of standardized V_l from the normal law.
    CltDiagnostic(Common),
    /// Tail frequencies of standardized V_l.
    ConcentrationReport(Common),
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::Moments(c) => (Experiment::Moments, c),
            Command::ExpectationScaling(c) => (Experiment::ExpectationScaling, c),
            Command::VarianceScaling(c) => (Experiment::VarianceScaling, c),
            Command::ConstructionAudit(c) => (Experiment::ConstructionAudit, c),
            Command::AngleMeasure(c) => (Experiment::AngleMeasure, c),
            Command::LocalVariance(c) => (Experiment::LocalVariance, c),
            Command::LowerBoundAudit(c) => (Experiment::LowerBoundAudit, c),
            Command::CltDiagnostic(c) => (Experiment::CltDiagnostic, c),
            Command::ConcentrationReport(c) => (Experiment::ConcentrationReport, c),
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// Ambient dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Intrinsic volume index l.
    #[arg(long)]
    ell: Option<usize>,
    /// Comma-separated point counts, e.g. 1e3,1e4,1e5.
    #[arg(long)]
    n_grid: Option<String>,
    /// Replications per grid point (samples for angle-measure).
    #[arg(long)]
    reps: Option<String>,
    /// binomial (n points) or poisson (intensity n).
    #[arg(long)]
    model: Option<Model>,
    /// Subspaces per Kubota estimate.
    #[arg(long)]
    subspaces: Option<String>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated cap angles for angle-measure.
    #[arg(long)]
    angles: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        let flags: [(&str, Option<String>); 10] = [
            ("dim", self.dim.map(|v| v.to_string())),
            ("ell", self.ell.map(|v| v.to_string())),
            ("n_grid", self.n_grid.clone()),
            ("reps", self.reps.clone()),
            ("subspaces", self.subspaces.clone()),
            ("c1", self.c1.map(|v| v.to_string())),
            ("c2", self.c2.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("angles", self.angles.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        if let Some(m) = self.model {
            config.model = m;
        }
        Ok(config)
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var("GPLAB_THREADS").ok()?.trim().parse().ok()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = cli.command.split();
    let config = match common.resolve().and_then(|c| experiment.check(&c).map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gplab: {e}");
            return ExitCode::from(2);
        }
    };
    if common.print_config {
        print!("{}", config.to_text());
        return ExitCode::SUCCESS;
    }
    init_thread_pool(threads_from_env());
    let report = match run(experiment, &config) {
        Ok(r) => r,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("gplab: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("gplab: {experiment} failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let written = match &config.out {
        Some(path) => std::fs::File::create(path)
            .map_err(Error::from)
            .and_then(|f| write_csv(&report.rows, std::io::BufWriter::new(f))),
        None => write_csv(&report.rows, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("gplab: writing results: {e}");
        return ExitCode::FAILURE;
    }
    if report.construction_failure_only() {
        eprintln!("gplab: construction failed at every grid point");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
