//! Command-line front end. `main.rs` parses arguments and calls [`run`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_csv, write_csv, Dataset};
use crate::error::{Error, Result};
use crate::eval::{self, EvalMode};
use crate::format::{self, g17};
use crate::mmlr::{run_mmlr, training_mse, MinRemaining, MmlrConfig};
use crate::sampling::validate::{coverage_trials, lemma32_trials, CoverageSetup};
use crate::synth::{self, SynthSpec};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  a validation bound was violated
  2  invalid flags or arguments
  3  unreadable or malformed data
  4  numerical failure";

#[derive(Debug, Parser)]
#[command(name = "mmlr", version, about = "Multiple-model linear regression", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model set to a CSV file and write it as JSON.
    Fit(FitArgs),
    /// Write a synthetic piecewise linear dataset.
    Generate(GenerateArgs),
    /// Compare MMLR against one global linear model.
    Evaluate(EvaluateArgs),
    /// Time MMLR on synthetic data of increasing size.
    Bench(BenchArgs),
    /// Run a Monte Carlo check of the sampling bounds.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Coefficient error bound.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Allowed failure probability.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Largest number of models.
    #[arg(long, default_value_t = 10)]
    pub max_models: usize,
    /// Stop creating local models once this many rows remain
    /// [default: max(2 * max{65, 3k}, k + 2)].
    #[arg(long, conflicts_with = "min_remaining_fraction")]
    pub min_remaining: Option<usize>,
    /// Same as --min-remaining, as a fraction of the row count.
    #[arg(long)]
    pub min_remaining_fraction: Option<f64>,
    /// Known noise standard deviation; skips the estimate.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Local neighborhoods used for the noise estimate.
    #[arg(long, default_value_t = 5)]
    pub noise_neighborhoods: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn config(&self) -> Result<MmlrConfig> {
        let min_remaining = match (self.min_remaining, self.min_remaining_fraction) {
            (Some(r), _) => MinRemaining::Rows(r),
            (None, Some(f)) => MinRemaining::Fraction(f),
            (None, None) => MinRemaining::Default,
        };
        let cfg = MmlrConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            max_models: self.max_models,
            min_remaining,
            sigma_override: self.sigma,
            noise_neighborhoods: self.noise_neighborhoods,
            seed: self.seed,
            ..MmlrConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Headed numeric CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column [default: last column].
    #[arg(long)]
    pub response: Option<String>,
    /// Where to write the model set JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Leave the per-model row lists out of the JSON.
    #[arg(long)]
    pub no_rows: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON file holding a full generator spec.
    #[arg(long, conflicts_with_all = ["n", "k", "regimes", "sigma"])]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of regimes.
    #[arg(long, default_value_t = 2)]
    pub regimes: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Seed; also overrides the seed of a --spec file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional JSON destination for the regimes and row labels.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: Option<String>,
    /// Fraction of rows held out for testing.
    #[arg(long, default_value_t = 0.2, conflicts_with = "train_rmse")]
    pub holdout: f64,
    /// Report errors on the training rows instead of a holdout.
    #[arg(long)]
    pub train_rmse: bool,
    /// Write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write plot data (method, dataset, metric, value).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma separated, strictly ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [100_000usize, 200_000, 400_000])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub regimes: usize,
    /// Noise standard deviation of the generated data.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Timed runs per size; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Write plot data (method, n, time_s).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Coverage of both estimators and their variance ordering.
    Theorems,
    /// The x'x concentration bound for uniform designs.
    Lemma32,
    /// Coverage of the direct sample estimator.
    Coverage,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Monte Carlo trials, at least 100.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coefficient error bound for the coverage suites.
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Failure probability for the coverage suites.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Slack added to delta before a failure rate counts as a violation.
    #[arg(long, default_value_t = 0.03)]
    pub margin: f64,
}

/// Runs one command. `Ok(false)` means a validation bound was violated.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<bool> {
    match &cli.command {
        Command::Fit(a) => fit(a, out).map(|_| true),
        Command::Generate(a) => generate(a, out).map(|_| true),
        Command::Evaluate(a) => evaluate(a, out).map(|_| true),
        Command::Bench(a) => bench(a, out).map(|_| true),
        Command::Validate(a) => validate(a, out),
    }
}

/// Exit code for the outcome of [`run`].
pub fn exit_code(outcome: &Result<bool>) -> i32 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => e.exit_code(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn load(input: &Path, response: Option<&str>) -> Result<Dataset> {
    load_csv(input, response)
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.model.config()?;
    let ds = load(&a.input, a.response.as_deref())?;
    let start = Instant::now();
    let ms = run_mmlr(&ds, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let mse = training_mse(&ms, &ds)?;
    write_file(&a.output, &ms.to_json(!a.no_rows)?)?;
    say(out, format_args!("m: {}", ms.m()))?;
    say(out, format_args!("training_mse: {}", g17(mse)))?;
    say(out, format_args!("wall_time_s: {secs:.3}"))
}

fn generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthSpec>(&text)?
        }
        None => SynthSpec::new(a.n, a.k, a.regimes, a.sigma, 0),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let data = synth::generate(&spec)?;
    write_csv(&data.dataset, &a.output)?;
    if let Some(path) = &a.truth {
        data.write_truth(path)?;
    }
    say(
        out,
        format_args!("wrote {} rows, {} features, {} regimes", spec.n, spec.k, spec.m_regimes),
    )
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.model.config()?;
    let mode = if a.train_rmse {
        EvalMode::Train
    } else {
        EvalMode::Holdout(a.holdout)
    };
    if let EvalMode::Holdout(f) = mode {
        if !(f > 0.0 && f <= 0.5) {
            return Err(Error::domain(format!("--holdout must lie in (0, 0.5], got {f}")));
        }
    }
    let ds = load(&a.input, a.response.as_deref())?;
    let name = a
        .input
        .file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    let reports = eval::compare_methods_with(&ds, &cfg, mode, cfg.seed, &name)?;
    if let Some(path) = &a.json {
        write_file(path, &eval::reports_json(&reports)?)?;
    }
    if let Some(path) = &a.plot {
        write_file(path, &eval::comparison_plot_csv(&reports))?;
    }
    out.write_all(eval::reports_csv(&reports).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.model.config()?;
    let first = *a.sizes.first().ok_or(Error::EmptyInput)?;
    let spec = SynthSpec::new(first, a.k, a.regimes, a.noise, a.model.seed);
    spec.validate()?;
    let report = eval::scaling_benchmark(&spec, &a.sizes, &cfg, a.reps)?;
    if let Some(path) = &a.plot {
        write_file(path, &eval::scaling_plot_csv(&report))?;
    }
    say(out, format_args!("n,wall_time_s,m_models"))?;
    for r in &report.rows {
        say(out, format_args!("{},{:.4},{}", r.n, r.wall_time_s, r.m_models))?;
    }
    let ratios: Vec<String> = report.ratios.iter().map(|r| format!("{r:.3}")).collect();
    say(out, format_args!("ratios: [{}]", ratios.join(", ")))?;
    match report.slope {
        Some(s) => say(out, format_args!("log-log slope: {s:.3}")),
        None => say(out, format_args!("log-log slope: n/a")),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<bool> {
    if a.trials < 100 {
        return Err(Error::domain(format!("--trials must be at least 100, got {}", a.trials)));
    }
    if !(a.margin >= 0.0) {
        return Err(Error::domain(format!("--margin must be non-negative, got {}", a.margin)));
    }
    match a.suite {
        Suite::Lemma32 => {
            let r = lemma32_trials(100, 1.0, a.trials, a.seed)?;
            let ok = r.empirical >= r.bound;
            say(
                out,
                format_args!(
                    "lemma32 n={} L={} trials={}: empirical {:.4} >= bound {:.4} {}",
                    r.n,
                    r.edge,
                    r.trials,
                    r.empirical,
                    r.bound,
                    verdict(ok)
                ),
            )?;
            Ok(ok)
        }
        Suite::Coverage | Suite::Theorems => {
            let setup = CoverageSetup {
                epsilon: a.epsilon,
                delta: a.delta,
                ..CoverageSetup::default()
            };
            let r = coverage_trials(&setup, a.trials, a.seed)?;
            let limit = a.delta + a.margin;
            say(
                out,
                format_args!(
                    "plan: n_s={} t={} p={} (epsilon={} delta={} sigma={})",
                    r.plan.n_s, r.plan.t_groups, r.plan.p_group, setup.epsilon, setup.delta, setup.sigma
                ),
            )?;
            let direct_ok = r.direct_failure_rate <= limit;
            say(
                out,
                format_args!(
                    "direct sample failure rate {:.4} <= {limit:.4} {}",
                    r.direct_failure_rate,
                    verdict(direct_ok)
                ),
            )?;
            if a.suite == Suite::Coverage {
                return Ok(direct_ok);
            }
            let grouped_ok = r.grouped_failure_rate <= limit;
            say(
                out,
                format_args!(
                    "grouped average failure rate {:.4} <= {limit:.4} {}",
                    r.grouped_failure_rate,
                    verdict(grouped_ok)
                ),
            )?;
            let order_ok = r.direct_error_variance <= 1.05 * r.grouped_error_variance;
            say(
                out,
                format_args!(
                    "error variance direct {} <= 1.05 * grouped {} {}",
                    g17(r.direct_error_variance),
                    g17(r.grouped_error_variance),
                    verdict(order_ok)
                ),
            )?;
            say(out, format_args!("report: {}", format::to_json(&r)?))?;
            Ok(direct_ok && grouped_ok && order_ok)
        }
    }
}
