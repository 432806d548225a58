//! The `leakage-rb` command line: `simulate`, `fit`, `reproduce`, `check`.
//!
//! Exit codes: 0 success, 1 property failure, 2 configuration or input error,
//! 3 simulation error, 4 fit error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Oracle};
use crate::error::{Error, Result};
use crate::fitting::{fit_with, Estimate, FitOptions, FitResult, ModelKind};
use crate::gatesets::{twirl, GateSet, NoiseAssignment};
use crate::liouville::{
    hermitian_eigenvalues, max_abs_diff, unitarity_deviation, Channel, DEFAULT_TOL,
};
use crate::noise::{
    filter_channel, sample_coherent_noise, sample_coherent_unitary, FilterParams, ShelvingParams,
};
use crate::protocol::{brute_force_expectation, predict_for, DecayDataset, Spam};
use crate::rng::{RandomStream, RNG_ALGORITHM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_FIT: i32 = 4;

/// Property tolerance used by `check` and the reproduction reports.
pub const CHECK_TOL: f64 = 1e-10;
pub const REPRODUCTION_SIGMAS: f64 = 3.0;

const FIG1_CONFIG: &str = include_str!("../../../configs/fig1.toml");
const FIG2_CONFIG: &str = include_str!("../../../configs/fig2.toml");

#[derive(Debug, Parser)]
#[command(
    name = "leakage-rb",
    version,
    about = "Leakage randomized benchmarking simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the random sequences of a config; writes decay.csv, decay.json, manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's shot count.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Fit a decay dataset (CSV or JSON); writes fit.json.
    Fit {
        dataset: PathBuf,
        #[arg(long, default_value = "single-exp")]
        model: ModelKind,
        /// Output directory; defaults to the dataset's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Unit weights instead of 1/sem².
        #[arg(long)]
        unweighted: bool,
    },
    /// Simulate, fit and compare one figure against its oracle.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Monte Carlo draws for the averaged-channel oracle (fig2).
        #[arg(long)]
        oracle_samples: Option<usize>,
    },
    /// Run the fast invariant suite.
    Check {
        /// Additional gate-set JSON file to check.
        #[arg(long)]
        gateset: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, e: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective configuration, overrides applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rng_algorithm: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    fn new(command: &str, config: Option<ExperimentConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.as_ref().map(|c| c.seed),
            config,
            rng_algorithm: RNG_ALGORITHM.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }
}

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn finish(mut self, mut manifest: RunManifest, started: Instant) -> CliResult<()> {
        manifest.outputs = std::mem::take(&mut self.written);
        manifest
            .outputs
            .push(self.dir.join("manifest.json").display().to_string());
        manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
        self.write("manifest.json", &to_json(&manifest))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Simulate {
            config,
            out,
            seed,
            shots,
            jobs,
        } => cmd_simulate(&config, &out, seed, shots, jobs).map(|_| EXIT_OK),
        Command::Fit {
            dataset,
            model,
            out,
            unweighted,
        } => {
            let out = out.unwrap_or_else(|| match dataset.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            });
            let fit = cmd_fit(&dataset, model, &out, !unweighted)?;
            println!("{}", fit.summary());
            Ok(EXIT_OK)
        }
        Command::Reproduce {
            figure,
            seed,
            out,
            jobs,
            oracle_samples,
        } => {
            let report = cmd_reproduce(figure, seed, &out, jobs, oracle_samples)?;
            println!("{}", report.summary());
            Ok(if report.pass { EXIT_OK } else { EXIT_PROPERTY })
        }
        Command::Check { gateset } => {
            let extra = match gateset {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?;
                    Some(
                        GateSet::from_json_unchecked(&text)
                            .map_err(|e| CliError::new(EXIT_CONFIG, e))?,
                    )
                }
                None => None,
            };
            let outcomes = cmd_check(extra.as_ref());
            for o in &outcomes {
                println!(
                    "{} {}: {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.name,
                    o.detail
                );
            }
            Ok(if outcomes.iter().all(|o| o.pass) {
                EXIT_OK
            } else {
                EXIT_PROPERTY
            })
        }
    }
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    shots: Option<u64>,
) -> CliResult<(Experiment, ExperimentConfig)> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if shots.is_some() {
        cfg.shots = shots;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let exp =
        Experiment::from_config(cfg.clone(), base).map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    Ok((exp, cfg))
}

fn write_dataset(out: &mut OutDir, ds: &DecayDataset) -> CliResult<()> {
    out.write("decay.csv", &ds.to_csv())?;
    out.write("decay.json", &to_json(ds))
}

pub fn cmd_simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    shots: Option<u64>,
    jobs: usize,
) -> CliResult<DecayDataset> {
    let started = Instant::now();
    let (exp, cfg) = load_config(config, seed, shots)?;
    let ds = exp
        .run(jobs)
        .map_err(|e| CliError::new(EXIT_SIMULATION, e))?;
    let mut dir = OutDir::create(out)?;
    write_dataset(&mut dir, &ds)?;
    let mut manifest = RunManifest::new("simulate", Some(cfg));
    manifest.inputs.push(config.display().to_string());
    dir.finish(manifest, started)?;
    Ok(ds)
}

/// Reads `m,mean,sem,n` CSV, or the JSON written by `simulate`.
pub fn load_dataset(path: &Path) -> Result<DecayDataset> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        DecayDataset::from_csv(&text)
    }
}

#[derive(Serialize)]
struct FitFailure<'a> {
    model: ModelKind,
    converged: bool,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    dataset: &'a str,
}

pub fn cmd_fit(
    dataset: &Path,
    model: ModelKind,
    out: &Path,
    weighted: bool,
) -> CliResult<FitResult> {
    let started = Instant::now();
    let ds = load_dataset(dataset)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", dataset.display())))?;
    let mut dir = OutDir::create(out)?;
    let mut manifest = RunManifest::new("fit", None);
    manifest.inputs.push(dataset.display().to_string());
    let opts = FitOptions {
        weighted,
        ..FitOptions::default()
    };
    match fit_with(model, &ds, &opts) {
        Ok(fit) => {
            dir.write("fit.json", &to_json(&fit.to_json_value()))?;
            dir.finish(manifest, started)?;
            Ok(fit)
        }
        Err(e) => {
            let iterations = match &e {
                Error::NoConvergence { iterations, .. } => Some(*iterations),
                _ => None,
            };
            let failure = FitFailure {
                model,
                converged: false,
                error: e.to_string(),
                iterations,
                dataset: &dataset.display().to_string(),
            };
            dir.write("fit.json", &to_json(&failure))?;
            dir.finish(manifest, started)?;
            Err(CliError::new(EXIT_FIT, e))
        }
    }
}

/// Reference values for a figure, reported side by side only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceInstance {
    pub fitted: f64,
    pub fitted_stderr: f64,
    pub oracle: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproductionReport {
    pub figure: Figure,
    pub seed: u64,
    pub model: ModelKind,
    pub quantity: String,
    pub fitted: Estimate,
    pub r2: Option<f64>,
    pub oracle: Oracle,
    pub deviation: f64,
    /// `|deviation| / stderr`.
    pub deviation_sigmas: f64,
    pub tolerance_sigmas: f64,
    pub pass: bool,
    /// Mean filter strength of the drawn parameters (fig1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_p: Option<f64>,
    pub reference_instance: ReferenceInstance,
}

impl ReproductionReport {
    pub fn summary(&self) -> String {
        format!(
            "{} {:?}: {} = {:.5} ± {:.1e} vs oracle {:.5} ({:.2}σ), r² = {}; reference {:.4}({}) vs {:.4}, r² {:.4}",
            if self.pass { "PASS" } else { "FAIL" },
            self.figure,
            self.quantity,
            self.fitted.value,
            self.fitted.stderr,
            self.oracle.value,
            self.deviation_sigmas,
            self.r2.map_or("undefined".into(), |r| format!("{r:.4}")),
            self.reference_instance.fitted,
            self.reference_instance.fitted_stderr,
            self.reference_instance.oracle,
            self.reference_instance.r2,
        )
    }
}

pub struct Reproduction {
    pub config: ExperimentConfig,
    pub dataset: DecayDataset,
    pub fit: FitResult,
    pub report: ReproductionReport,
}

pub fn figure_config(figure: Figure) -> ExperimentConfig {
    let text = match figure {
        Figure::Fig1 => FIG1_CONFIG,
        Figure::Fig2 => FIG2_CONFIG,
    };
    ExperimentConfig::from_toml_str(text).expect("shipped figure configs parse")
}

/// Full pipeline for one figure without touching the filesystem. Errors carry
/// the exit code of the failing stage.
pub fn reproduce(
    figure: Figure,
    seed: Option<u64>,
    jobs: usize,
    oracle_samples: Option<usize>,
) -> CliResult<Reproduction> {
    let mut cfg = figure_config(figure);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let (Some(n), crate::config::NoiseConfig::Shelving { oracle_samples, .. }) =
        (oracle_samples, &mut cfg.noise)
    {
        *oracle_samples = Some(n);
    }
    let exp = Experiment::from_config(cfg.clone(), Path::new("."))
        .map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let dataset = exp
        .run(jobs)
        .map_err(|e| CliError::new(EXIT_SIMULATION, e))?;
    let oracle = exp
        .oracle()
        .map_err(|e| CliError::new(EXIT_SIMULATION, e))?
        .expect("figure configs have an oracle");
    let (model, name, reference) = match figure {
        Figure::Fig1 => (
            ModelKind::SingleExp,
            "s",
            ReferenceInstance {
                fitted: 0.9880,
                fitted_stderr: 0.0002,
                oracle: 0.9879,
                r2: 0.9991,
            },
        ),
        Figure::Fig2 => (
            ModelKind::TpConstrained,
            "lambda",
            ReferenceInstance {
                fitted: 0.992,
                fitted_stderr: 0.002,
                oracle: 0.995,
                r2: 0.9904,
            },
        ),
    };
    let fit = fit_with(model, &dataset, &FitOptions::default())
        .map_err(|e| CliError::new(EXIT_FIT, e))?;
    let fitted = fit.param(name).expect("model has the compared parameter");
    let deviation = fitted.value - oracle.value;
    let deviation_sigmas = deviation.abs() / fitted.stderr;
    let report = ReproductionReport {
        figure,
        seed: cfg.seed,
        model,
        quantity: oracle.quantity.clone(),
        fitted,
        r2: fit.r2,
        deviation,
        deviation_sigmas,
        tolerance_sigmas: REPRODUCTION_SIGMAS,
        pass: deviation.abs() <= REPRODUCTION_SIGMAS * fitted.stderr,
        mean_p: exp.filter_model.as_ref().map(|f| f.mean_p()),
        oracle,
        reference_instance: reference,
    };
    Ok(Reproduction {
        config: cfg,
        dataset,
        fit,
        report,
    })
}

pub fn cmd_reproduce(
    figure: Figure,
    seed: Option<u64>,
    out: &Path,
    jobs: usize,
    oracle_samples: Option<usize>,
) -> CliResult<ReproductionReport> {
    let started = Instant::now();
    let r = reproduce(figure, seed, jobs, oracle_samples)?;
    let mut dir = OutDir::create(out)?;
    write_dataset(&mut dir, &r.dataset)?;
    dir.write("fit.json", &to_json(&r.fit.to_json_value()))?;
    dir.write("report.json", &to_json(&r.report))?;
    dir.finish(RunManifest::new("reproduce", Some(r.config)), started)?;
    Ok(r.report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: impl Into<String>, err: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        pass: err <= tol,
        detail: format!("max deviation {err:.2e} (tol {tol:.0e})"),
    }
}

fn failed(name: impl Into<String>, e: impl std::fmt::Display) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        pass: false,
        detail: e.to_string(),
    }
}

fn check_twirl(gs: &GateSet, closed_form: bool) -> Vec<CheckOutcome> {
    let label = gs.label().to_string();
    match twirl(gs) {
        Ok(t) => {
            let mut v = vec![outcome(
                format!("twirl idempotence [{label}]"),
                t.idempotence_error(),
                CHECK_TOL,
            )];
            if closed_form {
                let err = max_abs_diff(&t.matrix, &gs.predicted_projector());
                v.push(outcome(
                    format!("twirl closed form [{label}]"),
                    err,
                    CHECK_TOL,
                ));
            }
            v
        }
        Err(e) => vec![failed(format!("twirl idempotence [{label}]"), e)],
    }
}

fn check_brute_force(gs: &GateSet, noise: Channel) -> CheckOutcome {
    let name = format!("brute force vs decay formula, m = 1..4 [{}]", gs.label());
    let na = NoiseAssignment::gate_independent(noise, gs.size());
    let spam = Spam::ideal();
    let run = || -> Result<f64> {
        let pred = predict_for(gs, &na, &spam)?;
        let mut worst: f64 = 0.0;
        for m in 1..=4 {
            let exact = brute_force_expectation(m, gs, &na, &spam)?;
            worst = worst.max((exact - pred.at(m)).abs());
        }
        Ok(worst)
    };
    match run() {
        Ok(err) => outcome(name, err, CHECK_TOL),
        Err(e) => failed(name, e),
    }
}

/// Twirl idempotence and closed forms, channel diagnostics, and brute-force
/// enumeration against the decay formula. An extra gate set gets the unitarity,
/// closure and idempotence checks.
pub fn cmd_check(extra: Option<&GateSet>) -> Vec<CheckOutcome> {
    let pauli = GateSet::pauli();
    let shelving = GateSet::shelving();
    let mut out = check_twirl(&pauli, true);
    out.extend(check_twirl(&shelving, true));

    let mut rng = RandomStream::new(0x5eed);
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    for _ in 0..200 {
        let fp = FilterParams::sample(&mut rng);
        match filter_channel(&fp) {
            Ok(ch) => {
                let diag = ch.diagnostics(DEFAULT_TOL);
                all_ok &= diag.is_cp && diag.is_trace_nonincreasing;
                let ev = hermitian_eigenvalues(&ch.kraus_sum());
                worst = worst
                    .max((ev[0] - (1.0 - fp.p)).abs())
                    .max((ev[1] - 1.0).abs());
            }
            Err(_) => all_ok = false,
        }
    }
    let mut o = outcome(
        "filter channel CP, trace non-increasing, spectrum {1, 1-p}",
        worst,
        CHECK_TOL,
    );
    o.pass &= all_ok;
    out.push(o);

    let sp = ShelvingParams::default();
    let worst = (0..200)
        .map(|_| unitarity_deviation(&sample_coherent_unitary(&sp, &mut rng)))
        .fold(0.0, f64::max);
    out.push(outcome(
        "sampled shelving noise is unitary",
        worst,
        CHECK_TOL,
    ));

    let filter = filter_channel(&FilterParams {
        p: 0.04,
        r: [0.6, 0.0, 0.8],
    });
    match filter {
        Ok(ch) => out.push(check_brute_force(&pauli, ch)),
        Err(e) => out.push(failed("brute force vs decay formula [pauli]", e)),
    }
    let strong = ShelvingParams {
        phi: 0.2,
        sigma_gamma: 0.4,
    };
    out.push(check_brute_force(
        &shelving,
        sample_coherent_noise(&strong, &mut rng),
    ));

    if let Some(gs) = extra {
        let label = gs.label().to_string();
        out.push(match gs.check_unitary(DEFAULT_TOL) {
            Ok(()) => outcome(format!("unitarity [{label}]"), 0.0, CHECK_TOL),
            Err(e) => failed(format!("unitarity [{label}]"), e),
        });
        out.push(match gs.check_closure(DEFAULT_TOL) {
            Ok(()) => outcome(format!("closure [{label}]"), 0.0, CHECK_TOL),
            Err(e) => failed(format!("closure [{label}]"), e),
        });
        out.extend(check_twirl(gs, false));
    }
    out
}
