//! Command-line front end.
//!
//! Every verb resolves its parameters in three layers — built-in defaults,
//! then a flat JSON config file (`--config`), then explicit flags — runs the
//! mapped experiment, writes CSV/JSON reports, and prints a one-line summary
//! plus the wall time. The JSON report embeds the fully resolved config;
//! feeding that object back through `--config` reproduces the run
//! byte-for-byte (wall time is printed to stdout only, never written to
//! report files, precisely so reruns stay byte-identical).
//!
//! Exit status: 0 on success, 1 on experiment failure (abort budget, fit
//! rejection, unwritable output), 2 on usage errors (unknown flags, bad
//! parameter values such as `s` outside (1/2, 1)).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::drift::{
    eval_h, make_drift, seminorm_fourier_side, seminorm_refinement, DriftKind,
    FractionalDriftParams, SeminormStudy, DEFAULT_DIVERGENCE_FACTOR,
};
use crate::experiments::{
    estimate_coupling_distance, estimate_euler_rate, kappa_mc, occupation_mismatch,
    transform_consistency, CouplingSeries, ExperimentConfig, ExperimentError, OccupationSeries,
    RateFit, RateSeries, TransformCheckSeries, DEFAULT_STEPS_PER_UNIT,
};
use crate::noise::{make_tilde_grid, RngStream};

/// Environment variable selecting the worker-thread count (0 or unset =
/// one worker per core). Thread count never changes any report byte.
pub const THREADS_ENV: &str = "SDELAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "sdelab",
    version,
    about = "Laboratory for strong approximation of SDEs with rough drift"
)]
pub struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Strong Euler error against a fine reference, with a log-log rate fit.
    Rate(RunArgs),
    /// Coupling distance between solutions driven by noise agreeing on a
    /// coarse grid, and the half-distance fooling lower bound.
    Couple(RunArgs),
    /// Second moment of the kappa functional: quadrature vs Monte Carlo.
    Kappa(RunArgs),
    /// Occupation-time mismatch between the solution and its driftless
    /// proxy over short windows.
    Occupation(RunArgs),
    /// Consistency of the additive route with the transformed
    /// multiplicative route under grid refinement.
    TransformCheck(RunArgs),
    /// Fractional-Sobolev seminorm study of a drift.
    Sobolev(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat JSON config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drift: mu-s | indicator | hat | zero | constant=<c>.
    #[arg(long)]
    drift: Option<String>,
    /// Roughness parameter of the mu-s drift, in (1/2, 1); also the order
    /// probed by `sobolev`.
    #[arg(long)]
    s: Option<f64>,
    /// Initial value of the SDE.
    #[arg(long)]
    x0: Option<f64>,
    /// Error exponent p >= 1 (rate verb) / seminorm integrability (sobolev).
    #[arg(long)]
    p: Option<f64>,
    /// Coarse resolutions, comma separated (rate, couple).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Fine-grid step count.
    #[arg(long)]
    fine_steps: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report base path; `.csv` / `.json` are appended.
    #[arg(long)]
    out: Option<String>,
    /// Which report files to write.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// kappa: frequency z.
    #[arg(long)]
    z: Option<f64>,
    /// occupation: level xi.
    #[arg(long)]
    xi: Option<f64>,
    /// occupation: window lengths, comma separated, in (0, 1].
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// occupation: fine steps per unit time.
    #[arg(long)]
    steps_per_unit: Option<usize>,
    /// transform-check: number of successive grid doublings.
    #[arg(long)]
    doublings: Option<usize>,
}

/// The flat config: exactly the long flags, as JSON. The resolved form of
/// this struct is echoed into every JSON report under `"config"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fine_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps_per_unit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doublings: Option<usize>,
}

impl RunConfig {
    /// Field-wise override: anything set in `over` wins.
    fn merged_under(self, over: RunConfig) -> RunConfig {
        RunConfig {
            drift: over.drift.or(self.drift),
            s: over.s.or(self.s),
            x0: over.x0.or(self.x0),
            p: over.p.or(self.p),
            n_list: over.n_list.or(self.n_list),
            fine_steps: over.fine_steps.or(self.fine_steps),
            reps: over.reps.or(self.reps),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            z: over.z.or(self.z),
            xi: over.xi.or(self.xi),
            deltas: over.deltas.or(self.deltas),
            steps_per_unit: over.steps_per_unit.or(self.steps_per_unit),
            doublings: over.doublings.or(self.doublings),
        }
    }
}

impl RunArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            drift: self.drift.clone(),
            s: self.s,
            x0: self.x0,
            p: self.p,
            n_list: self.n_list.clone(),
            fine_steps: self.fine_steps,
            reps: self.reps,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            z: self.z,
            xi: self.xi,
            deltas: self.deltas.clone(),
            steps_per_unit: self.steps_per_unit,
            doublings: self.doublings,
        }
    }
}

fn defaults(verb: &Verb) -> RunConfig {
    let mut c = RunConfig {
        drift: Some("mu-s".into()),
        s: Some(0.75),
        x0: Some(0.0),
        p: Some(2.0),
        seed: Some(42),
        format: Some(Format::Both),
        ..RunConfig::default()
    };
    match verb {
        Verb::Rate(_) => {
            c.n_list = Some(vec![16, 32, 64, 128, 256, 512, 1024]);
            c.fine_steps = Some(1 << 14);
            c.reps = Some(10_000);
            c.out = Some("rate_report".into());
        }
        Verb::Couple(_) => {
            c.n_list = Some(vec![8, 16, 32, 64, 128, 256]);
            c.fine_steps = Some(1 << 12);
            c.reps = Some(10_000);
            c.out = Some("couple_report".into());
        }
        Verb::Kappa(_) => {
            c.z = Some(1.0);
            c.fine_steps = Some(1 << 12);
            c.reps = Some(100_000);
            c.out = Some("kappa_report".into());
        }
        Verb::Occupation(_) => {
            c.xi = Some(0.0);
            c.deltas = Some(vec![
                1.0 / 128.0,
                1.0 / 64.0,
                1.0 / 32.0,
                1.0 / 16.0,
                1.0 / 8.0,
            ]);
            c.steps_per_unit = Some(DEFAULT_STEPS_PER_UNIT);
            c.reps = Some(100_000);
            c.out = Some("occupation_report".into());
        }
        Verb::TransformCheck(_) => {
            c.fine_steps = Some(1 << 12);
            c.doublings = Some(2);
            c.reps = Some(1_000);
            c.out = Some("transform_check_report".into());
        }
        Verb::Sobolev(_) => {
            c.out = Some("sobolev_report".into());
        }
    }
    c
}

#[derive(Debug)]
enum CliError {
    /// Bad invocation: exit 2.
    Usage(String),
    /// The run itself failed: exit 1.
    Run(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn classify(e: ExperimentError) -> CliError {
    match &e {
        // Parameter problems are usage errors; failures mid-run are not.
        ExperimentError::InvalidConfig(_)
        | ExperimentError::Drift(_)
        | ExperimentError::Noise(_)
        | ExperimentError::Transform(_) => CliError::Usage(e.to_string()),
        ExperimentError::Solver(_)
        | ExperimentError::TooManyAborts { .. }
        | ExperimentError::FitRejected(_) => CliError::Run(e.to_string()),
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(&cli.verb) {
        Ok(summary) => {
            println!("{summary}");
            println!("wall time: {:.2}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(verb: &Verb) -> Result<String, CliError> {
    let args = match verb {
        Verb::Rate(a)
        | Verb::Couple(a)
        | Verb::Kappa(a)
        | Verb::Occupation(a)
        | Verb::TransformCheck(a)
        | Verb::Sobolev(a) => a,
    };
    let mut cfg = defaults(verb);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: RunConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("malformed config {}: {e}", path.display())))?;
        cfg = cfg.merged_under(file);
    }
    cfg = cfg.merged_under(args.as_config());
    let threads = threads_from_env()?;
    match verb {
        Verb::Rate(_) => run_rate(cfg, threads),
        Verb::Couple(_) => run_couple(cfg, threads),
        Verb::Kappa(_) => run_kappa(cfg, threads),
        Verb::Occupation(_) => run_occupation(cfg, threads),
        Verb::TransformCheck(_) => run_transform_check(cfg, threads),
        Verb::Sobolev(_) => run_sobolev(cfg, threads),
    }
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            usage(format!(
                "{THREADS_ENV} must be a nonnegative integer, got {v:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(usage(format!("{THREADS_ENV}: {e}"))),
    }
}

fn parse_drift(cfg: &RunConfig) -> Result<DriftKind, CliError> {
    let name = cfg.drift.as_deref().unwrap_or("mu-s");
    match name {
        "mu-s" => {
            let s = cfg.s.unwrap_or(0.75);
            let params = FractionalDriftParams::new(s).map_err(|e| usage(e.to_string()))?;
            Ok(DriftKind::MuS(params))
        }
        "indicator" => Ok(DriftKind::Indicator01),
        "hat" => Ok(DriftKind::Hat),
        "zero" => Ok(DriftKind::Zero),
        other => {
            if let Some(v) = other.strip_prefix("constant=") {
                let c: f64 = v
                    .parse()
                    .map_err(|_| usage(format!("constant drift value {v:?} is not a number")))?;
                if !c.is_finite() {
                    return Err(usage(format!("constant drift value {c} is not finite")));
                }
                Ok(DriftKind::Constant(c))
            } else {
                Err(usage(format!(
                    "unknown drift {other:?} (expected mu-s | indicator | hat | zero | constant=<c>)"
                )))
            }
        }
    }
}

fn experiment_config(cfg: &RunConfig) -> Result<ExperimentConfig, CliError> {
    let ec = ExperimentConfig {
        drift: parse_drift(cfg)?,
        x0: cfg.x0.unwrap_or(0.0),
        p: cfg.p.unwrap_or(2.0),
        n_list: cfg.n_list.clone().unwrap_or_default(),
        fine_steps: cfg.fine_steps.unwrap_or(0),
        reps: cfg.reps.unwrap_or(0),
        seed: cfg.seed.unwrap_or(42),
        out: cfg.out.clone(),
    };
    // Surface parameter mistakes as usage errors before any work starts.
    ec.validate().map_err(classify)?;
    Ok(ec)
}

/// `{ config, result }` document written as the JSON report.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a RunConfig,
    result: &'a T,
}

fn write_reports<T: Serialize>(
    cfg: &RunConfig,
    csv: &str,
    result: &T,
) -> Result<Vec<String>, CliError> {
    let base = cfg.out.as_deref().expect("out has a default");
    let format = cfg.format.unwrap_or(Format::Both);
    let mut written = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let path = format!("{base}.csv");
        fs::write(&path, csv).map_err(|e| CliError::Run(format!("cannot write {path}: {e}")))?;
        written.push(path);
    }
    if matches!(format, Format::Json | Format::Both) {
        let doc = Report {
            config: cfg,
            result,
        };
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Run(format!("serialization failed: {e}")))?;
        let path = format!("{base}.json");
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Run(format!("cannot write {path}: {e}")))?;
        written.push(path);
    }
    Ok(written)
}

fn fit_summary(fit: &RateFit) -> String {
    match fit {
        RateFit::Exact => "exact (errors all zero)".to_string(),
        RateFit::Fitted {
            slope,
            slope_stderr,
            ..
        } => format!("slope {slope:.4} ± {slope_stderr:.4}"),
    }
}

fn finish(summary: String, written: &[String]) -> String {
    if written.is_empty() {
        summary
    } else {
        format!("{summary}\nwrote {}", written.join(", "))
    }
}

fn run_rate(cfg: RunConfig, threads: usize) -> Result<String, CliError> {
    let ec = experiment_config(&cfg)?;
    let series: RateSeries = estimate_euler_rate(&ec, threads).map_err(classify)?;
    let kept = ec.reps - series.aborted;
    let mut csv = String::from("n,error,stderr,reps\n");
    for e in &series.entries {
        let _ = writeln!(csv, "{},{},{},{}", e.n, e.error, e.stderr, kept);
    }
    let written = write_reports(&cfg, &csv, &series)?;
    let summary = format!(
        "euler rate ({}): {}; {} aborted",
        drift_label(&ec),
        fit_summary(&series.fit),
        series.aborted
    );
    Ok(finish(summary, &written))
}

fn run_couple(cfg: RunConfig, threads: usize) -> Result<String, CliError> {
    let ec = experiment_config(&cfg)?;
    let series: CouplingSeries =
        estimate_coupling_distance(&ec, &make_tilde_grid, threads).map_err(classify)?;
    let kept = ec.reps - series.aborted;
    let mut csv = String::from("n,error,stderr,reps\n");
    for e in &series.entries {
        let _ = writeln!(csv, "{},{},{},{}", e.n, e.error, e.stderr, kept);
    }
    let written = write_reports(&cfg, &csv, &series)?;
    let summary = format!(
        "coupling distance ({}): {}; fooling bound = distance/2; {} aborted",
        drift_label(&ec),
        fit_summary(&series.fit),
        series.aborted
    );
    Ok(finish(summary, &written))
}

fn run_kappa(cfg: RunConfig, threads: usize) -> Result<String, CliError> {
    let z = cfg.z.unwrap_or(1.0);
    let reps = cfg.reps.unwrap_or(100_000);
    let fine_steps = cfg.fine_steps.unwrap_or(1 << 12);
    let seed = cfg.seed.unwrap_or(42);
    let report = kappa_mc(
        z,
        reps,
        fine_steps,
        RngStream::new(seed, crate::experiments::STREAM_KAPPA),
        threads,
    )
    .map_err(classify)?;
    let csv = format!(
        "z,quadrature,mc_value,mc_stderr,reps\n{},{},{},{},{}\n",
        report.z, report.quadrature_value, report.mc_value, report.mc_stderr, reps
    );
    let written = write_reports(&cfg, &csv, &report)?;
    let agree = (report.mc_value - report.quadrature_value).abs() <= 3.0 * report.mc_stderr;
    let summary = format!(
        "kappa second moment at z={}: quadrature {:.8}, mc {:.8} ± {:.8} -> {}",
        report.z,
        report.quadrature_value,
        report.mc_value,
        report.mc_stderr,
        if agree {
            "agreement within 3 standard errors"
        } else {
            "DISAGREEMENT beyond 3 standard errors"
        }
    );
    Ok(finish(summary, &written))
}

fn run_occupation(cfg: RunConfig, threads: usize) -> Result<String, CliError> {
    let drift = parse_drift(&cfg)?;
    let mu = make_drift(drift).map_err(|e| usage(e.to_string()))?;
    let x0 = cfg.x0.unwrap_or(0.0);
    let xi = cfg.xi.unwrap_or(0.0);
    let deltas = cfg.deltas.clone().unwrap_or_default();
    let reps = cfg.reps.unwrap_or(100_000);
    let spu = cfg.steps_per_unit.unwrap_or(DEFAULT_STEPS_PER_UNIT);
    let seed = cfg.seed.unwrap_or(42);
    let series: OccupationSeries = occupation_mismatch(
        &mu,
        x0,
        xi,
        &deltas,
        reps,
        RngStream::new(seed, crate::experiments::STREAM_OCCUPATION),
        spu,
        threads,
    )
    .map_err(classify)?;
    let kept = reps - series.aborted;
    let mut csv = String::from("delta,second_moment,stderr,reps\n");
    for e in &series.entries {
        let _ = writeln!(csv, "{},{},{},{}", e.delta, e.second_moment, e.stderr, kept);
    }
    let written = write_reports(&cfg, &csv, &series)?;
    let summary = format!(
        "occupation mismatch ({}, xi={}): {}; {} aborted",
        mu.label,
        xi,
        fit_summary(&series.fit),
        series.aborted
    );
    Ok(finish(summary, &written))
}

fn run_transform_check(cfg: RunConfig, threads: usize) -> Result<String, CliError> {
    let mut with_n = cfg.clone();
    // transform-check has no coarse-resolution axis; satisfy the shared
    // validator with the trivial list.
    with_n.n_list = Some(vec![1]);
    let ec = experiment_config(&with_n)?;
    let doublings = cfg.doublings.unwrap_or(2);
    let series: TransformCheckSeries =
        transform_consistency(&ec, doublings, threads).map_err(classify)?;
    let kept = ec.reps - series.aborted;
    let mut csv = String::from("fine_steps,mean_abs_diff,stderr,reps\n");
    for e in &series.entries {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            e.fine_steps, e.mean_abs_diff, e.stderr, kept
        );
    }
    let written = write_reports(&cfg, &csv, &series)?;
    let means: Vec<String> = series
        .entries
        .iter()
        .map(|e| format!("{:.3e}", e.mean_abs_diff))
        .collect();
    let summary = format!(
        "transform consistency ({}): mean |G(X1)-Y1| {} across doublings ({}); {} aborted",
        drift_label(&ec),
        if series.decreasing {
            "decreases"
        } else {
            "DOES NOT decrease"
        },
        means.join(" -> "),
        series.aborted
    );
    Ok(finish(summary, &written))
}

/// Result document for the `sobolev` verb.
#[derive(Serialize)]
struct SobolevResult {
    order: f64,
    p: f64,
    half_width: f64,
    direct: SeminormStudy,
    /// Fourier-side truncated integrals (mu-s only, where the transform is
    /// known in closed form), one per cutoff.
    #[serde(skip_serializing_if = "Option::is_none")]
    fourier: Option<FourierSide>,
}

#[derive(Serialize)]
struct FourierSide {
    cutoffs: Vec<f64>,
    values: Vec<f64>,
}

fn run_sobolev(cfg: RunConfig, _threads: usize) -> Result<String, CliError> {
    let drift = parse_drift(&cfg)?;
    let mu = make_drift(drift).map_err(|e| usage(e.to_string()))?;
    let order = cfg.s.unwrap_or(0.75);
    let p = cfg.p.unwrap_or(2.0);
    let half_width = 8.0;
    let direct = seminorm_refinement(&mu, order, p, half_width, 512, 4, DEFAULT_DIVERGENCE_FACTOR)
        .map_err(|e| usage(e.to_string()))?;
    let fourier = if matches!(mu.kind(), DriftKind::MuS(_)) && p == 2.0 {
        let cutoffs = vec![25.0, 50.0, 100.0];
        let mut values = Vec::with_capacity(cutoffs.len());
        for &c in &cutoffs {
            values.push(
                seminorm_fourier_side(order, &|x| eval_h(order, x).unwrap_or(0.0), c)
                    .map_err(|e| usage(e.to_string()))?,
            );
        }
        Some(FourierSide { cutoffs, values })
    } else {
        None
    };
    let mut csv = String::from("cells,mesh,value,alpha_hat,band_bound\n");
    for e in &direct.estimates {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            e.cells, e.mesh, e.value, e.alpha_hat, e.band_bound
        );
    }
    let result = SobolevResult {
        order,
        p,
        half_width,
        direct,
        fourier,
    };
    let written = write_reports(&cfg, &csv, &result)?;
    let growths: Vec<String> = result
        .direct
        .growth
        .iter()
        .map(|g| format!("{g:.4}"))
        .collect();
    let mut summary = format!(
        "seminorm study ({}, order {}, p {}): {} (per-doubling growth {})",
        mu.label,
        order,
        p,
        if result.direct.diverging {
            "DIVERGING under refinement"
        } else {
            "stable under refinement"
        },
        growths.join(", ")
    );
    if let Some(f) = &result.fourier {
        let _ = write!(
            summary,
            "; fourier-side {:.6} at cutoff {}",
            f.values.last().unwrap(),
            f.cutoffs.last().unwrap()
        );
    }
    Ok(finish(summary, &written))
}

fn drift_label(ec: &ExperimentConfig) -> String {
    match &ec.drift {
        DriftKind::MuS(p) => format!("mu_s(s={})", p.s),
        DriftKind::Indicator01 => "indicator_01".into(),
        DriftKind::Hat => "hat".into(),
        DriftKind::Zero => "zero".into(),
        DriftKind::Constant(c) => format!("constant({c})"),
    }
}
