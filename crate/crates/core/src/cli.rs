//! Command-line front end: `lum <command> [flags]`.
//!
//! Every command also reads an optional JSON config (`--config`) of the form
//! `{"seed": 0, "out": "...", "format": "json", "<command>": {...}}`, where the
//! command section uses the long flag names in snake_case. Flags win over the
//! file. Payloads go to `--out` or stdout; summaries go to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    make_hdlss_gaussians, make_tsybakov_distribution, sample_from, DiscreteJoint, SampleSet,
};
use crate::error::LumError;
use crate::loss::{ExtendedParam, LumParams};
use crate::numeric::fmt_f64;
use crate::pointwise::{
    excess_at_zero, excess_derivative, excess_lower_bound, minimal_risk, minimizer,
};
use crate::risk::{risk_report, ScoreFunction};
use crate::trainer::{
    empirical_risk, fit, piling_experiment, training_error, LineSearch, LinearModel, PilingConfig,
    PilingReport, TrainConfig,
};
use crate::verifier::{
    comparison_bound, noise_comparison_bound, random_trial_sweep_with_rows, write_trial_rows,
    ComparisonBound, FGenerator, NoiseSpec, SweepConfig, TrialRow, VerificationReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "lum",
    version,
    about = "LUM loss family: comparison-bound checks, tabulation and training"
)]
struct Cli {
    /// master random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// write the payload here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run randomized sweeps of the comparison bounds (exit 1 on any violation)
    Verify(VerifyArgs),
    /// Tabulate f_P, minimal risk, g, g' and the lower bound of g over an eta grid
    Tabulate(TabulateArgs),
    /// Fit a linear LUM classifier
    Train(TrainArgs),
    /// Evaluate a saved model against a distribution or a sample
    Evaluate(EvaluateArgs),
    /// Compare data piling of a smooth and a near-hinge loss on HDLSS data
    Piling(PilingArgs),
    /// Draw samples or construct distributions
    Sample(SampleArgs),
}

/// Fills every `None` field of `$flags` from `$file`.
macro_rules! overlay {
    ($flags:expr, $file:expr, [$($field:ident),* $(,)?]) => {{
        let mut merged = $flags;
        if let Some(file) = $file {
            $(
                if merged.$field.is_none() {
                    merged.$field = file.$field;
                }
            )*
        }
        merged
    }};
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyArgs {
    /// loss parameter p (number or `inf`); selects a single regime
    #[arg(long)]
    p: Option<ExtendedParam>,
    /// loss parameter q (number or `inf`); selects a single regime
    #[arg(long)]
    q: Option<ExtendedParam>,
    /// trials per sweep
    #[arg(long)]
    trials: Option<usize>,
    /// noise exponent; checks the noise-conditioned bound (needs p = 0)
    #[arg(long)]
    tau: Option<f64>,
    /// noise constant (default 1)
    #[arg(long)]
    c_tau: Option<f64>,
    #[arg(long)]
    atoms_min: Option<usize>,
    #[arg(long)]
    atoms_max: Option<usize>,
    /// score generator: mixed, uniform, flipped_minimizer, zero_on_subset,
    /// piecewise, minimizer, bayes_rule
    #[arg(long)]
    generator: Option<FGenerator>,
    /// also write one CSV row per trial to this file
    #[arg(long)]
    rows: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulateArgs {
    #[arg(long)]
    p: Option<ExtendedParam>,
    #[arg(long)]
    q: Option<ExtendedParam>,
    /// number of eta grid points on [0, 1] (default 101)
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainArgs {
    /// training sample (JSON, or CSV by extension)
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    p: Option<ExtendedParam>,
    #[arg(long)]
    q: Option<ExtendedParam>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// write the optimization trace as CSV to this file
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(skip)]
    line_search: Option<LineSearch>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateArgs {
    /// model JSON written by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// exact evaluation against this distribution
    #[arg(long)]
    dist: Option<PathBuf>,
    /// empirical evaluation against this sample
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    p: Option<ExtendedParam>,
    #[arg(long)]
    q: Option<ExtendedParam>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct PilingArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    /// seeds used are seed, seed + 1, ..., seed + n_seeds - 1
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon_fraction: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(skip)]
    smooth: Option<LumParams>,
    #[arg(skip)]
    near_hinge: Option<LumParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SampleKind {
    /// i.i.d. draws from `--dist`
    Joint,
    /// two Gaussian clouds
    Hdlss,
    /// a distribution satisfying the noise condition
    Tsybakov,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleArgs {
    /// default: joint when --dist is given, hdlss otherwise
    #[arg(long, value_enum)]
    kind: Option<SampleKind>,
    #[arg(long)]
    dist: Option<PathBuf>,
    /// sample size for `joint` (default 1000)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    c_tau: Option<f64>,
    #[arg(long)]
    atoms: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    verify: Option<VerifyArgs>,
    tabulate: Option<TabulateArgs>,
    train: Option<TrainArgs>,
    evaluate: Option<EvaluateArgs>,
    piling: Option<PilingArgs>,
    sample: Option<SampleArgs>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<LumError> for CliError {
    fn from(e: LumError) -> Self {
        match e {
            LumError::Numerical(_) | LumError::NoiseConditionFailed(_) => {
                CliError::Failure(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

struct Globals {
    seed: u64,
    format: Option<Format>,
}

impl Globals {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

struct Outcome {
    payload: Vec<u8>,
    code: i32,
    summary: String,
}

impl Outcome {
    fn ok(payload: Vec<u8>, summary: String) -> Self {
        Outcome {
            payload,
            code: EXIT_OK,
            summary,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let (out, result) = match load_config(cli.config.as_deref()) {
        Ok(file) => {
            let out = cli.out.clone().or_else(|| file.out.clone());
            (out, execute(cli, file))
        }
        Err(e) => (None, Err(e)),
    };
    match result {
        Ok(outcome) => {
            let written = match &out {
                Some(path) => std::fs::write(path, &outcome.payload)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => stdout
                    .write_all(&outcome.payload)
                    .map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(stderr, "error: {msg}");
                return EXIT_USAGE;
            }
            if !outcome.summary.is_empty() {
                let _ = writeln!(stderr, "{}", outcome.summary);
            }
            outcome.code
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nFor usage, run `lum --help`.");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(stderr, "failure: {msg}");
            EXIT_FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn execute(cli: Cli, file: ConfigFile) -> CliResult<Outcome> {
    let globals = Globals {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        format: cli.format.or(file.format),
    };
    match cli.command {
        Command::Verify(args) => {
            let args = overlay!(
                args,
                file.verify,
                [p, q, trials, tau, c_tau, atoms_min, atoms_max, generator, rows]
            );
            cmd_verify(args, &globals)
        }
        Command::Tabulate(args) => {
            let args = overlay!(args, file.tabulate, [p, q, resolution]);
            cmd_tabulate(args, &globals)
        }
        Command::Train(args) => {
            let args = overlay!(
                args,
                file.train,
                [data, p, q, lambda, max_iters, grad_tol, trace, line_search]
            );
            cmd_train(args, &globals)
        }
        Command::Evaluate(args) => {
            let args = overlay!(args, file.evaluate, [model, dist, data, p, q]);
            cmd_evaluate(args, &globals)
        }
        Command::Piling(args) => {
            let args = overlay!(
                args,
                file.piling,
                [
                    dim,
                    n_per_class,
                    separation,
                    n_seeds,
                    lambda,
                    epsilon_fraction,
                    max_iters,
                    smooth,
                    near_hinge
                ]
            );
            cmd_piling(args, &globals)
        }
        Command::Sample(args) => {
            let args = overlay!(
                args,
                file.sample,
                [
                    kind,
                    dist,
                    n,
                    dim,
                    n_per_class,
                    separation,
                    tau,
                    c_tau,
                    atoms
                ]
            );
            cmd_sample(args, &globals)
        }
    }
}

fn json_payload<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_payload(write: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> CliResult<Vec<u8>> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(bytes)
}

fn params_from(p: Option<ExtendedParam>, q: Option<ExtendedParam>) -> CliResult<LumParams> {
    Ok(LumParams::new(
        p.unwrap_or(ExtendedParam::Finite(1.0)),
        q.unwrap_or(ExtendedParam::Finite(1.0)),
    )?)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn load_joint(path: &Path) -> CliResult<DiscreteJoint> {
    let reader = open(path)?;
    if is_csv(path) {
        DiscreteJoint::read_csv(reader).map_err(|e| input_error(path, e))
    } else {
        serde_json::from_reader(reader).map_err(|e| input_error(path, e))
    }
}

fn load_samples(path: &Path) -> CliResult<SampleSet> {
    let reader = open(path)?;
    if is_csv(path) {
        SampleSet::read_csv(reader).map_err(|e| input_error(path, e))
    } else {
        serde_json::from_reader(reader).map_err(|e| input_error(path, e))
    }
}

fn load_model(path: &Path) -> CliResult<LinearModel> {
    serde_json::from_reader(open(path)?).map_err(|e| input_error(path, e))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

struct SweepPlan {
    label: String,
    bound: ComparisonBound,
    noise: Option<NoiseSpec>,
    config: SweepConfig,
}

#[derive(Serialize)]
struct SweepSummary {
    label: String,
    bound: ComparisonBound,
    params: Vec<LumParams>,
    tau: Option<f64>,
    c_tau: Option<f64>,
    report: VerificationReport,
}

#[derive(Serialize)]
struct VerifyOutput {
    seed: u64,
    total_trials: usize,
    total_violations: usize,
    sweeps: Vec<SweepSummary>,
}

const DEFAULT_P: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
const DEFAULT_Q: [ExtendedParam; 4] = [
    ExtendedParam::Finite(0.5),
    ExtendedParam::Finite(1.0),
    ExtendedParam::Finite(2.0),
    ExtendedParam::Infinite,
];
const DEFAULT_TAU: [f64; 3] = [0.5, 1.0, 2.0];
const DEFAULT_C_TAU: [f64; 2] = [0.5, 1.0];

fn verify_plans(args: &VerifyArgs) -> CliResult<Vec<SweepPlan>> {
    let generator = args.generator.unwrap_or_default();
    let plain = |label: String, params_list: Vec<LumParams>| SweepPlan {
        label,
        bound: comparison_bound(&params_list[0]),
        noise: None,
        config: SweepConfig {
            n_trials: args.trials.unwrap_or(10_000),
            atom_range: (1, 40),
            params_list,
            tau_list: Vec::new(),
            f_generator: generator,
        },
    };
    let noisy = |q: ExtendedParam, spec: NoiseSpec| -> CliResult<SweepPlan> {
        Ok(SweepPlan {
            label: format!("p=0 q={q} tau={} c_tau={}", spec.tau, spec.c_tau),
            bound: noise_comparison_bound(q, spec.tau, spec.c_tau)?,
            noise: Some(spec),
            config: SweepConfig {
                n_trials: args.trials.unwrap_or(1_000),
                atom_range: (1, 200),
                params_list: vec![LumParams::new(ExtendedParam::Finite(0.0), q)?],
                tau_list: vec![spec],
                f_generator: generator,
            },
        })
    };
    if args.c_tau.is_some() && args.tau.is_none() {
        return usage("--c-tau requires --tau");
    }
    let mut plans = Vec::new();
    if let Some(tau) = args.tau {
        let p = args.p.unwrap_or(ExtendedParam::Finite(0.0));
        if p != ExtendedParam::Finite(0.0) {
            return usage(format!(
                "the noise-conditioned bound needs p = 0, got p = {p}"
            ));
        }
        let q = args.q.unwrap_or(ExtendedParam::Finite(1.0));
        plans.push(noisy(
            q,
            NoiseSpec {
                tau,
                c_tau: args.c_tau.unwrap_or(1.0),
            },
        )?);
    } else if args.p.is_some() || args.q.is_some() {
        let params = params_from(args.p, args.q)?;
        plans.push(plain(
            format!("p={} q={}", params.p(), params.q()),
            vec![params],
        ));
    } else {
        for p in DEFAULT_P {
            let list = DEFAULT_Q
                .iter()
                .map(|&q| LumParams::new(ExtendedParam::Finite(p), q))
                .collect::<crate::Result<Vec<_>>>()?;
            plans.push(plain(format!("p={p}"), list));
        }
        for q in DEFAULT_Q {
            let params = LumParams::new(ExtendedParam::Finite(0.0), q)?;
            plans.push(plain(format!("p=0 q={q}"), vec![params]));
        }
        plans.push(plain("p=inf".into(), vec![LumParams::hinge(1.0)?]));
        for q in DEFAULT_Q {
            for tau in DEFAULT_TAU {
                for c_tau in DEFAULT_C_TAU {
                    plans.push(noisy(q, NoiseSpec { tau, c_tau })?);
                }
            }
        }
    }
    for plan in &mut plans {
        let (lo, hi) = plan.config.atom_range;
        plan.config.atom_range = (args.atoms_min.unwrap_or(lo), args.atoms_max.unwrap_or(hi));
    }
    Ok(plans)
}

fn cmd_verify(args: VerifyArgs, globals: &Globals) -> CliResult<Outcome> {
    let plans = verify_plans(&args)?;
    let mut sweeps = Vec::with_capacity(plans.len());
    let mut all_rows: Vec<TrialRow> = Vec::new();
    for plan in plans {
        let (report, rows) = random_trial_sweep_with_rows(&plan.config, globals.seed)?;
        if args.rows.is_some() {
            all_rows.extend(rows);
        }
        sweeps.push(SweepSummary {
            label: plan.label,
            bound: plan.bound,
            params: plan.config.params_list,
            tau: plan.noise.map(|s| s.tau),
            c_tau: plan.noise.map(|s| s.c_tau),
            report,
        });
    }
    if let Some(path) = &args.rows {
        let file = File::create(path).map_err(|e| input_error(path, e))?;
        write_trial_rows(&all_rows, std::io::BufWriter::new(file))?;
    }
    let output = VerifyOutput {
        seed: globals.seed,
        total_trials: sweeps.iter().map(|s| s.report.trials).sum(),
        total_violations: sweeps.iter().map(|s| s.report.violations).sum(),
        sweeps,
    };
    let payload = match globals.format_or(Format::Json) {
        Format::Json => json_payload(&output)?,
        Format::Csv => csv_payload(|buf| {
            let mut out = csv::Writer::from_writer(buf);
            out.write_record([
                "label",
                "regime",
                "constant",
                "exponent",
                "tau",
                "c_tau",
                "trials",
                "violations",
                "min_slack",
                "max_ratio",
                "seed",
            ])?;
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            for s in &output.sweeps {
                out.write_record([
                    s.label.clone(),
                    s.bound.regime.name().to_string(),
                    fmt_f64(s.bound.constant),
                    fmt_f64(s.bound.exponent),
                    opt(s.tau),
                    opt(s.c_tau),
                    s.report.trials.to_string(),
                    s.report.violations.to_string(),
                    fmt_f64(s.report.min_slack),
                    fmt_f64(s.report.max_ratio),
                    s.report.seed.to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?,
    };
    let summary = format!(
        "{} sweeps, {} trials, {} violations",
        output.sweeps.len(),
        output.total_trials,
        output.total_violations
    );
    Ok(Outcome {
        payload,
        code: if output.total_violations == 0 {
            EXIT_OK
        } else {
            EXIT_FAILURE
        },
        summary,
    })
}

#[derive(Serialize)]
struct TabulateRow {
    eta: f64,
    f_p: f64,
    minimal_risk: f64,
    g: f64,
    g_prime: Option<f64>,
    lower_bound: Option<f64>,
}

fn cmd_tabulate(args: TabulateArgs, globals: &Globals) -> CliResult<Outcome> {
    let params = params_from(args.p, args.q)?;
    let n = args.resolution.unwrap_or(101);
    if n < 2 {
        return usage("--resolution must be >= 2");
    }
    let rows = (0..n)
        .map(|i| -> CliResult<TabulateRow> {
            let eta = i as f64 / (n - 1) as f64;
            let a = (2.0 * eta - 1.0).abs();
            Ok(TabulateRow {
                eta,
                f_p: minimizer(&params, eta)?.as_f64(),
                minimal_risk: minimal_risk(&params, eta)?,
                g: excess_at_zero(&params, a)?,
                g_prime: excess_derivative(&params, a).ok(),
                lower_bound: excess_lower_bound(&params, a).ok(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let payload = match globals.format_or(Format::Csv) {
        // JSON has no infinity: infinite f_P values appear as null
        Format::Json => json_payload(&rows)?,
        Format::Csv => csv_payload(|buf| {
            let mut out = csv::Writer::from_writer(buf);
            out.write_record(["eta", "f_p", "minimal_risk", "g", "g_prime", "lower_bound"])?;
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            for r in &rows {
                out.write_record([
                    fmt_f64(r.eta),
                    fmt_f64(r.f_p),
                    fmt_f64(r.minimal_risk),
                    fmt_f64(r.g),
                    opt(r.g_prime),
                    opt(r.lower_bound),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?,
    };
    Ok(Outcome::ok(payload, String::new()))
}

fn cmd_train(args: TrainArgs, globals: &Globals) -> CliResult<Outcome> {
    if globals.format_or(Format::Json) != Format::Json {
        return usage("train writes the model as JSON; use --trace for CSV output");
    }
    let data = load_samples(required(&args.data, "data")?)?;
    let mut config = TrainConfig::new(params_from(args.p, args.q)?, args.lambda.unwrap_or(1e-2));
    if let Some(max_iters) = args.max_iters {
        config.max_iters = max_iters;
    }
    if let Some(tol) = args.grad_tol {
        config.grad_tol = tol;
    }
    if let Some(ls) = args.line_search {
        config.line_search = ls;
    }
    let (model, trace) = fit(&data, &config)?;
    if let Some(path) = &args.trace {
        let file = File::create(path).map_err(|e| input_error(path, e))?;
        trace.write_csv(std::io::BufWriter::new(file))?;
    }
    let summary = format!(
        "iterations {}, converged {}, objective {}, training error {}",
        trace.iterations_used,
        trace.converged,
        trace.objective_history.last().copied().unwrap_or(f64::NAN),
        training_error(&model, &data)?
    );
    Ok(Outcome::ok(json_payload(&model)?, summary))
}

#[derive(Serialize)]
struct EmpiricalReport {
    n: usize,
    empirical_risk: f64,
    misclassification_rate: f64,
}

fn cmd_evaluate(args: EvaluateArgs, globals: &Globals) -> CliResult<Outcome> {
    let model = load_model(required(&args.model, "model")?)?;
    let params = params_from(args.p, args.q)?;
    let format = globals.format_or(Format::Json);
    let payload = match (&args.dist, &args.data) {
        (Some(path), None) => {
            let dist = load_joint(path)?;
            let f = ScoreFunction::Linear {
                w: model.w().to_vec(),
                b: model.b(),
            };
            let report = risk_report(&dist, &f, &params)?;
            match format {
                Format::Json => json_payload(&report)?,
                Format::Csv => csv_payload(|buf| report.write_csv(buf))?,
            }
        }
        (None, Some(path)) => {
            let data = load_samples(path)?;
            let report = EmpiricalReport {
                n: data.len(),
                empirical_risk: empirical_risk(&model, &data, &params)?,
                misclassification_rate: training_error(&model, &data)?,
            };
            match format {
                Format::Json => json_payload(&report)?,
                Format::Csv => format!(
                    "n,empirical_risk,misclassification_rate\n{},{},{}\n",
                    report.n,
                    fmt_f64(report.empirical_risk),
                    fmt_f64(report.misclassification_rate)
                )
                .into_bytes(),
            }
        }
        _ => return usage("evaluate needs exactly one of --dist or --data"),
    };
    Ok(Outcome::ok(payload, String::new()))
}

#[derive(Serialize)]
struct PilingOutput<'a> {
    config: &'a PilingConfig,
    report: &'a PilingReport,
    near_hinge_piles_more: bool,
}

fn cmd_piling(args: PilingArgs, globals: &Globals) -> CliResult<Outcome> {
    let defaults = PilingConfig::default();
    let n_seeds = args.n_seeds.unwrap_or(defaults.seeds.len()) as u64;
    if n_seeds == 0 {
        return usage("--n-seeds must be >= 1");
    }
    let config = PilingConfig {
        dim: args.dim.unwrap_or(defaults.dim),
        n_per_class: args.n_per_class.unwrap_or(defaults.n_per_class),
        mean_separation: args.separation.unwrap_or(defaults.mean_separation),
        seeds: (0..n_seeds).map(|k| globals.seed.wrapping_add(k)).collect(),
        lambda: args.lambda.unwrap_or(defaults.lambda),
        epsilon_fraction: args.epsilon_fraction.unwrap_or(defaults.epsilon_fraction),
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        smooth: args.smooth.unwrap_or(defaults.smooth),
        near_hinge: args.near_hinge.unwrap_or(defaults.near_hinge),
    };
    let report = piling_experiment(&config)?;
    let summary = format!(
        "median piling: {} {}, {} {}",
        config.smooth, report.smooth_median, config.near_hinge, report.near_hinge_median
    );
    let payload = match globals.format_or(Format::Json) {
        Format::Json => json_payload(&PilingOutput {
            config: &config,
            report: &report,
            near_hinge_piles_more: report.near_hinge_piles_more(),
        })?,
        Format::Csv => csv_payload(|buf| report.write_csv(buf))?,
    };
    Ok(Outcome::ok(payload, summary))
}

fn cmd_sample(args: SampleArgs, globals: &Globals) -> CliResult<Outcome> {
    let kind = args.kind.unwrap_or(if args.dist.is_some() {
        SampleKind::Joint
    } else {
        SampleKind::Hdlss
    });
    let format = globals.format_or(Format::Json);
    let payload = match kind {
        SampleKind::Tsybakov => {
            let dist = make_tsybakov_distribution(
                args.tau.unwrap_or(1.0),
                args.c_tau.unwrap_or(1.0),
                args.atoms.unwrap_or(100),
            )?;
            match format {
                Format::Json => json_payload(&dist)?,
                Format::Csv => csv_payload(|buf| dist.write_csv(buf))?,
            }
        }
        SampleKind::Joint | SampleKind::Hdlss => {
            let samples = if kind == SampleKind::Joint {
                let dist = load_joint(required(&args.dist, "dist")?)?;
                sample_from(&dist, args.n.unwrap_or(1000), globals.seed)?
            } else {
                make_hdlss_gaussians(
                    args.dim.unwrap_or(500),
                    args.n_per_class.unwrap_or(25),
                    args.separation.unwrap_or(2.0),
                    globals.seed,
                )?
            };
            match format {
                Format::Json => json_payload(&samples)?,
                Format::Csv => csv_payload(|buf| samples.write_csv(buf))?,
            }
        }
    };
    Ok(Outcome::ok(payload, String::new()))
}
