//! `dpq`: optimize, evaluate, audit and apply private quantizers, and run
//! the bundled experiments.
//!
//! Exit codes: 0 success, 1 usage or bad input, 2 no feasible mechanism
//! (or a failed audit), 3 internal error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::{pick, FileConfig};
use dpq_core::audit;
use dpq_core::experiments::{self, Norm};
use dpq_core::lp::{ConstraintFamily, LpMode};
use dpq_core::optimizer::{
    self, Baseline, BaselineGrid, BinOptions, BoundOptions, HyperGrid, InputLaw, Problem, Selection,
};
use dpq_core::quantizer::{exact_mae, exact_mse, monte_carlo_mae, BinLayout, Mechanism};
use dpq_core::{io as dio, mechanisms};

pub const OUT_DIR_ENV: &str = "DPQ_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "dpq-out";

#[derive(Debug, Parser)]
#[command(
    name = "dpq",
    version,
    about = "Differentially private unbiased quantization"
)]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to the config file, then $DPQ_OUT_DIR, then ./dpq-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid searches and Monte Carlo loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for the mechanism with the smallest MAE at a privacy target.
    Optimize(OptimizeArgs),
    /// Exact and Monte Carlo MAE of a mechanism.
    Eval(EvalArgs),
    /// Certify the privacy loss of a mechanism.
    Audit(AuditArgs),
    /// Quantize reals read line by line (comma-separated rows keep their shape).
    Quantize(QuantizeArgs),
    /// Run a bundled experiment.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum InputKind {
    Uniform,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FamilyArg {
    Optm,
    Rqm,
    Erm,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long, value_enum)]
    input: Option<InputKind>,
    /// Mean of the truncated Gaussian input.
    #[arg(long)]
    mu: Option<f64>,
    /// Standard deviation of the truncated Gaussian input.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    /// Samples used to estimate interval masses for non-uniform inputs (0 = exact masses).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_parser = ["full", "reduced"])]
    constraints: Option<String>,
    #[arg(long, value_parser = ["symmetric", "general"])]
    mode: Option<String>,
    /// Construction to search: the LP-designed mechanism or a baseline family.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Range extensions as multiples of c (comma-separated).
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Outermost inner bin as a fraction of c (comma-separated; symmetric lattice).
    #[arg(long, value_delimiter = ',')]
    bin_fractions: Option<Vec<f64>>,
    /// Points per axis of the reduced-family scalar grid.
    #[arg(long)]
    reduced_points: Option<usize>,
    #[arg(long, value_parser = ["mae", "mse"])]
    selection: Option<String>,
}

#[derive(Debug, Args)]
struct MechanismSource {
    /// Mechanism JSON file.
    #[arg(long, conflicts_with = "construct")]
    mechanism: Option<PathBuf>,
    /// Build a baseline instead of loading one.
    #[arg(long, value_parser = ["rqm", "erm"])]
    construct: Option<String>,
    #[arg(long, requires = "construct")]
    m: Option<usize>,
    #[arg(long, requires = "construct")]
    c: Option<f64>,
    #[arg(long, requires = "construct")]
    delta: Option<f64>,
    /// q for RQM, gamma for ERM.
    #[arg(long, requires = "construct")]
    param: Option<f64>,
    /// Explicit bins for ERM (comma-separated); uniform otherwise.
    #[arg(
        long,
        value_delimiter = ',',
        requires = "construct",
        allow_hyphen_values = true
    )]
    bins: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    source: MechanismSource,
    #[command(flatten)]
    input: InputArgs,
    /// Monte Carlo trials (0 skips the estimate).
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    source: MechanismSource,
    /// Privacy target; without it the audit only reports.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long)]
    mechanism: PathBuf,
    /// Input file (default: stdin).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ExperimentName {
    Table1,
    Table2,
    VecL1,
    VecL2,
    Dpsgd,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Monte Carlo trials (scalar tables, vector experiments).
    #[arg(long)]
    trials: Option<usize>,
    /// Privacy targets (comma-separated).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Vector dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// CSV dataset for dpsgd (default: the bundled breast-cancer data).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
}

/// Bad flags, bad files, bad values.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A requested guarantee that cannot be met.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some()
            || cause.downcast_ref::<toml::de::Error>().is_some()
        {
            return 1;
        }
        if cause.downcast_ref::<Infeasible>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<dpq_core::Error>() {
            use dpq_core::Error as E;
            return match err {
                E::NoFeasibleMechanism(_) => 2,
                E::Io(_) | E::IterationLimit(_) | E::NumericalFailure(_) => 3,
                _ => 1,
            };
        }
    }
    3
}

struct Ctx {
    file: FileConfig,
    out: PathBuf,
    seed: u64,
    verbose: u8,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn prepare_out(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
    }

    /// Persists the resolved configuration; called before any result file.
    fn manifest<C: Serialize>(&self, command: &str, resolved: &C) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            command: &'a str,
            seed: u64,
            version: &'static str,
            config: &'a C,
        }
        self.prepare_out()?;
        let m = Manifest {
            command,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            config: resolved,
        };
        dio::write_json(&self.out.join("manifest.json"), &m)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let ctx = Ctx {
        seed: pick(cli.seed, file.seed, 0),
        file,
        out,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Optimize(a) => cmd_optimize(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Audit(a) => cmd_audit(&ctx, a),
        Command::Quantize(a) => cmd_quantize(&ctx, a),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
    }
}

fn resolve_law(kind: InputKind, mu: f64, sigma: f64) -> anyhow::Result<InputLaw> {
    Ok(match kind {
        InputKind::Uniform => InputLaw::Uniform,
        InputKind::Gaussian => {
            if !(sigma > 0.0) || !mu.is_finite() {
                return Err(usage(format!(
                    "invalid Gaussian input (mu = {mu}, sigma = {sigma})"
                )));
            }
            InputLaw::TruncatedGaussian { mu, sigma }
        }
    })
}

fn parse_input_kind(s: &str) -> anyhow::Result<InputKind> {
    InputKind::from_str(s, true).map_err(|_| usage(format!("unknown input distribution '{s}'")))
}

#[derive(Debug, Serialize)]
struct OptimizeResolved {
    eps: f64,
    m: usize,
    c: f64,
    input: InputLaw,
    samples: usize,
    constraints: ConstraintFamily,
    mode: LpMode,
    family: FamilyArg,
    selection: Selection,
    delta_options: Vec<f64>,
    bin_options: Option<BinOptions>,
    reduced_points: usize,
}

fn cmd_optimize(ctx: &Ctx, a: OptimizeArgs) -> anyhow::Result<()> {
    let f = &ctx.file.optimize;
    let eps = pick(a.eps, f.eps, 1.0);
    let m = pick(a.m, f.m, 4);
    let c = pick(a.c, f.c, 1.0);
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(usage(format!(
            "--eps must be a positive finite number, got {eps}"
        )));
    }
    if m < 2 || m > dpq_core::quantizer::MAX_BINS {
        return Err(usage(format!(
            "--m must be in [2, {}], got {m}",
            dpq_core::quantizer::MAX_BINS
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(usage(format!("--c must be positive, got {c}")));
    }
    let kind = match a.input.input {
        Some(k) => k,
        None => f
            .input
            .as_deref()
            .map(parse_input_kind)
            .transpose()?
            .unwrap_or(InputKind::Uniform),
    };
    let law = resolve_law(
        kind,
        pick(a.input.mu, f.mu, 0.5),
        pick(a.input.sigma, f.sigma, 0.1),
    )?;
    let constraints = match pick(a.constraints, f.constraints.clone(), "full".into()).as_str() {
        "full" => ConstraintFamily::Full,
        "reduced" => ConstraintFamily::Reduced,
        s => return Err(usage(format!("unknown constraint family '{s}'"))),
    };
    let mode = match pick(a.mode, f.mode.clone(), "symmetric".into()).as_str() {
        "symmetric" => LpMode::Symmetric,
        "general" => LpMode::General,
        s => return Err(usage(format!("unknown mode '{s}'"))),
    };
    let family = match a.family {
        Some(x) => x,
        None => match f.family.as_deref() {
            None => FamilyArg::Optm,
            Some(s) => {
                FamilyArg::from_str(s, true).map_err(|_| usage(format!("unknown family '{s}'")))?
            }
        },
    };
    let selection = match pick(a.selection, f.selection.clone(), "mae".into()).as_str() {
        "mae" => Selection::ExactMae,
        "mse" => Selection::ExactMse,
        s => return Err(usage(format!("unknown selection '{s}'"))),
    };
    let reduced_points = pick(a.reduced_points, f.reduced_points, 12);
    let samples = pick(a.samples, f.samples, 10_000);
    if reduced_points == 0 {
        return Err(usage("--reduced-points must be at least 1"));
    }

    let mut grid = HyperGrid::default_for(c, m, constraints, mode);
    if constraints == ConstraintFamily::Reduced {
        grid.bounds = BoundOptions::default_reduced(reduced_points);
    }
    grid.selection = selection;
    let user_deltas = a.deltas.or(f.deltas.clone());
    let user_fractions = a.bin_fractions.or(f.bin_fractions.clone());
    if let Some(d) = &user_deltas {
        grid.delta_options = d.iter().map(|x| x * c).collect();
    }
    if let Some(b) = &user_fractions {
        grid.bin_options = BinOptions::SymmetricLattice(b.clone());
    }
    let baseline = match family {
        FamilyArg::Optm => None,
        FamilyArg::Rqm | FamilyArg::Erm => {
            let kind = if family == FamilyArg::Rqm {
                Baseline::Rqm
            } else {
                Baseline::Erm
            };
            let mut bg = BaselineGrid::default_for(kind);
            if let Some(d) = &user_deltas {
                bg.delta_factors = d.clone();
            }
            if let (Baseline::Erm, Some(b)) = (kind, &user_fractions) {
                bg.bin_fractions = Some(b.clone());
            }
            grid.delta_options = bg.delta_factors.iter().map(|x| x * c).collect();
            grid.bin_options =
                BinOptions::SymmetricLattice(bg.bin_fractions.clone().unwrap_or_default());
            Some((kind, bg))
        }
    };
    let resolved = OptimizeResolved {
        eps,
        m,
        c,
        input: law,
        samples,
        constraints,
        mode,
        family,
        selection,
        delta_options: grid.delta_options.clone(),
        bin_options: (family != FamilyArg::Rqm).then(|| grid.bin_options.clone()),
        reduced_points,
    };
    ctx.manifest("optimize", &resolved)?;

    let sample_vec = match law {
        InputLaw::TruncatedGaussian { mu, sigma } if samples > 0 => Some(
            experiments::scalar::gaussian_samples(c, mu, sigma, samples, ctx.seed)?,
        ),
        _ => None,
    };
    let problem = Problem {
        c,
        m,
        eps,
        law,
        samples: sample_vec,
    };
    let (mech, mae) = match baseline {
        None => {
            ctx.log(format!("searching {} layouts", grid.layouts(c, m).len()));
            let res = optimizer::optm_outer(&problem, &grid)?;
            optimizer::write_leaderboard(&ctx.out.join("leaderboard.csv"), &res.leaderboard)?;
            ctx.log(format!(
                "{} LPs solved, {} infeasible, {} numerical failures",
                res.lps_solved, res.lps_infeasible, res.lps_failed
            ));
            (res.mechanism, res.exact_mae)
        }
        Some((kind, bg)) => {
            let res = optimizer::baseline_search(kind, &problem, &bg)?;
            (
                res.mechanism.with_metadata("param", res.param),
                res.exact_mae,
            )
        }
    };
    let (ok, report) = audit::verify_mechanism(&mech, eps);
    mech.save(&ctx.out.join("mechanism.json"))?;
    dio::write_json(
        &ctx.out.join("audit.json"),
        &AuditOut {
            eps_target: Some(eps),
            pass: Some(ok),
            report: &report,
        },
    )?;
    println!(
        "bins {}  exact MAE {:.6}  audited eps {}  ({})",
        optimizer::format_bins(mech.layout().bins()),
        mae,
        dio::fmt_eps(report.eps_emp),
        if ok { "pass" } else { "FAIL" }
    );
    if !ok {
        return Err(anyhow!(
            "internal: optimizer returned a mechanism that fails its audit"
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct AuditOut<'a> {
    eps_target: Option<f64>,
    pass: Option<bool>,
    report: &'a audit::AuditReport,
}

fn load_mechanism(path: &Path) -> anyhow::Result<Mechanism> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Mechanism::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn resolve_mechanism(src: &MechanismSource) -> anyhow::Result<(Mechanism, serde_json::Value)> {
    if let Some(p) = &src.mechanism {
        return Ok((load_mechanism(p)?, serde_json::json!({ "mechanism": p })));
    }
    let Some(kind) = &src.construct else {
        return Err(usage("give --mechanism FILE or --construct rqm|erm"));
    };
    let m = src.m.unwrap_or(4);
    let c = src.c.unwrap_or(1.0);
    let delta = src
        .delta
        .ok_or_else(|| usage("--construct needs --delta"))?;
    let param = src
        .param
        .ok_or_else(|| usage("--construct needs --param"))?;
    let mech = match kind.as_str() {
        "rqm" => {
            if src.bins.is_some() {
                return Err(usage("RQM uses uniform bins; drop --bins"));
            }
            mechanisms::rqm(m, c, delta, param)?
        }
        _ => {
            let layout = match &src.bins {
                Some(b) => BinLayout::new(c, delta, b.clone())?,
                None => mechanisms::uniform_bins(m, c, delta)?,
            };
            mechanisms::erm(layout, param)?
        }
    };
    let desc = serde_json::json!({
        "construct": kind, "m": mech.m(), "c": c, "delta": delta, "param": param, "bins": mech.layout().bins(),
    });
    Ok((mech, desc))
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> anyhow::Result<()> {
    let f = &ctx.file.eval;
    let (mech, source) = resolve_mechanism(&a.source)?;
    let kind = match a.input.input {
        Some(k) => k,
        None => f
            .input
            .as_deref()
            .map(parse_input_kind)
            .transpose()?
            .unwrap_or(InputKind::Uniform),
    };
    let law = resolve_law(
        kind,
        pick(a.input.mu, f.mu, 0.5),
        pick(a.input.sigma, f.sigma, 0.1),
    )?;
    let trials = pick(a.trials, f.trials, 100_000);
    #[derive(Serialize)]
    struct Resolved<'a> {
        source: &'a serde_json::Value,
        input: InputLaw,
        trials: usize,
    }
    ctx.manifest(
        "eval",
        &Resolved {
            source: &source,
            input: law,
            trials,
        },
    )?;
    let dist = law.distribution(mech.layout())?;
    let mae = exact_mae(&mech, &dist)?;
    let mse = exact_mse(&mech, &dist)?;
    let (mc, se) = if trials > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let (a, b) = monte_carlo_mae(&mech, &dist, trials, &mut rng)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    #[derive(Serialize)]
    struct EvalOut {
        exact_mae: f64,
        exact_mse: f64,
        mc_mae: Option<f64>,
        mc_se: Option<f64>,
        trials: usize,
    }
    dio::write_json(
        &ctx.out.join("eval.json"),
        &EvalOut {
            exact_mae: mae,
            exact_mse: mse,
            mc_mae: mc,
            mc_se: se,
            trials,
        },
    )?;
    match (mc, se) {
        (Some(m), Some(s)) => {
            println!("exact MAE {mae:.6}  Monte Carlo {m:.6} +- {s:.6} ({trials} draws)")
        }
        _ => println!("exact MAE {mae:.6}"),
    }
    Ok(())
}

fn cmd_audit(ctx: &Ctx, a: AuditArgs) -> anyhow::Result<()> {
    let (mech, source) = resolve_mechanism(&a.source)?;
    if let Some(e) = a.eps {
        if !(e > 0.0) {
            return Err(usage(format!("--eps must be positive, got {e}")));
        }
    }
    ctx.manifest(
        "audit",
        &serde_json::json!({ "source": source, "eps": a.eps }),
    )?;
    let report = audit::empirical_epsilon(&mech);
    let pass = a.eps.map(|e| report.eps_emp <= e + audit::AUDIT_SLACK);
    dio::write_json(
        &ctx.out.join("audit.json"),
        &AuditOut {
            eps_target: a.eps,
            pass,
            report: &report,
        },
    )?;

    let method = match report.method {
        audit::AuditMethod::CandidateSets => "candidate sets",
        audit::AuditMethod::DenseGrid => "dense grid",
    };
    println!("method: {method}");
    println!(
        "{:>4}  {:>12} {:>12}  {:>12} {:>12}  {:>10}",
        "bin", "max p", "at x", "min p", "at x", "log ratio"
    );
    let at = |w: &audit::Witness| {
        if w.left_limit {
            format!("{}-", w.x)
        } else {
            format!("{}", w.x)
        }
    };
    for b in &report.bins {
        println!(
            "{:>4}  {:>12.6e} {:>12}  {:>12.6e} {:>12}  {:>10}",
            b.bin,
            b.max.prob,
            at(&b.max),
            b.min.prob,
            at(&b.min),
            dio::fmt_eps(b.log_ratio)
        );
    }
    print!("eps = {}", dio::fmt_eps(report.eps_emp));
    match (a.eps, pass) {
        (Some(e), Some(true)) => println!("  <= {e}: pass"),
        (Some(e), Some(false)) => {
            println!("  > {e}: FAIL");
            return Err(anyhow::Error::new(Infeasible(format!(
                "audited eps {} exceeds the target {e}",
                dio::fmt_eps(report.eps_emp)
            ))));
        }
        _ => println!(),
    }
    Ok(())
}

/// Quantizes every comma-separated field; blank lines pass through.
fn quantize_text<R: rand::Rng>(
    mech: &Mechanism,
    input: &str,
    rng: &mut R,
) -> anyhow::Result<String> {
    let c = mech.layout().c();
    let mut out = String::with_capacity(input.len());
    for (n, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            out.push('\n');
            continue;
        }
        let mut fields = Vec::new();
        for (k, tok) in line.split(',').enumerate() {
            let x: f64 = tok.trim().parse().map_err(|_| {
                usage(format!(
                    "line {}, field {}: not a number: '{}'",
                    n + 1,
                    k + 1,
                    tok.trim()
                ))
            })?;
            if !(x.abs() <= c) {
                return Err(usage(format!(
                    "line {}, field {}: {x} is outside [-{c}, {c}]",
                    n + 1,
                    k + 1
                )));
            }
            fields.push(mech.sample(x, rng)?.to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn cmd_quantize(ctx: &Ctx, a: QuantizeArgs) -> anyhow::Result<()> {
    let mech = load_mechanism(&a.mechanism)?;
    ctx.manifest(
        "quantize",
        &serde_json::json!({ "mechanism": a.mechanism, "input": a.input, "output": a.output }),
    )?;
    let text = match &a.input {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => {
            let mut s = String::new();
            std::io::stdin()
                .lock()
                .read_to_string(&mut s)
                .context("reading stdin")?;
            s
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let out = quantize_text(&mech, &text, &mut rng)?;
    match &a.output {
        Some(p) => dio::atomic_write(p, out.as_bytes())?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(out.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

fn bundled_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/breast_cancer.csv")
}

fn cmd_experiment(ctx: &Ctx, a: ExperimentArgs) -> anyhow::Result<()> {
    let f = &ctx.file.experiment;
    let trials = a.trials.or(f.trials);
    let eps = a.eps.or(f.eps.clone());
    if trials == Some(0) {
        return Err(usage("--trials must be at least 1"));
    }
    ctx.prepare_out()?;
    match a.name {
        ExperimentName::Table1 => {
            let mut cfg = experiments::ScalarConfig {
                seed: ctx.seed,
                ..Default::default()
            };
            if let Some(t) = trials {
                cfg.mc_trials = t;
            }
            if let Some(e) = eps {
                cfg.eps_grid = e;
            }
            ctx.manifest("experiment table1", &cfg)?;
            let rows = experiments::table1(&cfg)?;
            print_scalar(&rows);
            experiments::write_results(&ctx.out, "table1", ctx.seed, &cfg, &rows)?;
        }
        ExperimentName::Table2 => {
            let mut cfg = experiments::GaussianConfig {
                seed: ctx.seed,
                ..Default::default()
            };
            if let Some(t) = trials {
                cfg.mc_trials = t;
            }
            if let Some(e) = eps {
                if e.len() != 1 {
                    return Err(usage("table2 takes a single --eps value"));
                }
                cfg.eps = e[0];
            }
            ctx.manifest("experiment table2", &cfg)?;
            let rows = experiments::table2(&cfg)?;
            print_scalar(&rows);
            experiments::write_results(&ctx.out, "table2", ctx.seed, &cfg, &rows)?;
        }
        ExperimentName::VecL1 | ExperimentName::VecL2 => {
            let (norm, name) = if a.name == ExperimentName::VecL1 {
                (Norm::L1, "vec_l1")
            } else {
                (Norm::L2, "vec_l2")
            };
            let mut cfg = experiments::VectorConfig {
                seed: ctx.seed,
                ..experiments::VectorConfig::default_for(norm)
            };
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(e) = eps {
                cfg.eps_grid = e;
            }
            if let Some(d) = a.dim.or(f.dim) {
                cfg.dim = d;
            }
            ctx.manifest(&format!("experiment {name}"), &cfg)?;
            let mechs = experiments::vector_mechanisms(&cfg.eps_grid)?;
            let rows = experiments::vector_experiment(&cfg, &mechs)?;
            for r in &rows {
                println!(
                    "{} eps {:<4} {:<5} mean {:.4}  std {:.4}  95% [{:.4}, {:.4}]",
                    r.setting, r.eps, r.mechanism, r.mean, r.std, r.ci_low, r.ci_high
                );
            }
            experiments::write_results(&ctx.out, name, ctx.seed, &cfg, &rows)?;
        }
        ExperimentName::Dpsgd => {
            let defaults = experiments::DpSgdConfig::default();
            let sgd = experiments::SgdConfig {
                batch_size: pick(a.batch_size, f.batch_size, defaults.sgd.batch_size),
                epochs: pick(a.epochs, f.epochs, defaults.sgd.epochs),
                learning_rate: pick(a.learning_rate, f.learning_rate, defaults.sgd.learning_rate),
                clip: pick(a.clip, f.clip, defaults.sgd.clip),
                seed: ctx.seed,
            };
            sgd.validate().map_err(|e| usage(e.to_string()))?;
            let eps_v = match eps {
                None => defaults.eps,
                Some(e) if e.len() == 1 => e[0],
                Some(_) => return Err(usage("dpsgd takes a single --eps value")),
            };
            let cfg = experiments::DpSgdConfig {
                sgd,
                eps: eps_v,
                repeats: pick(a.repeats, f.repeats, defaults.repeats),
            };
            let dataset = a
                .dataset
                .or(f.dataset.clone())
                .unwrap_or_else(bundled_dataset);
            let label = a
                .label_column
                .or(f.label_column.clone())
                .unwrap_or_else(|| "label".into());
            ctx.manifest(
                "experiment dpsgd",
                &serde_json::json!({ "config": &cfg, "dataset": dataset, "label_column": label }),
            )?;
            let ds = experiments::load_csv_dataset(&dataset, &label)
                .map_err(|e| usage(format!("{}: {e}", dataset.display())))?;
            ctx.log(format!(
                "{} rows, {} features, {} classes",
                ds.n_rows(),
                ds.n_features(),
                ds.n_classes()
            ));
            let quantizers = experiments::sgd_quantizers(cfg.eps)?;
            let (rows, summary) = experiments::dpsgd_experiment(&ds, &cfg, &quantizers)?;
            for s in &summary {
                println!(
                    "{:<9} final accuracy {:.4} +- {:.4} ({} runs) {}",
                    s.mechanism, s.final_accuracy, s.final_accuracy_std, s.repeats, s.bins
                );
            }
            experiments::write_results(&ctx.out, "dpsgd", ctx.seed, &cfg, &rows)?;
            experiments::write_results(&ctx.out, "dpsgd_summary", ctx.seed, &cfg, &summary)?;
        }
    }
    Ok(())
}

fn print_scalar(rows: &[experiments::ScalarRow]) {
    for r in rows {
        let sigma = r.sigma.map(|s| format!(" sigma {s}")).unwrap_or_default();
        match r.exact_mae {
            Some(m) => println!(
                "eps {}{sigma} {:<5} {:<11} MAE {m:.4}  {}",
                r.eps, r.mechanism, r.source, r.bins
            ),
            None => println!(
                "eps {}{sigma} {:<5} {:<11} N/A",
                r.eps, r.mechanism, r.source
            ),
        }
    }
}
