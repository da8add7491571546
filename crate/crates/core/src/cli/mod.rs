//! Config-driven experiment runner behind the `sde-asympt` binary.
//!
//! Every subcommand reads one JSON config, applies command-line overrides,
//! runs its estimator and writes a single CSV whose first line is
//! `# manifest: {...}` (resolved config, seed, build id). Files are written
//! to a temporary name and renamed, so a failed run leaves nothing behind.
//!
//! Exit codes: 0 success, 1 estimator failure (e.g. exploded reference),
//! 2 config or I/O error, 3 all replications exploded.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::error::SdeError;
use crate::estimators::{
    bridge_extrema_ratios, estimate_constants, estimate_cost, estimate_errors, normalized_error, ErrorStudy,
    Reference, SchemeSpec,
};
use crate::model::{builtin, check_khasminskii, check_monotonicity, AssumptionReport, SampleSpec, SdeModel};
use crate::taming::{CoefficientFamily, Taming};

pub use config::{AssumptionConfig, ExperimentConfig, KnRule};

pub const BUILD_ID: &str = concat!("sde-asympt/", env!("CARGO_PKG_VERSION"));
pub const THREADS_ENV: &str = "SDE_ASYMPT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sde-asympt", version, about = "Monte Carlo harness for asymptotically optimal Euler-Maruyama schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate C_q^ad and C_q^eq over increasing replication prefixes.
    Constants(RunArgs),
    /// Sup-error convergence table against a fine reference.
    Errors(RunArgs),
    /// Mean evaluation count of the adaptive scheme.
    Cost(RunArgs),
    /// Normalized maxima of independent Brownian bridges.
    BridgeExtrema(RunArgs),
    /// Sampling-based check of the growth and monotonicity conditions.
    CheckAssumptions(RunArgs),
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Constants(a)
            | Command::Errors(a)
            | Command::Cost(a)
            | Command::BridgeExtrema(a)
            | Command::CheckAssumptions(a) => a,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Errors(_) => "errors",
            Command::Cost(_) => "cost",
            Command::BridgeExtrema(_) => "bridge-extrema",
            Command::CheckAssumptions(_) => "check-assumptions",
        }
    }

    fn output_name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants.csv",
            Command::Errors(_) => "convergence.csv",
            Command::Cost(_) => "cost.csv",
            Command::BridgeExtrema(_) => "extrema.csv",
            Command::CheckAssumptions(_) => "report.csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    /// `identity`, `sabanis` or `sabanis(r)`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Comma-separated grid sizes (bridge counts for bridge-extrema).
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Replication count.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Reference grid has 2^ref-exp steps.
    #[arg(long = "ref-exp")]
    pub ref_exp: Option<u32>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(#[from] SdeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Run(SdeError::AllExploded { .. }) => 3,
            CliError::Run(
                SdeError::Domain(_)
                | SdeError::UnknownModel(_)
                | SdeError::UnknownFamily(_)
                | SdeError::InvalidParams { .. }
                | SdeError::NoExactSolution(_)
                | SdeError::DimensionMismatch { .. },
            ) => 2,
            CliError::Run(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads the config file and applies the command-line overrides.
pub fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(io_err(&args.config))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    if let Some(f) = &args.family {
        cfg.family = f.clone();
    }
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(n) = &args.n {
        cfg.n_list = n.clone();
    }
    if let Some(m) = args.m {
        cfg.replications = m;
    }
    if let Some(r) = args.ref_exp {
        cfg.ref_exp = r;
    }
    Ok(cfg)
}

fn resolve_model(cfg: &ExperimentConfig) -> Result<SdeModel, CliError> {
    builtin(&cfg.model, &cfg.model_params).map_err(|e| CliError::Config(format!("model: {e}")))
}

fn resolve_family(cfg: &ExperimentConfig, id: &str, field: &str) -> Result<CoefficientFamily, CliError> {
    let kind = Taming::parse(id, cfg.family_r).map_err(|e| CliError::Config(format!("{field}: {e}")))?;
    Ok(CoefficientFamily::new(resolve_model(cfg)?, kind))
}

/// `1, 2, 5, 10, 20, 50, …` prefixes (at least 2) followed by `m`.
fn prefix_sizes(m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for f in [1, 2, 5] {
            let v = f * decade;
            if v >= m {
                break 'outer;
            }
            if v >= 2 {
                out.push(v);
            }
        }
        decade *= 10;
    }
    out.push(m);
    out
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn report_row(r: &AssumptionReport) -> Vec<String> {
    let join = |v: &[f64]| v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";");
    vec![
        r.assumption.as_str().to_string(),
        fmt(r.parameter),
        fmt(r.constant),
        fmt(r.margin),
        r.violated().to_string(),
        fmt(r.witness.t),
        join(&r.witness.x),
        r.witness.y.as_deref().map(join).unwrap_or_default(),
        r.samples.to_string(),
    ]
}

fn compute(command: &Command, cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let n_ref = cfg.reference_steps();
    let table = match command {
        Command::Constants(_) => {
            let fam = resolve_family(cfg, &cfg.family, "family")?;
            let c = estimate_constants(&fam, cfg.q, cfg.replications, n_ref, cfg.seed)?;
            let mut rows = Vec::new();
            for m in prefix_sizes(cfg.replications) {
                let (ad, eq) = match c.samples.estimate(m) {
                    Ok(v) => v,
                    Err(SdeError::TooFewSamples { .. }) if m < cfg.replications => continue,
                    Err(e) => return Err(e.into()),
                };
                rows.push(vec![
                    m.to_string(),
                    fmt(ad.value),
                    fmt(ad.ci95.0),
                    fmt(ad.ci95.1),
                    fmt(eq.value),
                    fmt(eq.ci95.0),
                    fmt(eq.ci95.1),
                ]);
            }
            Table {
                header: &["M_used", "C_ad", "C_ad_lo", "C_ad_hi", "C_eq", "C_eq_lo", "C_eq_hi"],
                rows,
            }
        }
        Command::Errors(_) => {
            let fam = resolve_family(cfg, &cfg.family, "family")?;
            let reference = match cfg.reference.as_str() {
                "exact" => Reference::Exact,
                _ => Reference::Family(match &cfg.reference_family {
                    Some(id) => resolve_family(cfg, id, "reference_family")?,
                    None => fam.clone(),
                }),
            };
            let study = ErrorStudy::new(fam, cfg.q, cfg.replications, n_ref, cfg.seed).with_reference(reference);
            let adaptive = cfg.scheme == "adaptive";
            let specs: Vec<SchemeSpec> = if adaptive {
                let ks = cfg.coarse_steps()?;
                cfg.n_list.iter().zip(ks).map(|(&n, k)| SchemeSpec::Adaptive { n, k }).collect()
            } else {
                cfg.n_list.iter().map(|&n| SchemeSpec::Equidistant { n }).collect()
            };
            let result = estimate_errors(&study, &specs)?;
            let constant = if adaptive {
                result.constants.ad.value
            } else {
                result.constants.eq.value
            };
            let mut rows = Vec::new();
            for s in &result.schemes {
                let size = if adaptive { s.cost.value } else { s.spec.n() as f64 };
                let row = normalized_error(size, s.error.value, constant)?;
                rows.push(vec![
                    fmt(size),
                    fmt(s.error.value),
                    fmt(s.error.stderr),
                    fmt(row.normalized),
                    row.ratio.map(fmt).unwrap_or_else(|| "NA".into()),
                    s.error.exploded.to_string(),
                ]);
            }
            Table {
                header: &["N_or_cost", "error", "stderr", "normalized", "ratio", "exploded"],
                rows,
            }
        }
        Command::Cost(_) => {
            let fam = resolve_family(cfg, &cfg.family, "family")?;
            let sizes: Vec<(usize, usize)> = cfg.n_list.iter().copied().zip(cfg.coarse_steps()?).collect();
            let costs = estimate_cost(&fam, cfg.q, cfg.replications, &sizes, cfg.seed)?;
            Table {
                header: &["N", "c_hat", "stderr"],
                rows: costs
                    .iter()
                    .map(|c| vec![c.n.to_string(), fmt(c.cost.value), fmt(c.cost.stderr)])
                    .collect(),
            }
        }
        Command::BridgeExtrema(_) => {
            let est = bridge_extrema_ratios(cfg.q, &cfg.n_list, cfg.replications, cfg.bridge_grid, cfg.seed)?;
            Table {
                header: &["N", "ratio", "stderr"],
                rows: cfg
                    .n_list
                    .iter()
                    .zip(&est)
                    .map(|(n, e)| vec![n.to_string(), fmt(e.value), fmt(e.stderr)])
                    .collect(),
            }
        }
        Command::CheckAssumptions(_) => {
            let model = resolve_model(cfg)?;
            let a = &cfg.assumptions;
            let spec = SampleSpec {
                samples: a.samples,
                bound: a.bound,
                seed: cfg.seed,
            };
            let p = a.p.or(model.meta().p_khasminskii);
            let am = a.a.or(model.meta().a_monotone);
            if p.is_none() && am.is_none() {
                return Err(CliError::Config(format!(
                    "assumptions: no p or a given and model `{}` claims none",
                    model.name()
                )));
            }
            let mut rows = Vec::new();
            if let Some(p) = p {
                rows.push(report_row(&check_khasminskii(&model, p, a.constant, &spec)?));
            }
            if let Some(am) = am {
                rows.push(report_row(&check_monotonicity(&model, am, a.constant, &spec)?));
            }
            Table {
                header: &[
                    "assumption",
                    "parameter",
                    "constant",
                    "margin",
                    "violated",
                    "witness_t",
                    "witness_x",
                    "witness_y",
                    "samples",
                ],
                rows,
            }
        }
    };
    Ok(table)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    seed: u64,
    build: &'a str,
}

fn render(command: &Command, cfg: &ExperimentConfig, table: &Table) -> Result<Vec<u8>, CliError> {
    let manifest = Manifest {
        command: command.name(),
        config: cfg,
        seed: cfg.seed,
        build: BUILD_ID,
    };
    let mut buf = Vec::new();
    let json = serde_json::to_string(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(buf, "# manifest: {json}").expect("write to vec");
    let mut w = csv::Writer::from_writer(&mut buf);
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(Path::new("<buffer>")))?;
    drop(w);
    Ok(buf)
}

/// Validates `cfg`, runs `command` and writes its CSV; returns the path.
pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let table = compute(command, cfg)?;
    let bytes = render(command, cfg, &table)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let target = dir.join(command.output_name());
    let tmp = dir.join(format!(".{}.tmp", command.output_name()));
    fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
    if let Err(e) = fs::rename(&tmp, &target) {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(&target)(e));
    }
    Ok(target)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = load_config(cli.command.args()).and_then(|cfg| {
        let pool = thread_pool()?;
        pool.install(|| run(&cli.command, &cfg))
    });
    match result {
        Ok(path) => {
            println!("{}", path.display());
            0
        }
        Err(e) => {
            eprintln!("sde-asympt {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
