//! The `hyperfront` command line: train, evaluate, sample, query and serve
//! hypernetwork checkpoints.

pub mod config;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use hyperfront::autodiff::Rng;
use hyperfront::fmt_sig;
use hyperfront::hypernet::param_count;
use hyperfront::scalarize::floor_preference;
use hyperfront::train::{
    evaluate_run, load_checkpoint, sweep_rays, save_checkpoint, train, Checkpoint, EvalOptions, Progress,
    TrainConfig, CHECKPOINT_VERSION,
};
use hyperfront_service::{ApiError, InferRequest, ServiceState};

use config::{load_config, ConfigError};

#[derive(Debug, Parser)]
#[command(name = "hyperfront", version, about = "Preference-conditioned Pareto front learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train from a config file into a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory (default runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate MED, HV and HVD of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Preference rays per anchor and seed.
        #[arg(long, default_value_t = 3)]
        rays: usize,
        /// Number of evaluation seeds.
        #[arg(long, default_value_t = 30)]
        seeds: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write predicted front points to CSV.
    Front {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        csv: PathBuf,
        /// Only sweep this component (anchor or expert); default all.
        #[arg(long)]
        component: Option<usize>,
    },
    /// Map one preference to a solution.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_parser = parse_vector)]
        r: Vector,
        #[arg(long, value_parser = parse_vector)]
        a: Option<Vector>,
        #[arg(long, value_parser = parse_vector)]
        b: Option<Vector>,
        #[arg(long)]
        expert: Option<usize>,
        /// Attach the true optimum and its distance.
        #[arg(long)]
        target: bool,
    },
    /// Serve a checkpoint over HTTP.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Grid over hidden width and head count.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_counts)]
        dims: Counts,
        #[arg(long, value_parser = parse_counts)]
        heads: Counts,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 3)]
        rays: usize,
        #[arg(long, default_value_t = 30)]
        seeds: u64,
    },
}

/// Comma-separated decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

/// Comma-separated positive integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

pub fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() && !t.is_empty() && t.trim() == t => Ok(v),
            _ => Err(format!("{t:?} is not a finite decimal")),
        })
        .collect::<Result<_, _>>()
        .map(Vector)
}

pub fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|t| match t.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(format!("{t:?} is not a positive integer")),
        })
        .collect::<Result<_, _>>()
        .map(Counts)
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, paths or config: exit status 2.
    #[error("{0}")]
    Usage(String),
    /// The command itself failed: exit status 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }

    /// One JSON object on one line.
    pub fn to_line(&self) -> String {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Failed(_) => "failed",
        };
        json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    load_checkpoint(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// One record of `manifest.jsonl`; records are only ever appended.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config: TrainConfig,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub tool_version: String,
    pub checkpoint_version: u32,
}

fn append_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = dir.join("manifest.jsonl");
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    let line = serde_json::to_string(manifest).map_err(failed)?;
    writeln!(f, "{line}").map_err(failed)
}

/// Predicted front points: `samples` rays split over the components,
/// sorted by the first objective, as `f1,...,fm` rows with 9 significant
/// digits.
pub fn front_csv(ck: &Checkpoint, samples: usize, component: Option<usize>) -> Result<String, CliError> {
    let problem = ck.config.problem();
    let components: Vec<usize> = match component {
        Some(c) if c >= ck.components() => {
            return Err(CliError::Usage(format!("component {c} out of range for {} components", ck.components())))
        }
        Some(c) => vec![c],
        None => (0..ck.components()).collect(),
    };
    let k = components.len();
    let mut points = Vec::with_capacity(samples);
    for (i, &c) in components.iter().enumerate() {
        let count = samples / k + usize::from(i < samples % k);
        for r in exact_sweep(problem.m, count)? {
            points.push(ck.infer(&problem, c, &r, None, None).map_err(failed)?.f);
        }
    }
    points.sort_by(|p, q| p[0].total_cmp(&q[0]));
    let m = problem.m;
    let mut out = (1..=m).map(|i| format!("f{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in &points {
        out.push_str(&p.iter().map(|&v| fmt_sig(v, 9)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

/// `count` rays: the deterministic sweep, topped up with seeded Dirichlet
/// draws when the simplex lattice for `m > 2` falls short.
fn exact_sweep(m: usize, count: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rays = sweep_rays(m, count);
    let mut rng = Rng::new(count as u64);
    while rays.len() < count {
        let r = rng.dirichlet(1.0, m).map_err(failed)?;
        rays.push(floor_preference(&r).map_err(failed)?);
    }
    Ok(rays)
}

fn eval_options(rays: usize, seeds: u64) -> Result<EvalOptions, CliError> {
    if rays == 0 || seeds == 0 {
        return Err(CliError::Usage("rays and seeds must be positive".into()));
    }
    Ok(EvalOptions::new(rays, (0..seeds).collect()))
}

/// Runs one command, writing its result to `out` and logs to stderr.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seed, out: dir } => {
            let started = unix_now();
            let mut run = load_config(&config)?;
            for d in &run.defaults {
                eprintln!("default {d}");
            }
            if let Some(s) = seed {
                run.train.seed = s;
            }
            let dir = dir.unwrap_or_else(|| Path::new("runs").join(&run.name));
            let log = |p: Progress| {
                eprintln!("model {} iteration {} loss {:.6}", p.model, p.iteration, p.window_mean);
            };
            let ck = train(&run.train, Some(&log)).map_err(failed)?;
            let ckpt = dir.join("checkpoint.json");
            save_checkpoint(&ck, &ckpt).map_err(|e| CliError::Usage(e.to_string()))?;
            let report = evaluate_run(&ck, &EvalOptions::default()).map_err(failed)?;
            let report_path = dir.join("report.json");
            write_file(&report_path, &serde_json::to_string_pretty(&report).map_err(failed)?)?;
            let front_path = dir.join("front.csv");
            write_file(&front_path, &front_csv(&ck, 200 * ck.components(), None)?)?;
            let outputs = [&ckpt, &report_path, &front_path].map(|p| p.display().to_string()).to_vec();
            append_manifest(
                &dir,
                &RunManifest {
                    command: "train".into(),
                    config_path: Some(config.display().to_string()),
                    config: run.train.clone(),
                    outputs: outputs.clone(),
                    started_unix: started,
                    finished_unix: unix_now(),
                    tool_version: env!("CARGO_PKG_VERSION").into(),
                    checkpoint_version: CHECKPOINT_VERSION,
                },
            )?;
            let summary = json!({
                "run_dir": dir.display().to_string(),
                "outputs": outputs,
                "train_s": ck.wall_clock_s,
                "med_mean": report.med_mean,
                "hv": report.hv,
                "hvd": report.hvd,
            });
            writeln!(out, "{summary}").map_err(failed)
        }
        Command::Eval { ckpt, rays, seeds, report } => {
            let opts = eval_options(rays, seeds)?;
            let ck = read_checkpoint(&ckpt)?;
            let rep = evaluate_run(&ck, &opts).map_err(failed)?;
            let text = serde_json::to_string_pretty(&rep).map_err(failed)?;
            if let Some(path) = report {
                write_file(&path, &text)?;
            }
            writeln!(out, "{text}").map_err(failed)
        }
        Command::Front { ckpt, samples, csv, component } => {
            if samples == 0 {
                return Err(CliError::Usage("samples must be positive".into()));
            }
            let ck = read_checkpoint(&ckpt)?;
            let text = front_csv(&ck, samples, component)?;
            write_file(&csv, &text)?;
            writeln!(out, "{}", json!({ "csv": csv.display().to_string(), "rows": text.lines().count() - 1 }))
                .map_err(failed)
        }
        Command::Infer { ckpt, r, a, b, expert, target } => {
            let ck = read_checkpoint(&ckpt)?;
            let req = InferRequest { r: r.0, a: a.map(|v| v.0), b: b.map(|v| v.0), expert_id: expert, target };
            if req.r.iter().any(|&x| x < 0.0) || !(req.r.iter().sum::<f64>() > 0.0) {
                return Err(CliError::Usage("r must be non-negative with a positive sum".into()));
            }
            let res = ServiceState::with_checkpoint(ck).answer(&req).map_err(|e| match e {
                ApiError::BadRequest(_) | ApiError::Conflict(_) | ApiError::Unprocessable(_) => {
                    CliError::Usage(e.to_string())
                }
                other => failed(other),
            })?;
            writeln!(out, "{}", serde_json::to_string(&res).map_err(failed)?).map_err(failed)
        }
        Command::Serve { ckpt, port, bind } => {
            let addr: SocketAddr = format!("{bind}:{port}")
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot bind to {bind}:{port}")))?;
            if !ckpt.is_file() {
                return Err(CliError::Usage(format!("checkpoint {} does not exist", ckpt.display())));
            }
            let state = ServiceState::new();
            let loader = state.clone();
            // The listener comes up first; /health reports 503 until the load
            // finishes.
            std::thread::spawn(move || match load_checkpoint(&ckpt) {
                Ok(ck) => {
                    loader.load(ck);
                    eprintln!("checkpoint loaded");
                }
                Err(e) => {
                    eprintln!("{}", CliError::Usage(e.to_string()).to_line());
                    std::process::exit(2);
                }
            });
            let rt = tokio::runtime::Runtime::new().map_err(failed)?;
            eprintln!("listening on {addr}");
            rt.block_on(hyperfront_service::serve(state, addr)).map_err(failed)
        }
        Command::Sweep { config, dims, heads, csv, rays, seeds } => {
            let opts = eval_options(rays, seeds)?;
            let run = load_config(&config)?;
            let mut text = String::from("d,e,params,med_mean,med_std,hv,hvd,train_s\n");
            for &d in &dims.0 {
                for &e in &heads.0 {
                    let mut c = run.train.clone();
                    c.arch.d = d;
                    c.arch.e = e;
                    c.validate().map_err(|err| CliError::Usage(format!("d={d}, e={e}: {err}")))?;
                    eprintln!("training d={d} e={e}");
                    let ck = train(&c, None).map_err(failed)?;
                    let rep = evaluate_run(&ck, &opts).map_err(failed)?;
                    text.push_str(&format!(
                        "{d},{e},{},{},{},{},{},{:.3}\n",
                        param_count(&c.arch),
                        fmt_sig(rep.med_mean, 9),
                        fmt_sig(rep.med_std, 9),
                        fmt_sig(rep.hv, 9),
                        fmt_sig(rep.hvd, 9),
                        ck.wall_clock_s
                    ));
                }
            }
            write_file(&csv, &text)?;
            writeln!(out, "{}", json!({ "csv": csv.display().to_string(), "rows": dims.0.len() * heads.0.len() }))
                .map_err(failed)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        // Only the first line: clap appends usage hints below it.
        let msg = e.to_string();
        let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
        CliError::Usage(first)
    })?;
    execute(cli, out)
}
