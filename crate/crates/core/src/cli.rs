//! `ect` command line.
//!
//! Exit codes: 0 success, 1 domain error (structured JSON on stderr), 2 usage
//! error (unknown flag, bad value, missing input file).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::bench;
use crate::cubical::cell_counts;
use crate::ect::{
    compute_ect, ect_distance_sq, ect_distance_sq_index_aligned, euler_curve, normalize,
    sample_directions, DirectionMode, RangeMode,
};
use crate::error::Error;
use crate::loss::{total_loss, LossConfig};
use crate::metrics::evaluate;
use crate::verify::{run_lemma1_suite, run_lemma2_suite, run_stability_suite};
use crate::volume::{load_volume, BinaryVolume, GrayVolume, Shape};

pub const THREADS_ENV: &str = "ECT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ect",
    version,
    about = "Euler characteristic transforms of voxel volumes"
)]
struct Cli {
    /// Worker threads (falls back to ECT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format; csv is available for `curve` and `transform`.
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Suite {
    Lemma1,
    Lemma2,
    Stability,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long, default_value_t = 100)]
    directions: usize,
    #[arg(long, default_value_t = 30)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DirectionMode::Random)]
    mode: DirectionMode,
    #[arg(long, value_enum, default_value_t = RangeMode::Grid)]
    range: RangeMode,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 40)]
    thresholds: usize,
    #[command(flatten)]
    transform: TransformArgs,
}

impl LossArgs {
    fn config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            thresholds: self.thresholds,
            directions: self.transform.directions,
            steps: self.transform.steps,
            seed: self.transform.seed,
            direction_mode: self.transform.mode,
            range_mode: self.transform.range,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cell counts and Euler characteristic of a binary volume.
    Cells { input: PathBuf },
    /// Euler curve along one direction.
    Curve {
        #[arg(long)]
        input: PathBuf,
        /// Direction as x,y,z (normalised).
        #[arg(long, value_parser = parse_direction, allow_hyphen_values = true)]
        direction: [f64; 3],
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = RangeMode::Complex)]
        range: RangeMode,
    },
    /// Sampled transform over random or lattice directions.
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Squared transform distance between two binary volumes.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Topological + DICE loss of a prediction against ground truth.
    Loss {
        pred: PathBuf,
        gt: PathBuf,
        #[command(flatten)]
        loss: LossArgs,
    },
    /// IoU, volume and surface errors after Otsu binarization.
    Metrics { pred: PathBuf, gt: PathBuf },
    /// Randomised checks of the injectivity and stability results.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Trial count (default 1000 for lemma1, 500 per grid for stability).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Phase timings on synthetic volumes.
    Bench {
        /// Cubic grid extents, e.g. 8,16,32,64.
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        loss: LossArgs,
    },
}

fn parse_direction(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut u = [0.0; 3];
    for (slot, part) in u.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("{part:?} is not a number"))?;
    }
    Ok(u)
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        let usage = Cli::command().render_usage();
        Self {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {message}\n\n{usage}\n"),
        }
    }

    fn domain(err: &Error) -> Self {
        let payload = json!({"error": {"kind": err.code(), "message": err.to_string()}});
        Self {
            code: 1,
            stdout: String::new(),
            stderr: format!("{payload}\n"),
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CmdResult = std::result::Result<String, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 {
                Outcome::ok(text)
            } else {
                Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let threads = match resolve_threads(cli.threads) {
        Ok(n) => n,
        Err(msg) => return Outcome::usage(msg),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return Outcome::usage(format!("cannot start {threads} threads: {e}")),
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(stdout) => Outcome::ok(stdout),
        Err(Failure::Usage(msg)) => Outcome::usage(msg),
        Err(Failure::Domain(e)) => Outcome::domain(&e),
    }
}

fn resolve_threads(flag: Option<usize>) -> std::result::Result<usize, String> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {s:?}"))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err("thread count must be positive".into());
    }
    Ok(n)
}

fn require_file(path: &Path) -> std::result::Result<(), Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "input file {} not found",
            path.display()
        )));
    }
    Ok(())
}

fn load_gray(path: &Path) -> std::result::Result<GrayVolume, Failure> {
    require_file(path)?;
    Ok(load_volume(path)?.into_gray())
}

fn load_binary(path: &Path) -> std::result::Result<BinaryVolume, Failure> {
    require_file(path)?;
    Ok(load_volume(path)?.into_binary()?)
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable report");
    s.push('\n');
    s
}

/// Object with a leading `config` block followed by the fields of `body`.
fn with_config(config: Value, body: &impl Serialize) -> String {
    let mut map = serde_json::Map::new();
    map.insert("config".into(), config);
    match serde_json::to_value(body).expect("serialisable report") {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    to_json(&Value::Object(map))
}

fn transform_config(t: &TransformArgs) -> Value {
    json!({
        "directions": t.directions,
        "steps": t.steps,
        "seed": t.seed,
        "mode": t.mode,
        "range": t.range,
    })
}

fn json_only(cli: &Cli, what: &str) -> std::result::Result<(), Failure> {
    if cli.output == Some(OutputFormat::Csv) {
        return Err(Failure::Usage(format!(
            "csv output is not available for `{what}`"
        )));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> CmdResult {
    let csv = cli.output == Some(OutputFormat::Csv);
    match &cli.command {
        Command::Cells { input } => {
            json_only(cli, "cells")?;
            let b = load_binary(input)?;
            let counts = cell_counts(&b);
            Ok(with_config(
                json!({"input": input}),
                &json!({
                    "shape": b.shape(),
                    "counts": counts.counts,
                    "euler_characteristic": counts.euler_characteristic(),
                }),
            ))
        }
        Command::Curve {
            input,
            direction,
            steps,
            range,
        } => {
            let b = load_binary(input)?;
            let u = normalize(*direction)?;
            let curve = euler_curve(&b, u, *steps, *range)?;
            if cli.output == Some(OutputFormat::Json) {
                Ok(with_config(
                    json!({"direction": u, "steps": steps, "range": range}),
                    &curve,
                ))
            } else {
                let mut out = String::from("h,chi\n");
                for (h, chi) in curve.heights().zip(&curve.samples) {
                    writeln!(out, "{h},{chi}").unwrap();
                }
                Ok(out)
            }
        }
        Command::Transform { input, transform } => {
            let b = load_binary(input)?;
            let dirs = sample_directions(transform.directions, transform.seed, transform.mode)?;
            let ect = compute_ect(&b, &dirs, transform.steps, transform.range)?;
            if csv {
                let mut out = String::from("direction,h,chi\n");
                for (i, curve) in ect.curves.iter().enumerate() {
                    for (h, chi) in curve.heights().zip(&curve.samples) {
                        writeln!(out, "{i},{h},{chi}").unwrap();
                    }
                }
                Ok(out)
            } else {
                Ok(with_config(transform_config(transform), &ect))
            }
        }
        Command::Distance { a, b, transform } => {
            json_only(cli, "distance")?;
            let va = load_binary(a)?;
            let vb = load_binary(b)?;
            if va.shape() != vb.shape() {
                return Err(Error::ShapeMismatch(va.shape(), vb.shape()).into());
            }
            let dirs = sample_directions(transform.directions, transform.seed, transform.mode)?;
            let ea = compute_ect(&va, &dirs, transform.steps, transform.range)?;
            let eb = compute_ect(&vb, &dirs, transform.steps, transform.range)?;
            let d2 = match transform.range {
                RangeMode::Grid => ect_distance_sq(&ea, &eb)?,
                RangeMode::Complex => ect_distance_sq_index_aligned(&ea, &eb)?,
            };
            Ok(with_config(
                transform_config(transform),
                &json!({"distance_sq": d2, "distance": d2.sqrt()}),
            ))
        }
        Command::Loss { pred, gt, loss } => {
            json_only(cli, "loss")?;
            let p = load_gray(pred)?;
            let g = load_gray(gt)?;
            let cfg = loss.config();
            let report = total_loss(&p, &g, &cfg)?;
            Ok(with_config(serde_json::to_value(&cfg).unwrap(), &report))
        }
        Command::Metrics { pred, gt } => {
            json_only(cli, "metrics")?;
            let p = load_gray(pred)?;
            let g = load_binary(gt)?;
            let report = evaluate(&p, &g)?;
            Ok(with_config(
                json!({"binarization": "otsu", "bins": 256}),
                &report,
            ))
        }
        Command::Verify {
            suite,
            trials,
            seed,
        } => {
            json_only(cli, "verify")?;
            verify(*suite, *trials, *seed)
        }
        Command::Bench { sizes, runs, loss } => {
            json_only(cli, "bench")?;
            let shapes: Vec<Shape> = sizes.iter().map(|&n| [n, n, n]).collect();
            let cfg = loss.config();
            let report = bench(&shapes, &cfg, *runs)?;
            Ok(with_config(serde_json::to_value(&cfg).unwrap(), &report))
        }
    }
}

/// Runs a verification suite; any failed check turns into exit code 1.
fn verify(suite: Suite, trials: Option<usize>, seed: u64) -> CmdResult {
    let (config, body, pass) = match suite {
        Suite::Lemma1 => {
            let trials = trials.unwrap_or(1000);
            let shape = [4, 4, 4];
            let s = run_lemma1_suite(trials, shape, seed)?;
            let pass = s.passed == s.trials;
            (
                json!({"suite": suite, "trials": trials, "seed": seed, "shape": shape}),
                json!({
                    "trials": s.trials,
                    "passed": s.passed,
                    "failed": s.trials - s.passed,
                    "identical_pairs": s.identical_pairs,
                    "differing_pairs": s.differing_pairs,
                }),
                pass,
            )
        }
        Suite::Lemma2 => {
            let max_extent = 6;
            let s = run_lemma2_suite(max_extent)?;
            let pass = s.failed == 0;
            (
                json!({"suite": suite, "max_extent": max_extent}),
                json!({
                    "shapes": s.reports.len(),
                    "passed": s.passed,
                    "failed": s.failed,
                    "max_by_dimension": s.max_by_dimension,
                    "bound_by_dimension": [1, 3, 9, 27],
                }),
                pass,
            )
        }
        Suite::Stability => {
            let trials = trials.unwrap_or(500);
            let k_max = 5;
            let mut grids = Vec::new();
            let mut pass = true;
            for (i, shape) in [[4, 4, 4], [5, 5, 1]].into_iter().enumerate() {
                let s = run_stability_suite(trials, shape, k_max, seed.wrapping_add(i as u64))?;
                pass &= s.all_pass();
                grids.push(json!({
                    "shape": shape,
                    "trials": s.trials.len(),
                    "passed": s.passed,
                    "failed": s.failed,
                    "worst_slack_ratio": s.worst_slack_ratio,
                    "worst_corollary_ratio": s.worst_corollary_ratio,
                }));
            }
            (
                json!({"suite": suite, "trials": trials, "seed": seed, "k_max": k_max}),
                json!({"grids": grids}),
                pass,
            )
        }
    };
    let mut body = body;
    body["pass"] = json!(pass);
    let text = with_config(config, &body);
    if pass {
        Ok(text)
    } else {
        Err(Failure::Domain(Error::Precondition(format!(
            "verification suite failed: {}",
            text.trim()
        ))))
    }
}
