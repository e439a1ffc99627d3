//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 malformed corpus,
//! 3 unparsable trajectory, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::grpo::{train, TrainConfig, TrainingHistory};
use crate::report::{smoothed_csv, svg_chart, SMOOTHING_WINDOW};
use crate::retrieval::{Index, DEFAULT_TOP_K};
use crate::reward::{compute_reward, RewardConfig, DEFAULT_TAU};
use crate::simenv::{gen_world, SimConfig, DEFAULT_FAULT_RATE, DEFAULT_LABEL_NOISE};
use crate::store::{
    read_corpus_file, read_params, read_world, write_params, write_world, StoreError,
};
use crate::trajectory::parse;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MALFORMED_CORPUS: i32 = 2;
pub const EXIT_PARSE_FAILURE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const PARAMS_FILE: &str = "params.json";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Debug, Parser)]
#[command(
    name = "knowsearch",
    version,
    about = "Train and evaluate a when-to-search policy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world (dataset, corpus, knowledge table).
    GenData {
        #[arg(long)]
        known: usize,
        #[arg(long)]
        unknown: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LABEL_NOISE)]
        label_noise: f64,
        #[arg(long, default_value_t = DEFAULT_FAULT_RATE)]
        fault_rate: f64,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
    },
    /// Index a JSON-lines corpus and print its statistics.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Run GRPO on a world; writes params.json and curves.csv.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation; prints metrics as JSON.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        world: PathBuf,
    },
    /// Score one trajectory against gold answers; prints the breakdown as JSON.
    Score {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        golds: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Summarize training curves as smoothed CSV, or SVG when --out ends in .svg.
    Report {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SMOOTHING_WINDOW)]
        window: usize,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl std::fmt::Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::new(EXIT_FAILURE, e)
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

/// A JSON array of strings, or one gold answer per non-blank line.
pub fn parse_golds(text: &str) -> Vec<String> {
    if let Ok(list) = serde_json::from_str::<Vec<String>>(text) {
        return list;
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let emit = |out: &mut dyn Write, text: &str| {
        writeln!(out, "{text}").map_err(|e| Failure::new(EXIT_FAILURE, e))
    };
    match cmd {
        Command::GenData {
            known,
            unknown,
            seed,
            out: dir,
            label_noise,
            fault_rate,
            top_k,
        } => {
            let sim = SimConfig {
                label_noise,
                fault_rate,
                top_k,
            };
            sim.validate().map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let world = gen_world(known, unknown, seed).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            write_world(&dir, &world, sim)?;
            emit(
                out,
                &format!(
                    "wrote {} questions ({} known) and {} documents to {}",
                    world.dataset.len(),
                    world.dataset.count_known(),
                    world.corpus.len(),
                    dir.display()
                ),
            )
        }
        Command::Ingest { corpus } => {
            let docs = read_corpus_file(&corpus).map_err(|e| match e {
                StoreError::Malformed { .. } => Failure::new(EXIT_MALFORMED_CORPUS, e),
                other => Failure::from(other),
            })?;
            let index = Index::build(docs).map_err(|e| Failure::new(EXIT_MALFORMED_CORPUS, e))?;
            let stats = index.stats();
            emit(out, &format!("documents: {}", stats.documents))?;
            emit(out, &format!("avgdl: {:.4}", stats.avgdl))?;
            emit(out, &format!("terms: {}", stats.terms))
        }
        Command::Train {
            config,
            world,
            out: dir,
        } => {
            let cfg = match config {
                Some(path) => TrainConfig::from_kv_text(&read_text(&path)?)
                    .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?,
                None => TrainConfig::default(),
            };
            let world = read_world(&world)?;
            let (params, history) =
                train(&world, &cfg).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
            fs::create_dir_all(&dir)
                .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", dir.display())))?;
            write_params(&dir.join(PARAMS_FILE), &params)?;
            write_text(&dir.join(CURVES_FILE), &history.to_csv())?;
            let (reward, sr_known, sr_unknown) = history.tail_means(20);
            emit(
                out,
                &format!(
                    "trained {} steps: final-20 mean_reward {reward:.4}, sr_known {sr_known:.4}, sr_unknown {sr_unknown:.4}",
                    history.len()
                ),
            )
        }
        Command::Eval { params, world } => {
            let params = read_params(&params)?;
            let world = read_world(&world)?;
            let metrics = crate::eval::evaluate(&params, &world)
                .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
            emit(
                out,
                &serde_json::to_string(&metrics).expect("metrics serialize"),
            )
        }
        Command::Score {
            trajectory,
            golds,
            tau,
        } => {
            let cfg = RewardConfig::new(tau).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let text = read_text(&trajectory)?;
            let traj = parse(&text).map_err(|e| Failure::new(EXIT_PARSE_FAILURE, e))?;
            let golds = parse_golds(&read_text(&golds)?);
            let breakdown =
                compute_reward(&traj, &golds, &cfg).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
            emit(
                out,
                &serde_json::to_string(&breakdown).expect("breakdown serializes"),
            )
        }
        Command::Report {
            curves,
            out: target,
            window,
        } => {
            let history = TrainingHistory::from_csv(read_text(&curves)?.as_bytes())
                .map_err(|e| Failure::new(EXIT_FAILURE, e))?;
            let is_svg = target
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
            let body = if is_svg {
                svg_chart(&history, window)
            } else {
                smoothed_csv(&history, window)
            };
            write_text(&target, &body)?;
            emit(
                out,
                &format!("wrote {} ({} steps)", target.display(), history.len()),
            )
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
