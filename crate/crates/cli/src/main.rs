//! `geosel`: partition, score, calibrate, evaluate, split and synth.
//!
//! Errors are printed to stderr as `geosel: error[<class>]: <message>` and
//! the process exits with the class's code: 2 usage, 3 input-format,
//! 4 consistency, 5 empty-result. Set `GEOSEL_LOG=info` (or `debug`) for
//! progress messages.

mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geosel::io::{self, ProbabilityFormat, ScoreRow};
use geosel::selection::EntropyMode;
use geosel::selective::{self, Scorer, REPORT_SCALES_KM};
use geosel::synth::{self, SynthSpec};
use geosel::{build_partition, CellGrid, DistanceKm, EvalRecord, Method, PartitionParams};

use crate::error::{CliError, ErrorClass};

#[derive(Parser)]
#[command(
    name = "geosel",
    version,
    about = "Localizability scoring for cell-based geolocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an adaptive cell grid from training coordinates.
    Partition(PartitionArgs),
    /// Score predictions with one or more confidence methods.
    Score(ScoreArgs),
    /// Learn the gate threshold on a validation set.
    Calibrate(CalibrateArgs),
    /// Write the risk-coverage curve and the selective report.
    Evaluate(GateArgs),
    /// Split predictions into accepted and rejected files.
    Split(GateArgs),
    /// Generate a synthetic predictions corpus over a grid.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PartitionArgs {
    /// CSV of training coordinates, `lat,lon` per line.
    #[arg(long)]
    input: PathBuf,
    /// Grid file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 50)]
    min_count: usize,
    #[arg(long, default_value_t = 1000)]
    max_count: usize,
    #[arg(long, default_value_t = 16)]
    max_depth: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntropyArg {
    Unnormalized,
    Renormalized,
}

impl From<EntropyArg> for EntropyMode {
    fn from(e: EntropyArg) -> Self {
        match e {
            EntropyArg::Unnormalized => EntropyMode::Unnormalized,
            EntropyArg::Renormalized => EntropyMode::Renormalized,
        }
    }
}

#[derive(Args)]
struct ScorerArgs {
    /// Seed of the random selector.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whether spatial entropy renormalizes the retained super-cell masses.
    #[arg(long, value_enum, default_value_t = EntropyArg::Unnormalized)]
    entropy: EntropyArg,
}

impl ScorerArgs {
    fn scorer(&self, method: Method) -> Scorer {
        Scorer::new(method)
            .with_seed(self.seed)
            .with_entropy(self.entropy.into())
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Predictions file.
    #[arg(long)]
    input: PathBuf,
    /// Scores CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Repeatable; rows follow the order given.
    #[arg(long, required = true)]
    method: Vec<Method>,
    /// Repeatable; defaults to 1, 25, 200, 750 and 2500 km.
    #[arg(long)]
    scale_km: Vec<f64>,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Validation predictions file.
    #[arg(long)]
    input: PathBuf,
    /// Calibration JSON to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    scale_km: f64,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Args)]
struct GateArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Predictions file.
    #[arg(long)]
    input: PathBuf,
    /// Directory to write into; created if missing.
    #[arg(long)]
    output: PathBuf,
    /// Defaults to the calibration's method.
    #[arg(long)]
    method: Option<Method>,
    /// Defaults to the calibration's scale.
    #[arg(long)]
    scale_km: Option<f64>,
    /// Explicit threshold; `inf` and `-inf` are accepted.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "calibration")]
    theta: Option<f64>,
    /// Calibration JSON providing the threshold.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Directory to write `predictions.tsv` and `labels.csv` into.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_localizable: usize,
    #[arg(long, default_value_t = 1000)]
    n_nonlocalizable: usize,
    /// Sharpness of planted distributions; `inf` gives degenerate ones.
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    /// Planted scale.
    #[arg(long, default_value_t = 25.0)]
    scale_km: f64,
    /// Monte-Carlo passes per record; 0 for none.
    #[arg(long, default_value_t = 5)]
    mc_passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn output_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn load_grid(path: &Path) -> Result<CellGrid, CliError> {
    let grid = io::parse_grid(&read(path)?).map_err(|e| CliError::from(e).in_file(path))?;
    log::info!("grid {} with {} cells", grid.fingerprint(), grid.len());
    Ok(grid)
}

fn load_predictions(path: &Path, grid: &CellGrid) -> Result<Vec<EvalRecord>, CliError> {
    let records =
        io::parse_predictions(&read(path)?, grid).map_err(|e| CliError::from(e).in_file(path))?;
    log::info!("{} records from {}", records.len(), path.display());
    Ok(records)
}

fn scale(km: f64) -> Result<DistanceKm, CliError> {
    DistanceKm::new(km).map_err(|e| CliError::usage(format!("--scale-km: {e}")))
}

fn partition(args: &PartitionArgs) -> Result<(), CliError> {
    let points = io::parse_coordinates(&read(&args.input)?)
        .map_err(|e| CliError::from(e).in_file(&args.input))?;
    let params = PartitionParams {
        min_count: args.min_count,
        max_count: args.max_count,
        max_depth: args.max_depth,
    };
    let partition = build_partition(&points, params)?;
    write(&args.output, &io::write_grid(&partition.grid))?;
    println!(
        "cells: {}\tdiscarded_points: {}",
        partition.grid.len(),
        partition.discarded_points
    );
    Ok(())
}

fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let grid = load_grid(&args.grid)?;
    let records = load_predictions(&args.input, &grid)?;
    if records.is_empty() {
        return Err(CliError::new(
            ErrorClass::EmptyResult,
            "empty input: no prediction records",
        ));
    }
    let mut scales: Vec<DistanceKm> = if args.scale_km.is_empty() {
        REPORT_SCALES_KM
            .iter()
            .map(|&km| scale(km))
            .collect::<Result<_, _>>()?
    } else {
        args.scale_km
            .iter()
            .map(|&km| scale(km))
            .collect::<Result<_, _>>()?
    };
    scales.sort_by(|a, b| a.value().total_cmp(&b.value()));
    scales.dedup();

    // table[m][s][r]
    let mut table = Vec::with_capacity(args.method.len());
    for &method in &args.method {
        let scorer = args.scorer.scorer(method);
        let per_scale = scales
            .iter()
            .map(|&d| scorer.score(&records, &grid, d))
            .collect::<Result<Vec<_>, _>>()?;
        table.push(per_scale);
    }
    let mut rows = Vec::with_capacity(records.len() * args.method.len() * scales.len());
    for (r, record) in records.iter().enumerate() {
        for per_scale in &table {
            for (s, &d) in scales.iter().enumerate() {
                rows.push(ScoreRow {
                    image_id: &record.image_id,
                    scale: d,
                    score: per_scale[s][r],
                });
            }
        }
    }
    write(&args.output, &io::write_scores(&rows))
}

fn calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let d = scale(args.scale_km)?;
    if args.method == Method::Random {
        return Err(selective::EvalError::NotCalibratable(Method::Random).into());
    }
    let grid = load_grid(&args.grid)?;
    let records = load_predictions(&args.input, &grid)?;
    let result =
        selective::calibrate_threshold(&records, &grid, d, &args.scorer.scorer(args.method))?;
    log::info!(
        "theta* = {} (target coverage {}, achieved {})",
        result.theta_star,
        result.target_coverage,
        result.achieved_coverage
    );
    write(&args.output, &io::write_calibration(&result))
}

struct Gate {
    method: Method,
    scale: DistanceKm,
    theta: f64,
}

fn resolve_gate(args: &GateArgs) -> Result<Gate, CliError> {
    let calibration = match &args.calibration {
        Some(path) => {
            Some(io::parse_calibration(&read(path)?).map_err(|e| CliError::from(e).in_file(path))?)
        }
        None => None,
    };
    let method = match (args.method, &calibration) {
        (Some(m), Some(c)) if m != c.method => {
            return Err(CliError::usage(format!(
                "--method {m} disagrees with calibration method {}",
                c.method
            )))
        }
        (Some(m), _) => m,
        (None, Some(c)) => c.method,
        (None, None) => {
            return Err(CliError::usage(
                "--method is required without --calibration",
            ))
        }
    };
    let scale = match (args.scale_km, &calibration) {
        (Some(km), _) => scale(km)?,
        (None, Some(c)) => c.scale,
        (None, None) => {
            return Err(CliError::usage(
                "--scale-km is required without --calibration",
            ))
        }
    };
    let theta = match (args.theta, &calibration) {
        (Some(t), _) if t.is_nan() => return Err(CliError::usage("--theta must not be NaN")),
        (Some(t), _) => t,
        (None, Some(c)) => c.theta_star,
        (None, None) => {
            return Err(CliError::usage(
                "missing threshold: pass --theta or --calibration",
            ))
        }
    };
    Ok(Gate {
        method,
        scale,
        theta,
    })
}

fn evaluate(args: &GateArgs) -> Result<(), CliError> {
    let gate = resolve_gate(args)?;
    let grid = load_grid(&args.grid)?;
    let records = load_predictions(&args.input, &grid)?;
    let scorer = args.scorer.scorer(gate.method);
    let report = selective::selective_report(&records, &grid, gate.scale, &scorer, gate.theta)?;
    let curve = selective::rc_curve(&records, &grid, gate.scale, &scorer)?;
    output_dir(&args.output)?;
    write(&args.output.join("rc.csv"), &io::write_rc_curve(&curve))?;
    write(&args.output.join("report.json"), &io::write_report(&report))
}

fn split(args: &GateArgs) -> Result<(), CliError> {
    let gate = resolve_gate(args)?;
    let grid = load_grid(&args.grid)?;
    let records = load_predictions(&args.input, &grid)?;
    if records.is_empty() {
        return Err(CliError::new(
            ErrorClass::EmptyResult,
            "empty input: no prediction records",
        ));
    }
    let scorer = args.scorer.scorer(gate.method);
    let (accepted, rejected) =
        selective::split_dataset(&records, &grid, gate.scale, &scorer, gate.theta)?;
    let owned = |subset: Vec<&EvalRecord>| subset.into_iter().cloned().collect::<Vec<_>>();
    let (accepted, rejected) = (owned(accepted), owned(rejected));
    output_dir(&args.output)?;
    for (name, subset) in [
        ("localizable.tsv", &accepted),
        ("non_localizable.tsv", &rejected),
    ] {
        let text = io::write_predictions(subset, &grid, ProbabilityFormat::Exact);
        write(&args.output.join(name), &text)?;
    }
    println!(
        "localizable: {}\tnon_localizable: {}",
        accepted.len(),
        rejected.len()
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        n_localizable: args.n_localizable,
        n_nonlocalizable: args.n_nonlocalizable,
        concentration: args.concentration,
        scale: scale(args.scale_km)?,
        mc_passes: args.mc_passes,
        seed: args.seed,
    };
    let grid = load_grid(&args.grid)?;
    let corpus = synth::generate(&grid, &spec)?;
    output_dir(&args.output)?;
    let predictions =
        io::write_predictions(&corpus.records, &grid, ProbabilityFormat::Significant9);
    write(&args.output.join("predictions.tsv"), &predictions)?;
    write(
        &args.output.join("labels.csv"),
        &io::write_planted_labels(&corpus.records, &corpus.planted),
    )
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Partition(a) => partition(a),
        Command::Score(a) => score(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Split(a) => split(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GEOSEL_LOG"))
        .format_timestamp(None)
        .init();
    let result = match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => Err(CliError::usage(e.render().to_string().trim_end())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geosel: error[{}]: {}", e.class.token(), e.message);
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}
