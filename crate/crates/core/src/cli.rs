//! Command-line front end: `train`, `eval`, and `synth`.
//!
//! Every command computes all of its artifacts in memory first and only then
//! writes them, each through a temp file renamed into place, so a failed run
//! leaves nothing behind. Outputs depend only on the input files and flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::concrete::SchedulePreset;
use crate::data::hsic::write_atomic;
use crate::data::{
    flatten_labeled, read_hsic, remove_bands, synth_scene, BandRange, HsiCube, HsiMatrix, SplitSpec,
};
use crate::eval::{band_table, evaluate_subset, EvalReport, SvmConfig, DEFAULT_BINS};
use crate::model::{train, BandSubset, ReconLoss, TrainConfig, TrainingTrace, DEFAULT_HIDDEN};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "dcae",
    version,
    about = "Dropout concrete autoencoder band selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the selector on an HSIC scene and write subset.json, trace.json, manifest.json.
    Train(TrainArgs),
    /// Score a band subset with a linear SVM and write report.json, bands.csv.
    Eval(EvalArgs),
    /// Write a synthetic HSIC scene plus `<out>.planted.json`.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    /// Full binary cross-entropy.
    Bce,
    /// `-x ln(x_hat)` only.
    Ce,
}

impl From<LossArg> for ReconLoss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Bce => ReconLoss::Bce,
            LossArg::Ce => ReconLoss::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Fraction of labeled pixels used to train the classifier.
    #[arg(long = "train-fraction", default_value_t = 0.1)]
    pub train_fraction: f64,
    /// Stratify the split by class.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub stratified: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of bands to select.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Named schedule; without it all of --tau0, --tauC, --epochs, --batch are required.
    #[arg(long, value_parser = parse_preset, conflicts_with_all = ["tau0", "tau_c", "epochs", "batch"])]
    pub schedule: Option<SchedulePreset>,
    #[arg(long, required_unless_present = "schedule")]
    pub tau0: Option<f64>,
    #[arg(long = "tauC", required_unless_present = "schedule")]
    pub tau_c: Option<f64>,
    #[arg(long, required_unless_present = "schedule")]
    pub epochs: Option<usize>,
    #[arg(long, required_unless_present = "schedule")]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 0.005)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = LossArg::Bce)]
    pub loss: LossArg,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    pub hidden: usize,
    /// 1-based inclusive band ranges to drop first, e.g. "104-108,150-163,220".
    #[arg(long)]
    pub exclude: Option<String>,
    /// Split recorded in the manifest for the evaluation that follows.
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// subset.json written by `train`.
    #[arg(
        long,
        required_unless_present = "all_bands",
        conflicts_with = "all_bands"
    )]
    pub subset: Option<PathBuf>,
    /// Evaluate on every band instead of a selected subset.
    #[arg(long = "all-bands")]
    pub all_bands: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    /// Seed of the first run; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub exclude: Option<String>,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output HSIC path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub d: usize,
    /// Number of planted informative bands.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_preset(s: &str) -> std::result::Result<SchedulePreset, String> {
    s.parse::<SchedulePreset>().map_err(|e| e.to_string())
}

/// Everything needed to rerun a training command bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// `T1`, `T2`, `T3`, or `custom`.
    pub schedule: String,
    pub config: TrainConfig,
    pub split: SplitSpec,
    pub input: PathBuf,
    pub out: PathBuf,
    /// Excluded 1-based band ranges, as given.
    pub exclude: Option<String>,
    pub seed: u64,
}

/// Ground truth written next to a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub planted: Vec<usize>,
}

/// Process exit status for an error: 2 bad arguments, 3 bad data or I/O,
/// 4 training diverged.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) => 2,
        Error::Training { .. } | Error::Domain(_) => 4,
        _ => 3,
    }
}

/// Runs one command and returns a short summary for standard output.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn load_matrix(input: &Path, exclude: Option<&str>) -> Result<HsiMatrix> {
    let ranges = match exclude {
        Some(s) => BandRange::parse_list(s)?,
        None => Vec::new(),
    };
    let cube = read_hsic(input).map_err(|e| with_path(e, input))?;
    flatten_labeled(&remove_bands(&cube, &ranges)?)
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io(e) => Error::data(format!("{}: {e}", path.display())),
        other => other,
    }
}

fn split_spec(a: &SplitArgs, seed: u64) -> Result<SplitSpec> {
    let spec = SplitSpec {
        train_fraction: a.train_fraction,
        stratified: a.stratified,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every `(path, bytes)` pair atomically. If any write fails, the
/// files already written (and a directory created here) are removed.
fn commit(dir: Option<&Path>, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let created_dir = match dir {
        Some(d) if !d.exists() => {
            fs::create_dir_all(d)?;
            Some(d)
        }
        _ => None,
    };
    for (i, (path, bytes)) in files.iter().enumerate() {
        if let Err(e) = write_atomic(path, bytes) {
            for (done, _) in &files[..i] {
                let _ = fs::remove_file(done);
            }
            if let Some(d) = created_dir {
                let _ = fs::remove_dir(d);
            }
            return Err(e);
        }
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let k = usize::try_from(a.k).map_err(|_| Error::param("k too large"))?;
    let (mut config, schedule_name) = match a.schedule {
        Some(p) => (TrainConfig::from_preset(p, k, a.seed), p.name().to_string()),
        None => {
            let mut c = TrainConfig::from_preset(SchedulePreset::T1, k, a.seed);
            // clap guarantees these are present without --schedule.
            c.tau0 = a.tau0.ok_or_else(|| Error::param("--tau0 is required"))?;
            c.tau_c = a.tau_c.ok_or_else(|| Error::param("--tauC is required"))?;
            c.epochs = a
                .epochs
                .ok_or_else(|| Error::param("--epochs is required"))?;
            c.batch_size = a.batch.ok_or_else(|| Error::param("--batch is required"))?;
            (c, "custom".to_string())
        }
    };
    config.lambda = a.lambda;
    config.hidden = a.hidden;
    config.recon_loss = a.loss.into();
    let split = split_spec(&a.split, a.seed)?;

    let matrix = load_matrix(&a.input, a.exclude.as_deref())?;
    config.validate(matrix.d())?;
    let (subset, trace): (BandSubset, TrainingTrace) = train(&matrix, &config)?;

    let manifest = RunManifest {
        version: VERSION.to_string(),
        schedule: schedule_name,
        config,
        split,
        input: a.input.clone(),
        out: a.out.clone(),
        exclude: a.exclude.clone(),
        seed: a.seed,
    };
    commit(
        Some(&a.out),
        &[
            (a.out.join("subset.json"), to_json(&subset)?),
            (a.out.join("trace.json"), to_json(&trace)?),
            (a.out.join("manifest.json"), to_json(&manifest)?),
        ],
    )?;
    let last = trace.epochs.last().map(|e| e.loss).unwrap_or(f64::NAN);
    Ok(format!(
        "selected {} of {} bands: {:?} (final loss {last:.5})",
        subset.k,
        matrix.d(),
        subset.indices
    ))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let matrix = load_matrix(&a.input, a.exclude.as_deref())?;
    let subset: BandSubset = match &a.subset {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
            let s: BandSubset = serde_json::from_slice(&bytes)?;
            if s.scores.len() != matrix.d() {
                return Err(Error::data(format!(
                    "subset scores cover {} bands but the scene has {}",
                    s.scores.len(),
                    matrix.d()
                )));
            }
            s
        }
        // Every band kept with certainty.
        None => BandSubset {
            k: matrix.d(),
            indices: (0..matrix.d()).collect(),
            scores: vec![1.0; matrix.d()],
        },
    };
    if subset.indices.len() != subset.k || subset.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::data(
            "subset indices must be k distinct ascending bands",
        ));
    }
    let spec = split_spec(&a.split, a.seed)?;
    let runs = usize::try_from(a.runs).map_err(|_| Error::param("too many runs"))?;
    let report: EvalReport =
        evaluate_subset(&matrix, &subset, runs, &spec, &SvmConfig::default(), a.bins)?;

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    for row in band_table(&report, &matrix.band_map) {
        csv_out.serialize(row)?;
    }
    let csv_bytes = csv_out
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    commit(
        Some(&a.out),
        &[
            (a.out.join("report.json"), to_json(&report)?),
            (a.out.join("bands.csv"), csv_bytes),
        ],
    )?;
    Ok(format!(
        "OA {:.4} ± {:.4}  AA {:.4} ± {:.4}  Kappa {:.4} ± {:.4} over {} runs",
        report.mean.oa,
        report.std.oa,
        report.mean.aa,
        report.std.aa,
        report.mean.kappa,
        report.std.kappa,
        runs
    ))
}

/// Path of the planted-truth file for a synthetic scene at `out`.
pub fn planted_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".planted.json");
    PathBuf::from(s)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String> {
    let scene = synth_scene(a.d, a.k, a.n, a.sigma, a.seed)?;
    let m = &scene.matrix;
    // One pixel per row: an n x 1 image.
    let cube = HsiCube::new(
        m.n(),
        1,
        m.d(),
        m.values.as_slice().iter().map(|&v| v as f32).collect(),
        Some(m.labels.clone()),
    )?;
    let truth = PlantedTruth {
        d: a.d,
        k: a.k,
        n: a.n,
        sigma: a.sigma,
        seed: a.seed,
        planted: scene.planted.clone(),
    };
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty());
    commit(
        dir,
        &[
            (a.out.clone(), crate::data::hsic::encode(&cube)?),
            (planted_path(&a.out), to_json(&truth)?),
        ],
    )?;
    Ok(format!(
        "wrote {} ({}x{} bands), planted {:?}",
        a.out.display(),
        m.n(),
        m.d(),
        scene.planted
    ))
}
