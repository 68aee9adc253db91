//! The `adipredict` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 internal failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::budget::Deadline;
use crate::dataset::{load_records, save_records, Dataset, FeatureSource, SliceRecord, Task};
use crate::experiment::{run_cv, write_report_files, AlgorithmEntry, ExperimentSpec, TableFormat};
use crate::fixed::FixedEquation;
use crate::fmt::real;
use crate::ingest::{counts_to_volume, ingest_directory, FatClass, VoxelSpacing};
use crate::regressors::{TrainConfig, TrainedModel, ALGORITHM_NAMES};
use crate::seed::cell_seed;
use crate::synth::{generate, SynthSpec};
use crate::{Error, Result};

pub const SEED_ENV: &str = "ADIPREDICT_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "adipredict",
    version = env!("CARGO_PKG_VERSION"),
    long_version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("ADIPREDICT_GIT_DESCRIBE"), ")"),
    about = "Cardiac fat quantity regression from CT fat masks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count mask pixels per slice and write the dataset CSV
    Extract(ExtractArgs),
    /// Generate a synthetic dataset from an affine model plus noise
    Synth(SynthArgs),
    /// Benchmark regressors under k-fold cross-validation
    Experiment(ExperimentArgs),
    /// Apply a fixed equation or saved model to a dataset
    Predict(PredictArgs),
    /// Convert pixel counts to physical volumes
    Volume(VolumeArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Root directory holding <patient_id>/<slice_index>.png
    #[arg(long)]
    pub images: PathBuf,
    /// Metadata CSV for all patients; defaults to <patient_dir>/metadata.csv
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// In-plane pixel size (mm) counts are standardized to
    #[arg(long, default_value_t = 1.0)]
    pub target_spacing: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub patients: usize,
    #[arg(long, default_value_t = 40)]
    pub min_slices: u32,
    #[arg(long, default_value_t = 56)]
    pub max_slices: u32,
    /// Column generated from the affine model: green or red
    #[arg(long, default_value = "green")]
    pub target: String,
    /// Model weights as name=value pairs, e.g. red=1.5,blue=0.8
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub bias: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Comma-separated selections, e.g. linear,knn:k=3,forest:trees=50,max_features=all
    #[arg(long, default_value_t = ALGORITHM_NAMES.join(","))]
    pub algorithms: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock budget per algorithm in seconds
    #[arg(long, default_value_t = 600.0)]
    pub budget_s: f64,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Report file stem; defaults to the task name
    #[arg(long)]
    pub name: Option<String>,
    /// Keep all slices of a patient in the same fold
    #[arg(long)]
    pub group_by_patient: bool,
    /// Record train/eval milliseconds in the report (makes it non-reproducible)
    #[arg(long)]
    pub timings: bool,
    /// Also fit every algorithm on the full dataset and save the models
    #[arg(long)]
    pub save_models: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// fixed:eq8, fixed:eq9, fixed:eq10 or a saved model file
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Voxel spacing dx,dy,dz in mm used for the volume total
    #[arg(long, default_value = "1,1,1")]
    pub spacing: String,
    /// Replace negative predictions with 0 (raw values are kept)
    #[arg(long)]
    pub clamp_nonnegative: bool,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    /// A single pixel count to convert
    #[arg(long, conflicts_with = "dataset")]
    pub count: Option<f64>,
    /// Dataset CSV; prints per-patient volumes of every mask class
    #[arg(long, required_unless_present = "count")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "1,1,1")]
    pub spacing: String,
    /// Write the per-patient table here instead of stdout
    #[arg(long, requires = "dataset")]
    pub output: Option<PathBuf>,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::SingularDesign(_)
        | Error::TrainingDiverged { .. }
        | Error::DeadlineExceeded
        | Error::TooFewPairs(_) => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

/// `ADIPREDICT_SEED`, when set, wins over `--seed`.
pub fn resolve_seed(flag: u64, env: Option<&str>) -> Result<u64> {
    match env {
        Some(v) => v.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("{SEED_ENV}='{v}' is not an unsigned integer"))
        }),
        None => Ok(flag),
    }
}

/// Splits `--algorithms` on commas, re-attaching `key=value` fragments to
/// the selection they belong to.
pub fn split_algorithms(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let head = tok.split(':').next().unwrap_or(tok);
        let continues = !tok.contains(':') && tok.contains('=') && !ALGORITHM_NAMES.contains(&head);
        match out.last_mut() {
            Some(prev) if continues => {
                prev.push(',');
                prev.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}

/// Parses arguments and runs one subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut out = String::new();
    let result = dispatch(cli.command, env_seed.as_deref(), &mut out);
    print!("{out}");
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, env_seed: Option<&str>, out: &mut String) -> Result<()> {
    match cmd {
        Command::Extract(a) => cmd_extract(&a, out),
        Command::Synth(a) => cmd_synth(&a, env_seed, out),
        Command::Experiment(a) => cmd_experiment(&a, env_seed, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Volume(a) => cmd_volume(&a, out),
    }
}

fn require_file(p: &Path) -> Result<()> {
    if !p.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no such file",
        ))
        .at(p));
    }
    Ok(())
}

fn require_dir(p: &Path) -> Result<()> {
    if !p.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no such directory",
        ))
        .at(p));
    }
    Ok(())
}

/// The directory an output file will be written into must exist.
fn require_output_parent(p: &Path) -> Result<()> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => require_dir(dir),
        _ => Ok(()),
    }
}

pub fn cmd_extract(a: &ExtractArgs, out: &mut String) -> Result<()> {
    require_dir(&a.images)?;
    if let Some(m) = &a.metadata {
        require_file(m)?;
    }
    require_output_parent(&a.output)?;
    let counts = ingest_directory(&a.images, a.metadata.as_deref(), a.target_spacing)?;
    let records: Vec<SliceRecord> = counts.iter().map(SliceRecord::from).collect();
    save_records(&records, &a.output)?;
    let mut per_patient: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        *per_patient.entry(&r.patient_id).or_default() += 1;
    }
    for (p, n) in &per_patient {
        let _ = writeln!(out, "{p}\t{n} slices");
    }
    let _ = writeln!(
        out,
        "wrote {} rows for {} patients to {}",
        records.len(),
        per_patient.len(),
        a.output.display()
    );
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs, env_seed: Option<&str>, out: &mut String) -> Result<()> {
    require_output_parent(&a.output)?;
    let d = SynthSpec::default();
    let spec = SynthSpec {
        patients: a.patients,
        min_slices: a.min_slices,
        max_slices: a.max_slices,
        target: a.target.clone(),
        weights: match &a.weights {
            Some(w) => SynthSpec::parse_weights(w)?,
            None if a.target == "red" => vec![("green".into(), 0.6), ("blue".into(), 0.5)],
            None => d.weights,
        },
        bias: a.bias.unwrap_or(d.bias),
        noise_sd: a.noise_sd.unwrap_or(d.noise_sd),
        seed: resolve_seed(a.seed, env_seed)?,
    };
    let records = generate(&spec)?;
    save_records(&records, &a.output)?;
    let _ = writeln!(
        out,
        "wrote {} synthetic rows to {}",
        records.len(),
        a.output.display()
    );
    Ok(())
}

fn parse_task(s: &str) -> Result<Task> {
    s.parse()
}

fn file_stem_for(alg: &str) -> String {
    alg.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_experiment(a: &ExperimentArgs, env_seed: Option<&str>, out: &mut String) -> Result<()> {
    let task = parse_task(&a.task)?;
    let algorithms = split_algorithms(&a.algorithms)
        .iter()
        .map(|s| AlgorithmEntry::parse(s))
        .collect::<Result<Vec<_>>>()?;
    if !(a.budget_s.is_finite() && a.budget_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "--budget-s must be > 0, got {}",
            a.budget_s
        )));
    }
    require_file(&a.dataset)?;
    if a.output_dir.exists() && !a.output_dir.is_dir() {
        return Err(Error::InvalidConfig(format!(
            "{} is not a directory",
            a.output_dir.display()
        )));
    }
    let seed = resolve_seed(a.seed, env_seed)?;
    let name = a.name.clone().unwrap_or_else(|| task.to_string());
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(Error::InvalidConfig(format!("bad report name '{name}'")));
    }

    let dataset = Dataset::load_csv(&a.dataset, task)?;
    let mut spec = ExperimentSpec::new(task, algorithms, seed);
    spec.folds = a.folds;
    spec.budget = Duration::from_secs_f64(a.budget_s);
    spec.group_by_patient = a.group_by_patient;
    spec.echo
        .push(("dataset".into(), a.dataset.display().to_string()));
    let report = run_cv(&dataset, &spec)?;
    let (table, csv) = write_report_files(&report, &a.output_dir, &name, a.timings)?;
    out.push_str(&crate::experiment::render_table(&report, TableFormat::Text));
    let _ = writeln!(out, "wrote {} and {}", table.display(), csv.display());

    if a.save_models {
        let samples = dataset.samples();
        for entry in &spec.algorithms {
            let config = TrainConfig::parse(&entry.name)?;
            let deadline = Deadline::after(spec.budget);
            let model = match config.train(
                &samples,
                cell_seed(seed, &entry.name, spec.folds),
                &deadline,
            ) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("warning: not saving {}: {e}", entry.name);
                    continue;
                }
            };
            let tm = TrainedModel {
                feature_names: dataset.feature_names().to_vec(),
                target_name: dataset.target_name().to_string(),
                model,
            };
            let path = a
                .output_dir
                .join(format!("{name}.{}.model", file_stem_for(&entry.name)));
            tm.save(&path)?;
            let _ = writeln!(out, "saved {}", path.display());
        }
    }
    Ok(())
}

enum PredictModel {
    Fixed(FixedEquation),
    Trained(Box<TrainedModel>),
}

impl PredictModel {
    fn load(s: &str) -> Result<Self> {
        if s.to_ascii_lowercase().starts_with("fixed:") {
            return Ok(PredictModel::Fixed(s.parse()?));
        }
        let p = Path::new(s);
        require_file(p)?;
        Ok(PredictModel::Trained(Box::new(TrainedModel::load(p)?)))
    }

    fn predict(&self, r: &SliceRecord) -> Result<f64> {
        match self {
            PredictModel::Fixed(e) => e.model().predict_source(r),
            PredictModel::Trained(m) => m.predict_source(r),
        }
    }

    fn check_features(&self, sample: &SliceRecord) -> Result<()> {
        let names = match self {
            PredictModel::Fixed(e) => e.model().feature_names,
            PredictModel::Trained(m) => m.feature_names.clone(),
        };
        for n in names {
            if sample.feature(&n).is_none() {
                return Err(Error::UnknownFeature(n));
            }
        }
        Ok(())
    }
}

pub fn cmd_predict(a: &PredictArgs, out: &mut String) -> Result<()> {
    let spacing = VoxelSpacing::parse(&a.spacing)?;
    require_file(&a.dataset)?;
    require_output_parent(&a.output)?;
    let model = PredictModel::load(&a.model)?;
    let records = load_records(&a.dataset)?;
    if let Some(first) = records.first() {
        model.check_features(first)?;
    }

    let mut csv = String::from("patient_id,slice_index,prediction,raw_prediction\n");
    let mut per_patient: BTreeMap<&str, f64> = BTreeMap::new();
    let mut negatives = 0usize;
    for r in &records {
        let raw = model.predict(r)?;
        let value = if a.clamp_nonnegative {
            raw.max(0.0)
        } else {
            raw
        };
        let volume = if value >= 0.0 {
            counts_to_volume(value, &spacing)?
        } else {
            negatives += 1;
            value * spacing.dx * spacing.dy * spacing.dz
        };
        *per_patient.entry(&r.patient_id).or_default() += volume;
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.patient_id,
            r.slice_index,
            real(value),
            real(raw)
        );
    }
    fs::write(&a.output, csv).map_err(|e| Error::Io(e).at(&a.output))?;

    let total: f64 = per_patient.values().sum();
    for (p, v) in &per_patient {
        let _ = writeln!(out, "{p}\tvolume_mm3\t{}", real(*v));
    }
    let _ = writeln!(out, "total_volume_mm3\t{}", real(total));
    if negatives > 0 {
        eprintln!("warning: {negatives} negative predictions included in volumes (use --clamp-nonnegative to zero them)");
    }
    Ok(())
}

pub fn cmd_volume(a: &VolumeArgs, out: &mut String) -> Result<()> {
    let spacing = VoxelSpacing::parse(&a.spacing)?;
    if let Some(c) = a.count {
        let _ = writeln!(out, "{}", real(counts_to_volume(c, &spacing)?));
        return Ok(());
    }
    let path = a
        .dataset
        .as_ref()
        .expect("clap enforces --count or --dataset");
    require_file(path)?;
    if let Some(o) = &a.output {
        require_output_parent(o)?;
    }
    let records = load_records(path)?;
    let mut table: BTreeMap<&str, [f64; 5]> = BTreeMap::new();
    for r in &records {
        let row = table.entry(&r.patient_id).or_default();
        for (k, class) in FatClass::ALL.iter().enumerate() {
            let count = r.feature(class.column()).expect("class columns exist");
            row[k] += counts_to_volume(count, &spacing)?;
        }
    }
    let mut text = String::from("patient_id");
    for class in FatClass::ALL {
        let _ = write!(text, ",{}_mm3", class.column());
    }
    text.push('\n');
    for (p, v) in &table {
        text.push_str(p);
        for x in v {
            let _ = write!(text, ",{}", real(*x));
        }
        text.push('\n');
    }
    match &a.output {
        Some(o) => fs::write(o, text).map_err(|e| Error::Io(e).at(o))?,
        None => out.push_str(&text),
    }
    Ok(())
}
