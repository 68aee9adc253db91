//! Cross-validation benchmark harness.
//!
//! Every algorithm sees the same fold plan (derived from the master seed).
//! Each (algorithm, fold) cell trains with its own sub-seed, so reports do
//! not depend on scheduling: algorithms and folds run in parallel and the
//! output is still byte-for-byte reproducible.
//!
//! Budgets are cooperative. Training loops poll a [`Deadline`] between
//! epochs, trees and folds; a run that finishes over budget is still
//! reported as timed out and carries no metrics.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::budget::Deadline;
use crate::dataset::{split_folds, split_folds_grouped, Dataset, FoldPlan, Samples, Task};
use crate::fmt::{display4, real};
use crate::ingest::csv_err;
use crate::metrics::{evaluate, EvalReport, MetricStatus, PredictionSet};
use crate::regressors::{RegressionModel, TrainConfig};
use crate::seed::cell_seed;
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(600);

pub const REPORT_COLUMNS: [&str; 9] = [
    "algorithm",
    "rho",
    "mae",
    "rmse",
    "rae_pct",
    "rrse_pct",
    "status",
    "train_ms",
    "eval_ms",
];
pub const TABLE_COLUMNS: [&str; 7] = [
    "algorithm",
    "rho",
    "mae",
    "rmse",
    "rae_pct",
    "rrse_pct",
    "status",
];

/// Anything that can be fitted inside a cross-validation cell.
pub trait Learner: Send + Sync {
    fn fit(&self, s: &Samples, seed: u64, deadline: &Deadline) -> Result<RegressionModel>;

    /// Parameter echo for report headers.
    fn describe(&self) -> String;
}

impl Learner for TrainConfig {
    fn fit(&self, s: &Samples, seed: u64, deadline: &Deadline) -> Result<RegressionModel> {
        self.train(s, seed, deadline)
    }

    fn describe(&self) -> String {
        TrainConfig::describe(self)
    }
}

#[derive(Clone)]
pub struct AlgorithmEntry {
    /// Row label; also keys the per-cell seeds.
    pub name: String,
    pub learner: Arc<dyn Learner>,
}

impl AlgorithmEntry {
    pub fn new(name: impl Into<String>, learner: Arc<dyn Learner>) -> Self {
        AlgorithmEntry {
            name: name.into(),
            learner,
        }
    }

    /// Parses a selection string such as `knn:k=3`; the trimmed string
    /// becomes the row label.
    pub fn parse(selection: &str) -> Result<Self> {
        let config = TrainConfig::parse(selection)?;
        Ok(AlgorithmEntry::new(selection.trim(), Arc::new(config)))
    }
}

impl std::fmt::Debug for AlgorithmEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlgorithmEntry")
            .field("name", &self.name)
            .field("learner", &self.learner.describe())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub task: Task,
    pub algorithms: Vec<AlgorithmEntry>,
    pub folds: usize,
    pub seed: u64,
    /// Wall-clock allowance per algorithm, cross-validation included.
    pub budget: Duration,
    /// Keep every slice of a patient in one fold.
    pub group_by_patient: bool,
    /// Extra `key: value` lines for the report header, e.g. the input path.
    pub echo: Vec<(String, String)>,
}

impl ExperimentSpec {
    pub fn new(task: Task, algorithms: Vec<AlgorithmEntry>, seed: u64) -> Self {
        ExperimentSpec {
            task,
            algorithms,
            folds: DEFAULT_FOLDS,
            seed,
            budget: DEFAULT_BUDGET,
            group_by_patient: false,
            echo: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.budget.is_zero() {
            return Err(Error::InvalidConfig("budget must be > 0".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidConfig(format!(
                    "algorithm '{}' listed twice",
                    a.name
                )));
            }
            if a.name.trim().is_empty() || a.name.contains(['\n', '\r']) {
                return Err(Error::InvalidConfig(format!(
                    "bad algorithm label '{}'",
                    a.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    TimedOut,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub algorithm: String,
    pub config: String,
    pub status: RunStatus,
    /// Present only for `Ok` rows.
    pub report: Option<EvalReport>,
    pub train_ms: f64,
    pub eval_ms: f64,
}

impl RankingRow {
    /// Status column value.
    pub fn status_str(&self) -> &'static str {
        match (&self.status, &self.report) {
            (RunStatus::Ok, Some(r)) => r.status.as_str(),
            (RunStatus::Ok, None) => MetricStatus::Ok.as_str(),
            (RunStatus::TimedOut, _) => "timed_out",
            (RunStatus::Failed(_), _) => "failed",
        }
    }

    fn rho(&self) -> Option<f64> {
        self.report.and_then(|r| r.rho)
    }

    fn rrse(&self) -> Option<f64> {
        self.report.and_then(|r| r.rrse_pct)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub rows: Vec<RankingRow>,
    pub echo: Vec<(String, String)>,
    pub build_tag: String,
}

/// Rho descending, then lower RRSE, then name; rows without rho follow,
/// then timed-out and failed rows.
fn rank(a: &RankingRow, b: &RankingRow) -> Ordering {
    let class = |r: &RankingRow| match (&r.status, r.rho()) {
        (RunStatus::Ok, Some(_)) => 0,
        (RunStatus::Ok, None) => 1,
        (RunStatus::TimedOut, _) => 2,
        (RunStatus::Failed(_), _) => 3,
    };
    let by_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    class(a)
        .cmp(&class(b))
        .then_with(|| by_opt(b.rho(), a.rho()))
        .then_with(|| by_opt(a.rrse(), b.rrse()))
        .then_with(|| a.algorithm.cmp(&b.algorithm))
}

pub fn fold_plan(d: &Dataset, folds: usize, seed: u64, group_by_patient: bool) -> Result<FoldPlan> {
    if group_by_patient {
        split_folds_grouped(&d.patient_ids(), folds, seed)
    } else {
        split_folds(d.len(), folds, seed)
    }
}

/// Runs every algorithm under k-fold cross-validation on `d`.
pub fn run_cv(d: &Dataset, spec: &ExperimentSpec) -> Result<RankingReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    spec.validate()?;
    let d = if d.task() == spec.task {
        d.clone()
    } else {
        d.with_task(spec.task)?
    };
    let plan = fold_plan(&d, spec.folds, spec.seed, spec.group_by_patient)?;
    let echo = vec![
        ("task".to_string(), spec.task.to_string()),
        ("instances".to_string(), d.len().to_string()),
        ("features".to_string(), d.feature_names().join(" ")),
        ("target".to_string(), d.target_name().to_string()),
    ];
    Ok(run_plan(&d.samples(), &plan, spec, echo))
}

/// Cross-validation on bare samples, ignoring `spec.task`. Patient
/// grouping is unavailable here since samples carry no patient ids.
pub fn run_cv_samples(s: &Samples, spec: &ExperimentSpec) -> Result<RankingReport> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    spec.validate()?;
    if spec.group_by_patient {
        return Err(Error::InvalidConfig(
            "patient grouping needs a dataset".into(),
        ));
    }
    let plan = split_folds(s.len(), spec.folds, spec.seed)?;
    let echo = vec![
        ("instances".to_string(), s.len().to_string()),
        ("features".to_string(), s.feature_names.join(" ")),
        ("target".to_string(), s.target_name.clone()),
    ];
    Ok(run_plan(s, &plan, spec, echo))
}

fn run_plan(
    samples: &Samples,
    plan: &FoldPlan,
    spec: &ExperimentSpec,
    mut echo: Vec<(String, String)>,
) -> RankingReport {
    let mut rows: Vec<RankingRow> = spec
        .algorithms
        .par_iter()
        .map(|a| run_algorithm(a, samples, plan, spec))
        .collect();
    rows.sort_by(rank);

    echo.extend([
        ("folds".to_string(), spec.folds.to_string()),
        ("seed".to_string(), spec.seed.to_string()),
        ("budget_s".to_string(), real(spec.budget.as_secs_f64())),
        (
            "group_by_patient".to_string(),
            spec.group_by_patient.to_string(),
        ),
    ]);
    for a in &spec.algorithms {
        echo.push((format!("algorithm {}", a.name), a.learner.describe()));
    }
    echo.extend(spec.echo.iter().cloned());
    RankingReport {
        rows,
        echo,
        build_tag: crate::build_tag(),
    }
}

struct CellOutcome {
    predictions: Vec<(usize, f64)>,
    train: Duration,
    eval: Duration,
}

fn run_cell(
    a: &AlgorithmEntry,
    samples: &Samples,
    plan: &FoldPlan,
    fold: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<CellOutcome> {
    deadline.check()?;
    let (train_idx, test_idx) = plan.split(fold);
    let train = samples.select(&train_idx);
    let t0 = Instant::now();
    let model = a
        .learner
        .fit(&train, cell_seed(seed, &a.name, fold), deadline)?;
    let train_time = t0.elapsed();
    deadline.check()?;
    let t1 = Instant::now();
    let mut predictions = Vec::with_capacity(test_idx.len());
    for &i in &test_idx {
        let v = model.predict(&samples.x[i])?;
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "non-finite prediction on fold {fold}"
            )));
        }
        predictions.push((i, v));
    }
    Ok(CellOutcome {
        predictions,
        train: train_time,
        eval: t1.elapsed(),
    })
}

fn run_algorithm(
    a: &AlgorithmEntry,
    samples: &Samples,
    plan: &FoldPlan,
    spec: &ExperimentSpec,
) -> RankingRow {
    let start = Instant::now();
    let deadline = Deadline::after(spec.budget);
    let cells: Vec<Result<CellOutcome>> = (0..plan.k())
        .into_par_iter()
        .map(|f| run_cell(a, samples, plan, f, spec.seed, &deadline))
        .collect();
    let over_budget = start.elapsed() > spec.budget;

    let mut row = RankingRow {
        algorithm: a.name.clone(),
        config: a.learner.describe(),
        status: RunStatus::Ok,
        report: None,
        train_ms: 0.0,
        eval_ms: 0.0,
    };
    let mut predicted = vec![f64::NAN; samples.len()];
    let mut failure = None;
    let mut timed_out = over_budget;
    for c in cells {
        match c {
            Ok(c) => {
                row.train_ms += c.train.as_secs_f64() * 1e3;
                row.eval_ms += c.eval.as_secs_f64() * 1e3;
                for (i, v) in c.predictions {
                    predicted[i] = v;
                }
            }
            Err(Error::DeadlineExceeded) => timed_out = true,
            Err(e) => {
                failure.get_or_insert(e.to_string());
            }
        }
    }
    if timed_out {
        row.status = RunStatus::TimedOut;
        return row;
    }
    if let Some(msg) = failure {
        row.status = RunStatus::Failed(msg);
        return row;
    }
    // pooled in dataset order, independent of the fold layout
    let pooled = PredictionSet::from_pairs(predicted.into_iter().zip(samples.y.iter().copied()));
    match evaluate(&pooled) {
        Ok(r) => row.report = Some(r),
        Err(e) => row.status = RunStatus::Failed(e.to_string()),
    }
    row
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

/// Quotes a CSV field when it holds a separator or quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt4(v: Option<f64>) -> String {
    v.map(display4).unwrap_or_default()
}

fn display_cells(r: &RankingRow) -> Vec<String> {
    let m = r.report;
    vec![
        r.algorithm.clone(),
        opt4(m.and_then(|m| m.rho)),
        opt4(m.map(|m| m.mae)),
        opt4(m.map(|m| m.rmse)),
        opt4(m.and_then(|m| m.rae_pct)),
        opt4(m.and_then(|m| m.rrse_pct)),
        r.status_str().to_string(),
    ]
}

/// Display-precision ranking table (4 decimals).
pub fn render_table(r: &RankingReport, format: TableFormat) -> String {
    let body: Vec<Vec<String>> = r.rows.iter().map(display_cells).collect();
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&TABLE_COLUMNS.join(","));
            out.push('\n');
            for cells in &body {
                out.push_str(&csv_field(&cells[0]));
                out.push(',');
                out.push_str(&cells[1..].join(","));
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let header: Vec<String> = TABLE_COLUMNS.iter().map(|s| s.to_string()).collect();
            let mut widths: Vec<usize> = header.iter().map(|s| s.chars().count()).collect();
            for cells in &body {
                for (w, c) in widths.iter_mut().zip(cells) {
                    *w = (*w).max(c.chars().count());
                }
            }
            for cells in std::iter::once(&header).chain(&body) {
                let mut line = String::new();
                for (j, (c, w)) in cells.iter().zip(&widths).enumerate() {
                    let numeric = (1..=5).contains(&j);
                    let _ = match (j, numeric) {
                        (0, _) => write!(line, "{c:<w$}"),
                        (_, true) => write!(line, "  {c:>w$}"),
                        (_, false) => write!(line, "  {c:<w$}"),
                    };
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
        }
    }
    out
}

fn header_lines(r: &RankingReport) -> String {
    let mut s = format!("# {}\n", r.build_tag);
    for (k, v) in &r.echo {
        let _ = writeln!(s, "# {k}: {v}");
    }
    for row in &r.rows {
        if let RunStatus::Failed(msg) = &row.status {
            let _ = writeln!(s, "# failure {}: {}", row.algorithm, msg.replace('\n', " "));
        }
    }
    s
}

/// Full-precision report CSV. Reals use 17 significant digits; undefined
/// metrics are empty. Timings are written only when `timings` is set, so
/// repeated runs produce identical bytes by default.
pub fn render_report_csv(r: &RankingReport, timings: bool) -> String {
    let mut s = header_lines(r);
    s.push_str(&REPORT_COLUMNS.join(","));
    s.push('\n');
    let full = |v: Option<f64>| v.map(real).unwrap_or_default();
    for row in &r.rows {
        let m = row.report;
        let ms = |v: f64| if timings { real(v) } else { String::new() };
        let cells = [
            csv_field(&row.algorithm),
            full(m.and_then(|m| m.rho)),
            full(m.map(|m| m.mae)),
            full(m.map(|m| m.rmse)),
            full(m.and_then(|m| m.rae_pct)),
            full(m.and_then(|m| m.rrse_pct)),
            row.status_str().to_string(),
            ms(row.train_ms),
            ms(row.eval_ms),
        ];
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// One row read back from a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub algorithm: String,
    pub rho: Option<f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub rae_pct: Option<f64>,
    pub rrse_pct: Option<f64>,
    pub status: String,
    pub train_ms: Option<f64>,
    pub eval_ms: Option<f64>,
}

impl ReportLine {
    pub fn from_row(row: &RankingRow) -> Self {
        let m = row.report;
        ReportLine {
            algorithm: row.algorithm.clone(),
            rho: m.and_then(|m| m.rho),
            mae: m.map(|m| m.mae),
            rmse: m.map(|m| m.rmse),
            rae_pct: m.and_then(|m| m.rae_pct),
            rrse_pct: m.and_then(|m| m.rrse_pct),
            status: row.status_str().to_string(),
            train_ms: Some(row.train_ms),
            eval_ms: Some(row.eval_ms),
        }
    }
}

pub fn read_report_csv<R: io::Read>(reader: R) -> Result<Vec<ReportLine>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            column: "header".into(),
            message: format!("expected columns {}", REPORT_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<Option<f64>> {
            let t = rec.get(i).unwrap_or("");
            if t.is_empty() {
                return Ok(None);
            }
            t.parse().map(Some).map_err(|_| Error::Parse {
                line,
                column: REPORT_COLUMNS[i].into(),
                message: format!("not a number: '{t}'"),
            })
        };
        out.push(ReportLine {
            algorithm: rec.get(0).unwrap_or("").to_string(),
            rho: num(1)?,
            mae: num(2)?,
            rmse: num(3)?,
            rae_pct: num(4)?,
            rrse_pct: num(5)?,
            status: rec.get(6).unwrap_or("").to_string(),
            train_ms: num(7)?,
            eval_ms: num(8)?,
        });
    }
    Ok(out)
}

pub fn load_report_csv(path: &Path) -> Result<Vec<ReportLine>> {
    let f = fs::File::open(path).map_err(|e| Error::Io(e).at(path))?;
    read_report_csv(f).map_err(|e| e.at(path))
}

/// Writes `<name>.table.txt` and `<name>.report.csv` into `dir`.
pub fn write_report_files(
    r: &RankingReport,
    dir: &Path,
    name: &str,
    timings: bool,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(e).at(dir))?;
    let table = dir.join(format!("{name}.table.txt"));
    let report = dir.join(format!("{name}.report.csv"));
    let text = format!("{}{}", header_lines(r), render_table(r, TableFormat::Text));
    fs::write(&table, text).map_err(|e| Error::Io(e).at(&table))?;
    fs::write(&report, render_report_csv(r, timings)).map_err(|e| Error::Io(e).at(&report))?;
    Ok((table, report))
}
