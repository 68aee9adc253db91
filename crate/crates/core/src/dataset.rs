//! Slice records, regression tasks, dataset CSV persistence and fold plans.
//!
//! A dataset CSV stores one [`SliceRecord`] per slice with the raw
//! (standardized) class counts. A [`Task`] selects which quantity is the
//! target and which counts become features, producing [`SliceInstance`]s.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use crate::ingest::{csv_err, SliceCounts};
use crate::seed::Lcg64;
use crate::{fmt as numfmt, Error, Result};

/// Column order of the dataset CSV.
pub const CSV_COLUMNS: [&str; 8] = [
    "patient_id",
    "slice_index",
    "images_qnt",
    "red",
    "green",
    "blue",
    "grey",
    "black",
];

/// Anything that can supply a named feature value.
pub trait FeatureSource {
    fn feature(&self, name: &str) -> Option<f64>;
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRecord {
    pub patient_id: String,
    pub slice_index: u32,
    pub images_qnt: u32,
    pub red: f64,
    pub green: f64,
    pub blue: f64,
    pub grey: f64,
    pub black: f64,
}

impl SliceRecord {
    /// All fat regardless of label: grey + red + green + blue.
    pub fn grey_total(&self) -> f64 {
        self.grey + self.red + self.green + self.blue
    }
}

impl FeatureSource for SliceRecord {
    fn feature(&self, name: &str) -> Option<f64> {
        Some(match name {
            "red" => self.red,
            "green" => self.green,
            "blue" => self.blue,
            "grey" => self.grey,
            "black" => self.black,
            "grey_total" => self.grey_total(),
            "slice_index" => self.slice_index as f64,
            "images_qnt" => self.images_qnt as f64,
            _ => return None,
        })
    }
}

impl FeatureSource for SliceCounts {
    fn feature(&self, name: &str) -> Option<f64> {
        SliceRecord::from(self).feature(name)
    }
}

impl From<&SliceCounts> for SliceRecord {
    fn from(c: &SliceCounts) -> Self {
        SliceRecord {
            patient_id: c.patient_id.clone(),
            slice_index: c.slice_index,
            images_qnt: c.images_qnt,
            red: c.red,
            green: c.green,
            blue: c.blue,
            grey: c.grey,
            black: c.black,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    MediastinalFromEpicardial,
    EpicardialFromMediastinal,
    MediastinalUnprocessed,
    EpicardialUnprocessed,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::MediastinalFromEpicardial,
        Task::EpicardialFromMediastinal,
        Task::MediastinalUnprocessed,
        Task::EpicardialUnprocessed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::MediastinalFromEpicardial => "mediastinal-from-epicardial",
            Task::EpicardialFromMediastinal => "epicardial-from-mediastinal",
            Task::MediastinalUnprocessed => "mediastinal-unprocessed",
            Task::EpicardialUnprocessed => "epicardial-unprocessed",
        }
    }

    pub fn target_name(self) -> &'static str {
        match self {
            Task::MediastinalFromEpicardial | Task::MediastinalUnprocessed => "green",
            Task::EpicardialFromMediastinal | Task::EpicardialUnprocessed => "red",
        }
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            Task::MediastinalFromEpicardial => {
                &["red", "blue", "grey", "black", "slice_index", "images_qnt"]
            }
            Task::EpicardialFromMediastinal => &[
                "green",
                "blue",
                "grey",
                "black",
                "slice_index",
                "images_qnt",
            ],
            Task::MediastinalUnprocessed | Task::EpicardialUnprocessed => {
                &["grey_total", "black", "slice_index", "images_qnt"]
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// A training row: features in [`Dataset::feature_names`] order plus target.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceInstance {
    pub features: Vec<f64>,
    pub target: f64,
    pub patient_id: String,
    pub slice_index: u32,
}

/// Feature matrix and targets, the form every regressor trains on.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Samples {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidConfig(format!(
                "{} feature rows but {} targets",
                x.len(),
                y.len()
            )));
        }
        for row in &x {
            if row.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature_names.len(),
                    got: row.len(),
                });
            }
        }
        Ok(Samples {
            x,
            y,
            feature_names,
            target_name: "y".to_string(),
        })
    }

    /// Unnamed features `x1..xp`.
    pub fn unnamed(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = x.first().map(Vec::len).unwrap_or(0);
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Samples::new(x, y, names)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn select(&self, indices: &[usize]) -> Samples {
        Samples {
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    pub fn with_target_name(mut self, name: &str) -> Samples {
        self.target_name = name.to_string();
        self
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().map(move |r| r[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    task: Task,
    feature_names: Vec<String>,
    records: Vec<SliceRecord>,
    instances: Vec<SliceInstance>,
}

impl Dataset {
    /// Builds task instances from dataset rows.
    ///
    /// Fails on an empty input or when a patient's rows disagree on
    /// `images_qnt` or carry a slice index outside `1..=images_qnt`.
    pub fn from_records(records: Vec<SliceRecord>, task: Task) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut scans: HashMap<&str, u32> = HashMap::new();
        for r in &records {
            let qnt = *scans.entry(&r.patient_id).or_insert(r.images_qnt);
            if qnt != r.images_qnt {
                return Err(Error::InconsistentScan {
                    patient_id: r.patient_id.clone(),
                    detail: format!("images_qnt {} vs {}", qnt, r.images_qnt),
                });
            }
            if r.slice_index < 1 || r.slice_index > r.images_qnt {
                return Err(Error::InconsistentScan {
                    patient_id: r.patient_id.clone(),
                    detail: format!("slice_index {} outside 1..={}", r.slice_index, r.images_qnt),
                });
            }
        }
        let names = task.feature_names();
        let target = task.target_name();
        let instances = records
            .iter()
            .map(|r| SliceInstance {
                features: names
                    .iter()
                    .map(|n| r.feature(n).expect("task features are record fields"))
                    .collect(),
                target: r.feature(target).expect("task target is a record field"),
                patient_id: r.patient_id.clone(),
                slice_index: r.slice_index,
            })
            .collect();
        Ok(Dataset {
            task,
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            records,
            instances,
        })
    }

    /// Same task, rows taken from the current dataset.
    pub fn with_task(&self, task: Task) -> Result<Self> {
        Dataset::from_records(self.records.clone(), task)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn target_name(&self) -> &'static str {
        self.task.target_name()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn records(&self) -> &[SliceRecord] {
        &self.records
    }

    pub fn instances(&self) -> &[SliceInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn samples(&self) -> Samples {
        Samples {
            x: self.instances.iter().map(|i| i.features.clone()).collect(),
            y: self.instances.iter().map(|i| i.target).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name().to_string(),
        }
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    /// Number of slices per patient, ordered by patient id.
    pub fn slices_per_patient(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.patient_id.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        save_records(&self.records, path)
    }

    pub fn load_csv(path: &Path, task: Task) -> Result<Self> {
        Dataset::from_records(load_records(path)?, task)
    }
}

pub fn make_instances(counts: &[SliceCounts], task: Task) -> Result<Dataset> {
    Dataset::from_records(counts.iter().map(SliceRecord::from).collect(), task)
}

pub fn write_records<W: Write>(records: &[SliceRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            escape_field(&r.patient_id),
            r.slice_index,
            r.images_qnt,
            numfmt::real(r.red),
            numfmt::real(r.green),
            numfmt::real(r.blue),
            numfmt::real(r.grey),
            numfmt::real(r.black),
        )?;
    }
    w.flush()
}

fn escape_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn save_records(records: &[SliceRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::Io(e).at(path))
}

pub fn load_records(path: &Path) -> Result<Vec<SliceRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::Io(e).at(path))?;
    read_records(file).map_err(|e| e.at(path))
}

/// Parses a dataset CSV. Errors carry the 1-based line and the column name.
pub fn read_records<R: io::Read>(reader: R) -> Result<Vec<SliceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != CSV_COLUMNS {
        let missing: Vec<&str> = CSV_COLUMNS
            .iter()
            .copied()
            .filter(|c| !cols.contains(c))
            .collect();
        return Err(Error::Parse {
            line: 1,
            column: if missing.is_empty() {
                "header".into()
            } else {
                missing.join(",")
            },
            message: format!(
                "expected header {} but found {}",
                CSV_COLUMNS.join(","),
                cols.join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != CSV_COLUMNS.len() {
            return Err(Error::Parse {
                line,
                column: CSV_COLUMNS
                    .get(rec.len())
                    .copied()
                    .unwrap_or("-")
                    .to_string(),
                message: format!("expected {} fields, found {}", CSV_COLUMNS.len(), rec.len()),
            });
        }
        let int = |i: usize| -> Result<u32> {
            rec[i].parse::<u32>().map_err(|_| Error::Parse {
                line,
                column: CSV_COLUMNS[i].into(),
                message: format!("'{}' is not a non-negative integer", &rec[i]),
            })
        };
        let real = |i: usize| -> Result<f64> {
            match rec[i].parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    column: CSV_COLUMNS[i].into(),
                    message: format!("'{}' is not a finite non-negative number", &rec[i]),
                }),
            }
        };
        out.push(SliceRecord {
            patient_id: rec[0].to_string(),
            slice_index: int(1)?,
            images_qnt: int(2)?,
            red: real(3)?,
            green: real(4)?,
            blue: real(5)?,
            grey: real(6)?,
            black: real(7)?,
        });
    }
    Ok(out)
}

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(train, test)` indices for fold `f`, both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffled, balanced fold assignment.
///
/// The index permutation `0..n` is shuffled with [`Lcg64`] seeded by
/// `seed`; the instance at shuffled position `p` goes to fold `p % k`.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Lcg64::new(seed).shuffle(&mut order);
    let mut assignments = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        assignments[i] = p % k;
    }
    Ok(FoldPlan { k, assignments })
}

/// Patient-grouped variant: every slice of a patient lands in the same fold.
///
/// Distinct groups (in first-appearance order) are shuffled with
/// [`Lcg64`], then each is placed into the currently smallest fold
/// (lowest index on ties). Fold sizes are balanced only as far as group
/// sizes allow.
pub fn split_folds_grouped(groups: &[&str], k: usize, seed: u64) -> Result<FoldPlan> {
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        members
            .entry(g)
            .or_insert_with(|| {
                order.push(g);
                Vec::new()
            })
            .push(i);
    }
    if k < 2 || k > order.len() {
        return Err(Error::InvalidFoldCount { k, n: order.len() });
    }
    Lcg64::new(seed).shuffle(&mut order);
    let mut sizes = vec![0usize; k];
    let mut assignments = vec![0; groups.len()];
    for g in order {
        let f = (0..k).min_by_key(|&f| (sizes[f], f)).expect("k >= 2");
        for &i in &members[g] {
            assignments[i] = f;
        }
        sizes[f] += members[g].len();
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(pid: &str, idx: u32, qnt: u32) -> SliceRecord {
        SliceRecord {
            patient_id: pid.into(),
            slice_index: idx,
            images_qnt: qnt,
            red: 10.0,
            green: 20.0,
            blue: 5.0,
            grey: 100.0,
            black: 900.0,
        }
    }

    #[test]
    fn unprocessed_features() {
        let d = Dataset::from_records(vec![rec("p", 7, 50)], Task::EpicardialUnprocessed).unwrap();
        assert_eq!(
            d.feature_names(),
            ["grey_total", "black", "slice_index", "images_qnt"]
        );
        assert_eq!(d.instances()[0].features, vec![135.0, 900.0, 7.0, 50.0]);
        assert_eq!(d.instances()[0].target, 10.0);
    }

    #[test]
    fn processed_features() {
        let d =
            Dataset::from_records(vec![rec("p", 7, 50)], Task::MediastinalFromEpicardial).unwrap();
        assert_eq!(
            d.feature_names(),
            ["red", "blue", "grey", "black", "slice_index", "images_qnt"]
        );
        assert_eq!(
            d.instances()[0].features,
            vec![10.0, 5.0, 100.0, 900.0, 7.0, 50.0]
        );
        assert_eq!(d.instances()[0].target, 20.0);

        let e = d.with_task(Task::EpicardialFromMediastinal).unwrap();
        assert_eq!(e.instances()[0].features[0], 20.0);
        assert_eq!(e.instances()[0].target, 10.0);
    }

    #[test]
    fn processed_plus_target_is_seven_quantities() {
        for task in [
            Task::MediastinalFromEpicardial,
            Task::EpicardialFromMediastinal,
        ] {
            assert_eq!(task.feature_names().len() + 1, 7);
            assert!(!task.feature_names().contains(&task.target_name()));
        }
    }

    #[test]
    fn scale_878() {
        let records: Vec<_> = (0..878)
            .map(|i| rec(&format!("p{}", i / 44), (i % 44 + 1) as u32, 44))
            .collect();
        let d = Dataset::from_records(records, Task::MediastinalFromEpicardial).unwrap();
        assert_eq!(d.len(), 878);
    }

    #[test]
    fn inconsistent_scan_rejected() {
        let err = Dataset::from_records(
            vec![rec("p", 1, 50), rec("p", 2, 49)],
            Task::MediastinalFromEpicardial,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InconsistentScan { .. }));
        assert!(matches!(
            Dataset::from_records(vec![], Task::MediastinalFromEpicardial),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mut a = rec("a", 1, 3);
        a.red = 0.1;
        a.black = 123456.789012345;
        let b = rec("b, with comma", 2, 3);
        let mut c = rec("c", 3, 3);
        c.grey = 1.0 / 3.0;
        let d = Dataset::from_records(vec![a, b, c], Task::EpicardialUnprocessed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.save_csv(&path).unwrap();
        let back = Dataset::load_csv(&path, Task::EpicardialUnprocessed).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn missing_column_is_parse_error() {
        let text = "patient_id,slice_index,images_qnt,red,green,blue,grey\np,1,2,1,1,1,1\n";
        match read_records(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(column, "black");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_location() {
        let text = "patient_id,slice_index,images_qnt,red,green,blue,grey,black\n\
                    p,1,2,1,1,1,1,1\n\
                    p,2,2,1,x,1,1,1\n";
        match read_records(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "green");
            }
            other => panic!("{other:?}"),
        }
        let short = "patient_id,slice_index,images_qnt,red,green,blue,grey,black\np,1,2,1,1\n";
        assert!(matches!(
            read_records(short.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn folds_forced_sizes() {
        let plan = split_folds(10, 10, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn folds_878() {
        let plan = split_folds(878, 10, 1).unwrap();
        let sizes = plan.fold_sizes();
        assert_eq!(sizes.iter().filter(|&&s| s == 88).count(), 8);
        assert_eq!(sizes.iter().filter(|&&s| s == 87).count(), 2);
        assert_eq!(sizes.iter().sum::<usize>(), 878);
    }

    #[test]
    fn folds_deterministic_and_seed_sensitive() {
        assert_eq!(
            split_folds(100, 10, 9).unwrap(),
            split_folds(100, 10, 9).unwrap()
        );
        assert_ne!(
            split_folds(100, 10, 9).unwrap(),
            split_folds(100, 10, 10).unwrap()
        );
    }

    #[test]
    fn fold_count_errors() {
        assert!(matches!(
            split_folds(5, 6, 0),
            Err(Error::InvalidFoldCount { .. })
        ));
        assert!(matches!(
            split_folds(5, 1, 0),
            Err(Error::InvalidFoldCount { .. })
        ));
    }

    #[test]
    fn grouped_folds_keep_patients_together() {
        let groups: Vec<String> = (0..60).map(|i| format!("p{}", i / 6)).collect();
        let refs: Vec<&str> = groups.iter().map(String::as_str).collect();
        let plan = split_folds_grouped(&refs, 5, 4).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                if refs[i] == refs[j] {
                    assert_eq!(plan.assignments()[i], plan.assignments()[j]);
                }
            }
        }
        assert_eq!(plan.fold_sizes(), vec![12; 5]);
    }

    proptest! {
        #[test]
        fn fold_plan_is_balanced_partition(n in 2usize..400, k in 2usize..20, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let plan = split_folds(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                let (train, test) = plan.split(f);
                prop_assert_eq!(train.len() + test.len(), n);
                for i in test { seen[i] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn unprocessed_grey_dominates(r in 0.0f64..1e5, g in 0.0f64..1e5, b in 0.0f64..1e3, grey in 0.0f64..1e5) {
            let mut x = rec("p", 1, 1);
            x.red = r; x.green = g; x.blue = b; x.grey = grey;
            let d = Dataset::from_records(vec![x.clone()], Task::MediastinalUnprocessed).unwrap();
            prop_assert!(d.instances()[0].features[0] >= grey);
            let p = Dataset::from_records(vec![x], Task::MediastinalFromEpicardial).unwrap();
            prop_assert_eq!(p.instances()[0].target, g);
        }
    }
}
