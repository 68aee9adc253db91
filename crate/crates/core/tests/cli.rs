use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adipredict::ingest::{FatClass, MaskImage};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adipredict"));
    c.env_remove("ADIPREDICT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const HEADER: &str = "patient_id,slice_index,images_qnt,red,green,blue,grey,black\n";

/// Writes `<root>/<patient>/<index>.png`; slice `i` holds `i` red pixels
/// and `2i` green pixels on a 16×16 background.
fn write_scan(root: &Path, patient: &str, slices: u32) {
    let dir = root.join(patient);
    fs::create_dir_all(&dir).unwrap();
    for i in 1..=slices {
        let img = MaskImage::from_fn(16, 16, |x, y| {
            let k = y * 16 + x;
            if k < i {
                FatClass::Epicardial.canonical_rgb()
            } else if k < 3 * i {
                FatClass::Mediastinal.canonical_rgb()
            } else {
                FatClass::Background.canonical_rgb()
            }
        });
        img.write_png(&dir.join(format!("{i:03}.png"))).unwrap();
    }
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("synth.csv");
    let mut args = vec![
        "synth",
        "--output",
        p(&out),
        "--patients",
        "8",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn extract_two_patients() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    write_scan(&images, "alpha", 3);
    write_scan(&images, "beta", 3);
    let meta = dir.path().join("meta.csv");
    fs::write(
        &meta,
        "patient_id,images_qnt,dx_mm,dy_mm,dz_mm\nalpha,3,0.5,0.5,2\nbeta,3,1,1,3\n",
    )
    .unwrap();
    let out = dir.path().join("d.csv");
    let args = [
        "extract",
        "--images",
        p(&images),
        "--metadata",
        p(&meta),
        "--output",
        p(&out),
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(
        s.contains("alpha\t3 slices") && s.contains("beta\t3 slices"),
        "{s}"
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(format!("{}\n", lines[0]), HEADER);
    // 0.5 mm pixels count a quarter at the 1 mm target spacing
    assert_eq!(lines[1], "alpha,1,3,0.25,0.5,0,0,63.25");
    assert_eq!(lines[6], "beta,3,3,3,6,0,0,247");

    // rerunning gives identical bytes
    assert!(run(&args).status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn extract_missing_metadata_names_patient() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    write_scan(&images, "alpha", 2);
    write_scan(&images, "gamma", 2);
    let meta = dir.path().join("meta.csv");
    fs::write(
        &meta,
        "patient_id,images_qnt,dx_mm,dy_mm,dz_mm\nalpha,2,1,1,1\n",
    )
    .unwrap();
    let out = dir.path().join("d.csv");
    let o = run(&[
        "extract",
        "--images",
        p(&images),
        "--metadata",
        p(&meta),
        "--output",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn extract_per_patient_metadata_files() {
    let dir = tempfile::tempdir().unwrap();
    write_scan(dir.path(), "p1", 2);
    fs::write(
        dir.path().join("p1/metadata.csv"),
        "patient_id,images_qnt,dx_mm,dy_mm,dz_mm\np1,2,1,1,1\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["extract", "--images", p(dir.path()), "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 3);
}

#[test]
fn extract_corrupt_png_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    write_scan(&images, "alpha", 2);
    let bad = images.join("alpha/002.png");
    fs::write(&bad, b"not a png").unwrap();
    let meta = dir.path().join("meta.csv");
    fs::write(
        &meta,
        "patient_id,images_qnt,dx_mm,dy_mm,dz_mm\nalpha,2,1,1,1\n",
    )
    .unwrap();
    let o = run(&[
        "extract",
        "--images",
        p(&images),
        "--metadata",
        p(&meta),
        "--output",
        p(&dir.path().join("d.csv")),
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("002.png"), "{}", stderr(&o));
}

#[test]
fn experiment_linear_on_synthetic_linear_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--noise-sd", "10"]);
    let o = run(&[
        "experiment",
        "--dataset",
        p(&data),
        "--task",
        "mediastinal-from-epicardial",
        "--algorithms",
        "linear",
        "--folds",
        "10",
        "--seed",
        "7",
        "--output-dir",
        p(dir.path()),
        "--name",
        "lin",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = adipredict::experiment::load_report_csv(&dir.path().join("lin.report.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].rho.unwrap() >= 0.999, "{:?}", rows[0]);
    assert!(dir.path().join("lin.table.txt").exists());
    assert!(stdout(&o).contains("linear"));
}

#[test]
fn experiment_is_reproducible_and_honours_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let go = |name: &str, seed: &str, env: Option<&str>| {
        let mut c = bin();
        c.args([
            "experiment",
            "--dataset",
            p(&data),
            "--task",
            "epicardial-from-mediastinal",
            "--algorithms",
            "linear,knn:k=3,tree,forest:trees=10,max_features=all",
            "--folds",
            "5",
            "--seed",
            seed,
            "--output-dir",
            p(dir.path()),
            "--name",
            name,
        ]);
        if let Some(v) = env {
            c.env("ADIPREDICT_SEED", v);
        }
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join(format!("{name}.report.csv"))).unwrap();
        let txt = fs::read_to_string(dir.path().join(format!("{name}.table.txt"))).unwrap();
        (csv, txt)
    };
    let a = go("a", "3", None);
    let b = go("a", "3", None);
    assert_eq!(a, b);
    let c = go("c", "9", None);
    assert_ne!(a.0, c.0);
    let d = go("c", "1", Some("9"));
    assert_eq!(c, d);
    assert!(a.0.contains("\n\"forest:trees=10,max_features=all\","));
}

#[test]
fn unprocessed_task_uses_four_features() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = run(&[
        "experiment",
        "--dataset",
        p(&data),
        "--task",
        "epicardial-unprocessed",
        "--algorithms",
        "linear",
        "--folds",
        "4",
        "--output-dir",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("epicardial-unprocessed.report.csv")).unwrap();
    assert!(
        csv.contains("# features: grey_total black slice_index images_qnt\n"),
        "{csv}"
    );
    assert!(csv.contains("# target: red\n"));
}

#[test]
fn unknown_algorithm_and_task_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = run(&[
        "experiment",
        "--dataset",
        p(&data),
        "--task",
        "mediastinal-from-epicardial",
        "--algorithms",
        "linear,svm",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in adipredict::regressors::ALGORITHM_NAMES {
        assert!(e.contains(name), "{e}");
    }
    let o = run(&["experiment", "--dataset", p(&data), "--task", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "experiment",
        "--dataset",
        "/no/such.csv",
        "--task",
        "mediastinal-from-epicardial",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn timed_out_rows_still_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = run(&[
        "experiment",
        "--dataset",
        p(&data),
        "--task",
        "mediastinal-from-epicardial",
        "--algorithms",
        "linear,mlp:epochs=1000000",
        "--budget-s",
        "0.5",
        "--output-dir",
        p(dir.path()),
        "--name",
        "t",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = adipredict::experiment::load_report_csv(&dir.path().join("t.report.csv")).unwrap();
    let mlp = rows
        .iter()
        .find(|r| r.algorithm.starts_with("mlp"))
        .unwrap();
    assert_eq!(mlp.status, "timed_out");
    assert!(mlp.rho.is_none() && mlp.mae.is_none());
}

#[test]
fn saved_models_predict_like_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = run(&[
        "experiment",
        "--dataset",
        p(&data),
        "--task",
        "mediastinal-from-epicardial",
        "--algorithms",
        "linear,knn",
        "--folds",
        "3",
        "--output-dir",
        p(dir.path()),
        "--name",
        "m",
        "--save-models",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = dir.path().join("m.knn.model");
    assert!(model.exists());
    let out = dir.path().join("pred.csv");
    let o = run(&[
        "predict",
        "--model",
        p(&model),
        "--dataset",
        p(&data),
        "--output",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("total_volume_mm3"));
}

#[test]
fn predict_eq8_on_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("z.csv");
    fs::write(&data, format!("{HEADER}z,0,0,0,0,0,0,0\n")).unwrap();
    let out = dir.path().join("pred.csv");
    let o = run(&[
        "predict",
        "--model",
        "fixed:eq8",
        "--dataset",
        p(&data),
        "--output",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(
        text,
        "patient_id,slice_index,prediction,raw_prediction\nz,0,230102.0526,230102.0526\n"
    );
    assert!(stdout(&o).contains("total_volume_mm3\t230102.0526"));
}

#[test]
fn clamp_keeps_raw_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("neg.csv");
    // eq9 goes negative for a large mediastinal count
    fs::write(&data, format!("{HEADER}n,1,1,0,1000000,0,0,0\n")).unwrap();
    let out = dir.path().join("pred.csv");
    let o = run(&[
        "predict",
        "--model",
        "fixed:eq9",
        "--dataset",
        p(&data),
        "--output",
        p(&out),
        "--clamp-nonnegative",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "0");
    let raw: f64 = row[3].parse().unwrap();
    assert!((raw - (123509.7603 - 0.4608e6 - 54.5244 + 47.9363)).abs() < 1e-6);

    let o = run(&[
        "predict",
        "--model",
        "fixed:eq9",
        "--dataset",
        p(&data),
        "--output",
        p(&out),
    ]);
    assert!(o.status.success());
    let row2 = fs::read_to_string(&out).unwrap();
    assert!(row2.lines().nth(1).unwrap().starts_with("n,1,-"));
}

fn constant_model(dir: &Path, value: f64, feature: &str) -> PathBuf {
    let path = dir.join("const.model");
    fs::write(
        &path,
        format!(
            "adipredict-model 1\ntarget green\nfeatures 1 {feature}\nmodel linear\n  target green\n  features 1 {feature}\n  weights 1 0\n  bias {value}\nend\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn predicted_volume_total() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let mut s = HEADER.to_string();
    for i in 1..=10 {
        s.push_str(&format!("v,{i},10,5,5,5,5,5\n"));
    }
    fs::write(&data, s).unwrap();
    let model = constant_model(dir.path(), 1000.0, "red");
    let out = dir.path().join("pred.csv");
    let o = run(&[
        "predict",
        "--model",
        p(&model),
        "--dataset",
        p(&data),
        "--output",
        p(&out),
        "--spacing",
        "1,1,2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("total_volume_mm3\t20000\n"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn predict_feature_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, format!("{HEADER}v,1,1,5,5,5,5,5\n")).unwrap();
    let model = constant_model(dir.path(), 1.0, "hounsfield");
    let o = run(&[
        "predict",
        "--model",
        p(&model),
        "--dataset",
        p(&data),
        "--output",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hounsfield"));
    let o = run(&[
        "predict",
        "--model",
        "fixed:eq7",
        "--dataset",
        p(&data),
        "--output",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn volume_subcommand() {
    let o = run(&["volume", "--count", "1000", "--spacing", "1,1,2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2000\n");
    let o = run(&["volume", "--count", "-1"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, format!("{HEADER}a,1,2,1,2,3,4,5\na,2,2,1,2,3,4,5\n")).unwrap();
    let o = run(&["volume", "--dataset", p(&data), "--spacing", "0.5,0.5,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "patient_id,red_mm3,green_mm3,blue_mm3,grey_mm3,black_mm3\na,1,2,3,4,5\n"
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["volume", "--count", "1", "--spacing", "1,1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(synth(dir.path(), &[])).unwrap();
    let b = fs::read(synth(dir.path(), &[])).unwrap();
    assert_eq!(a, b);
    let o = run(&[
        "synth",
        "--output",
        p(&dir.path().join("x.csv")),
        "--weights",
        "green=1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
