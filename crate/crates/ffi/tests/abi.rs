use std::ffi::{c_char, CStr, CString};
use std::ptr;

use adipredict_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = adp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn write_dataset(dir: &std::path::Path) -> CString {
    let path = dir.join("d.csv");
    let mut s = String::from("patient_id,slice_index,images_qnt,red,green,blue,grey,black\n");
    for p in 0..4 {
        for i in 1..=10u32 {
            let red = 500.0 + 40.0 * ((p * 7 + i as usize * 3) % 11) as f64;
            let blue = 100.0 + 9.0 * ((p + i as usize) % 5) as f64;
            let green = 2.0 * red - blue + 300.0;
            s.push_str(&format!("p{p},{i},10,{red},{green},{blue},50,200000\n"));
        }
    }
    std::fs::write(&path, s).unwrap();
    c(path.to_str().unwrap())
}

#[test]
fn fixed_model_anchor_and_inversion() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            adp_model_fixed(c("fixed:eq8").as_ptr(), &mut m),
            AdpStatus::Ok
        );
        let mut n = 0;
        assert_eq!(adp_model_n_features(m, &mut n), AdpStatus::Ok);
        assert_eq!(n, 5);
        let zeros = [0.0; 5];
        let mut y = 0.0;
        assert_eq!(
            adp_model_predict(m, zeros.as_ptr(), 5, &mut y),
            AdpStatus::Ok
        );
        assert_eq!(y, 230102.0526);

        let mut name: *const c_char = ptr::null();
        assert_eq!(adp_model_feature_name(m, 0, &mut name), AdpStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "red");
        assert_eq!(adp_model_target_name(m, &mut name), AdpStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "green");

        let mut inv = ptr::null_mut();
        assert_eq!(
            adp_model_invert(m, c("red").as_ptr(), &mut inv),
            AdpStatus::Ok
        );
        assert_eq!(
            adp_model_predict(inv, zeros.as_ptr(), 5, &mut y),
            AdpStatus::Ok
        );
        assert!((y - 187150.9171).abs() / 187150.9171 < 1e-3);

        assert_eq!(
            adp_model_invert(m, c("grey").as_ptr(), &mut inv),
            AdpStatus::UnknownName
        );
        assert_eq!(
            adp_model_predict(m, zeros.as_ptr(), 4, &mut y),
            AdpStatus::DimensionMismatch
        );
        assert!(last_error().contains("expected 5"));
        adp_model_free(inv);
        adp_model_free(m);
    }
}

#[test]
fn null_and_bad_arguments_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(adp_model_fixed(ptr::null(), &mut m), AdpStatus::NullPointer);
        assert_eq!(
            adp_model_fixed(c("fixed:eq8").as_ptr(), ptr::null_mut()),
            AdpStatus::NullPointer
        );
        assert_eq!(
            adp_model_fixed(c("fixed:eq99").as_ptr(), &mut m),
            AdpStatus::InvalidArgument
        );
        assert!(m.is_null());
        let mut n = 0;
        assert_eq!(
            adp_model_n_features(ptr::null(), &mut n),
            AdpStatus::NullPointer
        );
        assert!(last_error().contains("NULL"));
        let mut v = 0.0;
        assert_eq!(
            adp_counts_to_volume(10.0, 1.0, 1.0, 0.0, &mut v),
            AdpStatus::InvalidArgument
        );
        assert_eq!(
            adp_model_load(c("/nonexistent/model.txt").as_ptr(), &mut m),
            AdpStatus::Io
        );
        adp_model_free(ptr::null_mut());
        adp_dataset_free(ptr::null_mut());
        adp_report_free(ptr::null_mut());
        adp_string_free(ptr::null_mut());
    }
}

#[test]
fn pixel_volume_and_metrics() {
    unsafe {
        let mut class = AdpFatClass::Background;
        assert_eq!(adp_classify_pixel(250, 5, 5, &mut class), AdpStatus::Ok);
        assert_eq!(class, AdpFatClass::Epicardial);
        let mut v = 0.0;
        assert_eq!(
            adp_counts_to_volume(1000.0, 1.0, 1.0, 2.0, &mut v),
            AdpStatus::Ok
        );
        assert_eq!(v, 2000.0);

        let a = [1.0, 2.0, 3.0];
        let mut r = std::mem::zeroed::<AdpEvalReport>();
        assert_eq!(
            adp_evaluate(a.as_ptr(), a.as_ptr(), 3, &mut r),
            AdpStatus::Ok
        );
        assert!(r.has_rho && r.has_relative);
        assert!((r.rho - 1.0).abs() < 1e-12);
        assert_eq!((r.mae, r.n), (0.0, 3));
        let flat = [5.0, 5.0, 5.0];
        assert_eq!(
            adp_evaluate(a.as_ptr(), flat.as_ptr(), 3, &mut r),
            AdpStatus::Ok
        );
        assert_eq!(r.status, AdpMetricStatus::DenominatorZero);
        assert!(!r.has_rho && r.rho.is_nan());
        assert_eq!(
            adp_evaluate(a.as_ptr(), a.as_ptr(), 1, &mut r),
            AdpStatus::InvalidArgument
        );
    }
}

#[test]
fn dataset_train_save_load_and_cv() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path());
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(
            adp_dataset_load(path.as_ptr(), c("bogus").as_ptr(), &mut d),
            AdpStatus::UnknownName
        );
        assert_eq!(
            adp_dataset_load(
                path.as_ptr(),
                c("mediastinal-from-epicardial").as_ptr(),
                &mut d
            ),
            AdpStatus::Ok
        );
        let mut n = 0;
        adp_dataset_len(d, &mut n);
        assert_eq!(n, 40);
        adp_dataset_n_features(d, &mut n);
        assert_eq!(n, 6);

        let mut m = ptr::null_mut();
        assert_eq!(
            adp_model_train(d, c("linear").as_ptr(), 1, &mut m),
            AdpStatus::Ok
        );
        let x = [600.0, 110.0, 50.0, 200000.0, 3.0, 10.0];
        let mut y = 0.0;
        adp_model_predict(m, x.as_ptr(), 6, &mut y);
        assert!((y - (2.0 * 600.0 - 110.0 + 300.0)).abs() < 1e-6);

        let file = c(dir.path().join("m.model").to_str().unwrap());
        assert_eq!(adp_model_save(m, file.as_ptr()), AdpStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(adp_model_load(file.as_ptr(), &mut back), AdpStatus::Ok);
        let mut y2 = 0.0;
        adp_model_predict(back, x.as_ptr(), 6, &mut y2);
        assert_eq!(y.to_bits(), y2.to_bits());

        let mut bad = ptr::null_mut();
        assert_eq!(
            adp_model_train(d, c("nope").as_ptr(), 1, &mut bad),
            AdpStatus::UnknownName
        );
        assert!(last_error().contains("linear"));

        let mut r = ptr::null_mut();
        assert_eq!(
            adp_run_cv(d, c("linear,knn:k=3").as_ptr(), 5, 7, 60.0, &mut r),
            AdpStatus::Ok
        );
        adp_report_len(r, &mut n);
        assert_eq!(n, 2);
        let mut s = ptr::null_mut();
        assert_eq!(
            adp_report_render(r, AdpReportFormat::TableCsv, &mut s),
            AdpStatus::Ok
        );
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        adp_string_free(s);
        assert!(text.starts_with("algorithm,rho,mae,rmse,rae_pct,rrse_pct,status\nlinear,1.0000,"));
        assert_eq!(
            adp_run_cv(d, c("linear").as_ptr(), 5, 7, 0.0, &mut r),
            AdpStatus::InvalidArgument
        );

        adp_report_free(r);
        adp_model_free(back);
        adp_model_free(m);
        adp_dataset_free(d);
    }
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let mut m = ptr::null_mut();
        adp_model_fixed(c("fixed:eq99").as_ptr(), &mut m);
    }
    let other = std::thread::spawn(|| adp_last_error_message().is_null())
        .join()
        .unwrap();
    assert!(other);
    assert!(last_error().contains("eq99"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(adp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
