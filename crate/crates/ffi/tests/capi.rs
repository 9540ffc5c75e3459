use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gosvm_ffi::*;

fn last_error() -> String {
    let p = gosvm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two separable clusters on a line; oracle = distance from the origin.
fn line_dataset() -> *mut GosvmDataset {
    let xs = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0];
    let ys: Vec<i8> = xs
        .iter()
        .map(|&x: &f64| if x > 0.0 { 1 } else { -1 })
        .collect();
    let oracle: Vec<f64> = xs.iter().map(|x: &f64| x.abs()).collect();
    let mut ds = ptr::null_mut();
    let st = unsafe {
        gosvm_dataset_from_arrays(
            xs.as_ptr(),
            ys.as_ptr(),
            oracle.as_ptr(),
            xs.len(),
            1,
            &mut ds,
        )
    };
    assert_eq!(st, GosvmStatus::Ok);
    ds
}

#[test]
fn train_predict_evaluate_round_trip() {
    let ds = line_dataset();
    unsafe {
        assert_eq!(gosvm_dataset_len(ds), 8);
        assert_eq!(gosvm_dataset_dim(ds), 1);

        let mut model = ptr::null_mut();
        let st = gosvm_train_gosvm(
            ds,
            0.5,
            0.5,
            0.5,
            GosvmKernel::Linear,
            0.0,
            GosvmOrdering::Global,
            &mut model,
        );
        assert_eq!(st, GosvmStatus::Ok, "{}", last_error());
        assert_eq!(gosvm_model_dim(model), 1);

        let mut f = 0.0;
        assert_eq!(
            gosvm_model_predict(model, [2.5].as_ptr(), 1, &mut f),
            GosvmStatus::Ok
        );
        assert!(f > 0.0);

        let mut ev = GosvmEvaluation {
            error_rate: -1.0,
            liso: -1.0,
            balance: -1.0,
        };
        assert_eq!(gosvm_model_evaluate(model, ds, &mut ev), GosvmStatus::Ok);
        assert_eq!(ev.error_rate, 0.0);
        assert!(ev.liso.is_finite());

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.toml").to_str().unwrap()).unwrap();
        assert_eq!(gosvm_model_save(model, path.as_ptr()), GosvmStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(
            gosvm_model_load(path.as_ptr(), &mut loaded),
            GosvmStatus::Ok
        );
        let mut g = 0.0;
        assert_eq!(
            gosvm_model_predict(loaded, [2.5].as_ptr(), 1, &mut g),
            GosvmStatus::Ok
        );
        assert_eq!(f, g);

        gosvm_model_free(loaded);
        gosvm_model_free(model);
        gosvm_dataset_free(ds);
    }
}

#[test]
fn dataset_file_round_trip() {
    let ds = line_dataset();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.csv").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(gosvm_dataset_write(ds, path.as_ptr()), GosvmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(
            gosvm_dataset_read(path.as_ptr(), &mut back),
            GosvmStatus::Ok
        );
        assert_eq!(gosvm_dataset_len(back), 8);
        gosvm_dataset_free(back);
        gosvm_dataset_free(ds);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let ds = line_dataset();
    unsafe {
        let mut model = ptr::null_mut();
        let st = gosvm_train_nusvm(ds, 0.9, GosvmKernel::Rbf, 1.0, &mut model);
        assert_eq!(st, GosvmStatus::Ok);

        let mut f = 0.0;
        let st = gosvm_model_predict(model, [1.0, 2.0].as_ptr(), 2, &mut f);
        assert_eq!(st, GosvmStatus::DimensionMismatch);
        assert!(last_error().contains("dimension"));

        let mut bad = ptr::null_mut();
        assert_eq!(
            gosvm_train_nusvm(ds, 1.5, GosvmKernel::Rbf, 1.0, &mut bad),
            GosvmStatus::Infeasible
        );
        assert!(bad.is_null());
        assert_eq!(
            gosvm_train_nusvm(ds, 0.5, GosvmKernel::Rbf, -1.0, &mut bad),
            GosvmStatus::InvalidArgument
        );

        assert_eq!(
            gosvm_train_nusvm(ptr::null(), 0.5, GosvmKernel::Linear, 0.0, &mut bad),
            GosvmStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/dir/d.csv").unwrap();
        assert_eq!(
            gosvm_dataset_read(missing.as_ptr(), &mut ptr::null_mut()),
            GosvmStatus::Io
        );

        let labels = [3i8];
        let st = gosvm_dataset_from_arrays(
            [0.0].as_ptr(),
            labels.as_ptr(),
            ptr::null(),
            1,
            1,
            &mut ptr::null_mut(),
        );
        assert_ne!(st, GosvmStatus::Ok);

        gosvm_model_free(model);
        gosvm_dataset_free(ds);
        gosvm_dataset_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gosvm.h");
    assert!(header.exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ GosvmDataset *d = 0; gosvm_dataset_free(d); return (int)GOSVM_STATUS_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for (cc, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let status = match Command::new(cc)
            .args(extra)
            .arg("-fsyntax-only")
            .arg("-Wall")
            .arg("-Werror")
            .arg(&src)
            .status()
        {
            Ok(s) => s,
            Err(_) => {
                eprintln!("{cc} not available; skipping");
                continue;
            }
        };
        assert!(status.success(), "{cc} rejected the header");
    }
}
