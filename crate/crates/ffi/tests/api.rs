use std::ffi::CStr;
use std::ptr;

use tworeg::covariance::{
    block_bootstrap_cov, normalize_by_gram, prior_cov_from_gram, shrink, BootstrapConfig, ShrinkageParams,
};
use tworeg::estimators::{ols_fit, tworeg_ridge_fit, Dataset};
use tworeg_ffi::*;

const N: usize = 120;
const P: usize = 3;

/// Deterministic design with mild serial structure and row-major layout.
fn inputs() -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(N * P);
    let mut y = Vec::with_capacity(N);
    for i in 0..N {
        let t = i as f64;
        let row = [(0.37 * t).sin(), (0.11 * t).cos() + 0.2, ((i * 7919) % 101) as f64 / 50.0 - 1.0];
        x.extend_from_slice(&row);
        y.push(row[0] - 2.0 * row[1] + 0.5 * row[2] + 0.3 * (1.7 * t).sin());
    }
    (x, y)
}

fn dataset() -> *mut TwDataset {
    let (x, y) = inputs();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { tw_dataset_new(x.as_ptr(), y.as_ptr(), N, P, &mut d) }, TwStatus::Ok);
    d
}

fn reference() -> Dataset {
    let (x, y) = inputs();
    Dataset::new(nalgebra::DMatrix::from_row_slice(N, P, &x), nalgebra::DVector::from_vec(y)).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tw_last_error_message()) }.to_string_lossy().into_owned()
}

fn entries(c: *const TwCovariance) -> Vec<f64> {
    let p = unsafe { tw_covariance_dim(c) };
    let mut out = vec![0.0; p * p];
    assert_eq!(unsafe { tw_covariance_copy(c, out.as_mut_ptr(), out.len()) }, TwStatus::Ok);
    out
}

#[test]
fn fits_match_the_library() {
    let d = dataset();
    let mut beta = [0.0; P];
    assert_eq!(unsafe { tw_ols_fit(d, beta.as_mut_ptr(), P) }, TwStatus::Ok);
    assert_eq!(&beta[..], ols_fit(&reference()).unwrap().values.as_slice());
    assert_eq!(unsafe { tw_ridge_fit(d, 0.0, beta.as_mut_ptr(), P) }, TwStatus::Ok);
    let ols = ols_fit(&reference()).unwrap().values;
    for (a, b) in beta.iter().zip(ols.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    unsafe { tw_dataset_free(d) };
}

#[test]
fn covariance_pipeline_matches_the_library() {
    let d = dataset();
    let mut crude = ptr::null_mut();
    let mut prior = ptr::null_mut();
    let mut shrunk = ptr::null_mut();
    let mut norm = ptr::null_mut();
    unsafe {
        assert_eq!(tw_block_bootstrap_cov(d, 300, 10, 42, &mut crude), TwStatus::Ok);
        assert_eq!(tw_prior_cov(d, crude, &mut prior), TwStatus::Ok);
        assert_eq!(tw_shrink(crude, prior, 0.4, 0.6, &mut shrunk), TwStatus::Ok);
        assert_eq!(tw_normalize(d, shrunk, &mut norm), TwStatus::Ok);
    }

    let r = reference();
    let lib_crude = block_bootstrap_cov(&r, &BootstrapConfig::new(300, 10, 42).unwrap()).unwrap();
    let lib_prior = prior_cov_from_gram(r.gram(), &lib_crude).unwrap();
    let lib_shrunk = shrink(&lib_crude, &lib_prior, ShrinkageParams::new(0.4, 0.6).unwrap()).unwrap();
    let lib_norm = normalize_by_gram(&lib_shrunk, r.gram()).unwrap();
    assert_eq!(entries(crude), lib_crude.entries().as_slice());
    assert_eq!(entries(norm), lib_norm.entries().as_slice());

    let mut a = [0.0; P];
    assert_eq!(unsafe { tw_tworeg_ridge_fit(d, norm, 2.5, a.as_mut_ptr(), P) }, TwStatus::Ok);
    assert_eq!(&a[..], tworeg_ridge_fit(&r, &lib_norm, 2.5).unwrap().values.as_slice());

    let mut hac = ptr::null_mut();
    assert_eq!(unsafe { tw_cv_hac_cov(d, 6, &mut hac) }, TwStatus::Ok);
    assert_eq!(unsafe { tw_covariance_dim(hac) }, P);

    let (mut kappa, mut mu) = (-1.0, -1.0);
    assert_eq!(unsafe { tw_select_shrinkage(d, 5, 100, 6, 3, 0, &mut kappa, &mut mu) }, TwStatus::Ok);
    assert!((0.0..=1.0).contains(&kappa) && (0.0..=1.0).contains(&mu));

    unsafe {
        for c in [crude, prior, shrunk, norm, hac] {
            tw_covariance_free(c);
        }
        tw_dataset_free(d);
    }
}

#[test]
fn errors_set_status_and_message() {
    let d = dataset();
    let mut beta = [0.0; P];
    unsafe {
        assert_eq!(tw_ridge_fit(d, -1.0, beta.as_mut_ptr(), P), TwStatus::InvalidArgument);
        assert!(last_error().starts_with("invalid_penalty"), "{}", last_error());
        assert_eq!(tw_ols_fit(d, beta.as_mut_ptr(), 2), TwStatus::InvalidArgument);
        assert_eq!(tw_ols_fit(ptr::null(), beta.as_mut_ptr(), P), TwStatus::NullPointer);

        // collinear design
        let x = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let mut bad = ptr::null_mut();
        assert_eq!(tw_dataset_new(x.as_ptr(), y.as_ptr(), 4, 2, &mut bad), TwStatus::NumericalError);
        assert!(last_error().starts_with("rank_deficient"), "{}", last_error());
        assert!(bad.is_null());

        let asym = [1.0, 0.5, 0.0, 1.0];
        let mut c = ptr::null_mut();
        assert_eq!(tw_covariance_new(asym.as_ptr(), 2, &mut c), TwStatus::NumericalError);
        assert!(c.is_null());
        assert_eq!(tw_covariance_dim(ptr::null()), 0);

        let (mut k, mut m) = (0.0, 0.0);
        assert_eq!(tw_select_shrinkage(d, 5, 100, 6, 3, 9, &mut k, &mut m), TwStatus::InvalidArgument);
        tw_dataset_free(d);
        tw_dataset_free(ptr::null_mut());
    }
    assert!(!unsafe { CStr::from_ptr(tw_version()) }.to_bytes().is_empty());
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/tworeg.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ TwDataset *d = 0; double b[1]; \
             return tw_ols_fit(d, b, 1) == TW_STATUS_NULL_POINTER ? 0 : 1; }}\n"
        ),
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
        .expect("a C compiler is required for this test");
    assert!(status.success());
}
