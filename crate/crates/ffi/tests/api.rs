use std::ffi::{CStr, CString};
use std::ptr;

use qmem::*;

fn small_rwa() -> *mut QmemConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(qmem_config_new(&mut cfg), QmemStatus::Ok);
        for (k, v) in [("bath.n_omega", "300"), ("rwa.dt", "0.01"), ("rwa.horizon", "5.0"), ("rwa.output_stride", "1")] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(qmem_config_set(cfg, k.as_ptr(), v.as_ptr()), QmemStatus::Ok);
        }
    }
    cfg
}

fn last_error() -> String {
    let p = qmem_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn rwa_round_trip() {
    let cfg = small_rwa();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(qmem_rwa_solve(cfg, &mut run), QmemStatus::Ok);
        let n = qmem_run_len(run);
        assert_eq!(n, 501);
        assert!((qmem_run_dt(run) - 0.01).abs() < 1e-15);

        let (mut re, mut im, mut f) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assert_eq!(qmem_run_gamma(run, re.as_mut_ptr(), im.as_mut_ptr(), n), QmemStatus::Ok);
        assert_eq!(qmem_run_optimal_fidelity(run, f.as_mut_ptr(), n), QmemStatus::Ok);
        assert_eq!((re[0], im[0]), (1.0, 0.0));
        for k in 0..n {
            let g = re[k].hypot(im[k]);
            assert!((f[k] - qmem_fopt_of_gamma(g)).abs() < 1e-12);
        }

        let (mut dx, mut dy) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(qmem_run_distinguishability(run, QmemAxis::X, dx.as_mut_ptr(), n), QmemStatus::Ok);
        assert_eq!(qmem_run_distinguishability(run, QmemAxis::Y, dy.as_mut_ptr(), n), QmemStatus::Ok);
        assert!(dx.iter().zip(&dy).all(|(a, b)| (a - b).abs() < 1e-14));

        let mut v = usize::MAX;
        assert_eq!(qmem_run_audit_violations(run, &mut v), QmemStatus::Ok);
        assert_eq!(v, 0);
        qmem_run_free(run);
        qmem_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let cfg = small_rwa();
    unsafe {
        let (k, v) = (CString::new("bath.nope").unwrap(), CString::new("1").unwrap());
        assert_eq!(qmem_config_set(cfg, k.as_ptr(), v.as_ptr()), QmemStatus::Config);
        assert!(last_error().contains("nope"));

        let (k, v) = (CString::new("rwa.dt").unwrap(), CString::new("-1.0").unwrap());
        assert_eq!(qmem_config_set(cfg, k.as_ptr(), v.as_ptr()), QmemStatus::Config);
        assert!(last_error().contains("rwa.dt"));

        // a rejected edit leaves the handle usable
        let mut run = ptr::null_mut();
        assert_eq!(qmem_rwa_solve(cfg, &mut run), QmemStatus::Ok);
        assert!(qmem_last_error_message().is_null());
        let mut small = [0.0; 3];
        assert_eq!(qmem_run_nm(run, small.as_mut_ptr(), small.len()), QmemStatus::BufferTooSmall);
        assert_eq!(qmem_run_nm(run, ptr::null_mut(), 1000), QmemStatus::NullPointer);
        qmem_run_free(run);

        let (k, v) = (CString::new("bath.h").unwrap(), CString::new("[0.1, 0.4]").unwrap());
        assert_eq!(qmem_config_set(cfg, k.as_ptr(), v.as_ptr()), QmemStatus::Ok);
        assert_eq!(qmem_rwa_solve(cfg, &mut run), QmemStatus::InvalidArgument);
        assert!(run.is_null());
        assert!(last_error().contains("sweep"));
        qmem_config_free(cfg);

        assert_eq!(qmem_rwa_solve(ptr::null(), &mut run), QmemStatus::NullPointer);
        assert_eq!(qmem_run_len(ptr::null()), 0);
        qmem_run_free(ptr::null_mut());
    }
}

#[test]
fn chain_map_and_oracle() {
    let text = CString::new("[bath]\nn_omega = 400\n[chain]\nlength = 3\n[mps]\nn_max = 2\nhorizon = 1.0\n[measure]\ntheta_samples = 3\nphi_samples = 2\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(qmem_config_from_toml(text.as_ptr(), &mut cfg), QmemStatus::Ok);
        let mut chain = ptr::null_mut();
        assert_eq!(qmem_chain_map(cfg, &mut chain), QmemStatus::Ok);
        let n = qmem_chain_len(chain);
        assert_eq!(n, 3);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(qmem_chain_coefficients(chain, a.as_mut_ptr(), b.as_mut_ptr(), n), QmemStatus::Ok);
        assert!(a.iter().all(|x| *x > 0.0 && *x < 3.0));
        assert!(b.iter().all(|x| *x > 0.0));
        qmem_chain_free(chain);

        let mut run = ptr::null_mut();
        assert_eq!(qmem_oracle_exact(cfg, &mut run), QmemStatus::Ok);
        assert_eq!(qmem_run_len(run), 11);
        let mut rate = 0.0;
        // one time unit is too short a window for a fit
        assert_eq!(qmem_run_fit_rate(run, QmemAxis::Z, &mut rate), QmemStatus::FitRefused);
        qmem_run_free(run);
        qmem_config_free(cfg);
    }
    let bad = CString::new("[bath\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { qmem_config_from_toml(bad.as_ptr(), &mut cfg) }, QmemStatus::Config);
    assert!(cfg.is_null());
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(qmem_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
