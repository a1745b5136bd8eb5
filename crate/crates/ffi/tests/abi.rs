use std::path::Path;
use std::process::Command;
use std::ptr;

use cim_ffi::*;

fn field(c: &[f64]) -> *mut CimField {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cim_field_new(c.as_ptr(), c.len(), &mut h) }, CimStatus::Ok);
    h
}

fn coeffs(h: *const CimField) -> Vec<f64> {
    let n = unsafe { cim_field_len(h) };
    let mut v = vec![0.0; n];
    assert_eq!(unsafe { cim_field_coeffs(h, v.as_mut_ptr(), n) }, CimStatus::Ok);
    v
}

#[test]
fn certificate_matches_core() {
    let mut c = CimCertificate::default();
    assert_eq!(unsafe { cim_certify(1.5, 1e-3, 200, &mut c) }, CimStatus::Ok);
    let core = cim_core::gap::certify(1.5, 1e-3, 200).unwrap();
    assert_eq!(c.ell, 13.0);
    assert_eq!(c.n_star_parabolic, 26);
    assert_eq!(c.n_star_hyperbolic, core.n_star_hyperbolic.unwrap_or(0));
    assert_eq!(c.eps_s, core.eps_s_estimate);
    let mut n = 0;
    assert_eq!(unsafe { cim_parabolic_min_dim(3.0, &mut n) }, CimStatus::Ok);
    assert_eq!(n, cim_core::gap::parabolic_min_dim(3.0).unwrap());
    assert_eq!(unsafe { cim_certify(1.5, 2.0, 200, &mut c) }, CimStatus::Domain);
}

#[test]
fn norms_and_cubic() {
    let u = field(&[3.0, 4.0]);
    let mut x = 0.0;
    assert_eq!(unsafe { cim_norm_hs(u, 0.0, &mut x) }, CimStatus::Ok);
    assert_eq!(x, 5.0);
    let v = field(&[1.0, 0.0]);
    assert_eq!(unsafe { cim_norm_xeps(u, v, 1, 0.25, &mut x) }, CimStatus::Ok);
    // ‖u‖₁² = 9 + 4·16, ε‖v‖₀² = 0.25
    assert!((x - (73.25f64).sqrt()).abs() < 1e-12);
    assert_eq!(unsafe { cim_norm_xeps(u, v, 1, 2.0, &mut x) }, CimStatus::Domain);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { cim_cubic(u, &mut c) }, CimStatus::Ok);
    let want = cim_core::spectral::cubic(&cim_core::spectral::SpectralField::new(vec![3.0, 4.0]).unwrap());
    assert_eq!(coeffs(c), want.coeffs());
    let short = field(&[1.0]);
    assert_eq!(unsafe { cim_norm_xeps(u, short, 1, 0.5, &mut x) }, CimStatus::Dimension);
    unsafe {
        cim_field_free(u);
        cim_field_free(v);
        cim_field_free(c);
        cim_field_free(short);
    }
}

#[test]
fn evolve_matches_core() {
    let u0 = field(&[0.3, -0.1, 0.05, 0.0]);
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { cim_parabolic_evolve(u0, ptr::null(), 0.5, 1e-3, &mut u) }, CimStatus::Ok);
    let core_u0 = cim_core::spectral::SpectralField::new(vec![0.3, -0.1, 0.05, 0.0]).unwrap();
    let cfg = cim_core::parabolic::ParabolicConfig::unforced(4).with_dt(1e-3);
    let want = cim_core::parabolic::evolve_to(&core_u0, 0.5, &cfg).unwrap();
    assert_eq!(coeffs(u), want.coeffs());

    let v0 = field(&[0.0; 4]);
    let (mut hu, mut hv) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { cim_hyperbolic_evolve(u0, v0, ptr::null(), 0.1, 0.5, 1e-3, &mut hu, &mut hv) },
        CimStatus::Ok
    );
    assert_eq!(coeffs(hu).len(), 4);
    assert_eq!(
        unsafe { cim_hyperbolic_evolve(u0, v0, ptr::null(), 0.0, 0.5, 1e-3, &mut hu, &mut hv) },
        CimStatus::Config
    );
    unsafe {
        for h in [u0, u, v0, hu, hv] {
            cim_field_free(h);
        }
    }
}

#[test]
fn symdist_of_clouds() {
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(cim_cloud_new(2, &mut a), CimStatus::Ok);
        assert_eq!(cim_cloud_new(2, &mut b), CimStatus::Ok);
        let mut r = CimHausdorff::default();
        assert_eq!(cim_symdist(a, b, 1, 0.5, &mut r), CimStatus::EmptyCloud);
        assert_eq!(cim_cloud_push(a, [0.0, 0.0].as_ptr(), ptr::null()), CimStatus::Ok);
        assert_eq!(cim_cloud_push(b, [1.0, 0.0].as_ptr(), [0.0, 2.0].as_ptr()), CimStatus::Ok);
        assert_eq!(cim_cloud_push(b, [0.0, 0.0].as_ptr(), ptr::null()), CimStatus::Ok);
        assert_eq!(cim_cloud_len(b), 2);
        assert_eq!(cim_symdist(a, b, 1, 0.5, &mut r), CimStatus::Ok);
        assert_eq!(r.d_uv, 0.0);
        // ‖(1, 0; 0, 2)‖² in X^{0.5}_1 = 1 + 0.5·4
        assert!((r.d_vu - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.dist, r.d_vu);
        assert_eq!(cim_cloud_push(a, ptr::null(), ptr::null()), CimStatus::NullPointer);
        cim_cloud_free(a);
        cim_cloud_free(b);
        cim_cloud_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["cim_certify", "cim_symdist", "cim_last_error", "CimCloud", "CIM_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; header syntax not checked");
        return;
    };
    assert!(status.success());
}
