//! C ABI over `cim-core`.
//!
//! Every function returns a [`CimStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be copied out with
//! [`cim_last_error`]. Fields and clouds are opaque handles owned by the
//! caller and released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cim_core::hyperbolic::{self, HyperbolicConfig};
use cim_core::manifold::{FlowKind, ManifoldCloud};
use cim_core::parabolic::{self, ParabolicConfig};
use cim_core::spectral::{self, EpsWeight, ProductState, SpectralField};
use cim_core::{gap, robustness, CimError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CimStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Range = 3,
    Dimension = 4,
    BlowUp = 5,
    EmptyCloud = 6,
    Config = 7,
    Pipeline = 8,
    Io = 9,
    Panic = 10,
}

impl From<&CimError> for CimStatus {
    fn from(e: &CimError) -> Self {
        match e {
            CimError::Domain(_) => CimStatus::Domain,
            CimError::Range { .. } => CimStatus::Range,
            CimError::Dimension { .. } => CimStatus::Dimension,
            CimError::BlowUp { .. } => CimStatus::BlowUp,
            CimError::EmptyCloud => CimStatus::EmptyCloud,
            CimError::Config(_) => CimStatus::Config,
            CimError::Pipeline { .. } => CimStatus::Pipeline,
            CimError::Io(_) => CimStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Fail {
    Null(&'static str),
    Core(CimError),
}

impl From<CimError> for Fail {
    fn from(e: CimError) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> CimStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CimStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CimStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            CimStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CimStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes. Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cim_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Opaque coefficient vector in the sine basis.
pub struct CimField(SpectralField);

/// Opaque cloud of `(u, u_t)` states.
pub struct CimCloud {
    n_modes: usize,
    points: Vec<ProductState>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CimCertificate {
    pub ell: f64,
    pub n_star_parabolic: usize,
    /// Zero when no dimension up to `n_max` qualifies.
    pub n_star_hyperbolic: usize,
    pub eps_s: f64,
    pub eps_s_found: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CimHausdorff {
    pub d_uv: f64,
    pub d_vu: f64,
    pub dist: f64,
}

/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_lipschitz_constant(delta: f64, out_ell: *mut f64) -> CimStatus {
    guard(|| {
        *out(out_ell, "out_ell")? = gap::lipschitz_constant(delta)?;
        Ok(())
    })
}

/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_parabolic_min_dim(delta: f64, out_n: *mut usize) -> CimStatus {
    guard(|| {
        *out(out_n, "out_n")? = gap::parabolic_min_dim(delta)?;
        Ok(())
    })
}

/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_certify(delta: f64, eps: f64, n_max: usize, out_cert: *mut CimCertificate) -> CimStatus {
    guard(|| {
        let o = out(out_cert, "out_cert")?;
        let c = gap::certify(delta, eps, n_max)?;
        *o = CimCertificate {
            ell: c.ell,
            n_star_parabolic: c.n_star_parabolic,
            n_star_hyperbolic: c.n_star_hyperbolic.unwrap_or(0),
            eps_s: c.eps_s_estimate,
            eps_s_found: c.eps_s_found,
        };
        Ok(())
    })
}

/// New field from `n` coefficients.
///
/// # Safety
/// `coeffs` must point to `n` readable doubles; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_field_new(coeffs: *const f64, n: usize, out_field: *mut *mut CimField) -> CimStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        let f = SpectralField::new(slice(coeffs, n, "coeffs")?.to_vec())?;
        *o = Box::into_raw(Box::new(CimField(f)));
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cim_field_free(field: *mut CimField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of modes, or zero for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cim_field_len(field: *const CimField) -> usize {
    field.as_ref().map_or(0, |f| f.0.n_modes())
}

/// Copies up to `cap` coefficients into `buf`.
///
/// # Safety
/// `field` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cim_field_coeffs(field: *const CimField, buf: *mut f64, cap: usize) -> CimStatus {
    guard(|| {
        let f = field.as_ref().ok_or(Fail::Null("field"))?;
        let c = f.0.coeffs();
        if cap < c.len() {
            return Err(CimError::Dimension {
                expected: c.len(),
                got: cap,
            }
            .into());
        }
        if !c.is_empty() {
            if buf.is_null() {
                return Err(Fail::Null("buf"));
            }
            std::ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        }
        Ok(())
    })
}

/// `‖u‖_s = (Σ λ_n^s u_n²)^{1/2}`.
///
/// # Safety
/// `field` must be a live handle; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_norm_hs(field: *const CimField, s: f64, out_norm: *mut f64) -> CimStatus {
    guard(|| {
        let f = field.as_ref().ok_or(Fail::Null("field"))?;
        *out(out_norm, "out_norm")? = f.0.norm_hs(s);
        Ok(())
    })
}

/// `‖(u, v)‖_{X^ε_k}`.
///
/// # Safety
/// `u` and `v` must be live handles; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_norm_xeps(
    u: *const CimField,
    v: *const CimField,
    k: u32,
    eps: f64,
    out_norm: *mut f64,
) -> CimStatus {
    guard(|| {
        let u = u.as_ref().ok_or(Fail::Null("u"))?;
        let v = v.as_ref().ok_or(Fail::Null("v"))?;
        let s = ProductState::new(u.0.clone(), v.0.clone())?;
        *out(out_norm, "out_norm")? = s.norm_xeps(k, EpsWeight::new(eps)?);
        Ok(())
    })
}

/// Galerkin projection of `u³`.
///
/// # Safety
/// `u` must be a live handle; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_cubic(u: *const CimField, out_field: *mut *mut CimField) -> CimStatus {
    guard(|| {
        let u = u.as_ref().ok_or(Fail::Null("u"))?;
        let o = out(out_field, "out_field")?;
        *o = Box::into_raw(Box::new(CimField(spectral::cubic(&u.0))));
        Ok(())
    })
}

/// Parabolic flow from `u0` to `t_end`. `f` may be null for zero forcing.
///
/// # Safety
/// `u0` must be a live handle, `f` null or live; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_parabolic_evolve(
    u0: *const CimField,
    f: *const CimField,
    t_end: f64,
    dt: f64,
    out_field: *mut *mut CimField,
) -> CimStatus {
    guard(|| {
        let u0 = u0.as_ref().ok_or(Fail::Null("u0"))?;
        let o = out(out_field, "out_field")?;
        let f = f.as_ref().map_or_else(|| SpectralField::zeros(u0.0.n_modes()), |f| f.0.clone());
        let cfg = ParabolicConfig::forced(f).with_dt(dt);
        let u = parabolic::evolve_to(&u0.0, t_end, &cfg)?;
        *o = Box::into_raw(Box::new(CimField(u)));
        Ok(())
    })
}

/// Hyperbolic flow from `(u0, v0)` to `t_end`. `f` may be null.
///
/// # Safety
/// `u0`, `v0` must be live handles, `f` null or live; both outputs must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_hyperbolic_evolve(
    u0: *const CimField,
    v0: *const CimField,
    f: *const CimField,
    eps: f64,
    t_end: f64,
    dt: f64,
    out_u: *mut *mut CimField,
    out_v: *mut *mut CimField,
) -> CimStatus {
    guard(|| {
        let u0 = u0.as_ref().ok_or(Fail::Null("u0"))?;
        let v0 = v0.as_ref().ok_or(Fail::Null("v0"))?;
        let ou = out(out_u, "out_u")?;
        let ov = out(out_v, "out_v")?;
        let f = f.as_ref().map_or_else(|| SpectralField::zeros(u0.0.n_modes()), |f| f.0.clone());
        let cfg = HyperbolicConfig::forced(eps, f).with_dt(dt);
        let x0 = ProductState::new(u0.0.clone(), v0.0.clone())?;
        let x = hyperbolic::evolve_hyperbolic_to(&x0, t_end, &cfg)?;
        *ou = Box::into_raw(Box::new(CimField(x.u)));
        *ov = Box::into_raw(Box::new(CimField(x.v)));
        Ok(())
    })
}

/// Empty cloud of states with `n_modes` modes.
///
/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_cloud_new(n_modes: usize, out_cloud: *mut *mut CimCloud) -> CimStatus {
    guard(|| {
        let o = out(out_cloud, "out_cloud")?;
        if n_modes == 0 {
            return Err(CimError::Domain("a cloud needs at least one mode".into()).into());
        }
        *o = Box::into_raw(Box::new(CimCloud {
            n_modes,
            points: Vec::new(),
        }));
        Ok(())
    })
}

/// Appends `(u, v)`, each `n_modes` long. `v` may be null for a zero velocity.
///
/// # Safety
/// `cloud` must be a live handle; `u` (and `v` if non-null) must hold
/// `n_modes` doubles.
#[no_mangle]
pub unsafe extern "C" fn cim_cloud_push(cloud: *mut CimCloud, u: *const f64, v: *const f64) -> CimStatus {
    guard(|| {
        let c = cloud.as_mut().ok_or(Fail::Null("cloud"))?;
        let n = c.n_modes;
        let u = SpectralField::new(slice(u, n, "u")?.to_vec())?;
        let v = if v.is_null() {
            SpectralField::zeros(n)
        } else {
            SpectralField::new(slice(v, n, "v")?.to_vec())?
        };
        c.points.push(ProductState::new(u, v)?);
        Ok(())
    })
}

/// Number of points, or zero for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cim_cloud_len(cloud: *const CimCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.points.len())
}

/// # Safety
/// `cloud` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cim_cloud_free(cloud: *mut CimCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Hausdorff distance in `X^ε_k` between two clouds.
///
/// # Safety
/// `a`, `b` must be live handles; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cim_symdist(
    a: *const CimCloud,
    b: *const CimCloud,
    k: u32,
    eps: f64,
    out_report: *mut CimHausdorff,
) -> CimStatus {
    guard(|| {
        let a = a.as_ref().ok_or(Fail::Null("a"))?;
        let b = b.as_ref().ok_or(Fail::Null("b"))?;
        let o = out(out_report, "out_report")?;
        let ca = ManifoldCloud::from_points(FlowKind::Hyperbolic, a.points.clone());
        let cb = ManifoldCloud::from_points(FlowKind::Hyperbolic, b.points.clone());
        let r = robustness::symdist(&ca, &cb, k, eps)?;
        *o = CimHausdorff {
            d_uv: r.d_uv,
            d_vu: r.d_vu,
            dist: r.dist,
        };
        Ok(())
    })
}
