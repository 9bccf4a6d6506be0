//! C interface to `phytoagg`: build a model from expression strings, then
//! evaluate `xi`, locate `lambda0` and classify the zero state.
//!
//! Every function returns a [`PaStatus`]. On failure the message is kept
//! per thread and can be read with [`pa_last_error_message`]. Handles are
//! opaque and must be released with [`pa_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phytoagg::spectral::SpectralBound;
use phytoagg::{Classification, CoefficientSet, Error, Grading, Mesh, SpectralContext};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    Numerical = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaGrading {
    Uniform = 0,
    Geometric = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaClassification {
    Stable = 0,
    Unstable = 1,
    Marginal = 2,
    NoRoot = 3,
}

/// Result of [`pa_model_classify`]. `lambda0` is NaN when `has_root` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaReport {
    pub xi_at_zero: f64,
    pub lambda0: f64,
    pub has_root: bool,
    pub classification: PaClassification,
    pub gamma_x1: f64,
}

/// Opaque model handle.
pub struct PaModel {
    coefficients: CoefficientSet,
    mesh: Mesh,
    quad_order: usize,
    ctx: SpectralContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PaStatus {
    match e {
        Error::Parse { .. } | Error::Config { .. } => PaStatus::Parse,
        Error::Domain { .. } | Error::InvalidCoefficients(_) | Error::Eval(_) => PaStatus::Domain,
        Error::MeshTooSmall { .. } | Error::OutOfRange { .. } | Error::Argument(_) => {
            PaStatus::InvalidArgument
        }
        _ => PaStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F: FnOnce() -> Result<(), (PaStatus, String)>>(f: F) -> PaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PaStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PaStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (PaStatus, String)> {
    if p.is_null() {
        return Err((PaStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PaStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn model<'a>(m: *const PaModel) -> Result<&'a PaModel, (PaStatus, String)> {
    m.as_ref()
        .ok_or((PaStatus::NullPointer, "model handle is null".into()))
}

fn null_out() -> (PaStatus, String) {
    (PaStatus::NullPointer, "output pointer is null".into())
}

/// Builds a model on `[x0, x1]` from expression strings in `x` (and `y` for
/// `beta`; pass NULL for no aggregation). The spectral tables use an
/// `n`-cell mesh.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_model_new(
    x0: f64,
    x1: f64,
    g: *const c_char,
    w: *const c_char,
    q: *const c_char,
    beta: *const c_char,
    n: usize,
    grading: PaGrading,
    out: *mut *mut PaModel,
) -> PaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_out());
        }
        *out = ptr::null_mut();
        let beta = if beta.is_null() {
            "0"
        } else {
            text(beta, "beta")?
        };
        let cs = CoefficientSet::parse(x0, x1, text(g, "g")?, text(w, "w")?, text(q, "q")?, beta)
            .map_err(lib)?;
        let grading = match grading {
            PaGrading::Uniform => Grading::Uniform,
            PaGrading::Geometric => Grading::Geometric,
        };
        let mesh = Mesh::for_coefficients(&cs, n, grading).map_err(lib)?;
        let quad_order = phytoagg::quad::DEFAULT_ORDER;
        let ctx = SpectralContext::new(&cs, &mesh, quad_order).map_err(lib)?;
        *out = Box::into_raw(Box::new(PaModel {
            coefficients: cs,
            mesh,
            quad_order,
            ctx,
        }));
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `m` must come from [`pa_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pa_model_free(m: *mut PaModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Sets the multipliers on `g`, `q` and `w` (all must be positive) and
/// rebuilds the spectral tables.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pa_model_set_scales(
    m: *mut PaModel,
    g_scale: f64,
    q_scale: f64,
    w_scale: f64,
) -> PaStatus {
    guard(|| {
        let m = m
            .as_mut()
            .ok_or((PaStatus::NullPointer, "model handle is null".into()))?;
        let cs = m
            .coefficients
            .clone()
            .with_scales(g_scale, q_scale, w_scale)
            .map_err(lib)?;
        m.ctx = SpectralContext::new(&cs, &m.mesh, m.quad_order).map_err(lib)?;
        m.coefficients = cs;
        Ok(())
    })
}

/// `xi(lambda)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pa_model_xi(m: *const PaModel, lambda: f64, out: *mut f64) -> PaStatus {
    guard(|| {
        let m = model(m)?;
        let out = out.as_mut().ok_or_else(null_out)?;
        if lambda.is_nan() {
            return Err((PaStatus::InvalidArgument, "lambda is NaN".into()));
        }
        *out = m.ctx.xi(lambda);
        Ok(())
    })
}

/// The real root of `xi`. `has_root` is set to 0 when `q` vanishes, in
/// which case `out` is NaN.
///
/// # Safety
/// `m` must be a live handle; `out` and `has_root` writable.
#[no_mangle]
pub unsafe extern "C" fn pa_model_spectral_bound(
    m: *const PaModel,
    out: *mut f64,
    has_root: *mut bool,
) -> PaStatus {
    guard(|| {
        let m = model(m)?;
        let out = out.as_mut().ok_or_else(null_out)?;
        let has_root = has_root.as_mut().ok_or_else(null_out)?;
        match m
            .ctx
            .find_spectral_bound(m.ctx.default_root_options())
            .map_err(lib)?
        {
            SpectralBound::Root(l) => {
                *out = l;
                *has_root = true;
            }
            SpectralBound::NoRoot => {
                *out = f64::NAN;
                *has_root = false;
            }
        }
        Ok(())
    })
}

/// Classifies the zero state; `|xi(0)| <= tol` is marginal.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pa_model_classify(
    m: *const PaModel,
    tol: f64,
    out: *mut PaReport,
) -> PaStatus {
    guard(|| {
        let m = model(m)?;
        let out = out.as_mut().ok_or_else(null_out)?;
        let r = m.ctx.classify(tol).map_err(lib)?;
        *out = PaReport {
            xi_at_zero: r.xi_at_zero,
            lambda0: r.lambda0.unwrap_or(f64::NAN),
            has_root: r.lambda0.is_some(),
            classification: match r.classification {
                Classification::Stable => PaClassification::Stable,
                Classification::Unstable => PaClassification::Unstable,
                Classification::Marginal => PaClassification::Marginal,
                Classification::NoRoot => PaClassification::NoRoot,
            },
            gamma_x1: r.gamma_x1,
        };
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must hold `len` bytes, or be NULL with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn pa_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
