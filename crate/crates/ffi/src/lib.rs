//! C ABI over the bohrsom solver.
//!
//! Models are opaque handles built from a TOML symbol config. Every call
//! returns a `BsStatus`; on failure `bs_last_error` gives the message for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bohrsom::actions::{action_series, SignCalibration};
use bohrsom::oracle::{oracle_spectrum, OracleOptions};
use bohrsom::quantization::quantize;
use bohrsom::{parse_symbol_config, SymbolModel};
use thiserror::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Solver = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque symbol model.
pub struct BsModel {
    model: SymbolModel,
    calibration: SignCalibration,
}

/// Action coefficients `S0`, `S1`, `S2` and the period at one energy.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BsActions {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub period: f64,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("null pointer argument `{0}`")]
    Null(&'static str),
    #[error("config is not valid UTF-8")]
    Utf8,
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Solver(String),
    #[error("buffer holds {got} values, {need} needed")]
    Buffer { need: usize, got: usize },
}

impl FfiError {
    fn status(&self) -> BsStatus {
        match self {
            FfiError::Null(_) => BsStatus::NullPointer,
            FfiError::Utf8 => BsStatus::InvalidUtf8,
            FfiError::Config(_) => BsStatus::Config,
            FfiError::Argument(_) => BsStatus::InvalidArgument,
            FfiError::Solver(_) => BsStatus::Solver,
            FfiError::Buffer { .. } => BsStatus::BufferTooSmall,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> BsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            e.status()
        }
        Err(_) => {
            set_error("internal panic".into());
            BsStatus::Panic
        }
    }
}

fn model_ref<'a>(model: *const BsModel) -> Result<&'a BsModel, FfiError> {
    // SAFETY: non-null handles come from `bs_model_from_config` and are live
    // until `bs_model_free`.
    unsafe { model.as_ref() }.ok_or(FfiError::Null("model"))
}

fn check_order(order: u32) -> Result<u8, FfiError> {
    u8::try_from(order)
        .ok()
        .filter(|o| *o <= 2)
        .ok_or_else(|| FfiError::Argument(format!("order must be 0, 1 or 2, got {order}")))
}

/// Builds a model from a TOML symbol config.
///
/// # Safety
/// `config` must be a nul-terminated string and `out` a valid pointer. The
/// handle written to `out` must be released with `bs_model_free`.
#[no_mangle]
pub unsafe extern "C" fn bs_model_from_config(config: *const c_char, out: *mut *mut BsModel) -> BsStatus {
    guard(|| {
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        if config.is_null() {
            return Err(FfiError::Null("config"));
        }
        let text = CStr::from_ptr(config).to_str().map_err(|_| FfiError::Utf8)?;
        let model = parse_symbol_config(text).map_err(|e| FfiError::Config(e.to_string()))?;
        let handle = Box::new(BsModel {
            model,
            calibration: SignCalibration::default(),
        });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from `bs_model_from_config` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_model_free(model: *mut BsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Overrides the S2 sign calibration; each sign must be +1 or -1.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bs_model_set_signs(
    model: *mut BsModel,
    sigma_gamma: f64,
    sigma_p1sq: f64,
    sigma_p2: f64,
) -> BsStatus {
    guard(|| {
        let m = model.as_mut().ok_or(FfiError::Null("model"))?;
        for s in [sigma_gamma, sigma_p1sq, sigma_p2] {
            if s != 1.0 && s != -1.0 {
                return Err(FfiError::Argument(format!("sign must be +1 or -1, got {s}")));
            }
        }
        m.calibration.sigma_gamma = sigma_gamma;
        m.calibration.sigma_p1sq = sigma_p1sq;
        m.calibration.sigma_p2 = sigma_p2;
        Ok(())
    })
}

/// Energy of level `n` at truncation `order` (0, 1 or 2).
///
/// # Safety
/// `model` must be a live handle and `energy` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_quantize(
    model: *const BsModel,
    h: f64,
    n: u32,
    order: u32,
    energy: *mut f64,
) -> BsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let order = check_order(order)?;
        if energy.is_null() {
            return Err(FfiError::Null("energy"));
        }
        let lvl = quantize(&m.model, h, n as usize, order, &m.calibration).map_err(|e| FfiError::Solver(e.to_string()))?;
        *energy = lvl.energy;
        Ok(())
    })
}

/// Levels `n_lo..=n_hi` into `out`, which must hold `n_hi - n_lo + 1` values.
///
/// # Safety
/// `model` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_spectrum(
    model: *const BsModel,
    h: f64,
    n_lo: u32,
    n_hi: u32,
    order: u32,
    out: *mut f64,
    len: usize,
) -> BsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let order = check_order(order)?;
        if n_hi < n_lo {
            return Err(FfiError::Argument(format!("empty level range {n_lo}..{n_hi}")));
        }
        let need = (n_hi - n_lo) as usize + 1;
        if len < need {
            return Err(FfiError::Buffer { need, got: len });
        }
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (slot, n) in dst.iter_mut().zip(n_lo..=n_hi) {
            *slot = quantize(&m.model, h, n as usize, order, &m.calibration)
                .map_err(|e| FfiError::Solver(e.to_string()))?
                .energy;
        }
        Ok(())
    })
}

/// Lowest `count` eigenvalues of the discretized operator, with default options.
///
/// # Safety
/// `model` must be a live handle and `out` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_oracle_eigenvalues(model: *const BsModel, h: f64, count: usize, out: *mut f64) -> BsStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        if count == 0 {
            return Err(FfiError::Argument("count must be positive".into()));
        }
        let spec =
            oracle_spectrum(&m.model, h, count, &OracleOptions::default()).map_err(|e| FfiError::Solver(e.to_string()))?;
        std::slice::from_raw_parts_mut(out, count).copy_from_slice(&spec.eigenvalues[..count]);
        Ok(())
    })
}

/// Action coefficients at `energy`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_actions(model: *const BsModel, energy: f64, out: *mut BsActions) -> BsStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(FfiError::Null("out"));
        }
        let s = action_series(&m.model, energy, &m.calibration).map_err(|e| FfiError::Solver(e.to_string()))?;
        *out = BsActions {
            s0: s.s0,
            s1: s.s1,
            s2: s.s2,
            period: s.integrals.period,
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}
