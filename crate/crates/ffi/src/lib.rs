//! C ABI over `binrank`.
//!
//! Matrices cross the boundary as row-major buffers. Objects are opaque
//! handles created by `*_new`/`binrank_fit` and released with the matching
//! `*_free`. Every fallible call returns a [`BinrankStatus`]; on failure
//! [`binrank_last_error_message`] describes the error for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use binrank::bounds::{self, BoundInputs};
use binrank::model::{self, Loss};
use binrank::prior::{self, Regime};
use binrank::sampler::{self, Algorithm, LambdaRegime, SamplerConfig};
use binrank::{Coefficients, DesignMatrix, Error, ObservationMask, ResponseMatrix};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinrankStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Divergence = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinrankLoss {
    Hinge = 0,
    Logistic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinrankAlgorithm {
    Mala = 0,
    Lmc = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinrankRisk {
    ZeroOne = 0,
    Hinge = 1,
    Logistic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinrankLambdaRegime {
    /// `2nq/(3C+2)`.
    Full = 0,
    /// `2m/(3C+2)`.
    Missing = 1,
    /// `2√(nq/(p+q+2))`.
    SlowRate = 2,
}

/// Sampler settings; start from [`binrank_sampler_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BinrankSamplerConfig {
    pub lambda: f64,
    pub tau: f64,
    pub step_size: f64,
    pub iterations: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub loss: BinrankLoss,
    pub algorithm: BinrankAlgorithm,
    /// Nonzero to adapt the step size during burn-in.
    pub adapt_step: u8,
    pub target_acceptance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BinrankFitDiagnostics {
    pub acceptance_rate: f64,
    pub final_step_size: f64,
    pub n_kept: u64,
    pub non_finite_rejections: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BinrankBoundInputs {
    pub n: u64,
    pub p: u64,
    pub q: u64,
    pub m: u64,
    pub r_star: u64,
    pub norm_x: f64,
    pub norm_mb: f64,
    pub c: f64,
    pub r_bar: f64,
    pub epsilon: f64,
    pub varsigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BinrankBoundReport {
    pub theorem1: f64,
    pub corollary1: f64,
    pub proposition1: f64,
    pub theorem2: f64,
}

/// Opaque `n × p` design matrix.
pub struct BinrankDesign(DesignMatrix);

/// Opaque `n × q` response matrix with its observation mask.
pub struct BinrankResponse(ResponseMatrix);

/// Opaque `p × q` coefficient matrix.
pub struct BinrankCoefficients(Coefficients);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> BinrankStatus {
    match err {
        Error::DimensionMismatch(_) => BinrankStatus::DimensionMismatch,
        Error::InvalidInput(_) => BinrankStatus::InvalidInput,
        Error::Numerical(_) => BinrankStatus::Numerical,
        Error::Divergence { .. } => BinrankStatus::Divergence,
        Error::Parse { .. } => BinrankStatus::Parse,
        Error::Io { .. } => BinrankStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> BinrankStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BinrankStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            BinrankStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            BinrankStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn checked_len(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols).ok_or_else(|| Failure::Lib(Error::InvalidInput(format!("{rows}x{cols} overflows"))))
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn binrank_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn binrank_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies a row-major `n × p` buffer into a new design handle.
#[no_mangle]
pub unsafe extern "C" fn binrank_design_new(
    data: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut BinrankDesign,
) -> BinrankStatus {
    guard(|| {
        let values = slice(data, checked_len(n, p)?, "data")?;
        let x = DesignMatrix::from_row_slice(n, p, values)?;
        put(out, Box::into_raw(Box::new(BinrankDesign(x))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn binrank_design_free(x: *mut BinrankDesign) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// Copies a row-major `n × q` buffer of `+1`, `-1` or `0` (unobserved).
#[no_mangle]
pub unsafe extern "C" fn binrank_response_new(
    data: *const i8,
    n: usize,
    q: usize,
    out: *mut *mut BinrankResponse,
) -> BinrankStatus {
    guard(|| {
        let cells = slice(data, checked_len(n, q)?, "data")?;
        let mut pairs = Vec::new();
        for (idx, &v) in cells.iter().enumerate() {
            match v {
                0 => {}
                1 | -1 => pairs.push((idx / q, idx % q)),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "response cell ({}, {}) is {other}; expected -1, 0 or 1",
                        idx / q + 1,
                        idx % q + 1
                    ))
                    .into())
                }
            }
        }
        let mask = ObservationMask::from_pairs(n, q, pairs)?;
        let y = ResponseMatrix::new(DMatrix::from_row_slice(n, q, cells), mask)?;
        put(out, Box::into_raw(Box::new(BinrankResponse(y))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn binrank_response_free(y: *mut BinrankResponse) {
    if !y.is_null() {
        drop(Box::from_raw(y));
    }
}

/// Number of observed entries.
#[no_mangle]
pub unsafe extern "C" fn binrank_response_observed(y: *const BinrankResponse, out: *mut usize) -> BinrankStatus {
    guard(|| put(out, get(y, "response")?.0.m(), "out"))
}

/// Copies a row-major `p × q` buffer into a new coefficients handle.
#[no_mangle]
pub unsafe extern "C" fn binrank_coefficients_new(
    data: *const f64,
    p: usize,
    q: usize,
    out: *mut *mut BinrankCoefficients,
) -> BinrankStatus {
    guard(|| {
        let values = slice(data, checked_len(p, q)?, "data")?;
        let m = Coefficients::from_row_slice(p, q, values)?;
        put(out, Box::into_raw(Box::new(BinrankCoefficients(m))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn binrank_coefficients_free(m: *mut BinrankCoefficients) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub unsafe extern "C" fn binrank_coefficients_shape(
    m: *const BinrankCoefficients,
    p: *mut usize,
    q: *mut usize,
) -> BinrankStatus {
    guard(|| {
        let m = &get(m, "coefficients")?.0;
        put(p, m.p(), "p")?;
        put(q, m.q(), "q")
    })
}

/// Writes the coefficients row-major into `out`, which holds `len ≥ p·q`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn binrank_coefficients_copy(
    m: *const BinrankCoefficients,
    out: *mut f64,
    len: usize,
) -> BinrankStatus {
    guard(|| {
        let m = &get(m, "coefficients")?.0;
        let (p, q) = (m.p(), m.q());
        if len < p * q {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, need {}", p * q)).into());
        }
        let buf = slice_mut(out, p * q, "out")?;
        for i in 0..p {
            for k in 0..q {
                buf[i * q + k] = m.values()[(i, k)];
            }
        }
        Ok(())
    })
}

fn to_config(c: &BinrankSamplerConfig) -> Result<SamplerConfig, Failure> {
    let count = |v: u64, name: &str| {
        usize::try_from(v).map_err(|_| Failure::Lib(Error::InvalidInput(format!("{name} = {v} is too large"))))
    };
    Ok(SamplerConfig {
        lambda: c.lambda,
        tau: c.tau,
        step_size: c.step_size,
        iterations: count(c.iterations, "iterations")?,
        burn_in: count(c.burn_in, "burn_in")?,
        thinning: count(c.thinning, "thinning")?,
        seed: c.seed,
        loss: match c.loss {
            BinrankLoss::Hinge => Loss::Hinge,
            BinrankLoss::Logistic => Loss::Logistic,
        },
        algorithm: match c.algorithm {
            BinrankAlgorithm::Mala => Algorithm::Mala,
            BinrankAlgorithm::Lmc => Algorithm::Lmc,
        },
        adapt_step: c.adapt_step != 0,
        target_acceptance: c.target_acceptance,
    })
}

/// Fills `out` with the library defaults.
#[no_mangle]
pub unsafe extern "C" fn binrank_sampler_config_default(out: *mut BinrankSamplerConfig) -> BinrankStatus {
    guard(|| {
        let d = SamplerConfig::default();
        let cfg = BinrankSamplerConfig {
            lambda: d.lambda,
            tau: d.tau,
            step_size: d.step_size,
            iterations: d.iterations as u64,
            burn_in: d.burn_in as u64,
            thinning: d.thinning as u64,
            seed: d.seed,
            loss: BinrankLoss::Hinge,
            algorithm: BinrankAlgorithm::Mala,
            adapt_step: u8::from(d.adapt_step),
            target_acceptance: d.target_acceptance,
        };
        put(out, cfg, "out")
    })
}

/// Samples the Gibbs posterior and returns its mean in `*out`.
/// `diagnostics` may be null.
#[no_mangle]
pub unsafe extern "C" fn binrank_fit(
    x: *const BinrankDesign,
    y: *const BinrankResponse,
    config: *const BinrankSamplerConfig,
    out: *mut *mut BinrankCoefficients,
    diagnostics: *mut BinrankFitDiagnostics,
) -> BinrankStatus {
    guard(|| {
        let (x, y) = (&get(x, "design")?.0, &get(y, "response")?.0);
        let cfg = to_config(get(config, "config")?)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let fitted = binrank::estimator::fit(x, y, &cfg)?;
        if !diagnostics.is_null() {
            diagnostics.write(BinrankFitDiagnostics {
                acceptance_rate: fitted.chain.acceptance_rate,
                final_step_size: fitted.chain.final_step_size,
                n_kept: fitted.chain.n_kept as u64,
                non_finite_rejections: fitted.chain.non_finite_rejections as u64,
            });
        }
        put(out, Box::into_raw(Box::new(BinrankCoefficients(fitted.coefficients))), "out")
    })
}

/// Writes `sign(XM)` row-major into `out` (`len ≥ n·q`), with sign(0) = +1.
#[no_mangle]
pub unsafe extern "C" fn binrank_predict(
    m: *const BinrankCoefficients,
    x: *const BinrankDesign,
    out: *mut i8,
    len: usize,
) -> BinrankStatus {
    guard(|| {
        let (m, x) = (&get(m, "coefficients")?.0, &get(x, "design")?.0);
        let signs = model::predict(m, x)?;
        let (n, q) = signs.shape();
        if len < n * q {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, need {}", n * q)).into());
        }
        let buf = slice_mut(out, n * q, "out")?;
        for i in 0..n {
            for k in 0..q {
                buf[i * q + k] = signs[(i, k)];
            }
        }
        Ok(())
    })
}

/// Mean empirical risk over the observed entries of `y`.
#[no_mangle]
pub unsafe extern "C" fn binrank_risk(
    m: *const BinrankCoefficients,
    x: *const BinrankDesign,
    y: *const BinrankResponse,
    kind: BinrankRisk,
    out: *mut f64,
) -> BinrankStatus {
    guard(|| {
        let (m, x, y) = (&get(m, "coefficients")?.0, &get(x, "design")?.0, &get(y, "response")?.0);
        let r = match kind {
            BinrankRisk::ZeroOne => model::zero_one_risk(m, x, y)?,
            BinrankRisk::Hinge => model::hinge_risk(m, x, y)?,
            BinrankRisk::Logistic => model::logistic_risk(m, x, y)?,
        };
        put(out, r, "out")
    })
}

/// Unnormalized log-density of the Gibbs posterior at `m`.
#[no_mangle]
pub unsafe extern "C" fn binrank_log_target(
    m: *const BinrankCoefficients,
    x: *const BinrankDesign,
    y: *const BinrankResponse,
    config: *const BinrankSamplerConfig,
    out: *mut f64,
) -> BinrankStatus {
    guard(|| {
        let (m, x, y) = (&get(m, "coefficients")?.0, &get(x, "design")?.0, &get(y, "response")?.0);
        let cfg = to_config(get(config, "config")?)?;
        put(out, sampler::log_target(m, x, y, &cfg)?, "out")
    })
}

fn to_inputs(b: &BinrankBoundInputs) -> Result<BoundInputs, Failure> {
    let u = |v: u64| usize::try_from(v).map_err(|_| Failure::Lib(Error::InvalidInput(format!("{v} is too large"))));
    Ok(BoundInputs {
        n: u(b.n)?,
        p: u(b.p)?,
        q: u(b.q)?,
        m: u(b.m)?,
        r_star: u(b.r_star)?,
        norm_x: b.norm_x,
        norm_mb: b.norm_mb,
        c: b.c,
        r_bar: b.r_bar,
        epsilon: b.epsilon,
        varsigma: b.varsigma,
    })
}

/// Evaluates the four risk bounds. With `optimize_varsigma` nonzero each
/// bound is minimized over varsigma in (0.01, 0.99).
#[no_mangle]
pub unsafe extern "C" fn binrank_bounds(
    inputs: *const BinrankBoundInputs,
    optimize_varsigma: u8,
    out: *mut BinrankBoundReport,
) -> BinrankStatus {
    guard(|| {
        let b = to_inputs(get(inputs, "inputs")?)?;
        let report = if optimize_varsigma != 0 {
            let best = |f: fn(&BoundInputs) -> binrank::Result<f64>| bounds::optimize_varsigma(&b, f).map(|(_, v)| v);
            BinrankBoundReport {
                theorem1: best(bounds::theorem1_bound)?,
                corollary1: best(bounds::corollary1_bound)?,
                proposition1: best(bounds::proposition1_bound)?,
                theorem2: best(bounds::theorem2_bound)?,
            }
        } else {
            let r = bounds::all_bounds(&b)?;
            BinrankBoundReport {
                theorem1: r.theorem1,
                corollary1: r.corollary1,
                proposition1: r.proposition1,
                theorem2: r.theorem2,
            }
        };
        put(out, report, "out")
    })
}

/// Theory-driven temperature. `p` is only read for the slow-rate regime.
#[no_mangle]
pub unsafe extern "C" fn binrank_default_lambda(
    n: usize,
    p: usize,
    q: usize,
    m: usize,
    c: f64,
    regime: BinrankLambdaRegime,
    out: *mut f64,
) -> BinrankStatus {
    guard(|| {
        let regime = match regime {
            BinrankLambdaRegime::Full => LambdaRegime::Full,
            BinrankLambdaRegime::Missing => LambdaRegime::Missing,
            BinrankLambdaRegime::SlowRate => LambdaRegime::SlowRate { p },
        };
        put(out, sampler::default_lambda(n, q, m, c, regime)?, "out")
    })
}

/// Theory-driven prior scale; `missing` nonzero selects the partially
/// observed formula.
#[no_mangle]
pub unsafe extern "C" fn binrank_default_tau(
    n: usize,
    p: usize,
    q: usize,
    m: usize,
    norm_x_sq: f64,
    missing: u8,
    out: *mut f64,
) -> BinrankStatus {
    guard(|| {
        let regime = if missing != 0 { Regime::Missing } else { Regime::Full };
        put(out, prior::default_tau(n, p, q, m, norm_x_sq, regime)?, "out")
    })
}
