//! C interface to `qmem-core`.
//!
//! Objects cross the boundary as opaque handles created by `qmem_*_new` or a
//! solver call and released with the matching `qmem_*_free`. Fallible calls
//! return a [`QmemStatus`]; the message of the last failure on the calling
//! thread is available from `qmem_last_error_message`. Array outputs are
//! written into caller buffers whose length is checked against the handle.

mod error;

use std::ffi::{c_char, CStr};

use qmem_core::runner::{self, Analysis, ConfigTemplate, PointResult, RunConfig};
use qmem_core::rwa::fopt_of_gamma;

pub use error::{qmem_last_error_message, QmemStatus};
use error::{guard, null, Fail};

/// Run configuration; starts from the defaults and takes `key=value` edits.
pub struct QmemConfig {
    template: ConfigTemplate,
}

/// Result of one solver run: channel series and derived measures.
pub struct QmemRun {
    result: PointResult,
}

/// Recurrence coefficients of the chain mapping.
pub struct QmemChain {
    onsite: Vec<f64>,
    hopping_sq: Vec<f64>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmemAxis {
    X = 0,
    Y = 1,
    Z = 2,
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(s) => s,
    Err(_) => panic!("version string"),
};

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qmem_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Optimal recovery fidelity of the rotating-wave channel with `|Gamma| = abs_gamma`.
#[no_mangle]
pub extern "C" fn qmem_fopt_of_gamma(abs_gamma: f64) -> f64 {
    fopt_of_gamma(abs_gamma)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QmemStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, Fail> {
    if p.is_null() {
        return Err(null("output pointer"));
    }
    *p = std::ptr::null_mut();
    Ok(&mut *p)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Fail(QmemStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Creates a configuration holding the defaults.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn qmem_config_new(out: *mut *mut QmemConfig) -> QmemStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = Box::into_raw(Box::new(QmemConfig { template: ConfigTemplate::empty() }));
        Ok(())
    })
}

/// Parses a TOML configuration. List-valued keys are accepted here but a
/// solver call rejects a configuration that expands to more than one point.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_config_from_toml(text: *const c_char, out: *mut *mut QmemConfig) -> QmemStatus {
    guard(|| {
        let out = out_arg(out)?;
        let template = ConfigTemplate::parse(str_arg(text, "text")?)?;
        template.expand()?;
        *out = Box::into_raw(Box::new(QmemConfig { template }));
        Ok(())
    })
}

/// Sets `key` (as `section.name`) to `value`, parsed as a TOML literal.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qmem_config_set(cfg: *mut QmemConfig, key: *const c_char, value: *const c_char) -> QmemStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        let spec = format!("{}={}", str_arg(key, "key")?, str_arg(value, "value")?);
        let mut next = cfg.template.clone();
        next.apply_override(&spec)?;
        next.expand()?;
        cfg.template = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, released only once.
#[no_mangle]
pub unsafe extern "C" fn qmem_config_free(cfg: *mut QmemConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn resolve(cfg: &QmemConfig) -> Result<RunConfig, Fail> {
    let mut points = cfg.template.expand()?;
    if points.len() != 1 {
        return Err(Fail(
            QmemStatus::InvalidArgument,
            format!("configuration expands to {} points; sweeps are run by the command line tool", points.len()),
        ));
    }
    Ok(points.remove(0).config)
}

unsafe fn solve(
    cfg: *const QmemConfig,
    out: *mut *mut QmemRun,
    run: impl FnOnce(&RunConfig) -> qmem_core::Result<PointResult>,
) -> QmemStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rc = resolve(handle(cfg, "config")?)?;
        let result = run(&rc)?;
        *out = Box::into_raw(Box::new(QmemRun { result }));
        Ok(())
    })
}

/// Solves the rotating-wave model.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_rwa_solve(cfg: *const QmemConfig, out: *mut *mut QmemRun) -> QmemStatus {
    solve(cfg, out, runner::run_rwa)
}

/// Runs the full model with matrix product states.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_full_evolve(cfg: *const QmemConfig, out: *mut *mut QmemRun) -> QmemStatus {
    solve(cfg, out, |c| runner::run_full(c, None))
}

/// Runs the full model by exact state-vector propagation (small chains).
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_oracle_exact(cfg: *const QmemConfig, out: *mut *mut QmemRun) -> QmemStatus {
    solve(cfg, out, runner::oracle_exact_diag)
}

fn analysis(run: &QmemRun) -> &Analysis {
    run.result.analysis.as_ref().expect("every solver run carries an analysis")
}

/// Number of time samples, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_len(run: *const QmemRun) -> usize {
    run.as_ref().map_or(0, |r| analysis(r).series.grid().len())
}

/// Spacing of the time samples, or NaN for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_dt(run: *const QmemRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| analysis(r).series.grid().dt())
}

/// Writes `D(t)` along `axis` into `out[0..qmem_run_len]`.
///
/// # Safety
/// `run` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_distinguishability(run: *const QmemRun, axis: QmemAxis, out: *mut f64, len: usize) -> QmemStatus {
    guard(|| {
        let a = analysis(handle(run, "run")?);
        let v = a.axes[axis as usize].values();
        buffer(out, len, v.len())?.copy_from_slice(v);
        Ok(())
    })
}

/// Writes the optimal recovery fidelity into `out[0..qmem_run_len]`.
///
/// # Safety
/// `run` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_optimal_fidelity(run: *const QmemRun, out: *mut f64, len: usize) -> QmemStatus {
    guard(|| {
        let f = analysis(handle(run, "run")?).fopt();
        buffer(out, len, f.len())?.copy_from_slice(&f);
        Ok(())
    })
}

/// Writes the non-Markovianity `N(t)` of the direction scan.
///
/// # Safety
/// `run` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_nm(run: *const QmemRun, out: *mut f64, len: usize) -> QmemStatus {
    guard(|| {
        let n = &analysis(handle(run, "run")?).nm.nm_value;
        buffer(out, len, n.len())?.copy_from_slice(n);
        Ok(())
    })
}

/// Writes the excited-state amplitude of a rotating-wave run.
///
/// # Safety
/// `run` must be a live handle; `re` and `im` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_gamma(run: *const QmemRun, re: *mut f64, im: *mut f64, len: usize) -> QmemStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let g = r
            .result
            .gamma
            .as_ref()
            .ok_or_else(|| Fail(QmemStatus::InvalidArgument, "run has no amplitude; only rotating-wave runs do".into()))?;
        let v = g.values();
        let re = buffer(re, len, v.len())?;
        let im = buffer(im, len, v.len())?;
        for (k, z) in v.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Number of audited samples violating a gain/loss inequality.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_audit_violations(run: *const QmemRun, out: *mut usize) -> QmemStatus {
    guard(|| {
        let a = analysis(handle(run, "run")?);
        *out.as_mut().ok_or_else(|| null("output pointer"))? = a.audit.total_violations();
        Ok(())
    })
}

/// Exponential decay rate of `D` along `axis`; `QMEM_STATUS_FIT_REFUSED`
/// for traces that do not decay.
///
/// # Safety
/// `run` must be a live handle and `rate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_fit_rate(run: *const QmemRun, axis: QmemAxis, rate: *mut f64) -> QmemStatus {
    guard(|| {
        let a = analysis(handle(run, "run")?);
        let out = rate.as_mut().ok_or_else(|| null("output pointer"))?;
        match &a.fits[axis as usize].1 {
            Ok(f) => {
                *out = f.rate;
                Ok(())
            }
            Err(e) => Err(Fail(error::status_of(e), e.to_string())),
        }
    })
}

/// # Safety
/// `run` must be null or a handle from this library, released only once.
#[no_mangle]
pub unsafe extern "C" fn qmem_run_free(run: *mut QmemRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Maps the configured bath onto a chain of `chain.length` sites.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qmem_chain_map(cfg: *const QmemConfig, out: *mut *mut QmemChain) -> QmemStatus {
    guard(|| {
        let out = out_arg(out)?;
        let c = runner::chain_coefficients(&resolve(handle(cfg, "config")?)?)?;
        *out = Box::into_raw(Box::new(QmemChain { onsite: c.onsite, hopping_sq: c.hopping_sq }));
        Ok(())
    })
}

/// Number of chain sites, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qmem_chain_len(chain: *const QmemChain) -> usize {
    chain.as_ref().map_or(0, |c| c.onsite.len())
}

/// Writes on-site energies and squared couplings; `hopping_sq[0]` is the
/// total bath weight and `hopping_sq[n]` couples sites `n-1` and `n`.
///
/// # Safety
/// `chain` must be a live handle; both buffers valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qmem_chain_coefficients(chain: *const QmemChain, onsite: *mut f64, hopping_sq: *mut f64, len: usize) -> QmemStatus {
    guard(|| {
        let c = handle(chain, "chain")?;
        buffer(onsite, len, c.onsite.len())?.copy_from_slice(&c.onsite);
        buffer(hopping_sq, len, c.hopping_sq.len())?.copy_from_slice(&c.hopping_sq);
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from this library, released only once.
#[no_mangle]
pub unsafe extern "C" fn qmem_chain_free(chain: *mut QmemChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}
