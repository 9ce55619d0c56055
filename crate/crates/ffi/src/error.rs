use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qmem_core::Error;

/// Status returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    ChainTooLong = 4,
    NumericalFailure = 5,
    FitRefused = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) fn set_last_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

pub(crate) fn status_of(e: &Error) -> QmemStatus {
    match e {
        Error::InvalidArgument(_) => QmemStatus::InvalidArgument,
        Error::Config { .. } => QmemStatus::Config,
        Error::ChainTooLong { .. } => QmemStatus::ChainTooLong,
        Error::NumericalFailure(_) => QmemStatus::NumericalFailure,
        Error::FitRefused(_) => QmemStatus::FitRefused,
        Error::Io(_) => QmemStatus::Io,
    }
}

/// Failure inside the C layer itself.
pub(crate) struct Fail(pub QmemStatus, pub String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

pub(crate) fn null(what: &str) -> Fail {
    Fail(QmemStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic as the thread's last error and maps
/// it to a status.
pub(crate) fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QmemStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmemStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            QmemStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn qmem_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}
