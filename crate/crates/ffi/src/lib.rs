//! C ABI over the `irbench` library.
//!
//! Every fallible call returns an [`IrbStatus`]; on failure the message is
//! available from [`irb_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use irbench::cli::{self, ExperimentConfig, IngestOptions, RunArtifacts};
use irbench::error::Error;
use irbench::estimators::{systematic_bounds, AnalysisSettings, Asymptote, EstimatorMethod, InfidelityEstimate};
use irbench::groups::TwirlGroupKind;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Configuration or input data rejected.
    InvalidInput = 3,
    /// Simulation or numerical failure.
    Runtime = 4,
    FitFailure = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrbGroup {
    Haar = 0,
    Clifford = 1,
    LocalClifford = 2,
    Pauli = 3,
    /// Infer from the data labels (ingest only).
    Infer = -1,
}

impl IrbGroup {
    fn kind(self) -> Option<TwirlGroupKind> {
        match self {
            IrbGroup::Haar => Some(TwirlGroupKind::Haar),
            IrbGroup::Clifford => Some(TwirlGroupKind::Clifford2),
            IrbGroup::LocalClifford => Some(TwirlGroupKind::LocalClifford),
            IrbGroup::Pauli => Some(TwirlGroupKind::Pauli),
            IrbGroup::Infer => None,
        }
    }

    fn from_name(name: &str) -> IrbGroup {
        match name {
            "haar" => IrbGroup::Haar,
            "clifford" => IrbGroup::Clifford,
            "local_clifford" => IrbGroup::LocalClifford,
            "pauli" => IrbGroup::Pauli,
            _ => IrbGroup::Infer,
        }
    }
}

pub const IRB_FLAG_UNPHYSICAL_NEGATIVE: u32 = 1;
pub const IRB_FLAG_OUTSIDE_SYSTEMATIC_BOUNDS: u32 = 1 << 1;
pub const IRB_FLAG_SYSTEMATIC_INPUTS_CLIPPED: u32 = 1 << 2;
pub const IRB_FLAG_POOR_FIT: u32 = 1 << 3;
pub const IRB_FLAG_XRB_INCONSISTENT: u32 = 1 << 4;

/// Flat view of one infidelity estimate. Absent intervals are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrbEstimate {
    pub group: IrbGroup,
    pub epsilon: f64,
    pub eps_reference: f64,
    pub eps_interleaved: f64,
    pub stat_low: f64,
    pub stat_high: f64,
    pub sys_low: f64,
    pub sys_high: f64,
    pub xrb_low: f64,
    pub xrb_high: f64,
    /// Bitwise OR of `IRB_FLAG_*`.
    pub flags: u32,
}

impl From<&InfidelityEstimate> for IrbEstimate {
    fn from(e: &InfidelityEstimate) -> Self {
        let flags = e
            .flags
            .iter()
            .map(|f| match f.as_str() {
                "unphysical_negative" => IRB_FLAG_UNPHYSICAL_NEGATIVE,
                "outside_systematic_bounds" => IRB_FLAG_OUTSIDE_SYSTEMATIC_BOUNDS,
                "systematic_inputs_clipped" => IRB_FLAG_SYSTEMATIC_INPUTS_CLIPPED,
                "poor_fit" => IRB_FLAG_POOR_FIT,
                "xrb_inconsistent" => IRB_FLAG_XRB_INCONSISTENT,
                _ => 0,
            })
            .fold(0, |a, b| a | b);
        let (stat_low, stat_high) = e.stat_ci.unwrap_or((f64::NAN, f64::NAN));
        let (xrb_low, xrb_high) = e.xrb_bounds.unwrap_or((f64::NAN, f64::NAN));
        IrbEstimate {
            group: IrbGroup::from_name(&e.protocol),
            epsilon: e.epsilon,
            eps_reference: e.eps_reference,
            eps_interleaved: e.eps_interleaved,
            stat_low,
            stat_high,
            sys_low: e.sys_bounds.0,
            sys_high: e.sys_bounds.1,
            xrb_low,
            xrb_high,
            flags,
        }
    }
}

/// Analysis options for [`irb_ingest_csv`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrbIngestOptions {
    pub group: IrbGroup,
    /// 0 = ratio, 1 = IRB form.
    pub method: u32,
    /// 0 = fixed asymptote, 1 = free.
    pub asymptote: u32,
    /// Zero disables the bootstrap.
    pub resamples: u32,
    pub seed: u64,
    pub level: f64,
    /// NaN when no unitarity is available.
    pub unitarity: f64,
}

/// Experiment configuration handle.
pub struct IrbExperiment {
    config: ExperimentConfig,
}

/// Results of one run.
pub struct IrbRun {
    artifacts: RunArtifacts,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> IrbStatus {
    match e {
        Error::Io(_) => IrbStatus::Io,
        Error::FitFailure { .. } => IrbStatus::FitFailure,
        _ if e.exit_code() == 2 => IrbStatus::InvalidInput,
        _ => IrbStatus::Runtime,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IrbStatus, String)>) -> IrbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            IrbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IrbStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IrbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (IrbStatus, String) {
    (IrbStatus::NullPointer, "null pointer argument".into())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, (IrbStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| (IrbStatus::InvalidUtf8, "string argument is not UTF-8".into()))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn irb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn irb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON experiment configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_from_json(json: *const c_char, out: *mut *mut IrbExperiment) -> IrbStatus {
    guard(|| {
        let text = str_arg(json)?;
        if out.is_null() {
            return Err(null());
        }
        let config = ExperimentConfig::from_json(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrbExperiment { config }));
        Ok(())
    })
}

/// Loads an embedded preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_from_preset(name: *const c_char, out: *mut *mut IrbExperiment) -> IrbStatus {
    guard(|| {
        let name = str_arg(name)?;
        if out.is_null() {
            return Err(null());
        }
        let text = cli::presets::get(name).ok_or((IrbStatus::InvalidInput, format!("no preset named `{name}`")))?;
        let config = ExperimentConfig::from_json(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrbExperiment { config }));
        Ok(())
    })
}

/// # Safety
/// `exp` must come from an `irb_experiment_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_set_seed(exp: *mut IrbExperiment, seed: u64) -> IrbStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(null)?;
        exp.config.seed = seed;
        Ok(())
    })
}

/// Switches between sampled shots and exact outcome probabilities.
///
/// # Safety
/// `exp` must come from an `irb_experiment_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_set_exact(exp: *mut IrbExperiment, exact: bool) -> IrbStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(null)?;
        exp.config.exact = exact;
        Ok(())
    })
}

/// Number of bootstrap resamples; zero disables statistical intervals.
///
/// # Safety
/// `exp` must come from an `irb_experiment_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_set_resamples(exp: *mut IrbExperiment, resamples: u32) -> IrbStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(null)?;
        exp.config.bootstrap.resamples = resamples as usize;
        Ok(())
    })
}

/// # Safety
/// `exp` must come from an `irb_experiment_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_free(exp: *mut IrbExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs every protocol pair of the experiment.
///
/// # Safety
/// `exp` must be a live experiment handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irb_experiment_run(exp: *const IrbExperiment, out: *mut *mut IrbRun) -> IrbStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let artifacts = cli::execute(&exp.config).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrbRun { artifacts }));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn irb_run_num_estimates(run: *const IrbRun) -> usize {
    run.as_ref().map(|r| r.artifacts.report.estimates.len()).unwrap_or(0)
}

/// # Safety
/// `run` must be a live run handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irb_run_estimate(run: *const IrbRun, index: usize, out: *mut IrbEstimate) -> IrbStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let est = run.artifacts.report.estimates.get(index).ok_or((
            IrbStatus::OutOfRange,
            format!("estimate index {index} out of range ({} estimates)", run.artifacts.report.estimates.len()),
        ))?;
        *out = IrbEstimate::from(&est.estimate);
        Ok(())
    })
}

/// Process infidelity of the error injected on the interleaved gate; NaN for a null handle.
///
/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn irb_run_theoretical_infidelity(run: *const IrbRun) -> f64 {
    run.as_ref().map(|r| r.artifacts.report.theoretical_infidelity).unwrap_or(f64::NAN)
}

/// Report JSON; release with [`irb_string_free`]. Null on failure.
///
/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn irb_run_report_json(run: *const IrbRun) -> *mut c_char {
    match run.as_ref() {
        Some(r) => CString::new(r.artifacts.report.to_json()).map(CString::into_raw).unwrap_or(ptr::null_mut()),
        None => {
            set_error("null pointer argument");
            ptr::null_mut()
        }
    }
}

/// Writes the report, decay tables and plot data into `dir`.
///
/// # Safety
/// `run` must be a live run handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn irb_run_write(run: *const IrbRun, dir: *const c_char) -> IrbStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(null)?;
        let dir = str_arg(dir)?;
        cli::write_artifacts(&run.artifacts, Path::new(dir)).map_err(lib_err)?;
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`irb_experiment_run`], or be null.
#[no_mangle]
pub unsafe extern "C" fn irb_run_free(run: *mut IrbRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn irb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Defaults matching the command-line `ingest`.
#[no_mangle]
pub extern "C" fn irb_ingest_options_default() -> IrbIngestOptions {
    let s = AnalysisSettings::default();
    IrbIngestOptions {
        group: IrbGroup::Infer,
        method: 0,
        asymptote: 0,
        resamples: s.resamples as u32,
        seed: s.seed,
        level: s.level,
        unitarity: f64::NAN,
    }
}

/// Analyses reference and interleaved decay tables given as CSV text
/// (`depth,label,mean,stderr,n`).
///
/// # Safety
/// CSV arguments must be NUL-terminated strings, `opts` may be null for defaults,
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irb_ingest_csv(
    reference_csv: *const c_char,
    interleaved_csv: *const c_char,
    opts: *const IrbIngestOptions,
    out: *mut IrbEstimate,
) -> IrbStatus {
    guard(|| {
        let rp = cli::read_points(str_arg(reference_csv)?).map_err(lib_err)?;
        let ip = cli::read_points(str_arg(interleaved_csv)?).map_err(lib_err)?;
        let out = out.as_mut().ok_or_else(null)?;
        let o = opts.as_ref().copied().unwrap_or_else(|| irb_ingest_options_default());
        let method = match o.method {
            0 => EstimatorMethod::Ratio,
            1 => EstimatorMethod::Irb,
            m => return Err((IrbStatus::InvalidInput, format!("unknown method {m}"))),
        };
        let asymptote = match o.asymptote {
            0 => Asymptote::Fixed,
            1 => Asymptote::Free,
            a => return Err((IrbStatus::InvalidInput, format!("unknown asymptote {a}"))),
        };
        if !(o.level > 0.0 && o.level < 1.0) {
            return Err((IrbStatus::InvalidInput, "level must lie strictly between 0 and 1".into()));
        }
        let opts = IngestOptions {
            group: o.group.kind(),
            kind: None,
            settings: AnalysisSettings {
                method,
                asymptote,
                resamples: o.resamples as usize,
                seed: o.seed,
                level: o.level,
                unitarity: (!o.unitarity.is_nan()).then_some(o.unitarity),
                ..AnalysisSettings::default()
            },
        };
        let est = cli::ingest(&rp, &ip, &opts).map_err(lib_err)?;
        *out = IrbEstimate::from(&est);
        Ok(())
    })
}

/// Interval for the interleaved-gate infidelity from the dressed (`eps_ef`)
/// and reference (`eps_e`) infidelities.
///
/// # Safety
/// `low` and `high` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn irb_systematic_bounds(eps_ef: f64, eps_e: f64, low: *mut f64, high: *mut f64) -> IrbStatus {
    guard(|| {
        let (l, h) = (low.as_mut().ok_or_else(null)?, high.as_mut().ok_or_else(null)?);
        let (lo, hi, _) = systematic_bounds(eps_ef, eps_e);
        *l = lo;
        *h = hi;
        Ok(())
    })
}
