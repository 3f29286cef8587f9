//! C ABI for frustlab.
//!
//! Every fallible function returns an [`FlStatus`]. On failure the message is
//! kept per thread and can be read with [`fl_last_error_message`] until the
//! next failing call on the same thread. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `_free` function.
//! Matrices are dense, row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use frustlab::datagen::{
    generate_synthetic_dataset, pair_assignment, CovarianceBlocks, SyntheticConfig, TaskWeights,
};
use frustlab::experiments::{
    run_fisher_window, run_globe, run_realworld, run_synthetic, run_theory_check, ExperimentConfig,
    Preset,
};
use frustlab::frustration::global_frustration;
use frustlab::geometry::{similarity, GeometryKind, QuadraticForm};
use frustlab::ingest::{load_embedding_file, write_embedding_file};
use frustlab::stats::{wilcoxon_signed_rank, PairedSample, TestMethod};
use frustlab::theory::closed_form_accuracy;
use frustlab::{Dataset, Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    Config = 7,
    /// A suite finished but some rows failed.
    NullRows = 8,
    Panic = 9,
}

/// Opaque dataset handle.
pub struct FlDataset(Dataset);

/// Opaque experiment configuration handle.
pub struct FlConfig(ExperimentConfig);

/// Outcome of a paired signed-rank test.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlTestResult {
    pub n_eff: usize,
    pub statistic: f64,
    pub p_two_sided: f64,
    pub hl_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// 1 when the exact null distribution was used, 0 for the normal approximation.
    pub exact: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FlStatus {
    match e {
        Error::DimensionMismatch(_) | Error::TooFewConceptColumns(_) => FlStatus::DimensionMismatch,
        Error::NotSymmetric(_)
        | Error::NotPositiveDefinite { .. }
        | Error::NonFiniteLoss { .. }
        | Error::EmptyWindow { .. }
        | Error::ZeroReference
        | Error::DegeneratePoint
        | Error::DegenerateDenominator(_)
        | Error::AllZeroDifferences => FlStatus::Numerical,
        Error::MalformedHeader { .. }
        | Error::MalformedRow { .. }
        | Error::NonBinaryLabel { .. }
        | Error::Csv(_) => FlStatus::Parse,
        Error::Io(_) => FlStatus::Io,
        Error::Config(_) => FlStatus::Config,
        _ => FlStatus::InvalidArgument,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (FlStatus, String)>) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FlStatus::Panic
        }
    }
}

fn lib(e: Error) -> (FlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (FlStatus, String) {
    (FlStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    name: &str,
) -> Result<&'a [f64], (FlStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn matrix(
    p: *const f64,
    rows: usize,
    cols: usize,
    name: &str,
) -> Result<Matrix, (FlStatus, String)> {
    let len = rows.checked_mul(cols).ok_or((
        FlStatus::InvalidArgument,
        format!("`{name}` size overflows"),
    ))?;
    Matrix::from_vec(rows, cols, slice(p, len, name)?.to_vec()).map_err(lib)
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (FlStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FlStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn out<T>(p: *mut T, name: &str) -> Result<&'static mut T, (FlStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads an embedding file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_dataset` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_dataset_load(
    path: *const c_char,
    out_dataset: *mut *mut FlDataset,
) -> FlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out(out_dataset, "out_dataset")?;
        let data = load_embedding_file(Path::new(path)).map_err(lib)?;
        *slot = Box::into_raw(Box::new(FlDataset(data)));
        Ok(())
    })
}

/// Generates a linear-Gaussian dataset whose first `k_known` concept columns
/// are known.
///
/// # Safety
/// `out_dataset` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_dataset_synthetic(
    n: usize,
    k: usize,
    k_known: usize,
    r: usize,
    sigma_a: f64,
    sigma_y: f64,
    alpha: f64,
    omega: f64,
    seed: u64,
    out_dataset: *mut *mut FlDataset,
) -> FlStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        let cfg = SyntheticConfig {
            n,
            k,
            k_known,
            r,
            sigma_a,
            sigma_y,
            alpha,
            omega,
            seed,
        };
        let data = generate_synthetic_dataset(&cfg).map_err(lib)?;
        *slot = Box::into_raw(Box::new(FlDataset(data.dataset)));
        Ok(())
    })
}

/// Writes a dataset as an embedding file.
///
/// # Safety
/// `dataset` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fl_dataset_write(
    dataset: *const FlDataset,
    path: *const c_char,
) -> FlStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let path = str_arg(path, "path")?;
        write_embedding_file(&d.0, Path::new(path)).map_err(lib)
    })
}

/// Number of rows, activation dimension and concept columns.
///
/// # Safety
/// `dataset` must come from this library; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn fl_dataset_shape(
    dataset: *const FlDataset,
    n: *mut usize,
    r: *mut usize,
    k: *mut usize,
) -> FlStatus {
    guard(|| {
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        for (p, v) in [(n, d.len()), (r, d.dim()), (k, d.n_concepts())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_dataset_free(dataset: *mut FlDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Global frustration of the `k_known x r` concept map `q` against the
/// `k_sae x r` dictionary `d`. `form` is an `r x r` quadratic form, or null
/// for the Euclidean geometry.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out_gamma` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_global_frustration(
    q: *const f64,
    k_known: usize,
    d: *const f64,
    k_sae: usize,
    form: *const f64,
    r: usize,
    out_gamma: *mut f64,
) -> FlStatus {
    guard(|| {
        let slot = out(out_gamma, "out_gamma")?;
        let q = matrix(q, k_known, r, "q")?;
        let d = matrix(d, k_sae, r, "d")?;
        let qf = if form.is_null() {
            QuadraticForm::euclidean(r)
        } else {
            QuadraticForm {
                kind: GeometryKind::FisherAveraged,
                matrix: matrix(form, r, r, "form")?,
                window: None,
                n_averaged: 0,
            }
        };
        let sims = similarity(&q, &d, &qf).map_err(lib)?;
        *slot = global_frustration(&sims).map_err(lib)?.gamma;
        Ok(())
    })
}

/// Closed-form Bayes accuracy of a concept-based classifier.
///
/// `b_known` is `k_known x k_known`, `b_temp` is `k_unknown x k_unknown`,
/// `psi_star` has `k_known + k_unknown` entries. Unknown concepts mediate
/// known pairs in the default cyclic assignment.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out_accuracy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_closed_form_accuracy(
    b_known: *const f64,
    k_known: usize,
    b_temp: *const f64,
    k_unknown: usize,
    alpha: f64,
    psi_star: *const f64,
    omega: f64,
    sigma_y: f64,
    out_accuracy: *mut f64,
) -> FlStatus {
    guard(|| {
        let slot = out(out_accuracy, "out_accuracy")?;
        let bk = matrix(b_known, k_known, k_known, "b_known")?;
        let bt = matrix(b_temp, k_unknown, k_unknown, "b_temp")?;
        let psi = slice(psi_star, k_known + k_unknown, "psi_star")?.to_vec();
        let assignment = pair_assignment(&bk, k_unknown).map_err(lib)?;
        let blocks = CovarianceBlocks::new(bk, bt, alpha, assignment).map_err(lib)?;
        let weights = TaskWeights::from_base(psi, k_known, omega);
        *slot = closed_form_accuracy(&blocks, &weights, sigma_y)
            .map_err(lib)?
            .acc_closed;
        Ok(())
    })
}

/// Paired Wilcoxon signed-rank test of `a - b` with a 95% Hodges-Lehmann
/// interval.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; `out_result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_wilcoxon_paired(
    a: *const f64,
    b: *const f64,
    n: usize,
    out_result: *mut FlTestResult,
) -> FlStatus {
    guard(|| {
        let slot = out(out_result, "out_result")?;
        let sample = PairedSample::from_pairs(slice(a, n, "a")?, slice(b, n, "b")?).map_err(lib)?;
        let t = wilcoxon_signed_rank(&sample).map_err(lib)?;
        *slot = FlTestResult {
            n_eff: t.n_eff,
            statistic: t.statistic,
            p_two_sided: t.p_two_sided,
            hl_estimate: t.hl_estimate,
            ci_low: t.ci_low,
            ci_high: t.ci_high,
            exact: (t.method == TestMethod::Exact) as i32,
        };
        Ok(())
    })
}

/// Creates a configuration from a preset name (`paper` or `quick`).
///
/// # Safety
/// `preset` must be NUL-terminated and `out_config` valid.
#[no_mangle]
pub unsafe extern "C" fn fl_config_new(
    preset: *const c_char,
    out_config: *mut *mut FlConfig,
) -> FlStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let preset = Preset::parse(str_arg(preset, "preset")?).map_err(lib)?;
        *slot = Box::into_raw(Box::new(FlConfig(ExperimentConfig::preset(preset))));
        Ok(())
    })
}

/// Applies one `section.key=value` override, e.g. `globe.reps=3`.
///
/// # Safety
/// `config` must come from this library and `assignment` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fl_config_set(
    config: *mut FlConfig,
    assignment: *const c_char,
) -> FlStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let item = str_arg(assignment, "assignment")?.to_string();
        cfg.0 = cfg.0.with_overrides(&[item]).map_err(lib)?;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_config_free(config: *mut FlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs a suite (`globe`, `synthetic`, `realworld`, `fisher-window` or
/// `theory-check`) and writes its output files into `out_dir`. `realworld`
/// needs `realworld.input` to be set. Returns `NullRows` when the suite
/// completed with failed rows.
///
/// # Safety
/// `config` must come from this library; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fl_run_suite(
    config: *const FlConfig,
    suite: *const c_char,
    out_dir: *const c_char,
) -> FlStatus {
    let mut null_rows = 0;
    let status = guard(|| {
        let cfg = &config.as_ref().ok_or_else(|| null("config"))?.0;
        let dir = str_arg(out_dir, "out_dir")?;
        let output = match str_arg(suite, "suite")? {
            "globe" => run_globe(cfg),
            "synthetic" => run_synthetic(cfg),
            "fisher-window" => run_fisher_window(cfg),
            "theory-check" => run_theory_check(cfg),
            "realworld" => {
                let path = cfg.realworld.input.as_ref().ok_or_else(|| {
                    (
                        FlStatus::Config,
                        "realworld.input must name an embedding file".to_string(),
                    )
                })?;
                load_embedding_file(path).and_then(|data| run_realworld(cfg, &data))
            }
            other => {
                return Err((
                    FlStatus::InvalidArgument,
                    format!("unknown suite `{other}`"),
                ))
            }
        }
        .map_err(lib)?;
        output.write_to(Path::new(dir)).map_err(lib)?;
        null_rows = output.null_rows();
        Ok(())
    });
    if status == FlStatus::Ok && null_rows > 0 {
        set_error(format!("{null_rows} rows failed"));
        return FlStatus::NullRows;
    }
    status
}
