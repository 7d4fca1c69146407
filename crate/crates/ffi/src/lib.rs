//! C ABI over the `mdcs` library.
//!
//! Every entry point returns an [`MdcsStatus`]; results come back through out
//! pointers. On failure, [`mdcs_last_error`] describes the most recent error
//! on the calling thread. Handles are opaque and must be released with their
//! matching `*_free` function. Strings returned by the library are released
//! with [`mdcs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mdcs::data::{shot_partition, LabeledDataset};
use mdcs::loss::{diversity_softmax, DistributionWeight};
use mdcs::net::{Checkpoint, MultiExpertModel};
use mdcs::runner::{evaluate, prepare_data, train, Format, TrainConfig};
use mdcs::Error;
use ndarray::{ArrayView1, ArrayView2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdcsStatus {
    Ok = 0,
    InvalidArgument = 1,
    Dimension = 2,
    Config = 3,
    Numeric = 4,
    Format = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Run configuration.
pub struct MdcsConfig(TrainConfig);
/// Labeled dataset.
pub struct MdcsDataset(LabeledDataset);
/// Trained multi-expert model, with its optimizer state if it came from
/// training or a checkpoint that stored one.
pub struct MdcsModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(MdcsStatus, String);

fn status_of(e: &Error) -> MdcsStatus {
    match e {
        Error::InvalidArgument(_) => MdcsStatus::InvalidArgument,
        Error::Dimension(_) => MdcsStatus::Dimension,
        Error::Config(_) => MdcsStatus::Config,
        Error::Numeric(_) => MdcsStatus::Numeric,
        Error::Format { .. } | Error::Csv(_) => MdcsStatus::Format,
        Error::Io(_) => MdcsStatus::Io,
        Error::Member { source, .. } => status_of(source),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MdcsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MdcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MdcsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MdcsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MdcsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn mdcs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mdcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_config_default(out: *mut *mut MdcsConfig) -> MdcsStatus {
    guard(|| put(out, MdcsConfig(TrainConfig::default())))
}

/// Parses flat `key = value` config text.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_config_parse(text: *const c_char, out: *mut *mut MdcsConfig) -> MdcsStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        put(out, MdcsConfig(TrainConfig::parse(text)?))
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_config_set_seed(cfg: *mut MdcsConfig, seed: u64) -> MdcsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Resolved config in canonical `key = value` form.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_config_echo(cfg: *const MdcsConfig, out: *mut *mut c_char) -> MdcsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "config")?;
        write_string(out, cfg.0.echo())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdcs_config_free(cfg: *mut MdcsConfig) {
    free(cfg)
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s)
        .map_err(|_| Failure(MdcsStatus::Format, "string contains nul".into()))?
        .into_raw();
    Ok(())
}

/// Loads a dataset CSV.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_load(path: *const c_char, out: *mut *mut MdcsDataset) -> MdcsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, MdcsDataset(LabeledDataset::load(path)?))
    })
}

/// # Safety
/// `ds` must be a live dataset handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_save(ds: *const MdcsDataset, path: *const c_char) -> MdcsStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        ds.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Builds the train and test sets a config describes.
///
/// # Safety
/// `cfg` must be a live config handle; `train` and `test` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_prepare(
    cfg: *const MdcsConfig,
    train_out: *mut *mut MdcsDataset,
    test_out: *mut *mut MdcsDataset,
) -> MdcsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "config")?;
        if train_out.is_null() || test_out.is_null() {
            return Err(null("output pointer"));
        }
        let data = prepare_data(&cfg.0)?;
        put(train_out, MdcsDataset(data.train))?;
        put(test_out, MdcsDataset(data.test))
    })
}

/// Number of instances; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_len(ds: *const MdcsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Feature dimension; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_dim(ds: *const MdcsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `ds` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdcs_dataset_free(ds: *mut MdcsDataset) {
    free(ds)
}

/// Trains a model on `train` with the given config.
///
/// # Safety
/// `cfg` and `train` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_train(
    cfg: *const MdcsConfig,
    train_set: *const MdcsDataset,
    out: *mut *mut MdcsModel,
) -> MdcsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "config")?;
        let data = ref_arg(train_set, "dataset")?;
        let outcome = train(&cfg.0, &data.0)?;
        put(out, MdcsModel(outcome.checkpoint))
    })
}

/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_load(path: *const c_char, out: *mut *mut MdcsModel) -> MdcsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, MdcsModel(Checkpoint::load(path)?))
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_save(model: *const MdcsModel, path: *const c_char) -> MdcsStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        model.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

fn model_of(m: &MdcsModel) -> &MultiExpertModel {
    &m.0.model
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_num_experts(model: *const MdcsModel) -> usize {
    model.as_ref().map_or(0, |m| model_of(m).num_experts())
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_num_classes(model: *const MdcsModel) -> usize {
    model.as_ref().map_or(0, |m| model_of(m).num_classes())
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_input_dim(model: *const MdcsModel) -> usize {
    model.as_ref().map_or(0, |m| model_of(m).input_dim())
}

/// Raw logits for `rows` row-major inputs of width `cols`. `out` receives
/// `experts * rows * classes` values laid out expert-major, then row, then
/// class; `out_len` must be exactly that.
///
/// # Safety
/// `inputs` must point to `rows * cols` doubles and `out` to `out_len`.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_predict(
    model: *const MdcsModel,
    inputs: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MdcsStatus {
    guard(|| {
        let model = model_of(ref_arg(model, "model")?);
        if inputs.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let need = model.num_experts() * rows * model.num_classes();
        if out_len != need {
            return Err(Failure(
                MdcsStatus::Dimension,
                format!("output buffer holds {out_len} values, need {need}"),
            ));
        }
        let x = std::slice::from_raw_parts(inputs, rows * cols);
        let x = ArrayView2::from_shape((rows, cols), x)
            .map_err(|e| Failure(MdcsStatus::Dimension, e.to_string()))?;
        let logits = model.predict(x)?;
        let out = std::slice::from_raw_parts_mut(out, out_len);
        for (chunk, l) in out.chunks_mut(rows * model.num_classes()).zip(&logits) {
            for (o, v) in chunk.iter_mut().zip(l.iter()) {
                *o = *v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdcs_model_free(model: *mut MdcsModel) {
    free(model)
}

/// Diversity softmax of one logit vector: `softmax(v / T + lambda * ln n)`.
///
/// # Safety
/// `logits` and `out` must point to `classes` doubles, `counts` to
/// `classes` counts.
#[no_mangle]
pub unsafe extern "C" fn mdcs_diversity_softmax(
    logits: *const f64,
    counts: *const usize,
    classes: usize,
    lambda: f64,
    temperature: f64,
    out: *mut f64,
) -> MdcsStatus {
    guard(|| {
        if logits.is_null() || counts.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let v = std::slice::from_raw_parts(logits, classes);
        let n = std::slice::from_raw_parts(counts, classes);
        let dw = DistributionWeight::new(lambda, n)?;
        let p = diversity_softmax(ArrayView1::from(v), &dw, temperature)?;
        std::slice::from_raw_parts_mut(out, classes).copy_from_slice(p.as_slice().expect("contiguous"));
        Ok(())
    })
}

/// Evaluates `model` on `test`, with shot groups taken from the class
/// counts of `train`, and returns the report as JSON.
///
/// # Safety
/// All handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdcs_evaluate_json(
    model: *const MdcsModel,
    cfg: *const MdcsConfig,
    train_set: *const MdcsDataset,
    test_set: *const MdcsDataset,
    out: *mut *mut c_char,
) -> MdcsStatus {
    guard(|| {
        let model = model_of(ref_arg(model, "model")?);
        let cfg = ref_arg(cfg, "config")?;
        let train_set = ref_arg(train_set, "train dataset")?;
        let test_set = ref_arg(test_set, "test dataset")?;
        let split = shot_partition(train_set.0.counts(), cfg.0.thresholds)?;
        let (report, _) = evaluate(model, &test_set.0, &split, &cfg.0)?;
        write_string(out, report.render(Format::Json))
    })
}
