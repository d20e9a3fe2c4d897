//! C ABI over the `ledsna` library.
//!
//! Objects are opaque handles created by `ledsna_*_new`/`from` functions and
//! released with the matching `_free`. Fallible calls return a
//! [`LedsnaStatus`] and write their result through an out pointer; the
//! message of the last failure on the calling thread is available from
//! [`ledsna_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use ledsna::blackbox::{BlackBox, BlackBoxSpec, Probe};
use ledsna::image::RgbImage;
use ledsna::instance::{Instance, InterpretableSpace, Payload};
use ledsna::metrics;
use ledsna::sampling::Metric;
use ledsna::sampling::{group_tokens, WindowGrouper};
use ledsna::segmentation::{grid_segment, slic_segment, SegmentMap, SlicParams};
use ledsna::surrogate::{explain, ExplainConfig, Explanation, KernelSpec, SurrogateKind};
use ledsna::{BlackBoxError, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedsnaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    InvalidGroups = 3,
    Parse = 4,
    BlackBox = 5,
    NotConverged = 6,
    Singular = 7,
    Io = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn status_of(err: &Error) -> LedsnaStatus {
    match err {
        Error::Contract(_) => LedsnaStatus::InvalidArgument,
        Error::InvalidGroups(_) => LedsnaStatus::InvalidGroups,
        Error::Parse(_) | Error::Json(_) => LedsnaStatus::Parse,
        Error::BlackBox(_) => LedsnaStatus::BlackBox,
        Error::NotConverged { .. } => LedsnaStatus::NotConverged,
        Error::Singular => LedsnaStatus::Singular,
        Error::Io(_) => LedsnaStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LedsnaStatus, String)>) -> LedsnaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LedsnaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LedsnaStatus::Panic
        }
    }
}

fn lib(err: Error) -> (LedsnaStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (LedsnaStatus, String) {
    (LedsnaStatus::NullArgument, format!("{name} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, name: &str) -> Result<&'a str, (LedsnaStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LedsnaStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ledsna_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ledsna_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- images

pub struct LedsnaImage {
    inner: RgbImage,
}

/// Decodes a binary PPM (P6, maxval 255).
#[no_mangle]
pub unsafe extern "C" fn ledsna_image_from_ppm(
    data: *const u8,
    len: usize,
    out: *mut *mut LedsnaImage,
) -> LedsnaStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return Err(null("data/out"));
        }
        let inner = RgbImage::from_ppm(slice::from_raw_parts(data, len)).map_err(lib)?;
        put(out, LedsnaImage { inner });
        Ok(())
    })
}

/// Copies `width * height * 3` interleaved RGB bytes.
#[no_mangle]
pub unsafe extern "C" fn ledsna_image_from_rgb(
    width: usize,
    height: usize,
    rgb: *const u8,
    out: *mut *mut LedsnaImage,
) -> LedsnaStatus {
    guard(|| {
        if rgb.is_null() || out.is_null() {
            return Err(null("rgb/out"));
        }
        let n = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .ok_or((LedsnaStatus::InvalidArgument, "image too large".to_string()))?;
        let inner = RgbImage::new(width, height, slice::from_raw_parts(rgb, n).to_vec()).map_err(lib)?;
        put(out, LedsnaImage { inner });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_image_free(image: *mut LedsnaImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

// ---------------------------------------------------------- segmentation

pub struct LedsnaSegmentation {
    inner: Arc<SegmentMap>,
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_segment_grid(
    image: *const LedsnaImage,
    rows: usize,
    cols: usize,
    out: *mut *mut LedsnaSegmentation,
) -> LedsnaStatus {
    guard(|| {
        let (Some(image), false) = (image.as_ref(), out.is_null()) else {
            return Err(null("image/out"));
        };
        let map = grid_segment(&image.inner, rows, cols).map_err(lib)?;
        put(out, LedsnaSegmentation { inner: Arc::new(map) });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_segment_slic(
    image: *const LedsnaImage,
    k: usize,
    compactness: f64,
    iterations: usize,
    out: *mut *mut LedsnaSegmentation,
) -> LedsnaStatus {
    guard(|| {
        let (Some(image), false) = (image.as_ref(), out.is_null()) else {
            return Err(null("image/out"));
        };
        let params = SlicParams {
            k,
            compactness,
            iterations,
        };
        let map = slic_segment(&image.inner, params).map_err(lib)?;
        put(out, LedsnaSegmentation { inner: Arc::new(map) });
        Ok(())
    })
}

/// Number of segments, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ledsna_segmentation_count(seg: *const LedsnaSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.inner.n_segments())
}

/// Copies the per-pixel segment labels (row-major) into `out`, which must
/// hold `width * height` entries. Returns the number of pixels, or 0 if
/// `cap` is too small.
#[no_mangle]
pub unsafe extern "C" fn ledsna_segmentation_labels(
    seg: *const LedsnaSegmentation,
    out: *mut u32,
    cap: usize,
) -> usize {
    let Some(seg) = seg.as_ref() else { return 0 };
    let labels = seg.inner.labels();
    if out.is_null() || cap < labels.len() {
        return 0;
    }
    slice::from_raw_parts_mut(out, labels.len()).copy_from_slice(labels);
    labels.len()
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_segmentation_free(seg: *mut LedsnaSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

// ------------------------------------------------------------ black boxes

/// One input handed to a callback black box. Image probes carry `rgb`
/// (`width * height * 3` bytes); text probes carry `tokens`. `mask` is the
/// interpretable mask the probe was recovered from, or null.
#[repr(C)]
pub struct LedsnaProbe {
    pub mask: *const u8,
    pub mask_len: usize,
    pub rgb: *const u8,
    pub width: usize,
    pub height: usize,
    pub tokens: *const *const c_char,
    pub n_tokens: usize,
}

/// Writes one probability per probe into `out` and returns 0, or returns
/// non-zero on failure. Calls are never concurrent.
pub type LedsnaPredictFn =
    Option<unsafe extern "C" fn(user_data: *mut c_void, probes: *const LedsnaProbe, n: usize, out: *mut f64) -> c_int>;

struct Callback {
    f: unsafe extern "C" fn(*mut c_void, *const LedsnaProbe, usize, *mut f64) -> c_int,
    user_data: *mut c_void,
}

// SAFETY: the callback is only invoked from one thread at a time
// (max_parallelism = 1); the caller guarantees user_data may be used from
// any thread.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl BlackBox for Callback {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        let token_strings: Vec<Vec<CString>> = batch
            .iter()
            .map(|p| match p.instance.payload() {
                Payload::Text(t) => t
                    .iter()
                    .map(|s| CString::new(s.replace('\0', " ")).expect("nul removed"))
                    .collect(),
                Payload::Image(_) => Vec::new(),
            })
            .collect();
        let token_ptrs: Vec<Vec<*const c_char>> = token_strings
            .iter()
            .map(|v| v.iter().map(|s| s.as_ptr()).collect())
            .collect();
        let probes: Vec<LedsnaProbe> = batch
            .iter()
            .zip(&token_ptrs)
            .map(|(p, toks)| {
                let (mask, mask_len) = p.mask.map_or((ptr::null(), 0), |m| (m.bits().as_ptr(), m.len()));
                let (rgb, width, height) = match p.instance.payload() {
                    Payload::Image(img) => (img.as_bytes().as_ptr(), img.width(), img.height()),
                    Payload::Text(_) => (ptr::null(), 0, 0),
                };
                LedsnaProbe {
                    mask,
                    mask_len,
                    rgb,
                    width,
                    height,
                    tokens: if toks.is_empty() { ptr::null() } else { toks.as_ptr() },
                    n_tokens: toks.len(),
                }
            })
            .collect();
        let mut out = vec![f64::NAN; batch.len()];
        // SAFETY: probes and out stay alive for the call; the callback was
        // supplied with this contract.
        let rc = unsafe { (self.f)(self.user_data, probes.as_ptr(), probes.len(), out.as_mut_ptr()) };
        if rc != 0 {
            return Err(BlackBoxError::Transport {
                batch: 0,
                message: format!("callback returned {rc}"),
            });
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        "c-callback".into()
    }
}

pub struct LedsnaBlackBox {
    spec: Option<BlackBoxSpec>,
    retries: usize,
    callback: Option<Arc<Callback>>,
}

/// Black box from a spec string (`builtin:...`, `subprocess:...`,
/// `http:...`). Built-ins sized by the interpretable dimension are
/// instantiated per explanation.
#[no_mangle]
pub unsafe extern "C" fn ledsna_blackbox_from_spec(
    spec: *const c_char,
    retries: usize,
    out: *mut *mut LedsnaBlackBox,
) -> LedsnaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: BlackBoxSpec = cstr(spec, "spec")?.parse().map_err(lib)?;
        put(
            out,
            LedsnaBlackBox {
                spec: Some(spec),
                retries,
                callback: None,
            },
        );
        Ok(())
    })
}

/// Black box backed by a C function.
#[no_mangle]
pub unsafe extern "C" fn ledsna_blackbox_from_callback(
    predict: LedsnaPredictFn,
    user_data: *mut c_void,
    out: *mut *mut LedsnaBlackBox,
) -> LedsnaStatus {
    guard(|| {
        let (Some(f), false) = (predict, out.is_null()) else {
            return Err(null("predict/out"));
        };
        put(
            out,
            LedsnaBlackBox {
                spec: None,
                retries: 0,
                callback: Some(Arc::new(Callback { f, user_data })),
            },
        );
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_blackbox_free(bb: *mut LedsnaBlackBox) {
    if !bb.is_null() {
        drop(Box::from_raw(bb));
    }
}

impl LedsnaBlackBox {
    fn with_adapter<T>(&self, d_prime: usize, f: impl FnOnce(&dyn BlackBox) -> Result<T, Error>) -> Result<T, Error> {
        match (&self.callback, &self.spec) {
            (Some(cb), _) => f(cb.as_ref()),
            (None, Some(spec)) => {
                let adapter = spec.build(d_prime, 0, self.retries)?;
                f(adapter.as_ref())
            }
            (None, None) => unreachable!("constructed with a spec or a callback"),
        }
    }
}

// ----------------------------------------------------------------- config

pub const LEDSNA_SURROGATE_SVR: c_int = 0;
pub const LEDSNA_SURROGATE_RIDGE: c_int = 1;
pub const LEDSNA_KERNEL_GAUSSIAN: c_int = 0;
pub const LEDSNA_KERNEL_LINEAR: c_int = 1;
pub const LEDSNA_METRIC_DEFAULT: c_int = -1;
pub const LEDSNA_METRIC_COSINE: c_int = 0;
pub const LEDSNA_METRIC_L2: c_int = 1;

/// Explanation settings. `gamma <= 0` and `sigma <= 0` select the
/// defaults that depend on the interpretable dimension.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LedsnaConfig {
    pub surrogate: c_int,
    pub kernel: c_int,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub n_samples: usize,
    pub sigma: f64,
    pub metric: c_int,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub batch_size: usize,
    pub parallelism: usize,
}

#[no_mangle]
pub extern "C" fn ledsna_config_default() -> LedsnaConfig {
    let d = ExplainConfig::default();
    LedsnaConfig {
        surrogate: LEDSNA_SURROGATE_SVR,
        kernel: LEDSNA_KERNEL_GAUSSIAN,
        gamma: 0.0,
        c: d.c,
        epsilon: d.epsilon,
        lambda: d.lambda,
        n_samples: d.n_samples,
        sigma: 0.0,
        metric: LEDSNA_METRIC_DEFAULT,
        k: d.k,
        seed: d.seed,
        tol: d.tol,
        batch_size: d.batch_size,
        parallelism: d.parallelism,
    }
}

fn to_config(c: &LedsnaConfig) -> Result<ExplainConfig, (LedsnaStatus, String)> {
    let bad = |m: &str| (LedsnaStatus::InvalidArgument, m.to_string());
    let surrogate = match c.surrogate {
        LEDSNA_SURROGATE_SVR => SurrogateKind::Svr,
        LEDSNA_SURROGATE_RIDGE => SurrogateKind::Ridge,
        _ => return Err(bad("unknown surrogate")),
    };
    let kernel = match (c.kernel, c.gamma > 0.0) {
        (LEDSNA_KERNEL_GAUSSIAN, true) => Some(KernelSpec::Gaussian { gamma: c.gamma }),
        (LEDSNA_KERNEL_GAUSSIAN, false) => None,
        (LEDSNA_KERNEL_LINEAR, _) => Some(KernelSpec::Linear),
        _ => return Err(bad("unknown kernel")),
    };
    let metric = match c.metric {
        LEDSNA_METRIC_DEFAULT => None,
        LEDSNA_METRIC_COSINE => Some(Metric::Cosine),
        LEDSNA_METRIC_L2 => Some(Metric::L2),
        _ => return Err(bad("unknown metric")),
    };
    Ok(ExplainConfig {
        surrogate,
        kernel,
        c: c.c,
        epsilon: c.epsilon,
        lambda: c.lambda,
        n_samples: c.n_samples,
        sigma: (c.sigma > 0.0).then_some(c.sigma),
        metric,
        k: c.k,
        seed: c.seed,
        tol: c.tol,
        batch_size: c.batch_size,
        parallelism: c.parallelism.max(1),
        ..ExplainConfig::default()
    })
}

// ----------------------------------------------------------- explanations

pub struct LedsnaExplanation {
    inner: Explanation,
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explain_image(
    image: *const LedsnaImage,
    segmentation: *const LedsnaSegmentation,
    blackbox: *const LedsnaBlackBox,
    config: *const LedsnaConfig,
    out: *mut *mut LedsnaExplanation,
) -> LedsnaStatus {
    guard(|| {
        let (Some(image), Some(seg), Some(bb), Some(cfg), false) = (
            image.as_ref(),
            segmentation.as_ref(),
            blackbox.as_ref(),
            config.as_ref(),
            out.is_null(),
        ) else {
            return Err(null("image/segmentation/blackbox/config/out"));
        };
        let config = to_config(cfg)?;
        let instance = Instance::image("image", image.inner.clone());
        let space = InterpretableSpace::ImageSegments(seg.inner.clone());
        let inner = bb
            .with_adapter(space.d_prime(), |adapter| explain(&instance, &space, adapter, &config))
            .map_err(lib)?;
        put(out, LedsnaExplanation { inner });
        Ok(())
    })
}

/// Explains a whitespace-tokenized UTF-8 text, grouping consecutive runs
/// of `window` tokens (1 for single tokens).
#[no_mangle]
pub unsafe extern "C" fn ledsna_explain_text(
    text: *const c_char,
    window: usize,
    blackbox: *const LedsnaBlackBox,
    config: *const LedsnaConfig,
    out: *mut *mut LedsnaExplanation,
) -> LedsnaStatus {
    guard(|| {
        let (Some(bb), Some(cfg), false) = (blackbox.as_ref(), config.as_ref(), out.is_null()) else {
            return Err(null("blackbox/config/out"));
        };
        let text = cstr(text, "text")?;
        let config = to_config(cfg)?;
        let instance = Instance::from_text("text", text).map_err(lib)?;
        let groups = group_tokens(&instance, &WindowGrouper { window }).map_err(lib)?;
        let space = InterpretableSpace::TextGroups(groups);
        let inner = bb
            .with_adapter(space.d_prime(), |adapter| explain(&instance, &space, adapter, &config))
            .map_err(lib)?;
        put(out, LedsnaExplanation { inner });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_n_features(e: *const LedsnaExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.inner.attributions.len())
}

/// Copies up to `cap` attributions; returns the number copied.
#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_attributions(
    e: *const LedsnaExplanation,
    out: *mut f64,
    cap: usize,
) -> usize {
    let (Some(e), false) = (e.as_ref(), out.is_null()) else {
        return 0;
    };
    let n = e.inner.attributions.len().min(cap);
    slice::from_raw_parts_mut(out, n).copy_from_slice(&e.inner.attributions[..n]);
    n
}

/// Copies up to `cap` top-K feature indices; returns the number copied.
#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_top_k(e: *const LedsnaExplanation, out: *mut usize, cap: usize) -> usize {
    let (Some(e), false) = (e.as_ref(), out.is_null()) else {
        return 0;
    };
    let n = e.inner.top_k.len().min(cap);
    slice::from_raw_parts_mut(out, n).copy_from_slice(&e.inner.top_k[..n]);
    n
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_err(e: *const LedsnaExplanation) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.inner.err)
}

/// NaN when undefined (constant labels, inexact fit).
#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_r_squared(e: *const LedsnaExplanation) -> f64 {
    e.as_ref().and_then(|e| e.inner.r_squared).unwrap_or(f64::NAN)
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_g_at_x(e: *const LedsnaExplanation) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.inner.g_at_x)
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_f_at_x(e: *const LedsnaExplanation) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.inner.f_at_x)
}

/// The explanation as JSON; free with [`ledsna_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_to_json(e: *const LedsnaExplanation) -> *mut c_char {
    let Some(e) = e.as_ref() else { return ptr::null_mut() };
    CString::new(e.inner.to_json()).map_or(ptr::null_mut(), CString::into_raw)
}

#[no_mangle]
pub unsafe extern "C" fn ledsna_explanation_free(e: *mut LedsnaExplanation) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

// ---------------------------------------------------------------- metrics

#[no_mangle]
pub extern "C" fn ledsna_approx_error(f_x0: f64, g_x0: f64) -> f64 {
    metrics::approx_error(f_x0, g_x0)
}

/// R² of `n` predictions against labels. Writes NaN when undefined.
#[no_mangle]
pub unsafe extern "C" fn ledsna_r_squared(
    labels: *const f64,
    predictions: *const f64,
    n: usize,
    out: *mut f64,
) -> LedsnaStatus {
    guard(|| {
        if labels.is_null() || predictions.is_null() || out.is_null() {
            return Err(null("labels/predictions/out"));
        }
        let report =
            metrics::r_squared(slice::from_raw_parts(labels, n), slice::from_raw_parts(predictions, n)).map_err(lib)?;
        *out = if report.defined { report.r_squared } else { f64::NAN };
        Ok(())
    })
}
