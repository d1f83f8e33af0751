//! C ABI for the first-photon classification simulator.
//!
//! Every function returns an [`FpStatus`]; on failure the message is kept per
//! thread and read with [`fp_last_error_message`]. Datasets are opaque
//! handles released with [`fp_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use first_photon::cc::{self, IndexPixelSet};
use first_photon::dataset::{self, Dataset, NUM_LABELS};
use first_photon::optics::{fit_geometry, gaussian_beam, hermite, FieldGrid, GridGeometry};
use first_photon::qc::{self, ModeSet, PhotonScheduleConfig};
use first_photon::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    NoDetection = 5,
    Panic = 6,
}

/// Opaque set of labelled binary patterns.
pub struct FpDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::Io { .. } => FpStatus::Io,
        Error::NoDetection => FpStatus::NoDetection,
        e if e.is_config_error() => FpStatus::InvalidArgument,
        _ => FpStatus::Data,
    }
}

struct Fail(FpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FpStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FpStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn dataset_arg<'a>(d: *const FpDataset) -> Result<&'a Dataset, Fail> {
    d.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_square(out: *mut f64, rows: &[[f64; NUM_LABELS]; NUM_LABELS]) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out_rows"));
    }
    let dst = std::slice::from_raw_parts_mut(out, NUM_LABELS * NUM_LABELS);
    for (j, row) in rows.iter().enumerate() {
        dst[j * NUM_LABELS..(j + 1) * NUM_LABELS].copy_from_slice(row);
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads IDX image/label files (gzip detected) and keeps the first
/// `per_label` patterns of each digit, binarized at `threshold`.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_load_idx(
    images: *const c_char,
    labels: *const c_char,
    per_label: u32,
    threshold: u8,
    out: *mut *mut FpDataset,
) -> FpStatus {
    guard(|| {
        let (images, labels) = (path_arg(images, "images")?, path_arg(labels, "labels")?);
        let raw = dataset::load_idx(&images, &labels, false)?;
        let ds = dataset::select_subset(&raw, per_label as usize, threshold)?;
        write_out(out, Box::into_raw(Box::new(FpDataset { inner: ds })), "out")
    })
}

/// Loads a dataset manifest written by the `ingest` command.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_load_json(path: *const c_char, out: *mut *mut FpDataset) -> FpStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
        let ds = dataset::dataset_from_json(&text)?;
        write_out(out, Box::into_raw(Box::new(FpDataset { inner: ds })), "out")
    })
}

/// # Safety
/// `dataset` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_free(dataset: *mut FpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_len(dataset: *const FpDataset, out: *mut usize) -> FpStatus {
    guard(|| write_out(out, dataset_arg(dataset)?.len(), "out"))
}

/// Label and on-pixel count of pattern `index`.
///
/// # Safety
/// `dataset` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_dataset_pattern(
    dataset: *const FpDataset,
    index: usize,
    out_label: *mut u8,
    out_on_pixels: *mut u32,
) -> FpStatus {
    guard(|| {
        let ds = dataset_arg(dataset)?;
        let p = ds
            .patterns()
            .get(index)
            .ok_or_else(|| Fail(FpStatus::InvalidArgument, format!("index {index} out of range")))?;
        write_out(out_label, p.label, "out_label")?;
        write_out(out_on_pixels, p.mask.count_on() as u32, "out_on_pixels")
    })
}

/// Analytic mode-classifier confusion matrix.
///
/// `orders` holds 20 values `m0, n0, m1, n1, …` for labels 0–9. The grid is
/// padded automatically to hold every mode. `out_rows` receives 100 values,
/// row-major by true label.
///
/// # Safety
/// `orders` must hold 20 values, `out_rows` 100; `out_fidelity` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_qc_confusion(
    dataset: *const FpDataset,
    orders: *const u32,
    beam_waist: f64,
    mode_waist: f64,
    supersample: u32,
    out_rows: *mut f64,
    out_fidelity: *mut f64,
) -> FpStatus {
    guard(|| {
        let ds = dataset_arg(dataset)?;
        if orders.is_null() {
            return Err(null("orders"));
        }
        let o = std::slice::from_raw_parts(orders, 2 * NUM_LABELS);
        let pairs: [(u32, u32); NUM_LABELS] = std::array::from_fn(|k| (o[2 * k], o[2 * k + 1]));
        let set = ModeSet::from_orders(&pairs, mode_waist, [0.0, 0.0])?;
        let geometry = fit_geometry(set.entries(), &GridGeometry::pattern_window(supersample as usize)?)?;
        let beam = gaussian_beam(beam_waist, [0.0, 0.0], &geometry)?;
        let m = qc::qc_confusion(ds, &set, &beam)?;
        write_square(out_rows, &m.rows)?;
        write_out(out_fidelity, m.fidelity(), "out_fidelity")
    })
}

/// Index-pixel classifier confusion matrix. `pixels` holds 20 values
/// `row0, col0, row1, col1, …` (zero-based, row 0 at the top).
///
/// # Safety
/// `pixels` must hold 20 values, `out_rows` 100; `out_fidelity` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_cc_confusion(
    dataset: *const FpDataset,
    pixels: *const u32,
    out_rows: *mut f64,
    out_fidelity: *mut f64,
) -> FpStatus {
    guard(|| {
        let ds = dataset_arg(dataset)?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let p = std::slice::from_raw_parts(pixels, 2 * NUM_LABELS);
        let set = IndexPixelSet::new(std::array::from_fn(|k| (p[2 * k] as usize, p[2 * k + 1] as usize)))?;
        let m = cc::cc_confusion(ds, &set)?;
        write_square(out_rows, &m.rows)?;
        write_out(out_fidelity, m.fidelity(), "out_fidelity")
    })
}

/// Per-pixel MAP classifier fidelity under uniform illumination.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_map_threshold(dataset: *const FpDataset, out: *mut f64) -> FpStatus {
    guard(|| {
        let ds = dataset_arg(dataset)?;
        let beam = FieldGrid::uniform(GridGeometry::pattern_window(1)?)?;
        write_out(out, cc::map_threshold(ds, &beam)?, "out")
    })
}

/// Exact first-detection label distribution for cyclic display of ten
/// masks. `detect` holds per-display detection probabilities, `order` the
/// display order (a permutation of 0–9, or null for 0, 1, …, 9).
///
/// # Safety
/// `detect` and `out` must hold 10 values; `order` null or 10 values.
#[no_mangle]
pub unsafe extern "C" fn fp_first_photon_distribution(
    detect: *const f64,
    order: *const u32,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        if detect.is_null() {
            return Err(null("detect"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let d: [f64; NUM_LABELS] = std::slice::from_raw_parts(detect, NUM_LABELS)
            .try_into()
            .expect("length checked");
        let mut schedule = PhotonScheduleConfig::default();
        if !order.is_null() {
            let o = std::slice::from_raw_parts(order, NUM_LABELS);
            schedule.mask_order = std::array::from_fn(|k| o[k] as usize);
        }
        let p = qc::first_photon_distribution(&d, &schedule)?;
        std::slice::from_raw_parts_mut(out, NUM_LABELS).copy_from_slice(&p.0);
        Ok(())
    })
}

/// Physicists' Hermite polynomial `H_n(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_hermite(n: u32, x: f64, out: *mut f64) -> FpStatus {
    guard(|| write_out(out, hermite(n, x)?, "out"))
}
