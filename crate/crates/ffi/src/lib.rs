//! C ABI over `htr-core`: load a model, run it on a grayscale line image,
//! decode confidence matrices against a dictionary and compute error rates.
//!
//! Conventions:
//! - every fallible function returns an [`HtrStatus`]; on failure a message
//!   is available from [`htr_last_error`] on the same thread;
//! - objects are opaque handles released with their `_free` function;
//!   passing null to a `_free` function is a no-op;
//! - strings are UTF-8 and NUL-terminated; strings returned by the library
//!   are released with [`htr_string_free`];
//! - no function unwinds into the caller: a panic becomes
//!   [`HtrStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use htr_core::cli::{load_matrix, load_model, save_matrix};
use htr_core::decoder::{decode_line, scoring_tokenize, score, DecoderConfig, Dictionary};
use htr_core::evaluation::EvalReport;
use htr_core::imaging::{preprocess, LINE_HEIGHT};
use htr_core::netcore::{Network, NetworkParams};
use htr_core::pageio::{parse_alphabet, read_alphabet};
use htr_core::{Alphabet, ConfidenceMatrix, GrayImage, HtrError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtrStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed argument: bad UTF-8, bad dimensions, unknown characters.
    InvalidArgument = 2,
    /// Sizes that do not fit together, such as a model and an alphabet.
    Shape = 3,
    /// Out-of-range parameter such as a negative alpha.
    Config = 4,
    /// The matrix is too short for the requested text.
    Infeasible = 5,
    /// Malformed text file.
    Parse = 6,
    /// Malformed binary container.
    Format = 7,
    /// File could not be read or written.
    Io = 8,
    /// A rate over an empty reference.
    UndefinedMetric = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &HtrError) -> HtrStatus {
    match err {
        HtrError::Bounds(_) | HtrError::InvalidInput(_) | HtrError::BlankLine => HtrStatus::InvalidArgument,
        HtrError::Shape(_) => HtrStatus::Shape,
        HtrError::Config(_) => HtrStatus::Config,
        HtrError::InfeasibleTarget { .. } => HtrStatus::Infeasible,
        HtrError::Parse { .. } => HtrStatus::Parse,
        HtrError::Format(_) => HtrStatus::Format,
        HtrError::Io { .. } | HtrError::Image { .. } => HtrStatus::Io,
        HtrError::UndefinedMetric(_) => HtrStatus::UndefinedMetric,
    }
}

/// Failure carried out of a guarded body.
enum Fail {
    Null(&'static str),
    Core(HtrError),
}

impl From<HtrError> for Fail {
    fn from(e: HtrError) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> HtrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HtrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            HtrStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            HtrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    let s = CStr::from_ptr(deref(p, what)?);
    s.to_str()
        .map_err(|_| Fail::Core(HtrError::InvalidInput(format!("{what} is not UTF-8"))))
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, what: &'static str) -> Result<Vec<&'a str>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let ptrs = std::slice::from_raw_parts(deref(p, what)?, n);
    ptrs.iter().map(|&s| str_arg(s, what)).collect()
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail::Core(HtrError::InvalidInput("result contains a NUL character".into())))
}

/// Message of the last failure on this thread, or null if there was none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn htr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library.
#[no_mangle]
pub unsafe extern "C" fn htr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// A trained network with its weights.
pub struct HtrModel {
    net: Network,
    params: NetworkParams,
}

/// Per-timestep class probabilities.
pub struct HtrMatrix {
    matrix: ConfidenceMatrix,
}

/// A word list together with the alphabet it is encoded in.
pub struct HtrDictionary {
    dict: Dictionary,
}

fn boxed<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Loads a model container.
#[no_mangle]
pub unsafe extern "C" fn htr_model_load(path: *const c_char, out: *mut *mut HtrModel) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (net, params) = load_model(Path::new(str_arg(path, "path")?))?;
        boxed(out, HtrModel { net, params });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htr_model_free(model: *mut HtrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of output classes, or 0 for a null model.
#[no_mangle]
pub unsafe extern "C" fn htr_model_classes(model: *const HtrModel) -> usize {
    model.as_ref().map_or(0, |m| m.net.classes())
}

/// Runs the model on a row-major 8-bit grayscale line image (0 ink, 255
/// background). Images that are not 64 rows high are preprocessed first.
#[no_mangle]
pub unsafe extern "C" fn htr_model_forward(
    model: *const HtrModel,
    pixels: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut HtrMatrix,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = deref(model, "model")?;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| HtrError::InvalidInput("image dimensions overflow".into()))?;
        let pixels = if n == 0 { &[][..] } else { std::slice::from_raw_parts(deref(pixels, "pixels")?, n) };
        let mut img = GrayImage::from_pixels(width, height, pixels.to_vec())?;
        if img.height() != LINE_HEIGHT {
            img = preprocess(&img)?;
        }
        let matrix = model.net.forward(&img, &model.params)?;
        boxed(out, HtrMatrix { matrix });
        Ok(())
    })
}

/// Wraps `timesteps * classes` row-major probabilities; every row must sum
/// to one.
#[no_mangle]
pub unsafe extern "C" fn htr_matrix_new(
    timesteps: usize,
    classes: usize,
    data: *const f64,
    out: *mut *mut HtrMatrix,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = timesteps
            .checked_mul(classes)
            .ok_or_else(|| HtrError::InvalidInput("matrix dimensions overflow".into()))?;
        let values = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(deref(data, "data")?, n).to_vec() };
        let matrix = ConfidenceMatrix::new(timesteps, classes, values)?;
        boxed(out, HtrMatrix { matrix });
        Ok(())
    })
}

/// Reads a matrix container as written by `htr recognize --dump-matrices`.
#[no_mangle]
pub unsafe extern "C" fn htr_matrix_load(path: *const c_char, out: *mut *mut HtrMatrix) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let matrix = load_matrix(Path::new(str_arg(path, "path")?))?;
        boxed(out, HtrMatrix { matrix });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htr_matrix_save(matrix: *const HtrMatrix, path: *const c_char) -> HtrStatus {
    guard(|| {
        let m = deref(matrix, "matrix")?;
        save_matrix(Path::new(str_arg(path, "path")?), &m.matrix)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htr_matrix_free(matrix: *mut HtrMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Number of rows, or 0 for a null matrix.
#[no_mangle]
pub unsafe extern "C" fn htr_matrix_timesteps(matrix: *const HtrMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.matrix.timesteps())
}

/// Number of columns, or 0 for a null matrix.
#[no_mangle]
pub unsafe extern "C" fn htr_matrix_classes(matrix: *const HtrMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.matrix.classes())
}

/// Row-major probabilities owned by the matrix; null for a null matrix.
#[no_mangle]
pub unsafe extern "C" fn htr_matrix_data(matrix: *const HtrMatrix) -> *const f64 {
    matrix.as_ref().map_or(ptr::null(), |m| m.matrix.data().as_ptr())
}

/// Loads a dictionary (one word per line) in the alphabet of an alphabet
/// file. Words with characters outside the alphabet are skipped.
#[no_mangle]
pub unsafe extern "C" fn htr_dictionary_load(
    dict_path: *const c_char,
    alphabet_path: *const c_char,
    out: *mut *mut HtrDictionary,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let alphabet = read_alphabet(Path::new(str_arg(alphabet_path, "alphabet_path")?))?;
        let dict = Dictionary::load(Path::new(str_arg(dict_path, "dict_path")?), &alphabet)?;
        boxed(out, HtrDictionary { dict });
        Ok(())
    })
}

/// Builds a dictionary from `n_words` strings. `alphabet` holds one symbol
/// per line, the garbage symbol first, as in an alphabet file. An empty
/// word list is allowed and makes decoding fall back to best path.
#[no_mangle]
pub unsafe extern "C" fn htr_dictionary_from_words(
    alphabet: *const c_char,
    words: *const *const c_char,
    n_words: usize,
    out: *mut *mut HtrDictionary,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let alphabet: Alphabet = parse_alphabet(str_arg(alphabet, "alphabet")?)?;
        let words = str_array(words, n_words, "words")?;
        boxed(out, HtrDictionary { dict: Dictionary::from_words(&alphabet, words) });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htr_dictionary_free(dict: *mut HtrDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Number of distinct words, or 0 for a null dictionary.
#[no_mangle]
pub unsafe extern "C" fn htr_dictionary_len(dict: *const HtrDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dict.len())
}

/// Number of alphabet classes, or 0 for a null dictionary.
#[no_mangle]
pub unsafe extern "C" fn htr_dictionary_classes(dict: *const HtrDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dict.alphabet().len())
}

/// Decodes a line with the default decoder settings and the given length
/// penalty. With `tokenize` nonzero, punctuation is split off as in the
/// scoring normalization. The result is released with [`htr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn htr_decode_line(
    matrix: *const HtrMatrix,
    dict: *const HtrDictionary,
    alpha: f64,
    tokenize: i32,
    out: *mut *mut c_char,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (m, d) = (deref(matrix, "matrix")?, deref(dict, "dict")?);
        let config = DecoderConfig::with_alpha(alpha);
        config.validate()?;
        let text = decode_line(&m.matrix, &d.dict, &config)?;
        *out = into_c_string(if tokenize != 0 { scoring_tokenize(&text) } else { text })?;
        Ok(())
    })
}

/// `-ln p(text | matrix) + alpha * |text|` in the dictionary's alphabet;
/// `+inf` when the matrix is too short for the text.
#[no_mangle]
pub unsafe extern "C" fn htr_score(
    text: *const c_char,
    matrix: *const HtrMatrix,
    dict: *const HtrDictionary,
    alpha: f64,
    out: *mut f64,
) -> HtrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (m, d) = (deref(matrix, "matrix")?, deref(dict, "dict")?);
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(HtrError::Config(format!("alpha must be finite and nonnegative, got {alpha}")).into());
        }
        *out = score(str_arg(text, "text")?, &m.matrix, d.dict.alphabet(), alpha)?;
        Ok(())
    })
}

/// Corpus word and character error rates in percent over `n` aligned lines.
#[no_mangle]
pub unsafe extern "C" fn htr_error_rates(
    refs: *const *const c_char,
    hyps: *const *const c_char,
    n: usize,
    wer: *mut f64,
    cer: *mut f64,
) -> HtrStatus {
    guard(|| {
        let (wer, cer) = (out_ptr(wer, "wer")?, out_ptr(cer, "cer")?);
        let (r, h) = (str_array(refs, n, "refs")?, str_array(hyps, n, "hyps")?);
        let report = EvalReport::new(&r, &h)?;
        *wer = report.words.percent()?;
        *cer = report.chars.percent()?;
        Ok(())
    })
}
