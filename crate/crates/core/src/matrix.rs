//! The confidence matrix: per-timestep class probabilities produced by the
//! network and consumed by the CTC loss and the decoder.

use crate::error::{HtrError, Result};

/// Tolerance on row sums accepted by [`ConfidenceMatrix::new`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// `ln(e^a + e^b)` with `-inf` as the zero element.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Row-normalized `timesteps x classes` probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    timesteps: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ConfidenceMatrix {
    /// Validates that every entry is a probability and every row sums to one.
    pub fn new(timesteps: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 {
            return Err(HtrError::Shape("matrix needs at least one class".into()));
        }
        if data.len() != timesteps * classes {
            return Err(HtrError::Shape(format!(
                "{} entries for a {timesteps}x{classes} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(HtrError::InvalidInput(format!("entry {bad} is not a probability")));
        }
        for (t, row) in data.chunks(classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(HtrError::InvalidInput(format!("row {t} sums to {sum}")));
            }
        }
        Ok(ConfidenceMatrix {
            timesteps,
            classes,
            data,
        })
    }

    /// Row-wise softmax of unnormalized activations.
    pub fn from_logits(timesteps: usize, classes: usize, logits: &[f64]) -> Result<Self> {
        if classes == 0 || logits.len() != timesteps * classes {
            return Err(HtrError::Shape(format!(
                "{} activations for a {timesteps}x{classes} matrix",
                logits.len()
            )));
        }
        let mut data = Vec::with_capacity(logits.len());
        for row in logits.chunks(classes) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = data.len();
            data.extend(row.iter().map(|&z| (z - max).exp()));
            let sum: f64 = data[start..].iter().sum();
            data[start..].iter_mut().for_each(|p| *p /= sum);
        }
        Ok(ConfidenceMatrix {
            timesteps,
            classes,
            data,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.classes + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice(&self, start: usize, end: usize) -> ConfidenceMatrix {
        assert!(start <= end && end <= self.timesteps, "slice {start}..{end} of {}", self.timesteps);
        ConfidenceMatrix {
            timesteps: end - start,
            classes: self.classes,
            data: self.data[start * self.classes..end * self.classes].to_vec(),
        }
    }

    /// The same matrix with its time axis reversed.
    pub fn reversed(&self) -> ConfidenceMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for t in (0..self.timesteps).rev() {
            data.extend_from_slice(self.row(t));
        }
        ConfidenceMatrix {
            timesteps: self.timesteps,
            classes: self.classes,
            data,
        }
    }

    /// Natural logarithms of all entries, `-inf` for zeros.
    pub fn log_probs(&self) -> Vec<f64> {
        self.data.iter().map(|&p| p.ln()).collect()
    }

    /// Index of the most probable class at `t`; the lowest index wins ties.
    pub fn argmax(&self, t: usize) -> usize {
        let row = self.row(t);
        let mut best = 0;
        for (c, &p) in row.iter().enumerate().skip(1) {
            if p > row[best] {
                best = c;
            }
        }
        best
    }
}
