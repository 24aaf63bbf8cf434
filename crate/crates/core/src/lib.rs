//! Handwritten text line recognition.
//!
//! Line images are normalized ([`imaging`]), fed through a multi-directional
//! recurrent network ([`netcore`]) that emits a [`ConfidenceMatrix`], trained
//! with CTC ([`ctc`], [`training`]) and decoded against a dictionary with a
//! length-penalized cost ([`decoder`]). [`evaluation`] computes WER and CER.

pub mod cli;
pub mod ctc;
pub mod decoder;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod matrix;
pub mod netcore;
pub mod pageio;
pub mod synth;
pub mod training;

pub use ctc::{Alphabet, LabelSequence};
pub use error::{HtrError, Result};
pub use imaging::GrayImage;
pub use matrix::ConfidenceMatrix;
