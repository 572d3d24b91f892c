//! Numerical time-frequency analysis: STFT-based modulation-space norms,
//! Littlewood-Paley Besov norms, the index calculus for dilation exponents
//! and the experiments that check those exponents on concrete families.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandlimited;
pub mod besov;
pub mod bump;
pub mod config;
pub mod error;
pub mod experiments;
pub mod extremals;
pub mod fft;
pub mod grid;
pub mod indices;
pub mod norms;
pub mod par;
pub mod report;
pub mod stft;
pub mod verify;

pub use error::{Error, Result};
pub use fft::C64;
