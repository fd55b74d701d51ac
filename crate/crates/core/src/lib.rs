//! Tight-frame separation and concentration operators: rectified and
//! soft-thresholded frame layers, Fisher-ratio analytics, Morlet wavelet
//! scattering cascades with learned channel projectors, and bias-free
//! training loops, together with the numerical experiments that exercise
//! their contraction and separation guarantees.

pub mod array;
pub mod error;
pub mod fft;
pub mod fisher;
pub mod frames;
pub mod linalg;
pub mod nonlinear;

pub use array::DenseArray;
pub use error::{Error, Result};
