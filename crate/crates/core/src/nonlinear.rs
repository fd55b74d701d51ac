//! The four pointwise non-linearities and the threshold selection rules.

use crate::array::DenseArray;
use crate::error::{Error, Result};

/// Which non-linearity a layer applies. In config files these are named
/// "relu" | "abs" | "soft" | "relu_t".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Relu,
    Abs,
    SoftThreshold,
    ThresholdedRelu,
}

impl Kind {
    pub fn parse(name: &str) -> Result<Kind> {
        match name {
            "relu" => Ok(Kind::Relu),
            "abs" => Ok(Kind::Abs),
            "soft" => Ok(Kind::SoftThreshold),
            "relu_t" => Ok(Kind::ThresholdedRelu),
            other => Err(Error::config(format!(
                "unknown non-linearity '{other}' (expected relu | abs | soft | relu_t)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Relu => "relu",
            Kind::Abs => "abs",
            Kind::SoftThreshold => "soft",
            Kind::ThresholdedRelu => "relu_t",
        }
    }
}

/// A pointwise non-linearity with its threshold. `lambda` is zero for the
/// threshold-free kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    pub kind: Kind,
    pub lambda: f64,
}

impl Nonlinearity {
    pub fn new(kind: Kind, lambda: f64) -> Result<Self> {
        match kind {
            Kind::Relu | Kind::Abs if lambda != 0.0 => Err(Error::config(format!(
                "{} takes no threshold, got lambda = {lambda}",
                kind.name()
            ))),
            _ if lambda < 0.0 => Err(Error::config("lambda must be nonnegative")),
            _ => Ok(Nonlinearity { kind, lambda }),
        }
    }

    pub fn relu() -> Self {
        Nonlinearity { kind: Kind::Relu, lambda: 0.0 }
    }

    pub fn abs() -> Self {
        Nonlinearity { kind: Kind::Abs, lambda: 0.0 }
    }

    pub fn soft(lambda: f64) -> Self {
        Nonlinearity { kind: Kind::SoftThreshold, lambda }
    }

    pub fn relu_t(lambda: f64) -> Self {
        Nonlinearity { kind: Kind::ThresholdedRelu, lambda }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let l = self.lambda;
        match self.kind {
            Kind::Relu => u.max(0.0),
            Kind::Abs => u.abs(),
            Kind::SoftThreshold => u.signum() * (u.abs() - l).max(0.0),
            Kind::ThresholdedRelu => (u - l).max(0.0),
        }
    }

    /// Subgradient used for training; 0 exactly at the threshold kinks.
    #[inline]
    pub fn grad(&self, u: f64) -> f64 {
        let l = self.lambda;
        match self.kind {
            Kind::Relu => {
                if u > 0.0 { 1.0 } else { 0.0 }
            }
            Kind::Abs => {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Kind::SoftThreshold => {
                if u.abs() > l { 1.0 } else { 0.0 }
            }
            Kind::ThresholdedRelu => {
                if u > l { 1.0 } else { 0.0 }
            }
        }
    }

    pub fn apply(&self, u: &DenseArray) -> DenseArray {
        let values = u.values().iter().map(|&v| self.eval(v)).collect();
        DenseArray::from_parts(u.shape().to_vec(), values)
    }

    pub fn apply_slice(&self, u: &mut [f64]) {
        for v in u.iter_mut() {
            *v = self.eval(*v);
        }
    }
}

/// Threshold rule for a frame layer of size p x d: 1.5 sqrt(d/p) for a
/// soft-thresholding, sqrt(d/p) for a thresholded rectifier, 0 otherwise.
pub fn select_threshold(kind: Kind, d: usize, p: usize) -> f64 {
    let ratio = (d as f64 / p as f64).sqrt();
    match kind {
        Kind::SoftThreshold => 1.5 * ratio,
        Kind::ThresholdedRelu => ratio,
        Kind::Relu | Kind::Abs => 0.0,
    }
}

/// The denoising threshold sigma * sqrt(2 ln d); with `practical` set, the
/// tabulated near-optimal 1.5 sigma instead.
pub fn theorem_threshold(sigma: f64, d: usize, practical: bool) -> Result<f64> {
    if d < 2 {
        return Err(Error::config("theorem threshold needs d >= 2"));
    }
    if sigma <= 0.0 {
        return Err(Error::config("sigma must be positive"));
    }
    Ok(if practical {
        1.5 * sigma
    } else {
        sigma * (2.0 * (d as f64).ln()).sqrt()
    })
}
