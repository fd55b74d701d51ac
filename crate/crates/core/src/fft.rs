//! 2-D FFT kernels on periodic domains: forward/inverse transforms, filtering
//! with stride subsampling via frequency folding, and the exact adjoint.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::array::DenseArray;
use crate::error::{Error, Result};

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Complex frequency-domain plane of size `h` x `w`, row-major, unnormalized
/// DFT convention (forward has no scale factor, inverse divides by h*w).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub h: usize,
    pub w: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(h: usize, w: usize) -> Self {
        Spectrum {
            h,
            w,
            data: vec![Complex64::new(0.0, 0.0); h * w],
        }
    }

    pub fn from_real(plane: &[f64], h: usize, w: usize) -> Self {
        assert_eq!(plane.len(), h * w);
        Spectrum {
            h,
            w,
            data: plane.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.w + j]
    }

    /// Pointwise product with another spectrum.
    pub fn mul(&self, other: &Spectrum) -> Spectrum {
        assert_eq!((self.h, self.w), (other.h, other.w));
        Spectrum {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Pointwise product with the conjugate of `other`.
    pub fn mul_conj(&self, other: &Spectrum) -> Spectrum {
        assert_eq!((self.h, self.w), (other.h, other.w));
        Spectrum {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b.conj())
                .collect(),
        }
    }

    pub fn conj(&self) -> Spectrum {
        Spectrum {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Value at the frequency (-ky, -kx) for index (ky, kx), on the DFT grid.
    pub fn neg_index(&self, i: usize, j: usize) -> Complex64 {
        let ni = (self.h - i) % self.h;
        let nj = (self.w - j) % self.w;
        self.data[ni * self.w + nj]
    }

    /// Fold aliases for subsampling by `s` in both axes. Output is the DFT of
    /// the subsampled signal when `self` is the DFT of the full signal.
    pub fn fold(&self, s: usize) -> Spectrum {
        assert!(self.h % s == 0 && self.w % s == 0);
        let (oh, ow) = (self.h / s, self.w / s);
        let mut out = Spectrum::zeros(oh, ow);
        let scale = 1.0 / (s * s) as f64;
        for ay in 0..s {
            for ax in 0..s {
                for i in 0..oh {
                    let src = (i + ay * oh) * self.w + ax * ow;
                    let dst = i * ow;
                    for j in 0..ow {
                        out.data[dst + j] += self.data[src + j] * scale;
                    }
                }
            }
        }
        out
    }

    /// Adjoint of `fold` composed with the DFT scaling: replicates the plane to
    /// all alias positions. This is the DFT of the zero-stuffed upsampling.
    pub fn replicate(&self, s: usize) -> Spectrum {
        let (oh, ow) = (self.h * s, self.w * s);
        let mut out = Spectrum::zeros(oh, ow);
        for ay in 0..s {
            for ax in 0..s {
                for i in 0..self.h {
                    let dst = (i + ay * self.h) * ow + ax * self.w;
                    let src = i * self.w;
                    out.data[dst..dst + self.w].copy_from_slice(&self.data[src..src + self.w]);
                }
            }
        }
        out
    }
}

fn fft2_inplace(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let row_plan = plan(w, inverse);
    for r in 0..h {
        row_plan.process(&mut data[r * w..(r + 1) * w]);
    }
    let col_plan = plan(h, inverse);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = data[r * w + c];
        }
        col_plan.process(&mut col);
        for r in 0..h {
            data[r * w + c] = col[r];
        }
    }
}

/// Forward 2-D DFT of a real plane.
pub fn fft2(plane: &[f64], h: usize, w: usize) -> Spectrum {
    let mut s = Spectrum::from_real(plane, h, w);
    fft2_inplace(&mut s.data, h, w, false);
    s
}

/// Inverse 2-D DFT, returning the real part (imaginary parts are discarded;
/// they vanish for spectra of real signals).
pub fn ifft2_real(spec: &Spectrum) -> Vec<f64> {
    let mut data = spec.data.clone();
    fft2_inplace(&mut data, spec.h, spec.w, true);
    let scale = 1.0 / (spec.h * spec.w) as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// Circular convolution of `image` with a filter given by its frequency
/// response, then subsampling by `stride` on both axes.
pub fn conv2d_subsample(image_spec: &Spectrum, filter: &Spectrum, stride: usize) -> Vec<f64> {
    let prod = image_spec.mul(filter);
    if stride == 1 {
        ifft2_real(&prod)
    } else {
        ifft2_real(&prod.fold(stride))
    }
}

/// Adjoint of [`conv2d_subsample`]: zero-stuff upsample the coefficient plane
/// and filter with the conjugate response. Returns the full-size spectrum
/// contribution so callers can accumulate over channels before one inverse FFT.
pub fn conv2d_subsample_adjoint_spec(
    coeffs: &[f64],
    ch: usize,
    cw: usize,
    filter: &Spectrum,
    stride: usize,
) -> Spectrum {
    let small = fft2(coeffs, ch, cw);
    let up = if stride == 1 { small } else { small.replicate(stride) };
    up.mul_conj(filter)
}

/// The spec-level operation: real-valued frequency response, circular
/// convolution, stride subsampling.
pub fn fft_conv2d_stride(
    image: &DenseArray,
    filter_freq: &DenseArray,
    stride: usize,
) -> Result<DenseArray> {
    if image.ndim() != 2 || filter_freq.ndim() != 2 {
        return Err(Error::dim("fft_conv2d_stride expects 2-D arrays"));
    }
    let (h, w) = (image.rows(), image.cols());
    if filter_freq.rows() != h || filter_freq.cols() != w {
        return Err(Error::dim("filter response must match image size"));
    }
    if stride == 0 || h % stride != 0 || w % stride != 0 {
        return Err(Error::dim(format!(
            "stride {stride} must divide image dims {h}x{w}"
        )));
    }
    if !image.all_finite() || !filter_freq.all_finite() {
        return Err(Error::numeric("non-finite input"));
    }
    let spec = fft2(image.values(), h, w);
    let filt = Spectrum::from_real(filter_freq.values(), h, w);
    let out = conv2d_subsample(&spec, &filt, stride);
    Ok(DenseArray::from_parts(vec![h / stride, w / stride], out))
}
