//! Normalized tight frames: construction, Parseval retraction, spherical row
//! renormalization, sign-invariant extension, analysis/synthesis application,
//! and patch-convolutional frames over images.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::DenseArray;
use crate::error::{Error, Result};
use crate::linalg::{gram_spectrum_bounds, matmul};

/// Default tolerance on the Gram eigenvalue band, matching the singular-value
/// band [0.99, 1.01] maintained by the optimizer.
pub const DEFAULT_TOL: f64 = 0.01;

/// A p x d analysis matrix with F^T F close to the identity and rows of equal
/// norm sqrt(d/p).
#[derive(Debug, Clone)]
pub struct TightFrame {
    weights: DenseArray,
    tol: f64,
}

impl TightFrame {
    /// Validate tightness and row norms of `weights` before wrapping it.
    pub fn new(weights: DenseArray, tol: f64) -> Result<Self> {
        if weights.ndim() != 2 {
            return Err(Error::dim("frame weights must be a matrix"));
        }
        let frame = TightFrame { weights, tol };
        frame.check_invariants()?;
        Ok(frame)
    }

    /// Wrap without validation; used by the optimizer between retraction steps.
    pub fn new_unchecked(weights: DenseArray, tol: f64) -> Self {
        TightFrame { weights, tol }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let (lo, hi) = gram_spectrum_bounds(&self.weights)?;
        if lo < 1.0 - self.tol || hi > 1.0 + self.tol {
            return Err(Error::Invariant(format!(
                "Gram eigenvalues [{lo:.6}, {hi:.6}] outside [{:.4}, {:.4}]",
                1.0 - self.tol,
                1.0 + self.tol
            )));
        }
        let target = self.row_norm_target();
        for i in 0..self.rows() {
            let n = row_norm(self.weights.row(i));
            if (n - target).abs() > self.tol {
                return Err(Error::Invariant(format!(
                    "row {i} norm {n:.6} deviates from {target:.6}"
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    pub fn cols(&self) -> usize {
        self.weights.cols()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn weights(&self) -> &DenseArray {
        &self.weights
    }

    pub fn into_weights(self) -> DenseArray {
        self.weights
    }

    pub fn row_norm_target(&self) -> f64 {
        (self.cols() as f64 / self.rows() as f64).sqrt()
    }

    /// F x for a single vector x of dimension d.
    pub fn analysis(&self, x: &DenseArray) -> Result<DenseArray> {
        if x.len() != self.cols() {
            return Err(Error::dim(format!(
                "analysis input has {} entries, frame has d = {}",
                x.len(),
                self.cols()
            )));
        }
        let col = DenseArray::from_parts(vec![self.cols(), 1], x.values().to_vec());
        let y = matmul(&self.weights, &col)?;
        Ok(DenseArray::from_parts(vec![self.rows()], y.into_values()))
    }

    /// F^T y for a single coefficient vector y of dimension p.
    pub fn synthesis(&self, y: &DenseArray) -> Result<DenseArray> {
        if y.len() != self.rows() {
            return Err(Error::dim(format!(
                "synthesis input has {} entries, frame has p = {}",
                y.len(),
                self.rows()
            )));
        }
        let col = DenseArray::from_parts(vec![self.rows(), 1], y.values().to_vec());
        let x = matmul(&self.weights.transpose2(), &col)?;
        Ok(DenseArray::from_parts(vec![self.cols()], x.into_values()))
    }

    /// Batched analysis: rows of `x` are vectors; returns rows of coefficients.
    pub fn analysis_batch(&self, x: &DenseArray) -> Result<DenseArray> {
        matmul(x, &self.weights.transpose2())
    }

    /// Batched synthesis: rows of `y` are coefficient vectors.
    pub fn synthesis_batch(&self, y: &DenseArray) -> Result<DenseArray> {
        matmul(y, &self.weights)
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One Parseval gradient step: (1 + alpha) F - alpha F F^T F.
pub fn parseval_step(f: &DenseArray, alpha: f64) -> Result<DenseArray> {
    if f.ndim() != 2 {
        return Err(Error::dim("parseval_step expects a matrix"));
    }
    if alpha <= 0.0 {
        return Err(Error::config("parseval_step needs alpha > 0"));
    }
    let gram = matmul(&f.transpose2(), f)?;
    let fg = matmul(f, &gram)?;
    f.scale(1.0 + alpha).sub(&fg.scale(alpha))
}

/// Spherical projection of every row onto norm sqrt(d/p).
pub fn renormalize_rows(f: &DenseArray) -> Result<DenseArray> {
    if f.ndim() != 2 {
        return Err(Error::dim("renormalize_rows expects a matrix"));
    }
    let (p, d) = (f.rows(), f.cols());
    let target = (d as f64 / p as f64).sqrt();
    let mut out = f.clone();
    for i in 0..p {
        let n = row_norm(f.row(i));
        if n == 0.0 {
            return Err(Error::numeric(format!("zero row {i} cannot be projected")));
        }
        let s = target / n;
        for v in out.row_mut(i) {
            *v *= s;
        }
    }
    Ok(out)
}

/// Gaussian draw followed by Parseval iterations and row renormalization until
/// the [`TightFrame`] invariants hold with tolerance [`DEFAULT_TOL`].
pub fn init_random_tight(p: usize, d: usize, seed: u64) -> Result<TightFrame> {
    if p < d || d == 0 {
        return Err(Error::config(format!("need p >= d >= 1, got p={p} d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (p as f64).sqrt();
    let values: Vec<f64> = (0..p * d)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        })
        .collect();
    let mut f = DenseArray::from_parts(vec![p, d], values);
    f = renormalize_rows(&f)?;
    const ALPHA: f64 = 0.1;
    for _ in 0..10_000 {
        let cand = TightFrame::new_unchecked(f.clone(), DEFAULT_TOL);
        if cand.check_invariants().is_ok() {
            return Ok(cand);
        }
        f = renormalize_rows(&parseval_step(&f, ALPHA)?)?;
    }
    Err(Error::numeric(
        "tight-frame initialization did not converge in 10^4 iterations",
    ))
}

/// Frame whose rows come in opposite-sign pairs, [-B^T, B^T]^T, making
/// rectification linearly invertible. The stored half `B` satisfies
/// B^T B = I/2 so that the stacked frame is tight.
#[derive(Debug, Clone)]
pub struct SignInvariantFrame {
    half: DenseArray,
    tol: f64,
}

impl SignInvariantFrame {
    /// Build from the half frame; validates 2 B^T B = I within `tol`.
    pub fn from_half(half: DenseArray, tol: f64) -> Result<Self> {
        if half.ndim() != 2 {
            return Err(Error::dim("half frame must be a matrix"));
        }
        let scaled = half.scale(std::f64::consts::SQRT_2);
        let (lo, hi) = gram_spectrum_bounds(&scaled)?;
        if lo < 1.0 - tol || hi > 1.0 + tol {
            return Err(Error::Invariant(format!(
                "half frame is not tight after stacking: 2 B^T B eigenvalues in [{lo:.6}, {hi:.6}]"
            )));
        }
        Ok(SignInvariantFrame { half, tol })
    }

    /// Seeded random construction with p total rows (p even, p/2 >= d).
    pub fn random(p: usize, d: usize, seed: u64) -> Result<Self> {
        if p % 2 != 0 || p / 2 < d {
            return Err(Error::config(format!(
                "sign-invariant frame needs even p with p/2 >= d, got p={p} d={d}"
            )));
        }
        let base = init_random_tight(p / 2, d, seed)?;
        let tol = base.tol();
        let half = base.into_weights().scale(1.0 / std::f64::consts::SQRT_2);
        SignInvariantFrame::from_half(half, tol)
    }

    pub fn half(&self) -> &DenseArray {
        &self.half
    }

    pub fn rows(&self) -> usize {
        2 * self.half.rows()
    }

    pub fn cols(&self) -> usize {
        self.half.cols()
    }

    /// The stacked frame [-B; B] as a validated [`TightFrame`].
    pub fn frame(&self) -> Result<TightFrame> {
        let (ph, d) = (self.half.rows(), self.half.cols());
        let mut values = Vec::with_capacity(2 * ph * d);
        values.extend(self.half.values().iter().map(|v| -v));
        values.extend_from_slice(self.half.values());
        TightFrame::new(DenseArray::from_parts(vec![2 * ph, d], values), self.tol)
    }
}

/// Extend a base matrix, whose stacked version must be tight, into the full
/// sign-invariant frame.
pub fn sign_invariant_extend(base: &DenseArray, tol: f64) -> Result<SignInvariantFrame> {
    SignInvariantFrame::from_half(base.clone(), tol)
}

/// Patch-convolutional frame geometry: k x k patches with a stride of k/2
/// over all channels, periodic wrapping at borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchFrameConfig {
    pub patch: usize,
    pub stride: usize,
    pub channels: usize,
}

impl PatchFrameConfig {
    pub fn new(patch: usize, stride: usize, channels: usize) -> Result<Self> {
        if patch == 0 || stride == 0 || channels == 0 {
            return Err(Error::config("patch, stride and channels must be positive"));
        }
        if patch % stride != 0 {
            return Err(Error::config(format!(
                "stride {stride} must divide patch side {patch}"
            )));
        }
        Ok(PatchFrameConfig {
            patch,
            stride,
            channels,
        })
    }

    /// Dimension of one flattened patch vector.
    pub fn patch_dim(&self) -> usize {
        self.channels * self.patch * self.patch
    }

    /// Number of patch positions along each axis of an H x W image.
    pub fn grid(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if h % self.stride != 0 || w % self.stride != 0 {
            return Err(Error::dim(format!(
                "stride {} must divide image dims {h}x{w}",
                self.stride
            )));
        }
        Ok((h / self.stride, w / self.stride))
    }

    /// How many patches cover each pixel.
    pub fn overlap(&self) -> usize {
        let r = self.patch / self.stride;
        r * r
    }
}

/// Extract overlapping patches (periodic) as rows of a (grid x d) matrix.
/// `image` is shaped channels x H x W.
pub fn extract_patches(cfg: &PatchFrameConfig, image: &DenseArray) -> Result<DenseArray> {
    let (c, h, w) = image_dims(cfg, image)?;
    let (gy, gx) = cfg.grid(h, w)?;
    let k = cfg.patch;
    let d = cfg.patch_dim();
    let img = image.values();
    let mut out = vec![0.0; gy * gx * d];
    for py in 0..gy {
        for px in 0..gx {
            let base = (py * gx + px) * d;
            let (oy, ox) = (py * cfg.stride, px * cfg.stride);
            for ch in 0..c {
                for dy in 0..k {
                    let iy = (oy + dy) % h;
                    for dx in 0..k {
                        let ix = (ox + dx) % w;
                        out[base + ch * k * k + dy * k + dx] = img[ch * h * w + iy * w + ix];
                    }
                }
            }
        }
    }
    Ok(DenseArray::from_parts(vec![gy * gx, d], out))
}

/// Adjoint-style overlap-add of patch rows back into an image, each pixel
/// weighted by 1/(number of covering patches).
pub fn overlap_add(
    cfg: &PatchFrameConfig,
    patches: &DenseArray,
    h: usize,
    w: usize,
) -> Result<DenseArray> {
    let (gy, gx) = cfg.grid(h, w)?;
    let d = cfg.patch_dim();
    if patches.rows() != gy * gx || patches.cols() != d {
        return Err(Error::dim("patch matrix does not match image geometry"));
    }
    let c = cfg.channels;
    let k = cfg.patch;
    let weight = 1.0 / cfg.overlap() as f64;
    let mut out = vec![0.0; c * h * w];
    let pv = patches.values();
    for py in 0..gy {
        for px in 0..gx {
            let base = (py * gx + px) * d;
            let (oy, ox) = (py * cfg.stride, px * cfg.stride);
            for ch in 0..c {
                for dy in 0..k {
                    let iy = (oy + dy) % h;
                    for dx in 0..k {
                        let ix = (ox + dx) % w;
                        out[ch * h * w + iy * w + ix] += weight * pv[base + ch * k * k + dy * k + dx];
                    }
                }
            }
        }
    }
    Ok(DenseArray::from_parts(vec![c, h, w], out))
}

fn image_dims(cfg: &PatchFrameConfig, image: &DenseArray) -> Result<(usize, usize, usize)> {
    match image.shape() {
        [h, w] if cfg.channels == 1 => Ok((1, *h, *w)),
        [c, h, w] if *c == cfg.channels => Ok((*c, *h, *w)),
        other => Err(Error::dim(format!(
            "image shape {:?} incompatible with {} channels",
            other, cfg.channels
        ))),
    }
}

/// Map every patch of `image` through the frame: output is grid x p.
pub fn patch_frame_apply(
    cfg: &PatchFrameConfig,
    frame: &TightFrame,
    image: &DenseArray,
) -> Result<DenseArray> {
    if frame.cols() != cfg.patch_dim() {
        return Err(Error::dim(format!(
            "frame d = {} but patches have dimension {}",
            frame.cols(),
            cfg.patch_dim()
        )));
    }
    let patches = extract_patches(cfg, image)?;
    frame.analysis_batch(&patches)
}

/// Apply F^T per patch and overlap-add; inverse of [`patch_frame_apply`] when
/// the frame is exactly tight.
pub fn patch_frame_synthesize(
    cfg: &PatchFrameConfig,
    frame: &TightFrame,
    coeffs: &DenseArray,
    h: usize,
    w: usize,
) -> Result<DenseArray> {
    let patches = frame.synthesis_batch(coeffs)?;
    overlap_add(cfg, &patches, h, w)
}

const FRAME_MAGIC: &[u8; 4] = b"STLF";
const FRAME_VERSION: u32 = 1;

/// Write a matrix in the frame binary format: 16-byte header (magic "STLF",
/// version, p, d as little-endian u32) followed by p*d little-endian f64.
pub fn write_frame_binary<W: Write>(w: &mut W, mat: &DenseArray) -> Result<()> {
    if mat.ndim() != 2 {
        return Err(Error::dim("frame binary format stores matrices"));
    }
    w.write_all(FRAME_MAGIC)?;
    w.write_u32::<LittleEndian>(FRAME_VERSION)?;
    w.write_u32::<LittleEndian>(mat.rows() as u32)?;
    w.write_u32::<LittleEndian>(mat.cols() as u32)?;
    for &v in mat.values() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_frame_binary<R: Read>(r: &mut R) -> Result<DenseArray> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {FRAME_MAGIC:?}"),
        });
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FRAME_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let p = r.read_u32::<LittleEndian>()? as usize;
    let d = r.read_u32::<LittleEndian>()? as usize;
    let mut values = vec![0.0; p * d];
    for v in values.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    Ok(DenseArray::from_parts(vec![p, d], values))
}

pub fn save_frame(path: &Path, mat: &DenseArray) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_frame_binary(&mut f, mat)
}

pub fn load_frame(path: &Path) -> Result<DenseArray> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_frame_binary(&mut f)
}
