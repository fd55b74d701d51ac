//! Class-conditional statistics, Fisher discriminant ratio, whitening and
//! standardization, and the invertible-representation property harness.

use crate::array::DenseArray;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, matmul, sym_eig};

/// Labeled sample matrix: rows are samples, labels index classes 0..C.
#[derive(Debug, Clone)]
pub struct LabeledBatch {
    pub samples: DenseArray,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledBatch {
    pub fn new(samples: DenseArray, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if samples.ndim() != 2 {
            return Err(Error::dim("samples must be an N x d matrix"));
        }
        if samples.rows() != labels.len() {
            return Err(Error::dim("label count must match sample count"));
        }
        if n_classes == 0 {
            return Err(Error::config("need at least one class"));
        }
        let mut counts = vec![0usize; n_classes];
        for &l in &labels {
            if l >= n_classes {
                return Err(Error::data(format!("label {l} out of range 0..{n_classes}")));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n < 2) {
            return Err(Error::data(format!(
                "class {c} has {} samples; covariance needs at least 2",
                counts[c]
            )));
        }
        Ok(LabeledBatch { samples, labels, n_classes })
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Apply a map to every sample row, keeping labels.
    pub fn map_samples<F>(&self, f: F) -> Result<LabeledBatch>
    where
        F: Fn(&DenseArray) -> Result<DenseArray>,
    {
        let transformed = f(&self.samples)?;
        LabeledBatch::new(transformed, self.labels.clone(), self.n_classes)
    }
}

/// Per-class means plus pooled within/between covariances, with the ridge
/// used when inverting the within-class covariance.
#[derive(Debug, Clone)]
pub struct ClassStats {
    /// Globally centered class means, C x d.
    pub mu: DenseArray,
    /// Averaged within-class covariance, d x d.
    pub sigma_w: DenseArray,
    /// Between-class covariance of the centered means, d x d.
    pub sigma_b: DenseArray,
    /// Ridge added to sigma_w before inversion.
    pub ridge: f64,
}

/// Relative ridge factor; the absolute ridge is this times Tr(sigma_w)/d.
pub const RIDGE_FACTOR: f64 = 1e-6;

impl ClassStats {
    pub fn n_classes(&self) -> usize {
        self.mu.rows()
    }

    pub fn dim(&self) -> usize {
        self.mu.cols()
    }

    pub fn trace_w(&self) -> f64 {
        trace(&self.sigma_w)
    }

    pub fn trace_b(&self) -> f64 {
        trace(&self.sigma_b)
    }

    /// Exact statistics after a linear map A: mu -> mu A^T, covariances ->
    /// A Sigma A^T. Used by the linear-map property checks.
    pub fn linear_map(&self, a: &DenseArray) -> Result<ClassStats> {
        let mu = matmul(&self.mu, &a.transpose2())?;
        let sigma_w = matmul(&matmul(a, &self.sigma_w)?, &a.transpose2())?;
        let sigma_b = matmul(&matmul(a, &self.sigma_b)?, &a.transpose2())?;
        let d = sigma_w.rows();
        let ridge = RIDGE_FACTOR * trace(&sigma_w) / d as f64;
        Ok(ClassStats { mu, sigma_w, sigma_b, ridge })
    }
}

fn trace(m: &DenseArray) -> f64 {
    (0..m.rows()).map(|i| m.at2(i, i)).sum()
}

/// Class statistics with equiprobable-class averaging: Ave_c = C^{-1} sum_c
/// regardless of the per-class sample counts, unbiased per-class covariances,
/// and means centered so they sum to zero.
pub fn compute_stats(batch: &LabeledBatch) -> Result<ClassStats> {
    let d = batch.dim();
    let c = batch.n_classes;
    let counts = batch.class_counts();

    let mut mu = DenseArray::zeros(vec![c, d]);
    for (i, &l) in batch.labels.iter().enumerate() {
        let row = batch.samples.row(i);
        let m = mu.row_mut(l);
        for (mj, xj) in m.iter_mut().zip(row) {
            *mj += xj;
        }
    }
    for l in 0..c {
        let n = counts[l] as f64;
        for v in mu.row_mut(l) {
            *v /= n;
        }
    }

    // global centering by the equal-weight average of class means
    let mut center = vec![0.0; d];
    for l in 0..c {
        for (cj, mj) in center.iter_mut().zip(mu.row(l)) {
            *cj += mj / c as f64;
        }
    }
    for l in 0..c {
        for (mj, cj) in mu.row_mut(l).iter_mut().zip(&center) {
            *mj -= cj;
        }
    }

    // sigma_w = C^{-1} sum_c unbiased covariance of class c, merged in class order
    let mut sigma_w = vec![0.0; d * d];
    for l in 0..c {
        let n = counts[l];
        let mut block = Vec::with_capacity(n * d);
        for (i, &li) in batch.labels.iter().enumerate() {
            if li == l {
                block.extend_from_slice(batch.samples.row(i));
            }
        }
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for j in 0..d {
                mean[j] += block[r * d + j];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        for r in 0..n {
            for j in 0..d {
                block[r * d + j] -= mean[j];
            }
        }
        let blk = DenseArray::from_parts(vec![n, d], block);
        let gram = matmul(&blk.transpose2(), &blk)?;
        let scale = 1.0 / ((n - 1) as f64 * c as f64);
        for (w, g) in sigma_w.iter_mut().zip(gram.values()) {
            *w += g * scale;
        }
    }
    let sigma_w = DenseArray::from_parts(vec![d, d], sigma_w);

    // sigma_b = Ave_c mu_c mu_c^T on the centered means
    let sigma_b = matmul(&mu.transpose2(), &mu)?.scale(1.0 / c as f64);

    let ridge = RIDGE_FACTOR * trace(&sigma_w) / d as f64;
    Ok(ClassStats { mu, sigma_w, sigma_b, ridge })
}

fn ridged(stats: &ClassStats) -> DenseArray {
    let d = stats.dim();
    let mut m = stats.sigma_w.clone();
    for i in 0..d {
        let v = m.at2(i, i) + stats.ridge;
        m.set2(i, i, v);
    }
    m
}

/// Fisher discriminant ratio Tr((Sigma_W + eps I)^{-1} Sigma_B) with the
/// class-averaged Sigma_B, i.e. the average squared whitened mean norm
/// C^{-1} sum_c ||Sigma_W^{-1/2} mu_c||^2. Computed through a Cholesky solve.
pub fn fisher_ratio(stats: &ClassStats) -> Result<f64> {
    let d = stats.dim();
    let l = cholesky(&ridged(stats)).map_err(|_| {
        Error::numeric("within-class covariance is singular; use a positive ridge")
    })?;
    let mut tr = 0.0;
    let mut col = vec![0.0; d];
    for j in 0..d {
        for i in 0..d {
            col[i] = stats.sigma_b.at2(i, j);
        }
        let x = cholesky_solve(&l, &col);
        tr += x[j];
    }
    Ok(tr)
}

/// The same ratio through the whitened-mean formulation
/// Ave_c ||(Sigma_W + eps I)^{-1/2} mu_c||^2.
pub fn fisher_ratio_whitened(stats: &ClassStats) -> Result<f64> {
    let w = whitening_matrix(stats)?;
    let wm = matmul(&stats.mu, &w)?; // W symmetric
    let c = stats.n_classes();
    let mut acc = 0.0;
    for l in 0..c {
        let row = wm.row(l);
        acc += row.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc / c as f64)
}

/// (Sigma_W + eps I)^{-1/2} via symmetric eigendecomposition.
pub fn whitening_matrix(stats: &ClassStats) -> Result<DenseArray> {
    let d = stats.dim();
    let (eigs, vecs) = sym_eig(&ridged(stats), true)?;
    let v = vecs.expect("vectors requested");
    if eigs[0] <= 0.0 {
        return Err(Error::numeric(format!(
            "within-class covariance not positive definite (min eig {:.3e})",
            eigs[0]
        )));
    }
    // V diag(1/sqrt(eig)) V^T
    let mut scaled = v.clone();
    for i in 0..d {
        for j in 0..d {
            let x = scaled.at2(i, j) / eigs[j].sqrt();
            scaled.set2(i, j, x);
        }
    }
    matmul(&scaled, &v.transpose2())
}

/// Whiten vectors with (Sigma_W + eps I)^{-1/2}. Accepts a single vector of
/// dimension d or a batch N x d.
pub fn whiten(stats: &ClassStats, x: &DenseArray) -> Result<DenseArray> {
    let w = whitening_matrix(stats)?;
    match x.shape() {
        [d] if *d == stats.dim() => {
            let col = DenseArray::from_parts(vec![*d, 1], x.values().to_vec());
            let out = matmul(&w, &col)?;
            Ok(DenseArray::from_parts(vec![*d], out.into_values()))
        }
        [_, d] if *d == stats.dim() => matmul(x, &w),
        other => Err(Error::dim(format!(
            "whiten expects d or N x d with d = {}, got {:?}",
            stats.dim(),
            other
        ))),
    }
}

/// Per-coordinate shift/scale fitted on one batch, reusable at inference.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fit zero mean and unit variance per coordinate. Coordinates with no
    /// variance keep scale 1.
    pub fn fit(samples: &DenseArray) -> Result<Standardizer> {
        if samples.ndim() != 2 {
            return Err(Error::dim("standardize expects an N x d matrix"));
        }
        let (n, d) = (samples.rows(), samples.cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(samples.row(i)) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                let dx = samples.at2(i, j) - mean[j];
                var[j] += dx * dx;
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, samples: &DenseArray) -> Result<DenseArray> {
        if samples.cols() != self.mean.len() {
            return Err(Error::dim("standardizer dimension mismatch"));
        }
        let (n, d) = (samples.rows(), samples.cols());
        let mut out = samples.clone();
        for i in 0..n {
            let row = out.row_mut(i);
            for j in 0..d {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn fit_apply(samples: &DenseArray) -> Result<(DenseArray, Standardizer)> {
        let s = Standardizer::fit(samples)?;
        Ok((s.apply(samples)?, s))
    }
}

/// A representation with a declared linear inverse, the hypothesis of the
/// error/Fisher monotonicity property.
pub trait InvertibleRep {
    fn apply_batch(&self, x: &DenseArray) -> Result<DenseArray>;
    fn invert_batch(&self, y: &DenseArray) -> Result<DenseArray>;
}

/// An invertible linear map given by its matrix and inverse.
pub struct LinearRep {
    pub forward: DenseArray,
    pub inverse: DenseArray,
}

impl InvertibleRep for LinearRep {
    fn apply_batch(&self, x: &DenseArray) -> Result<DenseArray> {
        matmul(x, &self.forward.transpose2())
    }
    fn invert_batch(&self, y: &DenseArray) -> Result<DenseArray> {
        matmul(y, &self.inverse.transpose2())
    }
}

pub struct IdentityRep;

impl InvertibleRep for IdentityRep {
    fn apply_batch(&self, x: &DenseArray) -> Result<DenseArray> {
        Ok(x.clone())
    }
    fn invert_batch(&self, y: &DenseArray) -> Result<DenseArray> {
        Ok(y.clone())
    }
}

/// Rectification on a sign-invariant tight frame; inverse through the
/// pairwise difference identity.
pub struct RectifiedFrameRep {
    pub frame: crate::frames::SignInvariantFrame,
}

impl InvertibleRep for RectifiedFrameRep {
    fn apply_batch(&self, x: &DenseArray) -> Result<DenseArray> {
        let full = self.frame.frame()?;
        let mut y = full.analysis_batch(x)?;
        for v in y.values_mut() {
            *v = v.max(0.0);
        }
        Ok(y)
    }

    fn invert_batch(&self, y: &DenseArray) -> Result<DenseArray> {
        // rho_r(u) - rho_r(-u) = u recovers Bx on the positive half, then
        // the half-frame pseudo-inverse 2 B^T maps back
        let ph = self.frame.half().rows();
        let n = y.rows();
        let d = self.frame.cols();
        if y.cols() != 2 * ph {
            return Err(Error::dim("coefficient width must be 2 * p/2"));
        }
        let mut bx = DenseArray::zeros(vec![n, ph]);
        for i in 0..n {
            let row = y.row(i);
            let out = bx.row_mut(i);
            for j in 0..ph {
                out[j] = row[j + ph] - row[j];
            }
        }
        matmul(&bx, &self.frame.half().scale(2.0))
    }
}

/// Reports the Fisher ratio before and after a representation with a declared
/// linear inverse, after verifying the witness on the batch itself.
#[derive(Debug)]
pub struct Prop1Report {
    pub fisher_before: f64,
    pub fisher_after: f64,
    pub witness_residual: f64,
}

pub const WITNESS_TOL: f64 = 1e-6;

pub fn prop1_check(batch: &LabeledBatch, rep: &dyn InvertibleRep) -> Result<Prop1Report> {
    let y = rep.apply_batch(&batch.samples)?;
    let back = rep.invert_batch(&y)?;
    let mut residual = 0.0f64;
    for i in 0..batch.len() {
        let xi = batch.samples.row(i);
        let bi = back.row(i);
        let num: f64 = xi
            .iter()
            .zip(bi)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = xi.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        residual = residual.max(num / den);
    }
    if residual > WITNESS_TOL {
        return Err(Error::InvalidWitness { residual, tol: WITNESS_TOL });
    }
    let before = fisher_ratio(&compute_stats(batch)?)?;
    let mapped = LabeledBatch::new(y, batch.labels.clone(), batch.n_classes)?;
    let after = fisher_ratio(&compute_stats(&mapped)?)?;
    Ok(Prop1Report {
        fisher_before: before,
        fisher_after: after,
        witness_residual: residual,
    })
}

/// Reinterpret a stack of feature maps (N x K x S, channels K, S spatial
/// positions) as a batch of K-dimensional samples, one per position, each
/// inheriting its image's label.
pub fn channelwise_batch(
    features: &DenseArray,
    labels: &[usize],
    n_classes: usize,
) -> Result<LabeledBatch> {
    let (n, k, s) = match features.shape() {
        [n, k, s] => (*n, *k, *s),
        other => {
            return Err(Error::dim(format!(
                "channelwise features must be N x K x S, got {other:?}"
            )))
        }
    };
    if labels.len() != n {
        return Err(Error::dim("label count must match feature count"));
    }
    let mut out = vec![0.0; n * s * k];
    let fv = features.values();
    let mut lab = Vec::with_capacity(n * s);
    for i in 0..n {
        for pos in 0..s {
            let row = (i * s + pos) * k;
            for ch in 0..k {
                out[row + ch] = fv[i * k * s + ch * s + pos];
            }
            lab.push(labels[i]);
        }
    }
    LabeledBatch::new(DenseArray::from_parts(vec![n * s, k], out), lab, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_batch(
        means: &[Vec<f64>],
        n_per: usize,
        sigma: f64,
        seed: u64,
    ) -> LabeledBatch {
        let c = means.len();
        let d = means[0].len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(c * n_per * d);
        let mut labels = Vec::with_capacity(c * n_per);
        for (l, m) in means.iter().enumerate() {
            for _ in 0..n_per {
                for j in 0..d {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    values.push(m[j] + sigma * g);
                }
                labels.push(l);
            }
        }
        LabeledBatch::new(
            DenseArray::from_parts(vec![c * n_per, d], values),
            labels,
            c,
        )
        .unwrap()
    }

    #[test]
    fn mirrored_classes_give_rank_one_sigma_b() {
        // class 0 at +m, class 1 at -m, tiny noise
        let m = vec![1.0, 2.0];
        let neg: Vec<f64> = m.iter().map(|v| -v).collect();
        let batch = gaussian_batch(&[m.clone(), neg], 4000, 1e-3, 1);
        let stats = compute_stats(&batch).unwrap();
        for j in 0..2 {
            assert!((stats.mu.at2(0, j) - m[j]).abs() < 1e-2);
            assert!((stats.mu.at2(1, j) + m[j]).abs() < 1e-2);
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((stats.sigma_b.at2(i, j) - m[i] * m[j]).abs() < 2e-2);
            }
        }
    }

    #[test]
    fn identical_samples_degenerate() {
        let values = vec![1.0, 2.0].repeat(6);
        let batch = LabeledBatch::new(
            DenseArray::from_parts(vec![6, 2], values),
            vec![0, 0, 0, 1, 1, 1],
            2,
        )
        .unwrap();
        let stats = compute_stats(&batch).unwrap();
        assert_eq!(stats.trace_w(), 0.0);
        assert_eq!(stats.trace_b(), 0.0);
    }

    #[test]
    fn one_dim_two_class_monte_carlo() {
        // classes N(+1, 1) and N(-1, 1): population Sigma_W = 1, Sigma_B = 1
        let batch = gaussian_batch(&[vec![1.0], vec![-1.0]], 50_000, 1.0, 2);
        let stats = compute_stats(&batch).unwrap();
        assert!((stats.sigma_w.at2(0, 0) - 1.0).abs() < 0.02);
        assert!((stats.sigma_b.at2(0, 0) - 1.0).abs() < 0.02);
        let ratio = fisher_ratio(&stats).unwrap();
        assert!((ratio - 1.0).abs() < 0.05);
    }

    #[test]
    fn centered_means_sum_to_zero_even_when_imbalanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (l, n) in [(0usize, 100usize), (1, 20), (2, 7)] {
            for _ in 0..n {
                values.push(rng.gen_range(-1.0..1.0) + l as f64);
                values.push(rng.gen_range(-1.0..1.0));
                labels.push(l);
            }
        }
        let batch =
            LabeledBatch::new(DenseArray::from_parts(vec![127, 2], values), labels, 3).unwrap();
        let stats = compute_stats(&batch).unwrap();
        for j in 0..2 {
            let s: f64 = (0..3).map(|l| stats.mu.at2(l, j)).sum();
            assert!(s.abs() < 1e-12, "centered class means must sum to zero");
        }
    }

    #[test]
    fn class_with_one_sample_rejected() {
        let r = LabeledBatch::new(
            DenseArray::from_parts(vec![3, 1], vec![0.0, 1.0, 2.0]),
            vec![0, 0, 1],
            2,
        );
        assert!(r.is_err());
    }

    #[test]
    fn identical_means_zero_ratio() {
        let batch = gaussian_batch(&[vec![0.0, 0.0], vec![0.0, 0.0]], 2000, 1.0, 4);
        let stats = compute_stats(&batch).unwrap();
        let ratio = fisher_ratio(&stats).unwrap();
        assert!(ratio < 0.01, "same-mean classes have near-zero ratio: {ratio}");
    }

    #[test]
    fn dual_formulas_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let means: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let batch = gaussian_batch(&means, 500, 1.0, 100 + trial);
            let stats = compute_stats(&batch).unwrap();
            let a = fisher_ratio(&stats).unwrap();
            let b = fisher_ratio_whitened(&stats).unwrap();
            assert!(
                (a - b).abs() <= 1e-8 * a.abs().max(1.0),
                "trace {a} vs whitened {b}"
            );
        }
    }

    #[test]
    fn whiten_identity_and_scaling() {
        let d = 3;
        let stats = ClassStats {
            mu: DenseArray::zeros(vec![2, d]),
            sigma_w: DenseArray::identity(d),
            sigma_b: DenseArray::zeros(vec![d, d]),
            ridge: 0.0,
        };
        let x = DenseArray::from_vec(vec![1.0, -2.0, 0.5]).unwrap();
        let w = whiten(&stats, &x).unwrap();
        assert!(w.sub(&x).unwrap().norm() < 1e-12);

        let stats4 = ClassStats {
            sigma_w: DenseArray::identity(d).scale(4.0),
            ..stats
        };
        let w = whiten(&stats4, &x).unwrap();
        assert!(w.sub(&x.scale(0.5)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn whitened_residual_covariance_is_identity() {
        // random SPD sigma_w, whitened within-class residuals ~ I at N = 1e5
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 3;
        let a = DenseArray::from_parts(
            vec![d, d],
            (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        // samples x = A g have covariance A A^T
        let n = 100_000;
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += a.at2(i, j) * g[j];
                }
                values.push(s);
            }
        }
        let x = DenseArray::from_parts(vec![n, d], values);
        let sigma = matmul(&a, &a.transpose2()).unwrap();
        let stats = ClassStats {
            mu: DenseArray::zeros(vec![2, d]),
            sigma_w: sigma,
            sigma_b: DenseArray::zeros(vec![d, d]),
            ridge: 0.0,
        };
        let wx = whiten(&stats, &x).unwrap();
        let cov = matmul(&wx.transpose2(), &wx).unwrap().scale(1.0 / n as f64);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov.at2(i, j) - want).abs() < 0.05,
                    "cov[{i}][{j}] = {}",
                    cov.at2(i, j)
                );
            }
        }
    }

    #[test]
    fn standardizer_postconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DenseArray::from_parts(
            vec![500, 4],
            (0..2000).map(|_| rng.gen_range(-3.0..5.0)).collect(),
        );
        let (z, s) = Standardizer::fit_apply(&x).unwrap();
        for j in 0..4 {
            let mean: f64 = (0..500).map(|i| z.at2(i, j)).sum::<f64>() / 500.0;
            let var: f64 = (0..500).map(|i| z.at2(i, j).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() <= 1e-10);
            assert!((var - 1.0).abs() <= 1e-10);
        }
        // idempotent on the fitting batch
        let (z2, _) = Standardizer::fit_apply(&z).unwrap();
        assert!(z2.sub(&z).unwrap().norm() / z.norm() < 1e-10);
        let _ = s;
    }

    #[test]
    fn standardizer_constant_coordinate_guard() {
        let x = DenseArray::from_parts(vec![3, 2], vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0]);
        let (z, s) = Standardizer::fit_apply(&x).unwrap();
        assert_eq!(s.std[0], 1.0);
        for i in 0..3 {
            assert_eq!(z.at2(i, 0), 0.0);
        }
    }

    #[test]
    fn prop1_identity_and_linear_preserve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let means: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let batch = gaussian_batch(&means, 2000, 0.7, 9);
        let id = prop1_check(&batch, &IdentityRep).unwrap();
        assert_eq!(id.fisher_before, id.fisher_after);

        // invertible linear map preserves the ratio
        let a = DenseArray::from_rows(&[
            &[1.0, 0.4, 0.0],
            &[0.0, 1.2, -0.3],
            &[0.2, 0.0, 0.9],
        ])
        .unwrap();
        let inv = invert3(&a);
        let rep = LinearRep { forward: a, inverse: inv };
        let r = prop1_check(&batch, &rep).unwrap();
        let rel = (r.fisher_after - r.fisher_before).abs() / r.fisher_before;
        assert!(rel < 1e-6, "invertible maps preserve the ratio: {rel}");
    }

    #[test]
    fn prop1_bad_witness_rejected() {
        struct Broken;
        impl InvertibleRep for Broken {
            fn apply_batch(&self, x: &DenseArray) -> Result<DenseArray> {
                Ok(x.clone())
            }
            fn invert_batch(&self, y: &DenseArray) -> Result<DenseArray> {
                Ok(y.scale(1.01))
            }
        }
        let batch = gaussian_batch(&[vec![1.0], vec![-1.0]], 50, 1.0, 10);
        match prop1_check(&batch, &Broken) {
            Err(Error::InvalidWitness { .. }) => {}
            other => panic!("expected InvalidWitness, got {other:?}"),
        }
    }

    fn invert3(a: &DenseArray) -> DenseArray {
        // adjugate inverse for the 3x3 test matrix
        let m = |i: usize, j: usize| a.at2(i, j);
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        let c = [
            m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1),
            m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2),
            m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1),
            m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2),
            m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0),
            m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2),
            m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0),
            m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1),
            m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        ];
        DenseArray::from_parts(vec![3, 3], c.iter().map(|v| v / det).collect())
    }

    #[test]
    fn projection_cases_of_the_linear_lemma() {
        // exact population stats: sigma_w = I, means along e1
        let mu = DenseArray::from_rows(&[&[1.5, 0.0, 0.0], &[-1.5, 0.0, 0.0]]).unwrap();
        let sigma_b = matmul(&mu.transpose2(), &mu).unwrap().scale(0.5);
        let stats = ClassStats {
            mu,
            sigma_w: DenseArray::identity(3),
            sigma_b,
            ridge: 0.0,
        };
        let before = fisher_ratio(&stats).unwrap();

        // projecting onto a subspace containing Sigma_W^{-1} mu_c preserves
        let keep = DenseArray::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        let kept = stats.linear_map(&keep).unwrap();
        let after_keep = fisher_ratio(&kept).unwrap();
        assert!((after_keep - before).abs() < 1e-9);

        // projecting onto the orthogonal complement of the mean direction kills it
        let drop = DenseArray::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        let dropped = stats.linear_map(&drop).unwrap();
        let after_drop = fisher_ratio(&dropped).unwrap();
        assert!(after_drop < before * 1e-6, "orthogonal projection wipes the ratio");
    }

    #[test]
    fn rectified_gaussian_mean_formula() {
        // E max(z, 0) = s / sqrt(2 pi) for z ~ N(0, s^2), within 3 SE
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = 1.7;
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            let v = (s * g).max(0.0);
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        let want = s / (2.0 * std::f64::consts::PI).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    }

    #[test]
    fn channelwise_reshape() {
        // 1 image, 2 channels, 2x1 spatial: positions become samples
        let f = DenseArray::from_parts(vec![1, 2, 2], vec![1.0, 2.0, 10.0, 20.0]);
        let b = channelwise_batch(&f, &[1], 3).unwrap_err();
        // class 1 has only 2 samples, class 0 none: builder rejects
        let _ = b;
        let f2 = DenseArray::from_parts(
            vec![2, 2, 2],
            vec![1.0, 2.0, 10.0, 20.0, 3.0, 4.0, 30.0, 40.0],
        );
        let b2 = channelwise_batch(&f2, &[0, 1], 2).unwrap();
        assert_eq!(b2.len(), 4);
        assert_eq!(b2.samples.row(0), &[1.0, 10.0]);
        assert_eq!(b2.samples.row(1), &[2.0, 20.0]);
        assert_eq!(b2.labels, vec![0, 0, 1, 1]);
    }
}
