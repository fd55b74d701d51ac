//! Dense linear-algebra kernel: matrix product, symmetric eigendecomposition,
//! Cholesky solves, and Gram-spectrum bounds for frame validation.

use rayon::prelude::*;

use crate::array::DenseArray;
use crate::error::{Error, Result};

/// Minimum row count before the product is split across worker threads.
const PAR_ROWS: usize = 256;

pub(crate) fn gemm_into(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let run = |rows: usize, a_off: &[f64], c_chunk: &mut [f64]| unsafe {
        matrixmultiply::dgemm(
            rows,
            k,
            n,
            1.0,
            a_off.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c_chunk.as_mut_ptr(),
            n as isize,
            1,
        );
    };
    if m >= PAR_ROWS && m * k * n > 1 << 22 {
        // fixed-size row blocks; the partition does not depend on worker count
        let chunk = PAR_ROWS;
        c.par_chunks_mut(chunk * n)
            .enumerate()
            .for_each(|(i, cc)| {
                let r0 = i * chunk;
                let rows = cc.len() / n;
                run(rows, &a[r0 * k..], cc);
            });
    } else {
        run(m, a, c);
    }
}

/// Exact dense matrix product of two 2-D arrays.
pub fn matmul(a: &DenseArray, b: &DenseArray) -> Result<DenseArray> {
    if a.ndim() != 2 || b.ndim() != 2 {
        return Err(Error::dim("matmul expects 2-D arrays"));
    }
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::dim(format!(
            "inner dimensions disagree: {m}x{k} times {k2}x{n}"
        )));
    }
    let mut c = vec![0.0; m * n];
    gemm_into(m, k, n, a.values(), b.values(), 0.0, &mut c);
    Ok(DenseArray::from_parts(vec![m, n], c))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and, when `want_vectors`, the matrix
/// whose columns are the corresponding eigenvectors.
pub fn sym_eig(mat: &DenseArray, want_vectors: bool) -> Result<(Vec<f64>, Option<DenseArray>)> {
    if mat.ndim() != 2 || mat.rows() != mat.cols() {
        return Err(Error::dim("sym_eig expects a square matrix"));
    }
    if !mat.all_finite() {
        return Err(Error::numeric("non-finite entries in sym_eig input"));
    }
    let n = mat.rows();
    let mut a = mat.values().to_vec();
    let mut v = if want_vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };
    let scale: f64 = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-14 * scale * n as f64;

    for _sweep in 0..60 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                if let Some(vv) = v.as_mut() {
                    for i in 0..n {
                        let vip = vv[i * n + p];
                        let viq = vv[i * n + q];
                        vv[i * n + p] = c * vip - s * viq;
                        vv[i * n + q] = s * vip + c * viq;
                    }
                }
            }
        }
    }
    if off(&a) > tol * 16.0 {
        return Err(Error::numeric("Jacobi eigensolver did not converge"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| eig[i].partial_cmp(&eig[j]).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| eig[i]).collect();
    let vectors = v.map(|vv| {
        let mut out = vec![0.0; n * n];
        for (newc, &oldc) in order.iter().enumerate() {
            for r in 0..n {
                out[r * n + newc] = vv[r * n + oldc];
            }
        }
        DenseArray::from_parts(vec![n, n], out)
    });
    Ok((eigs, vectors))
}

/// Smallest and largest eigenvalue of `F^T F`. The singular values of `F` are
/// the square roots of these bounds.
pub fn gram_spectrum_bounds(f: &DenseArray) -> Result<(f64, f64)> {
    if f.ndim() != 2 {
        return Err(Error::dim("gram_spectrum_bounds expects a matrix"));
    }
    if !f.all_finite() {
        return Err(Error::numeric("non-finite entries"));
    }
    let gram = matmul(&f.transpose2(), f)?;
    let (eigs, _) = sym_eig(&gram, false)?;
    Ok((eigs[0], eigs[eigs.len() - 1]))
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor L with A = L L^T.
pub fn cholesky(a: &DenseArray) -> Result<DenseArray> {
    let n = a.rows();
    if a.ndim() != 2 || a.cols() != n {
        return Err(Error::dim("cholesky expects a square matrix"));
    }
    let src = a.values();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = src[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::numeric(format!(
                        "matrix not positive definite at pivot {i} ({s:.3e})"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(DenseArray::from_parts(vec![n, n], l))
}

/// Solve A x = b for SPD A given its Cholesky factor.
pub fn cholesky_solve(l: &DenseArray, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    debug_assert_eq!(b.len(), n);
    let lv = l.values();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= lv[i * n + k] * y[k];
        }
        y[i] /= lv[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= lv[k * n + i] * y[k];
        }
        y[i] /= lv[i * n + i];
    }
    y
}

/// Rows form an orthonormal set: Q Q^T = I_rows, from a QR factorization of a
/// Gaussian draw. `rows <= cols` required.
pub fn random_orthonormal_rows(rows: usize, cols: usize, seed: u64) -> Result<DenseArray> {
    if rows > cols {
        return Err(Error::config("need rows <= cols for orthonormal rows"));
    }
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(rows);
    while q.len() < rows {
        let mut v: Vec<f64> = (0..cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        // modified Gram-Schmidt against accepted rows, twice for stability
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
        }
        let nrm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        q.push(v);
    }
    let values: Vec<f64> = q.into_iter().flatten().collect();
    Ok(DenseArray::from_parts(vec![rows, cols], values))
}
