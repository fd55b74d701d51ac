//! Shape-tagged row-major dense arrays, the numeric carrier for the whole crate.

use crate::error::{Error, Result};

/// Row-major dense array of `f64` with an explicit shape.
///
/// Invariants: the product of the shape equals the value count, and every
/// value is finite. Constructors enforce both.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseArray {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::dim("zero-length axis"));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::dim(format!(
                "shape {:?} holds {} values, got {}",
                shape,
                n,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("non-finite value in array"));
        }
        Ok(DenseArray { shape, values })
    }

    /// Construct without the finiteness scan. Shape consistency is still checked.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        DenseArray { shape, values }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        DenseArray {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        DenseArray::new(vec![n], values)
    }

    /// 2-D constructor from row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut values = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dim("ragged rows"));
            }
            values.extend_from_slice(row);
        }
        DenseArray::new(vec![r, c], values)
    }

    pub fn identity(n: usize) -> Self {
        let mut a = DenseArray::zeros(vec![n, n]);
        for i in 0..n {
            a.values[i * n + i] = 1.0;
        }
        a
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of rows of a 2-D array.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-D array.
    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.ndim(), 2);
        self.values[i * self.cols() + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.ndim(), 2);
        let c = self.cols();
        self.values[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.ndim(), 2);
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        debug_assert_eq!(self.ndim(), 2);
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(Error::dim(format!(
                "cannot reshape {} values into {:?}",
                self.values.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn transpose2(&self) -> DenseArray {
        assert_eq!(self.ndim(), 2, "transpose2 needs a matrix");
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.values[i * c + j];
            }
        }
        DenseArray::from_parts(vec![c, r], out)
    }

    pub fn scale(&self, s: f64) -> DenseArray {
        DenseArray::from_parts(
            self.shape.clone(),
            self.values.iter().map(|v| v * s).collect(),
        )
    }

    pub fn add(&self, other: &DenseArray) -> Result<DenseArray> {
        if self.shape != other.shape {
            return Err(Error::dim("shape mismatch in add"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseArray::from_parts(self.shape.clone(), values))
    }

    pub fn sub(&self, other: &DenseArray) -> Result<DenseArray> {
        if self.shape != other.shape {
            return Err(Error::dim("shape mismatch in sub"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseArray::from_parts(self.shape.clone(), values))
    }

    /// Euclidean norm of the flattened array.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseArray) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
