use std::fmt;

use serde::{Deserialize, Serialize};

use super::AutodiffError;
use crate::scalar::Real;

/// Dense row-major tensor of rank 0, 1 or 2.
///
/// Construction rejects non-finite values, so every tensor reachable from a
/// tape is finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.values)
    }
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self, AutodiffError> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(AutodiffError::BadShape {
                shape,
                len: values.len(),
            });
        }
        if shape.len() > 2 {
            return Err(AutodiffError::InvalidArgument(format!(
                "rank {} tensors are not supported",
                shape.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: "construct" });
        }
        Ok(Self { shape, values })
    }

    /// Internal constructor for kernel outputs whose shape is known to be
    /// consistent; finiteness is still enforced.
    pub(crate) fn from_kernel(
        op: &'static str,
        shape: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, AutodiffError> {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { op });
        }
        Ok(Self { shape, values })
    }

    pub fn scalar(v: T) -> Result<Self, AutodiffError> {
        Self::new(Vec::new(), vec![v])
    }

    pub fn vector(values: Vec<T>) -> Result<Self, AutodiffError> {
        Self::new(vec![values.len()], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<T>) -> Result<Self, AutodiffError> {
        Self::new(vec![rows, cols], values)
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![v; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, T::one())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// True for rank-0 tensors and any tensor holding exactly one value.
    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    pub fn item(&self) -> T {
        self.values[0]
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            1 => 1,
            _ => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => 1,
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Bitwise equality of shape and values.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.bits() == b.bits())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.values.iter().map(|&v| f(v)).collect()
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn matmul_values<T: Real>(
    a: &[T],
    b: &[T],
    n: usize,
    k: usize,
    m: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &b[p * m..(p + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + aip * bv;
            }
        }
    }
    out
}

pub(crate) fn transpose_values<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

pub(crate) fn softmax_values<T: Real>(x: &[T]) -> Vec<T> {
    let max = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn log_softmax_values<T: Real>(x: &[T]) -> Vec<T> {
    let max = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = x.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    x.iter().map(|&v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        assert!(matches!(
            Tensor::vector(vec![1.0, f64::NAN]),
            Err(AutodiffError::NonFinite { .. })
        ));
        assert!(Tensor::<f64>::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::<f64>::new(vec![1, 1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn log_softmax_is_stable_at_large_gaps() {
        let v = log_softmax_values(&[20.0f64, -20.0, -20.0]);
        assert!(v[0].abs() < 1e-8);
        assert!((v[1] + 40.0).abs() < 1e-8);
        let big = log_softmax_values(&[1000.0f64, 0.0]);
        assert!(big.iter().all(|v| v.is_finite()));
    }
}
