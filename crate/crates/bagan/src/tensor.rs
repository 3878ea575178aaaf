//! Dense row-major tensors over `f32`/`f64` plus the three matrix kernels
//! every layer is built from.
//!
//! Training runs in `f32`; `f64` is available so gradient checks and the
//! latent-distribution fit can be verified at tighter tolerances.

use crate::error::{Error, Result};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Floating-point element type for tensors: `f32` (default) or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants and cross-precision code.
    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }
    /// Lossless widening to `f64`.
    fn to_f64c(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shape + row-major data. `product(shape) == data.len()` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Zero-filled tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![S::zero(); shape.iter().product()] }
    }

    /// Tensor filled with one value.
    pub fn full(shape: &[usize], value: S) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    /// Wraps existing data; errors if the element count does not match.
    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} holds {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Reinterprets the shape without touching data; element count must match.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {} elements to {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with the given context when any element is NaN/Inf.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    /// Largest absolute element difference; tensors must share a shape.
    pub fn max_abs_diff(&self, other: &Tensor<S>) -> S {
        assert_eq!(self.shape, other.shape, "max_abs_diff requires equal shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), |acc, d| if d > acc { d } else { acc })
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &Tensor<S>) {
        assert_eq!(self.shape, other.shape, "add_assign requires equal shapes");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// `self *= factor` elementwise.
    pub fn scale(&mut self, factor: S) {
        for a in self.data.iter_mut() {
            *a *= factor;
        }
    }

    /// Elementwise cast to another scalar type (via `f64`).
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64c(v.to_f64c())).collect(),
        }
    }

    /// Copy of rows `start..end` along the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor<S> {
        let rows = self.shape.first().copied().unwrap_or(0);
        assert!(start <= end && end <= rows, "row slice {start}..{end} out of {rows}");
        let row_numel = if rows == 0 { 0 } else { self.numel() / rows };
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Tensor { shape, data: self.data[start * row_numel..end * row_numel].to_vec() }
    }

    /// Concatenation of two tensors along the leading axis; trailing axes
    /// must agree.
    pub fn concat_rows(&self, other: &Tensor<S>) -> Tensor<S> {
        assert_eq!(self.shape[1..], other.shape[1..], "concat_rows requires equal trailing axes");
        let mut shape = self.shape.clone();
        shape[0] += other.shape[0];
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor { shape, data }
    }
}

/// `C[m×n] = A[m×k] · B[k×n]`, row-major. i-k-j loop order so the inner loop
/// is a contiguous axpy over rows of `B`.
pub fn matmul<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == S::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += aip * *bv;
            }
        }
    }
    c
}

/// `C[m×n] = Aᵀ · B` where `A` is `[k×m]` and `B` is `[k×n]`.
pub fn matmul_at_b<S: Scalar>(a: &[S], b: &[S], k: usize, m: usize, n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let aip = arow[i];
            if aip == S::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += aip * *bv;
            }
        }
    }
    c
}

/// `C[m×n] = A · Bᵀ` where `A` is `[m×k]` and `B` is `[n×k]`.
pub fn matmul_a_bt<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for (av, bv) in arow.iter().zip(brow) {
                acc += *av * *bv;
            }
            c[i * n + j] = acc;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_element_count() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn matmul_matches_hand_computed_2x2() {
        // [1 2; 3 4] · [5 6; 7 8] = [19 22; 43 50]
        let a = vec![1.0f64, 2.0, 3.0, 4.0];
        let b = vec![5.0, 6.0, 7.0, 8.0];
        assert_eq!(matmul(&a, &b, 2, 2, 2), vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_kernels_agree_with_plain_matmul() {
        // Check Aᵀ·B and A·Bᵀ against matmul applied to explicit transposes.
        let m = 3;
        let k = 4;
        let n = 2;
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64) * 0.7 - 2.0).collect();
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        assert_eq!(matmul_at_b(&at, &b, k, m, n), matmul(&a, &b, m, k, n));
        assert_eq!(matmul_a_bt(&a, &bt, m, k, n), matmul(&a, &b, m, k, n));
    }

    #[test]
    fn check_finite_flags_nan() {
        let t = Tensor::<f32>::from_vec(&[2], vec![1.0, f32::NAN]).unwrap();
        assert!(t.check_finite("test").is_err());
        assert!(Tensor::<f32>::zeros(&[2]).check_finite("test").is_ok());
    }

    #[test]
    fn cast_round_trips_f32_through_f64() {
        let t = Tensor::<f32>::from_vec(&[3], vec![0.5, -1.25, 3.0]).unwrap();
        let back: Tensor<f32> = t.cast::<f64>().cast();
        assert_eq!(t, back);
    }
}
