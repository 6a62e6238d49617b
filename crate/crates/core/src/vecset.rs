//! Flat storage for fixed-dimension vector collections.

use crate::error::{Error, Result};

/// A set of `len` vectors of dimensionality `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimensionality must be positive");
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, len: usize) -> Self {
        assert!(dim > 0, "dimensionality must be positive");
        Self {
            dim,
            data: Vec::with_capacity(dim * len),
        }
    }

    /// Wraps a row-major buffer. Fails if the length is not a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::ConfigError(format!(
                "flat buffer of {} values does not hold whole vectors of dim {}",
                data.len(),
                dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push(&mut self, v: &[f32]) {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        self.data.extend_from_slice(v);
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Checks that every coordinate is finite.
    pub fn validate_finite(&self) -> Result<()> {
        for (i, v) in self.iter().enumerate() {
            if let Some(j) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidVector(format!(
                    "non-finite value at vector {i}, coordinate {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Squared Euclidean distance, accumulated in f64.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = (*x - *y) as f64;
        acc += d * d;
    }
    acc
}
