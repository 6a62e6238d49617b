//! Synthetic clustered datasets for tests and benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::vecset::VectorSet;

/// Gaussian-blob dataset parameters. Tighter blobs share longer encoding
/// prefixes once quantized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub cluster_count: usize,
    pub cluster_stddev: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 || self.cluster_count == 0 {
            return Err(Error::ConfigError(
                "n, dim and cluster_count must be at least 1".into(),
            ));
        }
        if !(self.cluster_stddev > 0.0) || !self.cluster_stddev.is_finite() {
            return Err(Error::ConfigError(format!(
                "cluster_stddev must be positive and finite, got {}",
                self.cluster_stddev
            )));
        }
        Ok(())
    }
}

/// Draws `n` points from `cluster_count` Gaussian blobs with centers uniform
/// in the unit cube. Deterministic under the spec's seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<VectorSet> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let centers: Vec<f32> = (0..spec.cluster_count * spec.dim)
        .map(|_| rng.random::<f32>())
        .collect();
    let normal = Normal::new(0.0f64, spec.cluster_stddev)
        .map_err(|e| Error::ConfigError(format!("bad stddev: {e}")))?;

    let mut out = VectorSet::with_capacity(spec.dim, spec.n);
    let mut point = vec![0.0f32; spec.dim];
    for _ in 0..spec.n {
        let c = rng.random_range(0..spec.cluster_count);
        let center = &centers[c * spec.dim..(c + 1) * spec.dim];
        for (p, &base) in point.iter_mut().zip(center) {
            *p = base + normal.sample(&mut rng) as f32;
        }
        out.push(&point);
    }
    Ok(out)
}
