//! Random Fourier feature maps for a dictionary of Gaussian kernels.
//!
//! A Gaussian kernel `k(x, x') = exp(-|x - x'|^2 / (2 s2))` has spectral
//! measure `N(0, s2^-1 I)`. Drawing `D` frequencies `v_l` from it and mapping
//!
//! ```text
//! z(x) = D^-1/2 [sin(v_1.x), .., sin(v_D.x), cos(v_1.x), .., cos(v_D.x)]
//! ```
//!
//! gives `z(x).z(x') = D^-1 sum_l cos(v_l.(x - x'))`, an unbiased estimate of
//! `k(x, x')`. Every `z(x)` has unit norm.

use std::borrow::Borrow;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};

/// A Gaussian kernel, identified by its bandwidth `variance` (sigma^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    variance: f64,
}

impl KernelSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Parameter(format!(
                "kernel variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    /// Bandwidth of the `index`-th (1-based) kernel of the standard
    /// dictionary: `10^((index - 3) / 2)`.
    pub fn dictionary_entry(index: usize) -> Self {
        let exponent = (index as f64 - 3.0) / 2.0;
        Self {
            variance: 10f64.powf(exponent),
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Exact Gaussian kernel value `exp(-|x - x'|^2 / (2 sigma^2))`.
pub fn exact_kernel(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    check_dim(x.len(), x_prime.len(), "kernel arguments")?;
    let sq: f64 = x
        .iter()
        .zip(x_prime)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((-sq / (2.0 * spec.variance)).exp())
}

/// Frozen random frequencies realizing the feature map of one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    /// Row-major `num_features x input_dim`.
    frequencies: Vec<f64>,
    num_features: usize,
    input_dim: usize,
    kernel: KernelSpec,
    seed: u64,
}

impl FeatureMap {
    /// Draws `num_features` frequencies for `kernel` from a generator seeded
    /// with `seed`. The same arguments always give the same frequencies.
    pub fn sample(kernel: KernelSpec, input_dim: usize, num_features: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Parameter("input dimension must be at least 1".into()));
        }
        if num_features == 0 {
            return Err(Error::Parameter("number of random features must be at least 1".into()));
        }
        let normal = Normal::new(0.0, kernel.variance.sqrt().recip())
            .map_err(|e| Error::Parameter(e.to_string()))?;
        let mut rng = rng_from_seed(seed);
        let frequencies = (0..num_features * input_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Ok(Self {
            frequencies,
            num_features,
            input_dim,
            kernel,
            seed,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Length of the feature vector, `2 * num_features`.
    pub fn output_dim(&self) -> usize {
        2 * self.num_features
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Frequency vector `v_l` (0-based `l`).
    pub fn frequency(&self, l: usize) -> &[f64] {
        &self.frequencies[l * self.input_dim..(l + 1) * self.input_dim]
    }

    /// All frequencies, row-major.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Writes `z(x)` into `out`, which must have length `2 * num_features`.
    pub fn feature_vector_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.input_dim, x.len(), "feature map input")?;
        check_dim(self.output_dim(), out.len(), "feature map output")?;
        let scale = (self.num_features as f64).sqrt().recip();
        let (sin_block, cos_block) = out.split_at_mut(self.num_features);
        for (l, row) in self.frequencies.chunks_exact(self.input_dim).enumerate() {
            let phase: f64 = row.iter().zip(x).map(|(v, xi)| v * xi).sum();
            let (s, c) = phase.sin_cos();
            sin_block[l] = scale * s;
            cos_block[l] = scale * c;
        }
        Ok(())
    }

    /// `z(x)`, a vector of length `2 * num_features`.
    pub fn feature_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim()];
        self.feature_vector_into(x, &mut out)?;
        Ok(out)
    }
}

/// Builds the `num_kernels` Gaussian feature maps of the standard
/// dictionary. Map `i` (0-based) uses bandwidth `10^((i - 2) / 2)` and a seed
/// derived from `seed` and `i`.
pub fn build_dictionary(
    num_kernels: usize,
    input_dim: usize,
    num_features: usize,
    seed: u64,
) -> Result<Vec<FeatureMap>> {
    if num_kernels == 0 {
        return Err(Error::Parameter("dictionary needs at least one kernel".into()));
    }
    (0..num_kernels)
        .map(|i| {
            FeatureMap::sample(
                KernelSpec::dictionary_entry(i + 1),
                input_dim,
                num_features,
                derive_seed(seed, &[i as u64]),
            )
        })
        .collect()
}

/// Precomputed feature vectors of every sample under every kernel.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    /// One row-major `num_samples x output_dim` block per kernel.
    blocks: Vec<Vec<f64>>,
    widths: Vec<usize>,
}

impl FeatureCache {
    pub fn build<'a, M, I>(maps: &[M], rows: I) -> Result<Self>
    where
        M: Borrow<FeatureMap>,
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let mut blocks = Vec::with_capacity(maps.len());
        for map in maps.iter().map(Borrow::borrow) {
            let width = map.output_dim();
            let mut block = vec![0.0; rows.len() * width];
            for (row, out) in rows.iter().zip(block.chunks_exact_mut(width)) {
                map.feature_vector_into(row, out)?;
            }
            blocks.push(block);
        }
        Ok(Self {
            widths: maps.iter().map(|m| m.borrow().output_dim()).collect(),
            blocks,
        })
    }

    /// Cached `z_kernel(x_sample)`.
    pub fn features(&self, kernel: usize, sample: usize) -> &[f64] {
        let w = self.widths[kernel];
        &self.blocks[kernel][sample * w..(sample + 1) * w]
    }

    pub fn num_kernels(&self) -> usize {
        self.blocks.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_bandwidths() {
        let maps = build_dictionary(10, 2, 3, 0).unwrap();
        assert!((maps[0].kernel().variance() - 0.1).abs() < 1e-15);
        assert_eq!(maps[2].kernel().variance(), 1.0);
        for pair in maps.windows(2) {
            assert!(pair[0].kernel().variance() < pair[1].kernel().variance());
        }
        assert!((maps[9].kernel().variance() - 10f64.powf(3.5)).abs() < 1e-9);
    }

    #[test]
    fn dictionary_rejects_zero_sizes() {
        assert!(matches!(build_dictionary(0, 2, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(build_dictionary(1, 0, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(build_dictionary(1, 2, 0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn same_seed_same_frequencies() {
        let a = build_dictionary(1, 2, 4, 7).unwrap();
        let b = build_dictionary(1, 2, 4, 7).unwrap();
        assert_eq!(a[0].frequencies(), b[0].frequencies());
        let c = build_dictionary(1, 2, 4, 8).unwrap();
        assert_ne!(a[0].frequencies(), c[0].frequencies());
    }

    #[test]
    fn kernels_in_one_dictionary_use_distinct_draws() {
        let maps = build_dictionary(2, 3, 5, 1).unwrap();
        assert_ne!(maps[0].seed(), maps[1].seed());
    }

    #[test]
    fn origin_maps_to_cos_block() {
        let map = FeatureMap::sample(KernelSpec::new(1.0).unwrap(), 3, 4, 11).unwrap();
        let z = map.feature_vector(&[0.0; 3]).unwrap();
        assert!(z[..4].iter().all(|&v| v == 0.0));
        assert!(z[4..].iter().all(|&v| v == 0.5));
        assert_eq!(z.iter().map(|v| v * v).sum::<f64>(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let map = FeatureMap::sample(KernelSpec::new(1.0).unwrap(), 3, 4, 11).unwrap();
        assert!(matches!(map.feature_vector(&[0.0; 2]), Err(Error::Parameter(_))));
        let spec = KernelSpec::new(1.0).unwrap();
        assert!(exact_kernel(&spec, &[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn exact_kernel_values() {
        let one = KernelSpec::new(1.0).unwrap();
        assert_eq!(exact_kernel(&one, &[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
        // |x - x'|^2 = 2
        let v = exact_kernel(&one, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        let narrow = KernelSpec::new(0.1).unwrap();
        let v = exact_kernel(&narrow, &[1.0], &[0.0]).unwrap();
        assert!((v - (-5f64).exp()).abs() < 1e-15);
        assert!((v - 0.006738).abs() < 1e-6);
    }

    #[test]
    fn kernel_spec_rejects_nonpositive_variance() {
        assert!(KernelSpec::new(0.0).is_err());
        assert!(KernelSpec::new(-1.0).is_err());
        assert!(KernelSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn cache_matches_direct_evaluation() {
        let maps = build_dictionary(3, 2, 5, 3).unwrap();
        let rows = [[0.1, 0.2], [-1.0, 0.5], [2.0, 2.0]];
        let cache = FeatureCache::build(&maps, rows.iter().map(|r| &r[..])).unwrap();
        for (k, map) in maps.iter().enumerate() {
            for (s, row) in rows.iter().enumerate() {
                assert_eq!(cache.features(k, s), map.feature_vector(row).unwrap().as_slice());
            }
        }
    }
}
