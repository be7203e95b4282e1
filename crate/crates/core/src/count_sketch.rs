//! CountSketch: the seeded bucket-and-sign hashing map `R^n -> R^m`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::seed::table_rng;

/// A seeded linear map `x -> S x` where column `i` of `S` is `signs[i] * e_{buckets[i]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketchMap {
    input_dim: usize,
    output_dim: usize,
    buckets: Vec<usize>,
    signs: Vec<f64>,
    seed: u64,
}

impl CountSketchMap {
    /// Draws a map with fully independent buckets and signs from `seed`.
    pub fn new(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        validate_dims(input_dim, output_dim)?;
        let mut rng = table_rng(seed);
        let buckets = (0..input_dim)
            .map(|_| rng.random_range(0..output_dim))
            .collect();
        let signs = (0..input_dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(Self {
            input_dim,
            output_dim,
            buckets,
            signs,
            seed,
        })
    }

    /// Draws a sign-and-permute map `R^m -> R^m`: buckets form a uniformly
    /// random permutation.
    pub fn permutation(dim: usize, seed: u64) -> Result<Self> {
        validate_dims(dim, dim)?;
        let mut rng = table_rng(seed);
        let mut buckets: Vec<usize> = (0..dim).collect();
        buckets.shuffle(&mut rng);
        let signs = (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(Self {
            input_dim: dim,
            output_dim: dim,
            buckets,
            signs,
            seed,
        })
    }

    /// Builds a map from explicit tables. The seed is recorded as 0.
    pub fn from_tables(output_dim: usize, buckets: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let input_dim = buckets.len();
        validate_dims(input_dim, output_dim)?;
        check_len("count sketch signs", input_dim, signs.len())?;
        if let Some(&b) = buckets.iter().find(|&&b| b >= output_dim) {
            return Err(Error::InvalidParameter(format!(
                "bucket {b} out of range for output dimension {output_dim}"
            )));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidParameter("signs must be +1 or -1".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            buckets,
            signs,
            seed: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `S x` into `out`, overwriting its contents.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("count sketch input", self.input_dim, x.len())?;
        check_len("count sketch output", self.output_dim, out.len())?;
        out.fill(0.0);
        for ((&b, &s), &v) in self.buckets.iter().zip(&self.signs).zip(x) {
            out[b] += s * v;
        }
        Ok(())
    }
}

fn validate_dims(input_dim: usize, output_dim: usize) -> Result<()> {
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "count sketch dimensions must be positive, got {input_dim}->{output_dim}"
        )));
    }
    Ok(())
}
