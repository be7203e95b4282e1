//! Empirical variance of the recursive tensor sketch inner product.
//!
//! Used to pick the variance constant `C` in `m = C·k/ε²`: the normalized
//! variance `Var⟨T(u),T(v)⟩ / (‖u‖²‖v‖²)` must stay below `ε²/10`.

use rayon::prelude::*;

use crate::error::Result;
use crate::seed::{derive_seed, table_rng, SeedTag};
use crate::tensor_sketch::RecursiveTensorSketchMap;
use rand::Rng;

/// Factor dimension of the rank-1 test tensors.
pub const CALIBRATION_FACTOR_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub degree: usize,
    pub sketch_dim: usize,
    pub same_input: bool,
    pub trials: usize,
    pub mean: f64,
    pub target: f64,
    /// Sample variance divided by `‖u‖²‖v‖²`.
    pub normalized_variance: f64,
    /// `ε²/10`.
    pub bound: f64,
}

impl VarianceReport {
    pub fn passes(&self) -> bool {
        self.normalized_variance <= self.bound
    }
}

fn unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = table_rng(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Measures the variance of `⟨T(a^{⊗k}), T(b^{⊗k})⟩` over `trials` sketch draws,
/// with `m = ⌈C·k/ε²⌉` rounded to a power of two. `b = a` when `same_input`.
pub fn measure_variance(
    degree: usize,
    epsilon: f64,
    constant: f64,
    same_input: bool,
    trials: usize,
    seed: u64,
) -> Result<VarianceReport> {
    let m = (constant * degree as f64 / (epsilon * epsilon)).ceil() as usize;
    let a = unit_vector(CALIBRATION_FACTOR_DIM, derive_seed(seed, SeedTag::Data, 0));
    let b = if same_input {
        a.clone()
    } else {
        unit_vector(CALIBRATION_FACTOR_DIM, derive_seed(seed, SeedTag::Data, 1))
    };
    let target = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().powi(degree as i32);
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = RecursiveTensorSketchMap::new(CALIBRATION_FACTOR_DIM, m, degree, derive_seed(seed, SeedTag::Trial, t))?;
            let su = ts.apply_power(&a)?;
            let sv = ts.apply_power(&b)?;
            Ok(su.iter().zip(&sv).map(|(x, y)| x * y).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(VarianceReport {
        degree,
        sketch_dim: m.next_power_of_two(),
        same_input,
        trials,
        mean,
        target,
        normalized_variance: var,
        bound: epsilon * epsilon / 10.0,
    })
}
