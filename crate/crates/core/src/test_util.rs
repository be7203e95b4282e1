use rand::Rng;

use crate::seed::table_rng;

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = table_rng(seed ^ 0x5EED_0000);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
