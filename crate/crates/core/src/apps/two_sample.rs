//! Kernel two-sample test thresholded by resampling the pooled sample.
//!
//! Every point is sketched once. A resampled pair `(P_j, Q_j)` only needs the
//! means of cached point sketches, so `q` trials cost `O(q (|P|+|Q|) m)`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::distance::exact_kappa;
use crate::error::{Error, Result};
use crate::feature_maps::gram_matrix;
use crate::point_set::PointSet;
use crate::seed::{derive_seed, table_rng, SeedTag};
use crate::sketchers::GaussianSketch;

pub const MIN_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMode {
    /// Both resampled sets drawn iid, with replacement, from `P ∪ Q`.
    #[default]
    IidWithReplacement,
    /// A random split of `P ∪ Q` into sets of sizes `|P|` and `|Q|`.
    Permutation,
}

impl fmt::Display for ResampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResampleMode::IidWithReplacement => "iid",
            ResampleMode::Permutation => "permutation",
        })
    }
}

impl FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" | "iid_with_replacement" => Ok(ResampleMode::IidWithReplacement),
            "permutation" => Ok(ResampleMode::Permutation),
            other => Err(Error::InvalidParameter(format!("unknown resample mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleResult {
    pub statistic: f64,
    pub threshold: f64,
    pub trials: usize,
    pub level: f64,
    pub reject: bool,
    pub resample_mode: ResampleMode,
    /// Statistic of each resampled pair, in trial order.
    pub trial_statistics: Vec<f64>,
}

/// Pool indices of `(P_j, Q_j)` for trial `trial`. Pool order is `P` then `Q`.
pub fn resample_indices(mode: ResampleMode, np: usize, nq: usize, seed: u64, trial: u64) -> (Vec<usize>, Vec<usize>) {
    let n = np + nq;
    let mut rng = table_rng(derive_seed(seed, SeedTag::Trial, trial));
    match mode {
        ResampleMode::IidWithReplacement => {
            let a = (0..np).map(|_| rng.random_range(0..n)).collect();
            let b = (0..nq).map(|_| rng.random_range(0..n)).collect();
            (a, b)
        }
        ResampleMode::Permutation => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let b = idx.split_off(np);
            (idx, b)
        }
    }
}

fn validate(p: &PointSet, q: &PointSet, trials: usize, level: f64) -> Result<()> {
    p.require_nonempty("first sample is empty")?;
    q.require_nonempty("second sample is empty")?;
    p.check_same_dim(q)?;
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0,1), got {level}")));
    }
    Ok(())
}

/// Empirical `(1 - level)` quantile: the `⌈(1-level)·q⌉`-th smallest value.
fn upper_quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((1.0 - level) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn mean_rows(rows: &[Vec<f64>], idx: &[usize], m: usize) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    for &i in idx {
        for (a, v) in acc.iter_mut().zip(&rows[i]) {
            *a += v;
        }
    }
    let inv = 1.0 / idx.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sketched two-sample test at significance `level` with `trials` resamples.
pub fn two_sample_test(
    p: &PointSet,
    q: &PointSet,
    trials: usize,
    level: f64,
    g: &GaussianSketch,
    mode: ResampleMode,
    seed: u64,
) -> Result<TwoSampleResult> {
    validate(p, q, trials, level)?;
    let pool = p.concat(q)?;
    let rows = g.sketch_points(&pool)?;
    let m = g.output_dim();
    let (np, nq) = (p.len(), q.len());
    let own_p: Vec<usize> = (0..np).collect();
    let own_q: Vec<usize> = (np..np + nq).collect();
    let statistic = sq_dist(&mean_rows(&rows, &own_p, m), &mean_rows(&rows, &own_q, m));
    let trial_statistics: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (a, b) = resample_indices(mode, np, nq, seed, t);
            sq_dist(&mean_rows(&rows, &a, m), &mean_rows(&rows, &b, m))
        })
        .collect();
    let threshold = upper_quantile(&trial_statistics, level);
    Ok(TwoSampleResult {
        statistic,
        threshold,
        trials,
        level,
        reject: statistic > threshold,
        resample_mode: mode,
        trial_statistics,
    })
}

/// The same test on exact `D²_K`, via the pooled Gram matrix. `O((|P|+|Q|)²)` per trial.
pub fn exact_two_sample_test(
    p: &PointSet,
    q: &PointSet,
    trials: usize,
    level: f64,
    mode: ResampleMode,
    seed: u64,
) -> Result<TwoSampleResult> {
    validate(p, q, trials, level)?;
    let pool = p.concat(q)?;
    let n = pool.len();
    let k = gram_matrix(&pool);
    let (np, nq) = (p.len(), q.len());
    let stat_of = |a: &[usize], b: &[usize]| {
        // accumulate signed weights per pool index so repeats are handled
        let mut w = vec![0.0; n];
        a.iter().for_each(|&i| w[i] += 1.0 / np as f64);
        b.iter().for_each(|&i| w[i] -= 1.0 / nq as f64);
        let mut total = 0.0;
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            let row = &k[i * n..(i + 1) * n];
            total += w[i] * row.iter().zip(&w).map(|(kk, wj)| kk * wj).sum::<f64>();
        }
        total.max(0.0)
    };
    let statistic = {
        let kpq = exact_kappa(p, q)?;
        (exact_kappa(p, p)? + exact_kappa(q, q)? - 2.0 * kpq).max(0.0)
    };
    let trial_statistics: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (a, b) = resample_indices(mode, np, nq, seed, t);
            stat_of(&a, &b)
        })
        .collect();
    let threshold = upper_quantile(&trial_statistics, level);
    Ok(TwoSampleResult {
        statistic,
        threshold,
        trials,
        level,
        reject: statistic > threshold,
        resample_mode: mode,
        trial_statistics,
    })
}
