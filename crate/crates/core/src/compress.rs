//! JL post-compression of embeddings and the median-of-replicas estimator.

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::planner::PlannedConfig;
use crate::point_set::PointSet;
use crate::seed::{derive_seed, table_rng, SeedTag};
use crate::sketchers::{Embedding, Fingerprint, GaussianSketch};

/// Dense `ρ × m` matrix of independent `±1/√ρ` entries.
#[derive(Debug, Clone)]
pub struct JlProjector {
    in_dim: usize,
    out_dim: usize,
    seed: u64,
    // row-major out_dim x in_dim
    entries: Vec<f64>,
}

impl JlProjector {
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParameter("projection dimensions must be positive".into()));
        }
        let scale = 1.0 / (out_dim as f64).sqrt();
        let mut rng = table_rng(seed);
        let entries = (0..in_dim * out_dim)
            .map(|_| if rng.random::<bool>() { scale } else { -scale })
            .collect();
        Ok(Self {
            in_dim,
            out_dim,
            seed,
            entries,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("projection input", self.in_dim, v.len())?;
        Ok(self
            .entries
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Projects an embedding; the result carries a fingerprint binding the
    /// source sketch and this projector.
    pub fn project_embedding(&self, e: &Embedding) -> Result<Embedding> {
        Ok(Embedding {
            vector: self.project(&e.vector)?,
            fingerprint: self.compose_fingerprint(e.fingerprint),
            count: e.count,
        })
    }

    pub fn compose_fingerprint(&self, base: Fingerprint) -> Fingerprint {
        let mut h = Sha256::new();
        h.update(base.0);
        h.update(b"JL");
        h.update((self.in_dim as u64).to_le_bytes());
        h.update((self.out_dim as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        Fingerprint(h.finalize().into())
    }
}

/// Middle order statistic of an odd-length list.
pub fn median_estimate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median of no values"));
    }
    if values.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "median needs an odd number of values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("median of NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[sorted.len() / 2])
}

/// Replica estimates and their median.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedEstimate {
    pub median: f64,
    pub values: Vec<f64>,
}

/// Runs `replicas` independent sketch pipelines (fresh sketch and, when
/// `jl_dim` is set, fresh projector per replica) and takes the median of the
/// squared distances.
pub fn replicated_sketched_dk2(
    plan: &PlannedConfig,
    master_seed: u64,
    replicas: usize,
    jl_dim: Option<usize>,
    p: &PointSet,
    q: &PointSet,
) -> Result<ReplicatedEstimate> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("replica count must be positive".into()));
    }
    let values = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let g = GaussianSketch::from_plan(plan, derive_seed(master_seed, SeedTag::Replica, r))?;
            let fp = g.embed_set(p)?;
            let fq = g.embed_set(q)?;
            match jl_dim {
                None => fp.squared_distance(&fq),
                Some(rho) => {
                    let proj = JlProjector::new(g.output_dim(), rho, derive_seed(master_seed, SeedTag::Projector, r))?;
                    proj.project_embedding(&fp)?.squared_distance(&proj.project_embedding(&fq)?)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicatedEstimate {
        median: median_estimate(&values)?,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{mean_and_stderr, random_vec};

    #[test]
    fn zero_and_linearity() {
        let p = JlProjector::new(20, 8, 1).unwrap();
        assert_eq!(p.project(&[0.0; 20]).unwrap(), vec![0.0; 8]);
        let u = random_vec(20, 1);
        let v = random_vec(20, 2);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let (pu, pv, pm) = (p.project(&u).unwrap(), p.project(&v).unwrap(), p.project(&mix).unwrap());
        for j in 0..8 {
            assert!((pm[j] - (2.0 * pu[j] - 3.0 * pv[j])).abs() < 1e-12);
        }
        assert!(p.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn isometry_in_expectation() {
        let v = random_vec(30, 4);
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let samples: Vec<f64> = (0..10_000u64)
            .map(|s| JlProjector::new(30, 6, s).unwrap().project(&v).unwrap().iter().map(|x| x * x).sum())
            .collect();
        let (mean, se) = mean_and_stderr(&samples);
        assert!((mean - norm2).abs() <= 3.0 * se);
    }

    #[test]
    fn pairwise_distance_preserved_often() {
        let eps = 0.5;
        let (rho, _) = crate::planner::jl_plan(eps, 0.5, 8.0, 1.0).unwrap();
        let a = random_vec(128, 1);
        let b = random_vec(128, 2);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let want: f64 = diff.iter().map(|x| x * x).sum();
        let ok = (0..300u64)
            .filter(|&s| {
                let p = JlProjector::new(128, rho, s).unwrap();
                let got: f64 = p.project(&diff).unwrap().iter().map(|x| x * x).sum();
                (got - want).abs() <= eps * want
            })
            .count();
        assert!(ok as f64 / 300.0 >= 2.0 / 3.0, "{ok}");
    }

    #[test]
    fn median_values() {
        assert_eq!(median_estimate(&[4.5]).unwrap(), 4.5);
        assert_eq!(median_estimate(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(median_estimate(&[]).is_err());
        assert!(median_estimate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn compressed_fingerprint_differs() {
        let e = Embedding {
            vector: random_vec(16, 1),
            fingerprint: Fingerprint([7; 32]),
            count: 3,
        };
        let p = JlProjector::new(16, 4, 0).unwrap();
        let c = p.project_embedding(&e).unwrap();
        assert_ne!(c.fingerprint, e.fingerprint);
        assert!(c.squared_distance(&e).is_err());
        assert_eq!(c.count, 3);
    }
}
