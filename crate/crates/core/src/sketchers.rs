//! The two drawn Gaussian-kernel sketches and the point-set mean embedding.
//!
//! * [`GaussianSketchLowD`]: `G(x) = T(y(x_1) ⊗ ... ⊗ y(x_d))`, one recursive
//!   tensor sketch of degree `d` over the truncated Taylor factors.
//! * [`GaussianSketchHighD`]: block `j` is `sqrt(2^(j-1)/(j-1)!) exp(-‖x‖²) T_j(x^{⊗(j-1)})`
//!   for `j = 1..=s`, blocks concatenated.
//!
//! A point set maps to the mean of its point sketches, so
//! `‖F(P) - F(Q)‖²` estimates the squared kernel distance.

use std::fmt;

use log::warn;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::feature_maps::{hd_level, taylor_factor};
use crate::planner::{PlannedConfig, Variant};
use crate::point_set::PointSet;
use crate::seed::{derive_seed, SeedTag};
use crate::tensor_sketch::RecursiveTensorSketchMap;

pub const SKETCH_MAGIC: &[u8; 8] = b"GSKETCH1";
pub const SKETCH_FORMAT_VERSION: u32 = 1;

/// Points per reduction chunk; fixed so results do not depend on thread count.
pub const REDUCTION_CHUNK: usize = 64;

/// SHA-256 of a sketch's canonical header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Everything that fixes one drawn sketch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchConfig {
    pub variant: Variant,
    pub dimension: usize,
    pub truncation_order: usize,
    /// Power-of-two block dimensions: `[m]` for GS, `[m_1..m_s]` for HD.
    pub dims: Vec<usize>,
    pub seed: u64,
}

impl SketchConfig {
    pub fn new(variant: Variant, dimension: usize, s: usize, dims: &[usize], seed: u64) -> Result<Self> {
        if dimension == 0 || s == 0 {
            return Err(Error::InvalidParameter("dimension and truncation order must be positive".into()));
        }
        let want = match variant {
            Variant::Gs => 1,
            Variant::Hd => s,
        };
        check_len("sketch block count", want, dims.len())?;
        if dims.iter().any(|&m| m == 0 || m > u32::MAX as usize) {
            return Err(Error::InvalidParameter("sketch dimensions must be in 1..2^32".into()));
        }
        Ok(Self {
            variant,
            dimension,
            truncation_order: s,
            dims: dims.iter().map(|m| m.next_power_of_two()).collect(),
            seed,
        })
    }

    pub fn from_plan(plan: &PlannedConfig, seed: u64) -> Result<Self> {
        Self::new(plan.variant, plan.dimension, plan.truncation_order, &plan.dims, seed)
    }

    pub fn output_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Little-endian header fields preceding the fingerprint in the sketch file.
    pub fn header_prefix(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(8 + 4 + 1 + 8 + 4 * self.dims.len() + 8);
        buf.extend_from_slice(SKETCH_MAGIC);
        buf.extend_from_slice(&SKETCH_FORMAT_VERSION.to_le_bytes());
        buf.push(self.variant.code());
        buf.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        buf.extend_from_slice(&(self.truncation_order as u32).to_le_bytes());
        for &m in &self.dims {
            buf.extend_from_slice(&(m as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(Sha256::digest(self.header_prefix()).into())
    }
}

/// Low-dimensional sketch: one degree-`d` tensor sketch over `s`-term Taylor factors.
#[derive(Debug, Clone)]
pub struct GaussianSketchLowD {
    config: SketchConfig,
    rts: RecursiveTensorSketchMap,
    fingerprint: Fingerprint,
}

impl GaussianSketchLowD {
    pub fn new(dimension: usize, s: usize, m: usize, seed: u64) -> Result<Self> {
        Self::from_config(SketchConfig::new(Variant::Gs, dimension, s, &[m], seed)?)
    }

    fn from_config(config: SketchConfig) -> Result<Self> {
        let rts = RecursiveTensorSketchMap::new(
            config.truncation_order,
            config.dims[0],
            config.dimension,
            derive_seed(config.seed, SeedTag::LowD, 0),
        )?;
        let fingerprint = config.fingerprint();
        Ok(Self {
            config,
            rts,
            fingerprint,
        })
    }

    pub fn tensor_sketch(&self) -> &RecursiveTensorSketchMap {
        &self.rts
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("sketch input", self.config.dimension, x.len())?;
        let factors: Vec<Vec<f64>> = x.iter().map(|&t| taylor_factor(t, self.config.truncation_order).coords).collect();
        self.rts.apply_rank1(&factors)
    }
}

/// High-dimensional sketch: `s` tensor sketches of degrees `0..s`, concatenated.
#[derive(Debug, Clone)]
pub struct GaussianSketchHighD {
    config: SketchConfig,
    levels: Vec<RecursiveTensorSketchMap>,
    fingerprint: Fingerprint,
}

impl GaussianSketchHighD {
    pub fn new(dimension: usize, s: usize, dims: &[usize], seed: u64) -> Result<Self> {
        Self::from_config(SketchConfig::new(Variant::Hd, dimension, s, dims, seed)?)
    }

    fn from_config(config: SketchConfig) -> Result<Self> {
        let levels = config
            .dims
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                RecursiveTensorSketchMap::new(config.dimension, m, i, derive_seed(config.seed, SeedTag::HdLevel, i as u64 + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        let fingerprint = config.fingerprint();
        Ok(Self {
            config,
            levels,
            fingerprint,
        })
    }

    /// `T_j` for `j = 1..=s` (index `j - 1`), of degree `j - 1`.
    pub fn level_maps(&self) -> &[RecursiveTensorSketchMap] {
        &self.levels
    }

    /// Coordinate range of block `j` (1-based).
    pub fn block_range(&self, level: usize) -> std::ops::Range<usize> {
        let start: usize = self.config.dims[..level - 1].iter().sum();
        start..start + self.config.dims[level - 1]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.config.output_dim()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("sketch input", self.config.dimension, x.len())?;
        let x_zero = x.iter().all(|&v| v == 0.0);
        let mut offset = 0;
        for (i, t) in self.levels.iter().enumerate() {
            let m = t.output_dim();
            let block = &mut out[offset..offset + m];
            offset += m;
            if i > 0 && x_zero {
                block.fill(0.0);
                continue;
            }
            let coef = hd_level(x, i + 1).coefficient;
            let y = t.apply_power(x)?;
            for (b, v) in block.iter_mut().zip(&y) {
                *b = coef * v;
            }
        }
        Ok(())
    }
}

/// A drawn Gaussian sketch of either variant.
#[derive(Debug, Clone)]
pub enum GaussianSketch {
    LowD(GaussianSketchLowD),
    HighD(GaussianSketchHighD),
}

impl GaussianSketch {
    pub fn from_config(config: SketchConfig) -> Result<Self> {
        Ok(match config.variant {
            Variant::Gs => GaussianSketch::LowD(GaussianSketchLowD::from_config(config)?),
            Variant::Hd => GaussianSketch::HighD(GaussianSketchHighD::from_config(config)?),
        })
    }

    pub fn from_plan(plan: &PlannedConfig, seed: u64) -> Result<Self> {
        Self::from_config(SketchConfig::from_plan(plan, seed)?)
    }

    pub fn config(&self) -> &SketchConfig {
        match self {
            GaussianSketch::LowD(g) => &g.config,
            GaussianSketch::HighD(g) => &g.config,
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        match self {
            GaussianSketch::LowD(g) => g.fingerprint,
            GaussianSketch::HighD(g) => g.fingerprint,
        }
    }

    pub fn dimension(&self) -> usize {
        self.config().dimension
    }

    pub fn output_dim(&self) -> usize {
        self.config().output_dim()
    }

    /// `G(x)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            GaussianSketch::LowD(g) => g.apply(x),
            GaussianSketch::HighD(g) => g.apply(x),
        }
    }

    /// `G(x_i)` for every point, in order.
    pub fn sketch_points(&self, x: &PointSet) -> Result<Vec<Vec<f64>>> {
        check_len("point dimension", self.dimension(), x.dim())?;
        (0..x.len()).into_par_iter().map(|i| self.apply(x.row(i))).collect()
    }

    /// Mean embedding `F(X) = (1/|X|) Σ G(x)`.
    pub fn embed_set(&self, x: &PointSet) -> Result<Embedding> {
        self.embed_set_with_radius(x, None)
    }

    /// As [`embed_set`](Self::embed_set), logging a warning when points lie
    /// outside the radius the sketch was planned for.
    pub fn embed_set_with_radius(&self, x: &PointSet, declared_radius: Option<f64>) -> Result<Embedding> {
        x.require_nonempty("cannot embed an empty point set")?;
        check_len("point dimension", self.dimension(), x.dim())?;
        if let Some(r) = declared_radius {
            let actual = match self.config().variant {
                Variant::Gs => x.max_abs(),
                Variant::Hd => x.max_norm(),
            };
            if actual > r {
                warn!("point set radius {actual} exceeds planned radius {r}; accuracy bounds do not apply");
            }
        }
        let m = self.output_dim();
        let n = x.len();
        let chunks: Vec<CompensatedSum> = (0..n.div_ceil(REDUCTION_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = CompensatedSum::new(m);
                for i in c * REDUCTION_CHUNK..((c + 1) * REDUCTION_CHUNK).min(n) {
                    acc.add(&self.apply(x.row(i))?);
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = CompensatedSum::new(m);
        for c in &chunks {
            total.add_sum(c);
        }
        let inv = 1.0 / n as f64;
        Ok(Embedding {
            vector: total.value().into_iter().map(|v| v * inv).collect(),
            fingerprint: self.fingerprint(),
            count: n,
        })
    }
}

/// Neumaier-compensated running sum of vectors.
#[derive(Debug, Clone)]
pub(crate) struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            sum: vec![0.0; m],
            comp: vec![0.0; m],
        }
    }

    fn add_scalar(sum: &mut f64, comp: &mut f64, v: f64) {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    }

    pub(crate) fn add(&mut self, v: &[f64]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(&mut self.comp).zip(v) {
            Self::add_scalar(s, c, x);
        }
    }

    pub(crate) fn add_sum(&mut self, other: &CompensatedSum) {
        self.add(&other.sum);
        for (c, oc) in self.comp.iter_mut().zip(&other.comp) {
            *c += oc;
        }
    }

    pub(crate) fn value(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// Mean sketch of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub fingerprint: Fingerprint,
    /// Number of points aggregated.
    pub count: usize,
}

impl Embedding {
    /// `‖self - other‖²`; rejects embeddings from different sketches.
    pub fn squared_distance(&self, other: &Embedding) -> Result<f64> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        check_len("embedding length", self.vector.len(), other.vector.len())?;
        Ok(self.vector.iter().zip(&other.vector).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}
