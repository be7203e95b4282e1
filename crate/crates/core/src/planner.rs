//! Turns accuracy targets into concrete sketch parameters by solving the
//! explicit truncation inequalities instead of their asymptotic forms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::feature_maps::{tail_bound_gs, tail_bound_hd};
use crate::point_set::PointSet;

/// Largest truncation order the solvers will consider.
pub const MAX_TRUNCATION_ORDER: usize = 100_000;

/// Multiplier `C` in `m = ⌈C·k/ε²⌉`, calibrated so that the tensor sketch
/// inner-product variance stays below `ε²/10 · ‖u‖²‖v‖²`.
pub const DEFAULT_VARIANCE_CONSTANT: f64 = 32.0;
pub const DEFAULT_JL_CONSTANT: f64 = 8.0;
pub const DEFAULT_MEDIAN_CONSTANT: f64 = 1.0;

/// Weight budget `(Σ|β|)²` for a distance between two uniform point sets.
pub const DISTANCE_XI: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Per-coordinate Taylor features; radius is the `L∞` bound `L`.
    Gs,
    /// Total-degree expansion for high dimensions; radius is the `L2` bound `R`.
    Hd,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Gs => 0,
            Variant::Hd => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Gs),
            1 => Some(Variant::Hd),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gs => "gs",
            Variant::Hd => "hd",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(Variant::Gs),
            "hd" => Ok(Variant::Hd),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

/// User-facing accuracy requirements.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTarget {
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
    /// `L`, required for [`Variant::Gs`].
    pub radius_linf: Option<f64>,
    /// `R`, required for [`Variant::Hd`].
    pub radius_l2: Option<f64>,
    pub dimension: usize,
}

impl AccuracyTarget {
    /// Target for `variant` with `radius` interpreted as `L` or `R` accordingly.
    pub fn new(variant: Variant, dimension: usize, radius: f64, epsilon: f64, alpha: f64, delta: f64) -> Self {
        let (radius_linf, radius_l2) = match variant {
            Variant::Gs => (Some(radius), None),
            Variant::Hd => (None, Some(radius)),
        };
        Self {
            epsilon,
            alpha,
            delta,
            radius_linf,
            radius_l2,
            dimension,
        }
    }

    fn validate(&self, variant: Variant) -> Result<f64> {
        unit_interval("epsilon", self.epsilon)?;
        unit_interval("delta", self.delta)?;
        positive("alpha", self.alpha)?;
        if self.dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let radius = match (variant, self.radius_linf, self.radius_l2) {
            (Variant::Gs, Some(l), None) => l,
            (Variant::Hd, None, Some(r)) => r,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "variant {variant} needs exactly its own radius (L for gs, R for hd)"
                )))
            }
        };
        positive("radius", radius)?;
        Ok(radius)
    }
}

/// Hidden constants of the asymptotic bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConstants {
    pub variance: f64,
    pub jl: f64,
    pub median: f64,
}

impl Default for PlanConstants {
    fn default() -> Self {
        Self {
            variance: DEFAULT_VARIANCE_CONSTANT,
            jl: DEFAULT_JL_CONSTANT,
            median: DEFAULT_MEDIAN_CONSTANT,
        }
    }
}

/// What the sketch will be used for; fixes the weight budget `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Distance,
    /// Rank-k PCA over `n` points, `ξ = 4n²`.
    Pca { n: usize },
}

impl Task {
    pub fn weight_budget(self) -> f64 {
        match self {
            Task::Distance => DISTANCE_XI,
            Task::Pca { n } => 4.0 * (n as f64) * (n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedConfig {
    pub variant: Variant,
    pub dimension: usize,
    pub radius: f64,
    pub truncation_order: usize,
    /// `[m]` for GS, `[m_1, ..., m_s]` for HD (before power-of-two rounding).
    pub dims: Vec<usize>,
    pub variance_constant: f64,
    pub weight_budget: f64,
    /// Tail bound at the chosen `s`; always `<= alpha`.
    pub tail_bound: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub jl_dim: Option<usize>,
    pub replicas: usize,
}

impl PlannedConfig {
    /// Dimensions after power-of-two rounding, as produced by the sketch.
    pub fn effective_dims(&self) -> Vec<usize> {
        self.dims.iter().map(|m| m.next_power_of_two()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.effective_dims().iter().sum()
    }
}

/// Smallest `s` with `tail_bound_gs(d, L, s, ξ) <= alpha`.
pub fn min_s_gs(d: usize, radius_linf: f64, alpha: f64, xi: f64) -> Result<usize> {
    positive("alpha", alpha)?;
    scan_order(alpha, |s| tail_bound_gs(d, radius_linf, s, xi))
}

/// Smallest `s` with `tail_bound_hd(R, s, ξ) <= alpha`.
pub fn min_s_hd(radius_l2: f64, alpha: f64, xi: f64) -> Result<usize> {
    positive("alpha", alpha)?;
    scan_order(alpha, |s| tail_bound_hd(radius_l2, s, xi))
}

fn scan_order(alpha: f64, bound: impl Fn(usize) -> Result<f64>) -> Result<usize> {
    for s in 1..=MAX_TRUNCATION_ORDER {
        if bound(s)? <= alpha {
            return Ok(s);
        }
    }
    Err(Error::Infeasible(format!(
        "no truncation order up to {MAX_TRUNCATION_ORDER} reaches alpha = {alpha:e}"
    )))
}

/// GS: `[⌈C·d/ε²⌉]` with `count = d`; HD: `[⌈C·j/ε²⌉ for j in 1..=count]` with `count = s`.
pub fn sketch_dims(variant: Variant, count: usize, epsilon: f64, constant: f64) -> Result<Vec<usize>> {
    unit_interval_closed("epsilon", epsilon)?;
    positive("variance constant", constant)?;
    let dim = |k: usize| ((constant * k as f64 / (epsilon * epsilon)).ceil() as usize).max(1);
    Ok(match variant {
        Variant::Gs => vec![dim(count)],
        Variant::Hd => (1..=count).map(dim).collect(),
    })
}

/// `(⌈C_jl/ε²⌉, smallest odd integer >= C_med·ln(1/δ))`.
pub fn jl_plan(epsilon: f64, delta: f64, jl_constant: f64, median_constant: f64) -> Result<(usize, usize)> {
    unit_interval("epsilon", epsilon)?;
    unit_interval("delta", delta)?;
    let jl_dim = ((jl_constant / (epsilon * epsilon)).ceil() as usize).max(1);
    let want = (median_constant * (1.0 / delta).ln()).ceil().max(1.0) as usize;
    let replicas = if want.is_multiple_of(2) { want + 1 } else { want };
    Ok((jl_dim, replicas))
}

/// Full plan for a sketch variant and task.
pub fn plan(variant: Variant, target: &AccuracyTarget, constants: PlanConstants, task: Task) -> Result<PlannedConfig> {
    let radius = target.validate(variant)?;
    let xi = task.weight_budget();
    let d = target.dimension;
    let (s, tail_bound, dims) = match variant {
        Variant::Gs => {
            let s = min_s_gs(d, radius, target.alpha, xi)?;
            (s, tail_bound_gs(d, radius, s, xi)?, sketch_dims(variant, d, target.epsilon, constants.variance)?)
        }
        Variant::Hd => {
            let s = min_s_hd(radius, target.alpha, xi)?;
            (s, tail_bound_hd(radius, s, xi)?, sketch_dims(variant, s, target.epsilon, constants.variance)?)
        }
    };
    let (jl_dim, replicas) = jl_plan(target.epsilon, target.delta, constants.jl, constants.median)?;
    Ok(PlannedConfig {
        variant,
        dimension: d,
        radius,
        truncation_order: s,
        dims,
        variance_constant: constants.variance,
        weight_budget: xi,
        tail_bound,
        epsilon: target.epsilon,
        alpha: target.alpha,
        jl_dim: Some(jl_dim),
        replicas,
    })
}

/// Radius of the data under `variant`'s norm: max `|x_j|` for GS, max `‖x‖` for HD.
pub fn estimate_radius<'a>(variant: Variant, sets: impl IntoIterator<Item = &'a PointSet>) -> f64 {
    sets.into_iter()
        .map(|p| match variant {
            Variant::Gs => p.max_abs(),
            Variant::Hd => p.max_norm(),
        })
        .fold(0.0, f64::max)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn unit_interval_closed(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")))
    }
}
