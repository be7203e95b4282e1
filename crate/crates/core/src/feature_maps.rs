//! Deterministic truncated expansions of the Gaussian kernel
//! `K(x, p) = exp(-‖x - p‖²)` and closed-form bounds on the truncation error.
//!
//! Two expansions are used:
//!
//! * per coordinate (low-d): `K(x,p) = Π_j ⟨ȳ(x_j), ȳ(p_j)⟩` with
//!   `ȳ(t)_i = exp(-t²) sqrt(2^i / i!) t^i`, truncated to `s` terms per coordinate;
//! * by total degree (high-d): `K(x,p) = Σ_a (2^a / a!) exp(-‖x‖²-‖p‖²) ⟨x,p⟩^a`,
//!   truncated to `a < s`.
//!
//! Both remainders are positive semidefinite, and their quadratic forms are
//! bounded by [`tail_bound_gs`] and [`tail_bound_hd`].

use crate::error::{check_len, Error, Result};
use crate::point_set::PointSet;

fn sq_dist(x: &[f64], p: &[f64]) -> f64 {
    x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `exp(-‖x - p‖²)`.
pub fn exact_gaussian(x: &[f64], p: &[f64]) -> Result<f64> {
    check_len("gaussian kernel argument", x.len(), p.len())?;
    Ok((-sq_dist(x, p)).exp())
}

/// Truncated per-coordinate Taylor feature of one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorFactor {
    pub coords: Vec<f64>,
    pub source_coordinate: f64,
    pub truncation_order: usize,
}

/// Coordinates `exp(-t²) sqrt(2^(i-1)/(i-1)!) t^(i-1)` for `i = 1..=s`.
///
/// Evaluated through the log-magnitude recurrence
/// `log c_{i+1} = log c_i + log|t| + ½ log(2/i)` so neither the factorial
/// nor the power is formed.
pub fn taylor_factor(t: f64, s: usize) -> TaylorFactor {
    let mut coords = vec![0.0; s];
    if s > 0 {
        coords[0] = (-t * t).exp();
        if t != 0.0 {
            let log_abs = t.abs().ln();
            let mut log_c = -t * t;
            for (i, c) in coords.iter_mut().enumerate().skip(1) {
                log_c += log_abs + 0.5 * (2.0 / i as f64).ln();
                let mag = log_c.exp();
                *c = if t < 0.0 && i % 2 == 1 { -mag } else { mag };
            }
        }
    }
    TaylorFactor {
        coords,
        source_coordinate: t,
        truncation_order: s,
    }
}

/// Truncated low-d kernel `Π_j ⟨y(x_j), y(p_j)⟩` with `s` terms per coordinate.
pub fn truncated_kernel_gs(x: &[f64], p: &[f64], s: usize) -> Result<f64> {
    check_len("truncated kernel argument", x.len(), p.len())?;
    require_order(s)?;
    Ok(x.iter()
        .zip(p)
        .map(|(&a, &b)| {
            let fa = taylor_factor(a, s);
            let fb = taylor_factor(b, s);
            fa.coords.iter().zip(&fb.coords).map(|(u, v)| u * v).sum::<f64>()
        })
        .product())
}

/// Truncated high-d kernel `Σ_{a<s} (2^a/a!) exp(-‖x‖²-‖p‖²) ⟨x,p⟩^a`.
pub fn truncated_kernel_hd(x: &[f64], p: &[f64], s: usize) -> Result<f64> {
    check_len("truncated kernel argument", x.len(), p.len())?;
    require_order(s)?;
    let ip: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
    let mut term = (-sq_norm(x) - sq_norm(p)).exp();
    let mut total = 0.0;
    for a in 0..s {
        total += term;
        term *= 2.0 * ip / (a + 1) as f64;
    }
    Ok(total)
}

/// Level `j` of the high-d expansion: `z^(j) = coefficient · x^{⊗(j-1)}`, kept
/// unmaterialized.
#[derive(Debug, Clone, PartialEq)]
pub struct HdLevel<'a> {
    pub level: usize,
    pub coefficient: f64,
    pub base_point: &'a [f64],
}

impl HdLevel<'_> {
    /// `‖z^(j)‖ = coefficient · ‖x‖^(j-1)`.
    pub fn norm(&self) -> f64 {
        self.coefficient * sq_norm(self.base_point).sqrt().powi(self.level as i32 - 1)
    }
}

/// `sqrt(2^(j-1)/(j-1)!) · exp(-‖x‖²)` for `j >= 1`.
pub fn hd_level(x: &[f64], level: usize) -> HdLevel<'_> {
    debug_assert!(level >= 1);
    let a = (level - 1) as f64;
    let log_coef = 0.5 * (a * std::f64::consts::LN_2 - ln_factorial(level - 1)) - sq_norm(x);
    HdLevel {
        level,
        coefficient: log_coef.exp(),
        base_point: x,
    }
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ξ · d · exp(2dL²) · (2eL²/s)^s`, evaluated in log space. Overflows to `+∞`.
pub fn tail_bound_gs(d: usize, radius_linf: f64, s: usize, xi: f64) -> Result<f64> {
    require_positive("L", radius_linf)?;
    require_positive("xi", xi)?;
    require_order(s)?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let l2 = radius_linf * radius_linf;
    let s_f = s as f64;
    let log = xi.ln() + (d as f64).ln() + 2.0 * d as f64 * l2 + s_f * (2.0 * std::f64::consts::E * l2 / s_f).ln();
    Ok(log.exp())
}

/// `ξ · exp(2R²) · (2eR²/s)^s`, evaluated in log space. Overflows to `+∞`.
pub fn tail_bound_hd(radius_l2: f64, s: usize, xi: f64) -> Result<f64> {
    require_positive("R", radius_l2)?;
    require_positive("xi", xi)?;
    require_order(s)?;
    let r2 = radius_l2 * radius_l2;
    let s_f = s as f64;
    let log = xi.ln() + 2.0 * r2 + s_f * (2.0 * std::f64::consts::E * r2 / s_f).ln();
    Ok(log.exp())
}

/// Exact Gram matrix `K_X`, row-major `n × n`.
pub fn gram_matrix(x: &PointSet) -> Vec<f64> {
    pairwise(x, |a, b| (-sq_dist(a, b)).exp())
}

/// Gram matrix of the truncated low-d kernel.
pub fn truncated_gram_gs(x: &PointSet, s: usize) -> Result<Vec<f64>> {
    require_order(s)?;
    let factors: Vec<Vec<TaylorFactor>> = x
        .rows()
        .map(|r| r.iter().map(|&t| taylor_factor(t, s)).collect())
        .collect();
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = factors[i]
                .iter()
                .zip(&factors[j])
                .map(|(a, b)| a.coords.iter().zip(&b.coords).map(|(u, w)| u * w).sum::<f64>())
                .product();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Gram matrix of the truncated high-d kernel.
pub fn truncated_gram_hd(x: &PointSet, s: usize) -> Result<Vec<f64>> {
    require_order(s)?;
    Ok(pairwise(x, |a, b| truncated_kernel_hd(a, b, s).expect("equal dims")))
}

fn pairwise(x: &PointSet, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = f(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn require_order(s: usize) -> Result<()> {
    if s == 0 {
        Err(Error::InvalidParameter("truncation order must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}
