//! Exact and sketched squared kernel distance between point sets.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{check_len, Result};
use crate::point_set::PointSet;
use crate::sketchers::GaussianSketch;

/// Tiny negative values of the exact distance are rounding noise.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// `κ(P,Q) = (1/|P||Q|) Σ_{x∈P} Σ_{y∈Q} exp(-‖x-y‖²)`.
pub fn exact_kappa(p: &PointSet, q: &PointSet) -> Result<f64> {
    p.require_nonempty("first point set is empty")?;
    q.require_nonempty("second point set is empty")?;
    p.check_same_dim(q)?;
    // per-row sums in parallel, reduced in fixed order
    let rows: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let x = p.row(i);
            q.rows()
                .map(|y| (-x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp())
                .sum()
        })
        .collect();
    Ok(rows.iter().sum::<f64>() / (p.len() as f64 * q.len() as f64))
}

/// `D²_K(P,Q) = κ(P,P) - 2κ(P,Q) + κ(Q,Q)`, clamped at zero.
///
/// Symmetric in its arguments bit for bit.
pub fn exact_dk2(p: &PointSet, q: &PointSet) -> Result<f64> {
    let (a, b) = canonical_pair(p, q);
    let kab = exact_kappa(a, b)?;
    let raw = (exact_kappa(a, a)? + exact_kappa(b, b)?) - 2.0 * kab;
    Ok(clamp(raw))
}

/// `Σ_{x,y∈P∪Q} β_x β_y exp(-‖x-y‖²)` with `β = 1/|P|` on `P` and `-1/|Q|` on `Q`.
pub fn signed_weight_dk2(p: &PointSet, q: &PointSet) -> Result<f64> {
    p.require_nonempty("first point set is empty")?;
    q.require_nonempty("second point set is empty")?;
    let union = p.concat(q)?;
    let w = signed_weights(p.len(), q.len());
    let mut total = 0.0;
    for (i, x) in union.rows().enumerate() {
        for (j, y) in union.rows().enumerate() {
            let k = (-x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp();
            total += w[i] * w[j] * k;
        }
    }
    Ok(clamp(total))
}

/// `β` for the union `P ∪ Q` (points of `P` first).
pub fn signed_weights(np: usize, nq: usize) -> Vec<f64> {
    let mut w = vec![1.0 / np as f64; np];
    w.extend(std::iter::repeat_n(-1.0 / nq as f64, nq));
    w
}

/// `‖F(P) - F(Q)‖²` under sketch `g`.
pub fn sketched_dk2(g: &GaussianSketch, p: &PointSet, q: &PointSet) -> Result<f64> {
    check_len("point set dimension", p.dim(), q.dim())?;
    let fp = g.embed_set(p)?;
    let fq = g.embed_set(q)?;
    fp.squared_distance(&fq)
}

/// `ε · exact + α`.
pub fn error_budget(exact: f64, epsilon: f64, alpha: f64) -> f64 {
    epsilon * exact + alpha
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub exact_dk2: Option<f64>,
    pub sketched_dk2: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub within_budget: Option<bool>,
}

impl DistanceReport {
    pub fn new(sketched_dk2: f64, exact_dk2: Option<f64>, epsilon: f64, alpha: f64) -> Self {
        let within_budget = exact_dk2.map(|e| (sketched_dk2 - e).abs() <= error_budget(e, epsilon, alpha));
        Self {
            exact_dk2,
            sketched_dk2,
            epsilon,
            alpha,
            within_budget,
        }
    }
}

fn clamp(raw: f64) -> f64 {
    if (-NEGATIVE_CLAMP..0.0).contains(&raw) {
        0.0
    } else {
        raw
    }
}

fn canonical_pair<'a>(p: &'a PointSet, q: &'a PointSet) -> (&'a PointSet, &'a PointSet) {
    let ord = p.len().cmp(&q.len()).then_with(|| {
        p.as_flat()
            .iter()
            .zip(q.as_flat())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    if ord == Ordering::Greater {
        (q, p)
    } else {
        (p, q)
    }
}
