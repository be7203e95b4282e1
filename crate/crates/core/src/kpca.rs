//! Sketched rank-k Gaussian kernel PCA and the exact Gram-factor oracle.
//!
//! Two independent sketches `G` (dimension `m`) and `H` (dimension `r`) are
//! applied to every point, giving `M` (`n × m`) and `N` (`n × r`). With `U` an
//! orthonormal basis of `col(M)` and `W` the top-k left singular vectors of
//! `UᵀN`, the returned basis is `V = U W`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::planner::{estimate_radius, min_s_gs, min_s_hd, Task, Variant};
use crate::point_set::PointSet;
use crate::seed::{derive_seed, SeedTag};
use crate::sketchers::{GaussianSketch, SketchConfig};

/// Eigenvalues below this are treated as a numerical failure rather than clipped.
pub const EIGEN_CLIP_FLOOR: f64 = -1e-10;
/// Relative pivot threshold for the rank of `M`.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Refuse sketch widths above this many columns.
pub const MAX_SKETCH_COLUMNS: usize = 1 << 22;

/// `B` with `K_X = B Bᵀ`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub factor: DMatrix<f64>,
    pub eigen_clip_count: usize,
}

/// Symmetric square root of the Gram matrix, `B = Q diag(√max(λ,0)) Qᵀ`.
pub fn gram_factor(x: &PointSet) -> Result<GramFactor> {
    x.require_nonempty("gram factor of an empty set")?;
    let n = x.len();
    let k = DMatrix::from_row_slice(n, n, &crate::feature_maps::gram_matrix(x));
    let eig = k.symmetric_eigen();
    let mut clipped = 0;
    let mut roots = DVector::zeros(n);
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if !lam.is_finite() {
            return Err(Error::Numerical("non-finite Gram eigenvalue".into()));
        }
        if lam < 0.0 {
            if lam < EIGEN_CLIP_FLOOR {
                return Err(Error::Numerical(format!("Gram eigenvalue {lam:e} is not PSD")));
            }
            clipped += 1;
        } else {
            roots[i] = lam.sqrt();
        }
    }
    let q = &eig.eigenvectors;
    let b = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok(GramFactor {
        factor: b,
        eigen_clip_count: clipped,
    })
}

/// How the `H` sketch widths grow with level in the high-d variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WidthSchedule {
    /// `r_i = ⌈C_r · i · m² / ε²⌉`.
    #[default]
    Linear,
    /// `r_i = ⌈C_r · 3^i · m² / ε²⌉`.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaConfig {
    pub variant: Variant,
    pub epsilon: f64,
    pub alpha: f64,
    /// `L` (gs) or `R` (hd); estimated from the data when absent.
    pub radius: Option<f64>,
    pub c_m: f64,
    pub c_r: f64,
    pub schedule: WidthSchedule,
    pub seed: u64,
}

impl KpcaConfig {
    pub fn new(variant: Variant, epsilon: f64, alpha: f64, seed: u64) -> Self {
        Self {
            variant,
            epsilon,
            alpha,
            radius: None,
            c_m: 1.0,
            c_r: 1.0,
            schedule: WidthSchedule::Linear,
            seed,
        }
    }
}

/// `n × k` orthonormal basis with the sketch sizes that produced it.
#[derive(Debug, Clone)]
pub struct RankKBasis {
    pub basis: DMatrix<f64>,
    pub rank: usize,
    pub truncation_order: usize,
    /// Total width of `M` (after power-of-two rounding).
    pub sketch_width: usize,
    /// Total width of `N` (after power-of-two rounding).
    pub projection_width: usize,
    /// Rank of `M` at the pivot tolerance.
    pub sketch_rank: usize,
}

/// Widths `(m blocks, r blocks)` before rounding.
pub fn kpca_dims(variant: Variant, d: usize, s: usize, k: usize, cfg: &KpcaConfig) -> (Vec<usize>, Vec<usize>) {
    let eps = cfg.epsilon;
    let kk = k as f64;
    let base = kk * kk + kk / eps;
    let ceil = |v: f64| (v.ceil() as usize).max(1);
    match variant {
        Variant::Gs => {
            let m = ceil(cfg.c_m * d as f64 * base);
            let r = ceil(cfg.c_r * d as f64 * (m as f64).powi(2) / (eps * eps));
            (vec![m], vec![r])
        }
        Variant::Hd => {
            let ms: Vec<usize> = (1..=s).map(|i| ceil(cfg.c_m * i as f64 * base)).collect();
            let m: f64 = ms.iter().sum::<usize>() as f64;
            let rs = (1..=s)
                .map(|i| {
                    let growth = match cfg.schedule {
                        WidthSchedule::Linear => i as f64,
                        WidthSchedule::Geometric => 3f64.powi(i as i32),
                    };
                    ceil(cfg.c_r * growth * m * m / (eps * eps))
                })
                .collect();
            (ms, rs)
        }
    }
}

pub fn kpca_fit(x: &PointSet, k: usize, cfg: &KpcaConfig) -> Result<RankKBasis> {
    x.require_nonempty("kernel PCA of an empty set")?;
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("rank k = {k} must lie in 1..={n}")));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0 && cfg.alpha > 0.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0,1) and alpha be positive".into()));
    }
    let d = x.dim();
    let radius = match cfg.radius {
        Some(r) => r,
        None => estimate_radius(cfg.variant, [x]).max(f64::MIN_POSITIVE.sqrt()),
    };
    let xi = Task::Pca { n }.weight_budget();
    let s = match cfg.variant {
        Variant::Gs => min_s_gs(d, radius, cfg.alpha, xi)?,
        Variant::Hd => min_s_hd(radius, cfg.alpha, xi)?,
    };
    let (m_dims, r_dims) = kpca_dims(cfg.variant, d, s, k, cfg);
    let r_total: usize = r_dims.iter().map(|r| r.next_power_of_two()).sum();
    if r_total > MAX_SKETCH_COLUMNS {
        return Err(Error::InvalidParameter(format!(
            "second sketch would have {r_total} columns; lower c_r or epsilon"
        )));
    }
    let g = GaussianSketch::from_config(SketchConfig::new(cfg.variant, d, s, &m_dims, derive_seed(cfg.seed, SeedTag::Pca, 0))?)?;
    let h = GaussianSketch::from_config(SketchConfig::new(cfg.variant, d, s, &r_dims, derive_seed(cfg.seed, SeedTag::Pca, 1))?)?;
    let m_rows = g.sketch_points(x)?;
    let n_rows = h.sketch_points(x)?;
    let mmat = rows_to_matrix(&m_rows);
    let nmat = rows_to_matrix(&n_rows);

    let u = column_basis(&mmat);
    let rank = u.ncols();
    let mut v = if rank == 0 {
        DMatrix::zeros(n, 0)
    } else {
        let utn = u.transpose() * &nmat;
        let w = top_left_singular_vectors(utn, k.min(rank))?;
        &u * w
    };
    if v.ncols() < k {
        v = orthonormal_completion(&v, k);
    }
    Ok(RankKBasis {
        basis: v,
        rank: k,
        truncation_order: s,
        sketch_width: g.output_dim(),
        projection_width: h.output_dim(),
        sketch_rank: rank,
    })
}

/// `(‖B - VVᵀB‖_F², ‖B - [B]_k‖_F²)` from the exact Gram factor.
pub fn kpca_error(x: &PointSet, v: &DMatrix<f64>, k: usize) -> Result<(f64, f64)> {
    let b = gram_factor(x)?.factor;
    if v.nrows() != b.nrows() {
        return Err(Error::Shape {
            context: "basis rows",
            expected: b.nrows(),
            got: v.nrows(),
        });
    }
    let resid = &b - v * (v.transpose() * &b);
    let residual = resid.norm_squared();
    let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let optimum = sv.iter().skip(k).map(|s| s * s).sum();
    Ok((residual, optimum))
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Orthonormal basis of `col(a)` from a column-pivoted QR, truncated at the
/// numerical rank.
fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = a.norm();
    if scale == 0.0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let diag = r.nrows().min(r.ncols());
    let rank = (0..diag).take_while(|&i| r[(i, i)].abs() > RANK_TOLERANCE * scale).count();
    qr.q().columns(0, rank).into_owned()
}

fn top_left_singular_vectors(a: DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let rows = a.nrows();
    let svd = a.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut w = DMatrix::zeros(rows, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        w.set_column(c, &u.column(i));
    }
    Ok(w)
}

/// Extends orthonormal columns `v` to `k` columns with standard basis vectors,
/// orthogonalized twice.
pub(crate) fn orthonormal_completion(v: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = v.nrows();
    let mut cols: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() >= k {
            break;
        }
        let mut cand = DVector::zeros(n);
        cand[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&cand);
                cand.axpy(-proj, c, 1.0);
            }
        }
        let norm = cand.norm();
        if norm > 1e-6 {
            cols.push(cand / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_maps::{gram_matrix, truncated_gram_gs, truncated_gram_hd};
    use crate::test_util::random_vec;

    fn rand_set(n: usize, d: usize, seed: u64) -> PointSet {
        PointSet::new(d, random_vec(n * d, seed)).unwrap()
    }

    fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
        (v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())).abs().max()
    }

    #[test]
    fn factor_reconstructs_gram() {
        let x = rand_set(30, 2, 3);
        let f = gram_factor(&x).unwrap();
        let k = DMatrix::from_row_slice(30, 30, &gram_matrix(&x));
        let rel = (&f.factor * f.factor.transpose() - &k).norm() / k.norm();
        assert!(rel <= 1e-8, "{rel}");
    }

    #[test]
    fn factor_of_identical_points_is_rank_one() {
        let x = PointSet::from_rows(&vec![vec![0.3, -0.2]; 5]).unwrap();
        let f = gram_factor(&x).unwrap();
        let bbt = &f.factor * f.factor.transpose();
        assert!((bbt - DMatrix::from_element(5, 5, 1.0)).abs().max() < 1e-10);
        assert_eq!(f.factor.rank(1e-8), 1);
        let one = gram_factor(&PointSet::from_rows(&[[1.0, 2.0]]).unwrap()).unwrap();
        assert!((one.factor[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_top_vectors_attain_optimum() {
        let x = rand_set(12, 2, 5);
        let b = gram_factor(&x).unwrap().factor;
        let eig = (&b * b.transpose()).symmetric_eigen();
        let mut order: Vec<usize> = (0..12).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let v = DMatrix::from_columns(&order[..3].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let (res, opt) = kpca_error(&x, &v, 3).unwrap();
        assert!((res - opt).abs() <= 1e-10 * (1.0 + opt));
    }

    #[test]
    fn random_basis_never_beats_optimum() {
        let x = rand_set(15, 2, 6);
        for seed in 0..20 {
            let g = DMatrix::from_vec(15, 3, random_vec(45, seed));
            let v = g.qr().q();
            assert!(orthonormality_error(&v) < 1e-10);
            let (res, opt) = kpca_error(&x, &v, 3).unwrap();
            assert!(res >= opt - 1e-12);
        }
    }

    #[test]
    fn identical_points_rank_one() {
        let x = PointSet::from_rows(&vec![vec![0.5, 0.5]; 8]).unwrap();
        let cfg = KpcaConfig::new(Variant::Gs, 0.5, 1e-2, 1);
        let basis = kpca_fit(&x, 1, &cfg).unwrap();
        assert!(orthonormality_error(&basis.basis) < 1e-8);
        let (res, opt) = kpca_error(&x, &basis.basis, 1).unwrap();
        assert!(opt.abs() < 1e-10);
        assert!(res <= 1e-2);
    }

    #[test]
    fn full_rank_basis_has_no_residual() {
        let x = rand_set(10, 2, 2);
        let basis = kpca_fit(&x, 10, &KpcaConfig::new(Variant::Gs, 0.5, 1e-2, 4)).unwrap();
        assert_eq!(basis.basis.ncols(), 10);
        assert!(orthonormality_error(&basis.basis) < 1e-8);
        let (res, _) = kpca_error(&x, &basis.basis, 10).unwrap();
        assert!(res <= 1e-2);
    }

    #[test]
    fn small_hd_instance_within_budget() {
        let x = rand_set(12, 3, 9).scaled(0.4).unwrap();
        let mut cfg = KpcaConfig::new(Variant::Hd, 0.5, 1e-2, 3);
        cfg.c_r = 0.05;
        let runs: Vec<(f64, f64)> = (0..5)
            .map(|t| {
                cfg.seed = t;
                let b = kpca_fit(&x, 2, &cfg).unwrap();
                assert!(orthonormality_error(&b.basis) < 1e-8);
                kpca_error(&x, &b.basis, 2).unwrap()
            })
            .collect();
        let mut res: Vec<f64> = runs.iter().map(|r| r.0).collect();
        res.sort_by(f64::total_cmp);
        let opt = runs[0].1;
        assert!(res[2] <= 1.5 * opt + 1e-2, "{res:?} opt {opt}");
    }

    #[test]
    fn rejects_bad_rank() {
        let x = rand_set(4, 2, 1);
        let cfg = KpcaConfig::new(Variant::Gs, 0.5, 1e-2, 0);
        assert!(kpca_fit(&x, 0, &cfg).is_err());
        assert!(kpca_fit(&x, 5, &cfg).is_err());
    }

    #[test]
    fn remainders_are_psd() {
        for seed in 0..5 {
            let x = rand_set(10, 2, seed);
            let k = DMatrix::from_row_slice(10, 10, &gram_matrix(&x));
            for s in [2, 4, 7] {
                for trunc in [truncated_gram_gs(&x, s).unwrap(), truncated_gram_hd(&x, s).unwrap()] {
                    let diff = &k - DMatrix::from_row_slice(10, 10, &trunc);
                    assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn sketched_gram_approaches_truncated_gram() {
        let x = rand_set(6, 2, 4);
        let s = 6;
        let truth = truncated_gram_gs(&x, s).unwrap();
        let trials = 4000;
        let mut acc = vec![0.0; 36];
        for seed in 0..trials {
            let g = GaussianSketch::from_config(SketchConfig::new(Variant::Gs, 2, s, &[16], seed).unwrap()).unwrap();
            let rows = g.sketch_points(&x).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    acc[i * 6 + j] += rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        for (a, t) in acc.iter().zip(&truth) {
            // per-entry std of one draw is below 0.5 at m = 16
            assert!((a / trials as f64 - t).abs() < 4.0 * 0.5 / (trials as f64).sqrt());
        }
    }

    #[test]
    fn completion_is_orthonormal() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let c = orthonormal_completion(&v, 4);
        assert_eq!(c.ncols(), 4);
        assert!(orthonormality_error(&c) < 1e-12);
    }
}
