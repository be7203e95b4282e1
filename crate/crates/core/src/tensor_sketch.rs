//! Degree-2 tensor combination and the recursive tensor sketch.
//!
//! A [`RecursiveTensorSketchMap`] sketches `u_1 ⊗ ... ⊗ u_k` (with `u_i ∈ R^n`)
//! into `R^m` without forming the `n^k` tensor. Each factor first goes
//! through its own CountSketch leaf `R^n -> R^m`; leaves are then merged
//! pairwise up a balanced binary tree of [`Tensor2Combiner`]s. A combiner
//! applies an independent sign-and-permute map to each input and returns
//! their circular convolution, which is a linear map on `R^m ⊗ R^m`.
//!
//! For rank-1 inputs the cost is `O(k m log m + k n)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::count_sketch::CountSketchMap;
use crate::error::{check_len, Error, Result};
use crate::seed::{derive_seed, SeedTag};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn fft_plans(len: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        })
        .clone()
}

/// Circular convolution of two real vectors of equal power-of-two length,
/// using a single complex FFT for both inputs.
pub(crate) fn circular_convolve(a: &[f64], b: &[f64], out: &mut [f64]) {
    let m = a.len();
    debug_assert!(m == b.len() && m == out.len());
    if a.iter().all(|&v| v == 0.0) || b.iter().all(|&v| v == 0.0) {
        out.fill(0.0);
        return;
    }
    if m <= 8 {
        out.fill(0.0);
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[(i + j) % m] += x * y;
            }
        }
        return;
    }
    let (fwd, inv) = fft_plans(m);
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    fwd.process(&mut z);
    // unpack the two real spectra from z and multiply them
    let mut prod = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..m {
        let zk = z[k];
        let zc = z[(m - k) % m].conj();
        let fa = (zk + zc) * 0.5;
        let fb = (zk - zc) * Complex64::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / m as f64;
    for (o, p) in out.iter_mut().zip(&prod) {
        *o = p.re * scale;
    }
}

/// Degree-2 tensor sketch `R^m ⊗ R^m -> R^m`.
#[derive(Debug, Clone)]
pub struct Tensor2Combiner {
    left: CountSketchMap,
    right: CountSketchMap,
}

impl Tensor2Combiner {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "combiner dimension {dim} is not a power of two"
            )));
        }
        Ok(Self {
            left: CountSketchMap::permutation(dim, derive_seed(seed, SeedTag::CombinerLeft, 0))?,
            right: CountSketchMap::permutation(dim, derive_seed(seed, SeedTag::CombinerRight, 0))?,
        })
    }

    pub fn dim(&self) -> usize {
        self.left.output_dim()
    }

    /// Sign-and-permute map applied to the first argument.
    pub fn left(&self) -> &CountSketchMap {
        &self.left
    }

    /// Sign-and-permute map applied to the second argument.
    pub fn right(&self) -> &CountSketchMap {
        &self.right
    }

    pub fn combine(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        check_len("combiner left input", m, a.len())?;
        check_len("combiner right input", m, b.len())?;
        let pa = self.left.apply(a)?;
        let pb = self.right.apply(b)?;
        let mut out = vec![0.0; m];
        circular_convolve(&pa, &pb, &mut out);
        Ok(out)
    }
}

/// Child of an internal tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeChild {
    Leaf(usize),
    Inner(usize),
}

/// Internal node: combiner `combiner` applied to (left, right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub combiner: usize,
    pub left: TreeChild,
    pub right: TreeChild,
}

/// Seeded linear map `R^{n^k} -> R^m` evaluated on rank-1 tensors.
#[derive(Debug, Clone)]
pub struct RecursiveTensorSketchMap {
    input_dim: usize,
    output_dim: usize,
    degree: usize,
    seed: u64,
    leaves: Vec<CountSketchMap>,
    combiners: Vec<Tensor2Combiner>,
    // children always precede parents; the last node is the root
    nodes: Vec<TreeNode>,
}

impl RecursiveTensorSketchMap {
    /// `output_dim` is rounded up to the next power of two.
    pub fn new(input_dim: usize, output_dim: usize, degree: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "tensor sketch dimensions must be positive, got n={input_dim}, m={output_dim}"
            )));
        }
        let m = output_dim.next_power_of_two();
        let leaves = (0..degree)
            .map(|i| CountSketchMap::new(input_dim, m, derive_seed(seed, SeedTag::Leaf, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut nodes = Vec::with_capacity(degree.saturating_sub(1));
        if degree > 0 {
            build_tree(0, degree, &mut nodes);
        }
        let combiners = (0..nodes.len())
            .map(|j| Tensor2Combiner::new(m, derive_seed(seed, SeedTag::Combiner, j as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            input_dim,
            output_dim: m,
            degree,
            seed,
            leaves,
            combiners,
            nodes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// The power-of-two output dimension actually produced.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn leaves(&self) -> &[CountSketchMap] {
        &self.leaves
    }

    pub fn combiners(&self) -> &[Tensor2Combiner] {
        &self.combiners
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Sketch of `factors[0] ⊗ ... ⊗ factors[k-1]`.
    ///
    /// For degree 0 the tensor is the scalar 1 and the result is `e_1`.
    pub fn apply_rank1<V: AsRef<[f64]>>(&self, factors: &[V]) -> Result<Vec<f64>> {
        check_len("tensor sketch factor count", self.degree, factors.len())?;
        for f in factors {
            check_len("tensor sketch factor", self.input_dim, f.as_ref().len())?;
        }
        let m = self.output_dim;
        if self.degree == 0 {
            let mut e = vec![0.0; m];
            e[0] = 1.0;
            return Ok(e);
        }
        let leaf_out = self
            .leaves
            .iter()
            .zip(factors)
            .map(|(leaf, f)| leaf.apply(f.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        if self.nodes.is_empty() {
            return Ok(leaf_out.into_iter().next().expect("degree 1 has one leaf"));
        }
        let mut inner: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let pick = |c: TreeChild| -> &[f64] {
                match c {
                    TreeChild::Leaf(i) => &leaf_out[i],
                    TreeChild::Inner(j) => &inner[j],
                }
            };
            let out = self.combiners[node.combiner].combine(pick(node.left), pick(node.right))?;
            inner.push(out);
        }
        Ok(inner.pop().expect("nonempty tree"))
    }

    /// Sketch of `x^{⊗k}`.
    pub fn apply_power(&self, x: &[f64]) -> Result<Vec<f64>> {
        let factors = vec![x; self.degree];
        self.apply_rank1(&factors)
    }

    /// Sketch of `Σ_t coef_t · (factors_t[0] ⊗ ... ⊗ factors_t[k-1])`.
    pub fn apply_rank1_sum<V: AsRef<[f64]>>(&self, terms: &[(f64, Vec<V>)]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.output_dim];
        for (coef, factors) in terms {
            let y = self.apply_rank1(factors)?;
            for (a, v) in acc.iter_mut().zip(&y) {
                *a += coef * v;
            }
        }
        Ok(acc)
    }
}

fn build_tree(lo: usize, hi: usize, nodes: &mut Vec<TreeNode>) -> TreeChild {
    if hi - lo == 1 {
        return TreeChild::Leaf(lo);
    }
    let mid = lo + (hi - lo).div_ceil(2);
    let left = build_tree(lo, mid, nodes);
    let right = build_tree(mid, hi, nodes);
    let idx = nodes.len();
    nodes.push(TreeNode {
        combiner: idx,
        left,
        right,
    });
    TreeChild::Inner(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{dot, mean_and_stderr, random_vec};

    /// Column of the combiner's m x m^2 matrix for input index pair (i, j),
    /// read straight off the permutation tables.
    fn combiner_column(c: &Tensor2Combiner, i: usize, j: usize) -> Vec<f64> {
        let m = c.dim();
        let mut col = vec![0.0; m];
        let pos = (c.left().buckets()[i] + c.right().buckets()[j]) % m;
        col[pos] = c.left().signs()[i] * c.right().signs()[j];
        col
    }

    /// Output of the whole tree on basis tensor e_{idx[0]} ⊗ ... ⊗ e_{idx[k-1]}:
    /// a signed standard basis vector, returned as (position, sign).
    fn tree_column(t: &RecursiveTensorSketchMap, idx: &[usize]) -> (usize, f64) {
        let m = t.output_dim();
        let leaf: Vec<(usize, f64)> = t
            .leaves()
            .iter()
            .zip(idx)
            .map(|(l, &i)| (l.buckets()[i], l.signs()[i]))
            .collect();
        if t.nodes().is_empty() {
            return leaf[0];
        }
        let mut inner: Vec<(usize, f64)> = Vec::new();
        for node in t.nodes() {
            let get = |c: TreeChild| match c {
                TreeChild::Leaf(i) => leaf[i],
                TreeChild::Inner(j) => inner[j],
            };
            let (pa, sa) = get(node.left);
            let (pb, sb) = get(node.right);
            let c = &t.combiners()[node.combiner];
            let pos = (c.left().buckets()[pa] + c.right().buckets()[pb]) % m;
            inner.push((pos, sa * sb * c.left().signs()[pa] * c.right().signs()[pb]));
        }
        *inner.last().unwrap()
    }

    fn materialized_apply(t: &RecursiveTensorSketchMap, factors: &[Vec<f64>]) -> Vec<f64> {
        let n = t.input_dim();
        let k = t.degree();
        let mut out = vec![0.0; t.output_dim()];
        let total = n.pow(k as u32);
        for flat in 0..total {
            let mut idx = vec![0; k];
            let mut r = flat;
            for slot in idx.iter_mut().rev() {
                *slot = r % n;
                r /= n;
            }
            let coef: f64 = idx.iter().zip(factors).map(|(&i, f)| f[i]).product();
            let (pos, sign) = tree_column(t, &idx);
            out[pos] += sign * coef;
        }
        out
    }

    #[test]
    fn combine_zero_is_zero() {
        let c = Tensor2Combiner::new(16, 1).unwrap();
        let b = random_vec(16, 2);
        assert!(c.combine(&[0.0; 16], &b).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combine_matches_materialized_column() {
        let c = Tensor2Combiner::new(4, 77).unwrap();
        let mut a = vec![0.0; 4];
        let mut b = vec![0.0; 4];
        a[1] = 1.0;
        b[2] = 1.0;
        assert_eq!(c.combine(&a, &b).unwrap(), combiner_column(&c, 1, 2));

        let c = Tensor2Combiner::new(32, 78).unwrap();
        let a = random_vec(32, 1);
        let b = random_vec(32, 2);
        let mut want = vec![0.0; 32];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let col = combiner_column(&c, i, j);
                for (w, v) in want.iter_mut().zip(&col) {
                    *w += ai * bj * v;
                }
            }
        }
        let got = c.combine(&a, &b).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn combine_rejects_bad_lengths() {
        let c = Tensor2Combiner::new(8, 0).unwrap();
        assert!(c.combine(&[0.0; 8], &[0.0; 4]).is_err());
        assert!(Tensor2Combiner::new(12, 0).is_err());
    }

    #[test]
    fn combine_unbiased_over_seeds() {
        let (a, b, a2, b2) = (random_vec(8, 1), random_vec(8, 2), random_vec(8, 3), random_vec(8, 4));
        let truth = dot(&a, &a2) * dot(&b, &b2);
        let samples: Vec<f64> = (0..100_000u64)
            .map(|s| {
                let c = Tensor2Combiner::new(8, s).unwrap();
                dot(&c.combine(&a, &b).unwrap(), &c.combine(&a2, &b2).unwrap())
            })
            .collect();
        let (mean, se) = mean_and_stderr(&samples);
        assert!((mean - truth).abs() <= 3.0 * se, "mean {mean} truth {truth} se {se}");
    }

    #[test]
    fn degree_zero_is_first_basis_vector() {
        let t = RecursiveTensorSketchMap::new(5, 16, 0, 3).unwrap();
        let empty: [&[f64]; 0] = [];
        let y = t.apply_rank1(&empty).unwrap();
        assert_eq!(y[0], 1.0);
        assert!(y[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degree_one_is_single_leaf() {
        let t = RecursiveTensorSketchMap::new(5, 16, 1, 3).unwrap();
        assert!(t.combiners().is_empty());
        let x = random_vec(5, 9);
        assert_eq!(t.apply_rank1(&[&x]).unwrap(), t.leaves()[0].apply(&x).unwrap());
    }

    #[test]
    fn structure_counts() {
        let t = RecursiveTensorSketchMap::new(3, 8, 4, 1).unwrap();
        assert_eq!(t.leaves().len(), 4);
        assert_eq!(t.combiners().len(), 3);
        let t = RecursiveTensorSketchMap::new(3, 8, 7, 1).unwrap();
        assert_eq!(t.combiners().len(), 6);
        assert_eq!(RecursiveTensorSketchMap::new(3, 10, 2, 1).unwrap().output_dim(), 16);
    }

    #[test]
    fn zero_factor_gives_zero() {
        let t = RecursiveTensorSketchMap::new(4, 16, 3, 1).unwrap();
        let f = vec![random_vec(4, 1), vec![0.0; 4], random_vec(4, 2)];
        assert!(t.apply_rank1(&f).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_factors() {
        let t = RecursiveTensorSketchMap::new(4, 16, 2, 1).unwrap();
        assert!(t.apply_rank1(&[random_vec(4, 1)]).is_err());
        assert!(t.apply_rank1(&[random_vec(4, 1), random_vec(3, 1)]).is_err());
    }

    #[test]
    fn small_instances_match_materialization() {
        // n^k <= 256
        for &(n, m, k) in &[(2, 4, 2), (4, 16, 4), (3, 8, 5), (16, 32, 2), (2, 64, 8), (6, 32, 3)] {
            for seed in 0..5u64 {
                let t = RecursiveTensorSketchMap::new(n, m, k, seed).unwrap();
                let factors: Vec<Vec<f64>> = (0..k).map(|i| random_vec(n, seed * 31 + i as u64)).collect();
                let want = materialized_apply(&t, &factors);
                let got = t.apply_rank1(&factors).unwrap();
                let scale = want.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-10 * scale, "n={n} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn linear_in_rank1_sums() {
        let t = RecursiveTensorSketchMap::new(5, 32, 3, 4).unwrap();
        let u: Vec<Vec<f64>> = (0..3).map(|i| random_vec(5, i)).collect();
        let v: Vec<Vec<f64>> = (0..3).map(|i| random_vec(5, 10 + i)).collect();
        let (a, b) = (1.5, -0.25);
        let lhs = t.apply_rank1_sum(&[(a, u.clone()), (b, v.clone())]).unwrap();
        let tu = t.apply_rank1(&u).unwrap();
        let tv = t.apply_rank1(&v).unwrap();
        let scale = lhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for j in 0..lhs.len() {
            assert!((lhs[j] - (a * tu[j] + b * tv[j])).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn inner_product_unbiased_rank1() {
        let u: Vec<Vec<f64>> = (0..3).map(|i| random_vec(2, i)).collect();
        let v: Vec<Vec<f64>> = (0..3).map(|i| random_vec(2, 20 + i)).collect();
        let truth: f64 = u.iter().zip(&v).map(|(a, b)| dot(a, b)).product();
        let samples: Vec<f64> = (0..100_000u64)
            .map(|s| {
                let t = RecursiveTensorSketchMap::new(2, 4, 3, s).unwrap();
                dot(&t.apply_rank1(&u).unwrap(), &t.apply_rank1(&v).unwrap())
            })
            .collect();
        let (mean, se) = mean_and_stderr(&samples);
        assert!((mean - truth).abs() <= 3.0 * se, "mean {mean} truth {truth} se {se}");
    }
}
