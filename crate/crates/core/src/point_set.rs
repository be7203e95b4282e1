use crate::error::{Error, Result};

/// Ordered multiset of `d`-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    /// `data` holds the points back to back. An empty set is representable;
    /// operations that need points reject it.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape {
                context: "point set buffer",
                expected: (data.len() / dim + 1) * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("point coordinates must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("point set has no rows"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape {
                    context: "point set row",
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute coordinate (the `L∞` radius of the set).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest Euclidean norm of a point (the `L2` radius of the set).
    pub fn max_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Points of `self` followed by points of `other`.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        self.check_same_dim(other)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { dim: self.dim, data })
    }

    /// Subset (with repetition) selected by row indices.
    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }

    /// Every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<PointSet> {
        Self::new(self.dim, self.data.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn check_same_dim(&self, other: &PointSet) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Shape {
                context: "point set dimension",
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub(crate) fn require_nonempty(&self, what: &'static str) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyInput(what))
        } else {
            Ok(())
        }
    }
}

/// A point set with a name, as read from JSONL input.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub label: String,
    pub points: PointSet,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let p = PointSet::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!((p.len(), p.dim()), (2, 2));
        assert_eq!(p.row(1), &[1.0, 1.0]);
        assert!(PointSet::from_rows(&[vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(PointSet::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointSet::new(1, vec![f64::NAN]).is_err());
        assert!(matches!(PointSet::from_rows::<Vec<f64>>(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn radii() {
        let p = PointSet::from_rows(&[[3.0, -4.0], [0.5, 0.5]]).unwrap();
        assert_eq!(p.max_abs(), 4.0);
        assert_eq!(p.max_norm(), 5.0);
    }
}

