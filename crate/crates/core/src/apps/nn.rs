//! Nearest point set under the sketched kernel distance, by exact linear scan.

use crate::compress::JlProjector;
use crate::error::{Error, Result};
use crate::planner::PlannedConfig;
use crate::point_set::{LabeledSet, PointSet};
use crate::seed::{derive_seed, SeedTag};
use crate::sketchers::{Embedding, Fingerprint, GaussianSketch};

/// Embedded family of point sets sharing one drawn sketch.
#[derive(Debug, Clone)]
pub struct SetIndex {
    sketch: GaussianSketch,
    projector: Option<JlProjector>,
    embeddings: Vec<Embedding>,
    labels: Vec<String>,
    fingerprint: Fingerprint,
    /// Assumed minimum pairwise kernel distance; recorded, not enforced.
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnMatch {
    pub index: usize,
    pub label: String,
    /// Sketched squared kernel distance to the query.
    pub squared_distance: f64,
}

impl SetIndex {
    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn sketch(&self) -> &GaussianSketch {
        &self.sketch
    }

    /// Embeds `q` exactly as stored sets were embedded.
    pub fn embed(&self, q: &PointSet) -> Result<Embedding> {
        let e = self.sketch.embed_set(q)?;
        match &self.projector {
            Some(p) => p.project_embedding(&e),
            None => Ok(e),
        }
    }
}

/// Embeds every set under one sketch drawn from `master_seed`, optionally
/// followed by a shared JL projection to `jl_dim` coordinates.
pub fn nn_index_build(sets: &[LabeledSet], plan: &PlannedConfig, master_seed: u64, jl_dim: Option<usize>) -> Result<SetIndex> {
    let first = sets.first().ok_or(Error::EmptyInput("no point sets to index"))?;
    let d = first.points.dim();
    if let Some(bad) = sets.iter().find(|s| s.points.dim() != d) {
        return Err(Error::Shape {
            context: "indexed set dimension",
            expected: d,
            got: bad.points.dim(),
        });
    }
    let sketch = GaussianSketch::from_plan(plan, master_seed)?;
    let projector = jl_dim
        .map(|rho| JlProjector::new(sketch.output_dim(), rho, derive_seed(master_seed, SeedTag::Projector, 0)))
        .transpose()?;
    let fingerprint = match &projector {
        Some(p) => p.compose_fingerprint(sketch.fingerprint()),
        None => sketch.fingerprint(),
    };
    let mut index = SetIndex {
        sketch,
        projector,
        embeddings: Vec::with_capacity(sets.len()),
        labels: sets.iter().map(|s| s.label.clone()).collect(),
        fingerprint,
        min_separation: None,
    };
    for s in sets {
        let e = index.embed(&s.points)?;
        index.embeddings.push(e);
    }
    Ok(index)
}

/// Stored set minimizing the sketched distance to `q`; ties go to the lowest index.
pub fn nn_query(index: &SetIndex, q: &PointSet) -> Result<NnMatch> {
    q.require_nonempty("query set is empty")?;
    let eq = index.embed(q)?;
    if eq.fingerprint != index.fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in index.embeddings.iter().enumerate() {
        let dist = e.squared_distance(&eq)?;
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((i, dist));
        }
    }
    let (i, dist) = best.ok_or(Error::EmptyInput("index is empty"))?;
    Ok(NnMatch {
        index: i,
        label: index.labels[i].clone(),
        squared_distance: dist,
    })
}
