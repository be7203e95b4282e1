//! Sketches that embed the Gaussian kernel distance between point sets.
//!
//! A point `x` maps to a vector `G(x)`; a set maps to the mean of its point
//! sketches, and `‖F(P) - F(Q)‖²` approximates
//! `D²_K(P,Q) = κ(P,P) + κ(Q,Q) - 2κ(P,Q)` for `K(x,p) = exp(-‖x-p‖²)`.

pub mod apps;
pub mod calibrate;
pub mod compress;
pub mod count_sketch;
pub mod distance;
pub mod error;
pub mod feature_maps;
pub mod io;
pub mod kpca;
pub mod planner;
pub mod point_set;
pub mod seed;
pub mod sketchers;
pub mod tensor_sketch;

#[cfg(test)]
mod test_util;

pub use apps::{nn_index_build, nn_query, two_sample_test, NnMatch, ResampleMode, SetIndex, TwoSampleResult};
pub use compress::{median_estimate, replicated_sketched_dk2, JlProjector};
pub use count_sketch::CountSketchMap;
pub use distance::{exact_dk2, sketched_dk2, DistanceReport};
pub use error::{Error, Result};
pub use kpca::{kpca_error, kpca_fit, KpcaConfig, RankKBasis};
pub use planner::{plan, AccuracyTarget, PlanConstants, PlannedConfig, Task, Variant};
pub use point_set::{LabeledSet, PointSet};
pub use sketchers::{Embedding, Fingerprint, GaussianSketch, SketchConfig};
pub use tensor_sketch::RecursiveTensorSketchMap;
