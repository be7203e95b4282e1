//! Downstream uses of the set embedding.

pub mod nn;
pub mod two_sample;

pub use nn::{nn_index_build, nn_query, NnMatch, SetIndex};
pub use two_sample::{exact_two_sample_test, resample_indices, two_sample_test, ResampleMode, TwoSampleResult};
