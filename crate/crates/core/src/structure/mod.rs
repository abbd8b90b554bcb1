//! Threshold schedules, size buckets and the structure-preserving transform
//! that turns any solution into one whose partial tours take few sizes.

mod buckets;
mod schedule;
mod transform;

pub use buckets::{bucket_partial_tours, profile_complexity, BucketView, ComplexityEntry, Grouping};
pub use schedule::{thresholds, ThresholdSchedule};
pub use transform::{
    run_seeds, sample_extra_tours, transform, BucketStat, Sampling, SeedOutcome, TransformError,
    TransformOutput, TransformReport,
};

use serde::{Deserialize, Serialize};

use crate::eps::Eps;

/// Bucket-size knobs shared by the transform and the structured solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    /// A bucket holding more than `gamma` partial tours is big.
    pub gamma: usize,
    /// Number of groups a big bucket is split into.
    pub groups: usize,
    /// Probability that a tour is sampled as an extra tour.
    pub sample_prob: f64,
}

impl StructureParams {
    /// `γ = ⌈log₂³n/ε²⌉`, `g = ⌈2·log₂n/ε²⌉`, sampling probability `ε`.
    pub fn defaults(n: usize, eps: Eps) -> Self {
        let log_n = (n.max(2) as f64).log2();
        let e = eps.as_f64();
        StructureParams {
            gamma: (log_n.powi(3) / (e * e)).ceil() as usize,
            groups: (2.0 * log_n / (e * e)).ceil().max(1.0) as usize,
            sample_prob: e.min(1.0),
        }
    }
}
