//! Capacitated vehicle routing on rooted, edge-weighted trees.

pub mod baselines;
pub mod bench;
pub mod dp;
pub mod eps;
pub mod exact;
pub mod generate;
pub mod height;
pub mod instance;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod structure;
pub mod verify;

pub use eps::Eps;
pub use instance::{NodeId, Solution, Tour, TreeInstance, ROOT};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/formats.md")]
    struct Formats;
    #[doc = include_str!("../../../book/src/baselines.md")]
    struct Baselines;
    #[doc = include_str!("../../../book/src/height.md")]
    struct Height;
    #[doc = include_str!("../../../book/src/structure.md")]
    struct Structure;
    #[doc = include_str!("../../../book/src/profile_dp.md")]
    struct ProfileDp;
    #[doc = include_str!("../../../book/src/bench.md")]
    struct Bench;
}
