//! Seeded instance generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{NodeId, TreeInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Parent of node `i` uniform in `0..i`, weights in `1..=9`.
    Random,
    /// Depot plus `n − 1` leaves, unit weights.
    Star,
    /// A single path from the depot, weights in `1..=9`.
    Path,
    /// Heap-ordered binary tree, weights in `1..=9`.
    Binary,
    /// `min(12, n − 1)` disjoint unit-weight paths hanging off the depot.
    ParallelPaths,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandModel {
    /// One token at every non-depot node.
    Unit,
    /// Uniform in `1..=Q−1` (just `1` when `Q = 1`).
    Uniform,
    /// Uniform in `1..=2Q`, so some nodes need full tours of their own.
    Heavy,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

macro_rules! text_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = GenError;
            fn from_str(s: &str) -> Result<Self, GenError> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(GenError::Unknown { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

text_enum!(Shape, "shape", Random => "random", Star => "star", Path => "path",
    Binary => "binary", ParallelPaths => "parallel-paths");
text_enum!(DemandModel, "demand model", Unit => "unit", Uniform => "uniform", Heavy => "heavy");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub shape: Shape,
    pub n: usize,
    pub capacity: u64,
    pub demand: DemandModel,
    pub seed: u64,
}

pub fn generate(spec: &GenSpec) -> Result<TreeInstance, GenError> {
    let n = spec.n;
    if n < 2 {
        return Err(GenError::TooFewNodes(n));
    }
    let q = spec.capacity;
    if q == 0 {
        return Err(GenError::ZeroCapacity);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut weight = vec![0u64; n];
    match spec.shape {
        Shape::Random => {
            for i in 1..n {
                parent[i] = Some(rng.gen_range(0..i));
                weight[i] = rng.gen_range(1..=9);
            }
        }
        Shape::Star => {
            for i in 1..n {
                parent[i] = Some(0);
                weight[i] = 1;
            }
        }
        Shape::Path => {
            for i in 1..n {
                parent[i] = Some(i - 1);
                weight[i] = rng.gen_range(1..=9);
            }
        }
        Shape::Binary => {
            for i in 1..n {
                parent[i] = Some((i - 1) / 2);
                weight[i] = rng.gen_range(1..=9);
            }
        }
        Shape::ParallelPaths => {
            let k = (n - 1).min(12);
            let base = (n - 1) / k;
            let extra = (n - 1) % k;
            let mut next = 1;
            for j in 0..k {
                let len = base + usize::from(j < extra);
                for step in 0..len {
                    parent[next] = Some(if step == 0 { 0 } else { next - 1 });
                    weight[next] = 1;
                    next += 1;
                }
            }
        }
    }
    let mut demand = vec![0u64; n];
    for d in demand.iter_mut().skip(1) {
        *d = match spec.demand {
            DemandModel::Unit => 1,
            DemandModel::Uniform => rng.gen_range(1..=q.saturating_sub(1).max(1)),
            DemandModel::Heavy => rng.gen_range(1..=2 * q),
        };
    }
    Ok(TreeInstance::new(q, parent, weight, demand).expect("generated trees are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::star3;

    fn spec(shape: Shape, n: usize, q: u64, demand: DemandModel, seed: u64) -> GenSpec {
        GenSpec {
            shape,
            n,
            capacity: q,
            demand,
            seed,
        }
    }

    #[test]
    fn unit_star_is_the_small_star() {
        let inst = generate(&spec(Shape::Star, 4, 2, DemandModel::Unit, 7)).unwrap();
        assert_eq!(inst, star3());
    }

    #[test]
    fn same_seed_same_instance() {
        let s = spec(Shape::Random, 30, 5, DemandModel::Uniform, 11);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let t = GenSpec { seed: 12, ..s };
        assert_ne!(generate(&s).unwrap(), generate(&t).unwrap());
    }

    #[test]
    fn twelve_parallel_paths() {
        let inst = generate(&spec(Shape::ParallelPaths, 25, 3, DemandModel::Unit, 0)).unwrap();
        assert_eq!(inst.children(0).len(), 12);
        assert!(inst.preorder().iter().all(|&v| inst.children(v).len() <= 12));
        assert_eq!(inst.height(), 2);
    }

    #[test]
    fn heavy_demands_reach_capacity() {
        let inst = generate(&spec(Shape::Random, 40, 3, DemandModel::Heavy, 1)).unwrap();
        assert!(inst.demands().iter().any(|&d| d >= 3));
    }

    #[test]
    fn names_round_trip() {
        for s in ["random", "star", "path", "binary", "parallel-paths"] {
            assert_eq!(s.parse::<Shape>().unwrap().to_string(), s);
        }
        assert!("tree".parse::<Shape>().is_err());
    }
}
