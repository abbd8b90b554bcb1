use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::structure::ThresholdSchedule;

/// How one bucket's partial tours are stored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BucketRepr {
    Empty,
    /// Every size, ascending.
    Small(Vec<u64>),
    /// Distinct sizes ascending (`h`) and how many tours have each (`l`).
    Big { h: Vec<u64>, l: Vec<u64> },
}

/// Per-node summary of partial-tour sizes, bucket by bucket.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeProfile {
    /// Tokens picked below the node, pads included.
    pub o: u64,
    pub buckets: Vec<BucketRepr>,
}

impl NodeProfile {
    /// Buckets holding at most `gamma` tours are stored exactly.
    pub fn from_sizes(o: u64, sizes: &[u64], schedule: &ThresholdSchedule, gamma: usize) -> Self {
        let mut per: Vec<Vec<u64>> = vec![Vec::new(); schedule.len()];
        for &s in sizes {
            let b = schedule
                .bucket_of(s)
                .unwrap_or_else(|| panic!("size {s} outside 1..=Q"));
            per[b].push(s);
        }
        let buckets = per
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                if v.is_empty() {
                    BucketRepr::Empty
                } else if v.len() <= gamma {
                    BucketRepr::Small(v)
                } else {
                    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
                    for s in v {
                        *counts.entry(s).or_insert(0) += 1;
                    }
                    BucketRepr::Big {
                        h: counts.keys().copied().collect(),
                        l: counts.values().copied().collect(),
                    }
                }
            })
            .collect();
        NodeProfile { o, buckets }
    }

    /// All sizes, ascending.
    pub fn sizes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for b in &self.buckets {
            match b {
                BucketRepr::Empty => {}
                BucketRepr::Small(v) => out.extend(v),
                BucketRepr::Big { h, l } => {
                    for (&s, &c) in h.iter().zip(l) {
                        out.extend(std::iter::repeat_n(s, c as usize));
                    }
                }
            }
        }
        out
    }

    pub fn tours(&self) -> usize {
        self.sizes().len()
    }

    /// Canonical text form: equal profiles encode identically.
    pub fn encode(&self) -> String {
        let mut out = format!("o={}", self.o);
        for (i, b) in self.buckets.iter().enumerate() {
            match b {
                BucketRepr::Empty => {}
                BucketRepr::Small(v) => {
                    let _ = write!(out, ";{i}:t{v:?}");
                }
                BucketRepr::Big { h, l } => {
                    let _ = write!(out, ";{i}:h{h:?}l{l:?}");
                }
            }
        }
        out
    }

    /// Checks the representation invariants against a schedule.
    pub fn is_well_formed(&self, schedule: &ThresholdSchedule) -> bool {
        if self.buckets.len() != schedule.len() {
            return false;
        }
        let mut total = 0;
        for (i, b) in self.buckets.iter().enumerate() {
            let (lo, hi) = schedule.range(i);
            let in_range = |s: &u64| *s >= lo && *s < hi;
            match b {
                BucketRepr::Empty => {}
                BucketRepr::Small(v) => {
                    if v.is_empty() || !v.iter().all(in_range) || !v.windows(2).all(|w| w[0] <= w[1]) {
                        return false;
                    }
                    total += v.iter().sum::<u64>();
                }
                BucketRepr::Big { h, l } => {
                    if h.is_empty()
                        || h.len() != l.len()
                        || !h.iter().all(in_range)
                        || !h.windows(2).all(|w| w[0] < w[1])
                        || l.contains(&0)
                    {
                        return false;
                    }
                    total += h.iter().zip(l).map(|(a, b)| a * b).sum::<u64>();
                }
            }
        }
        total <= self.o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eps::Eps;
    use crate::structure::thresholds;

    #[test]
    fn small_and_big_buckets() {
        let s = thresholds(10, Eps::new(1, 2).unwrap());
        let p = NodeProfile::from_sizes(30, &[5, 7, 5, 1, 5], &s, 2);
        assert_eq!(p.buckets[0], BucketRepr::Small(vec![1]));
        assert_eq!(
            p.buckets[3],
            BucketRepr::Big {
                h: vec![5, 7],
                l: vec![3, 1]
            }
        );
        assert_eq!(p.sizes(), vec![1, 5, 5, 5, 7]);
        assert!(p.is_well_formed(&s));
        assert_eq!(p.encode(), "o=30;0:t[1];3:h[5, 7]l[3, 1]");
        let q = NodeProfile::from_sizes(30, &[5, 5, 7, 5, 1], &s, 2);
        assert_eq!(p.encode(), q.encode());
    }
}
