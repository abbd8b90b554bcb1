use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::schedule::ThresholdSchedule;
use super::StructureParams;
use crate::instance::{NodeId, Solution, Tour, TreeInstance};

/// Tokens a tour picks inside the subtree rooted at `v`.
pub(crate) fn coverage(inst: &TreeInstance, tour: &Tour, v: NodeId) -> u64 {
    tour.pickups()
        .iter()
        .filter(|(&u, _)| inst.in_subtree(u, v))
        .map(|(_, &k)| k)
        .sum()
}

/// Partial tours of one bucket at one node, ascending by `(size, tour)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BucketView {
    pub node: NodeId,
    pub bucket: usize,
    pub lo: u64,
    pub hi: u64,
    /// `(size, tour index)` pairs.
    pub tours: Vec<(u64, usize)>,
}

impl BucketView {
    pub fn is_big(&self, gamma: usize) -> bool {
        self.tours.len() > gamma
    }

    /// Splits the bucket into `g` equal groups after padding the front with
    /// empty slots.
    pub fn grouping(&self, g: usize) -> Grouping {
        let g = g.max(1);
        let m = self.tours.len();
        let k = m.div_ceil(g);
        let empties = g * k - m;
        let slot = |p: usize| -> Option<(u64, usize)> {
            if p < empties {
                None
            } else {
                Some(self.tours[p - empties])
            }
        };
        let mut members = Vec::with_capacity(g);
        let mut h_max = Vec::with_capacity(g);
        let mut h_min = Vec::with_capacity(g);
        for j in 0..g {
            let slots: Vec<Option<(u64, usize)>> = (j * k..(j + 1) * k).map(slot).collect();
            h_max.push(slots.iter().map(|s| s.map_or(0, |x| x.0)).max().unwrap_or(0));
            h_min.push(slots.iter().map(|s| s.map_or(0, |x| x.0)).min().unwrap_or(0));
            members.push(slots);
        }
        Grouping {
            group_size: k,
            empties,
            members,
            h_max,
            h_min,
        }
    }
}

/// Equal-size groups of a bucket; `None` marks an empty padding slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub group_size: usize,
    pub empties: usize,
    pub members: Vec<Vec<Option<(u64, usize)>>>,
    pub h_max: Vec<u64>,
    pub h_min: Vec<u64>,
}

/// Every tour with positive coverage below `v`, sorted into buckets.
pub fn bucket_partial_tours(
    inst: &TreeInstance,
    sol: &Solution,
    v: NodeId,
    schedule: &ThresholdSchedule,
) -> Vec<BucketView> {
    let mut by_bucket: BTreeMap<usize, Vec<(u64, usize)>> = BTreeMap::new();
    for (id, t) in sol.tours.iter().enumerate() {
        let size = coverage(inst, t, v);
        if let Some(b) = schedule.bucket_of(size) {
            by_bucket.entry(b).or_default().push((size, id));
        }
    }
    by_bucket
        .into_iter()
        .map(|(bucket, mut tours)| {
            tours.sort_unstable();
            let (lo, hi) = schedule.range(bucket);
            BucketView {
                node: v,
                bucket,
                lo,
                hi,
                tours,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexityEntry {
    pub node: NodeId,
    pub bucket: usize,
    pub tours: usize,
    pub distinct_sizes: usize,
    /// More than `γ` tours and more than `g` distinct sizes.
    pub violation: bool,
}

/// Distinct partial-tour sizes per touched `(node, bucket)`.
pub fn profile_complexity(
    inst: &TreeInstance,
    sol: &Solution,
    schedule: &ThresholdSchedule,
    params: &StructureParams,
) -> Vec<ComplexityEntry> {
    let mut out = Vec::new();
    for v in 0..inst.n() {
        for b in bucket_partial_tours(inst, sol, v, schedule) {
            let distinct = b.tours.iter().map(|t| t.0).collect::<BTreeSet<_>>().len();
            out.push(ComplexityEntry {
                node: v,
                bucket: b.bucket,
                tours: b.tours.len(),
                distinct_sizes: distinct,
                violation: b.tours.len() > params.gamma && distinct > params.groups,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eps::Eps;
    use crate::structure::thresholds;

    fn star(leaves: usize, q: u64) -> TreeInstance {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v, 1)).collect();
        let demands: Vec<_> = (1..=leaves).map(|v| (v, 1)).collect();
        TreeInstance::from_edges(leaves + 1, q, &edges, &demands).unwrap()
    }

    #[test]
    fn coverages_five_and_seven_share_a_bucket() {
        let inst = TreeInstance::from_edges(2, 10, &[(0, 1, 1)], &[(1, 12)]).unwrap();
        let sol = Solution::new(&inst, vec![Tour::new([(1, 5)]), Tour::new([(1, 7)])]);
        let s = thresholds(10, Eps::new(1, 2).unwrap());
        let views = bucket_partial_tours(&inst, &sol, 1, &s);
        assert_eq!(views.len(), 1);
        assert_eq!((views[0].lo, views[0].hi), (5, 8));
        assert_eq!(views[0].tours, vec![(5, 0), (7, 1)]);
    }

    #[test]
    fn buckets_partition_entering_tours() {
        let inst = star(6, 3);
        let sol = Solution::new(
            &inst,
            vec![
                Tour::new([(1, 1), (2, 1), (3, 1)]),
                Tour::new([(4, 1), (5, 1)]),
                Tour::new([(6, 1)]),
            ],
        );
        let s = thresholds(3, Eps::new(1, 2).unwrap());
        let views = bucket_partial_tours(&inst, &sol, 0, &s);
        assert_eq!(views.iter().map(|b| b.tours.len()).sum::<usize>(), 3);
        let views = bucket_partial_tours(&inst, &sol, 4, &s);
        assert_eq!(views.iter().map(|b| b.tours.len()).sum::<usize>(), 1);
    }

    #[test]
    fn grouping_pads_the_front() {
        let view = BucketView {
            node: 0,
            bucket: 0,
            lo: 1,
            hi: 2,
            tours: (0..5).map(|i| (1, i)).collect(),
        };
        let g = view.grouping(3);
        assert_eq!(g.group_size, 2);
        assert_eq!(g.empties, 1);
        assert_eq!(g.members[0], vec![None, Some((1, 0))]);
        assert_eq!(g.h_max, vec![1, 1, 1]);
        assert_eq!(g.h_min, vec![0, 1, 1]);
    }

    #[test]
    fn crammed_small_bucket_is_flagged() {
        // five distinct sizes in one bucket with gamma = 4, g = 2
        let inst = TreeInstance::from_edges(2, 100, &[(0, 1, 1)], &[(1, 400)]).unwrap();
        let sizes = [62, 63, 64, 65, 66];
        let sol = Solution::new(&inst, sizes.iter().map(|&k| Tour::new([(1, k)])).collect());
        let s = thresholds(100, Eps::new(1, 2).unwrap());
        let params = StructureParams {
            gamma: 4,
            groups: 2,
            sample_prob: 0.5,
        };
        let report = profile_complexity(&inst, &sol, &s, &params);
        assert!(report.iter().any(|e| e.node == 1 && e.violation));

        let single = Solution::new(&inst, vec![Tour::new([(1, 62)])]);
        let report = profile_complexity(&inst, &single, &s, &params);
        assert!(report.iter().all(|e| e.distinct_sizes == 1 && !e.violation));
    }
}
