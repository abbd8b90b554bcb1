//! Rewrites a solution into the bucketed, grouped shape the structured DP searches.
//!
//! Starting from a feasible solution, levels are processed bottom-up. At each
//! node `v` of the current level, every big bucket is sorted, split into `g`
//! equal groups and shifted: a tour in group `j ≥ 2` gives up its partial
//! tour below `v` and receives the partial tour at the same position of group
//! `j − 1`, padded with tokens at `v` up to that group's maximum. Tours of
//! the first group lose their partial tour, and the partial tours of the last
//! group become orphans. Orphans are carried by two copies of randomly
//! sampled tours designated to the level, split between the copies by a
//! prefix rule.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::buckets::{bucket_partial_tours, coverage};
use super::schedule::thresholds;
use super::StructureParams;
use crate::eps::Eps;
use crate::instance::{tour_cost, NodeId, Solution, Tour, TreeInstance};
use crate::verify::{check_feasible, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformError {
    #[error("input solution is infeasible: {reason}")]
    InvalidSolution { reason: String },
    #[error(
        "level {level}, node {node}, bucket {bucket}: {needed} extra tours needed, {available} sampled"
    )]
    InsufficientExtraTours {
        level: usize,
        node: NodeId,
        bucket: usize,
        needed: usize,
        available: usize,
    },
    #[error("level {level}: orphans assigned to sampled tour {tour} need {load} > {capacity} in the second copy")]
    RepackOverflow {
        level: usize,
        tour: usize,
        load: u64,
        capacity: u64,
    },
}

impl TransformError {
    /// Failures that depend on the random sample and may vanish with another seed.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, TransformError::InvalidSolution { .. })
    }
}

/// Tours chosen as extra tours and the level each is designated to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sampling {
    /// `(tour index, designated level)`, ascending by tour index.
    pub chosen: Vec<(usize, usize)>,
    pub sampled_cost: u64,
}

/// Level of a node: the depot is level 1.
fn level(inst: &TreeInstance, v: NodeId) -> usize {
    inst.depth(v) + 1
}

/// Each tour is picked with probability `prob`; a picked tour is designated
/// to a uniformly random level among those it visits.
pub fn sample_extra_tours(inst: &TreeInstance, sol: &Solution, prob: f64, seed: u64) -> Sampling {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prob = prob.clamp(0.0, 1.0);
    let mut chosen = Vec::new();
    let mut sampled_cost = 0;
    for (id, t) in sol.tours.iter().enumerate() {
        if !rng.gen_bool(prob) {
            continue;
        }
        let deepest = t.nodes().map(|v| level(inst, v)).max().unwrap_or(1);
        chosen.push((id, rng.gen_range(1..=deepest)));
        sampled_cost += tour_cost(inst, t);
    }
    Sampling {
        chosen,
        sampled_cost,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BucketStat {
    pub level: usize,
    pub node: NodeId,
    pub bucket: usize,
    pub tours: usize,
    pub big: bool,
    pub group_size: usize,
    pub orphan_tokens: u64,
    pub pad_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformReport {
    pub seed: u64,
    pub eps: Eps,
    pub gamma: usize,
    pub groups: usize,
    pub sample_prob: f64,
    pub cost_before: u64,
    /// Recomputed from the output tours.
    pub cost_after: u64,
    /// Running total maintained edit by edit during the transform.
    pub tracked_cost: u64,
    pub sampled_tours: usize,
    pub sampled_cost: u64,
    pub extra_tours_used: usize,
    /// `sampled_cost − (tracked_cost − cost_before)/2`; negative if the
    /// edits cost more than the sampled budget.
    pub shortcut_savings: i64,
    pub pad_tokens: u64,
    pub orphan_tokens: u64,
    pub buckets: Vec<BucketStat>,
}

#[derive(Clone, Debug)]
pub struct TransformOutput {
    /// Input instance plus pad tokens.
    pub instance: TreeInstance,
    pub solution: Solution,
    pub report: TransformReport,
}

type Pickups = Vec<(NodeId, u64)>;

fn partial(inst: &TreeInstance, t: &Tour, v: NodeId) -> Pickups {
    t.pickups()
        .iter()
        .filter(|(&u, _)| inst.in_subtree(u, v))
        .map(|(&u, &k)| (u, k))
        .collect()
}

struct Item {
    pickups: Pickups,
    node: NodeId,
    pad: u64,
    size: u64,
}

pub fn transform(
    inst: &TreeInstance,
    sol: &Solution,
    eps: Eps,
    params: &StructureParams,
    seed: u64,
) -> Result<TransformOutput, TransformError> {
    let check = check_feasible(inst, sol);
    if let Some(v) = check
        .violations
        .iter()
        .find(|v| !matches!(v, Violation::CostMismatch { .. }))
    {
        return Err(TransformError::InvalidSolution {
            reason: format!("{v:?}"),
        });
    }
    let q = inst.capacity();
    let schedule = thresholds(q, eps);
    let g = params.groups.max(1);
    let sampling = sample_extra_tours(inst, sol, params.sample_prob, seed);
    let cost_before: u64 = sol.tours.iter().map(|t| tour_cost(inst, t)).sum();

    let mut work: Vec<Tour> = sol.tours.clone();
    let mut tracked = cost_before as i128 + 2 * sampling.sampled_cost as i128;
    let mut pads = vec![0u64; inst.n()];
    let mut stats = Vec::new();
    let mut orphan_total = 0u64;
    let mut extras_used = 0usize;

    let deepest = (0..inst.n()).map(|v| level(inst, v)).max().unwrap_or(1);
    for lvl in (1..=deepest).rev() {
        let designated: Vec<usize> = sampling
            .chosen
            .iter()
            .filter(|&&(_, l)| l == lvl)
            .map(|&(id, _)| id)
            .collect();
        let mut items: BTreeMap<usize, Vec<Item>> = BTreeMap::new();

        for v in (0..inst.n()).filter(|&v| level(inst, v) == lvl) {
            let current = Solution {
                tours: work.clone(),
                total_cost: 0,
            };
            for view in bucket_partial_tours(inst, &current, v, &schedule) {
                let big = view.is_big(params.gamma);
                let mut stat = BucketStat {
                    level: lvl,
                    node: v,
                    bucket: view.bucket,
                    tours: view.tours.len(),
                    big,
                    group_size: 0,
                    orphan_tokens: 0,
                    pad_tokens: 0,
                };
                if !big {
                    stats.push(stat);
                    continue;
                }
                let grouping = view.grouping(g);
                let k = grouping.group_size;
                stat.group_size = k;
                let slots: Vec<Option<(u64, usize)>> =
                    grouping.members.iter().flatten().copied().collect();
                let snapshot: Vec<Option<(u64, usize, Pickups)>> = slots
                    .iter()
                    .map(|s| s.map(|(size, id)| (size, id, partial(inst, &work[id], v))))
                    .collect();

                for (p, slot) in snapshot.iter().enumerate() {
                    let Some((size, id, own)) = slot else { continue };
                    let before = tour_cost(inst, &work[*id]);
                    for &(u, k) in own {
                        work[*id].remove(u, k);
                    }
                    if p >= k {
                        let h_prev = grouping.h_max[p / k - 1];
                        assert!(h_prev <= *size, "shifted partial tour must not grow");
                        let (src_size, src) = match &snapshot[p - k] {
                            Some((s, _, pk)) => (*s, pk.clone()),
                            None => (0, Vec::new()),
                        };
                        for (u, k) in src {
                            work[*id].add(u, k);
                        }
                        let pad = h_prev - src_size;
                        work[*id].add(v, pad);
                        pads[v] += pad;
                        stat.pad_tokens += pad;
                    }
                    debug_assert!(work[*id].load() <= q);
                    tracked += tour_cost(inst, &work[*id]) as i128 - before as i128;
                }

                let h_last = grouping.h_max[g - 1];
                let orphans: Vec<(u64, Pickups)> = snapshot[(g - 1) * k..]
                    .iter()
                    .flatten()
                    .map(|(s, _, pk)| (*s, pk.clone()))
                    .collect();
                let mut hosts: Vec<(u64, usize)> = designated
                    .iter()
                    .map(|&id| (coverage(inst, &sol.tours[id], v), id))
                    .filter(|&(s, _)| schedule.bucket_of(s) == Some(view.bucket))
                    .collect();
                if hosts.len() < orphans.len() {
                    return Err(TransformError::InsufficientExtraTours {
                        level: lvl,
                        node: v,
                        bucket: view.bucket,
                        needed: orphans.len(),
                        available: hosts.len(),
                    });
                }
                hosts.sort_unstable_by(|a, b| b.cmp(a));
                for ((size, pickups), &(_, host)) in orphans.into_iter().zip(&hosts) {
                    let pad = h_last - size;
                    pads[v] += pad;
                    stat.pad_tokens += pad;
                    stat.orphan_tokens += size;
                    orphan_total += size;
                    items.entry(host).or_default().push(Item {
                        pickups,
                        node: v,
                        pad,
                        size: h_last,
                    });
                }
                stats.push(stat);
            }
        }

        for &id in &designated {
            let original = tour_cost(inst, &sol.tours[id]);
            let mut copies = [Tour::default(), Tour::default()];
            let mut room = q;
            let mut second = false;
            for item in items.remove(&id).unwrap_or_default() {
                if !second && item.size > room {
                    second = true;
                }
                let c = &mut copies[second as usize];
                for &(u, k) in &item.pickups {
                    c.add(u, k);
                }
                c.add(item.node, item.pad);
                if !second {
                    room -= item.size;
                }
            }
            if copies[1].load() > q {
                return Err(TransformError::RepackOverflow {
                    level: lvl,
                    tour: id,
                    load: copies[1].load(),
                    capacity: q,
                });
            }
            for c in copies {
                tracked += tour_cost(inst, &c) as i128 - original as i128;
                if !c.is_empty() {
                    work.push(c);
                    extras_used += 1;
                }
            }
        }
    }

    work.retain(|t| !t.is_empty());
    let demand: Vec<u64> = (0..inst.n()).map(|v| inst.demand(v) + pads[v]).collect();
    let inst2 = inst.with_demands(demand);
    let solution = Solution::new(&inst2, work);
    let growth = tracked - cost_before as i128;
    debug_assert!(growth % 2 == 0, "every edit changes cost by whole round trips");
    let shortcut_savings = i64::try_from(sampling.sampled_cost as i128 - growth / 2).expect("fits");
    let tracked = u64::try_from(tracked).expect("tracked cost stays non-negative");
    let report = TransformReport {
        seed,
        eps,
        gamma: params.gamma,
        groups: g,
        sample_prob: params.sample_prob,
        cost_before,
        cost_after: solution.total_cost,
        tracked_cost: tracked,
        sampled_tours: sampling.chosen.len(),
        sampled_cost: sampling.sampled_cost,
        extra_tours_used: extras_used,
        shortcut_savings,
        pad_tokens: pads.iter().sum(),
        orphan_tokens: orphan_total,
        buckets: stats,
    };
    Ok(TransformOutput {
        instance: inst2,
        solution,
        report,
    })
}

/// Sampling statistics for one seed, kept even when the transform fails.
#[derive(Clone, Debug, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub sampled_tours: usize,
    pub sampled_cost: u64,
    pub report: Option<TransformReport>,
    pub error: Option<TransformError>,
}

/// Runs the transform for every seed in parallel; results keep seed order.
pub fn run_seeds(
    inst: &TreeInstance,
    sol: &Solution,
    eps: Eps,
    params: &StructureParams,
    seeds: &[u64],
) -> Vec<(SeedOutcome, Option<TransformOutput>)> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = sample_extra_tours(inst, sol, params.sample_prob, seed);
            let mut outcome = SeedOutcome {
                seed,
                sampled_tours: s.chosen.len(),
                sampled_cost: s.sampled_cost,
                report: None,
                error: None,
            };
            match transform(inst, sol, eps, params, seed) {
                Ok(out) => {
                    outcome.report = Some(out.report.clone());
                    (outcome, Some(out))
                }
                Err(e) => {
                    outcome.error = Some(e);
                    (outcome, None)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::restrict_to_instance;
    use crate::structure::profile_complexity;

    fn star(leaves: usize) -> (TreeInstance, Solution) {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v, 1)).collect();
        let demands: Vec<_> = (1..=leaves).map(|v| (v, 1)).collect();
        let inst = TreeInstance::from_edges(leaves + 1, 3, &edges, &demands).unwrap();
        let tours = (1..=leaves).map(|v| Tour::new([(v, 1)])).collect();
        let sol = Solution::new(&inst, tours);
        (inst, sol)
    }

    #[test]
    fn all_small_buckets_leave_the_instance_alone() {
        let (inst, sol) = star(12);
        let params = StructureParams {
            gamma: 100,
            groups: 3,
            sample_prob: 0.5,
        };
        let out = transform(&inst, &sol, Eps::new(1, 2).unwrap(), &params, 1).unwrap();
        assert_eq!(out.instance, inst);
        assert_eq!(out.report.orphan_tokens, 0);
        assert_eq!(out.report.pad_tokens, 0);
        assert_eq!(out.solution.tours, sol.tours);
        assert_eq!(out.report.cost_after, out.report.tracked_cost);
    }

    #[test]
    fn twelve_unit_tours_through_the_depot() {
        let (inst, sol) = star(12);
        let params = StructureParams {
            gamma: 2,
            groups: 3,
            sample_prob: 1.0,
        };
        let eps = Eps::new(1, 2).unwrap();
        // seed 1 designates four tours to the depot's level; seed 0 only three
        assert!(transform(&inst, &sol, eps, &params, 0).is_err());
        let out = transform(&inst, &sol, eps, &params, 1).unwrap();
        let root = out
            .report
            .buckets
            .iter()
            .find(|b| b.node == 0 && b.big)
            .unwrap();
        assert_eq!(root.group_size, 4);
        assert_eq!(root.orphan_tokens, 4);
        assert_eq!(out.report.orphan_tokens, 4);
        assert!(check_feasible(&out.instance, &out.solution).is_clean());
        let schedule = thresholds(3, eps);
        assert!(profile_complexity(&out.instance, &out.solution, &schedule, &params)
            .iter()
            .all(|e| !e.violation));
        assert_eq!(out.report.cost_after, out.report.tracked_cost);
        let back = restrict_to_instance(&inst, &out.solution);
        assert!(check_feasible(&inst, &back).is_clean());
    }

    #[test]
    fn shortage_is_retryable() {
        let (inst, sol) = star(12);
        let params = StructureParams {
            gamma: 2,
            groups: 3,
            sample_prob: 0.0,
        };
        let err = transform(&inst, &sol, Eps::new(1, 2).unwrap(), &params, 0).unwrap_err();
        assert!(err.is_retryable());
        assert!(matches!(
            err,
            TransformError::InsufficientExtraTours {
                level: 1,
                node: 0,
                needed: 4,
                available: 0,
                ..
            }
        ));
    }
}
