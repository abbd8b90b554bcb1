//! Iterated tour partitioning and the per-edge flow lower bound.

use crate::instance::{Solution, Tour, TreeInstance};

/// `Σ_e 2·w(e)·⌈D_e/Q⌉`, where `D_e` counts the tokens below `e`. Every
/// feasible solution must cross `e` at least `⌈D_e/Q⌉` times in each
/// direction.
pub fn flow_lower_bound(inst: &TreeInstance) -> u64 {
    let q = inst.capacity();
    let below = inst.subtree_demand();
    (1..inst.n())
        .map(|v| 2 * inst.weight(v) * below[v].div_ceil(q))
        .sum()
}

/// Lists tokens in depth-first order (children by ascending id) and cuts the
/// list into consecutive blocks of exactly `Q`; the last block may be short.
/// A node's tokens may be split across two blocks.
pub fn itp_solve(inst: &TreeInstance) -> Solution {
    let q = inst.capacity();
    let mut tours = Vec::new();
    let mut current = Tour::default();
    let mut room = q;
    for &v in inst.preorder() {
        let mut left = inst.demand(v);
        while left > 0 {
            let take = left.min(room);
            current.add(v, take);
            left -= take;
            room -= take;
            if room == 0 {
                tours.push(std::mem::take(&mut current));
                room = q;
            }
        }
    }
    if !current.is_empty() {
        tours.push(current);
    }
    Solution::new(inst, tours)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_example() {
        let inst = TreeInstance::from_edges(4, 2, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], &[(1, 1), (2, 1), (3, 1)])
            .unwrap();
        assert_eq!(flow_lower_bound(&inst), 6);
        let sol = itp_solve(&inst);
        assert_eq!(sol.tours, vec![Tour::new([(1, 1), (2, 1)]), Tour::new([(3, 1)])]);
        assert_eq!(sol.total_cost, 6);
    }

    #[test]
    fn single_round_trip() {
        let inst = TreeInstance::from_edges(2, 1, &[(0, 1, 5)], &[(1, 1)]).unwrap();
        assert_eq!(flow_lower_bound(&inst), 10);
    }

    #[test]
    fn path_example() {
        let inst = TreeInstance::from_edges(3, 2, &[(0, 1, 1), (1, 2, 1)], &[(1, 1), (2, 2)]).unwrap();
        assert_eq!(flow_lower_bound(&inst), 6);
        // blocks {u, v} and {v}
        assert_eq!(itp_solve(&inst).total_cost, 8);
    }

    #[test]
    fn splits_node_tokens_across_blocks() {
        let inst = TreeInstance::from_edges(3, 3, &[(0, 1, 1), (0, 2, 1)], &[(1, 2), (2, 2)]).unwrap();
        let sol = itp_solve(&inst);
        assert_eq!(sol.tours, vec![Tour::new([(1, 2), (2, 1)]), Tour::new([(2, 1)])]);
    }
}
