//! Height reduction by heavy-path decomposition and up-pushes.
//!
//! The tree is cut into heavy paths: starting at the depot, always descend
//! into the child with the largest subtree. Removing a path leaves subtrees
//! of at most half the size, each decomposed the same way one level deeper.
//! Every path here includes its attachment node as its first entry, so each
//! edge lies on exactly one path.
//!
//! A path with more than `δ·log₂n/ε` edges is compressed: a few anchors are
//! kept in a chain, and every node strictly between two consecutive anchors
//! becomes a weight-0 child of the upper one. Subtrees hanging off such a
//! node move to the upper anchor with their original edge weight. Node ids
//! never change, so lifting a solution back is the identity on pickups.

use thiserror::Error;

use crate::eps::Eps;
use crate::instance::{NodeId, Solution, TreeInstance, ROOT};

/// A heavy path. `nodes[0]` is where it attaches to its parent path (the
/// depot for the first path); the remaining nodes belong to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeavyPath {
    pub level: usize,
    pub nodes: Vec<NodeId>,
}

impl HeavyPath {
    pub fn edges(&self) -> usize {
        self.nodes.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathDecomposition {
    pub paths: Vec<HeavyPath>,
    /// Level of the path each node belongs to; the depot is on level 1.
    pub label: Vec<usize>,
    /// Index into `paths` of the path each non-depot node belongs to.
    pub path_of: Vec<Option<usize>>,
}

impl PathDecomposition {
    pub fn levels(&self) -> usize {
        self.label.iter().copied().max().unwrap_or(1)
    }
}

/// Heavy child = largest subtree, ties to the smallest id.
pub fn decompose_paths(inst: &TreeInstance) -> PathDecomposition {
    let n = inst.n();
    let size = inst.subtree_size();
    let heavy = |v: NodeId| -> Option<NodeId> {
        inst.children(v)
            .iter()
            .copied()
            .max_by_key(|&c| (size[c], std::cmp::Reverse(c)))
    };
    let mut paths = Vec::new();
    let mut label = vec![0; n];
    let mut path_of = vec![None; n];
    label[ROOT] = 1;
    // (attachment, first node, level)
    let mut queue = std::collections::VecDeque::new();
    if let Some(h) = heavy(ROOT) {
        queue.push_back((ROOT, h, 1));
    }
    while let Some((top, first, level)) = queue.pop_front() {
        let mut nodes = vec![top];
        let mut x = Some(first);
        while let Some(v) = x {
            nodes.push(v);
            x = heavy(v);
        }
        let id = paths.len();
        for &v in &nodes[1..] {
            label[v] = level;
            path_of[v] = Some(id);
        }
        // the attachment's other children are handled by its own path,
        // except for the depot which belongs to no earlier path
        let owned = if level == 1 { 0 } else { 1 };
        for &v in &nodes[owned..] {
            let h = heavy(v);
            for &c in inst.children(v) {
                if Some(c) != h {
                    queue.push_back((v, c, level + 1));
                }
            }
        }
        paths.push(HeavyPath { level, nodes });
    }
    PathDecomposition {
        paths,
        label,
        path_of,
    }
}

/// Anchor positions on a path given its edge weights, `weights[j]` being the
/// edge into `nodes[j + 1]`. Returns indices into the path's node list.
///
/// The first two nodes are always anchors. After anchor `a` at prefix weight
/// `D_a`, the next anchor is the farthest node `m` with `D_{m−1} − D_a ≤ ε·D_a`;
/// the last node is always an anchor.
pub fn select_anchors(weights: &[u64], eps: Eps) -> Vec<usize> {
    let k = weights.len();
    if k == 0 {
        return vec![0];
    }
    let mut prefix = vec![0u64; k + 1];
    for j in 0..k {
        prefix[j + 1] = prefix[j] + weights[j];
    }
    let (p, q) = (eps.numer() as u128, eps.denom() as u128);
    let mut anchors = vec![0, 1];
    let mut cur = 1;
    while cur < k {
        let base = prefix[cur] as u128;
        // D_{m−1} − D_cur ≤ ε·D_cur  ⇔  q·(D_{m−1} − D_cur) ≤ p·D_cur
        let mut m = cur + 1;
        while m < k && q * (prefix[m] as u128 - base) <= p * base {
            m += 1;
        }
        anchors.push(m);
        cur = m;
    }
    anchors
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReduceConfig {
    pub eps: Eps,
    /// Paths with at most `delta·log₂n/ε` edges are kept verbatim.
    pub delta: f64,
}

impl ReduceConfig {
    pub fn new(eps: Eps) -> Self {
        ReduceConfig { eps, delta: 1.0 }
    }

    /// Constant `c` in `cost_T(lift(s)) ≤ (1 + c·ε)·cost_T′(s)`.
    pub const SANDWICH_CONSTANT: u64 = 3;

    fn keeps(&self, edges: usize, n: usize) -> bool {
        let log_n = (n.max(2) as f64).log2();
        edges as f64 * self.eps.as_f64() <= self.delta * log_n
    }
}

#[derive(Clone, Debug)]
pub struct ReducedTree {
    pub tree: TreeInstance,
    /// Node `v` of the input is node `node_map[v]` of `tree`.
    pub node_map: Vec<NodeId>,
    pub decomposition: PathDecomposition,
    /// Anchor nodes per path, empty for paths kept verbatim.
    pub anchors: Vec<Vec<NodeId>>,
    /// Nodes whose parent edge was set to weight 0.
    pub zeroed: Vec<NodeId>,
}

impl ReducedTree {
    pub fn is_identity(&self) -> bool {
        self.anchors.iter().all(Vec::is_empty)
    }
}

pub fn build_reduced_tree(inst: &TreeInstance, config: ReduceConfig) -> ReducedTree {
    let n = inst.n();
    let dec = decompose_paths(inst);
    let mut parent: Vec<Option<NodeId>> = inst.parents().to_vec();
    let mut weight: Vec<u64> = inst.weights().to_vec();
    // the anchor a node's hanging subtrees reattach to
    let mut governor: Vec<NodeId> = (0..n).collect();
    let mut anchors = vec![Vec::new(); dec.paths.len()];
    let mut zeroed = Vec::new();

    for (pi, path) in dec.paths.iter().enumerate() {
        if config.keeps(path.edges(), n) {
            continue;
        }
        let nodes = &path.nodes;
        let ws: Vec<u64> = nodes[1..].iter().map(|&v| inst.weight(v)).collect();
        let idx = select_anchors(&ws, config.eps);
        for pair in idx.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let a = nodes[lo];
            for &v in &nodes[lo + 1..hi] {
                parent[v] = Some(a);
                weight[v] = 0;
                governor[v] = a;
                zeroed.push(v);
            }
            parent[nodes[hi]] = Some(a);
            weight[nodes[hi]] = ws[lo..hi].iter().sum();
        }
        anchors[pi] = idx.iter().map(|&i| nodes[i]).collect();
    }
    // light children hang from the governor of their attachment node
    for path in &dec.paths {
        let first = path.nodes[1];
        let top = path.nodes[0];
        parent[first] = Some(governor[top]);
    }
    zeroed.sort_unstable();
    let tree = TreeInstance::new(inst.capacity(), parent, weight, inst.demands().to_vec())
        .expect("up-pushes keep a tree rooted at the depot");
    ReducedTree {
        tree,
        node_map: (0..n).collect(),
        decomposition: dec,
        anchors,
        zeroed,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("tour {tour} exceeds capacity on the reduced tree")]
    Capacity { tour: usize },
    #[error("solution does not cover node {node} exactly on the reduced tree")]
    Coverage { node: NodeId },
}

/// Maps a solution on the reduced tree back to the input tree.
pub fn lift_solution(
    rt: &ReducedTree,
    original: &TreeInstance,
    sol: &Solution,
) -> Result<Solution, LiftError> {
    let q = rt.tree.capacity();
    if let Some(i) = sol.tours.iter().position(|t| t.load() > q) {
        return Err(LiftError::Capacity { tour: i });
    }
    let cov = sol.covered(rt.tree.n());
    if let Some(v) = (0..rt.tree.n()).find(|&v| cov[v] != rt.tree.demand(v)) {
        return Err(LiftError::Coverage { node: v });
    }
    Ok(map_tours(original, sol, |v| {
        rt.node_map.iter().position(|&m| m == v).expect("node map is a bijection")
    }))
}

/// Maps a solution on the input tree onto the reduced tree.
pub fn project_solution(rt: &ReducedTree, sol: &Solution) -> Solution {
    map_tours(&rt.tree, sol, |v| rt.node_map[v])
}

fn map_tours(target: &TreeInstance, sol: &Solution, f: impl Fn(NodeId) -> NodeId) -> Solution {
    let tours = sol
        .tours
        .iter()
        .map(|t| crate::instance::Tour::new(t.pickups().iter().map(|(&v, &k)| (f(v), k))))
        .collect();
    Solution::new(target, tours)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{tour_cost, Tour};

    fn path(weights: &[u64]) -> TreeInstance {
        let edges: Vec<_> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, i + 1, w))
            .collect();
        TreeInstance::from_edges(weights.len() + 1, 1, &edges, &[]).unwrap()
    }

    #[test]
    fn path_graph_is_one_level() {
        let dec = decompose_paths(&path(&[1, 2, 3]));
        assert_eq!(dec.paths, vec![HeavyPath { level: 1, nodes: vec![0, 1, 2, 3] }]);
        assert_eq!(dec.levels(), 1);
    }

    #[test]
    fn perfect_binary_tree_has_four_levels() {
        let edges: Vec<_> = (1..15).map(|v| ((v - 1) / 2, v, 1)).collect();
        let inst = TreeInstance::from_edges(15, 1, &edges, &[]).unwrap();
        let dec = decompose_paths(&inst);
        assert_eq!(dec.levels(), 4);
        assert_eq!(dec.paths[0].nodes, vec![0, 1, 3, 7]);
        assert_eq!(dec.paths.iter().map(HeavyPath::edges).sum::<usize>(), 14);
    }

    #[test]
    fn anchors_on_unit_path() {
        let eps = Eps::new(1, 1).unwrap();
        assert_eq!(select_anchors(&[1, 1, 1, 1], eps), vec![0, 1, 3, 4]);
        let big = Eps::new(1000, 1).unwrap();
        assert_eq!(select_anchors(&[1, 2, 3, 4, 5], big), vec![0, 1, 5]);
        assert_eq!(select_anchors(&[7], eps), vec![0, 1]);
    }

    #[test]
    fn anchor_growth() {
        let eps = Eps::new(1, 2).unwrap();
        let ws = [3, 1, 1, 2, 5, 1, 1, 1, 9, 2, 2, 2, 2, 2];
        let a = select_anchors(&ws, eps);
        let prefix = |i: usize| ws[..i].iter().sum::<u64>();
        for pair in a[1..].windows(2) {
            if pair[1] != ws.len() {
                assert!(2 * prefix(pair[1]) > 3 * prefix(pair[0]));
            }
        }
    }

    #[test]
    fn up_push_shape() {
        // anchors at 0, 1, 3 and 4 for a unit path with eps = 1
        let inst = TreeInstance::from_edges(
            6,
            1,
            &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (2, 5, 4)],
            &[],
        )
        .unwrap();
        let cfg = ReduceConfig {
            eps: Eps::new(1, 1).unwrap(),
            delta: 0.0,
        };
        let rt = build_reduced_tree(&inst, cfg);
        let t = &rt.tree;
        assert_eq!(rt.anchors[0], vec![0, 1, 3, 4]);
        assert_eq!((t.parent(2), t.weight(2)), (Some(1), 0));
        assert_eq!((t.parent(3), t.weight(3)), (Some(1), 2));
        assert_eq!((t.parent(5), t.weight(5)), (Some(1), 4));
        assert_eq!(rt.zeroed, vec![2]);
        for v in 0..6 {
            assert!(t.dist(v) <= inst.dist(v));
        }
    }

    #[test]
    fn lift_cost_for_one_pushed_node() {
        let inst = TreeInstance::from_edges(5, 1, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)], &[(2, 1)])
            .unwrap();
        let cfg = ReduceConfig {
            eps: Eps::new(1, 1).unwrap(),
            delta: 0.0,
        };
        let rt = build_reduced_tree(&inst, cfg);
        let tour = Tour::new([(2, 1)]);
        assert_eq!(tour_cost(&rt.tree, &tour), 2);
        assert_eq!(tour_cost(&inst, &tour), 4);
        let lifted = lift_solution(&rt, &inst, &Solution::new(&rt.tree, vec![tour])).unwrap();
        assert_eq!(lifted.total_cost, 4);
        assert!(cfg.eps.within_factor(1, 4, 2));
    }

    #[test]
    fn short_paths_are_untouched() {
        let inst = path(&[1, 1, 1]);
        let rt = build_reduced_tree(&inst, ReduceConfig::new(Eps::new(1, 2).unwrap()));
        assert!(rt.is_identity());
        assert_eq!(rt.tree, inst);
    }
}
