//! Rooted trees with token demands, tours, solutions and the preprocessing
//! reductions that every solver relies on.
//!
//! Node `0` is always the depot. Every other node has exactly one parent and
//! a non-negative integer weight on the edge to it. Demand is counted in
//! tokens; a tour picks up at most `Q` tokens in total, possibly from several
//! nodes and possibly only part of a node's tokens (splittable demand).
//!
//! On a tree the cheapest closed walk from the depot through a set of nodes
//! crosses each edge of their spanning subtree exactly twice, so tours are
//! stored as pickup multisets and their cost is derived from the node set.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::eps::Eps;

pub type NodeId = usize;

/// The depot.
pub const ROOT: NodeId = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("an instance needs at least one node")]
    Empty,
    #[error("capacity must be positive")]
    NonPositiveCapacity,
    #[error("node {0} is out of range")]
    NodeOutOfRange(NodeId),
    #[error("the depot (node 0) cannot have a parent")]
    RootHasParent,
    #[error("node {0} has no parent and cannot be reached from the depot")]
    Unreachable(NodeId),
    #[error("parent links through node {0} form a cycle")]
    Cycle(NodeId),
    #[error("length mismatch: {0}")]
    Shape(String),
    #[error("removing edges heavier than {limit} disconnects demand at node {node}")]
    DisconnectedDemand { node: NodeId, limit: u64 },
}

/// A rooted, edge-weighted tree with per-node token counts and capacity `Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeInstance {
    capacity: u64,
    parent: Vec<Option<NodeId>>,
    weight: Vec<u64>,
    demand: Vec<u64>,
    children: Vec<Vec<NodeId>>,
    preorder: Vec<NodeId>,
    depth: Vec<usize>,
    dist: Vec<u64>,
    // preorder position and one past the last descendant's position
    pos: Vec<usize>,
    end: Vec<usize>,
}

impl TreeInstance {
    /// `parent[0]` must be `None`; `weight[v]` is the weight of the edge from
    /// `v` to its parent (ignored for the depot).
    pub fn new(
        capacity: u64,
        parent: Vec<Option<NodeId>>,
        weight: Vec<u64>,
        demand: Vec<u64>,
    ) -> Result<Self, InstanceError> {
        let n = parent.len();
        if n == 0 {
            return Err(InstanceError::Empty);
        }
        if capacity == 0 {
            return Err(InstanceError::NonPositiveCapacity);
        }
        if weight.len() != n || demand.len() != n {
            return Err(InstanceError::Shape(format!(
                "{n} parents, {} weights, {} demands",
                weight.len(),
                demand.len()
            )));
        }
        if parent[ROOT].is_some() {
            return Err(InstanceError::RootHasParent);
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate().skip(1) {
            match *p {
                None => return Err(InstanceError::Unreachable(v)),
                Some(p) if p >= n => return Err(InstanceError::NodeOutOfRange(p)),
                Some(p) => children[p].push(v),
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }

        let mut preorder = Vec::with_capacity(n);
        let mut depth = vec![0; n];
        let mut dist = vec![0; n];
        let mut stack = vec![ROOT];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            for &c in children[v].iter().rev() {
                depth[c] = depth[v] + 1;
                dist[c] = dist[v] + weight[c];
                stack.push(c);
            }
        }
        if preorder.len() != n {
            let mut seen = vec![false; n];
            for &v in &preorder {
                seen[v] = true;
            }
            let v = (0..n).find(|&v| !seen[v]).unwrap_or(0);
            return Err(InstanceError::Cycle(v));
        }

        let mut pos = vec![0; n];
        for (i, &v) in preorder.iter().enumerate() {
            pos[v] = i;
        }
        let mut end: Vec<usize> = pos.iter().map(|&p| p + 1).collect();
        for &v in preorder.iter().rev() {
            if let Some(p) = parent[v] {
                end[p] = end[p].max(end[v]);
            }
        }

        let mut weight = weight;
        weight[ROOT] = 0;
        Ok(TreeInstance {
            capacity,
            parent,
            weight,
            demand,
            children,
            preorder,
            depth,
            dist,
            pos,
            end,
        })
    }

    /// Builds from `(parent, child, weight)` edges and `(node, tokens)` demands.
    pub fn from_edges(
        n: usize,
        capacity: u64,
        edges: &[(NodeId, NodeId, u64)],
        demands: &[(NodeId, u64)],
    ) -> Result<Self, InstanceError> {
        let mut parent = vec![None; n];
        let mut weight = vec![0; n];
        let mut demand = vec![0; n];
        for &(p, c, w) in edges {
            if p >= n {
                return Err(InstanceError::NodeOutOfRange(p));
            }
            if c >= n {
                return Err(InstanceError::NodeOutOfRange(c));
            }
            if c == ROOT {
                return Err(InstanceError::RootHasParent);
            }
            parent[c] = Some(p);
            weight[c] = w;
        }
        for &(v, d) in demands {
            if v >= n {
                return Err(InstanceError::NodeOutOfRange(v));
            }
            demand[v] += d;
        }
        TreeInstance::new(capacity, parent, weight, demand)
    }

    /// Same tree and capacity, different demands.
    pub fn with_demands(&self, demand: Vec<u64>) -> Self {
        assert_eq!(demand.len(), self.n(), "demand vector length");
        TreeInstance {
            demand,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    /// Weight of the edge from `v` to its parent; `0` for the depot.
    pub fn weight(&self, v: NodeId) -> u64 {
        self.weight[v]
    }

    pub fn demand(&self, v: NodeId) -> u64 {
        self.demand[v]
    }

    pub fn demands(&self) -> &[u64] {
        &self.demand
    }

    pub fn weights(&self) -> &[u64] {
        &self.weight
    }

    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parent
    }

    /// Children in ascending id order.
    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    /// Depth-first preorder from the depot, children visited in ascending id.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    /// Number of edges between `v` and the depot.
    pub fn depth(&self, v: NodeId) -> usize {
        self.depth[v]
    }

    /// Weighted distance from the depot.
    pub fn dist(&self, v: NodeId) -> u64 {
        self.dist[v]
    }

    /// Height in edges.
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn total_demand(&self) -> u64 {
        self.demand.iter().sum()
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v].is_empty()
    }

    /// Tokens in the subtree rooted at each node.
    pub fn subtree_demand(&self) -> Vec<u64> {
        let mut acc = self.demand.clone();
        for &v in self.preorder.iter().rev() {
            if let Some(p) = self.parent[v] {
                acc[p] += acc[v];
            }
        }
        acc
    }

    /// Node count of the subtree rooted at each node.
    pub fn subtree_size(&self) -> Vec<usize> {
        let mut acc = vec![1usize; self.n()];
        for &v in self.preorder.iter().rev() {
            if let Some(p) = self.parent[v] {
                acc[p] += acc[v];
            }
        }
        acc
    }

    /// Is `u` in the subtree rooted at `v` (inclusive)?
    pub fn in_subtree(&self, u: NodeId, v: NodeId) -> bool {
        self.pos[v] <= self.pos[u] && self.pos[u] < self.end[v]
    }

    /// Total weight of the union of depot paths of `nodes`.
    pub fn span_weight<I: IntoIterator<Item = NodeId>>(&self, nodes: I) -> u64 {
        let mut marked = vec![false; self.n()];
        marked[ROOT] = true;
        let mut total = 0;
        for v in nodes {
            let mut x = v;
            while !marked[x] {
                marked[x] = true;
                total += self.weight[x];
                x = self.parent[x].expect("non-root node has a parent");
            }
        }
        total
    }

    /// Total weight of the subtree spanned by the depot and every node with demand.
    pub fn demand_span_weight(&self) -> u64 {
        self.span_weight((0..self.n()).filter(|&v| self.demand[v] > 0))
    }
}

/// One vehicle route, stored as tokens picked per node.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tour {
    pickups: BTreeMap<NodeId, u64>,
}

impl Tour {
    /// Zero entries are dropped, repeated nodes are summed.
    pub fn new<I: IntoIterator<Item = (NodeId, u64)>>(pickups: I) -> Self {
        let mut map = BTreeMap::new();
        for (v, k) in pickups {
            if k > 0 {
                *map.entry(v).or_insert(0) += k;
            }
        }
        Tour { pickups: map }
    }

    pub fn pickups(&self) -> &BTreeMap<NodeId, u64> {
        &self.pickups
    }

    pub fn load(&self) -> u64 {
        self.pickups.values().sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pickups.keys().copied()
    }

    pub fn picked_at(&self, v: NodeId) -> u64 {
        self.pickups.get(&v).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.pickups.is_empty()
    }

    pub(crate) fn add(&mut self, v: NodeId, k: u64) {
        if k > 0 {
            *self.pickups.entry(v).or_insert(0) += k;
        }
    }

    pub(crate) fn remove(&mut self, v: NodeId, k: u64) {
        if let Some(x) = self.pickups.get_mut(&v) {
            *x -= k.min(*x);
            if *x == 0 {
                self.pickups.remove(&v);
            }
        }
    }

    /// Union of two tours' pickups.
    pub fn merged(&self, other: &Tour) -> Tour {
        Tour::new(self.pickups.iter().chain(other.pickups.iter()).map(|(&v, &k)| (v, k)))
    }

    /// Depth-first walk over the spanned subtree, children in ascending id,
    /// starting and ending at the depot. For display only.
    pub fn walk(&self, inst: &TreeInstance) -> Vec<NodeId> {
        let mut needed = vec![false; inst.n()];
        needed[ROOT] = true;
        for v in self.nodes() {
            let mut x = v;
            while !needed[x] {
                needed[x] = true;
                x = inst.parent(x).expect("non-root node has a parent");
            }
        }
        let mut walk = Vec::new();
        fn visit(inst: &TreeInstance, needed: &[bool], v: NodeId, walk: &mut Vec<NodeId>) {
            walk.push(v);
            for &c in inst.children(v) {
                if needed[c] {
                    visit(inst, needed, c, walk);
                    walk.push(v);
                }
            }
        }
        visit(inst, &needed, ROOT, &mut walk);
        walk
    }
}

/// Cost of a tour: twice the weight of the subtree connecting the depot and
/// all pickup nodes.
pub fn tour_cost(inst: &TreeInstance, tour: &Tour) -> u64 {
    2 * inst.span_weight(tour.nodes())
}

/// A set of tours and their total cost.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Solution {
    pub tours: Vec<Tour>,
    /// Cached total. [`Solution::new`] computes it; parsed solution files
    /// carry whatever cost the file claimed.
    pub total_cost: u64,
}

impl Solution {
    pub fn new(inst: &TreeInstance, tours: Vec<Tour>) -> Self {
        let total_cost = tours.iter().map(|t| tour_cost(inst, t)).sum();
        Solution { tours, total_cost }
    }

    pub fn empty() -> Self {
        Solution::default()
    }

    /// Tokens delivered per node.
    pub fn covered(&self, n: usize) -> Vec<u64> {
        let mut cov = vec![0; n];
        for t in &self.tours {
            for (&v, &k) in t.pickups() {
                if v < n {
                    cov[v] += k;
                }
            }
        }
        cov
    }

    pub fn max_load(&self) -> u64 {
        self.tours.iter().map(Tour::load).max().unwrap_or(0)
    }

    /// Tours sorted into a canonical order; cost unchanged.
    pub fn canonicalized(mut self) -> Self {
        self.tours.retain(|t| !t.is_empty());
        self.tours.sort();
        self
    }

    /// Concatenation of two solutions on the same instance.
    pub fn extended(mut self, other: Solution) -> Self {
        self.total_cost += other.total_cost;
        self.tours.extend(other.tours);
        self
    }
}

pub fn solution_cost(inst: &TreeInstance, sol: &Solution) -> u64 {
    sol.tours.iter().map(|t| tour_cost(inst, t)).sum()
}

/// Peels full loads into dedicated single-node tours until every node holds
/// fewer than `Q` tokens. Returns the residual instance and the peeled tours.
pub fn normalize_demands(inst: &TreeInstance) -> (TreeInstance, Solution) {
    let q = inst.capacity();
    let mut residual = inst.demands().to_vec();
    let mut tours = Vec::new();
    for (v, d) in residual.iter_mut().enumerate() {
        while *d >= q {
            tours.push(Tour::new([(v, q)]));
            *d -= q;
        }
    }
    let trivial = Solution::new(inst, tours);
    (inst.with_demands(residual), trivial)
}

/// Merges tours carrying at most `Q/2` tokens pairwise until at most one is
/// left. Merging never increases cost because the union of two spanned
/// subtrees weighs no more than the two separately.
pub fn merge_small_tours(inst: &TreeInstance, sol: &Solution) -> Solution {
    let q = inst.capacity();
    let mut tours: Vec<Tour> = sol.tours.iter().filter(|t| !t.is_empty()).cloned().collect();
    loop {
        let small: Vec<usize> = (0..tours.len()).filter(|&i| 2 * tours[i].load() <= q).collect();
        if small.len() < 2 {
            break;
        }
        let (i, j) = (small[0], small[1]);
        let merged = tours[i].merged(&tours[j]);
        tours[i] = merged;
        tours.remove(j);
    }
    Solution::new(inst, tours)
}

/// Drops surplus tokens so a solution covers `inst` exactly. Surplus at a
/// node is removed from the tours visiting it in order. Used to strip pad
/// tokens; cost can only fall.
pub fn restrict_to_instance(inst: &TreeInstance, sol: &Solution) -> Solution {
    let cov = sol.covered(inst.n());
    let mut excess: Vec<u64> = (0..inst.n())
        .map(|v| cov[v].saturating_sub(inst.demand(v)))
        .collect();
    let mut tours = sol.tours.clone();
    for t in &mut tours {
        let nodes: Vec<(NodeId, u64)> = t.pickups().iter().map(|(&v, &k)| (v, k)).collect();
        for (v, k) in nodes {
            if v < inst.n() && excess[v] > 0 {
                let drop = excess[v].min(k);
                t.remove(v, drop);
                excess[v] -= drop;
            }
        }
    }
    tours.retain(|t| !t.is_empty());
    Solution::new(inst, tours)
}

/// Result of [`scale_weights`].
#[derive(Clone, Debug)]
pub struct ScaledInstance {
    pub instance: TreeInstance,
    /// For every node of the input, its id in `instance` (or `None` if the
    /// node hung below an edge heavier than the guess and carried no demand).
    pub node_map: Vec<Option<NodeId>>,
    /// Multiplier `s` with `s·w ≤ w'` for every kept edge.
    pub factor: num_rational::Ratio<u128>,
}

/// Makes edge weights polynomially bounded positive integers.
///
/// Edges heavier than `w_guess` are dropped (an error if that strands
/// demand). Every remaining weight is lifted to at least `ε·W/K` with
/// `K = 4·n·(n−1)`, rescaled so that this floor becomes `1/ε`, and rounded
/// up. Output weights lie in `[⌈1/ε⌉, ⌈K/ε²⌉]`.
pub fn scale_weights(
    inst: &TreeInstance,
    eps: Eps,
    w_guess: u64,
) -> Result<ScaledInstance, InstanceError> {
    use num_rational::Ratio;

    let n = inst.n();
    let sub = inst.subtree_demand();
    let mut keep = vec![true; n];
    for &v in inst.preorder() {
        if let Some(p) = inst.parent(v) {
            if !keep[p] || inst.weight(v) > w_guess {
                if sub[v] > 0 {
                    return Err(InstanceError::DisconnectedDemand {
                        node: v,
                        limit: w_guess,
                    });
                }
                keep[v] = false;
            }
        }
    }
    let mut node_map = vec![None; n];
    let mut next = 0;
    for v in 0..n {
        if keep[v] {
            node_map[v] = Some(next);
            next += 1;
        }
    }
    let m = next;
    let k = 4 * (n as u128) * (n.saturating_sub(1) as u128);
    let (p, q) = (eps.numer() as u128, eps.denom() as u128);
    // s = K / (ε²·W) = K·q² / (p²·W)
    let w_ref = w_guess.max(1) as u128;
    let factor = Ratio::new(k.max(1) * q * q, p * p * w_ref);
    let floor = q.div_ceil(p);

    let mut parent = vec![None; m];
    let mut weight = vec![0; m];
    let mut demand = vec![0; m];
    for v in 0..n {
        let Some(nv) = node_map[v] else { continue };
        demand[nv] = inst.demand(v);
        if let Some(pv) = inst.parent(v) {
            parent[nv] = node_map[pv];
            let lifted = (inst.weight(v) as u128 * k * q * q).div_ceil(p * p * w_ref);
            weight[nv] = lifted.max(floor).min(u64::MAX as u128) as u64;
        }
    }
    let instance = TreeInstance::new(inst.capacity(), parent, weight, demand)?;
    Ok(ScaledInstance {
        instance,
        node_map,
        factor,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn star3() -> TreeInstance {
        TreeInstance::from_edges(4, 2, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], &[(1, 1), (2, 1), (3, 1)])
            .unwrap()
    }

    #[test]
    fn rejects_bad_trees() {
        assert_eq!(
            TreeInstance::new(2, vec![None, Some(2), Some(1)], vec![0; 3], vec![0; 3]),
            Err(InstanceError::Cycle(1))
        );
        assert_eq!(
            TreeInstance::new(2, vec![None, None], vec![0; 2], vec![0; 2]),
            Err(InstanceError::Unreachable(1))
        );
        assert_eq!(
            TreeInstance::new(0, vec![None], vec![0], vec![0]),
            Err(InstanceError::NonPositiveCapacity)
        );
    }

    #[test]
    fn tour_costs() {
        let inst = star3();
        assert_eq!(tour_cost(&inst, &Tour::new([(0, 1)])), 0);
        assert_eq!(tour_cost(&inst, &Tour::new([(1, 1), (2, 1)])), 4);
        let path = TreeInstance::from_edges(3, 2, &[(0, 1, 1), (1, 2, 1)], &[(1, 1), (2, 2)]).unwrap();
        assert_eq!(tour_cost(&path, &Tour::new([(1, 1), (2, 1)])), 4);
        assert_eq!(Tour::new([(2, 1)]).walk(&path), vec![0, 1, 2, 1, 0]);
    }

    #[test]
    fn normalize_peels_full_loads() {
        let inst = TreeInstance::from_edges(2, 2, &[(0, 1, 3)], &[(1, 2)]).unwrap();
        let (res, triv) = normalize_demands(&inst);
        assert_eq!(res.demand(1), 0);
        assert_eq!(triv.tours.len(), 1);
        assert_eq!(triv.total_cost, 6);

        let five = TreeInstance::from_edges(2, 2, &[(0, 1, 3)], &[(1, 5)]).unwrap();
        let (res, triv) = normalize_demands(&five);
        assert_eq!(res.demand(1), 1);
        assert_eq!(triv.tours.len(), 2);

        let star = star3();
        let (res, triv) = normalize_demands(&star);
        assert_eq!(res, star);
        assert!(triv.tours.is_empty());
    }

    #[test]
    fn merging_small_tours_keeps_cost_bounded() {
        let inst = star3();
        let sol = Solution::new(&inst, vec![Tour::new([(1, 1)]), Tour::new([(2, 1)]), Tour::new([(3, 1)])]);
        let merged = merge_small_tours(&inst, &sol);
        assert_eq!(merged.tours.len(), 2);
        assert!(merged.total_cost <= sol.total_cost);
        assert_eq!(merged.covered(4), sol.covered(4));
    }

    #[test]
    fn restrict_drops_surplus() {
        let inst = star3();
        let over = Solution::new(&inst, vec![Tour::new([(1, 2), (2, 1)]), Tour::new([(3, 1), (2, 1)])]);
        let fixed = restrict_to_instance(&inst, &over);
        assert_eq!(fixed.covered(4), vec![0, 1, 1, 1]);
        assert!(fixed.total_cost <= over.total_cost);
    }

    #[test]
    fn scaling_uniform_weights_preserves_ties() {
        let inst = TreeInstance::from_edges(4, 2, &[(0, 1, 7), (1, 2, 7), (0, 3, 7)], &[(2, 1), (3, 1)])
            .unwrap();
        let eps = Eps::new(1, 2).unwrap();
        let s = scale_weights(&inst, eps, 7).unwrap();
        let w = s.instance.weights();
        assert!(w[1] == w[2] && w[2] == w[3]);
        assert!(w[1] >= 1);
    }

    #[test]
    fn scaling_lifts_small_weights() {
        // n = 3, weights {1, 10^6}, eps = 1/2. With K = 4·n·(n−1) = 24 the
        // floor is eps·W/K = 20833.3, above eps·W/(4n³) = 4629.6.
        let inst = TreeInstance::from_edges(3, 2, &[(0, 1, 1), (1, 2, 1_000_000)], &[(2, 1)]).unwrap();
        let eps = Eps::new(1, 2).unwrap();
        let s = scale_weights(&inst, eps, 1_000_000).unwrap();
        let w = s.instance.weights();
        // floor maps to ⌈1/ε⌉ = 2, max maps to K/ε² = 96
        assert_eq!(w[1], 2);
        assert_eq!(w[2], 96);
        assert!(w[2] as f64 / w[1] as f64 <= 4.0 * 27.0 / 0.25 + 1.0);
        // the lifted value in original units is at least eps·W/(4n³)
        let lifted_original = w[1] as f64 * 1_000_000.0 * 0.25 / 24.0;
        assert!(lifted_original >= 0.5 * 1e6 / 108.0);
    }

    #[test]
    fn scaling_rejects_stranded_demand_and_prunes_empty_branches() {
        let inst = TreeInstance::from_edges(3, 2, &[(0, 1, 50), (0, 2, 1)], &[(1, 1)]).unwrap();
        let eps = Eps::new(1, 2).unwrap();
        assert!(matches!(
            scale_weights(&inst, eps, 10),
            Err(InstanceError::DisconnectedDemand { node: 1, .. })
        ));
        let inst = TreeInstance::from_edges(3, 2, &[(0, 1, 50), (0, 2, 1)], &[(2, 1)]).unwrap();
        let s = scale_weights(&inst, eps, 10).unwrap();
        assert_eq!(s.instance.n(), 2);
        assert_eq!(s.node_map, vec![Some(0), None, Some(1)]);
    }
}
