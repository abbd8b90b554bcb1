//! Exact optima for small instances.
//!
//! [`solve_exact`] memoizes over per-node residual demand vectors: tokens at
//! one node are interchangeable, so a state is "how many tokens are still
//! uncovered at each demand node". [`solve_naive`] enumerates set partitions
//! of individual tokens and shares no code with it beyond the instance type.
//! [`solve_exact_k_tours`] is the few-tours dynamic program that tracks how
//! much each of `D` tours picks up below every node.

use std::collections::HashMap;

use thiserror::Error;

use crate::instance::{NodeId, Solution, Tour, TreeInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactLimits {
    pub max_tokens: u64,
    pub max_tours: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_tokens: 14,
            max_tours: 4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("instance has {tokens} tokens, exact solver limit is {limit}")]
    TooManyTokens { tokens: u64, limit: u64 },
    #[error("{tours} tours requested, limit is {limit}")]
    TooManyTours { tours: usize, limit: usize },
    #[error("{total} tokens cannot be covered by {tours} tours of capacity {capacity}")]
    Infeasible { total: u64, tours: usize, capacity: u64 },
    #[error("dynamic program would need {states} states per node (budget {budget})")]
    StateBudget { states: u128, budget: u128 },
}

const NAIVE_MAX_TOKENS: u64 = 9;
const K_TOURS_STATE_BUDGET: u128 = 1 << 20;

struct ResidualDp<'a> {
    capacity: u64,
    nodes: Vec<NodeId>,
    stride: Vec<usize>,
    memo: Vec<Option<(u64, usize)>>,
    span: HashMap<u32, u64>,
    inst: &'a TreeInstance,
}

impl ResidualDp<'_> {
    fn index(&self, r: &[u64]) -> usize {
        r.iter().zip(&self.stride).map(|(&x, &s)| x as usize * s).sum()
    }

    fn span_cost(&mut self, mask: u32) -> u64 {
        if let Some(&c) = self.span.get(&mask) {
            return c;
        }
        let nodes = (0..self.nodes.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| self.nodes[i]);
        let c = 2 * self.inst.span_weight(nodes);
        self.span.insert(mask, c);
        c
    }

    fn support(r: &[u64]) -> u32 {
        r.iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    /// Groups containing the first uncovered node, load ≤ Q, in a fixed
    /// enumeration order.
    fn groups(&self, r: &[u64]) -> Vec<Vec<u64>> {
        let first = r.iter().position(|&x| x > 0).expect("non-empty residual");
        let mut out = Vec::new();
        let mut g = vec![0u64; r.len()];
        fn rec(
            r: &[u64],
            j: usize,
            room: u64,
            g: &mut Vec<u64>,
            out: &mut Vec<Vec<u64>>,
        ) {
            if j == r.len() {
                out.push(g.clone());
                return;
            }
            for k in 0..=r[j].min(room) {
                g[j] = k;
                rec(r, j + 1, room - k, g, out);
            }
            g[j] = 0;
        }
        for k in (1..=r[first].min(self.capacity)).rev() {
            g[first] = k;
            rec(r, first + 1, self.capacity - k, &mut g, &mut out);
        }
        out
    }

    fn best(&mut self, r: &[u64]) -> u64 {
        let idx = self.index(r);
        if let Some((c, _)) = self.memo[idx] {
            return c;
        }
        let total: u64 = r.iter().sum();
        let result = if total == 0 {
            (0, 0)
        } else if total <= self.capacity {
            // one tour spanning everything never costs more than a split
            (self.span_cost(Self::support(r)), idx)
        } else {
            let mut best = (u64::MAX, 0);
            for g in self.groups(r) {
                let rest: Vec<u64> = r.iter().zip(&g).map(|(a, b)| a - b).collect();
                let c = self.span_cost(Self::support(&g)) + self.best(&rest);
                if c < best.0 {
                    best = (c, self.index(&g));
                }
            }
            best
        };
        self.memo[idx] = Some(result);
        result.0
    }

    fn decode(&self, idx: usize) -> Vec<u64> {
        self.stride
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let radix = if i + 1 < self.stride.len() {
                    self.stride[i + 1] / s
                } else {
                    usize::MAX
                };
                ((idx / s) % radix) as u64
            })
            .collect()
    }
}

/// Exact optimum by memoized search over residual demand vectors.
pub fn solve_exact(inst: &TreeInstance, limits: ExactLimits) -> Result<Solution, ExactError> {
    let tokens = inst.total_demand();
    if tokens > limits.max_tokens {
        return Err(ExactError::TooManyTokens {
            tokens,
            limit: limits.max_tokens,
        });
    }
    let nodes: Vec<NodeId> = (0..inst.n()).filter(|&v| inst.demand(v) > 0).collect();
    let demand: Vec<u64> = nodes.iter().map(|&v| inst.demand(v)).collect();
    let mut stride = Vec::with_capacity(nodes.len());
    let mut size = 1usize;
    for &d in &demand {
        stride.push(size);
        size *= d as usize + 1;
    }
    let mut dp = ResidualDp {
        capacity: inst.capacity(),
        nodes,
        stride,
        memo: vec![None; size],
        span: HashMap::new(),
        inst,
    };
    dp.best(&demand);

    let mut tours = Vec::new();
    let mut r = demand;
    while r.iter().any(|&x| x > 0) {
        let (_, gidx) = dp.memo[dp.index(&r)].expect("state visited");
        let g = dp.decode(gidx);
        tours.push(Tour::new(
            dp.nodes.iter().zip(&g).map(|(&v, &k)| (v, k)),
        ));
        for (a, b) in r.iter_mut().zip(&g) {
            *a -= b;
        }
    }
    Ok(Solution::new(inst, tours).canonicalized())
}

/// Brute force over all set partitions of individual tokens. Capped at nine
/// tokens; meant only to cross-check [`solve_exact`].
pub fn solve_naive(inst: &TreeInstance) -> Result<Solution, ExactError> {
    let tokens: Vec<NodeId> = (0..inst.n())
        .flat_map(|v| std::iter::repeat_n(v, inst.demand(v) as usize))
        .collect();
    if tokens.len() as u64 > NAIVE_MAX_TOKENS {
        return Err(ExactError::TooManyTokens {
            tokens: tokens.len() as u64,
            limit: NAIVE_MAX_TOKENS,
        });
    }

    fn closed_walk(inst: &TreeInstance, group: &[NodeId]) -> u64 {
        let mut on = vec![false; inst.n()];
        for &v in group {
            let mut x = v;
            while let Some(p) = inst.parent(x) {
                on[x] = true;
                x = p;
            }
        }
        (0..inst.n()).filter(|&v| on[v]).map(|v| 2 * inst.weight(v)).sum()
    }

    struct Search<'a> {
        inst: &'a TreeInstance,
        tokens: Vec<NodeId>,
        groups: Vec<Vec<NodeId>>,
        best: Option<(u64, Vec<Vec<NodeId>>)>,
    }

    fn rec(s: &mut Search<'_>, i: usize) {
        if i == s.tokens.len() {
            let cost = s.groups.iter().map(|g| closed_walk(s.inst, g)).sum();
            if s.best.as_ref().is_none_or(|(c, _)| cost < *c) {
                s.best = Some((cost, s.groups.clone()));
            }
            return;
        }
        let t = s.tokens[i];
        for j in 0..s.groups.len() {
            if (s.groups[j].len() as u64) < s.inst.capacity() {
                s.groups[j].push(t);
                rec(s, i + 1);
                s.groups[j].pop();
            }
        }
        s.groups.push(vec![t]);
        rec(s, i + 1);
        s.groups.pop();
    }

    let mut s = Search {
        inst,
        tokens,
        groups: Vec::new(),
        best: None,
    };
    rec(&mut s, 0);
    let (cost, groups) = s.best.unwrap_or((0, Vec::new()));
    let tours = groups
        .into_iter()
        .map(|g| Tour::new(g.into_iter().map(|v| (v, 1))))
        .collect();
    Ok(Solution {
        tours,
        total_cost: cost,
    })
}

/// Cheapest solution that uses at most `d` tours.
///
/// For every node the table maps a vector `(c_1, .., c_d)` of tokens each
/// tour picks inside the subtree to the cheapest cost of the edges below the
/// node. Children are folded in by a min-plus convolution over those
/// vectors, each child edge charged once per tour that enters it.
pub fn solve_exact_k_tours(
    inst: &TreeInstance,
    d: usize,
    limits: ExactLimits,
) -> Result<Solution, ExactError> {
    if d > limits.max_tours {
        return Err(ExactError::TooManyTours {
            tours: d,
            limit: limits.max_tours,
        });
    }
    let q = inst.capacity();
    let total = inst.total_demand();
    if total > d as u64 * q {
        return Err(ExactError::Infeasible {
            total,
            tours: d,
            capacity: q,
        });
    }
    if total == 0 {
        return Ok(Solution::empty());
    }
    let radix = q as usize + 1;
    let states = (radix as u128).pow(d as u32);
    if states > K_TOURS_STATE_BUDGET {
        return Err(ExactError::StateBudget {
            states,
            budget: K_TOURS_STATE_BUDGET,
        });
    }
    let size = states as usize;
    let space = VecSpace { d, radix };
    let sub = inst.subtree_demand();

    // stages[v][k]: table after v's own tokens and its first k children
    let mut stages: Vec<Vec<Vec<u64>>> = vec![Vec::new(); inst.n()];
    // full[v]: final table of v plus twice its parent edge per entering tour
    let mut lifted: Vec<Vec<u64>> = vec![Vec::new(); inst.n()];
    for &v in inst.preorder().iter().rev() {
        let mut table = vec![u64::MAX; size];
        for idx in 0..size {
            if space.sum(idx) == inst.demand(v) {
                table[idx] = 0;
            }
        }
        let mut st = vec![table.clone()];
        for &u in inst.children(v) {
            let mut next = vec![u64::MAX; size];
            let child = &lifted[u];
            for a in 0..size {
                if table[a] == u64::MAX {
                    continue;
                }
                for b in 0..size {
                    if child[b] == u64::MAX {
                        continue;
                    }
                    if let Some(c) = space.add(a, b) {
                        let cost = table[a] + child[b];
                        if cost < next[c] {
                            next[c] = cost;
                        }
                    }
                }
            }
            table = next;
            st.push(table.clone());
        }
        debug_assert!(table
            .iter()
            .enumerate()
            .all(|(i, &c)| c == u64::MAX || space.sum(i) == sub[v]));
        if v != 0 {
            lifted[v] = table
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    if c == u64::MAX {
                        c
                    } else {
                        c + 2 * inst.weight(v) * space.nonzero(i)
                    }
                })
                .collect();
        }
        stages[v] = st;
    }

    let root = stages[0].last().expect("root table");
    let (best_idx, _) = root
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != u64::MAX)
        .min_by_key(|&(i, &c)| (c, i))
        .ok_or(ExactError::Infeasible {
            total,
            tours: d,
            capacity: q,
        })?;

    let mut picks: Vec<Tour> = vec![Tour::default(); d];
    let mut work = vec![(0usize, best_idx)];
    while let Some((v, mut target)) = work.pop() {
        let st = &stages[v];
        let kids = inst.children(v);
        for k in (1..st.len()).rev() {
            let u = kids[k - 1];
            let want = st[k][target];
            let prev = &st[k - 1];
            let child = &lifted[u];
            let mut found = None;
            for b in 0..size {
                if child[b] == u64::MAX {
                    continue;
                }
                if let Some(a) = space.sub(target, b) {
                    if prev[a] != u64::MAX && prev[a] + child[b] == want {
                        found = Some((a, b));
                        break;
                    }
                }
            }
            let (a, b) = found.expect("backtracking follows a recorded optimum");
            work.push((u, b));
            target = a;
        }
        for (j, k) in space.coords(target).into_iter().enumerate() {
            picks[j].add(v, k);
        }
    }
    picks.retain(|t| !t.is_empty());
    Ok(Solution::new(inst, picks).canonicalized())
}

#[derive(Clone, Copy)]
struct VecSpace {
    d: usize,
    radix: usize,
}

impl VecSpace {
    fn coords(&self, mut idx: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            out.push((idx % self.radix) as u64);
            idx /= self.radix;
        }
        out
    }

    fn sum(&self, idx: usize) -> u64 {
        self.coords(idx).iter().sum()
    }

    fn nonzero(&self, idx: usize) -> u64 {
        self.coords(idx).iter().filter(|&&x| x > 0).count() as u64
    }

    fn add(&self, a: usize, b: usize) -> Option<usize> {
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..self.d {
            let s = a % self.radix + b % self.radix;
            if s >= self.radix {
                return None;
            }
            out += s * scale;
            scale *= self.radix;
            a /= self.radix;
            b /= self.radix;
        }
        Some(out)
    }

    fn sub(&self, a: usize, b: usize) -> Option<usize> {
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..self.d {
            let (x, y) = (a % self.radix, b % self.radix);
            if y > x {
                return None;
            }
            out += (x - y) * scale;
            scale *= self.radix;
            a /= self.radix;
            b /= self.radix;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> TreeInstance {
        TreeInstance::from_edges(3, 2, &[(0, 1, 1), (1, 2, 1)], &[(1, 1), (2, 2)]).unwrap()
    }

    fn star3() -> TreeInstance {
        TreeInstance::from_edges(4, 2, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], &[(1, 1), (2, 1), (3, 1)])
            .unwrap()
    }

    #[test]
    fn path_example() {
        let sol = solve_exact(&path(), ExactLimits::default()).unwrap();
        assert_eq!(sol.total_cost, 6);
        assert!(sol.tours.contains(&Tour::new([(2, 2)])));
        assert_eq!(solve_naive(&path()).unwrap().total_cost, 6);
    }

    #[test]
    fn star_example() {
        assert_eq!(solve_exact(&star3(), ExactLimits::default()).unwrap().total_cost, 6);
        assert_eq!(solve_naive(&star3()).unwrap().total_cost, 6);
    }

    #[test]
    fn single_tour_when_demand_fits() {
        let inst = TreeInstance::from_edges(4, 5, &[(0, 1, 2), (1, 2, 3), (0, 3, 4)], &[(2, 2), (3, 3)])
            .unwrap();
        let sol = solve_exact(&inst, ExactLimits::default()).unwrap();
        assert_eq!(sol.tours.len(), 1);
        assert_eq!(sol.total_cost, 18);
        let k1 = solve_exact_k_tours(&inst, 1, ExactLimits::default()).unwrap();
        assert_eq!(k1.total_cost, 18);
    }

    #[test]
    fn limits_are_reported() {
        let inst = TreeInstance::from_edges(2, 3, &[(0, 1, 1)], &[(1, 20)]).unwrap();
        assert!(matches!(
            solve_exact(&inst, ExactLimits::default()),
            Err(ExactError::TooManyTokens { tokens: 20, limit: 14 })
        ));
        assert!(matches!(
            solve_exact_k_tours(&inst, 4, ExactLimits::default()),
            Err(ExactError::Infeasible { .. })
        ));
        assert!(matches!(
            solve_exact_k_tours(&inst, 5, ExactLimits::default()),
            Err(ExactError::TooManyTours { .. })
        ));
    }

    #[test]
    fn k_tours_on_path() {
        let sol = solve_exact_k_tours(&path(), 2, ExactLimits::default()).unwrap();
        assert_eq!(sol.total_cost, 6);
        assert_eq!(sol.covered(3), vec![0, 1, 2]);
    }
}
