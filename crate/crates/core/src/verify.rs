//! Independent feasibility and cost checks.
//!
//! Nothing here calls into a solver. Costs are recomputed edge by edge from
//! parent links rather than through [`crate::instance::tour_cost`], so a bug
//! in the shared cost routine cannot certify itself.

use num_rational::Ratio;
use serde::Serialize;

use crate::baselines::flow_lower_bound;
use crate::exact::{solve_exact, ExactLimits};
use crate::instance::{NodeId, Solution, TreeInstance};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownNode { tour: usize, node: NodeId },
    Capacity { tour: usize, load: u64, capacity: u64 },
    Coverage { node: NodeId, demand: u64, covered: u64 },
    CostMismatch { claimed: u64, recomputed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub tours: usize,
    pub recomputed_cost: u64,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn edge_cost(inst: &TreeInstance, nodes: &[NodeId]) -> u64 {
    let n = inst.n();
    let mut used = vec![false; n];
    for &v in nodes {
        let mut x = v;
        while x != 0 && !used[x] {
            used[x] = true;
            x = inst.parents()[x].unwrap_or(0);
        }
    }
    (1..n).filter(|&v| used[v]).map(|v| 2 * inst.weights()[v]).sum()
}

/// Checks capacity, exact coverage and the claimed total cost.
pub fn check_feasible(inst: &TreeInstance, sol: &Solution) -> FeasibilityReport {
    let n = inst.n();
    let mut violations = Vec::new();
    let mut covered = vec![0u64; n];
    let mut total = 0u64;
    for (i, t) in sol.tours.iter().enumerate() {
        let mut nodes = Vec::new();
        let mut load = 0u64;
        for (&v, &k) in t.pickups() {
            load += k;
            if v >= n {
                violations.push(Violation::UnknownNode { tour: i, node: v });
                continue;
            }
            covered[v] += k;
            nodes.push(v);
        }
        if load > inst.capacity() {
            violations.push(Violation::Capacity {
                tour: i,
                load,
                capacity: inst.capacity(),
            });
        }
        total += edge_cost(inst, &nodes);
    }
    for (v, &c) in covered.iter().enumerate() {
        if c != inst.demands()[v] {
            violations.push(Violation::Coverage {
                node: v,
                demand: inst.demands()[v],
                covered: c,
            });
        }
    }
    if total != sol.total_cost {
        violations.push(Violation::CostMismatch {
            claimed: sol.total_cost,
            recomputed: total,
        });
    }
    FeasibilityReport {
        tours: sol.tours.len(),
        recomputed_cost: total,
        violations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    Oracle(ExactLimits),
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioReport {
    pub cost: u64,
    pub reference: u64,
    /// `cost / reference`; `None` when the reference is zero and the cost is not.
    pub ratio: Option<Ratio<u64>>,
    /// The oracle was requested but the instance exceeded its limits.
    pub fell_back_to_lower_bound: bool,
}

pub fn ratio_report(inst: &TreeInstance, sol: &Solution, reference: Reference) -> RatioReport {
    let cost = edge_cost_total(inst, sol);
    let (reference, fell_back) = match reference {
        Reference::Oracle(limits) => match solve_exact(inst, limits) {
            Ok(opt) => (opt.total_cost, false),
            Err(_) => (flow_lower_bound(inst), true),
        },
        Reference::LowerBound => (flow_lower_bound(inst), false),
    };
    let ratio = if reference == 0 {
        (cost == 0).then(|| Ratio::from_integer(1))
    } else {
        Some(Ratio::new(cost, reference))
    };
    RatioReport {
        cost,
        reference,
        ratio,
        fell_back_to_lower_bound: fell_back,
    }
}

fn edge_cost_total(inst: &TreeInstance, sol: &Solution) -> u64 {
    sol.tours
        .iter()
        .map(|t| edge_cost(inst, &t.nodes().filter(|&v| v < inst.n()).collect::<Vec<_>>()))
        .sum()
}
