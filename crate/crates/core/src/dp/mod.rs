//! Dynamic programs over partial-tour size profiles.
//!
//! [`solve_bicriteria`] rounds sizes down to thresholds and may overload
//! tours by a bounded factor. [`solve_structured`] keeps sizes exact and
//! optimizes over solutions whose buckets stay small or coarse at every node.

mod consistency;
mod engine;
mod profile;

use serde::Serialize;
use thiserror::Error;

pub use consistency::check_consistency;
pub use profile::{BucketRepr, NodeProfile};

use crate::eps::Eps;
use crate::instance::{normalize_demands, NodeId, Solution, TreeInstance};
use crate::structure::{thresholds, StructureParams};
use engine::{run, Mode};

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum DpError {
    #[error("node {node}: {states} states exceed the budget of {budget}")]
    StateBudget {
        node: NodeId,
        states: usize,
        budget: usize,
    },
    #[error("no state survives at the depot")]
    NoSolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpConfig {
    /// Largest table allowed at any step.
    pub state_budget: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            state_budget: 200_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DpOutcome {
    /// Tours on the input instance, padding removed.
    pub solution: Solution,
    /// Optimum of the DP, including tours for full loads peeled off first.
    pub dp_cost: u64,
    /// Padding tokens the DP placed; always 0 for the bicriteria solver.
    pub pad_tokens: u64,
    pub states: usize,
    pub largest_table: usize,
}

/// Bicriteria result plus the parameters it ran with.
#[derive(Clone, Debug, Serialize)]
pub struct BicriteriaOutcome {
    pub outcome: DpOutcome,
    pub eps_prime: Eps,
    /// `⌈(1+ε′)^h·Q⌉`, an upper bound on every tour's load.
    pub load_bound: u64,
}

/// `ε′ = 1/m` with `m = ⌈max(log₂²n/ε², h/ε)⌉`, so `ε′ ≤ ε²/log₂²n` and
/// `ε′ ≤ ε/h`.
pub fn bicriteria_eps(n: usize, height: usize, eps: Eps) -> Eps {
    let log_n = (n.max(2) as f64).log2();
    let e = eps.as_f64();
    let a = (log_n * log_n / (e * e)).ceil() as u64;
    let b = (height as f64 / e).ceil() as u64;
    Eps::reciprocal_of(a.max(b).max(1))
}

/// `⌈(1+ε′)^h·Q⌉`.
pub fn load_bound(capacity: u64, height: usize, eps_prime: Eps) -> u64 {
    let f = (1.0 + eps_prime.as_f64()).powi(height as i32) * capacity as f64;
    // absorb float noise in the generous direction
    (f * (1.0 + 1e-12)).ceil() as u64
}

pub fn solve_bicriteria(inst: &TreeInstance, eps: Eps) -> Result<BicriteriaOutcome, DpError> {
    let ep = bicriteria_eps(inst.n(), inst.height(), eps);
    solve_bicriteria_with(inst, ep, DpConfig::default())
}

/// Bicriteria DP with an explicit rounding parameter.
pub fn solve_bicriteria_with(
    inst: &TreeInstance,
    eps_prime: Eps,
    config: DpConfig,
) -> Result<BicriteriaOutcome, DpError> {
    let schedule = thresholds(inst.capacity(), eps_prime);
    let outcome = solve_mode(inst, &Mode::Rounded(&schedule), config)?;
    Ok(BicriteriaOutcome {
        outcome,
        eps_prime,
        load_bound: load_bound(inst.capacity(), inst.height(), eps_prime),
    })
}

/// Cheapest solution whose partial tours, at every node and in every bucket
/// of the `ε` thresholds, number at most `γ` or take at most `g` distinct
/// sizes. Tours may be padded with dummy tokens at nodes they visit to reach
/// that shape; the padding is dropped from the returned solution.
pub fn solve_structured(
    inst: &TreeInstance,
    eps: Eps,
    params: &StructureParams,
    config: DpConfig,
) -> Result<DpOutcome, DpError> {
    let schedule = thresholds(inst.capacity(), eps);
    let mode = Mode::Structured {
        schedule: &schedule,
        gamma: params.gamma,
        groups: params.groups,
    };
    solve_mode(inst, &mode, config)
}

/// Exact optimum through the same size-profile DP with no restriction.
pub fn solve_profile_exact(inst: &TreeInstance, config: DpConfig) -> Result<DpOutcome, DpError> {
    solve_mode(inst, &Mode::Exact, config)
}

fn solve_mode(inst: &TreeInstance, mode: &Mode, config: DpConfig) -> Result<DpOutcome, DpError> {
    let (residual, trivial) = normalize_demands(inst);
    let r = run(&residual, mode, config.state_budget)?;
    let pad_tokens = r.pads.iter().map(|p| p.load()).sum();
    let mut tours = trivial.tours;
    tours.extend(r.tours.into_iter().filter(|t| !t.is_empty()));
    Ok(DpOutcome {
        solution: Solution::new(inst, tours),
        dp_cost: r.cost + trivial.total_cost,
        pad_tokens,
        states: r.states,
        largest_table: r.largest_table,
    })
}
