//! One entry point per algorithm, shared by the command line and the bench.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::itp_solve;
use crate::dp::{bicriteria_eps, solve_bicriteria_with, solve_structured, DpConfig, DpError};
use crate::eps::Eps;
use crate::exact::{solve_exact, ExactError, ExactLimits};
use crate::height::{build_reduced_tree, lift_solution, LiftError, ReduceConfig};
use crate::instance::{normalize_demands, Solution, TreeInstance};
use crate::structure::StructureParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    Itp,
    Bicriteria,
    Qptas,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Exact,
        Algorithm::Itp,
        Algorithm::Bicriteria,
        Algorithm::Qptas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Itp => "itp",
            Algorithm::Bicriteria => "bicriteria",
            Algorithm::Qptas => "qptas",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub eps: Eps,
    /// Solve on the height-reduced tree and map the result back.
    pub reduce_height: bool,
    /// Structured-solver knobs; defaults derived from `n` and `eps` if unset.
    pub params: Option<StructureParams>,
    pub dp: DpConfig,
    pub exact: ExactLimits,
}

impl SolveOptions {
    pub fn new(eps: Eps) -> Self {
        SolveOptions {
            eps,
            reduce_height: false,
            params: None,
            dp: DpConfig::default(),
            exact: ExactLimits::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

impl SolveError {
    /// The instance is too large for the solver rather than malformed.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            SolveError::Exact(ExactError::TooManyTokens { .. } | ExactError::StateBudget { .. })
                | SolveError::Dp(DpError::StateBudget { .. })
        )
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub solution: Solution,
    /// Total DP table entries, for the DP-based solvers.
    pub dp_states: Option<usize>,
    /// Load every tour is guaranteed to respect; above `Q` only for the
    /// bicriteria solver.
    pub load_bound: u64,
}

pub fn solve(inst: &TreeInstance, algo: Algorithm, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    if !opts.reduce_height || algo == Algorithm::Itp {
        return solve_on(inst, algo, opts);
    }
    let rt = build_reduced_tree(inst, ReduceConfig::new(opts.eps));
    let r = solve_on(&rt.tree, algo, opts)?;
    let solution = if algo == Algorithm::Bicriteria {
        // loads may exceed Q by design; node ids are unchanged
        Solution::new(inst, r.solution.tours)
    } else {
        lift_solution(&rt, inst, &r.solution)?
    };
    Ok(SolveResult { solution, ..r })
}

fn solve_on(inst: &TreeInstance, algo: Algorithm, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    let q = inst.capacity();
    Ok(match algo {
        Algorithm::Itp => SolveResult {
            solution: itp_solve(inst),
            dp_states: None,
            load_bound: q,
        },
        Algorithm::Exact => {
            let (residual, trivial) = normalize_demands(inst);
            let sol = solve_exact(&residual, opts.exact)?;
            let mut tours = trivial.tours;
            tours.extend(sol.tours);
            SolveResult {
                solution: Solution::new(inst, tours),
                dp_states: None,
                load_bound: q,
            }
        }
        Algorithm::Bicriteria => {
            let ep = bicriteria_eps(inst.n(), inst.height(), opts.eps);
            let b = solve_bicriteria_with(inst, ep, opts.dp)?;
            SolveResult {
                solution: b.outcome.solution,
                dp_states: Some(b.outcome.states),
                load_bound: b.load_bound,
            }
        }
        Algorithm::Qptas => {
            let params = opts
                .params
                .unwrap_or_else(|| StructureParams::defaults(inst.n(), opts.eps));
            let out = solve_structured(inst, opts.eps, &params, opts.dp)?;
            SolveResult {
                solution: out.solution,
                dp_states: Some(out.states),
                load_bound: q,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::star3;

    #[test]
    fn all_algorithms_on_the_star() {
        let inst = star3();
        let opts = SolveOptions::new(Eps::new(1, 2).unwrap());
        for algo in Algorithm::ALL {
            let r = solve(&inst, algo, &opts).unwrap();
            assert_eq!(r.solution.total_cost, 6, "{algo}");
            let reduced = solve(&inst, algo, &SolveOptions { reduce_height: true, ..opts.clone() }).unwrap();
            assert_eq!(reduced.solution.total_cost, 6, "{algo}");
        }
    }
}
