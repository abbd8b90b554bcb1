use cvrp_tree::dp::{
    solve_bicriteria, solve_bicriteria_with, solve_profile_exact, solve_structured, DpConfig,
};
use cvrp_tree::exact::{solve_exact, ExactLimits};
use cvrp_tree::generate::{generate, DemandModel, GenSpec, Shape};
use cvrp_tree::seed::derive_seed;
use cvrp_tree::structure::StructureParams;
use cvrp_tree::verify::check_feasible;
use cvrp_tree::{Eps, TreeInstance};

fn small_instances(count: u64, max_tokens: u64) -> Vec<TreeInstance> {
    let shapes = [Shape::Random, Shape::Binary, Shape::Star, Shape::Path];
    let mut out = Vec::new();
    let mut k = 0;
    while out.len() < count as usize {
        let spec = GenSpec {
            shape: shapes[(k % 4) as usize],
            n: 3 + (k % 6) as usize,
            capacity: 2 + k % 3,
            demand: DemandModel::Uniform,
            seed: derive_seed(2024, &[k]),
        };
        k += 1;
        let inst = generate(&spec).unwrap();
        if inst.total_demand() <= max_tokens {
            out.push(inst);
        }
    }
    out
}

fn loose() -> StructureParams {
    StructureParams {
        gamma: 1000,
        groups: 1000,
        sample_prob: 0.5,
    }
}

#[test]
fn profile_dp_matches_exact_oracle() {
    for inst in small_instances(80, 12) {
        let opt = solve_exact(&inst, ExactLimits::default()).unwrap().total_cost;
        let out = solve_profile_exact(&inst, DpConfig::default()).unwrap();
        assert_eq!(out.dp_cost, opt);
        assert_eq!(out.solution.total_cost, opt);
        assert!(check_feasible(&inst, &out.solution).is_clean());

        let s = solve_structured(&inst, Eps::new(1, 2).unwrap(), &loose(), DpConfig::default()).unwrap();
        assert_eq!(s.solution.total_cost, opt);
    }
}

#[test]
fn bicriteria_is_below_opt_within_load_bound() {
    let eps = Eps::new(1, 2).unwrap();
    for inst in small_instances(60, 12) {
        let opt = solve_exact(&inst, ExactLimits::default()).unwrap().total_cost;
        let b = solve_bicriteria(&inst, eps).unwrap();
        assert!(b.outcome.solution.total_cost <= opt);
        assert!(b.outcome.solution.max_load() <= b.load_bound);
        // a coarse grid that actually rounds
        let c = solve_bicriteria_with(&inst, Eps::new(1, 1).unwrap(), DpConfig::default()).unwrap();
        assert!(c.outcome.solution.total_cost <= opt);
        assert!(c.outcome.solution.max_load() <= c.load_bound);
        assert_eq!(c.outcome.solution.covered(inst.n()), inst.demands());
    }
}

#[test]
fn tight_structure_stays_feasible_and_monotone() {
    let eps = Eps::new(1, 2).unwrap();
    for k in 0..25u64 {
        let spec = GenSpec {
            shape: if k % 2 == 0 { Shape::Star } else { Shape::Random },
            n: 5 + (k % 3) as usize,
            capacity: 10,
            demand: DemandModel::Uniform,
            seed: derive_seed(77, &[k]),
        };
        let inst = generate(&spec).unwrap();
        let opt = solve_profile_exact(&inst, DpConfig::default()).unwrap().dp_cost;
        let mut last = u64::MAX;
        for (gamma, groups) in [(0, 1), (1, 1), (1, 2), (2, 2), (100, 100)] {
            let params = StructureParams {
                gamma,
                groups,
                sample_prob: 0.5,
            };
            let s = solve_structured(&inst, eps, &params, DpConfig::default()).unwrap();
            assert!(check_feasible(&inst, &s.solution).is_clean());
            assert!(s.solution.total_cost <= s.dp_cost);
            assert!(s.dp_cost >= opt);
            assert!(s.dp_cost <= last, "loosening the structure cannot cost more");
            last = s.dp_cost;
        }
        assert_eq!(last, opt);
    }
}
