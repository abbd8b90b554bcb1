use proptest::prelude::*;

use cvrp_tree::baselines::{flow_lower_bound, itp_solve};
use cvrp_tree::exact::{solve_exact, ExactLimits};
use cvrp_tree::generate::{generate, DemandModel, GenSpec, Shape};
use cvrp_tree::height::{build_reduced_tree, lift_solution, project_solution, ReduceConfig};
use cvrp_tree::instance::{normalize_demands, solution_cost};
use cvrp_tree::io::{load_instance, load_solution, save_instance, save_solution};
use cvrp_tree::verify::check_feasible;
use cvrp_tree::{Eps, TreeInstance};

fn instance(max_n: usize, max_q: u64) -> impl Strategy<Value = TreeInstance> {
    let shapes = prop_oneof![
        Just(Shape::Random),
        Just(Shape::Star),
        Just(Shape::Path),
        Just(Shape::Binary),
        Just(Shape::ParallelPaths),
    ];
    let demands = prop_oneof![Just(DemandModel::Unit), Just(DemandModel::Uniform), Just(DemandModel::Heavy)];
    (shapes, 2..=max_n, 1..=max_q, demands, any::<u64>()).prop_map(|(shape, n, capacity, demand, seed)| {
        generate(&GenSpec {
            shape,
            n,
            capacity,
            demand,
            seed,
        })
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_text_round_trips(inst in instance(40, 9)) {
        let text = save_instance(&inst);
        let back = load_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(save_instance(&back), text);
    }

    #[test]
    fn solution_text_round_trips(inst in instance(30, 6)) {
        let sol = itp_solve(&inst);
        let back = load_solution(&save_solution(&sol)).unwrap();
        prop_assert_eq!(back.total_cost, sol.total_cost);
        prop_assert_eq!(back.tours, sol.tours);
    }

    #[test]
    fn itp_is_feasible_and_above_the_bound(inst in instance(40, 6)) {
        let sol = itp_solve(&inst);
        let report = check_feasible(&inst, &sol);
        prop_assert!(report.is_clean(), "{:?}", report.violations);
        prop_assert!(flow_lower_bound(&inst) <= sol.total_cost);
    }

    #[test]
    fn normalization_peels_full_loads(inst in instance(30, 5)) {
        let (residual, trivial) = normalize_demands(&inst);
        let q = inst.capacity();
        prop_assert!(residual.demands().iter().all(|&d| d < q));
        prop_assert!(trivial.tours.iter().all(|t| t.load() == q && t.pickups().len() == 1));
        prop_assert_eq!(residual.total_demand() + trivial.tours.len() as u64 * q, inst.total_demand());
    }

    #[test]
    fn normalization_keeps_the_optimum(inst in instance(7, 4)) {
        let (residual, trivial) = normalize_demands(&inst);
        prop_assume!(residual.total_demand() <= 10 && inst.total_demand() <= 12);
        let full = solve_exact(&inst, ExactLimits::default()).unwrap().total_cost;
        let part = solve_exact(&residual, ExactLimits::default()).unwrap().total_cost;
        prop_assert_eq!(full, part + trivial.total_cost);
    }

    #[test]
    fn reduced_costs_are_sandwiched(inst in instance(60, 5), k in 1u64..4) {
        let eps = Eps::new(1, k).unwrap();
        let rt = build_reduced_tree(&inst, ReduceConfig { eps, delta: 0.0 });
        prop_assert!(rt.tree.height() <= inst.height());
        prop_assert_eq!(rt.tree.demands(), inst.demands());
        let sol = itp_solve(&inst);
        let on_reduced = solution_cost(&rt.tree, &project_solution(&rt, &sol));
        let lifted = lift_solution(&rt, &inst, &project_solution(&rt, &sol)).unwrap();
        prop_assert_eq!(lifted.total_cost, sol.total_cost);
        prop_assert!(on_reduced <= sol.total_cost);
        prop_assert!(eps.within_factor(ReduceConfig::SANDWICH_CONSTANT, sol.total_cost, on_reduced));
    }
}
