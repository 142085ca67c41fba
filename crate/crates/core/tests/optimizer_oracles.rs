mod common;

use std::collections::BTreeSet;

use common::{brute_force_optimum, harmonic, query_bytes, small_instance};
use flowcover::fixtures::{motivation_example, MOTIVATION_S3, MOTIVATION_S6};
use flowcover::optimizer::{
    construct_weighted_sets, decode_scheme, exact_cover, greedy_cover, parse_solution, write_solution, Action,
};
use flowcover::{scheme_cost, CostModel, FlowsAt};
use proptest::prelude::*;

#[test]
fn motivation_example_all_action_subsets() {
    let (topo, flows) = motivation_example();
    let model = CostModel::default();
    // Six poll-all actions and six single-flow actions.
    let mut best = u64::MAX;
    let mut winners = Vec::new();
    for mask in 0u32..1 << 12 {
        let polled: BTreeSet<u32> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
        let singles: BTreeSet<u32> = (0..6).filter(|i| mask >> (6 + i) & 1 == 1).collect();
        let covered = flows.iter().enumerate().all(|(i, f)| {
            singles.contains(&(i as u32)) || f.path.iter().any(|s| polled.contains(&s.0))
        });
        if !covered {
            continue;
        }
        let mut cost = singles.len() as u64 * query_bytes(&model, 1);
        for s in &polled {
            let k = flows.iter().filter(|f| f.path.iter().any(|p| p.0 == *s)).count() as u64;
            cost += query_bytes(&model, k);
        }
        if cost < best {
            best = cost;
            winners.clear();
        }
        if cost == best {
            winners.push(mask);
        }
    }
    assert_eq!(best, 1072);
    assert_eq!(winners, vec![1 << MOTIVATION_S3.0 | 1 << MOTIVATION_S6.0]);

    let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
    let exact = exact_cover(&system, 1_000_000).unwrap();
    assert!(exact.proven);
    assert_eq!(exact.solution.total_weight, 1072);
    let actions: Vec<Action> = exact.solution.chosen.iter().map(|&i| system.sets()[i].action).collect();
    assert_eq!(actions, vec![Action::PollAll(MOTIVATION_S3), Action::PollAll(MOTIVATION_S6)]);
}

#[test]
fn greedy_bound_on_many_small_instances() {
    let model = CostModel::default();
    for seed in 0..200u64 {
        let n = 2 + (seed % 11) as usize;
        let m = 1 + (seed * 7 % 15) as usize;
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        let greedy = greedy_cover(&system).unwrap();
        let exact = exact_cover(&system, u64::MAX).unwrap();
        assert!(exact.proven);
        let (oracle, _) = brute_force_optimum(&flows, &model);
        assert_eq!(exact.solution.total_weight, oracle, "seed {seed}");
        let hk = harmonic(system.max_set_size());
        assert!(greedy.total_weight as f64 <= hk * exact.solution.total_weight as f64 + 1e-9, "seed {seed}");
        assert!(greedy.total_weight >= oracle);
    }
}

fn instance() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..=12, 1usize..=15, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_brute_force((n, m, seed) in instance()) {
        let model = CostModel::default();
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        let exact = exact_cover(&system, u64::MAX).unwrap();
        prop_assert!(exact.proven);
        let (oracle, _) = brute_force_optimum(&flows, &model);
        prop_assert_eq!(exact.solution.total_weight, oracle);
        system.verify(&exact.solution).unwrap();
    }

    #[test]
    fn greedy_within_harmonic_bound((n, m, seed) in instance()) {
        let model = CostModel::default();
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        let greedy = greedy_cover(&system).unwrap();
        system.verify(&greedy).unwrap();
        let exact = exact_cover(&system, u64::MAX).unwrap();
        let hk = harmonic(system.max_set_size());
        prop_assert!(greedy.total_weight as f64 <= hk * exact.solution.total_weight as f64 + 1e-9);
        prop_assert!(exact.solution.total_weight <= greedy.total_weight);
    }

    #[test]
    fn decoded_scheme_covers_and_costs_no_more((n, m, seed) in instance()) {
        let model = CostModel::default();
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        system.audit(&topo, &flows, &model).unwrap();
        let greedy = greedy_cover(&system).unwrap();
        let scheme = decode_scheme(&system, &greedy, &flows).unwrap();
        for f in &flows {
            prop_assert!(flowcover::covers(&scheme, f));
            if let Some(s) = scheme.single_polls.get(&f.id) {
                prop_assert_eq!(*s, f.last_switch());
                prop_assert!(!f.path.iter().any(|p| scheme.poll_all.contains(p)));
            }
        }
        let cost = scheme_cost(&model, &scheme, &FlowsAt::from_flows(topo.switch_count(), &flows)).unwrap();
        prop_assert!(cost <= greedy.total_weight);
        prop_assert!(cost <= model.per_flow_baseline_cost(flows.len() as u64));
    }

    #[test]
    fn greedy_is_deterministic_and_solution_round_trips((n, m, seed) in instance()) {
        let model = CostModel::default();
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        let a = greedy_cover(&system).unwrap();
        let b = greedy_cover(&construct_weighted_sets(&topo, &flows, &model).unwrap()).unwrap();
        prop_assert_eq!(&a, &b);
        let text = write_solution(&system, &a, false);
        let (back, proven) = parse_solution(&system, &text).unwrap();
        prop_assert_eq!(back, a);
        prop_assert!(!proven);
    }

    #[test]
    fn weights_follow_cost_model(
        (n, m, seed) in instance(),
        l_req in 1u64..500,
        header in 1u64..500,
        entry in 1u64..500,
    ) {
        let model = CostModel::new(l_req, header, entry).unwrap();
        let (topo, flows) = small_instance(n, m, seed);
        let system = construct_weighted_sets(&topo, &flows, &model).unwrap();
        for (set, &w) in system.sets().iter().zip(system.weights()) {
            prop_assert_eq!(w, query_bytes(&model, set.flow_ids.len() as u64));
        }
        let exact = exact_cover(&system, u64::MAX).unwrap();
        prop_assert_eq!(exact.solution.total_weight, brute_force_optimum(&flows, &model).0);
    }
}
