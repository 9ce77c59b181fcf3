use pfss_core::exact::brute_force;
use pfss_core::heuristics::{iterated_greedy, iterated_local_search, neh, random_search};
use pfss_core::mdp::{record_expert_traces, ScheduleState};
use pfss_core::mip::{check_mip_solution, embed_permutation, MipModel, DEFAULT_TOL};
use pfss_core::schedule::{completion_times, front_advance, makespan};
use pfss_core::{HeuristicBudget, IgParams, Instance, Permutation};
use proptest::prelude::*;

fn instance_strategy(max_m: usize, max_n: usize) -> impl Strategy<Value = Instance> {
    (1..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..20.0f64], m * n)
            .prop_map(move |t| Instance::new(m, n, t).unwrap())
    })
}

fn instance_and_perm(max_m: usize, max_n: usize) -> impl Strategy<Value = (Instance, Permutation)> {
    instance_strategy(max_m, max_n).prop_flat_map(|inst| {
        let n = inst.jobs();
        (Just(inst), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|(inst, order)| (inst, Permutation::new(order).unwrap()))
    })
}

// start-time formulation, independent of the running-max recurrence
fn oracle_makespan(inst: &Instance, order: &[usize]) -> f64 {
    let (m, n) = (inst.machines(), order.len());
    let mut finish = vec![vec![0.0f64; n]; m];
    for t in 0..n {
        for i in 0..m {
            let ready = if i == 0 { 0.0 } else { finish[i - 1][t] };
            let free = if t == 0 { 0.0 } else { finish[i][t - 1] };
            finish[i][t] = if ready > free { ready } else { free } + inst.time(i, order[t]);
        }
    }
    finish[m - 1][n - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn front_fold_equals_last_column((inst, perm) in instance_and_perm(6, 9)) {
        let c = completion_times(&inst, &perm).unwrap();
        let front = perm.iter().fold(vec![0.0; inst.machines()], |f, j| front_advance(&inst, &f, j).unwrap());
        prop_assert_eq!(front, c.last_column());
    }
}

proptest! {
    #[test]
    fn completion_matrix_is_monotone((inst, perm) in instance_and_perm(6, 9)) {
        let c = completion_times(&inst, &perm).unwrap();
        for i in 0..c.machines() {
            for t in 0..c.jobs() {
                if i > 0 { prop_assert!(c.get(i, t) >= c.get(i - 1, t)); }
                if t > 0 { prop_assert!(c.get(i, t) >= c.get(i, t - 1)); }
            }
        }
        prop_assert_eq!(c.makespan(), makespan(&inst, &perm).unwrap());
    }

    #[test]
    fn makespan_matches_oracle((inst, perm) in instance_and_perm(5, 8)) {
        prop_assert_eq!(makespan(&inst, &perm).unwrap(), oracle_makespan(&inst, perm.as_slice()));
    }

    #[test]
    fn raising_a_time_never_lowers_makespan(
        (inst, perm) in instance_and_perm(5, 8),
        cell in any::<prop::sample::Index>(),
        bump in 0.0..10.0f64,
    ) {
        let mut t = inst.times().to_vec();
        let k = cell.index(t.len());
        t[k] += bump;
        let raised = Instance::new(inst.machines(), inst.jobs(), t).unwrap();
        prop_assert!(makespan(&raised, &perm).unwrap() >= makespan(&inst, &perm).unwrap());
    }

    #[test]
    fn identical_columns_make_order_irrelevant(
        col in prop::collection::vec(0.0..10.0f64, 1..6),
        n in 1usize..8,
        order in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let m = col.len();
        let mut t = Vec::new();
        for v in &col { t.extend(std::iter::repeat_n(*v, n)); }
        let inst = Instance::new(m, n, t).unwrap();
        let order: Vec<usize> = order.into_iter().filter(|&j| j < n).collect();
        let p = Permutation::new(order).unwrap();
        prop_assert_eq!(makespan(&inst, &p).unwrap(), makespan(&inst, &Permutation::identity(n)).unwrap());
    }

    #[test]
    fn embedding_is_feasible_and_exact((inst, perm) in instance_and_perm(4, 7)) {
        let sol = embed_permutation(&inst, &perm).unwrap();
        prop_assert!(check_mip_solution(&inst, &sol, DEFAULT_TOL).unwrap());
        prop_assert_eq!(sol.cmax, makespan(&inst, &perm).unwrap());
        // big-M slack never binds for true schedules
        let model = MipModel::build(&inst);
        for i in 0..inst.machines() {
            for j in 0..inst.jobs() {
                for k in 0..inst.jobs() {
                    if j != k {
                        let lhs = sol.start[i][j] + inst.time(i, j) - sol.start[i][k];
                        prop_assert!(lhs <= model.big_m[i] + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn heuristics_are_deterministic_and_bounded_by_optimum(inst in instance_strategy(4, 6), seed in any::<u64>()) {
        let (_, opt) = brute_force(&inst).unwrap();
        let b = HeuristicBudget::iterations(20, seed);
        let rs = random_search(&inst, &b).unwrap();
        let ils = iterated_local_search(&inst, &b, 2).unwrap();
        prop_assert_eq!(&rs, &random_search(&inst, &b).unwrap());
        prop_assert_eq!(&ils, &iterated_local_search(&inst, &b, 2).unwrap());
        let (neh_perm, neh_span) = neh(&inst);
        prop_assert_eq!(neh_span, makespan(&inst, &neh_perm).unwrap());
        for span in [rs.1, ils.1, neh_span] {
            prop_assert!(opt <= span + 1e-9);
        }
        if inst.jobs() >= 2 {
            let params = IgParams { destruction_size: 1, temperature: 0.5, budget: b };
            let ig = iterated_greedy(&inst, &params).unwrap();
            prop_assert_eq!(&ig, &iterated_greedy(&inst, &params).unwrap());
            prop_assert!(opt <= ig.1 + 1e-9);
            prop_assert!(ig.1 <= neh_span);
        }
    }

    #[test]
    fn anytime_best_is_nonincreasing(inst in instance_strategy(4, 9), seed in any::<u64>()) {
        let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for iters in [1u64, 3, 8, 20] {
            let b = HeuristicBudget::iterations(iters, seed);
            let rs = random_search(&inst, &b).unwrap().1;
            let ils = iterated_local_search(&inst, &b, 2).unwrap().1;
            let ig = if inst.jobs() >= 2 {
                iterated_greedy(&inst, &IgParams { destruction_size: 1, temperature: 0.3, budget: b }).unwrap().1
            } else { 0.0 };
            prop_assert!(rs <= last.0 && ils <= last.1 && ig <= last.2);
            last = (rs, ils, ig);
        }
    }

    #[test]
    fn traces_replay_and_respect_masks(insts in prop::collection::vec(instance_strategy(4, 8), 1..5)) {
        let traces = record_expert_traces(&insts, neh).unwrap();
        for (inst, tr) in insts.iter().zip(&traces) {
            prop_assert_eq!(tr.len(), inst.jobs());
            let mut replay = ScheduleState::new(inst.jobs());
            for (t, (state, action)) in tr.pairs().enumerate() {
                prop_assert_eq!(&state, &replay);
                prop_assert_eq!(&state, &tr.state_at(t));
                prop_assert_eq!(state.step_index(), t);
                prop_assert!(state.mask()[action]);
                replay = replay.step(action).unwrap();
            }
            prop_assert!(replay.is_terminal());
            prop_assert_eq!(replay.unscheduled().count(), 0);
        }
    }
}
