use proptest::prelude::*;
use rand::Rng;

use dog_barometer::dynamics::{initial_distribution, seeded_rng, Action, EnvParams, NUM_ACTIONS};
use dog_barometer::oracle::{enumerate_policies, evaluate_exact, evaluate_mc, value_iteration};
use dog_barometer::strategies::{classify, named_policy, reachable_observations, StrategyLabel};
use dog_barometer::PolicyTable;

fn all_params() -> Vec<EnvParams> {
    let mut out = Vec::new();
    for base in [EnvParams::exp1(), EnvParams::exp2()] {
        for visible in [false, true] {
            out.push(base.clone().with_visibility(visible));
        }
    }
    out
}

fn random_policy<R: Rng>(rng: &mut R, visible: bool, stochastic: bool) -> PolicyTable {
    let n = EnvParams::exp1().with_visibility(visible).num_observations();
    if stochastic {
        let rows = (0..n)
            .map(|_| {
                let mut w = [0.0; NUM_ACTIONS];
                for x in &mut w {
                    *x = rng.gen_range(0.0..1.0);
                }
                // Keep some exit mass so episodes finish well inside the cap.
                w[Action::ExitNoCoat.index()] += 0.2;
                let total: f64 = w.iter().sum();
                w.map(|x| x / total)
            })
            .collect();
        PolicyTable::stochastic(visible, rows).unwrap()
    } else {
        let actions: Vec<Action> = (0..n).map(|_| Action::ALL[rng.gen_range(0..NUM_ACTIONS)]).collect();
        PolicyTable::deterministic(visible, &actions).unwrap()
    }
}

#[test]
fn simulator_agrees_with_exact_evaluation_on_random_policies() {
    let mut rng = seeded_rng(2024);
    for (k, params) in all_params().into_iter().enumerate() {
        for i in 0..10 {
            let policy = random_policy(&mut rng, params.pressure_visible, i % 2 == 1);
            let exact = evaluate_exact(&policy, &params, false).unwrap().expected_return;
            let mc = evaluate_mc(&policy, &params, 10_000, (k * 100 + i) as u64).unwrap();
            assert!(
                mc.agrees_with(exact),
                "{}: mc {} +/- {} vs exact {exact}",
                policy.to_text(),
                mc.mean,
                mc.std_error
            );
        }
    }
}

#[test]
fn never_exiting_policy_collects_the_wait_penalty_for_the_whole_cap() {
    let params = EnvParams::exp1();
    let wait = PolicyTable::from_compact("wwww").unwrap();
    let exact = evaluate_exact(&wait, &params, false).unwrap();
    assert!(exact.horizon_capped);
    assert!((exact.expected_return + 100.0).abs() < 1e-9);
    let mc = evaluate_mc(&wait, &params, 100, 0).unwrap();
    assert_eq!(mc.mean, -100.0);
    assert_eq!(mc.std_error, 0.0);
}

#[test]
fn slow_policies_are_valued_under_the_step_cap() {
    // Presses at low pressure and rarely leaves: about 190 steps uncapped.
    let params = EnvParams::exp2().with_visibility(true);
    let policy = PolicyTable::from_compact("mwwmcmmm").unwrap();
    let exact = evaluate_exact(&policy, &params, false).unwrap();
    assert!(exact.horizon_capped);
    assert!(exact.mean_episode_length <= params.t_max as f64);
    let mc = evaluate_mc(&policy, &params, 10_000, 5).unwrap();
    assert!(mc.agrees_with(exact.expected_return), "mc {} vs exact {}", mc.mean, exact.expected_return);
}

#[test]
fn better_barometers_help_the_waiting_strategy() {
    for base in [EnvParams::exp1(), EnvParams::exp2()] {
        let mut last = f64::NEG_INFINITY;
        for step in 0..=10 {
            let alpha = 0.5 + 0.05 * step as f64;
            let params = EnvParams { alpha_l: alpha, alpha_h: alpha, ..base.clone() };
            let v = evaluate_exact(&named_policy(StrategyLabel::NwB, &params).unwrap(), &params, false)
                .unwrap()
                .expected_return;
            assert!(v >= last - 1e-12, "rho {} alpha {alpha}: {v} < {last}", base.rho_ll);
            last = v;
        }
    }
}

#[test]
fn pressure_indexed_values_ignore_the_barometer() {
    let base = EnvParams::exp1().with_visibility(true);
    let reference = evaluate_exact(&named_policy(StrategyLabel::NwP, &base).unwrap(), &base, false).unwrap();
    for alpha in [0.5, 0.7, 1.0] {
        let params = EnvParams { alpha_l: alpha, alpha_h: alpha, ..base.clone() };
        let v = evaluate_exact(&named_policy(StrategyLabel::NwP, &params).unwrap(), &params, false).unwrap();
        assert!((v.expected_return - reference.expected_return).abs() < 1e-12);
    }
}

#[test]
fn enumerated_optimum_dominates_named_strategies() {
    for params in all_params() {
        for discounted in [false, true] {
            let best = enumerate_policies(&params, discounted).unwrap()[0].report.expected_return;
            for label in StrategyLabel::catalog_for(params.pressure_visible) {
                let v = evaluate_exact(&named_policy(label, &params).unwrap(), &params, discounted)
                    .unwrap()
                    .expected_return;
                assert!(v <= best + 1e-9, "{label}: {v} > {best}");
            }
        }
    }
}

#[test]
fn full_state_optimum_dominates_hidden_policies() {
    for base in [EnvParams::exp1(), EnvParams::exp2()] {
        let sol = value_iteration(&base).unwrap();
        let init = initial_distribution(&base);
        let v0: f64 = init.iter().zip(sol.values.values).map(|(p, v)| p * v).sum();
        let best_hidden = enumerate_policies(&base, true).unwrap()[0].report.expected_return;
        assert!(best_hidden <= v0 + 1e-9);
        // With persistent pressure, seeing it is strictly valuable.
        if base.rho_ll > 0.5 {
            assert!(best_hidden < v0 - 1e-3);
        }
    }
}

#[test]
fn immediate_exits_are_unaffected_by_discounting() {
    for params in all_params() {
        let labels = [StrategyLabel::NcB, StrategyLabel::NcP];
        for label in labels.into_iter().filter(|l| params.pressure_visible || !l.needs_pressure()) {
            let p = named_policy(label, &params).unwrap();
            let plain = evaluate_exact(&p, &params, false).unwrap();
            let disc = evaluate_exact(&p, &params, true).unwrap();
            assert_eq!(plain.mean_episode_length, 1.0);
            assert!((disc.expected_return - plain.expected_return).abs() < 1e-12);
        }
    }
}

fn degenerate() -> EnvParams {
    EnvParams {
        alpha_l: 1.0,
        alpha_h: 1.0,
        omega_rl: 1.0,
        omega_sh: 1.0,
        rho_ll: 1.0,
        rho_hh: 1.0,
        p_initial_high: 1.0,
        ..EnvParams::exp1()
    }
}

proptest! {
    #[test]
    fn classification_ignores_unreachable_observations(
        label_idx in 0usize..5,
        visible in any::<bool>(),
        noise in proptest::collection::vec(0usize..NUM_ACTIONS, 8),
    ) {
        let params = degenerate().with_visibility(visible);
        let labels: Vec<StrategyLabel> = StrategyLabel::catalog_for(visible).collect();
        let label = labels[label_idx % labels.len()];
        let policy = named_policy(label, &params).unwrap();
        let reach = reachable_observations(&policy, &params).unwrap();
        let n = params.num_observations();
        prop_assert!(reach.len() < n);
        let actions: Vec<Action> = (0..n)
            .map(|i| if reach.contains(&i) { policy.action_at(i).unwrap() } else { Action::ALL[noise[i]] })
            .collect();
        let perturbed = PolicyTable::deterministic(visible, &actions).unwrap();
        let before = classify(&policy, &params).unwrap();
        let after = classify(&perturbed, &params).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn exact_values_are_bounded_by_the_reward_range(seed in any::<u64>(), visible in any::<bool>()) {
        let mut rng = seeded_rng(seed);
        let params = EnvParams::exp2().with_visibility(visible);
        let policy = random_policy(&mut rng, visible, seed % 2 == 0);
        let r = evaluate_exact(&policy, &params, false).unwrap();
        prop_assert!(r.expected_return <= 8.0 + 1e-9);
        prop_assert!(r.expected_return >= -8.0 - params.t_max as f64 - 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.exit_probability));
    }
}
