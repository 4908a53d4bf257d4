use dog_barometer::agents::{train_actor_critic, train_q_replay, train_sarsa, TabularConfig};
use dog_barometer::approx::{train_a2c, train_dqn, A2cConfig, DqnConfig};
use dog_barometer::dynamics::{Action, Barometer, EnvParams, Observation, Pressure, Weather, WorldState};
use dog_barometer::oracle::value_iteration;
use dog_barometer::strategies::reachable_observations;

/// Pressure, reading and weather never change: every episode sits in the
/// single state `(p, p, w)` until the dog leaves.
fn frozen(high: bool, visible: bool) -> EnvParams {
    EnvParams {
        alpha_l: 1.0,
        alpha_h: 1.0,
        omega_rl: 1.0,
        omega_sh: 1.0,
        rho_ll: 1.0,
        rho_hh: 1.0,
        p_initial_high: if high { 1.0 } else { 0.0 },
        ..EnvParams::exp1()
    }
    .with_visibility(visible)
}

fn frozen_state(high: bool) -> WorldState {
    if high {
        WorldState::new(Pressure::High, Barometer::High, Weather::Sun)
    } else {
        WorldState::new(Pressure::Low, Barometer::Low, Weather::Rain)
    }
}

fn small_tabular() -> TabularConfig {
    TabularConfig { episodes: 3_000, ..TabularConfig::default() }
}

fn small_dqn() -> DqnConfig {
    DqnConfig {
        episodes: 100_000,
        total_timesteps: 6_000,
        buffer_capacity: 5_000,
        learning_starts: 500,
        target_sync_steps: 250,
        learning_rate: 1e-3,
        hidden: vec![16, 16],
        ..DqnConfig::default()
    }
}

#[test]
fn every_learner_is_deterministic_given_a_seed() {
    let params = EnvParams::exp1();
    let cfg = small_tabular();
    assert_eq!(train_q_replay(&params, &cfg, 7).unwrap(), train_q_replay(&params, &cfg, 7).unwrap());
    assert_eq!(train_sarsa(&params, &cfg, 7).unwrap(), train_sarsa(&params, &cfg, 7).unwrap());
    assert_eq!(train_actor_critic(&params, &cfg, 7).unwrap(), train_actor_critic(&params, &cfg, 7).unwrap());

    let dqn = small_dqn();
    let (a, b) = (train_dqn(&params, &dqn, 7).unwrap(), train_dqn(&params, &dqn, 7).unwrap());
    assert_eq!(a.network, b.network);
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.env_steps, b.env_steps);

    let a2c = A2cConfig { episodes: 500, hidden: vec![8], ..A2cConfig::default() };
    let (a, b) = (train_a2c(&params, &a2c, 7).unwrap(), train_a2c(&params, &a2c, 7).unwrap());
    assert_eq!(a.network, b.network);
    assert_eq!(a.stochastic, b.stochastic);

    // A different seed should move the weights.
    assert_ne!(train_a2c(&params, &a2c, 8).unwrap().network, a.network);
}

#[test]
fn replay_q_learning_converges_to_the_oracle_on_a_frozen_world() {
    for high in [false, true] {
        for visible in [false, true] {
            let params = frozen(high, visible);
            let sol = value_iteration(&params).unwrap();
            let truth = sol.q[frozen_state(high).index()];
            let (q, policy) = train_q_replay(&params, &small_tabular(), 3).unwrap();
            let obs = frozen_state(high).observe(visible);
            for a in Action::ALL {
                let err = (q.get(&obs, a) - truth[a.index()]).abs();
                assert!(err < 1e-3, "high {high} visible {visible} {a:?}: {} vs {}", q.get(&obs, a), truth[a.index()]);
            }
            let best = if high { Action::ExitNoCoat } else { Action::ExitCoat };
            assert_eq!(policy.action(&obs), Some(best));
        }
    }
}

#[test]
fn sarsa_and_replay_agree_where_it_matters() {
    for high in [false, true] {
        for visible in [false, true] {
            let params = frozen(high, visible);
            let (_, q_policy) = train_q_replay(&params, &small_tabular(), 11).unwrap();
            let (_, s_policy) = train_sarsa(&params, &small_tabular(), 11).unwrap();
            for i in reachable_observations(&q_policy, &params).unwrap() {
                assert_eq!(s_policy.action_at(i), q_policy.action_at(i), "observation {i}");
            }
        }
    }
}

#[test]
fn policy_gradient_learners_find_the_only_good_exit() {
    let params = frozen(true, false);
    let obs = frozen_state(true).observe(false);
    let (_, ac) = train_actor_critic(&params, &small_tabular(), 5).unwrap();
    assert_eq!(ac.action(&obs), Some(Action::ExitNoCoat));
    let a2c = train_a2c(&params, &A2cConfig { episodes: 2_000, ..A2cConfig::default() }, 5).unwrap();
    assert_eq!(a2c.policy.action(&obs), Some(Action::ExitNoCoat));
}

#[test]
fn dqn_q_values_approach_the_oracle_on_a_frozen_world() {
    let params = frozen(true, true);
    let sol = value_iteration(&params).unwrap();
    let truth = sol.q[frozen_state(true).index()];
    let out = train_dqn(&params, &small_dqn(), 2).unwrap();
    let obs = frozen_state(true).observe(true);
    let q = out.q_values[obs.index()];
    for a in Action::ALL {
        assert!((q[a.index()] - truth[a.index()]).abs() < 0.5, "{a:?}: {} vs {}", q[a.index()], truth[a.index()]);
    }
    assert_eq!(out.policy.action(&obs), Some(Action::ExitNoCoat));
}

#[test]
fn on_policy_learners_never_touch_a_replay_buffer() {
    for source in [include_str!("../src/agents/sarsa.rs"), include_str!("../src/agents/actor_critic.rs")] {
        assert!(!source.contains("ReplayBuffer"));
        assert!(!source.contains("replay::"));
    }
    assert!(include_str!("../src/agents/q_replay.rs").contains("ReplayBuffer"));
}

#[test]
fn observation_indices_cover_the_frozen_state() {
    // Guards the helpers above against a silent change of index layout.
    assert_eq!(frozen_state(true).observe(false), Observation::from_index(3, false));
    assert_eq!(frozen_state(false).observe(true), Observation::from_index(0, true));
}
