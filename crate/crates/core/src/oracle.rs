//! Exact ground truth for the joint `(P, B, W)` chain.
//!
//! The chain has eight states. Waiting or pressing moves it through
//! [`kernel`]; either exit action absorbs it. An observation policy induces
//! a Markov chain on the eight states, so any policy can be evaluated with
//! an 8x8 linear solve. Policies slow enough to run into the step cap are
//! evaluated by the finite-horizon recursion instead, to match the simulator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, initial_distribution, kernel, seeded_rng, Action, EnvParams, Pressure, WorldState, NUM_ACTIONS,
    NUM_WORLD_STATES,
};
use crate::error::{Error, Result};
use crate::policy::PolicyTable;

const N: usize = NUM_WORLD_STATES;

pub const VI_TOLERANCE: f64 = 1e-10;
pub const VI_MAX_ITERATIONS: usize = 100_000;
/// Values closer than this are treated as tied when picking greedy actions.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Optimal state values over the joint state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: [f64; N],
}

impl ValueTable {
    pub fn get(&self, s: WorldState) -> f64 {
        self.values[s.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueSolution {
    pub values: ValueTable,
    pub q: [[f64; NUM_ACTIONS]; N],
    /// Greedy action per joint state.
    pub policy: [Action; N],
    pub iterations: usize,
    /// Sup-norm change of the final backup.
    pub residual: f64,
}

impl ValueSolution {
    /// The full-state greedy policy as an observation policy. Only defined
    /// when pressure is visible, since then observations and joint states
    /// coincide.
    pub fn observation_policy(&self, params: &EnvParams) -> Option<PolicyTable> {
        if !params.pressure_visible {
            return None;
        }
        PolicyTable::deterministic(true, &self.policy).ok()
    }

    /// One further Bellman backup of the stored values.
    pub fn bellman_residual(&self, params: &EnvParams) -> f64 {
        let next = backup(params, &self.values.values, params.gamma).0;
        next.iter().zip(&self.values.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn transition_rows(params: &EnvParams) -> [[[f64; N]; 2]; 2] {
    let mut rows = [[[0.0; N]; 2]; 2];
    for p in Pressure::ALL {
        for pressed in [false, true] {
            rows[p.bit()][pressed as usize] = kernel(params, p, pressed);
        }
    }
    rows
}

fn backup(params: &EnvParams, v: &[f64; N], discount: f64) -> ([f64; N], [[f64; NUM_ACTIONS]; N]) {
    let rows = transition_rows(params);
    let mut q = [[0.0; NUM_ACTIONS]; N];
    let mut next = [0.0; N];
    for s in WorldState::all() {
        let i = s.index();
        for a in Action::ALL {
            q[i][a.index()] = if a.is_terminal() {
                params.expected_reward(s.p, a)
            } else {
                let row = &rows[s.p.bit()][(a == Action::Press) as usize];
                params.r_wait + discount * row.iter().zip(v).map(|(p, v)| p * v).sum::<f64>()
            };
        }
        next[i] = q[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    (next, q)
}

/// First action whose value is within [`TIE_TOLERANCE`] of the best.
pub fn greedy_action(q: &[f64; NUM_ACTIONS]) -> Action {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i = q.iter().position(|&v| v >= best - TIE_TOLERANCE).unwrap_or(0);
    Action::ALL[i]
}

/// Optimal values and greedy policy on the joint state. With `gamma < 1`
/// this is a fixed-point iteration; with `gamma = 1` it is a finite-horizon
/// backup over `t_max` periods.
pub fn value_iteration(params: &EnvParams) -> Result<ValueSolution> {
    params.validate()?;
    let finite_horizon = params.gamma >= 1.0;
    let cap = if finite_horizon { params.t_max as usize } else { VI_MAX_ITERATIONS };
    let mut v = [0.0; N];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cap {
        let (next, _) = backup(params, &v, params.gamma);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if !finite_horizon && residual < VI_TOLERANCE {
            break;
        }
    }
    if !finite_horizon && residual >= VI_TOLERANCE {
        return Err(Error::NotConverged { iterations, residual });
    }
    let (_, q) = backup(params, &v, params.gamma);
    let mut policy = [Action::Wait; N];
    for (slot, row) in policy.iter_mut().zip(&q) {
        *slot = greedy_action(row);
    }
    Ok(ValueSolution { values: ValueTable { values: v }, q, policy, iterations, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub expected_return: f64,
    pub discounted: bool,
    /// Probability of eventually going outside.
    pub exit_probability: f64,
    /// Expected number of steps, counting the exit step.
    pub mean_episode_length: f64,
    /// The value was computed over the `t_max` step cap because the policy
    /// can stay inside forever.
    pub horizon_capped: bool,
}

/// The Markov chain a policy induces on the joint state.
struct InducedChain {
    /// Continuation probabilities (inside the house).
    stay: [[f64; N]; N],
    /// Probability of exiting from each state this period.
    exit: [f64; N],
    /// Expected immediate reward per state.
    reward: [f64; N],
    init: [f64; N],
}

impl InducedChain {
    fn new(policy: &PolicyTable, params: &EnvParams) -> Self {
        let rows = transition_rows(params);
        let mut chain = InducedChain {
            stay: [[0.0; N]; N],
            exit: [0.0; N],
            reward: [0.0; N],
            init: initial_distribution(params),
        };
        for s in WorldState::all() {
            let i = s.index();
            let dist = policy.dist(&s.observe(params.pressure_visible));
            for a in Action::ALL {
                let pa = dist[a.index()];
                if pa == 0.0 {
                    continue;
                }
                chain.reward[i] += pa * params.expected_reward(s.p, a);
                if a.is_terminal() {
                    chain.exit[i] += pa;
                } else {
                    let row = &rows[s.p.bit()][(a == Action::Press) as usize];
                    for (j, p) in row.iter().enumerate() {
                        chain.stay[i][j] += pa * p;
                    }
                }
            }
        }
        chain
    }

    fn reachable(&self) -> [bool; N] {
        let mut seen = [false; N];
        let mut stack: Vec<usize> = (0..N).filter(|&i| self.init[i] > 0.0).collect();
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            stack.extend((0..N).filter(|&j| self.stay[i][j] > 0.0 && !seen[j]));
        }
        seen
    }

    /// States from which an exit has positive probability.
    fn can_exit(&self) -> [bool; N] {
        let mut ok: [bool; N] = std::array::from_fn(|i| self.exit[i] > 0.0);
        loop {
            let mut changed = false;
            for i in 0..N {
                if !ok[i] && (0..N).any(|j| ok[j] && self.stay[i][j] > 0.0) {
                    ok[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return ok;
            }
        }
    }

    /// Solve `(I - discount * stay) x = rhs` over the states in `subset`;
    /// other states get zero.
    fn solve(&self, subset: &[bool; N], discount: f64, rhs: &[f64; N]) -> Result<[f64; N]> {
        let idx: Vec<usize> = (0..N).filter(|&i| subset[i]).collect();
        let mut out = [0.0; N];
        if idx.is_empty() {
            return Ok(out);
        }
        let m = idx.len();
        let a = DMatrix::from_fn(m, m, |r, c| {
            let delta = if r == c { 1.0 } else { 0.0 };
            delta - discount * self.stay[idx[r]][idx[c]]
        });
        let b = DVector::from_fn(m, |r, _| rhs[idx[r]]);
        let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        for (k, &i) in idx.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }

    /// Expected total of `per_step` over at most `horizon` steps.
    fn finite_horizon(&self, horizon: u32, discount: f64, per_step: &[f64; N]) -> [f64; N] {
        let mut v = [0.0; N];
        for _ in 0..horizon {
            let mut next = [0.0; N];
            for i in 0..N {
                let cont: f64 = self.stay[i].iter().zip(&v).map(|(p, v)| p * v).sum();
                next[i] = per_step[i] + discount * cont;
            }
            v = next;
        }
        v
    }

    /// Probability, per start state, of still being inside after `horizon` steps.
    fn survival(&self, horizon: u32) -> [f64; N] {
        let mut v = [1.0; N];
        for _ in 0..horizon {
            v = std::array::from_fn(|i| self.stay[i].iter().zip(&v).map(|(p, v)| p * v).sum());
        }
        v
    }

    fn expect(&self, v: &[f64; N]) -> f64 {
        self.init.iter().zip(v).map(|(p, v)| p * v).sum()
    }
}

/// Below this much probability of hitting the step cap, the uncapped
/// linear solve is used as is.
const TAIL_TOLERANCE: f64 = 1e-12;

/// Exact expected return of `policy`. Uses the absorbing-chain linear
/// solve, or the finite-horizon recursion when the step cap matters.
pub fn evaluate_exact(policy: &PolicyTable, params: &EnvParams, discounted: bool) -> Result<EvalReport> {
    params.validate()?;
    policy.check_mode(params)?;
    let chain = InducedChain::new(policy, params);
    let reachable = chain.reachable();
    let can_exit = chain.can_exit();

    let always_exits = (0..N).all(|i| !reachable[i] || can_exit[i]);
    let discount = if discounted { params.gamma } else { 1.0 };
    let ones = [1.0; N];
    // Episodes are cut at t_max. The absorbing-chain solve is the exact
    // value only when almost no probability is still inside by then.
    let tail = chain.expect(&chain.survival(params.t_max));
    let (value, length, exit_probability, horizon_capped) = if always_exits && tail <= TAIL_TOLERANCE {
        let v = chain.solve(&can_exit, discount, &chain.reward)?;
        let len = chain.solve(&can_exit, 1.0, &ones)?;
        let absorb = chain.solve(&can_exit, 1.0, &chain.exit)?;
        (chain.expect(&v), chain.expect(&len), chain.expect(&absorb), false)
    } else {
        let v = chain.finite_horizon(params.t_max, discount, &chain.reward);
        let len = chain.finite_horizon(params.t_max, 1.0, &ones);
        (chain.expect(&v), chain.expect(&len), 1.0 - tail, true)
    };
    let exit_probability = exit_probability.clamp(0.0, 1.0);
    Ok(EvalReport {
        expected_return: value,
        discounted,
        exit_probability,
        mean_episode_length: length,
        horizon_capped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

impl McEstimate {
    /// `|mean - exact| < 3 SE`, with exact agreement accepted for
    /// zero-variance returns.
    pub fn agrees_with(&self, exact: f64) -> bool {
        (self.mean - exact).abs() <= 3.0 * self.std_error + 1e-9
    }
}

/// Monte-Carlo estimate of the undiscounted episode return.
pub fn evaluate_mc(policy: &PolicyTable, params: &EnvParams, n_episodes: usize, seed: u64) -> Result<McEstimate> {
    params.validate()?;
    policy.check_mode(params)?;
    if n_episodes == 0 {
        return Err(Error::InvalidParams { name: "n_episodes", reason: "must be at least 1".into() });
    }
    let mut rng = seeded_rng(seed);
    let deterministic = policy.is_deterministic();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_episodes {
        let (mut obs, mut state) = dynamics::reset(params, &mut rng);
        let mut ret = 0.0;
        loop {
            let action = if deterministic {
                policy.action(&obs).expect("deterministic row")
            } else {
                policy.sample_with(&obs, rng.gen())
            };
            let out = dynamics::step(&state, action, params, &mut rng)?;
            ret += out.reward;
            if out.done {
                break;
            }
            obs = out.obs;
            state = out.state;
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = n_episodes as f64;
    let mean = sum / n;
    let var = if n_episodes > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), episodes: n_episodes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPolicy {
    pub policy: PolicyTable,
    pub report: EvalReport,
}

/// Every deterministic observation policy, best first. Values within
/// [`TIE_TOLERANCE`] tie; ties are ordered by the policy's action string
/// compared position by position under `w < m < c < n`.
pub fn enumerate_policies(params: &EnvParams, discounted: bool) -> Result<Vec<RankedPolicy>> {
    params.validate()?;
    let n_obs = params.num_observations();
    let total = NUM_ACTIONS.pow(n_obs as u32);
    let mut ranked: Vec<(i64, usize, RankedPolicy)> = (0..total)
        .into_par_iter()
        .map(|code| {
            let actions: Vec<Action> =
                (0..n_obs).map(|k| Action::ALL[(code / NUM_ACTIONS.pow((n_obs - 1 - k) as u32)) % NUM_ACTIONS]).collect();
            let policy = PolicyTable::deterministic(params.pressure_visible, &actions)?;
            let report = evaluate_exact(&policy, params, discounted)?;
            let key = (report.expected_return / TIE_TOLERANCE).round() as i64;
            Ok((key, code, RankedPolicy { policy, report }))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().map(|(_, _, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hidden(code: &str) -> PolicyTable {
        PolicyTable::from_compact(code).unwrap()
    }

    #[test]
    fn high_pressure_exit_value() {
        let params = EnvParams::exp1();
        let sol = value_iteration(&params).unwrap();
        let s = WorldState::from_index(6);
        assert_eq!(s.p, Pressure::High);
        let v = sol.q[s.index()][Action::ExitNoCoat.index()];
        assert!((v - 6.4).abs() < 1e-12);
        assert!(sol.residual < VI_TOLERANCE);
    }

    #[test]
    fn exp1_visible_optimum_waits_for_high_pressure() {
        let params = EnvParams::exp1().with_visibility(true);
        let sol = value_iteration(&params).unwrap();
        for s in WorldState::all() {
            let expected = if s.p == Pressure::High { Action::ExitNoCoat } else { Action::Wait };
            assert_eq!(sol.policy[s.index()], expected, "{s:?}");
        }
    }

    #[test]
    fn tiny_discount_is_myopic() {
        let params = EnvParams { gamma: 1e-6, ..EnvParams::exp1() };
        let sol = value_iteration(&params).unwrap();
        for s in WorldState::all() {
            let best_exit = if params.expected_reward(s.p, Action::ExitCoat)
                > params.expected_reward(s.p, Action::ExitNoCoat)
            {
                Action::ExitCoat
            } else {
                Action::ExitNoCoat
            };
            assert_eq!(sol.policy[s.index()], best_exit);
        }
    }

    #[test]
    fn undiscounted_value_iteration_is_finite_horizon() {
        let params = EnvParams { gamma: 1.0, t_max: 3, ..EnvParams::exp1() };
        let sol = value_iteration(&params).unwrap();
        assert_eq!(sol.iterations, 3);
        assert!(sol.values.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn closed_form_returns() {
        let e1 = EnvParams::exp1();
        let nb = evaluate_exact(&hidden("mmnn"), &e1, false).unwrap();
        assert!((nb.expected_return - 2.06).abs() < 1e-12);
        assert_eq!(nb.exit_probability, 1.0);
        assert!(!nb.horizon_capped);
        let nw = evaluate_exact(&hidden("wwnn"), &e1, false).unwrap();
        assert!((nw.expected_return - 4.12).abs() < 1e-12);
        assert!((nw.mean_episode_length - 2.0).abs() < 1e-12);
        let bare = evaluate_exact(&hidden("nnnn"), &e1, false).unwrap();
        assert!(bare.expected_return.abs() < 1e-12);
    }

    #[test]
    fn never_exiting_policy_is_horizon_capped() {
        let params = EnvParams { t_max: 10, ..EnvParams::exp1() };
        let r = evaluate_exact(&hidden("wwww"), &params, false).unwrap();
        assert!(r.horizon_capped);
        assert_eq!(r.exit_probability, 0.0);
        assert!((r.expected_return + 10.0).abs() < 1e-12);
        assert!((r.mean_episode_length - 10.0).abs() < 1e-12);
        let d = evaluate_exact(&hidden("wwww"), &params, true).unwrap();
        // Ten discounted wait penalties, not the infinite geometric sum.
        assert!((d.expected_return + (1.0 - 0.95f64.powi(10)) / (1.0 - 0.95)).abs() < 1e-9);
    }

    #[test]
    fn partially_exiting_policy() {
        // Wait on low readings, press on high: a high-pressure start with a
        // low reading can drift into the press loop and never leave.
        let r = evaluate_exact(&hidden("nwmm"), &EnvParams::exp1(), false).unwrap();
        assert!(r.exit_probability > 0.0 && r.exit_probability < 1.0);
        assert!(r.horizon_capped);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let params = EnvParams::exp1().with_visibility(true);
        assert!(matches!(evaluate_exact(&hidden("mmnn"), &params, false), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn mc_is_deterministic_and_needs_episodes() {
        let p = hidden("wwnn");
        let params = EnvParams::exp1();
        assert_eq!(evaluate_mc(&p, &params, 500, 9).unwrap(), evaluate_mc(&p, &params, 500, 9).unwrap());
        assert!(evaluate_mc(&p, &params, 0, 9).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        let ranked = enumerate_policies(&EnvParams::exp1(), false).unwrap();
        assert_eq!(ranked.len(), 256);
        assert_eq!(ranked[0].policy.compact().as_deref(), Some("wwnn"));
        for pair in ranked.windows(2) {
            assert!(pair[0].report.expected_return >= pair[1].report.expected_return - TIE_TOLERANCE);
        }
    }
}
