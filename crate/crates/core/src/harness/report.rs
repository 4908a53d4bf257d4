use std::fmt::Write as _;
use std::path::Path;

use crate::approx::{checkpoint, network_policy};
use crate::dynamics::{Action, EnvParams, Observation, WorldState};
use crate::error::{Error, Result};
use crate::oracle::{enumerate_policies, value_iteration, EvalReport, ValueSolution};
use crate::policy::{mode_name, PolicyTable};
use crate::strategies::{classify, named_policy, StrategyLabel};

/// A strategy label, a compact action string such as `mmnn`, or the path
/// of a policy file or network checkpoint.
pub fn resolve_policy(input: &str, params: &EnvParams) -> Result<PolicyTable> {
    if let Ok(label) = input.parse::<StrategyLabel>() {
        return named_policy(label, params);
    }
    let path = Path::new(input);
    let policy = if path.exists() {
        let text = std::fs::read_to_string(path)?;
        if text.starts_with(checkpoint::MAGIC) {
            network_policy(&checkpoint::decode(&text)?)?
        } else {
            PolicyTable::parse(&text)?
        }
    } else if input.len() == params.num_observations() && input.chars().all(|c| Action::from_letter(c).is_some()) {
        PolicyTable::from_compact(input)?
    } else {
        return Err(Error::UnknownLabel(input.to_string()));
    };
    policy.check_mode(params)?;
    Ok(policy)
}

fn state_token(s: WorldState) -> String {
    format!("{}{}{}", s.p.symbol(), s.b.symbol(), s.w.symbol())
}

/// Optimal values and actions per world state, with the induced
/// observation policy when pressure is visible.
pub fn solve_text(params: &EnvParams, sol: &ValueSolution) -> String {
    let mut s = format!(
        "value iteration: {} iterations, Bellman residual {:.3e}, gamma {}\n",
        sol.iterations, sol.residual, params.gamma
    );
    s.push_str("state    value   action      q(w)      q(m)      q(c)      q(n)\n");
    for st in WorldState::all() {
        let i = st.index();
        write!(s, "{:<5} {:>8.4}   {:<6}", state_token(st), sol.values.values[i], sol.policy[i]).unwrap();
        for q in sol.q[i] {
            write!(s, " {q:>9.4}").unwrap();
        }
        s.push('\n');
    }
    if let Some(p) = sol.observation_policy(params) {
        let label = classify(&p, params).map(|c| c.label.to_string()).unwrap_or_else(|_| "?".into());
        writeln!(s, "observation policy: {} ({label})", p.compact().unwrap_or_default()).unwrap();
    }
    s
}

pub fn solve_csv(sol: &ValueSolution) -> String {
    let mut s = String::from("state,value,action,q_w,q_m,q_c,q_n\n");
    for st in WorldState::all() {
        let i = st.index();
        write!(s, "{},{:.10},{}", state_token(st), sol.values.values[i], sol.policy[i]).unwrap();
        for q in sol.q[i] {
            write!(s, ",{q:.10}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn solve(params: &EnvParams) -> Result<ValueSolution> {
    value_iteration(params)
}

pub fn eval_text(policy: &PolicyTable, params: &EnvParams, report: &EvalReport) -> String {
    let code = policy.compact().unwrap_or_else(|| "stochastic".into());
    let label = if policy.is_deterministic() {
        classify(policy, params).map(|c| c.label.to_string()).unwrap_or_else(|_| "?".into())
    } else {
        "n/a".into()
    };
    let mut s = format!(
        "policy {code} ({label}, {} mode)\nexpected return {:.4} ({})\nexit probability {:.4}\nmean episode length {:.4}\n",
        mode_name(params.pressure_visible),
        report.expected_return,
        if report.discounted { "discounted" } else { "undiscounted" },
        report.exit_probability,
        report.mean_episode_length,
    );
    if report.horizon_capped {
        writeln!(s, "value computed over the {}-step cap", params.t_max).unwrap();
    }
    s
}

/// Every deterministic policy, best first, one CSV row each.
pub fn enumeration_csv(params: &EnvParams, discounted: bool) -> Result<String> {
    let ranked = enumerate_policies(params, discounted)?;
    let mut s = String::from("rank,policy,value,exit_probability,mean_episode_length,horizon_capped,label\n");
    for (rank, r) in ranked.iter().enumerate() {
        let label = classify(&r.policy, params)?.label;
        writeln!(
            s,
            "{},{},{:.10},{:.10},{:.10},{},{}",
            rank + 1,
            r.policy.compact().expect("enumerated policies are deterministic"),
            r.report.expected_return,
            r.report.exit_probability,
            r.report.mean_episode_length,
            r.report.horizon_capped,
            label
        )
        .unwrap();
    }
    Ok(s)
}

/// Observation tokens in policy order, for headers and help text.
pub fn observation_order(pressure_visible: bool) -> Vec<String> {
    Observation::all(pressure_visible).map(|o| o.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_labels_codes_and_files() {
        let params = EnvParams::exp1();
        assert_eq!(resolve_policy("nb", &params).unwrap().compact().unwrap(), "mmnn");
        assert_eq!(resolve_policy("wwnn", &params).unwrap().compact().unwrap(), "wwnn");
        assert!(matches!(resolve_policy("nw_p", &params), Err(Error::NeedsVisiblePressure(_))));
        assert!(matches!(resolve_policy("zzzz", &params), Err(Error::UnknownLabel(_))));
        assert!(resolve_policy("wwnnwwnn", &params).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::write(&path, "LR m\nLS m\nHR n\nHS n\n").unwrap();
        assert_eq!(resolve_policy(path.to_str().unwrap(), &params).unwrap().compact().unwrap(), "mmnn");
    }

    #[test]
    fn enumeration_has_every_policy() {
        let csv = enumeration_csv(&EnvParams::exp1(), false).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 257);
        assert!(lines[1].starts_with("1,wwnn,"));
        assert!(lines[1].ends_with(",nw_b"));
    }

    #[test]
    fn solve_outputs() {
        let params = EnvParams::exp1().with_visibility(true);
        let sol = solve(&params).unwrap();
        assert_eq!(solve_csv(&sol).lines().count(), 9);
        assert!(solve_text(&params, &sol).contains("(nw_p)"));
        assert_eq!(observation_order(false), ["LR", "LS", "HR", "HS"]);
    }
}
