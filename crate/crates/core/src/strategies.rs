//! Named strategies and a behavioural classifier.
//!
//! A learned policy is labelled by comparing it with each catalog entry on
//! the observations the learned policy can actually reach. What a policy
//! would do on observations it never sees does not affect its label.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    initial_distribution, kernel, Action, Barometer, EnvParams, Observation, Pressure, Weather, WorldState,
    NUM_WORLD_STATES,
};
use crate::error::{Error, Result};
use crate::policy::PolicyTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyLabel {
    /// Coat or no coat by barometer reading.
    NcB,
    /// Coat or no coat by pressure.
    NcP,
    /// Wait for a high barometer reading.
    NwB,
    /// Wait for high pressure.
    NwP,
    /// Press the button on a low reading, exit coatless on a high one.
    Nb,
    /// Coatless on high; coat on low and rain; wait on low and sun.
    Nwc,
    /// Exit coatless only on high and sun, press otherwise.
    Nbb,
    Other,
}

impl StrategyLabel {
    /// All catalog entries (every label except `Other`).
    pub const CATALOG: [StrategyLabel; 7] = [
        StrategyLabel::NcB,
        StrategyLabel::NcP,
        StrategyLabel::NwB,
        StrategyLabel::NwP,
        StrategyLabel::Nb,
        StrategyLabel::Nwc,
        StrategyLabel::Nbb,
    ];

    pub const ALL: [StrategyLabel; 8] = [
        StrategyLabel::NcB,
        StrategyLabel::NcP,
        StrategyLabel::NwB,
        StrategyLabel::NwP,
        StrategyLabel::Nb,
        StrategyLabel::Nwc,
        StrategyLabel::Nbb,
        StrategyLabel::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyLabel::NcB => "nc_b",
            StrategyLabel::NcP => "nc_p",
            StrategyLabel::NwB => "nw_b",
            StrategyLabel::NwP => "nw_p",
            StrategyLabel::Nb => "nb",
            StrategyLabel::Nwc => "nwc",
            StrategyLabel::Nbb => "nbb",
            StrategyLabel::Other => "other",
        }
    }

    pub fn needs_pressure(self) -> bool {
        matches!(self, StrategyLabel::NcP | StrategyLabel::NwP)
    }

    /// Catalog entries usable in the given observation mode.
    pub fn catalog_for(pressure_visible: bool) -> impl Iterator<Item = StrategyLabel> {
        Self::CATALOG.into_iter().filter(move |l| pressure_visible || !l.needs_pressure())
    }

    /// Column name without the indicator suffix (`nc_b` and `nc_p` are both `nc`).
    pub fn family(self) -> &'static str {
        match self {
            StrategyLabel::NcB | StrategyLabel::NcP => "nc",
            StrategyLabel::NwB | StrategyLabel::NwP => "nw",
            other => other.as_str(),
        }
    }

    fn rule(self, obs: &Observation) -> Action {
        let high_b = obs.b == Barometer::High;
        let sun = obs.w == Weather::Sun;
        let high_p = obs.p == Some(Pressure::High);
        match self {
            StrategyLabel::NcB => exit_by(high_b),
            StrategyLabel::NcP => exit_by(high_p),
            StrategyLabel::NwB => exit_or(high_b, Action::Wait),
            StrategyLabel::NwP => exit_or(high_p, Action::Wait),
            StrategyLabel::Nb => exit_or(high_b, Action::Press),
            StrategyLabel::Nwc => match (high_b, sun) {
                (true, _) => Action::ExitNoCoat,
                (false, false) => Action::ExitCoat,
                (false, true) => Action::Wait,
            },
            StrategyLabel::Nbb => exit_or(high_b && sun, Action::Press),
            StrategyLabel::Other => unreachable!("`other` has no rule"),
        }
    }
}

fn exit_by(fine: bool) -> Action {
    if fine {
        Action::ExitNoCoat
    } else {
        Action::ExitCoat
    }
}

fn exit_or(fine: bool, otherwise: Action) -> Action {
    if fine {
        Action::ExitNoCoat
    } else {
        otherwise
    }
}

impl fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

pub fn named_policy(label: StrategyLabel, params: &EnvParams) -> Result<PolicyTable> {
    if label == StrategyLabel::Other {
        return Err(Error::UnknownLabel("other".into()));
    }
    if label.needs_pressure() && !params.pressure_visible {
        return Err(Error::NeedsVisiblePressure(label.as_str()));
    }
    Ok(PolicyTable::from_fn(params.pressure_visible, |o| label.rule(o)))
}

/// Indices of observations seen with positive probability at some step of
/// an episode under `policy`.
pub fn reachable_observations(policy: &PolicyTable, params: &EnvParams) -> Result<BTreeSet<usize>> {
    policy.check_mode(params)?;
    let init = initial_distribution(params);
    let mut seen = [false; NUM_WORLD_STATES];
    let mut stack: Vec<WorldState> = WorldState::all().filter(|s| init[s.index()] > 0.0).collect();
    while let Some(s) = stack.pop() {
        if std::mem::replace(&mut seen[s.index()], true) {
            continue;
        }
        let dist = policy.dist(&s.observe(params.pressure_visible));
        for a in [Action::Wait, Action::Press] {
            if dist[a.index()] == 0.0 {
                continue;
            }
            let next = kernel(params, s.p, a == Action::Press);
            stack.extend(WorldState::all().filter(|t| next[t.index()] > 0.0 && !seen[t.index()]));
        }
    }
    Ok(WorldState::all()
        .filter(|s| seen[s.index()])
        .map(|s| s.observe(params.pressure_visible).index())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: StrategyLabel,
    /// Every catalog entry that agrees with the policy on its reachable set.
    pub agreeing: Vec<StrategyLabel>,
}

impl Classification {
    pub fn is_ambiguous(&self) -> bool {
        self.agreeing.len() > 1
    }
}

/// Label a deterministic policy. `Other` when no catalog entry, or more
/// than one, matches on the reachable observations.
pub fn classify(policy: &PolicyTable, params: &EnvParams) -> Result<Classification> {
    let reach = reachable_observations(policy, params)?;
    let mut agreeing = Vec::new();
    for label in StrategyLabel::catalog_for(params.pressure_visible) {
        let candidate = named_policy(label, params)?;
        let same = reach.iter().all(|&i| {
            let actual = policy.action_at(i);
            actual.is_some() && actual == candidate.action_at(i)
        });
        if same {
            agreeing.push(label);
        }
    }
    let label = match agreeing.as_slice() {
        [only] => *only,
        _ => StrategyLabel::Other,
    };
    Ok(Classification { label, agreeing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(b: Barometer, w: Weather) -> Observation {
        Observation { b, w, p: None }
    }

    #[test]
    fn catalog_rules_at_named_observations() {
        let params = EnvParams::exp1();
        let low_sun = obs(Barometer::Low, Weather::Sun);
        let high_sun = obs(Barometer::High, Weather::Sun);
        assert_eq!(named_policy(StrategyLabel::Nb, &params).unwrap().action(&low_sun), Some(Action::Press));
        assert_eq!(named_policy(StrategyLabel::Nwc, &params).unwrap().action(&low_sun), Some(Action::Wait));
        assert_eq!(named_policy(StrategyLabel::Nbb, &params).unwrap().action(&high_sun), Some(Action::ExitNoCoat));
        assert_eq!(
            named_policy(StrategyLabel::Nbb, &params).unwrap().action(&obs(Barometer::High, Weather::Rain)),
            Some(Action::Press)
        );
    }

    #[test]
    fn pressure_labels_need_visible_mode() {
        assert!(matches!(
            named_policy(StrategyLabel::NwP, &EnvParams::exp1()),
            Err(Error::NeedsVisiblePressure("nw_p"))
        ));
        assert!(named_policy(StrategyLabel::NwP, &EnvParams::exp1().with_visibility(true)).is_ok());
        assert!(named_policy(StrategyLabel::Other, &EnvParams::exp1()).is_err());
    }

    #[test]
    fn reachable_sets() {
        let params = EnvParams::exp1();
        let nb = named_policy(StrategyLabel::Nb, &params).unwrap();
        assert_eq!(reachable_observations(&nb, &params).unwrap().len(), 4);
        let bare = PolicyTable::from_compact("nnnn").unwrap();
        assert_eq!(reachable_observations(&bare, &params).unwrap().len(), 4);

        let degenerate = EnvParams {
            alpha_l: 1.0,
            alpha_h: 1.0,
            rho_ll: 1.0,
            rho_hh: 1.0,
            p_initial_high: 1.0,
            ..EnvParams::exp1()
        };
        let wait = PolicyTable::from_compact("wwww").unwrap();
        let reach = reachable_observations(&wait, &degenerate).unwrap();
        assert!(reach.iter().all(|&i| Observation::from_index(i, false).b == Barometer::High));
        assert_eq!(reach.len(), 2);
    }

    #[test]
    fn learned_press_policy_is_nb() {
        let p = PolicyTable::from_compact("mmnn").unwrap();
        assert_eq!(classify(&p, &EnvParams::exp1()).unwrap().label, StrategyLabel::Nb);
    }

    #[test]
    fn always_wait_is_other() {
        let p = PolicyTable::from_compact("wwww").unwrap();
        let c = classify(&p, &EnvParams::exp1()).unwrap();
        assert_eq!(c.label, StrategyLabel::Other);
        assert!(c.agreeing.is_empty());
    }

    #[test]
    fn labels_round_trip_as_strings() {
        for l in StrategyLabel::ALL {
            assert_eq!(l.as_str().parse::<StrategyLabel>().unwrap(), l);
        }
        assert!("nope".parse::<StrategyLabel>().is_err());
    }
}
