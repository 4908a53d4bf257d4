//! Observation policies and their text encodings.
//!
//! Two encodings are used:
//!
//! * the *compact* encoding, one action letter per observation in index
//!   order, e.g. `mmnn` for "press when low, exit coatless when high" in
//!   hidden mode (observation order `LR LS HR HS`);
//! * the *policy file*, one `<observation> <action>` pair per line:
//!
//! ```text
//! # press when the barometer is low
//! LR m
//! LS m
//! HR n
//! HS n
//! ```
//!
//! Observation tokens are `BW` (hidden) or `PBW` (visible). An action is a
//! letter (`w`, `m`, `c`, `n`) or a distribution such as `w:0.25,n:0.75`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, EnvParams, Observation, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Action probabilities in `w, m, c, n` order.
pub type ActionDist = [f64; NUM_ACTIONS];

/// Map from observation to action distribution, total over the observation
/// space of its mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pressure_visible: bool,
    rows: Vec<ActionDist>,
}

fn point(action: Action) -> ActionDist {
    let mut d = [0.0; NUM_ACTIONS];
    d[action.index()] = 1.0;
    d
}

/// Index of the largest entry; ties go to the lowest index (`w < m < c < n`).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl PolicyTable {
    pub fn deterministic(pressure_visible: bool, actions: &[Action]) -> Result<Self> {
        let expected = Observation::count(pressure_visible);
        if actions.len() != expected {
            return Err(Error::ShapeMismatch { expected, found: actions.len() });
        }
        Ok(PolicyTable { pressure_visible, rows: actions.iter().copied().map(point).collect() })
    }

    /// Build a deterministic policy from a rule.
    pub fn from_fn(pressure_visible: bool, rule: impl Fn(&Observation) -> Action) -> Self {
        PolicyTable {
            pressure_visible,
            rows: Observation::all(pressure_visible).map(|o| point(rule(&o))).collect(),
        }
    }

    pub fn stochastic(pressure_visible: bool, rows: Vec<ActionDist>) -> Result<Self> {
        let expected = Observation::count(pressure_visible);
        if rows.len() != expected {
            return Err(Error::ShapeMismatch { expected, found: rows.len() });
        }
        for (i, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("row for {} is not a distribution", Observation::from_index(i, pressure_visible)),
                });
            }
        }
        Ok(PolicyTable { pressure_visible, rows })
    }

    /// Greedy table from per-observation action scores.
    pub fn greedy_from_scores(pressure_visible: bool, scores: &[[f64; NUM_ACTIONS]]) -> Result<Self> {
        let actions: Vec<Action> =
            scores.iter().map(|s| Action::from_index(argmax(s)).expect("four scores")).collect();
        Self::deterministic(pressure_visible, &actions)
    }

    pub fn pressure_visible(&self) -> bool {
        self.pressure_visible
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mode_name(&self) -> &'static str {
        mode_name(self.pressure_visible)
    }

    pub fn dist(&self, obs: &Observation) -> &ActionDist {
        &self.rows[obs.index()]
    }

    pub fn dist_at(&self, index: usize) -> &ActionDist {
        &self.rows[index]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.contains(&1.0))
    }

    /// The action taken at `obs`, if the row is deterministic.
    pub fn action(&self, obs: &Observation) -> Option<Action> {
        self.action_at(obs.index())
    }

    pub fn action_at(&self, index: usize) -> Option<Action> {
        let row = self.rows.get(index)?;
        row.iter().position(|&p| p == 1.0).and_then(Action::from_index)
    }

    /// Most probable action per observation (ties to the canonical order).
    pub fn greedify(&self) -> PolicyTable {
        PolicyTable {
            pressure_visible: self.pressure_visible,
            rows: self.rows.iter().map(|r| point(Action::from_index(argmax(r)).expect("four"))).collect(),
        }
    }

    /// Fails unless the policy's observation mode matches `params`.
    pub fn check_mode(&self, params: &EnvParams) -> Result<()> {
        if self.pressure_visible != params.pressure_visible {
            return Err(Error::ModeMismatch {
                policy: self.mode_name(),
                env: mode_name(params.pressure_visible),
            });
        }
        Ok(())
    }

    /// Sample an action given a uniform draw `u` in `[0, 1)`.
    pub fn sample_with(&self, obs: &Observation, u: f64) -> Action {
        let row = self.dist(obs);
        let mut acc = 0.0;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Action::ALL[i];
            }
        }
        // Rounding left `u` above the cumulative total; take the last supported action.
        let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Action::ALL[last]
    }

    /// Compact encoding (`mmnn`), deterministic policies only.
    pub fn compact(&self) -> Option<String> {
        (0..self.rows.len()).map(|i| self.action_at(i).map(Action::letter)).collect()
    }

    pub fn from_compact(code: &str) -> Result<Self> {
        let actions: Vec<Action> = code
            .chars()
            .map(|c| {
                Action::from_letter(c)
                    .ok_or_else(|| Error::Parse { line: 1, message: format!("unknown action letter `{c}`") })
            })
            .collect::<Result<_>>()?;
        match actions.len() {
            4 => Self::deterministic(false, &actions),
            8 => Self::deterministic(true, &actions),
            n => Err(Error::Parse { line: 1, message: format!("compact policy must have 4 or 8 letters, got {n}") }),
        }
    }

    /// Policy-file representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, obs) in Observation::all(self.pressure_visible).enumerate() {
            match self.action_at(i) {
                Some(a) => writeln!(out, "{obs} {a}").unwrap(),
                None => {
                    let parts: Vec<String> = self.rows[i]
                        .iter()
                        .zip(Action::ALL)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, a)| format!("{a}:{p}"))
                        .collect();
                    writeln!(out, "{obs} {}", parts.join(",")).unwrap();
                }
            }
        }
        out
    }

    /// Parse a policy file. Blank lines and `#` comments are skipped; every
    /// observation of the inferred mode must appear exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut visible: Option<bool> = None;
        let mut rows: Vec<Option<ActionDist>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let mut fields = line.split_whitespace();
            let (Some(obs_tok), Some(act_tok), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `<observation> <action>`".into()));
            };
            let obs = Observation::parse_token(obs_tok).ok_or_else(|| err(format!("bad observation `{obs_tok}`")))?;
            let mode = obs.is_visible();
            match visible {
                None => {
                    visible = Some(mode);
                    rows = vec![None; Observation::count(mode)];
                }
                Some(v) if v != mode => return Err(err("mixes hidden and visible observations".into())),
                Some(_) => {}
            }
            let dist = parse_action(act_tok).map_err(err)?;
            let slot = &mut rows[obs.index()];
            if slot.is_some() {
                return Err(err(format!("observation `{obs}` listed twice")));
            }
            *slot = Some(dist);
        }
        let Some(visible) = visible else {
            return Err(Error::Parse { line: 0, message: "empty policy".into() });
        };
        let rows: Vec<ActionDist> = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::PolicyUndefined(Observation::from_index(i, visible).to_string())))
            .collect::<Result<_>>()?;
        Ok(PolicyTable { pressure_visible: visible, rows })
    }
}

fn parse_action(tok: &str) -> std::result::Result<ActionDist, String> {
    let mut chars = tok.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return Action::from_letter(c).map(point).ok_or_else(|| format!("unknown action `{tok}`"));
    }
    let mut dist = [0.0; NUM_ACTIONS];
    for part in tok.split(',') {
        let (a, p) = part.split_once(':').ok_or_else(|| format!("bad action weight `{part}`"))?;
        let mut ac = a.chars();
        let action = match (ac.next(), ac.next()) {
            (Some(c), None) => Action::from_letter(c),
            _ => None,
        }
        .ok_or_else(|| format!("unknown action `{a}`"))?;
        let p: f64 = p.parse().map_err(|_| format!("bad probability `{p}`"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability {p} out of range"));
        }
        dist[action.index()] += p;
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("probabilities sum to {total}, not 1"));
    }
    Ok(dist)
}

pub fn mode_name(pressure_visible: bool) -> &'static str {
    if pressure_visible {
        "visible"
    } else {
        "hidden"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compact_round_trip() {
        let p = PolicyTable::from_compact("mmnn").unwrap();
        assert!(!p.pressure_visible());
        assert_eq!(p.compact().as_deref(), Some("mmnn"));
        assert!(PolicyTable::from_compact("mmn").is_err());
        assert!(PolicyTable::from_compact("mmnx").is_err());
    }

    #[test]
    fn parses_policy_file() {
        let text = "# nb\nLR m\nLS m\nHR n\nHS n   # exit\n";
        let p = PolicyTable::parse(text).unwrap();
        assert_eq!(p.compact().as_deref(), Some("mmnn"));
    }

    #[test]
    fn parses_stochastic_rows() {
        let text = "LR w:0.5,m:0.5\nLS m\nHR n\nHS n\n";
        let p = PolicyTable::parse(text).unwrap();
        assert!(!p.is_deterministic());
        assert_eq!(p.dist_at(0), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(PolicyTable::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(matches!(PolicyTable::parse("LR m\nLS m\nHR n\n"), Err(Error::PolicyUndefined(_))));
        assert!(matches!(PolicyTable::parse("LR m\nLR n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(PolicyTable::parse("LR m\nHLR n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(PolicyTable::parse("LR q"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(PolicyTable::parse("LR w:0.5,n:0.4"), Err(Error::Parse { line: 1, .. })));
        assert!(PolicyTable::parse("").is_err());
    }

    #[test]
    fn argmax_ties_go_to_first_action() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 1.0, 1.0, 0.5]), 1);
    }

    proptest! {
        #[test]
        fn policy_text_round_trips(visible in any::<bool>(), letters in proptest::collection::vec(0usize..4, 8)) {
            let n = Observation::count(visible);
            let actions: Vec<Action> = letters[..n].iter().map(|&i| Action::ALL[i]).collect();
            let p = PolicyTable::deterministic(visible, &actions).unwrap();
            prop_assert_eq!(PolicyTable::parse(&p.to_text()).unwrap(), p.clone());
            prop_assert_eq!(PolicyTable::from_compact(&p.compact().unwrap()).unwrap(), p);
        }

        #[test]
        fn parser_never_panics(text in "\\PC{0,200}") {
            let _ = PolicyTable::parse(&text);
        }
    }
}
