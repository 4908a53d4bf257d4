//! Re-running the four published cells of each experiment and setting the
//! measured summaries beside the published ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{AgentKind, ExperimentConfig, Preset, DEFAULT_EVAL_EPISODES, DEFAULT_RUNS};
use super::experiment::{run_experiment, SummaryTable};
use crate::error::{Error, Result};
use crate::policy::mode_name;

/// Strategy families in the order of the comparison columns.
pub const FAMILIES: [&str; 6] = ["nc", "nw", "nb", "nwc", "nbb", "other"];

/// A published result row. Counts are indexed like [`FAMILIES`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PublishedRow {
    pub row: &'static str,
    pub agent: AgentKind,
    pub pressure_visible: bool,
    pub mean_reward: f64,
    pub counts: [usize; 6],
    pub note: &'static str,
}

pub const PUBLISHED_EXP1: [PublishedRow; 4] = [
    PublishedRow {
        row: "A2C",
        agent: AgentKind::A2c,
        pressure_visible: true,
        mean_reward: 4.80,
        counts: [3, 7, 0, 0, 0, 0],
        note: "mixture-dependent: the mean is reached only by 3 nc_b and 7 nw_p runs",
    },
    PublishedRow {
        row: "A2C_H",
        agent: AgentKind::A2c,
        pressure_visible: false,
        mean_reward: 4.15,
        counts: [0, 10, 0, 0, 0, 0],
        note: "",
    },
    PublishedRow {
        row: "DQN",
        agent: AgentKind::Dqn,
        pressure_visible: true,
        mean_reward: 5.39,
        counts: [0, 10, 0, 0, 0, 0],
        note: "",
    },
    PublishedRow {
        row: "DQN_H",
        agent: AgentKind::Dqn,
        pressure_visible: false,
        mean_reward: 2.05,
        counts: [0, 0, 10, 0, 0, 0],
        note: "",
    },
];

pub const PUBLISHED_EXP2: [PublishedRow; 4] = [
    PublishedRow {
        row: "A2C E2",
        agent: AgentKind::A2c,
        pressure_visible: true,
        mean_reward: 4.58,
        counts: [10, 0, 0, 0, 0, 0],
        note: "",
    },
    PublishedRow {
        row: "A2C E2 H",
        agent: AgentKind::A2c,
        pressure_visible: false,
        mean_reward: 3.58,
        counts: [0, 0, 0, 10, 0, 0],
        note: "",
    },
    PublishedRow {
        row: "DQN E2",
        agent: AgentKind::Dqn,
        pressure_visible: true,
        mean_reward: 4.60,
        counts: [10, 0, 0, 0, 0, 0],
        note: "equals the exact value of nc_p",
    },
    PublishedRow {
        row: "DQN E2 H",
        agent: AgentKind::Dqn,
        pressure_visible: false,
        mean_reward: 0.87,
        counts: [0, 0, 8, 0, 2, 0],
        note: "",
    },
];

pub fn published(preset: Preset) -> Result<&'static [PublishedRow; 4]> {
    match preset {
        Preset::Exp1 => Ok(&PUBLISHED_EXP1),
        Preset::Exp2 => Ok(&PUBLISHED_EXP2),
        Preset::Custom => {
            Err(Error::InvalidParams { name: "preset", reason: "only exp1 and exp2 have published results".into() })
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReproduceOptions {
    pub base_seed: u64,
    pub n_runs: usize,
    pub eval_episodes: usize,
    /// Root directory; each experiment writes into `<out>/<preset>/`.
    pub output: Option<PathBuf>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { base_seed: 0, n_runs: DEFAULT_RUNS, eval_episodes: DEFAULT_EVAL_EPISODES, output: None }
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub published: PublishedRow,
    pub measured: SummaryTable,
}

impl Comparison {
    pub fn measured_families(&self) -> [usize; 6] {
        let fam = self.measured.family_counts();
        FAMILIES.map(|f| fam.get(f).copied().unwrap_or(0))
    }
}

#[derive(Clone, Debug)]
pub struct Reproduction {
    pub preset: Preset,
    pub rows: Vec<Comparison>,
}

impl Reproduction {
    pub fn row(&self, agent: AgentKind, pressure_visible: bool) -> Option<&Comparison> {
        self.rows.iter().find(|c| c.published.agent == agent && c.published.pressure_visible == pressure_visible)
    }

    /// Two lines per cell, one `published` and one `measured`.
    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("experiment,row,agent,mode,source,mean_reward");
        for f in FAMILIES {
            write!(s, ",{f}").unwrap();
        }
        s.push_str(",note\n");
        for c in &self.rows {
            let p = &c.published;
            let lines = [("published", p.mean_reward, p.counts, p.note), ("measured", c.measured.mean_reward, c.measured_families(), "")];
            for (source, mean, counts, note) in lines {
                write!(s, "{},{},{},{},{source},{mean:.2}", self.preset, p.row, p.agent, mode_name(p.pressure_visible)).unwrap();
                for n in counts {
                    write!(s, ",{n}").unwrap();
                }
                writeln!(s, ",{note}").unwrap();
            }
        }
        s
    }

    /// Plain-text side-by-side table.
    pub fn render(&self) -> String {
        let mut s = format!("{:<10} {:>9} {:>9}", "row", "published", "measured");
        for f in FAMILIES {
            write!(s, " {f:>9}").unwrap();
        }
        s.push('\n');
        for c in &self.rows {
            let p = &c.published;
            write!(s, "{:<10} {:>9.2} {:>9.2}", p.row, p.mean_reward, c.measured.mean_reward).unwrap();
            for (pub_n, got) in p.counts.iter().zip(c.measured_families()) {
                write!(s, " {:>9}", format!("{pub_n}/{got}")).unwrap();
            }
            if !p.note.is_empty() {
                write!(s, "  ({})", p.note).unwrap();
            }
            s.push('\n');
        }
        s.push_str("strategy columns are published/measured run counts\n");
        s
    }
}

/// The experiment config for one published cell, with default budgets.
pub fn cell_config(preset: Preset, row: &PublishedRow, opts: &ReproduceOptions) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(preset, row.pressure_visible, row.agent);
    cfg.base_seed = opts.base_seed;
    cfg.n_runs = opts.n_runs;
    cfg.eval_episodes = opts.eval_episodes;
    cfg.output = opts
        .output
        .as_ref()
        .map(|root| root.join(preset.as_str()).join(format!("{}_{}", row.agent, mode_name(row.pressure_visible))));
    cfg
}

pub fn reproduce(preset: Preset, opts: &ReproduceOptions) -> Result<Reproduction> {
    let rows = published(preset)?
        .iter()
        .map(|row| {
            let measured = run_experiment(&cell_config(preset, row, opts))?;
            Ok(Comparison { published: *row, measured })
        })
        .collect::<Result<Vec<_>>>()?;
    let rep = Reproduction { preset, rows };
    if let Some(root) = &opts.output {
        write_comparison(&rep, &root.join(preset.as_str()))?;
    }
    Ok(rep)
}

fn write_comparison(rep: &Reproduction, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("comparison.csv"), rep.comparison_csv())?;
    Ok(())
}
