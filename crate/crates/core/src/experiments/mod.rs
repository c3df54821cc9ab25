//! Reproducible experiments: prediction accuracy, handoff delay and packet
//! drops, with CSV reports.
//!
//! Everything derives from one [`SimConfig`]. The history corpus comes from
//! `seed`, the test paths from a separate stream, so the same config always
//! produces byte-identical reports.

pub mod accuracy;
pub mod config;
pub mod delay;
pub mod report;

pub use accuracy::{run_accuracy_experiment, AccuracyReport, Predictor};
pub use config::SimConfig;
pub use delay::{run_delay_experiment, run_drop_experiment, DelayReport, DropReport};
pub use report::run_all;

use crate::error::Result;
use crate::mobility::PathHistory;
use crate::prediction::{build_tm, mine_rules, RuleSet, TransitionMatrix};
use crate::topology::GridTopology;

/// The history corpus and the models built from it.
#[derive(Debug, Clone)]
pub struct Trained {
    pub history: PathHistory,
    pub rules: RuleSet,
    pub tm: TransitionMatrix,
}

impl Trained {
    pub fn build(cfg: &SimConfig, topo: &GridTopology) -> Result<Self> {
        let history = PathHistory::generate(cfg.n_history, topo, &cfg.history_mobility, cfg.seed)?;
        Trained::from_history(cfg, history)
    }

    pub fn from_history(cfg: &SimConfig, history: PathHistory) -> Result<Self> {
        let rules = mine_rules(&history, &cfg.mining)?;
        let tm = build_tm(&history);
        log::info!(
            "trained on {} paths: {} rules, {} transitions",
            history.len(),
            rules.len(),
            tm.entries().map(|(_, _, c)| c).sum::<u64>()
        );
        Ok(Trained { history, rules, tm })
    }
}
