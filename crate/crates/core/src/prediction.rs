//! Next-AP predictors and their scoring.
//!
//! Data mining (DM) ranks candidates by mobility rules mined from the path
//! history. Location tracking (LT) ranks them by RSSI. LTDMPS prefers a
//! decisive LT answer and falls back to DM. The transition matrix (TM) and
//! ignorant prediction (IP) are the baselines.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{PmmsError, Result};
use crate::mobility::PathHistory;
use crate::radio::RssiSample;
use crate::topology::{ApId, GridTopology};

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityRule {
    pub head: Vec<ApId>,
    pub tail: ApId,
    /// Occurrences of `head` followed by `tail` in the corpus.
    pub support: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    pub max_head_len: usize,
    pub min_support: u64,
    pub min_confidence: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            max_head_len: 4,
            min_support: 2,
            min_confidence: 0.10,
        }
    }
}

/// Mined rules, sorted by `(head, tail)` and indexed by head.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<MobilityRule>,
    by_head: HashMap<Vec<ApId>, Vec<usize>>,
    max_head_len: usize,
}

impl RuleSet {
    pub fn from_rules(mut rules: Vec<MobilityRule>) -> Self {
        rules.sort_by(|a, b| (&a.head, a.tail).cmp(&(&b.head, b.tail)));
        let mut by_head: HashMap<Vec<ApId>, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_head.entry(r.head.clone()).or_default().push(i);
        }
        let max_head_len = rules.iter().map(|r| r.head.len()).max().unwrap_or(0);
        RuleSet {
            rules,
            by_head,
            max_head_len,
        }
    }

    pub fn rules(&self) -> &[MobilityRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn with_head<'a>(&'a self, head: &[ApId]) -> impl Iterator<Item = &'a MobilityRule> + 'a {
        self.by_head
            .get(head)
            .into_iter()
            .flatten()
            .map(|&i| &self.rules[i])
    }

    /// `;`-separated `head;tail;support;confidence`, head APs joined by `-`.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(sink);
        w.write_record(["head", "tail", "support", "confidence"])?;
        for r in &self.rules {
            let head = r
                .head
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join("-");
            w.write_record([
                head,
                r.tail.to_string(),
                r.support.to_string(),
                format!("{:.6}", r.confidence),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exhaustive contiguous-subsequence mining over the AP sequences of the
/// history. Support counts occurrences, so a pattern repeated within one
/// path counts once per occurrence.
pub fn mine_rules(history: &PathHistory, cfg: &MiningConfig) -> Result<RuleSet> {
    if cfg.min_support < 1 {
        return Err(PmmsError::config("min_support must be at least 1"));
    }
    if cfg.max_head_len < 1 {
        return Err(PmmsError::config("max_head_len must be at least 1"));
    }
    if history.is_empty() {
        return Err(PmmsError::config("cannot mine rules from an empty history"));
    }

    let mut counts: HashMap<Vec<ApId>, u64> = HashMap::new();
    for path in &history.paths {
        let aps = path.aps();
        for start in 0..aps.len() {
            let longest = (cfg.max_head_len + 1).min(aps.len() - start);
            for len in 1..=longest {
                *counts.entry(aps[start..start + len].to_vec()).or_insert(0) += 1;
            }
        }
    }

    let rules = counts
        .iter()
        .filter(|(seq, &support)| seq.len() >= 2 && support >= cfg.min_support)
        .filter_map(|(seq, &support)| {
            let (tail, head) = seq.split_last().expect("len >= 2");
            let confidence = support as f64 / counts[head] as f64;
            (confidence >= cfg.min_confidence).then(|| MobilityRule {
                head: head.to_vec(),
                tail: *tail,
                support,
                confidence,
            })
        })
        .collect();
    Ok(RuleSet::from_rules(rules))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedPrediction {
    /// Descending by score, ties already broken.
    pub candidates: Vec<(ApId, f64)>,
    pub decisive: bool,
}

impl RankedPrediction {
    pub fn empty() -> Self {
        RankedPrediction::default()
    }

    pub fn top(&self) -> Option<ApId> {
        self.candidates.first().map(|&(ap, _)| ap)
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn aps(&self) -> impl Iterator<Item = ApId> + '_ {
        self.candidates.iter().map(|&(ap, _)| ap)
    }
}

/// DM ranking. Each candidate tail is scored by its best rule under the
/// order (head length, confidence, support); the reported score is
/// `head_len + confidence`. Remaining ties go to the lower AP id.
pub fn predict_dm(rules: &RuleSet, path_prefix: &[ApId], candidates: &[ApId]) -> RankedPrediction {
    let mut best: BTreeMap<ApId, (usize, f64, u64)> = BTreeMap::new();
    let longest = rules.max_head_len.min(path_prefix.len());
    for len in 1..=longest {
        let head = &path_prefix[path_prefix.len() - len..];
        for r in rules.with_head(head) {
            if !candidates.is_empty() && !candidates.contains(&r.tail) {
                continue;
            }
            let key = (len, r.confidence, r.support);
            let slot = best.entry(r.tail).or_insert(key);
            if dm_key_cmp(&key, slot).is_gt() {
                *slot = key;
            }
        }
    }
    let mut ranked: Vec<(ApId, (usize, f64, u64))> = best.into_iter().collect();
    ranked.sort_by(|a, b| dm_key_cmp(&b.1, &a.1).then(a.0.cmp(&b.0)));
    RankedPrediction {
        decisive: !ranked.is_empty(),
        candidates: ranked
            .into_iter()
            .map(|(ap, (len, conf, _))| (ap, len as f64 + conf))
            .collect(),
    }
}

fn dm_key_cmp(a: &(usize, f64, u64), b: &(usize, f64, u64)) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtConfig {
    /// Weakest top sample that can be trusted, watts.
    pub floor: f64,
    /// Minimum `(top - second) / top` for a decisive answer.
    pub margin: f64,
}

impl Default for LtConfig {
    fn default() -> Self {
        LtConfig {
            floor: 1.427e-8,
            margin: 0.10,
        }
    }
}

/// LT ranking by RSSI, strongest first. Repeated samples of one AP keep
/// the strongest reading.
pub fn predict_lt(samples: &[RssiSample], cfg: &LtConfig) -> RankedPrediction {
    let mut strongest: BTreeMap<ApId, f64> = BTreeMap::new();
    for s in samples {
        let v = strongest.entry(s.ap).or_insert(s.rssi);
        *v = v.max(s.rssi);
    }
    let mut candidates: Vec<(ApId, f64)> = strongest.into_iter().collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let decisive = match candidates.as_slice() {
        [] => false,
        [(_, top)] => *top >= cfg.floor,
        [(_, top), (_, second), ..] => *top >= cfg.floor && (top - second) / top >= cfg.margin,
    };
    RankedPrediction {
        candidates,
        decisive,
    }
}

/// A decisive LT answer wins unless it has already been observed to be
/// wrong; otherwise DM decides.
pub fn predict_ltdmps(
    lt: &RankedPrediction,
    dm: &RankedPrediction,
    lt_observed_wrong: bool,
) -> RankedPrediction {
    if lt.decisive && !lt_observed_wrong {
        lt.clone()
    } else {
        dm.clone()
    }
}

/// First-order AP transition counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionMatrix {
    rows: BTreeMap<ApId, BTreeMap<ApId, u64>>,
}

impl TransitionMatrix {
    pub fn record(&mut self, from: ApId, to: ApId) {
        *self.rows.entry(from).or_default().entry(to).or_insert(0) += 1;
    }

    pub fn count(&self, from: ApId, to: ApId) -> u64 {
        self.rows
            .get(&from)
            .and_then(|r| r.get(&to))
            .copied()
            .unwrap_or(0)
    }

    pub fn row_total(&self, from: ApId) -> u64 {
        self.rows.get(&from).map_or(0, |r| r.values().sum())
    }

    /// Row-normalized probabilities, ascending by destination.
    pub fn probabilities(&self, from: ApId) -> Vec<(ApId, f64)> {
        let total = self.row_total(from) as f64;
        self.rows
            .get(&from)
            .into_iter()
            .flatten()
            .map(|(&to, &c)| (to, c as f64 / total))
            .collect()
    }

    /// Every nonzero `(from, to, count)`, ordered.
    pub fn entries(&self) -> impl Iterator<Item = (ApId, ApId, u64)> + '_ {
        self.rows
            .iter()
            .flat_map(|(&from, row)| row.iter().map(move |(&to, &c)| (from, to, c)))
    }

    /// Long format `from,to,count,probability`.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["from", "to", "count", "probability"])?;
        for (from, to, c) in self.entries() {
            let p = c as f64 / self.row_total(from) as f64;
            w.write_record([
                from.to_string(),
                to.to_string(),
                c.to_string(),
                format!("{p:.6}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_tm(history: &PathHistory) -> TransitionMatrix {
    let mut tm = TransitionMatrix::default();
    for path in &history.paths {
        for w in path.steps.windows(2) {
            tm.record(w[0].ap, w[1].ap);
        }
    }
    tm
}

/// The `x` most frequent successors of `current`, by count then ascending
/// id. Scores are transition probabilities.
pub fn predict_tm(tm: &TransitionMatrix, current: ApId, x: usize) -> RankedPrediction {
    let mut row = tm.probabilities(current);
    row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    row.truncate(x);
    RankedPrediction {
        decisive: !row.is_empty(),
        candidates: row,
    }
}

/// Uniform guess over the full neighborhood of `current`.
pub fn predict_ip<R: Rng + ?Sized>(current: ApId, topo: &GridTopology, rng: &mut R) -> ApId {
    *topo
        .neighbors(current)
        .choose(rng)
        .expect("every AP in a 2x2 or larger grid has neighbors")
}

/// Expected IP hit rate for a transition out of `current`.
pub fn ip_expected_accuracy(current: ApId, topo: &GridTopology) -> f64 {
    1.0 / topo.neighbors(current).len() as f64
}

/// 1-based position of `actual` among the candidates.
pub fn frequency_rank(pred: &RankedPrediction, actual: ApId) -> Option<usize> {
    pred.aps().position(|ap| ap == actual).map(|i| i + 1)
}

/// Percentage of transitions whose top prediction was right. `None` for
/// a path without transitions.
pub fn path_accuracy(predictions: &[RankedPrediction], actuals: &[ApId]) -> Result<Option<f64>> {
    if predictions.len() != actuals.len() {
        return Err(PmmsError::Domain(format!(
            "{} predictions for {} transitions",
            predictions.len(),
            actuals.len()
        )));
    }
    if actuals.is_empty() {
        return Ok(None);
    }
    let hits = predictions
        .iter()
        .zip(actuals)
        .filter(|(p, &a)| frequency_rank(p, a) == Some(1))
        .count();
    Ok(Some(100.0 * hits as f64 / actuals.len() as f64))
}
