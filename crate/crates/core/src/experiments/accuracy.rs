//! Prediction-accuracy experiment: all predictors scored on the same test
//! transitions.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::SimConfig;
use super::Trained;
use crate::error::Result;
use crate::mobility::{MobilePath, PathHistory};
use crate::prediction::{
    frequency_rank, ip_expected_accuracy, predict_dm, predict_ip, predict_lt, predict_ltdmps,
    predict_tm, RankedPrediction,
};
use crate::radio::{sample_rssi, RadioConfig};
use crate::topology::{ApId, GridTopology, Point, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predictor {
    /// LT when decisive, DM otherwise.
    LtdmpsPartial,
    /// LT when decisive and not seen to go wrong, DM otherwise.
    LtdmpsFull,
    /// LT alone, with deliberately injected errors.
    LtOnly,
    DmOnly,
    Tm,
    Ip,
}

impl Predictor {
    pub const ALL: [Predictor; 6] = [
        Predictor::LtdmpsPartial,
        Predictor::LtdmpsFull,
        Predictor::LtOnly,
        Predictor::DmOnly,
        Predictor::Tm,
        Predictor::Ip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::LtdmpsPartial => "ltdmps_partial",
            Predictor::LtdmpsFull => "ltdmps_full",
            Predictor::LtOnly => "lt_only",
            Predictor::DmOnly => "dm_only",
            Predictor::Tm => "tm",
            Predictor::Ip => "ip",
        }
    }

    pub fn from_name(name: &str) -> Option<Predictor> {
        Predictor::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathAccuracy {
    pub path_id: u64,
    pub transitions: usize,
    pub correct: BTreeMap<Predictor, usize>,
}

impl PathAccuracy {
    pub fn accuracy_pct(&self, p: Predictor) -> Option<f64> {
        (self.transitions > 0).then(|| {
            100.0 * self.correct.get(&p).copied().unwrap_or(0) as f64 / self.transitions as f64
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyReport {
    pub paths: Vec<PathAccuracy>,
    /// Rank of the actual AP per predictor; `None` counts misses where the
    /// actual AP was not listed at all.
    pub ranks: BTreeMap<Predictor, BTreeMap<Option<usize>, u64>>,
    /// Mean of `1/|neighbors(current)|` over the scored transitions.
    pub ip_expected_pct: f64,
    /// Transitions where DM found at least one matching rule.
    pub dm_coverage_pct: f64,
    /// Transitions where LT was decisive.
    pub lt_decisive_pct: f64,
}

impl AccuracyReport {
    pub fn transitions(&self) -> usize {
        self.paths.iter().map(|p| p.transitions).sum()
    }

    /// Per-transition accuracy, percent.
    pub fn overall_pct(&self, p: Predictor) -> f64 {
        let n = self.transitions();
        let hits: usize = self
            .paths
            .iter()
            .map(|x| x.correct.get(&p).copied().unwrap_or(0))
            .sum();
        if n == 0 {
            0.0
        } else {
            100.0 * hits as f64 / n as f64
        }
    }

    /// Mean of per-path percentages.
    pub fn path_mean_pct(&self, p: Predictor) -> f64 {
        let v: Vec<f64> = self
            .paths
            .iter()
            .filter_map(|x| x.accuracy_pct(p))
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Ranks observed for a predictor, excluding misses.
    pub fn rank_support(&self, p: Predictor) -> Vec<usize> {
        self.ranks
            .get(&p)
            .into_iter()
            .flat_map(|h| h.keys().filter_map(|r| *r))
            .collect()
    }
}

/// Where the node is when the server samples it: partway along the hop,
/// pushed sideways into the region it is crossing.
pub fn lt_sample_point<R: Rng + ?Sized>(
    topo: &GridTopology,
    from: ApId,
    to: ApId,
    region: RegionId,
    progress: f64,
    lateral_sd: f64,
    rng: &mut R,
) -> Point {
    let (a, b) = (topo.ap_position(from), topo.ap_position(to));
    let on_line = a.lerp(b, progress);
    let len = a.distance(b);
    let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
    let center = topo.region_center(region);
    let (mut px, mut py) = (-uy, ux);
    if (center.x - a.x) * px + (center.y - a.y) * py < 0.0 {
        (px, py) = (-px, -py);
    }
    let offset = if lateral_sd > 0.0 {
        let n = Normal::new(0.0, lateral_sd * topo.ap_spacing()).expect("positive sd");
        n.sample(rng).abs()
    } else {
        0.0
    };
    let (lo, hi) = topo.region_bounds(region);
    let inset = 0.01;
    Point::new(
        (on_line.x + px * offset).clamp(lo.x + inset, hi.x - inset),
        (on_line.y + py * offset).clamp(lo.y + inset, hi.y - inset),
    )
}

/// Appends the candidates DM did not rank, in ascending id order with
/// score zero, so every candidate has a rank.
fn complete(mut pred: RankedPrediction, candidates: &[ApId]) -> RankedPrediction {
    for &c in candidates {
        if !pred.aps().any(|a| a == c) {
            pred.candidates.push((c, 0.0));
        }
    }
    pred
}

fn single(ap: ApId) -> RankedPrediction {
    RankedPrediction {
        candidates: vec![(ap, 1.0)],
        decisive: true,
    }
}

/// The LT ranking with its decisive answer replaced, with probability
/// `rate`, by the runner-up or another neighbor.
fn inject_error<R: Rng + ?Sized>(
    lt: &RankedPrediction,
    current: ApId,
    topo: &GridTopology,
    rate: f64,
    rng: &mut R,
) -> RankedPrediction {
    if !lt.decisive || lt.is_empty() || !rng.random_bool(rate) {
        return lt.clone();
    }
    let mut out = lt.clone();
    if out.candidates.len() >= 2 {
        out.candidates.swap(0, 1);
    } else {
        let top = out.candidates[0].0;
        let others: Vec<ApId> = topo
            .neighbors(current)
            .iter()
            .copied()
            .filter(|&a| a != top)
            .collect();
        if let Some(&wrong) = others.choose(rng) {
            out.candidates.insert(0, (wrong, out.candidates[0].1));
        }
    }
    out
}

/// Scores every predictor on every transition of the test paths.
pub fn evaluate(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
    test: &PathHistory,
    rng: &mut ChaCha8Rng,
) -> Result<AccuracyReport> {
    let radio = RadioConfig {
        noise_stddev_fraction: cfg.lt_sampling.noise,
        ..cfg.radio.clone()
    };
    let mut report = AccuracyReport::default();
    let (mut n, mut ip_expected, mut dm_hits, mut lt_decisive) = (0usize, 0.0, 0usize, 0usize);
    for path in &test.paths {
        let acc = score_path(
            cfg,
            topo,
            trained,
            &radio,
            path,
            rng,
            &mut report.ranks,
            |e| {
                n += 1;
                ip_expected += e.ip_expected;
                dm_hits += usize::from(e.dm_matched);
                lt_decisive += usize::from(e.lt_decisive);
            },
        );
        report.paths.push(acc);
    }
    if n > 0 {
        report.ip_expected_pct = 100.0 * ip_expected / n as f64;
        report.dm_coverage_pct = 100.0 * dm_hits as f64 / n as f64;
        report.lt_decisive_pct = 100.0 * lt_decisive as f64 / n as f64;
    }
    Ok(report)
}

struct TransitionStats {
    ip_expected: f64,
    dm_matched: bool,
    lt_decisive: bool,
}

#[allow(clippy::too_many_arguments)]
fn score_path(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
    radio: &RadioConfig,
    path: &MobilePath,
    rng: &mut ChaCha8Rng,
    ranks: &mut BTreeMap<Predictor, BTreeMap<Option<usize>, u64>>,
    mut on_transition: impl FnMut(TransitionStats),
) -> PathAccuracy {
    let aps = path.aps();
    let mut correct: BTreeMap<Predictor, usize> = Predictor::ALL.iter().map(|&p| (p, 0)).collect();
    for k in 1..aps.len() {
        let (current, actual, region) = (aps[k - 1], aps[k], path.steps[k].region);
        let candidates: Vec<ApId> = topo
            .candidate_next_aps(current, region)
            .into_iter()
            .filter(|&a| a != current)
            .collect();

        let dm_raw = predict_dm(&trained.rules, &aps[..k], &candidates);
        let dm = complete(dm_raw.clone(), &candidates);

        let point = lt_sample_point(
            topo,
            current,
            actual,
            region,
            cfg.lt_sampling.progress,
            cfg.lt_sampling.lateral_sd,
            rng,
        );
        let samples: Vec<_> = sample_rssi(point, topo, region, radio, k as u64, rng)
            .into_iter()
            .filter(|s| candidates.contains(&s.ap))
            .collect();
        let lt = predict_lt(&samples, &cfg.lt);
        let lt_wrong = lt.decisive && lt.top() != Some(actual);

        let (partial, full) = if candidates.len() == 1 {
            (single(candidates[0]), single(candidates[0]))
        } else {
            (
                predict_ltdmps(&lt, &dm, false),
                predict_ltdmps(&lt, &dm, lt_wrong),
            )
        };
        let lt_only = inject_error(&lt, current, topo, cfg.lt_sampling.injected_error_rate, rng);
        let tm = predict_tm(&trained.tm, current, usize::MAX);
        let ip = single(predict_ip(current, topo, rng));

        for (p, pred) in [
            (Predictor::LtdmpsPartial, &partial),
            (Predictor::LtdmpsFull, &full),
            (Predictor::LtOnly, &lt_only),
            (Predictor::DmOnly, &dm),
            (Predictor::Tm, &tm),
            (Predictor::Ip, &ip),
        ] {
            let rank = frequency_rank(pred, actual);
            if rank == Some(1) {
                *correct.get_mut(&p).expect("all predictors present") += 1;
            }
            *ranks.entry(p).or_default().entry(rank).or_insert(0) += 1;
        }
        on_transition(TransitionStats {
            ip_expected: ip_expected_accuracy(current, topo),
            dm_matched: dm_raw.decisive,
            lt_decisive: lt.decisive,
        });
    }
    PathAccuracy {
        path_id: path.id,
        transitions: aps.len().saturating_sub(1),
        correct,
    }
}

/// Generates the test paths for the config's test stream.
pub fn test_paths(
    cfg: &SimConfig,
    topo: &GridTopology,
    n: usize,
) -> Result<(PathHistory, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.effective_test_seed());
    let paths = crate::mobility::generate_history(n, topo, &cfg.test_mobility, &mut rng)?;
    Ok((paths, rng))
}

pub fn run_accuracy_experiment(cfg: &SimConfig) -> Result<AccuracyReport> {
    let topo = cfg.topology()?;
    let trained = Trained::build(cfg, &topo)?;
    run_accuracy_with(cfg, &topo, &trained)
}

pub fn run_accuracy_with(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
) -> Result<AccuracyReport> {
    let (test, mut rng) = test_paths(cfg, topo, cfg.n_test)?;
    evaluate(cfg, topo, trained, &test, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_history: 2000,
            n_test: 200,
            ..SimConfig::default()
        }
    }

    #[test]
    fn combiner_is_a_disjunction() {
        let cfg = small();
        let topo = cfg.topology().unwrap();
        let trained = Trained::build(&cfg, &topo).unwrap();
        let (test, mut rng) = test_paths(&cfg, &topo, 200).unwrap();
        let report = evaluate(&cfg, &topo, &trained, &test, &mut rng).unwrap();
        let full = report.overall_pct(Predictor::LtdmpsFull);
        assert!(full >= report.overall_pct(Predictor::DmOnly));
        assert!(full >= report.overall_pct(Predictor::LtdmpsPartial));
        assert!(full >= report.overall_pct(Predictor::LtOnly));
        for p in &report.paths {
            assert!(p.correct[&Predictor::LtdmpsFull] >= p.correct[&Predictor::DmOnly]);
        }
    }

    #[test]
    fn ltdmps_ranks_stay_within_the_candidate_set() {
        let report = run_accuracy_experiment(&small()).unwrap();
        assert!(report
            .rank_support(Predictor::LtdmpsPartial)
            .iter()
            .all(|r| *r <= 3));
        assert!(report
            .rank_support(Predictor::LtdmpsFull)
            .iter()
            .all(|r| *r <= 3));
        assert!(!report.ranks[&Predictor::LtdmpsPartial].contains_key(&None));
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_accuracy_experiment(&small()).unwrap();
        let b = run_accuracy_experiment(&small()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_point_stays_in_region() {
        let topo = GridTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (from, to, region) in [(6, 7, 8), (6, 12, 14), (0, 1, 1), (0, 5, 6)] {
            let region = RegionId(region);
            for _ in 0..500 {
                let p = lt_sample_point(&topo, ApId(from), ApId(to), region, 0.6, 0.15, &mut rng);
                assert_eq!(topo.region_containing(p), Some(region));
            }
        }
    }

    #[test]
    fn injected_errors_only_touch_decisive_answers() {
        let topo = GridTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lt = RankedPrediction {
            candidates: vec![(ApId(7), 0.5), (ApId(1), 0.1)],
            decisive: true,
        };
        let flipped = inject_error(&lt, ApId(6), &topo, 1.0, &mut rng);
        assert_eq!(flipped.top(), Some(ApId(1)));
        let weak = RankedPrediction {
            decisive: false,
            ..lt.clone()
        };
        assert_eq!(inject_error(&weak, ApId(6), &topo, 1.0, &mut rng), weak);
        let alone = single(ApId(7));
        let f = inject_error(&alone, ApId(6), &topo, 1.0, &mut rng);
        assert_ne!(f.top(), Some(ApId(7)));
        assert!(topo.are_neighbors(ApId(6), f.top().unwrap()));
    }
}
