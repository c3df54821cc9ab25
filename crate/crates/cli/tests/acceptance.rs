//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints one PASS/FAIL line; any failure fails the target.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use pmms_core::experiments::accuracy::{run_accuracy_with, test_paths};
use pmms_core::experiments::delay::{run_delay_experiment, run_drop_experiment_with};
use pmms_core::experiments::{AccuracyReport, DelayReport, Predictor, SimConfig, Trained};
use pmms_core::handoff::{packet_delay, scan_delay, DelayConfig, LoadClass, PacketDelayMode};
use pmms_core::mobility::{generate_history, MobilityConfig, PathHistory};
use pmms_core::prediction::{mine_rules, MiningConfig};
use pmms_core::radio::{friis_rssi, RadioConfig};
use pmms_core::reservation::{ReservationConfig, ReservationLedger, ReservationState, TrafficType};
use pmms_core::{ApId, GridTopology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn default_runs() -> &'static [(AccuracyReport, GridTopology, SimConfig)] {
    static RUNS: OnceLock<Vec<(AccuracyReport, GridTopology, SimConfig)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let cfg = SimConfig {
                    seed,
                    ..SimConfig::default()
                };
                let topo = cfg.topology().unwrap();
                let trained = Trained::build(&cfg, &topo).unwrap();
                (run_accuracy_with(&cfg, &topo, &trained).unwrap(), topo, cfg)
            })
            .collect()
    })
}

fn delay_runs() -> &'static [DelayReport] {
    static RUNS: OnceLock<Vec<DelayReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let cfg = SimConfig {
                    seed,
                    ..SimConfig::default()
                };
                run_delay_experiment(&cfg).unwrap()
            })
            .collect()
    })
}

fn geometry_census() -> Outcome {
    let start = Instant::now();
    let topo = GridTopology::build_grid(5, 5, 100.0).map_err(|e| e.to_string())?;
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in topo.regions() {
        *sizes.entry(topo.region_aps(r).len()).or_default() += 1;
    }
    let every_ap_in_four = topo.aps().all(|a| topo.ap_regions(a).len() == 4);
    let elapsed = start.elapsed();
    let want: BTreeMap<usize, usize> = [(1, 4), (2, 16), (4, 16)].into();
    check(
        sizes == want && every_ap_in_four && topo.ap_count() == 25 && elapsed.as_secs_f64() < 1.0,
        format!("region sizes {sizes:?}, every AP in 4 regions: {every_ap_in_four}, {elapsed:?}"),
    )
}

/// Double-double arithmetic, about 32 significant digits.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn new(x: f64) -> Dd {
        Dd(x, 0.0)
    }

    fn fast(s: f64, e: f64) -> Dd {
        let hi = s + e;
        Dd(hi, e - (hi - s))
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::fast(s, err + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p) + (self.0 * o.1 + self.1 * o.0);
        Dd::fast(p, err)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd::new(-q1)));
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd::new(-q2)));
        let q3 = r.0 / o.0;
        Dd::fast(q1, q2).add(Dd::new(q3))
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

fn friis_oracle() -> Outcome {
    const PI: Dd = Dd(std::f64::consts::PI, 1.224_646_799_147_353_2e-16);
    let c = Dd::new(299_792_458.0);
    let powers = [1e-3, 5e-3, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0];
    let freqs = [
        100e6, 433e6, 868e6, 914e6, 1.2e9, 2.412e9, 2.437e9, 2.462e9, 5.18e9, 5.8e9,
    ];
    let dists = [0.5, 7.3, 100.0, 141.421_356, 950.0];
    let losses = [1.0, 2.5];
    let (mut points, mut worst) = (0, 0.0f64);
    for &pt in &powers {
        for &f in &freqs {
            for &d in &dists {
                for &loss in &losses {
                    let cfg = RadioConfig {
                        trans_power: pt,
                        frequency: f,
                        loss,
                        ..RadioConfig::default()
                    };
                    let got = friis_rssi(&cfg, d).map_err(|e| e.to_string())?;
                    let lambda = c.div(Dd::new(f));
                    let four_pi = PI.mul(Dd::new(4.0));
                    let num = Dd::new(pt).mul(lambda).mul(lambda);
                    let den = four_pi
                        .mul(four_pi)
                        .mul(Dd::new(d))
                        .mul(Dd::new(d))
                        .mul(Dd::new(loss));
                    let want = num.div(den).value();
                    worst = worst.max(((got - want) / want).abs());
                    points += 1;
                }
            }
        }
    }
    check(
        points == 1000 && worst <= 1e-12,
        format!("{points} points, worst relative error {worst:.3e}"),
    )
}

fn packet_delay_oracle() -> Outcome {
    let d = DelayConfig::default();
    let rates = [
        d.proc_cap,
        d.arrival_rate_max,
        d.arrival_rate_avg,
        d.arrival_rate_min,
        0.0,
    ];
    let (mut pairs, mut worst_std, mut worst_verb) = (0, 0.0f64, 0.0f64);
    for &a in &rates {
        for &b in &rates {
            if b >= a {
                if packet_delay(a, b, PacketDelayMode::Standard).is_ok() {
                    return Err(format!("a={a}, b={b} accepted as stable"));
                }
                continue;
            }
            let std = packet_delay(a, b, PacketDelayMode::Standard).map_err(|e| e.to_string())?;
            // The queueing form before simplification.
            let queue = (1.0 / a) * (1.0 / (1.0 - b / a));
            worst_std = worst_std.max(((std - queue) / queue).abs());
            let verb = packet_delay(a, b, PacketDelayMode::Verbatim).map_err(|e| e.to_string())?;
            let printed = 1.0 / a + 1.0 / (1.0 - b / a);
            worst_verb = worst_verb.max(((verb - printed) / printed).abs());
            pairs += 1;
        }
    }
    let unstable = packet_delay(d.arrival_rate_avg, d.proc_cap, PacketDelayMode::Standard).is_err();
    check(
        worst_std <= 1e-12 && worst_verb <= 1e-12 && unstable,
        format!("{pairs} rate pairs, standard {worst_std:.1e}, verbatim {worst_verb:.1e}, b >= a rejected: {unstable}"),
    )
}

/// Neighbor count on a 5x5 grid, straight from the 8-neighborhood.
fn neighbor_count(ap: ApId) -> usize {
    let (r, c) = ((ap.0 / 5) as i32, (ap.0 % 5) as i32);
    let mut n = 0;
    for dr in -1..=1 {
        for dc in -1..=1 {
            let (rr, cc) = (r + dr, c + dc);
            if (dr, dc) != (0, 0) && (0..5).contains(&rr) && (0..5).contains(&cc) {
                n += 1;
            }
        }
    }
    n
}

fn prediction_bands() -> Outcome {
    let runs = default_runs();
    let mean = |p: Predictor| {
        runs.iter().map(|(r, _, _)| r.overall_pct(p)).sum::<f64>() / runs.len() as f64
    };
    let (partial, full, lt, dm, tm, ip) = (
        mean(Predictor::LtdmpsPartial),
        mean(Predictor::LtdmpsFull),
        mean(Predictor::LtOnly),
        mean(Predictor::DmOnly),
        mean(Predictor::Tm),
        mean(Predictor::Ip),
    );

    let mut expected = Vec::new();
    for (_, topo, cfg) in runs {
        assert!(cfg.n_history >= 10_000 && cfg.n_test >= 1_000);
        let (test, _) = test_paths(cfg, topo, cfg.n_test).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for p in &test.paths {
            for w in p.aps().windows(2) {
                sum += 1.0 / neighbor_count(w[0]) as f64;
                n += 1;
            }
        }
        expected.push(100.0 * sum / n as f64);
    }
    let ip_expected = expected.iter().sum::<f64>() / expected.len() as f64;

    let ordered = runs.iter().all(|(r, _, _)| {
        let f = r.overall_pct(Predictor::LtdmpsFull);
        f >= r.overall_pct(Predictor::LtOnly) && f >= r.overall_pct(Predictor::DmOnly)
    });
    check(
        (70.0..=92.0).contains(&partial)
            && (40.0..=65.0).contains(&tm)
            && (ip - ip_expected).abs() <= 5.0
            && full >= 85.0
            && ordered,
        format!(
            "ltdmps {partial:.2}%, tm {tm:.2}%, ip {ip:.2}% vs expected {ip_expected:.2}%, \
             full {full:.2}% (lt {lt:.2}%, dm {dm:.2}%), full >= components on every seed: {ordered}"
        ),
    )
}

fn rank_support() -> Outcome {
    let mut ltdmps = BTreeSet::new();
    let mut tm = BTreeSet::new();
    let mut unranked = 0;
    for (r, _, _) in default_runs() {
        ltdmps.extend(r.rank_support(Predictor::LtdmpsPartial));
        tm.extend(r.rank_support(Predictor::Tm));
        unranked += r.ranks[&Predictor::LtdmpsPartial]
            .get(&None)
            .copied()
            .unwrap_or(0);
    }
    let tm_max = tm.last().copied().unwrap_or(0);
    check(
        ltdmps.iter().all(|r| (1..=3).contains(r)) && unranked == 0 && tm_max >= 4,
        format!("ltdmps ranks {ltdmps:?}, tm ranks {tm:?}"),
    )
}

fn count_occurrences(seqs: &[Vec<ApId>], pattern: &[ApId]) -> u64 {
    let mut n = 0;
    for s in seqs {
        if s.len() < pattern.len() {
            continue;
        }
        for i in 0..=s.len() - pattern.len() {
            if s[i..i + pattern.len()] == *pattern {
                n += 1;
            }
        }
    }
    n
}

type RuleKey = (Vec<ApId>, ApId, u64, u64);

fn brute_force_rules(history: &PathHistory, cfg: &MiningConfig) -> BTreeSet<RuleKey> {
    let seqs: Vec<Vec<ApId>> = history.paths.iter().map(|p| p.aps()).collect();
    let mut candidates = BTreeSet::new();
    for s in &seqs {
        for i in 0..s.len() {
            for len in 1..=cfg.max_head_len {
                if i + len < s.len() {
                    candidates.insert((s[i..i + len].to_vec(), s[i + len]));
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for (head, tail) in candidates {
        let mut full = head.clone();
        full.push(tail);
        let support = count_occurrences(&seqs, &full);
        let head_count = count_occurrences(&seqs, &head);
        let confidence = support as f64 / head_count as f64;
        if support >= cfg.min_support && confidence >= cfg.min_confidence {
            out.insert((head, tail, support, confidence.to_bits()));
        }
    }
    out
}

fn miner_equivalence() -> Outcome {
    let topo = GridTopology::build_grid(5, 5, 100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut total_rules = 0;
    for corpus in 0..20 {
        let n = rng.random_range(1..=100);
        let history = generate_history(n, &topo, &MobilityConfig::history(), &mut rng).unwrap();
        let cfg = MiningConfig {
            max_head_len: rng.random_range(1..=5),
            min_support: rng.random_range(1..=3),
            min_confidence: rng.random_range(0.0..0.5),
        };
        let mined: BTreeSet<RuleKey> = mine_rules(&history, &cfg)
            .unwrap()
            .rules()
            .iter()
            .map(|r| (r.head.clone(), r.tail, r.support, r.confidence.to_bits()))
            .collect();
        let oracle = brute_force_rules(&history, &cfg);
        if mined != oracle {
            return Err(format!(
                "corpus {corpus} ({n} paths, {cfg:?}): miner {} rules, oracle {}",
                mined.len(),
                oracle.len()
            ));
        }
        total_rules += mined.len();
    }
    Ok(format!(
        "20 corpora identical, {total_rules} rules in total"
    ))
}

fn delay_bands() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (seed, r) in SEEDS.iter().zip(delay_runs()) {
        let m = r.means();
        let paths: BTreeSet<u64> = r.events.iter().map(|e| e.path_id).collect();
        let pass = paths.len() == 100
            && (7.0..=13.0).contains(&m.scan_ms)
            && (2.5..=6.5).contains(&m.auth_ms)
            && (9.0..=15.0).contains(&m.reassoc_ms)
            && (25.0..=50.0).contains(&m.total_ms);
        ok &= pass;
        lines.push(format!(
            "seed {seed}: scan {:.2} auth {:.2} reassoc {:.2} total {:.2}",
            m.scan_ms, m.auth_ms, m.reassoc_ms, m.total_ms
        ));
    }
    check(ok, lines.join("; "))
}

fn scan_bound() -> Outcome {
    let cfg = DelayConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let loads = [LoadClass::Low, LoadClass::Medium, LoadClass::High];
    let mut inside = 0;
    let samples = 10_000;
    for _ in 0..samples {
        let n = rng.random_range(1..=14u32);
        let responding = rng.random_range(0..=n + 1);
        let load = loads[rng.random_range(0..3)];
        let s = scan_delay(true, n, responding, &cfg, load, &mut rng);
        let (lo, hi) = (
            n as f64 * cfg.min_channel_time_ms,
            n as f64 * cfg.max_channel_time_ms,
        );
        inside += usize::from(s >= lo && s <= hi);
    }
    let (lo, hi) = (
        cfg.n_channels as f64 * cfg.min_channel_time_ms,
        cfg.n_channels as f64 * cfg.max_channel_time_ms,
    );
    let first: Vec<f64> = delay_runs()
        .iter()
        .flat_map(|r| r.events.iter())
        .filter(|e| e.event.first_association)
        .map(|e| e.event.delays.scan_ms)
        .collect();
    let sim_inside = first.iter().filter(|&&s| s >= lo && s <= hi).count();
    check(
        inside == samples && sim_inside == first.len(),
        format!(
            "{inside}/{samples} sampled scans and {sim_inside}/{} simulated first scans in bounds",
            first.len()
        ),
    )
}

fn reservation_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let aps = 25u16;
    let mut ops = 0u64;
    let mut applied = 0u64;
    for _ in 0..10 {
        let cfg = ReservationConfig {
            total_buffer: rng.random_range(1..=200_000_000),
            stage1_fraction: rng.random_range(0.0..0.5),
            stage2_audio_fraction: rng.random_range(0.0..0.5),
            stage2_text_fraction: rng.random_range(0.0..0.5),
            timeout: rng.random_range(1..=4),
            emergency_fraction: rng.random_range(0.0..0.3),
        };
        let mut ledger = ReservationLedger::new(aps as usize, cfg);
        let mut now = 0;
        for _ in 0..100_000 {
            let ap = ApId(rng.random_range(0..aps + 1));
            let mn = rng.random_range(0..12u64);
            let ok = match rng.random_range(0..9) {
                0 | 1 => ledger.first_stage_reserve(ap, mn, now).is_ok(),
                2 => {
                    let traffic = if rng.random_bool(0.5) {
                        TrafficType::Audio
                    } else {
                        TrafficType::Text
                    };
                    ledger.second_stage_reserve(ap, mn, traffic, now).is_ok()
                }
                3 => ledger.confirm(mn, ap, rng.random_bool(0.6)).is_ok(),
                4 => {
                    now += rng.random_range(0..=2);
                    ledger.expire_and_preempt(now);
                    true
                }
                5 => ledger.release(mn, ap).is_ok(),
                6 | 7 => {
                    let ids: Vec<(u64, u64)> =
                        ledger.reservations(ap).map(|r| (r.id, r.bytes)).collect();
                    match ids.get(rng.random_range(0..ids.len().max(1))) {
                        Some(&(id, bytes)) => {
                            let want = rng.random_range(0..=bytes.max(1));
                            ledger.borrow(id, mn + 100, want).is_ok()
                        }
                        None => false,
                    }
                }
                _ => {
                    let id = rng.random_range(0..ops.max(1));
                    ledger.return_loan(id, mn + 100) > 0
                }
            };
            ops += 1;
            applied += u64::from(ok);
            for a in 0..aps {
                let a = ApId(a);
                let (mut active, mut passive) = (0u64, 0u64);
                for r in ledger.reservations(a) {
                    match r.state {
                        ReservationState::Active => active += r.bytes,
                        ReservationState::Passive => passive += r.bytes,
                        ReservationState::Expired if r.bytes != 0 => {
                            return Err(format!(
                                "op {ops}: expired reservation {} holds bytes",
                                r.id
                            ))
                        }
                        ReservationState::Expired => {}
                    }
                }
                if ledger.free(a) + active + passive != ledger.total(a) {
                    return Err(format!(
                        "op {ops}: AP {a}: free {} + active {active} + passive {passive} != total {}",
                        ledger.free(a),
                        ledger.total(a)
                    ));
                }
            }
            if let Err(e) = ledger.audit() {
                return Err(format!("op {ops}: audit failed: {e}"));
            }
        }
    }
    check(
        ops >= 1_000_000,
        format!("identity held after all {ops} operations ({applied} took effect)"),
    )
}

fn drop_dominance() -> Outcome {
    let cfg = SimConfig::default();
    let topo = cfg.topology().unwrap();
    let trained = Trained::build(&cfg, &topo).unwrap();
    let r = run_drop_experiment_with(&cfg, &topo, &trained, 1000).map_err(|e| e.to_string())?;
    let violations = r
        .paths
        .iter()
        .filter(|p| p.with_reservation > p.without_reservation)
        .count();
    let with: u64 = r.paths.iter().map(|p| p.with_reservation).sum();
    let without: u64 = r.paths.iter().map(|p| p.without_reservation).sum();
    check(
        r.paths.len() == 1000 && violations == 0,
        format!(
            "{} paths, {violations} violations, {} vs {} bits dropped",
            r.paths.len(),
            r.bits(with),
            r.bits(without)
        ),
    )
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        let out = Command::new(env!("CARGO_BIN_EXE_pmms"))
            .args(["all", "--seed", "7", "--out-dir"])
            .arg(&dir)
            .env_remove("PMMS_CONFIG")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "run {run} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        outputs.push(files);
    }
    let csvs = outputs[0].keys().filter(|k| k.ends_with(".csv")).count();
    let differing: Vec<&String> = outputs[0]
        .iter()
        .filter(|(k, v)| outputs[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        csvs >= 9 && differing.is_empty() && outputs[0].len() == outputs[1].len(),
        format!(
            "{} files ({csvs} CSV) byte-identical, differing: {differing:?}",
            outputs[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("geometry census", geometry_census),
        ("friis oracle", friis_oracle),
        ("packet delay oracle", packet_delay_oracle),
        ("prediction ordering and bands", prediction_bands),
        ("frequency-rank support", rank_support),
        ("rule miner equivalence", miner_equivalence),
        ("delay means", delay_bands),
        ("scan bound", scan_bound),
        ("reservation conservation", reservation_conservation),
        ("drop dominance", drop_dominance),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
