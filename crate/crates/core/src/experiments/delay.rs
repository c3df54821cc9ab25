//! Handoff-delay and packet-drop experiments.
//!
//! Each test path is walked through the full pipeline. On every hop the
//! node approaches the next AP while its RSSI is traced; the server
//! predicts the next AP one sample before the handoff threshold and places
//! a first-stage reservation there, adds the second stage and confirms when
//! the threshold fires, then the handoff runs against whatever buffer was
//! reserved on the AP actually reached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::accuracy::{lt_sample_point, test_paths};
use super::config::SimConfig;
use super::Trained;
use crate::error::Result;
use crate::handoff::{
    execute_handoff, ApproachTrace, HandoffEvent, HandoffRequest, LoadClass, MobileSession,
    TraceSample,
};
use crate::mobility::MobilePath;
use crate::prediction::{predict_dm, predict_lt, predict_ltdmps, RankedPrediction};
use crate::radio::{sample_rssi, RadioConfig};
use crate::reservation::{classify_traffic, LedgerRow, ReservationLedger, TrafficType, AUDIO_TOS};
use crate::topology::{ApId, GridTopology};
use crate::Tick;

/// Tag given to non-audio flows.
const TEXT_TOS: u8 = 0x00;

#[derive(Debug, Clone, PartialEq)]
pub struct PathEvent {
    pub path_id: u64,
    pub event: HandoffEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub transition: usize,
    pub from_ap: ApId,
    pub to_ap: ApId,
    pub sample: TraceSample,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayReport {
    pub events: Vec<PathEvent>,
    pub traffic: Vec<(u64, TrafficType)>,
    /// Full ledger snapshot after each handoff, keyed by its tick.
    pub ledger: Vec<(Tick, LedgerRow)>,
    pub traces: Vec<TraceRow>,
}

/// Means of each delay component, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayMeans {
    pub scan_ms: f64,
    pub auth_ms: f64,
    pub reassoc_ms: f64,
    pub load_ms: f64,
    pub packet_ms: f64,
    pub prediction_ms: f64,
    pub total_ms: f64,
}

impl DelayMeans {
    pub fn of<'a>(events: impl IntoIterator<Item = &'a HandoffEvent>) -> Self {
        let mut m = DelayMeans::default();
        let mut n = 0usize;
        for e in events {
            let d = &e.delays;
            m.scan_ms += d.scan_ms;
            m.auth_ms += d.auth_ms;
            m.reassoc_ms += d.reassoc_ms;
            m.load_ms += d.load_ms;
            m.packet_ms += d.packet_ms;
            m.prediction_ms += d.prediction_ms;
            m.total_ms += d.total();
            n += 1;
        }
        if n > 0 {
            let k = n as f64;
            for v in [
                &mut m.scan_ms,
                &mut m.auth_ms,
                &mut m.reassoc_ms,
                &mut m.load_ms,
                &mut m.packet_ms,
                &mut m.prediction_ms,
                &mut m.total_ms,
            ] {
                *v /= k;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDelay {
    pub path_id: u64,
    pub traffic: TrafficType,
    pub events: usize,
    pub means: DelayMeans,
    pub loads: [usize; 3],
    pub dropped_packets: u64,
}

impl DelayReport {
    /// Means over every event, first associations included.
    pub fn means(&self) -> DelayMeans {
        DelayMeans::of(self.events.iter().map(|e| &e.event))
    }

    pub fn max_total_ms(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.event.delays.total())
            .fold(0.0, f64::max)
    }

    pub fn per_path(&self) -> Vec<PathDelay> {
        self.traffic
            .iter()
            .map(|&(path_id, traffic)| {
                let evs: Vec<&HandoffEvent> = self
                    .events
                    .iter()
                    .filter(|e| e.path_id == path_id)
                    .map(|e| &e.event)
                    .collect();
                let mut loads = [0; 3];
                for e in &evs {
                    loads[e.load as usize] += 1;
                }
                PathDelay {
                    path_id,
                    traffic,
                    events: evs.len(),
                    means: DelayMeans::of(evs.iter().copied()),
                    loads,
                    dropped_packets: evs.iter().map(|e| e.packets_dropped).sum(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDrops {
    pub path_id: u64,
    pub handoffs: usize,
    pub with_reservation: u64,
    pub without_reservation: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropReport {
    pub packet_size_bytes: u64,
    pub paths: Vec<PathDrops>,
}

impl DropReport {
    pub fn bits(&self, packets: u64) -> u64 {
        packets * self.packet_size_bytes * 8
    }
}

/// The LTDMPS prediction for one hop, with the server told whether LT's
/// answer diverged from the actual move.
#[allow(clippy::too_many_arguments)]
fn predict_hop(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
    radio: &RadioConfig,
    path: &MobilePath,
    k: usize,
    tick: Tick,
    rng: &mut ChaCha8Rng,
) -> RankedPrediction {
    let aps = path.aps();
    let (current, actual, region) = (aps[k - 1], aps[k], path.steps[k].region);
    let candidates: Vec<ApId> = topo
        .candidate_next_aps(current, region)
        .into_iter()
        .filter(|&a| a != current)
        .collect();
    if candidates.len() == 1 {
        return RankedPrediction {
            candidates: vec![(candidates[0], 1.0)],
            decisive: true,
        };
    }
    let mut dm = predict_dm(&trained.rules, &aps[..k], &candidates);
    for &c in &candidates {
        if !dm.aps().any(|a| a == c) {
            dm.candidates.push((c, 0.0));
        }
    }
    let point = lt_sample_point(
        topo,
        current,
        actual,
        region,
        cfg.lt_sampling.progress,
        cfg.lt_sampling.lateral_sd,
        rng,
    );
    let samples: Vec<_> = sample_rssi(point, topo, region, radio, tick, rng)
        .into_iter()
        .filter(|s| candidates.contains(&s.ap))
        .collect();
    let lt = predict_lt(&samples, &cfg.lt);
    let lt_wrong = lt.decisive && lt.top() != Some(actual);
    predict_ltdmps(&lt, &dm, lt_wrong)
}

struct Simulation<'a> {
    cfg: &'a SimConfig,
    topo: &'a GridTopology,
    trained: &'a Trained,
    radio: RadioConfig,
    ledger: Option<ReservationLedger>,
    report: DelayReport,
    tick: Tick,
    transitions: usize,
}

impl Simulation<'_> {
    fn step_to(&mut self, tick: Tick) {
        self.tick = tick;
        if let Some(l) = self.ledger.as_mut() {
            l.expire_and_preempt(tick);
        }
    }

    fn attached(&self, rng: &mut ChaCha8Rng) -> u32 {
        let (lo, hi) = self.cfg.attached_nodes;
        rng.random_range(lo..=hi)
    }

    fn snapshot(&mut self) {
        if let Some(l) = &self.ledger {
            let t = self.tick;
            self.report
                .ledger
                .extend(l.snapshot().into_iter().map(|r| (t, r)));
        }
    }

    fn run_path(&mut self, path: &MobilePath, rng: &mut ChaCha8Rng) -> Result<()> {
        let audio = rng.random_bool(self.cfg.audio_share);
        let traffic = classify_traffic(if audio { AUDIO_TOS } else { TEXT_TOS });
        self.report.traffic.push((path.id, traffic));
        let mn = path.id;
        let mut session = MobileSession::new(mn);

        let first = path.steps[0];
        let req = HandoffRequest {
            tick: self.tick,
            to_ap: first.ap,
            region: first.region,
            attached: self.attached(rng),
            reachable: true,
            emergency: false,
        };
        let event = execute_handoff(
            &mut session,
            &req,
            &RankedPrediction::empty(),
            self.ledger.as_mut(),
            self.topo,
            &self.cfg.delay,
            rng,
        )?;
        self.report.events.push(PathEvent {
            path_id: path.id,
            event,
        });
        self.snapshot();

        for k in 1..path.len() {
            let base = self.tick + u64::from(path.steps[k - 1].dwell);
            let (from, to) = (path.steps[k - 1].ap, path.steps[k].ap);
            let trace =
                ApproachTrace::new(self.topo, &self.cfg.radio, from, to, self.cfg.trace_samples);
            if self.transitions < self.cfg.trace_export {
                self.report
                    .traces
                    .extend(trace.samples.iter().map(|&sample| TraceRow {
                        transition: self.transitions + 1,
                        from_ap: from,
                        to_ap: to,
                        sample,
                    }));
            }
            self.transitions += 1;
            let ready = trace.ready_at();
            let emergency = ready.is_none();
            let ready = ready.unwrap_or(trace.samples.len() - 1).max(1) as u64;

            // One sample ahead of the handoff threshold: predict and hold.
            self.step_to(base + ready - 1);
            let prediction = predict_hop(
                self.cfg,
                self.topo,
                self.trained,
                &self.radio,
                path,
                k,
                self.tick,
                rng,
            );
            let predicted = prediction
                .top()
                .expect("candidate set contains the next AP");
            let now = self.tick;
            if let Some(l) = self.ledger.as_mut() {
                let _ = l.first_stage_reserve(predicted, mn, now);
            }

            // Threshold reached: second stage, then confirm or cancel.
            self.step_to(base + ready);
            let now = self.tick;
            if let Some(l) = self.ledger.as_mut() {
                if !emergency {
                    let _ = l.second_stage_reserve(predicted, mn, traffic, now);
                }
                l.confirm(mn, predicted, predicted == to)?;
            }

            let req = HandoffRequest {
                tick: self.tick,
                to_ap: to,
                region: path.steps[k].region,
                attached: self.attached(rng),
                reachable: true,
                emergency,
            };
            let event = execute_handoff(
                &mut session,
                &req,
                &prediction,
                self.ledger.as_mut(),
                self.topo,
                &self.cfg.delay,
                rng,
            )?;
            self.report.events.push(PathEvent {
                path_id: path.id,
                event,
            });
            self.snapshot();
            self.tick = base + self.cfg.trace_samples as u64;
        }

        if let (Some(l), Some(last)) = (self.ledger.as_mut(), session.current) {
            l.release(mn, last)?;
        }
        self.tick += u64::from(path.steps[path.len() - 1].dwell);
        Ok(())
    }
}

/// Runs `n_paths` test paths through the pipeline, with or without the
/// reservation ledger. The random stream does not depend on the ledger, so
/// the two variants see identical paths, predictions and delays.
pub fn simulate(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
    n_paths: usize,
    reservation: bool,
) -> Result<DelayReport> {
    let (paths, _) = test_paths(cfg, topo, n_paths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.effective_test_seed() ^ 0xD1B5_4A32_D192_ED03);
    let mut sim = Simulation {
        cfg,
        topo,
        trained,
        radio: RadioConfig {
            noise_stddev_fraction: cfg.lt_sampling.noise,
            ..cfg.radio.clone()
        },
        ledger: reservation
            .then(|| ReservationLedger::new(topo.ap_count(), cfg.reservation.clone())),
        report: DelayReport::default(),
        tick: 0,
        transitions: 0,
    };
    for path in &paths.paths {
        sim.run_path(path, &mut rng)?;
    }
    if let Some(l) = &sim.ledger {
        l.audit()?;
    }
    Ok(sim.report)
}

pub fn run_delay_experiment(cfg: &SimConfig) -> Result<DelayReport> {
    let topo = cfg.topology()?;
    let trained = Trained::build(cfg, &topo)?;
    simulate(cfg, &topo, &trained, cfg.n_delay_paths, true)
}

pub fn drops_from(cfg: &SimConfig, with: &DelayReport, without: &DelayReport) -> DropReport {
    let with_paths = with.per_path();
    let without_paths = without.per_path();
    DropReport {
        packet_size_bytes: cfg.delay.packet_size_bytes,
        paths: with_paths
            .iter()
            .zip(&without_paths)
            .map(|(w, wo)| {
                debug_assert_eq!(w.path_id, wo.path_id);
                PathDrops {
                    path_id: w.path_id,
                    handoffs: w.events,
                    with_reservation: w.dropped_packets,
                    without_reservation: wo.dropped_packets,
                }
            })
            .collect(),
    }
}

pub fn run_drop_experiment_with(
    cfg: &SimConfig,
    topo: &GridTopology,
    trained: &Trained,
    n_paths: usize,
) -> Result<DropReport> {
    let with = simulate(cfg, topo, trained, n_paths, true)?;
    let without = simulate(cfg, topo, trained, n_paths, false)?;
    Ok(drops_from(cfg, &with, &without))
}

pub fn run_drop_experiment(cfg: &SimConfig) -> Result<DropReport> {
    let topo = cfg.topology()?;
    let trained = Trained::build(cfg, &topo)?;
    run_drop_experiment_with(cfg, &topo, &trained, cfg.n_drop_paths)
}

/// Load classes seen across the report, in `[low, medium, high]` order.
pub fn load_mix(report: &DelayReport) -> [usize; 3] {
    let mut mix = [0; 3];
    for e in &report.events {
        mix[e.event.load as usize] += 1;
    }
    mix
}

pub fn load_name(i: usize) -> &'static str {
    [LoadClass::Low, LoadClass::Medium, LoadClass::High][i].as_str()
}
