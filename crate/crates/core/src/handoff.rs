//! Handoff delay model and packet-drop accounting.
//!
//! A handoff costs a scan, an authentication and a reassociation, each
//! inflated by a load surcharge, plus a load term, the queueing delay of a
//! packet and a penalty when the next AP was mispredicted. The first
//! association of a path pays a full active scan and a full shared-key
//! exchange; later handoffs only ping the already known, pre-authenticated
//! target.

use rand::Rng;

use crate::error::{PmmsError, Result};
use crate::prediction::RankedPrediction;
use crate::radio::{ap_channel, classify_threshold, RadioConfig, ThresholdEvent};
use crate::reservation::{NodeId, ReservationLedger, ReservationState};
use crate::topology::{ApId, GridTopology, Point, RegionId};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoadClass {
    Low,
    Medium,
    High,
}

impl LoadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadClass::Low => "low",
            LoadClass::Medium => "medium",
            LoadClass::High => "high",
        }
    }
}

/// Attached-node bounds: `<= low_max` is low, `>= high_min` is high.
pub fn classify_load_with(attached: u32, low_max: u32, high_min: u32) -> LoadClass {
    if attached <= low_max {
        LoadClass::Low
    } else if attached < high_min {
        LoadClass::Medium
    } else {
        LoadClass::High
    }
}

pub fn classify_load(attached: u32) -> LoadClass {
    classify_load_with(attached, 5, 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketDelayMode {
    /// `1 / (a - b)`.
    Standard,
    /// `1/a + 1/(1 - b/a)`, term for term as the queueing formula is often
    /// misprinted. Dimensionally inconsistent; kept for comparison only.
    Verbatim,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayConfig {
    pub min_channel_time_ms: f64,
    pub max_channel_time_ms: f64,
    pub ping_time_ms: f64,
    pub oneway_time_ms: f64,
    /// Channels swept by a full active scan.
    pub n_channels: u32,
    pub iapp_enabled: bool,
    /// Added to every delay operation, per load class.
    pub surcharge_ms: [f64; 3],
    pub load_low_max: u32,
    pub load_high_min: u32,
    /// Packets per second the AP can serve.
    pub proc_cap: f64,
    pub arrival_rate_max: f64,
    pub arrival_rate_avg: f64,
    pub arrival_rate_min: f64,
    pub packet_mode: PacketDelayMode,
    pub drop_threshold_ms: f64,
    /// Packets per millisecond that keep arriving during a handoff.
    pub proc_rate_per_ms: f64,
    pub packet_size_bytes: u64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            min_channel_time_ms: 2.0,
            max_channel_time_ms: 6.0,
            ping_time_ms: 3.0,
            oneway_time_ms: 2.0,
            n_channels: 11,
            iapp_enabled: true,
            surcharge_ms: [0.0, 2.0, 5.0],
            load_low_max: 5,
            load_high_min: 10,
            proc_cap: 1_000_000.0,
            arrival_rate_max: 950_000.0,
            arrival_rate_avg: 650_000.0,
            arrival_rate_min: 150_000.0,
            packet_mode: PacketDelayMode::Standard,
            drop_threshold_ms: 20.0,
            proc_rate_per_ms: 1000.0,
            packet_size_bytes: 1500,
        }
    }
}

impl DelayConfig {
    pub fn surcharge(&self, load: LoadClass) -> f64 {
        self.surcharge_ms[load as usize]
    }

    pub fn classify_load(&self, attached: u32) -> LoadClass {
        classify_load_with(attached, self.load_low_max, self.load_high_min)
    }

    /// Arrival rate assumed for a BSS of the given load.
    pub fn arrival_rate(&self, load: LoadClass) -> f64 {
        match load {
            LoadClass::Low => self.arrival_rate_min,
            LoadClass::Medium => self.arrival_rate_avg,
            LoadClass::High => self.arrival_rate_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_channel_time_ms > 0.0 && self.max_channel_time_ms >= self.min_channel_time_ms)
        {
            return Err(PmmsError::config(
                "need 0 < minChannelTime <= maxChannelTime",
            ));
        }
        if self.n_channels < 1 {
            return Err(PmmsError::config("at least one channel must be scanned"));
        }
        if self.load_low_max >= self.load_high_min {
            return Err(PmmsError::config(
                "low-load bound must be below the high-load bound",
            ));
        }
        if self.packet_size_bytes == 0 {
            return Err(PmmsError::config("packet size must be positive"));
        }
        let s = self.surcharge_ms;
        if s.iter().any(|v| *v < 0.0) || s[0] > s[1] || s[1] > s[2] {
            return Err(PmmsError::config(
                "load surcharges must be non-negative and non-decreasing",
            ));
        }
        for (name, v) in [
            ("ping time", self.ping_time_ms),
            ("one-way time", self.oneway_time_ms),
            ("drop threshold", self.drop_threshold_ms),
            ("processing rate", self.proc_rate_per_ms),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(PmmsError::config(format!(
                    "{name} must be a non-negative number"
                )));
            }
        }
        for load in [LoadClass::Low, LoadClass::Medium, LoadClass::High] {
            let b = self.arrival_rate(load);
            if !(0.0..self.proc_cap).contains(&b) {
                return Err(PmmsError::config(format!(
                    "arrival rate {b} must be in [0, proc_cap {})",
                    self.proc_cap
                )));
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Active-scan cost. A full scan sweeps `n_channels`; a channel where an AP
/// answers is held until probe responses are processed, somewhere between
/// the two channel times, while a silent channel is left after
/// `MinChannelTime`. A later handoff already knows the target and its
/// channel, so it only pings it.
pub fn scan_delay<R: Rng + ?Sized>(
    first_association: bool,
    n_channels: u32,
    responding_channels: u32,
    cfg: &DelayConfig,
    load: LoadClass,
    rng: &mut R,
) -> f64 {
    if !first_association {
        return cfg.ping_time_ms + cfg.surcharge(load);
    }
    let responding = responding_channels.min(n_channels);
    let silent = n_channels - responding;
    let answered: f64 = (0..responding)
        .map(|_| uniform(cfg.min_channel_time_ms, cfg.max_channel_time_ms, rng))
        .sum();
    silent as f64 * cfg.min_channel_time_ms + answered
}

/// Shared-key authentication is four one-way frames. A pre-authenticated
/// target only needs a liveness ping.
pub fn auth_delay(first_association: bool, load: LoadClass, cfg: &DelayConfig) -> f64 {
    let base = if first_association {
        4.0 * cfg.oneway_time_ms
    } else {
        cfg.ping_time_ms
    };
    base + cfg.surcharge(load)
}

/// Request and response, plus four context-transfer frames with IAPP.
pub fn reassoc_delay(load: LoadClass, iapp_enabled: bool, cfg: &DelayConfig) -> f64 {
    let frames = if iapp_enabled { 6.0 } else { 2.0 };
    frames * cfg.oneway_time_ms + cfg.surcharge(load)
}

/// Contention and retransmission cost of the BSS.
pub fn load_delay(load: LoadClass, cfg: &DelayConfig) -> f64 {
    cfg.surcharge(load)
}

/// Mean queueing delay of a packet in seconds, for service rate `a` and
/// arrival rate `b` in packets per second.
pub fn packet_delay(a: f64, b: f64, mode: PacketDelayMode) -> Result<f64> {
    if !(b >= 0.0 && b < a) {
        return Err(PmmsError::UnstableQueue {
            arrival: b,
            service: a,
        });
    }
    Ok(match mode {
        PacketDelayMode::Standard => 1.0 / (a - b),
        PacketDelayMode::Verbatim => 1.0 / a + 1.0 / (1.0 - b / a),
    })
}

/// Extra cost of heading for an AP nobody prepared: probe its channel and,
/// unless it was pre-authenticated, run the full authentication.
pub fn prediction_penalty<R: Rng + ?Sized>(
    prediction_correct: bool,
    target_pre_authenticated: bool,
    cfg: &DelayConfig,
    load: LoadClass,
    rng: &mut R,
) -> f64 {
    if prediction_correct {
        return 0.0;
    }
    let probe =
        uniform(cfg.min_channel_time_ms, cfg.max_channel_time_ms, rng) + cfg.surcharge(load);
    let auth = if target_pre_authenticated {
        0.0
    } else {
        auth_delay(true, load, cfg)
    };
    probe + auth
}

/// Packets lost when a handoff outlasts the threshold and the buffer on the
/// new AP cannot absorb the backlog.
pub fn packets_dropped(
    total_delay_ms: f64,
    drop_threshold_ms: f64,
    proc_rate_per_ms: f64,
    buffered_packets: u64,
) -> u64 {
    let overflow =
        ((total_delay_ms - drop_threshold_ms).max(0.0) * proc_rate_per_ms).round() as u64;
    overflow.saturating_sub(buffered_packets)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayBreakdown {
    pub scan_ms: f64,
    pub auth_ms: f64,
    pub reassoc_ms: f64,
    pub load_ms: f64,
    pub packet_ms: f64,
    pub prediction_ms: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.scan_ms
            + self.auth_ms
            + self.reassoc_ms
            + self.load_ms
            + self.packet_ms
            + self.prediction_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffEvent {
    pub tick: Tick,
    /// Equal to `to_ap` for the first association of a path.
    pub from_ap: ApId,
    pub to_ap: ApId,
    pub predicted: ApId,
    pub prediction_correct: bool,
    pub delays: DelayBreakdown,
    pub packets_dropped: u64,
    pub reserved_bytes_used: u64,
    pub attached: u32,
    pub load: LoadClass,
    pub first_association: bool,
    /// The target could not be reached; all traffic in the gap was lost.
    pub failed: bool,
    /// No handoff-ready threshold was seen; the node handed off on its own.
    pub emergency: bool,
}

/// Per-node state carried across the handoffs of one path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MobileSession {
    pub mn: NodeId,
    pub current: Option<ApId>,
    /// Neighbors of the current AP, authenticated ahead of time.
    pub pre_authenticated: Vec<ApId>,
    /// Completed steps, oldest first.
    pub cache: Vec<(ApId, RegionId)>,
}

impl MobileSession {
    pub fn new(mn: NodeId) -> Self {
        MobileSession {
            mn,
            ..MobileSession::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffRequest {
    pub tick: Tick,
    pub to_ap: ApId,
    pub region: RegionId,
    pub attached: u32,
    pub reachable: bool,
    pub emergency: bool,
}

/// Runs one handoff (or the initial association when the session has no
/// current AP) against the ledger's active reservations.
pub fn execute_handoff<R: Rng + ?Sized>(
    session: &mut MobileSession,
    req: &HandoffRequest,
    prediction: &RankedPrediction,
    ledger: Option<&mut ReservationLedger>,
    topo: &GridTopology,
    cfg: &DelayConfig,
    rng: &mut R,
) -> Result<HandoffEvent> {
    let first = session.current.is_none();
    let from_ap = session.current.unwrap_or(req.to_ap);
    let predicted = if first {
        req.to_ap
    } else {
        prediction.top().ok_or_else(|| {
            PmmsError::Domain(format!("no prediction for handoff from AP {from_ap}"))
        })?
    };
    let correct = predicted == req.to_ap;
    let load = cfg.classify_load(req.attached);

    let responding = if first {
        let mut channels: Vec<u8> = topo
            .region_aps(req.region)
            .iter()
            .map(|&ap| ap_channel(topo, ap))
            .collect();
        channels.sort_unstable();
        channels.dedup();
        channels.len() as u32
    } else {
        0
    };
    let pre_auth = first || session.pre_authenticated.contains(&req.to_ap);
    let delays = DelayBreakdown {
        scan_ms: scan_delay(first, cfg.n_channels, responding, cfg, load, rng),
        auth_ms: auth_delay(first, load, cfg),
        reassoc_ms: reassoc_delay(load, cfg.iapp_enabled, cfg),
        load_ms: load_delay(load, cfg),
        packet_ms: 1000.0 * packet_delay(cfg.proc_cap, cfg.arrival_rate(load), cfg.packet_mode)?,
        prediction_ms: prediction_penalty(correct, pre_auth, cfg, load, rng),
    };

    let mut reserved = 0;
    if let Some(ledger) = ledger {
        reserved = ledger.held_by(session.mn, req.to_ap, ReservationState::Active);
        if !first {
            ledger.release(session.mn, from_ap)?;
        }
    }

    let dropped = if req.reachable {
        packets_dropped(
            delays.total(),
            cfg.drop_threshold_ms,
            cfg.proc_rate_per_ms,
            reserved / cfg.packet_size_bytes,
        )
    } else {
        (delays.total() * cfg.proc_rate_per_ms).round() as u64
    };

    if req.reachable {
        session.current = Some(req.to_ap);
        session.pre_authenticated = topo.neighbors(req.to_ap).to_vec();
        session.cache.push((req.to_ap, req.region));
    }

    Ok(HandoffEvent {
        tick: req.tick,
        from_ap,
        to_ap: req.to_ap,
        predicted,
        prediction_correct: correct,
        delays,
        packets_dropped: dropped,
        reserved_bytes_used: reserved,
        attached: req.attached,
        load,
        first_association: first,
        failed: !req.reachable,
        emergency: req.emergency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub index: usize,
    pub current_rssi: f64,
    pub next_rssi: f64,
    pub event: ThresholdEvent,
}

/// Indicator-scale RSSI of both APs as the node walks from `from` to `to`,
/// sampled `n` times at fractions `1/n, 2/n, ..., 1` of the way.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproachTrace {
    pub samples: Vec<TraceSample>,
}

impl ApproachTrace {
    pub fn new(topo: &GridTopology, radio: &RadioConfig, from: ApId, to: ApId, n: usize) -> Self {
        let (a, b) = (topo.ap_position(from), topo.ap_position(to));
        let samples = (1..=n)
            .map(|k| {
                let p: Point = a.lerp(b, k as f64 / n as f64);
                let current_rssi = radio.rssi_indicator(p.distance(a));
                let next_rssi = radio.rssi_indicator(p.distance(b));
                TraceSample {
                    index: k,
                    current_rssi,
                    next_rssi,
                    event: classify_threshold(current_rssi, next_rssi, radio),
                }
            })
            .collect();
        ApproachTrace { samples }
    }

    fn first(&self, event: ThresholdEvent) -> Option<usize> {
        self.samples.iter().position(|s| s.event >= event)
    }

    pub fn warning_at(&self) -> Option<usize> {
        self.first(ThresholdEvent::Warning)
    }

    pub fn ready_at(&self) -> Option<usize> {
        self.first(ThresholdEvent::HandoffReady)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::reservation::{ReservationConfig, TrafficType};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn load_classes() {
        assert_eq!(classify_load(0), LoadClass::Low);
        assert_eq!(classify_load(5), LoadClass::Low);
        assert_eq!(classify_load(6), LoadClass::Medium);
        assert_eq!(classify_load(7), LoadClass::Medium);
        assert_eq!(classify_load(9), LoadClass::Medium);
        assert_eq!(classify_load(10), LoadClass::High);
        assert_eq!(classify_load(40), LoadClass::High);
    }

    #[test]
    fn scan_bounds_and_ping() {
        let cfg = DelayConfig::default();
        let mut r = rng();
        for responding in 0..=11 {
            for _ in 0..200 {
                let s = scan_delay(true, 11, responding, &cfg, LoadClass::High, &mut r);
                assert!((22.0..=66.0).contains(&s), "{s}");
            }
        }
        assert_eq!(scan_delay(false, 11, 3, &cfg, LoadClass::Low, &mut r), 3.0);
        assert_eq!(
            scan_delay(false, 11, 3, &cfg, LoadClass::Medium, &mut r),
            5.0
        );
    }

    #[test]
    fn auth_and_reassoc() {
        let cfg = DelayConfig::default();
        assert_eq!(auth_delay(true, LoadClass::Low, &cfg), 8.0);
        assert_eq!(auth_delay(true, LoadClass::High, &cfg), 13.0);
        let sub = auth_delay(false, LoadClass::Low, &cfg);
        assert!((3.0..=5.0).contains(&sub));
        assert_eq!(reassoc_delay(LoadClass::Low, false, &cfg), 4.0);
        assert_eq!(reassoc_delay(LoadClass::Low, true, &cfg), 12.0);
        for load in [LoadClass::Low, LoadClass::Medium] {
            let on = reassoc_delay(load, true, &cfg);
            assert!((10.0..=14.0).contains(&on));
            assert_eq!(
                on - reassoc_delay(load, false, &cfg),
                4.0 * cfg.oneway_time_ms
            );
        }
    }

    #[test]
    fn surcharges_are_monotone() {
        let cfg = DelayConfig::default();
        let loads = [LoadClass::Low, LoadClass::Medium, LoadClass::High];
        for w in loads.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            assert!(auth_delay(false, lo, &cfg) <= auth_delay(false, hi, &cfg));
            assert!(auth_delay(true, lo, &cfg) <= auth_delay(true, hi, &cfg));
            assert!(reassoc_delay(lo, true, &cfg) <= reassoc_delay(hi, true, &cfg));
            assert!(load_delay(lo, &cfg) <= load_delay(hi, &cfg));
            let (mut a, mut b) = (rng(), rng());
            assert!(
                scan_delay(false, 11, 0, &cfg, lo, &mut a)
                    <= scan_delay(false, 11, 0, &cfg, hi, &mut b)
            );
            assert!(
                prediction_penalty(false, true, &cfg, lo, &mut a)
                    <= prediction_penalty(false, true, &cfg, hi, &mut b)
            );
        }
    }

    #[test]
    fn queueing_delay() {
        let std = PacketDelayMode::Standard;
        let t = packet_delay(1e6, 650_000.0, std).unwrap();
        assert!((t - 1.0 / 350_000.0).abs() <= 1e-12 * t);
        assert!((t - 2.857e-6).abs() < 1e-9);
        assert_eq!(packet_delay(1e6, 0.0, std).unwrap(), 1e-6);
        let t = packet_delay(1e6, 950_000.0, std).unwrap();
        assert!((t - 2.0e-5).abs() <= 1e-12 * 2.0e-5);
        let v = packet_delay(1e6, 650_000.0, PacketDelayMode::Verbatim).unwrap();
        assert_eq!(v, 1e-6 + 1.0 / (1.0 - 0.65));
        assert!(matches!(
            packet_delay(1e6, 1e6, std),
            Err(PmmsError::UnstableQueue { .. })
        ));
    }

    #[test]
    fn penalty_composition() {
        let cfg = DelayConfig::default();
        let mut r = rng();
        assert_eq!(
            prediction_penalty(true, false, &cfg, LoadClass::High, &mut r),
            0.0
        );
        for _ in 0..100 {
            let p = prediction_penalty(false, true, &cfg, LoadClass::Low, &mut r);
            assert!((2.0..=6.0).contains(&p));
            let q = prediction_penalty(false, false, &cfg, LoadClass::Low, &mut r);
            assert!((10.0..=14.0).contains(&q));
        }
    }

    #[test]
    fn drop_model() {
        assert_eq!(packets_dropped(20.0, 20.0, 1000.0, 0), 0);
        assert_eq!(packets_dropped(12.0, 20.0, 1000.0, 0), 0);
        assert_eq!(packets_dropped(30.0, 20.0, 1000.0, 0), 10_000);
        assert_eq!(packets_dropped(30.0, 20.0, 1000.0, 10_000), 0);
        assert_eq!(packets_dropped(30.0, 20.0, 1000.0, 4_000), 6_000);
    }

    #[test]
    fn breakdown_total_is_the_sum() {
        let d = DelayBreakdown {
            scan_ms: 1.0,
            auth_ms: 2.0,
            reassoc_ms: 4.0,
            load_ms: 8.0,
            packet_ms: 16.0,
            prediction_ms: 32.0,
        };
        assert_eq!(d.total(), 63.0);
    }

    fn handoff(
        session: &mut MobileSession,
        to: u16,
        predicted: u16,
        ledger: Option<&mut ReservationLedger>,
        r: &mut ChaCha8Rng,
    ) -> HandoffEvent {
        let topo = GridTopology::default();
        let pred = RankedPrediction {
            candidates: vec![(ApId(predicted), 1.0)],
            decisive: true,
        };
        let req = HandoffRequest {
            tick: 0,
            to_ap: ApId(to),
            region: topo.home_region(ApId(to)),
            attached: 3,
            reachable: true,
            emergency: false,
        };
        execute_handoff(
            session,
            &req,
            &pred,
            ledger,
            &topo,
            &DelayConfig::default(),
            r,
        )
        .unwrap()
    }

    #[test]
    fn first_hop_scans_longest() {
        let mut r = rng();
        let mut s = MobileSession::new(1);
        let first = handoff(&mut s, 6, 6, None, &mut r);
        assert!(first.first_association);
        assert_eq!(first.from_ap, first.to_ap);
        let second = handoff(&mut s, 7, 7, None, &mut r);
        assert!(first.delays.scan_ms > second.delays.scan_ms);
        assert_eq!(second.delays.auth_ms, 3.0);
        assert_eq!(second.delays.prediction_ms, 0.0);
        assert_eq!(s.cache.len(), 2);
        assert_eq!(
            s.pre_authenticated,
            GridTopology::default().neighbors(ApId(7)).to_vec()
        );

        let wrong = handoff(&mut s, 8, 12, None, &mut r);
        assert!(!wrong.prediction_correct);
        assert!(wrong.delays.prediction_ms >= 2.0);
    }

    #[test]
    fn reservation_absorbs_drops() {
        let topo = GridTopology::default();
        let mut ledger = ReservationLedger::new(topo.ap_count(), ReservationConfig::default());
        let mut with = MobileSession::new(1);
        let mut without = MobileSession::new(1);
        let (mut r1, mut r2) = (rng(), rng());
        handoff(&mut with, 6, 6, Some(&mut ledger), &mut r1);
        handoff(&mut without, 6, 6, None, &mut r2);
        ledger.first_stage_reserve(ApId(7), 1, 0).unwrap();
        ledger
            .second_stage_reserve(ApId(7), 1, TrafficType::Audio, 1)
            .unwrap();
        ledger.confirm(1, ApId(7), true).unwrap();
        let a = handoff(&mut with, 7, 7, Some(&mut ledger), &mut r1);
        let b = handoff(&mut without, 7, 7, None, &mut r2);
        assert_eq!(a.delays, b.delays);
        assert_eq!(a.reserved_bytes_used, 9_750_000);
        assert!(a.packets_dropped <= b.packets_dropped);
        ledger.audit().unwrap();
    }

    #[test]
    fn unreachable_target_drops_everything() {
        let topo = GridTopology::default();
        let mut s = MobileSession::new(1);
        let mut r = rng();
        handoff(&mut s, 6, 6, None, &mut r);
        let req = HandoffRequest {
            tick: 1,
            to_ap: ApId(7),
            region: RegionId(8),
            attached: 1,
            reachable: false,
            emergency: false,
        };
        let pred = RankedPrediction {
            candidates: vec![(ApId(7), 1.0)],
            decisive: true,
        };
        let e = execute_handoff(
            &mut s,
            &req,
            &pred,
            None,
            &topo,
            &DelayConfig::default(),
            &mut r,
        )
        .unwrap();
        assert!(e.failed);
        assert_eq!(
            e.packets_dropped,
            (e.delays.total() * 1000.0).round() as u64
        );
        assert_eq!(s.current, Some(ApId(6)));
    }

    #[test]
    fn approach_trace_fires_in_order() {
        let topo = GridTopology::default();
        let radio = RadioConfig::default();
        for (from, to) in [(6, 7), (6, 12), (0, 1)] {
            let t = ApproachTrace::new(&topo, &radio, ApId(from), ApId(to), 10);
            let warn = t.warning_at().unwrap();
            let ready = t.ready_at().unwrap();
            assert!(warn < ready);
            assert!(t.samples.windows(2).all(|w| w[0].event <= w[1].event));
            let s = t.samples[ready];
            assert!(s.current_rssi <= 2e-3 && s.next_rssi >= 65e-3);
        }
    }

    proptest! {
        #[test]
        fn drops_monotone_in_buffer(delay in 0.0f64..200.0, buf_a in 0u64..200_000, buf_b in 0u64..200_000) {
            let (lo, hi) = (buf_a.min(buf_b), buf_a.max(buf_b));
            prop_assert!(packets_dropped(delay, 20.0, 1000.0, hi) <= packets_dropped(delay, 20.0, 1000.0, lo));
            let overflow = packets_dropped(delay, 20.0, 1000.0, 0);
            prop_assert_eq!(overflow - packets_dropped(delay, 20.0, 1000.0, lo), overflow.min(lo));
        }
    }
}
