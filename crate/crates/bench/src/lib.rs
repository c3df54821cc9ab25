//! Shared fixtures for the pipeline benchmarks.

use pmms_core::experiments::{SimConfig, Trained};
use pmms_core::mobility::{generate_history, MobilityConfig, PathHistory};
use pmms_core::reservation::{ReservationConfig, ReservationLedger, TrafficType};
use pmms_core::{ApId, GridTopology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A trained default-config pipeline.
pub struct Fixture {
    pub cfg: SimConfig,
    pub topo: GridTopology,
    pub trained: Trained,
}

impl Fixture {
    pub fn new(n_history: usize, seed: u64) -> Fixture {
        let cfg = SimConfig {
            seed,
            n_history,
            ..SimConfig::default()
        };
        let topo = cfg.topology().expect("default grid is valid");
        let trained = Trained::build(&cfg, &topo).expect("default config trains");
        Fixture { cfg, topo, trained }
    }
}

pub fn history(n: usize, seed: u64) -> (GridTopology, PathHistory) {
    let topo = GridTopology::build_grid(5, 5, 100.0).expect("default grid is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = generate_history(n, &topo, &MobilityConfig::history(), &mut rng).expect("n > 0");
    (topo, h)
}

#[derive(Debug, Clone, Copy)]
pub enum LedgerOp {
    Reserve {
        ap: ApId,
        mn: u64,
    },
    SecondStage {
        ap: ApId,
        mn: u64,
        traffic: TrafficType,
    },
    Confirm {
        ap: ApId,
        mn: u64,
        flag: bool,
    },
    Tick,
    Release {
        ap: ApId,
        mn: u64,
    },
}

/// A reproducible mixed sequence of ledger operations.
pub fn ledger_ops(n: usize, seed: u64) -> Vec<LedgerOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let ap = ApId(rng.random_range(0..25));
            let mn = rng.random_range(0..16);
            match rng.random_range(0..5) {
                0 => LedgerOp::Reserve { ap, mn },
                1 => LedgerOp::SecondStage {
                    ap,
                    mn,
                    traffic: if rng.random_bool(0.5) {
                        TrafficType::Audio
                    } else {
                        TrafficType::Text
                    },
                },
                2 => LedgerOp::Confirm {
                    ap,
                    mn,
                    flag: rng.random_bool(0.7),
                },
                3 => LedgerOp::Tick,
                _ => LedgerOp::Release { ap, mn },
            }
        })
        .collect()
}

/// Replays `ops` on a fresh default ledger and returns it.
pub fn replay(ops: &[LedgerOp]) -> ReservationLedger {
    let mut ledger = ReservationLedger::new(25, ReservationConfig::default());
    let mut now = 0;
    for op in ops {
        // Rejected operations are part of the workload.
        let _ = match *op {
            LedgerOp::Reserve { ap, mn } => ledger.first_stage_reserve(ap, mn, now).map(drop),
            LedgerOp::SecondStage { ap, mn, traffic } => {
                ledger.second_stage_reserve(ap, mn, traffic, now).map(drop)
            }
            LedgerOp::Confirm { ap, mn, flag } => ledger.confirm(mn, ap, flag).map(drop),
            LedgerOp::Tick => {
                now += 1;
                ledger.expire_and_preempt(now);
                Ok(())
            }
            LedgerOp::Release { ap, mn } => ledger.release(mn, ap).map(drop),
        };
    }
    ledger
}
