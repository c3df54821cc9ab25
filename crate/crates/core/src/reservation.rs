//! Two-stage buffer reservation on predicted next APs.
//!
//! A prediction places a passive first-stage hold on the predicted AP with a
//! short timer. When the next AP's signal crosses the high threshold a
//! second-stage hold sized by traffic type is added. Confirmation turns both
//! into active buffer; a negative confirmation or the timer returns the bytes.
//! Passive bytes may be lent to competing flows and are taken back when the
//! owner confirms.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::topology::ApId;
use crate::Tick;

pub type NodeId = u64;
pub type ReservationId = u64;

pub const MB: u64 = 1_000_000;

/// Type-of-service tag carried by audio flows (DSCP EF).
pub const AUDIO_TOS: u8 = 0xB8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficType {
    Audio,
    Text,
}

impl TrafficType {
    pub fn as_str(self) -> &'static str {
        match self {
            TrafficType::Audio => "audio",
            TrafficType::Text => "text",
        }
    }
}

/// Unknown tags are treated as text, the smaller reservation.
pub fn classify_traffic(tos: u8) -> TrafficType {
    if tos == AUDIO_TOS {
        TrafficType::Audio
    } else {
        TrafficType::Text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReservationState {
    Passive,
    Active,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reservation {
    pub id: ReservationId,
    pub ap: ApId,
    pub mn: NodeId,
    pub stage: Stage,
    pub bytes: u64,
    pub state: ReservationState,
    /// `None` once confirmed.
    pub expires_at: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReservationError {
    #[error("AP {ap} has no free buffer")]
    Denied { ap: ApId },
    #[error("node {mn} already holds a stage {stage:?} reservation on AP {ap}")]
    Duplicate { mn: NodeId, ap: ApId, stage: Stage },
    #[error("node {mn} has no live first-stage reservation on AP {ap}")]
    ProtocolOrder { mn: NodeId, ap: ApId },
    #[error("AP {0} is not in the ledger")]
    UnknownAp(ApId),
    #[error("no passive reservation {0}")]
    UnknownReservation(ReservationId),
    #[error("reservation {id} has only {available} lendable bytes, {requested} requested")]
    Overdraw {
        id: ReservationId,
        available: u64,
        requested: u64,
    },
    #[error("AP {ap}: free {free} + active {active} + passive {passive} != total {total}")]
    Conservation {
        ap: ApId,
        free: u64,
        active: u64,
        passive: u64,
        total: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservationConfig {
    pub total_buffer: u64,
    pub stage1_fraction: f64,
    pub stage2_audio_fraction: f64,
    pub stage2_text_fraction: f64,
    /// Lifetime of an unconfirmed reservation, in ticks.
    pub timeout: Tick,
    /// Share of each AP's buffer held back for emergency handoffs.
    pub emergency_fraction: f64,
}

impl Default for ReservationConfig {
    fn default() -> Self {
        ReservationConfig {
            total_buffer: 100 * MB,
            stage1_fraction: 0.05,
            stage2_audio_fraction: 0.05,
            stage2_text_fraction: 0.02,
            timeout: 2,
            emergency_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ApBuffer {
    total: u64,
    free: u64,
    emergency: u64,
    reservations: BTreeMap<ReservationId, Reservation>,
}

/// Per-AP buffer accounting. Every mutation preserves
/// `free + active + passive = total` on every AP.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationLedger {
    cfg: ReservationConfig,
    aps: Vec<ApBuffer>,
    loans: BTreeMap<(ReservationId, NodeId), u64>,
    next_id: ReservationId,
}

/// One row of a per-tick ledger snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerRow {
    pub ap: ApId,
    pub free: u64,
    pub active_bytes: u64,
    pub passive_bytes: u64,
}

type Res<T> = std::result::Result<T, ReservationError>;

impl ReservationLedger {
    pub fn new(ap_count: usize, cfg: ReservationConfig) -> Self {
        let emergency = (cfg.total_buffer as f64 * cfg.emergency_fraction).round() as u64;
        let ap = ApBuffer {
            total: cfg.total_buffer,
            free: cfg.total_buffer,
            emergency: emergency.min(cfg.total_buffer),
            reservations: BTreeMap::new(),
        };
        ReservationLedger {
            cfg,
            aps: vec![ap; ap_count],
            loans: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn config(&self) -> &ReservationConfig {
        &self.cfg
    }

    fn buffer(&self, ap: ApId) -> Res<&ApBuffer> {
        self.aps
            .get(ap.index())
            .ok_or(ReservationError::UnknownAp(ap))
    }

    fn buffer_mut(&mut self, ap: ApId) -> Res<&mut ApBuffer> {
        self.aps
            .get_mut(ap.index())
            .ok_or(ReservationError::UnknownAp(ap))
    }

    fn find(&self, ap: ApId, mn: NodeId, stage: Stage) -> Option<&Reservation> {
        self.aps
            .get(ap.index())?
            .reservations
            .values()
            .find(|r| r.mn == mn && r.stage == stage)
    }

    fn hold(
        &mut self,
        ap: ApId,
        mn: NodeId,
        stage: Stage,
        fraction: f64,
        now: Tick,
    ) -> Res<Reservation> {
        let id = self.next_id;
        let expires_at = now + self.cfg.timeout;
        let buf = self.buffer_mut(ap)?;
        let reservable = buf.free.saturating_sub(buf.emergency);
        let bytes = ((reservable as f64 * fraction).round() as u64).min(reservable);
        if bytes == 0 {
            return Err(ReservationError::Denied { ap });
        }
        let r = Reservation {
            id,
            ap,
            mn,
            stage,
            bytes,
            state: ReservationState::Passive,
            expires_at: Some(expires_at),
        };
        buf.free -= bytes;
        buf.reservations.insert(id, r.clone());
        self.next_id += 1;
        Ok(r)
    }

    /// Passive hold of `stage1_fraction` of the free buffer.
    pub fn first_stage_reserve(&mut self, ap: ApId, mn: NodeId, now: Tick) -> Res<Reservation> {
        self.buffer(ap)?;
        if self.find(ap, mn, Stage::One).is_some() {
            return Err(ReservationError::Duplicate {
                mn,
                ap,
                stage: Stage::One,
            });
        }
        self.hold(ap, mn, Stage::One, self.cfg.stage1_fraction, now)
    }

    /// Additional passive hold sized by traffic type. Needs an unexpired
    /// first stage.
    pub fn second_stage_reserve(
        &mut self,
        ap: ApId,
        mn: NodeId,
        traffic: TrafficType,
        now: Tick,
    ) -> Res<Reservation> {
        self.buffer(ap)?;
        let live = self.find(ap, mn, Stage::One).is_some_and(|r| {
            r.state == ReservationState::Passive && r.expires_at.is_some_and(|t| t > now)
        });
        if !live {
            return Err(ReservationError::ProtocolOrder { mn, ap });
        }
        if self.find(ap, mn, Stage::Two).is_some() {
            return Err(ReservationError::Duplicate {
                mn,
                ap,
                stage: Stage::Two,
            });
        }
        let fraction = match traffic {
            TrafficType::Audio => self.cfg.stage2_audio_fraction,
            TrafficType::Text => self.cfg.stage2_text_fraction,
        };
        self.hold(ap, mn, Stage::Two, fraction, now)
    }

    /// `true` activates every passive hold of `mn` on `ap` and takes back any
    /// lent bytes, returning the preempted borrowers. `false` releases them.
    pub fn confirm(&mut self, mn: NodeId, ap: ApId, flag: bool) -> Res<Vec<NodeId>> {
        let buf = self.buffer_mut(ap)?;
        let ids: Vec<ReservationId> = buf
            .reservations
            .values()
            .filter(|r| r.mn == mn && r.state == ReservationState::Passive)
            .map(|r| r.id)
            .collect();
        for id in &ids {
            if flag {
                let r = buf.reservations.get_mut(id).expect("listed above");
                r.state = ReservationState::Active;
                r.expires_at = None;
            } else {
                let r = buf.reservations.remove(id).expect("listed above");
                buf.free += r.bytes;
            }
        }
        Ok(self.drop_loans(&ids))
    }

    fn drop_loans(&mut self, ids: &[ReservationId]) -> Vec<NodeId> {
        let mut borrowers = Vec::new();
        self.loans.retain(|&(id, borrower), _| {
            let hit = ids.contains(&id);
            if hit {
                borrowers.push(borrower);
            }
            !hit
        });
        borrowers
    }

    /// Releases every passive hold whose timer has run out. Returns how many
    /// were reclaimed.
    pub fn expire_and_preempt(&mut self, now: Tick) -> usize {
        let mut expired = Vec::new();
        for buf in &mut self.aps {
            let due: Vec<ReservationId> = buf
                .reservations
                .values()
                .filter(|r| {
                    r.state == ReservationState::Passive && r.expires_at.is_some_and(|t| t <= now)
                })
                .map(|r| r.id)
                .collect();
            for id in due {
                let r = buf.reservations.remove(&id).expect("listed above");
                buf.free += r.bytes;
                expired.push(id);
            }
        }
        self.drop_loans(&expired);
        expired.len()
    }

    /// Frees the active buffer `mn` held on `ap` once its traffic has moved
    /// on. Returns the bytes released.
    pub fn release(&mut self, mn: NodeId, ap: ApId) -> Res<u64> {
        let buf = self.buffer_mut(ap)?;
        let ids: Vec<ReservationId> = buf
            .reservations
            .values()
            .filter(|r| r.mn == mn && r.state == ReservationState::Active)
            .map(|r| r.id)
            .collect();
        let mut freed = 0;
        for id in ids {
            freed += buf.reservations.remove(&id).expect("listed above").bytes;
        }
        buf.free += freed;
        Ok(freed)
    }

    /// Lends passive bytes of reservation `id` to `borrower`. Lent bytes
    /// stay accounted as passive.
    pub fn borrow(&mut self, id: ReservationId, borrower: NodeId, bytes: u64) -> Res<()> {
        let r = self
            .aps
            .iter()
            .find_map(|b| b.reservations.get(&id))
            .filter(|r| r.state == ReservationState::Passive)
            .ok_or(ReservationError::UnknownReservation(id))?;
        let lent: u64 = self
            .loans
            .range((id, NodeId::MIN)..=(id, NodeId::MAX))
            .map(|(_, b)| b)
            .sum();
        let available = r.bytes - lent;
        if bytes == 0 || bytes > available {
            return Err(ReservationError::Overdraw {
                id,
                available,
                requested: bytes,
            });
        }
        *self.loans.entry((id, borrower)).or_insert(0) += bytes;
        Ok(())
    }

    /// Borrower gives back its loan early. Returns the bytes returned.
    pub fn return_loan(&mut self, id: ReservationId, borrower: NodeId) -> u64 {
        self.loans.remove(&(id, borrower)).unwrap_or(0)
    }

    pub fn lent_bytes(&self, id: ReservationId) -> u64 {
        self.loans
            .range((id, NodeId::MIN)..=(id, NodeId::MAX))
            .map(|(_, b)| b)
            .sum()
    }

    pub fn reservations(&self, ap: ApId) -> impl Iterator<Item = &Reservation> {
        self.aps
            .get(ap.index())
            .into_iter()
            .flat_map(|b| b.reservations.values())
    }

    /// Bytes `mn` holds on `ap` in the given state.
    pub fn held_by(&self, mn: NodeId, ap: ApId, state: ReservationState) -> u64 {
        self.reservations(ap)
            .filter(|r| r.mn == mn && r.state == state)
            .map(|r| r.bytes)
            .sum()
    }

    pub fn row(&self, ap: ApId) -> Option<LedgerRow> {
        let buf = self.aps.get(ap.index())?;
        let sum = |s: ReservationState| {
            buf.reservations
                .values()
                .filter(|r| r.state == s)
                .map(|r| r.bytes)
                .sum()
        };
        Some(LedgerRow {
            ap,
            free: buf.free,
            active_bytes: sum(ReservationState::Active),
            passive_bytes: sum(ReservationState::Passive),
        })
    }

    pub fn snapshot(&self) -> Vec<LedgerRow> {
        (0..self.aps.len())
            .filter_map(|i| self.row(ApId(i as u16)))
            .collect()
    }

    pub fn free(&self, ap: ApId) -> u64 {
        self.aps.get(ap.index()).map_or(0, |b| b.free)
    }

    pub fn total(&self, ap: ApId) -> u64 {
        self.aps.get(ap.index()).map_or(0, |b| b.total)
    }

    /// Checks the conservation identity on every AP.
    pub fn audit(&self) -> Res<()> {
        for (i, buf) in self.aps.iter().enumerate() {
            let row = self.row(ApId(i as u16)).expect("index in range");
            if row.free + row.active_bytes + row.passive_bytes != buf.total {
                return Err(ReservationError::Conservation {
                    ap: row.ap,
                    free: row.free,
                    active: row.active_bytes,
                    passive: row.passive_bytes,
                    total: buf.total,
                });
            }
        }
        Ok(())
    }
}
