//! Flat `key = value` simulation config.
//!
//! Simulation variables keep their customary names (`minChannelTime`,
//! `arrivalrate_avg`, `RSSI_handoff`, ...) and accept values with units,
//! e.g. `buffer_size = 100 MB`, `RSSI_threshold = 3 mW to 4 mW`,
//! `bandwidth = 2*1e6 Hz`. `#` starts a comment. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{PmmsError, Result};
use crate::handoff::{DelayConfig, PacketDelayMode};
use crate::mobility::MobilityConfig;
use crate::prediction::{LtConfig, MiningConfig};
use crate::radio::RadioConfig;
use crate::reservation::{ReservationConfig, MB};
use crate::topology::GridTopology;

/// How location-tracking samples are taken in the accuracy harness.
#[derive(Debug, Clone, PartialEq)]
pub struct LtSampling {
    /// Fraction of the way from the current AP to the next one at which
    /// the node is sampled.
    pub progress: f64,
    /// Standard deviation of the sideways offset into the region, as a
    /// fraction of AP spacing.
    pub lateral_sd: f64,
    /// Multiplicative noise on sampled RSSI.
    pub noise: f64,
    /// Probability that the LT-only predictor's decisive answer is
    /// deliberately replaced by a wrong one.
    pub injected_error_rate: f64,
}

impl Default for LtSampling {
    fn default() -> Self {
        LtSampling {
            progress: 0.6,
            lateral_sd: 0.15,
            noise: 0.4,
            injected_error_rate: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Seed of the test-path stream; derived from `seed` when unset.
    pub test_seed: Option<u64>,
    pub n_history: usize,
    pub n_test: usize,
    pub n_delay_paths: usize,
    pub n_drop_paths: usize,
    pub ap_rows: usize,
    pub ap_cols: usize,
    pub ap_spacing: f64,
    pub bandwidth_hz: f64,
    pub radio: RadioConfig,
    pub history_mobility: MobilityConfig,
    pub test_mobility: MobilityConfig,
    pub mining: MiningConfig,
    pub lt: LtConfig,
    pub lt_sampling: LtSampling,
    pub delay: DelayConfig,
    pub reservation: ReservationConfig,
    pub audio_file_size: u64,
    pub text_file_size: u64,
    /// Share of paths carrying an audio flow.
    pub audio_share: f64,
    /// Inclusive range of nodes attached to the target AP at handoff.
    pub attached_nodes: (u32, u32),
    /// RSSI samples taken while approaching the next AP.
    pub trace_samples: usize,
    /// Transitions exported to the RSSI trace report.
    pub trace_export: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            test_seed: None,
            n_history: 10_000,
            n_test: 1_000,
            n_delay_paths: 100,
            n_drop_paths: 100,
            ap_rows: 5,
            ap_cols: 5,
            ap_spacing: 100.0,
            bandwidth_hz: 2e6,
            radio: RadioConfig::default(),
            history_mobility: MobilityConfig::history(),
            test_mobility: MobilityConfig::test_set(),
            mining: MiningConfig::default(),
            lt: LtConfig::default(),
            lt_sampling: LtSampling::default(),
            delay: DelayConfig::default(),
            reservation: ReservationConfig::default(),
            audio_file_size: 20 * MB,
            text_file_size: 5 * MB,
            audio_share: 0.5,
            attached_nodes: (1, 10),
            trace_samples: 10,
            trace_export: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Bytes,
    Millis,
    Watts,
    Hertz,
    Meters,
    Packets,
    PacketsPerSec,
    PacketsPerMs,
    Nodes,
    Ticks,
    Plain,
}

fn unit_scale(dim: Dim, unit: &str) -> Option<f64> {
    let s = match (dim, unit) {
        (_, "") => 1.0,
        (Dim::Plain, "%") => 0.01,
        (Dim::Bytes, "B" | "bytes") => 1.0,
        (Dim::Bytes, "KB") => 1e3,
        (Dim::Bytes, "MB") => 1e6,
        (Dim::Bytes, "GB") => 1e9,
        (Dim::Millis, "msec" | "ms") => 1.0,
        (Dim::Millis, "sec" | "s") => 1e3,
        (Dim::Millis, "usec" | "us") => 1e-3,
        (Dim::Watts, "W") => 1.0,
        (Dim::Watts, "mW") => 1e-3,
        (Dim::Watts, "uW") => 1e-6,
        (Dim::Hertz, "Hz") => 1.0,
        (Dim::Hertz, "kHz") => 1e3,
        (Dim::Hertz, "MHz") => 1e6,
        (Dim::Hertz, "GHz") => 1e9,
        (Dim::Meters, "m") => 1.0,
        (Dim::Meters, "km") => 1e3,
        (Dim::Packets, "packets") => 1.0,
        (Dim::PacketsPerSec, "packets/sec" | "packets/s") => 1.0,
        (Dim::PacketsPerSec, "packets/msec" | "packets/ms") => 1e3,
        (Dim::PacketsPerMs, "packets/msec" | "packets/ms") => 1.0,
        (Dim::PacketsPerMs, "packets/sec" | "packets/s") => 1e-3,
        (Dim::Nodes, "node" | "nodes") => 1.0,
        (Dim::Ticks, "tick" | "ticks") => 1.0,
        _ => return None,
    };
    Some(s)
}

/// Parses `<number>[*<number>...] [unit]`.
fn quantity(text: &str, dim: Dim) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || c == '%')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let mut value = 1.0;
    for factor in num.split('*') {
        value *= factor
            .parse::<f64>()
            .map_err(|_| format!("bad number {factor:?} in {text:?}"))?;
    }
    let unit = unit.trim();
    let scale =
        unit_scale(dim, unit).ok_or_else(|| format!("unit {unit:?} does not fit {dim:?}"))?;
    let v = value * scale;
    if !v.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(v)
}

/// `a to b [unit]`; a unit written on only the upper end applies to both.
fn range(text: &str, dim: Dim) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = text
        .split_once(" to ")
        .ok_or_else(|| format!("expected `low to high`, got {text:?}"))?;
    let hi_v = quantity(hi, dim)?;
    let lo_v = match quantity(lo, dim) {
        Ok(v) if lo.trim().contains(char::is_whitespace) => v,
        _ => {
            let unit = hi
                .trim()
                .split_once(char::is_whitespace)
                .map_or("", |(_, u)| u);
            quantity(&format!("{} {unit}", lo.trim()), dim)?
        }
    };
    if lo_v > hi_v {
        return Err(format!("range {text:?} is reversed"));
    }
    Ok((lo_v, hi_v))
}

fn integer(v: f64) -> std::result::Result<u64, String> {
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("{v} is not a non-negative integer"));
    }
    Ok(v as u64)
}

fn boolean(text: &str) -> std::result::Result<bool, String> {
    match text.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected true/false, got {other:?}")),
    }
}

impl SimConfig {
    pub fn topology(&self) -> Result<GridTopology> {
        GridTopology::build_grid(self.ap_rows, self.ap_cols, self.ap_spacing)
    }

    /// Stream seed for test paths. Warns when it coincides with the
    /// history seed.
    pub fn effective_test_seed(&self) -> u64 {
        let s = self
            .test_seed
            .unwrap_or_else(|| self.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
        if s == self.seed {
            log::warn!("test seed equals history seed {s}; test paths will repeat history paths");
        }
        s
    }

    /// Sets one key. Values are interpreted in the key's units.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_inner(key, value.trim())
            .map_err(|msg| PmmsError::config(format!("{key}: {msg}")))
    }

    fn set_inner(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let q = |dim| quantity(v, dim);
        let int = |dim| quantity(v, dim).and_then(integer);
        match key {
            "buffer_size" => self.reservation.total_buffer = int(Dim::Bytes)?,
            "audio_file_size" => self.audio_file_size = int(Dim::Bytes)?,
            "text_file_size" => self.text_file_size = int(Dim::Bytes)?,
            "minChannelTime" => self.delay.min_channel_time_ms = q(Dim::Millis)?,
            "maxChannelTime" => self.delay.max_channel_time_ms = q(Dim::Millis)?,
            "pingTime" => self.delay.ping_time_ms = q(Dim::Millis)?,
            "onewayTime" => self.delay.oneway_time_ms = q(Dim::Millis)?,
            "RSSI_max" => self.radio.rssi_max = q(Dim::Watts)?,
            "RSSI_threshold" => self.radio.rssi_warning_band = range(v, Dim::Watts)?,
            "RSSI_handoff" => self.radio.rssi_handoff_band = range(v, Dim::Watts)?,
            "RSSI_next_high" => self.radio.next_ap_high_threshold = q(Dim::Watts)?,
            "antenna_height" => self.radio.antenna_height = q(Dim::Meters)?,
            "wireless_frequency" => self.radio.frequency = q(Dim::Hertz)?,
            "bandwidth" => self.bandwidth_hz = q(Dim::Hertz)?,
            "receivepower_threshold" => {
                self.radio.receive_threshold = q(Dim::Watts)?;
                self.lt.floor = self.radio.receive_threshold;
            }
            "trans_power" => self.radio.trans_power = q(Dim::Watts)?,
            "proc_cap" => self.delay.proc_cap = q(Dim::Packets)?,
            "arrivalrate_max" => self.delay.arrival_rate_max = q(Dim::PacketsPerSec)?,
            "arrivalrate_avg" => self.delay.arrival_rate_avg = q(Dim::PacketsPerSec)?,
            "arrivalrate_min" => self.delay.arrival_rate_min = q(Dim::PacketsPerSec)?,
            "loadMin" => {
                let (_, hi) = range(v, Dim::Nodes)?;
                self.delay.load_low_max = integer(hi)? as u32;
            }
            "loadAvg" => {
                let (lo, hi) = range(v, Dim::Nodes)?;
                let (lo, hi) = (integer(lo)? as u32, integer(hi)? as u32);
                self.delay.load_low_max = lo.checked_sub(1).ok_or("lower bound must be >= 1")?;
                self.delay.load_high_min = hi + 1;
            }
            "loadMax" => self.delay.load_high_min = int(Dim::Nodes)? as u32,

            "seed" => self.seed = int(Dim::Plain)?,
            "test_seed" => self.test_seed = Some(int(Dim::Plain)?),
            "n_history" => self.n_history = int(Dim::Plain)? as usize,
            "n_test" => self.n_test = int(Dim::Plain)? as usize,
            "n_delay_paths" => self.n_delay_paths = int(Dim::Plain)? as usize,
            "n_drop_paths" => self.n_drop_paths = int(Dim::Plain)? as usize,
            "ap_rows" => self.ap_rows = int(Dim::Plain)? as usize,
            "ap_cols" => self.ap_cols = int(Dim::Plain)? as usize,
            "ap_spacing" => self.ap_spacing = q(Dim::Meters)?,
            "gain_t" => self.radio.gain_t = q(Dim::Plain)?,
            "gain_r" => self.radio.gain_r = q(Dim::Plain)?,
            "system_loss" => self.radio.loss = q(Dim::Plain)?,
            "rssi_noise" => self.radio.noise_stddev_fraction = q(Dim::Plain)?,
            "indicator_reference" => self.radio.indicator_reference_m = q(Dim::Meters)?,

            "history_path_aps" => {
                let (lo, hi) = range(v, Dim::Plain)?;
                self.history_mobility.min_aps = integer(lo)? as usize;
                self.history_mobility.max_aps = integer(hi)? as usize;
            }
            "test_path_aps" => {
                let (lo, hi) = range(v, Dim::Plain)?;
                self.test_mobility.min_aps = integer(lo)? as usize;
                self.test_mobility.max_aps = integer(hi)? as usize;
            }
            "dwell" => {
                let (lo, hi) = range(v, Dim::Ticks)?;
                for m in [&mut self.history_mobility, &mut self.test_mobility] {
                    m.dwell_min = integer(lo)? as u32;
                    m.dwell_max = integer(hi)? as u32;
                }
            }
            "waypoint_pull" => {
                let p = q(Dim::Plain)?;
                self.history_mobility.waypoint_pull = p;
                self.test_mobility.waypoint_pull = p;
            }
            "center_bias" => {
                let p = q(Dim::Plain)?;
                self.history_mobility.center_bias = p;
                self.test_mobility.center_bias = p;
            }

            "max_head_len" => self.mining.max_head_len = int(Dim::Plain)? as usize,
            "min_support" => self.mining.min_support = int(Dim::Plain)?,
            "min_confidence" => self.mining.min_confidence = q(Dim::Plain)?,
            "lt_margin" => self.lt.margin = q(Dim::Plain)?,
            "lt_progress" => self.lt_sampling.progress = q(Dim::Plain)?,
            "lt_lateral_sd" => self.lt_sampling.lateral_sd = q(Dim::Plain)?,
            "lt_noise" => self.lt_sampling.noise = q(Dim::Plain)?,
            "lt_error_rate" => self.lt_sampling.injected_error_rate = q(Dim::Plain)?,

            "n_channels" => self.delay.n_channels = int(Dim::Plain)? as u32,
            "iapp" => self.delay.iapp_enabled = boolean(v)?,
            "load_surcharge_low" => self.delay.surcharge_ms[0] = q(Dim::Millis)?,
            "load_surcharge_medium" => self.delay.surcharge_ms[1] = q(Dim::Millis)?,
            "load_surcharge_high" => self.delay.surcharge_ms[2] = q(Dim::Millis)?,
            "packet_delay_mode" => {
                self.delay.packet_mode = match v {
                    "standard" => PacketDelayMode::Standard,
                    "verbatim" => PacketDelayMode::Verbatim,
                    other => return Err(format!("expected standard or verbatim, got {other:?}")),
                }
            }
            "drop_threshold" => self.delay.drop_threshold_ms = q(Dim::Millis)?,
            "drop_rate" => self.delay.proc_rate_per_ms = q(Dim::PacketsPerMs)?,
            "packet_size" => self.delay.packet_size_bytes = int(Dim::Bytes)?,
            "attached_nodes" => {
                let (lo, hi) = range(v, Dim::Nodes)?;
                self.attached_nodes = (integer(lo)? as u32, integer(hi)? as u32);
            }

            "stage1_fraction" => self.reservation.stage1_fraction = q(Dim::Plain)?,
            "stage2_audio_fraction" => self.reservation.stage2_audio_fraction = q(Dim::Plain)?,
            "stage2_text_fraction" => self.reservation.stage2_text_fraction = q(Dim::Plain)?,
            "reservation_timeout" => self.reservation.timeout = int(Dim::Ticks)?,
            "emergency_fraction" => self.reservation.emergency_fraction = q(Dim::Plain)?,
            "audio_share" => self.audio_share = q(Dim::Plain)?,
            "trace_samples" => self.trace_samples = int(Dim::Plain)? as usize,
            "trace_export" => self.trace_export = int(Dim::Plain)? as usize,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PmmsError::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| PmmsError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PmmsError::io(path, e))?;
        SimConfig::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology()?;
        self.radio.validate()?;
        self.history_mobility.validate()?;
        self.test_mobility.validate()?;
        self.delay.validate()?;
        if self.n_history < 1 || self.n_test < 1 {
            return Err(PmmsError::config("n_history and n_test must be at least 1"));
        }
        if self.mining.min_support < 1 || self.mining.max_head_len < 1 {
            return Err(PmmsError::config(
                "min_support and max_head_len must be at least 1",
            ));
        }
        let fractions = [
            ("min_confidence", self.mining.min_confidence),
            ("lt_margin", self.lt.margin),
            ("lt_progress", self.lt_sampling.progress),
            ("lt_error_rate", self.lt_sampling.injected_error_rate),
            ("stage1_fraction", self.reservation.stage1_fraction),
            (
                "stage2_audio_fraction",
                self.reservation.stage2_audio_fraction,
            ),
            (
                "stage2_text_fraction",
                self.reservation.stage2_text_fraction,
            ),
            ("emergency_fraction", self.reservation.emergency_fraction),
            ("audio_share", self.audio_share),
        ];
        for (name, f) in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(PmmsError::config(format!(
                    "{name} must be in [0, 1], got {f}"
                )));
            }
        }
        if self.lt_sampling.lateral_sd < 0.0 || self.lt_sampling.noise < 0.0 {
            return Err(PmmsError::config(
                "LT sampling spreads must be non-negative",
            ));
        }
        if self.attached_nodes.0 > self.attached_nodes.1 {
            return Err(PmmsError::config("attached_nodes range is reversed"));
        }
        if self.trace_samples < 2 {
            return Err(PmmsError::config("trace_samples must be at least 2"));
        }
        Ok(())
    }

    /// The full config as `key = value` text that [`SimConfig::from_text`]
    /// reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let r = &self.radio;
        let d = &self.delay;
        let res = &self.reservation;
        kv("buffer_size", format!("{} B", res.total_buffer));
        kv("audio_file_size", format!("{} B", self.audio_file_size));
        kv("text_file_size", format!("{} B", self.text_file_size));
        kv(
            "minChannelTime",
            format!("{:?} msec", d.min_channel_time_ms),
        );
        kv(
            "maxChannelTime",
            format!("{:?} msec", d.max_channel_time_ms),
        );
        kv("pingTime", format!("{:?} msec", d.ping_time_ms));
        kv("onewayTime", format!("{:?} msec", d.oneway_time_ms));
        kv("RSSI_max", format!("{:?} W", r.rssi_max));
        kv(
            "RSSI_threshold",
            format!(
                "{:?} W to {:?} W",
                r.rssi_warning_band.0, r.rssi_warning_band.1
            ),
        );
        kv(
            "RSSI_handoff",
            format!(
                "{:?} W to {:?} W",
                r.rssi_handoff_band.0, r.rssi_handoff_band.1
            ),
        );
        kv(
            "RSSI_next_high",
            format!("{:?} W", r.next_ap_high_threshold),
        );
        kv("antenna_height", format!("{:?} m", r.antenna_height));
        kv("wireless_frequency", format!("{:?} Hz", r.frequency));
        kv("bandwidth", format!("{:?} Hz", self.bandwidth_hz));
        kv(
            "receivepower_threshold",
            format!("{:?} W", r.receive_threshold),
        );
        kv("trans_power", format!("{:?} W", r.trans_power));
        kv("proc_cap", format!("{:?} packets", d.proc_cap));
        kv(
            "arrivalrate_max",
            format!("{:?} packets/sec", d.arrival_rate_max),
        );
        kv(
            "arrivalrate_avg",
            format!("{:?} packets/sec", d.arrival_rate_avg),
        );
        kv(
            "arrivalrate_min",
            format!("{:?} packets/sec", d.arrival_rate_min),
        );
        kv("loadMin", format!("1 to {} nodes", d.load_low_max));
        kv("loadMax", format!("{} nodes", d.load_high_min));
        kv("seed", self.seed.to_string());
        if let Some(t) = self.test_seed {
            kv("test_seed", t.to_string());
        }
        kv("n_history", self.n_history.to_string());
        kv("n_test", self.n_test.to_string());
        kv("n_delay_paths", self.n_delay_paths.to_string());
        kv("n_drop_paths", self.n_drop_paths.to_string());
        kv("ap_rows", self.ap_rows.to_string());
        kv("ap_cols", self.ap_cols.to_string());
        kv("ap_spacing", format!("{:?} m", self.ap_spacing));
        kv("gain_t", format!("{:?}", r.gain_t));
        kv("gain_r", format!("{:?}", r.gain_r));
        kv("system_loss", format!("{:?}", r.loss));
        kv("rssi_noise", format!("{:?}", r.noise_stddev_fraction));
        kv(
            "indicator_reference",
            format!("{:?} m", r.indicator_reference_m),
        );
        let (h, t) = (&self.history_mobility, &self.test_mobility);
        kv(
            "history_path_aps",
            format!("{} to {}", h.min_aps, h.max_aps),
        );
        kv("test_path_aps", format!("{} to {}", t.min_aps, t.max_aps));
        kv("dwell", format!("{} to {} ticks", h.dwell_min, h.dwell_max));
        kv("waypoint_pull", format!("{:?}", h.waypoint_pull));
        kv("center_bias", format!("{:?}", h.center_bias));
        kv("max_head_len", self.mining.max_head_len.to_string());
        kv("min_support", self.mining.min_support.to_string());
        kv(
            "min_confidence",
            format!("{:?}", self.mining.min_confidence),
        );
        kv("lt_margin", format!("{:?}", self.lt.margin));
        let lt = &self.lt_sampling;
        kv("lt_progress", format!("{:?}", lt.progress));
        kv("lt_lateral_sd", format!("{:?}", lt.lateral_sd));
        kv("lt_noise", format!("{:?}", lt.noise));
        kv("lt_error_rate", format!("{:?}", lt.injected_error_rate));
        kv("n_channels", d.n_channels.to_string());
        kv("iapp", d.iapp_enabled.to_string());
        kv(
            "load_surcharge_low",
            format!("{:?} msec", d.surcharge_ms[0]),
        );
        kv(
            "load_surcharge_medium",
            format!("{:?} msec", d.surcharge_ms[1]),
        );
        kv(
            "load_surcharge_high",
            format!("{:?} msec", d.surcharge_ms[2]),
        );
        kv(
            "packet_delay_mode",
            match d.packet_mode {
                PacketDelayMode::Standard => "standard".into(),
                PacketDelayMode::Verbatim => "verbatim".into(),
            },
        );
        kv("drop_threshold", format!("{:?} msec", d.drop_threshold_ms));
        kv(
            "drop_rate",
            format!("{:?} packets/msec", d.proc_rate_per_ms),
        );
        kv("packet_size", format!("{} B", d.packet_size_bytes));
        kv(
            "attached_nodes",
            format!(
                "{} to {} nodes",
                self.attached_nodes.0, self.attached_nodes.1
            ),
        );
        kv("stage1_fraction", format!("{:?}", res.stage1_fraction));
        kv(
            "stage2_audio_fraction",
            format!("{:?}", res.stage2_audio_fraction),
        );
        kv(
            "stage2_text_fraction",
            format!("{:?}", res.stage2_text_fraction),
        );
        kv("reservation_timeout", format!("{} ticks", res.timeout));
        kv(
            "emergency_fraction",
            format!("{:?}", res.emergency_fraction),
        );
        kv("audio_share", format!("{:?}", self.audio_share));
        kv("trace_samples", self.trace_samples.to_string());
        kv("trace_export", self.trace_export.to_string());
        s
    }
}
