//! CSV emission and parse-back.
//!
//! Column order is fixed and floats are printed with a fixed number of
//! decimals, so the same report always serializes to the same bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::accuracy::{run_accuracy_with, AccuracyReport, Predictor};
use super::config::SimConfig;
use super::delay::{drops_from, load_mix, load_name, simulate, DelayReport, DropReport};
use super::Trained;
use crate::error::{PmmsError, Result};
use crate::mobility::save_history;
use crate::radio::ThresholdEvent;

pub const HISTORY_FILE: &str = "history.txt";
pub const RULES_FILE: &str = "rules.csv";
pub const TM_FILE: &str = "transition_matrix.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const RANKS_FILE: &str = "accuracy_ranks.csv";
pub const EVENTS_FILE: &str = "delay_events.csv";
pub const DELAY_SUMMARY_FILE: &str = "delay_summary.csv";
pub const DELAY_PATHS_FILE: &str = "delay_paths.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const TRACE_FILE: &str = "rssi_trace.csv";
pub const DROPS_FILE: &str = "drops.csv";
pub const CONFIG_FILE: &str = "config.conf";

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_accuracy<W: Write>(r: &AccuracyReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "scope",
        "path_id",
        "predictor",
        "transitions",
        "correct",
        "accuracy_pct",
    ])?;
    for p in &r.paths {
        for pred in Predictor::ALL {
            w.write_record([
                "path".to_string(),
                p.path_id.to_string(),
                pred.name().to_string(),
                p.transitions.to_string(),
                p.correct.get(&pred).copied().unwrap_or(0).to_string(),
                p.accuracy_pct(pred).map(f6).unwrap_or_default(),
            ])?;
        }
    }
    if !r.paths.is_empty() {
        let n = r.transitions();
        for pred in Predictor::ALL {
            let hits: usize = r
                .paths
                .iter()
                .map(|p| p.correct.get(&pred).copied().unwrap_or(0))
                .sum();
            w.write_record([
                "overall",
                "",
                pred.name(),
                &n.to_string(),
                &hits.to_string(),
                &f6(r.overall_pct(pred)),
            ])?;
        }
        for pred in Predictor::ALL {
            w.write_record([
                "path_mean",
                "",
                pred.name(),
                &n.to_string(),
                "",
                &f6(r.path_mean_pct(pred)),
            ])?;
        }
        w.write_record([
            "expected",
            "",
            "ip",
            &n.to_string(),
            "",
            &f6(r.ip_expected_pct),
        ])?;
        w.write_record([
            "dm_coverage",
            "",
            "dm_only",
            &n.to_string(),
            "",
            &f6(r.dm_coverage_pct),
        ])?;
        w.write_record([
            "lt_decisive",
            "",
            "lt_only",
            &n.to_string(),
            "",
            &f6(r.lt_decisive_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary rows of an accuracy CSV, keyed by `(scope, predictor)`.
pub fn parse_accuracy_summary<R: Read>(source: R) -> csv::Result<BTreeMap<(String, String), f64>> {
    let mut out = BTreeMap::new();
    for rec in csv::Reader::from_reader(source).records() {
        let rec = rec?;
        if &rec[0] == "path" {
            continue;
        }
        let v: f64 = rec[5].parse().map_err(|e| {
            csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        out.insert((rec[0].to_string(), rec[2].to_string()), v);
    }
    Ok(out)
}

pub fn write_ranks<W: Write>(r: &AccuracyReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["predictor", "rank", "count"])?;
    for pred in Predictor::ALL {
        for (rank, count) in r.ranks.get(&pred).into_iter().flatten() {
            let rank = rank.map_or_else(|| "none".to_string(), |k| k.to_string());
            w.write_record([pred.name().to_string(), rank, count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(r: &DelayReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "tick",
        "from_ap",
        "to_ap",
        "predicted",
        "correct",
        "scan_ms",
        "auth_ms",
        "reassoc_ms",
        "load_ms",
        "packet_ms",
        "prediction_ms",
        "total_ms",
        "dropped",
        "reserved_bytes",
    ])?;
    for pe in &r.events {
        let e = &pe.event;
        let d = &e.delays;
        w.write_record([
            e.tick.to_string(),
            e.from_ap.to_string(),
            e.to_ap.to_string(),
            e.predicted.to_string(),
            e.prediction_correct.to_string(),
            f6(d.scan_ms),
            f6(d.auth_ms),
            f6(d.reassoc_ms),
            f6(d.load_ms),
            f6(d.packet_ms),
            f6(d.prediction_ms),
            f6(d.total()),
            e.packets_dropped.to_string(),
            e.reserved_bytes_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,value` rows.
pub fn delay_summary(r: &DelayReport) -> Vec<(&'static str, f64)> {
    let m = r.means();
    let mix = load_mix(r);
    let handoffs: Vec<_> = r
        .events
        .iter()
        .filter(|e| !e.event.first_association)
        .collect();
    let correct = handoffs
        .iter()
        .filter(|e| e.event.prediction_correct)
        .count();
    let pct = if handoffs.is_empty() {
        0.0
    } else {
        100.0 * correct as f64 / handoffs.len() as f64
    };
    vec![
        ("paths", r.traffic.len() as f64),
        ("events", r.events.len() as f64),
        ("scan_ms", m.scan_ms),
        ("auth_ms", m.auth_ms),
        ("reassoc_ms", m.reassoc_ms),
        ("load_ms", m.load_ms),
        ("packet_ms", m.packet_ms),
        ("prediction_ms", m.prediction_ms),
        ("total_ms", m.total_ms),
        ("max_total_ms", r.max_total_ms()),
        ("prediction_accuracy_pct", pct),
        ("load_low", mix[0] as f64),
        ("load_medium", mix[1] as f64),
        ("load_high", mix[2] as f64),
        (
            "emergency_handoffs",
            r.events.iter().filter(|e| e.event.emergency).count() as f64,
        ),
        (
            "dropped_packets",
            r.events
                .iter()
                .map(|e| e.event.packets_dropped)
                .sum::<u64>() as f64,
        ),
    ]
}

pub fn write_delay_summary<W: Write>(r: &DelayReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["metric", "value"])?;
    for (k, v) in delay_summary(r) {
        w.write_record([k, &f6(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_delay_summary<R: Read>(source: R) -> csv::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for rec in csv::Reader::from_reader(source).records() {
        let rec = rec?;
        let v: f64 = rec[1].parse().map_err(|e| {
            csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        out.insert(rec[0].to_string(), v);
    }
    Ok(out)
}

pub fn write_delay_paths<W: Write>(r: &DelayReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "path_id",
        "traffic",
        "events",
        "scan_ms",
        "auth_ms",
        "reassoc_ms",
        "load_ms",
        "packet_ms",
        "prediction_ms",
        "total_ms",
        "load_low",
        "load_medium",
        "load_high",
        "dropped",
    ])?;
    for p in r.per_path() {
        let m = &p.means;
        w.write_record([
            p.path_id.to_string(),
            p.traffic.as_str().to_string(),
            p.events.to_string(),
            f6(m.scan_ms),
            f6(m.auth_ms),
            f6(m.reassoc_ms),
            f6(m.load_ms),
            f6(m.packet_ms),
            f6(m.prediction_ms),
            f6(m.total_ms),
            p.loads[0].to_string(),
            p.loads[1].to_string(),
            p.loads[2].to_string(),
            p.dropped_packets.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ledger<W: Write>(r: &DelayReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["tick", "ap", "free", "active_bytes", "passive_bytes"])?;
    for (tick, row) in &r.ledger {
        w.write_record([
            tick.to_string(),
            row.ap.to_string(),
            row.free.to_string(),
            row.active_bytes.to_string(),
            row.passive_bytes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn event_name(e: ThresholdEvent) -> &'static str {
    match e {
        ThresholdEvent::None => "none",
        ThresholdEvent::Warning => "warning",
        ThresholdEvent::HandoffReady => "handoff_ready",
    }
}

pub fn write_trace<W: Write>(r: &DelayReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "transition",
        "from_ap",
        "to_ap",
        "sample",
        "current_rssi_w",
        "next_rssi_w",
        "event",
    ])?;
    for t in &r.traces {
        w.write_record([
            t.transition.to_string(),
            t.from_ap.to_string(),
            t.to_ap.to_string(),
            t.sample.index.to_string(),
            format!("{:.6e}", t.sample.current_rssi),
            format!("{:.6e}", t.sample.next_rssi),
            event_name(t.sample.event).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_drops<W: Write>(r: &DropReport, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "path_id",
        "handoffs",
        "dropped_packets_with",
        "dropped_bits_with",
        "dropped_packets_without",
        "dropped_bits_without",
    ])?;
    for p in &r.paths {
        w.write_record([
            p.path_id.to_string(),
            p.handoffs.to_string(),
            p.with_reservation.to_string(),
            r.bits(p.with_reservation).to_string(),
            p.without_reservation.to_string(),
            r.bits(p.without_reservation).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one file in `dir` through a buffered sink.
fn emit<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| PmmsError::io(&path, e))?;
    let mut sink = BufWriter::new(file);
    f(&mut sink).map_err(|source| PmmsError::Csv {
        path: path.clone(),
        source,
    })?;
    sink.flush().map_err(|e| PmmsError::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| PmmsError::io(dir, e))
}

pub fn emit_config(cfg: &SimConfig, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    emit(dir, CONFIG_FILE, |w| {
        Ok(w.write_all(cfg.to_text().as_bytes())?)
    })
}

pub fn emit_history(trained: &Trained, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    emit(dir, HISTORY_FILE, |w| {
        Ok(save_history(&trained.history, w)?)
    })
}

pub fn emit_training(trained: &Trained, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        emit_history(trained, dir)?,
        emit(dir, RULES_FILE, |w| trained.rules.write_csv(w))?,
        emit(dir, TM_FILE, |w| trained.tm.write_csv(w))?,
    ])
}

pub fn emit_accuracy(r: &AccuracyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![
        emit(dir, ACCURACY_FILE, |w| write_accuracy(r, w))?,
        emit(dir, RANKS_FILE, |w| write_ranks(r, w))?,
    ])
}

pub fn emit_delay(r: &DelayReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![
        emit(dir, EVENTS_FILE, |w| write_events(r, w))?,
        emit(dir, DELAY_SUMMARY_FILE, |w| write_delay_summary(r, w))?,
        emit(dir, DELAY_PATHS_FILE, |w| write_delay_paths(r, w))?,
        emit(dir, LEDGER_FILE, |w| write_ledger(r, w))?,
        emit(dir, TRACE_FILE, |w| write_trace(r, w))?,
    ])
}

pub fn emit_drops(r: &DropReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![emit(dir, DROPS_FILE, |w| write_drops(r, w))?])
}

#[derive(Debug, Clone)]
pub struct AllReports {
    pub accuracy: AccuracyReport,
    pub delay: DelayReport,
    pub drops: DropReport,
    pub files: Vec<PathBuf>,
}

/// Trains once, runs every experiment and writes every report to `dir`.
pub fn run_all(cfg: &SimConfig, dir: &Path) -> Result<AllReports> {
    let topo = cfg.topology()?;
    let trained = Trained::build(cfg, &topo)?;
    let mut files = vec![emit_config(cfg, dir)?];
    files.extend(emit_training(&trained, dir)?);

    let accuracy = run_accuracy_with(cfg, &topo, &trained)?;
    files.extend(emit_accuracy(&accuracy, dir)?);

    let delay = simulate(cfg, &topo, &trained, cfg.n_delay_paths, true)?;
    files.extend(emit_delay(&delay, dir)?);

    let with = simulate(cfg, &topo, &trained, cfg.n_drop_paths, true)?;
    let without = simulate(cfg, &topo, &trained, cfg.n_drop_paths, false)?;
    let drops = drops_from(cfg, &with, &without);
    files.extend(emit_drops(&drops, dir)?);

    Ok(AllReports {
        accuracy,
        delay,
        drops,
        files,
    })
}

/// Load-class column name for index `i` of a `[low, medium, high]` mix.
pub fn load_column(i: usize) -> String {
    format!("load_{}", load_name(i))
}
