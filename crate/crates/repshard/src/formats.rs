// SPDX-License-Identifier: Apache-2.0

//! CSV inputs and outputs. All files are UTF-8 with LF line endings and `.`
//! as the decimal separator.
//!
//! | file | header |
//! |------|--------|
//! | input-count distribution | `n_inputs,probability` |
//! | trace | `round,tx_id,n_inputs,valid` |
//! | metrics | `round,scheme,leader_resource_ratio,txs_processed,cumulative_txs,evictions,msgs_leader,msgs_member,msgs_referee` |
//! | failure curve | `c,exact_tail,kl_bound,c12_bound` |
//! | partial set | `f,lambda,m,single,union` |
//! | ECFR trials | `trial,max_white_frac,Y,Z,any_committee_failed` |
//! | lemma1 | `c,alpha,d,m,beta,trials,empirical,std_error,bound,holds` |
//! | cross-shard | `m,fraction` |

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use repshard_core::digest::Digest;
use repshard_core::security::{BoundReport, EcfrTrialStats, FailureRow};
use repshard_core::shard::InputCountDistribution;
use repshard_core::sim::{RoundMetrics, TraceRecord};

use crate::error::{AppError, Result};

pub const DIST_HEADER: [&str; 2] = ["n_inputs", "probability"];
pub const TRACE_HEADER: [&str; 4] = ["round", "tx_id", "n_inputs", "valid"];
pub const METRICS_HEADER: [&str; 9] = [
    "round",
    "scheme",
    "leader_resource_ratio",
    "txs_processed",
    "cumulative_txs",
    "evictions",
    "msgs_leader",
    "msgs_member",
    "msgs_referee",
];
pub const FAILURE_HEADER: [&str; 4] = ["c", "exact_tail", "kl_bound", "c12_bound"];
pub const PARTIAL_SET_HEADER: [&str; 5] = ["f", "lambda", "m", "single", "union"];
pub const ECFR_HEADER: [&str; 5] = ["trial", "max_white_frac", "Y", "Z", "any_committee_failed"];
pub const LEMMA1_HEADER: [&str; 10] = [
    "c",
    "alpha",
    "d",
    "m",
    "beta",
    "trials",
    "empirical",
    "std_error",
    "bound",
    "holds",
];
pub const CROSS_SHARD_HEADER: [&str; 2] = ["m", "fraction"];

/// Writer that emits `header` even when no rows follow.
fn writer<W: Write>(out: W, header: &[&str]) -> io::Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::Input {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

fn row_error(path: &Path, e: &csv::Error, fallback_row: u64) -> AppError {
    let row = e.position().map_or(fallback_row, |p| p.line());
    let reason = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    AppError::Row {
        path: path.to_path_buf(),
        row,
        reason,
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct DistRow {
    n_inputs: usize,
    probability: f64,
}

pub fn read_input_distribution(path: &Path) -> Result<InputCountDistribution> {
    let mut reader = open(path)?;
    let mut pairs = Vec::new();
    for (i, row) in reader.deserialize::<DistRow>().enumerate() {
        let row = row.map_err(|e| row_error(path, &e, i as u64 + 2))?;
        pairs.push((row.n_inputs, row.probability));
    }
    InputCountDistribution::from_pairs(&pairs).map_err(|e| AppError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn write_input_distribution<W: Write>(dist: &InputCountDistribution, out: W) -> io::Result<()> {
    let mut w = writer(out, &DIST_HEADER)?;
    for (n_inputs, probability) in dist.pairs() {
        w.serialize(DistRow { n_inputs, probability })?;
    }
    w.flush()
}

#[derive(Debug, Deserialize, Serialize)]
struct TraceRow {
    round: u64,
    tx_id: String,
    n_inputs: usize,
    valid: u8,
}

/// Reads a trace; rows must be sorted by round.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut reader = open(path)?;
    let mut out: Vec<TraceRecord> = Vec::new();
    for (i, row) in reader.deserialize::<TraceRow>().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| row_error(path, &e, line))?;
        let bad = |reason: &str| AppError::Row {
            path: path.to_path_buf(),
            row: line,
            reason: reason.to_string(),
        };
        let tx_id = Digest::from_hex(&row.tx_id).map_err(|_| bad("tx_id must be 64 hex digits"))?;
        let valid = match row.valid {
            0 => false,
            1 => true,
            _ => return Err(bad("valid must be 0 or 1")),
        };
        if row.n_inputs == 0 {
            return Err(bad("n_inputs must be at least 1"));
        }
        if row.round == 0 {
            return Err(bad("rounds are numbered from 1"));
        }
        if out.last().is_some_and(|prev| prev.round > row.round) {
            return Err(bad("rows must be sorted by round"));
        }
        out.push(TraceRecord {
            round: row.round,
            tx_id,
            n_inputs: row.n_inputs,
            valid,
        });
    }
    Ok(out)
}

pub fn write_trace<W: Write>(rows: &[TraceRecord], out: W) -> io::Result<()> {
    let mut w = writer(out, &TRACE_HEADER)?;
    for r in rows {
        w.serialize(TraceRow {
            round: r.round,
            tx_id: r.tx_id.to_string(),
            n_inputs: r.n_inputs,
            valid: u8::from(r.valid),
        })?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
struct MetricsRow<'a> {
    round: u64,
    scheme: &'a str,
    leader_resource_ratio: f64,
    txs_processed: u64,
    cumulative_txs: u64,
    evictions: u64,
    msgs_leader: f64,
    msgs_member: f64,
    msgs_referee: f64,
}

pub fn write_metrics<W: Write>(rows: &[RoundMetrics], out: W) -> io::Result<()> {
    let mut w = writer(out, &METRICS_HEADER)?;
    for m in rows {
        w.serialize(MetricsRow {
            round: m.round,
            scheme: m.scheme.name(),
            leader_resource_ratio: m.leader_resource_ratio,
            txs_processed: m.txs_processed,
            cumulative_txs: m.cumulative_txs,
            evictions: m.evictions,
            msgs_leader: m.msgs_leader,
            msgs_member: m.msgs_member,
            msgs_referee: m.msgs_referee,
        })?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
struct FailureCsvRow {
    c: u64,
    exact_tail: f64,
    kl_bound: f64,
    c12_bound: f64,
}

pub fn write_failure_curve<W: Write>(rows: &[FailureRow], out: W) -> io::Result<()> {
    let mut w = writer(out, &FAILURE_HEADER)?;
    for r in rows {
        w.serialize(FailureCsvRow {
            c: r.c,
            exact_tail: r.exact_tail,
            kl_bound: r.kl_bound,
            c12_bound: r.c12_bound,
        })?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct PartialSetRow {
    pub f: f64,
    pub lambda: u32,
    pub m: u32,
    pub single: f64,
    pub union: f64,
}

pub fn write_partial_set<W: Write>(rows: &[PartialSetRow], out: W) -> io::Result<()> {
    let mut w = writer(out, &PARTIAL_SET_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
struct EcfrRow {
    trial: u64,
    max_white_frac: f64,
    #[serde(rename = "Y")]
    y: usize,
    #[serde(rename = "Z")]
    z: usize,
    any_committee_failed: u8,
}

pub fn write_ecfr_trials<W: Write>(rows: &[EcfrTrialStats], out: W) -> io::Result<()> {
    let mut w = writer(out, &ECFR_HEADER)?;
    for s in rows {
        w.serialize(EcfrRow {
            trial: s.trial,
            max_white_frac: s.max_white_frac,
            y: s.y,
            z: s.z,
            any_committee_failed: u8::from(s.any_committee_failed),
        })?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct Lemma1Row {
    pub c: usize,
    pub alpha: f64,
    pub d: u32,
    pub m: usize,
    pub beta: f64,
    pub trials: u64,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub holds: u8,
}

impl Lemma1Row {
    pub fn new(c: usize, alpha: f64, d: u32, m: usize, report: &BoundReport) -> Self {
        Lemma1Row {
            c,
            alpha,
            d,
            m,
            beta: report.beta,
            trials: report.trials,
            empirical: report.exact_value,
            std_error: report.std_error,
            bound: report.bound_value,
            holds: u8::from(report.holds_within(3.0)),
        }
    }
}

pub fn write_lemma1<W: Write>(rows: &[Lemma1Row], out: W) -> io::Result<()> {
    let mut w = writer(out, &LEMMA1_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
struct CrossShardRow {
    m: u32,
    fraction: f64,
}

pub fn write_cross_shard<W: Write>(rows: &[(u32, f64)], out: W) -> io::Result<()> {
    let mut w = writer(out, &CROSS_SHARD_HEADER)?;
    for &(m, fraction) in rows {
        w.serialize(CrossShardRow { m, fraction })?;
    }
    w.flush()
}
