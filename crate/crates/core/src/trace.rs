//! Per-round run records, stopping rules and the trace CSV format.
//!
//! A trace file is a CSV with header `round,epsilon,ab`, one row per round.
//! Reals are written in scientific notation with 17 significant digits so a
//! save/load cycle is lossless. Run metadata goes in leading `#` comment
//! lines, and per-node step sizes (when recorded) follow as extra columns
//! `beta_0,beta_1,...`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ROUNDS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule<T> {
    pub tol: T,
    pub max_rounds: usize,
}

impl<T: Scalar> Default for StopRule<T> {
    fn default() -> Self {
        StopRule {
            tol: T::lit(DEFAULT_TOL),
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl<T: Scalar> StopRule<T> {
    pub fn new(tol: T, max_rounds: usize) -> Self {
        StopRule { tol, max_rounds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    RoundLimit,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::RoundLimit => "round_limit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "tolerance" => Some(StopReason::Tolerance),
            "round_limit" => Some(StopReason::RoundLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub round: usize,
    pub epsilon: T,
    pub ab: Option<T>,
    pub beta: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub algorithm: String,
    pub records: Vec<TraceRecord<T>>,
    pub stop_reason: StopReason,
    /// Rounds executed; the last record is the state after this many rounds.
    pub rounds: usize,
    pub wall_time: Duration,
}

impl<T: Scalar> RunTrace<T> {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Tolerance
    }

    pub fn epsilons(&self) -> Vec<T> {
        self.records.iter().map(|r| r.epsilon).collect()
    }

    /// `ab` column; `None` when the algorithm does not define it.
    pub fn abs(&self) -> Option<Vec<T>> {
        self.records.iter().map(|r| r.ab).collect()
    }

    /// The quantity the run was stopped on: `ab` when present, else `epsilon`.
    pub fn stop_metric(&self) -> Vec<T> {
        self.records
            .iter()
            .map(|r| r.ab.unwrap_or(r.epsilon))
            .collect()
    }

    /// First round at which the stop metric is at or below `tol`.
    pub fn rounds_to(&self, tol: T) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.ab.unwrap_or(r.epsilon) <= tol)
            .map(|r| r.round)
    }
}

/// Per-round observation produced by an algorithm for the trace.
pub(crate) struct Observation<T> {
    pub epsilon: T,
    pub ab: Option<T>,
}

/// Shared synchronous loop: observe round `k`, stop if the stop metric is
/// within tolerance or the round budget is spent, otherwise advance.
pub(crate) fn iterate<T, S>(
    algorithm: &str,
    stop: &StopRule<T>,
    mut state: S,
    mut observe: impl FnMut(&S) -> Observation<T>,
    mut step: impl FnMut(&S) -> Result<(S, Option<Vec<T>>)>,
) -> Result<(S, RunTrace<T>)>
where
    T: Scalar,
{
    let started = Instant::now();
    let mut records = Vec::new();
    let mut pending_beta = None;
    let mut round = 0;
    let stop_reason = loop {
        let obs = observe(&state);
        let metric = obs.ab.unwrap_or(obs.epsilon);
        if !(metric.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite balance metric at round {round}"
            )));
        }
        records.push(TraceRecord {
            round,
            epsilon: obs.epsilon,
            ab: obs.ab,
            beta: pending_beta.take(),
        });
        if metric <= stop.tol {
            break StopReason::Tolerance;
        }
        if round >= stop.max_rounds {
            break StopReason::RoundLimit;
        }
        let (next, beta) = step(&state)?;
        state = next;
        pending_beta = beta;
        round += 1;
    };
    Ok((
        state,
        RunTrace {
            algorithm: algorithm.to_string(),
            records,
            stop_reason,
            rounds: round,
            wall_time: started.elapsed(),
        },
    ))
}

const REQUIRED_COLUMNS: [&str; 3] = ["round", "epsilon", "ab"];

fn fmt_real<T: Scalar>(x: T) -> String {
    format!("{x:.16e}")
}

/// Renders a trace in the CSV format described in the module docs.
///
/// The `beta` recorded on row `k` is the step-size vector that produced the
/// state of round `k` (row 0 has none).
pub fn render_trace<T: Scalar>(trace: &RunTrace<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# algorithm: {}", trace.algorithm);
    let _ = writeln!(out, "# stop_reason: {}", trace.stop_reason.as_str());
    let _ = writeln!(out, "# rounds: {}", trace.rounds);
    let _ = writeln!(out, "# wall_time_ns: {}", trace.wall_time.as_nanos());
    let beta_width = trace
        .records
        .iter()
        .filter_map(|r| r.beta.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    out.push_str(&REQUIRED_COLUMNS.join(","));
    for j in 0..beta_width {
        let _ = write!(out, ",beta_{j}");
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(out, "{},{},", r.round, fmt_real(r.epsilon));
        if let Some(ab) = r.ab {
            out.push_str(&fmt_real(ab));
        }
        for j in 0..beta_width {
            out.push(',');
            if let Some(b) = r.beta.as_ref().and_then(|b| b.get(j)) {
                out.push_str(&fmt_real(*b));
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_trace<T: Scalar>(trace: &RunTrace<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_trace(trace)).map_err(|e| Error::io(path, e))
}

pub fn load_trace<T: Scalar>(path: impl AsRef<Path>) -> Result<RunTrace<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

pub fn parse_trace<T: Scalar>(text: &str) -> Result<RunTrace<T>> {
    let mut algorithm = String::new();
    let mut stop_reason = None;
    let mut rounds = None;
    let mut wall_time = Duration::ZERO;
    let mut header: Option<Vec<&str>> = None;
    let mut records = Vec::new();

    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "algorithm" => algorithm = value.to_string(),
                    "stop_reason" => {
                        stop_reason = Some(StopReason::parse(value).ok_or_else(|| {
                            Error::Trace(format!("line {lineno}: unknown stop reason {value:?}"))
                        })?)
                    }
                    "rounds" => {
                        rounds = Some(value.parse().map_err(|_| {
                            Error::Trace(format!("line {lineno}: invalid round count {value:?}"))
                        })?)
                    }
                    "wall_time_ns" => {
                        let ns: u64 = value.parse().map_err(|_| {
                            Error::Trace(format!("line {lineno}: invalid wall time {value:?}"))
                        })?;
                        wall_time = Duration::from_nanos(ns);
                    }
                    _ => {}
                }
            }
            continue;
        }
        let Some(columns) = &header else {
            let columns: Vec<&str> = line.split(',').map(str::trim).collect();
            for required in REQUIRED_COLUMNS {
                if !columns.contains(&required) {
                    return Err(Error::Trace(format!("missing column {required:?}")));
                }
            }
            header = Some(columns);
            continue;
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Trace(format!(
                "line {lineno}: expected {} fields, found {}",
                columns.len(),
                fields.len()
            )));
        }
        let real = |s: &str| -> Result<T> {
            s.parse()
                .map_err(|_| Error::Trace(format!("line {lineno}: invalid number {s:?}")))
        };
        let mut record = TraceRecord {
            round: 0,
            epsilon: T::zero(),
            ab: None,
            beta: None,
        };
        let mut beta = Vec::new();
        for (&name, &field) in columns.iter().zip(&fields) {
            match name {
                "round" => {
                    record.round = field.parse().map_err(|_| {
                        Error::Trace(format!("line {lineno}: invalid round {field:?}"))
                    })?
                }
                "epsilon" => record.epsilon = real(field)?,
                "ab" if !field.is_empty() => record.ab = Some(real(field)?),
                name if name.starts_with("beta_") && !field.is_empty() => beta.push(real(field)?),
                _ => {}
            }
        }
        if !beta.is_empty() {
            record.beta = Some(beta);
        }
        if let Some(prev) = records.last().map(|r: &TraceRecord<T>| r.round) {
            if record.round <= prev {
                return Err(Error::Trace(format!(
                    "line {lineno}: round indices must increase"
                )));
            }
        }
        records.push(record);
    }

    if header.is_none() {
        return Err(Error::Trace("missing header".into()));
    }
    let rounds = rounds.unwrap_or_else(|| records.last().map_or(0, |r| r.round));
    Ok(RunTrace {
        algorithm,
        records,
        stop_reason: stop_reason.unwrap_or(StopReason::RoundLimit),
        rounds,
        wall_time,
    })
}
