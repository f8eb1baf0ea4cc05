//! JSONL trace files: one header record, one record per event, and a
//! closing summary record.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::json::to_line;
use crate::sim::{RunSummary, Trace, TraceEvent, TraceHeader, TRACE_SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header(TraceHeader),
    Event(TraceEvent),
    Summary(RunSummary),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parsed trace file. The summary is missing for partial traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub summary: Option<RunSummary>,
}

pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    let mut line = |rec: &Record| -> std::io::Result<()> {
        let text = to_line(rec).map_err(std::io::Error::other)?;
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")
    };
    line(&Record::Header(trace.header.clone()))?;
    for ev in &trace.events {
        line(&Record::Event(ev.clone()))?;
    }
    line(&Record::Summary(trace.summary.clone()))
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_trace<R: BufRead>(input: R) -> Result<TraceFile, TraceReadError> {
    let mut header = None;
    let mut events = Vec::new();
    let mut summary = None;
    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| TraceReadError::Malformed { line, message };
        let rec: Record = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        match rec {
            Record::Header(h) => {
                if header.is_some() || line != 1 {
                    return Err(malformed("header must be the first and only header record".into()));
                }
                if h.schema != TRACE_SCHEMA {
                    return Err(malformed(format!("unsupported schema `{}`", h.schema)));
                }
                header = Some(h);
            }
            Record::Event(ev) => {
                let Some(h) = &header else {
                    return Err(malformed("event before header".into()));
                };
                if summary.is_some() {
                    return Err(malformed("event after summary".into()));
                }
                if ev.robot_id >= h.robots.len() {
                    return Err(malformed(format!("unknown robot {}", ev.robot_id)));
                }
                if ev.event_index != events.len() as u64 {
                    return Err(malformed(format!(
                        "expected event_index {}, found {}",
                        events.len(),
                        ev.event_index
                    )));
                }
                events.push(ev);
            }
            Record::Summary(s) => {
                if header.is_none() || summary.is_some() {
                    return Err(malformed("unexpected summary record".into()));
                }
                summary = Some(s);
            }
        }
    }
    let header = header.ok_or(TraceReadError::Empty)?;
    Ok(TraceFile { header, events, summary })
}
