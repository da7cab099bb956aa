//! Newline-delimited JSON monitor protocol.
//!
//! Inbound, one per line: `{"epoch": 3, "value": 0.25}`.
//! Outbound, one per inbound record: `{"action":"continue"}` or
//! `{"action":"stop","stopped_epoch":7,"best_epoch":5,"best_value":0.2}`.
//! A malformed line produces a single `{"error":"..."}` record.

use std::io::{BufRead, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::history::format_float;

use super::{MonitorSession, StopDecision};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Inbound {
    pub epoch: u64,
    pub value: f64,
}

/// How a protocol run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonitorExit {
    Stopped,
    EndOfStream,
    ProtocolError(String),
}

impl MonitorExit {
    pub fn exit_code(&self) -> i32 {
        match self {
            MonitorExit::Stopped | MonitorExit::EndOfStream => 0,
            MonitorExit::ProtocolError(_) => 2,
        }
    }
}

pub fn parse_record(line: &str) -> std::result::Result<Inbound, String> {
    let rec: Inbound = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if !rec.value.is_finite() {
        return Err("value must be finite".into());
    }
    Ok(rec)
}

/// One outbound line without the trailing newline. Floats carry 17
/// significant digits.
pub fn render_decision(decision: &StopDecision) -> String {
    match decision {
        StopDecision::Continue => r#"{"action":"continue"}"#.to_string(),
        StopDecision::Stop(p) => format!(
            r#"{{"action":"stop","stopped_epoch":{},"best_epoch":{},"best_value":{}}}"#,
            p.stopped_epoch,
            p.best_epoch,
            format_float(p.best_value)
        ),
    }
}

fn render_error(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn emit(out: &mut impl Write, line: &str) -> Result<()> {
    let io = |e| Error::io("<output>", e);
    writeln!(out, "{line}").map_err(io)?;
    out.flush().map_err(io)
}

/// Serves the protocol until a stop, end of input, or the first bad line.
/// Blank lines are skipped. Output is flushed after every record.
pub fn run_monitor(
    session: &mut MonitorSession,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<MonitorExit> {
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = parse_record(&line).and_then(|rec| {
            let epoch = usize::try_from(rec.epoch).map_err(|_| "epoch out of range".to_string())?;
            session.observe(epoch, rec.value).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(decision) => {
                emit(&mut output, &render_decision(&decision))?;
                if decision.is_stop() {
                    return Ok(MonitorExit::Stopped);
                }
            }
            Err(message) => {
                emit(&mut output, &render_error(&message))?;
                return Ok(MonitorExit::ProtocolError(message));
            }
        }
    }
    Ok(MonitorExit::EndOfStream)
}
