//! Newline-delimited JSON traces: one header line, then events.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{Aggregate, Report, TrialSummary};
use super::RunConfig;
use crate::error::{Error, Result};
use crate::power::{Phase, RunStatus};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: u32,
    pub artifact: String,
    pub version: String,
    /// Whether round events carry the potential `G`.
    pub oracle: bool,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum TraceEvent {
    Round {
        trial: usize,
        phase: Phase,
        round: usize,
        quotient: f64,
        #[serde(rename = "G", skip_serializing_if = "Option::is_none", default)]
        g: Option<f64>,
        work: u64,
        accepted: bool,
    },
    TrialEnd {
        trial: usize,
        status: RunStatus,
        quotient: Option<f64>,
        success: Option<bool>,
        work: u64,
    },
}

pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create<P: AsRef<Path>>(path: P, header: &TraceHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    pub fn write(&mut self, event: &TraceEvent) -> Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<(TraceHeader, Vec<TraceEvent>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header: TraceHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Parse {
            line: 1,
            message: format!("trace header: {e}"),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty trace".into(),
            })
        }
    };
    if header.schema != TRACE_SCHEMA {
        return Err(Error::Parse {
            line: 1,
            message: format!("trace schema {} is not {TRACE_SCHEMA}", header.schema),
        });
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok((header, events))
}

/// Recomputes the aggregate from the trial-end events and checks it
/// against the report, field for field.
pub fn verify_trace<P: AsRef<Path>>(path: P, report: &Report) -> Result<Aggregate> {
    let (header, events) = read_trace(path)?;
    if header.config != report.config {
        return Err(Error::InvalidInput("trace and report were produced by different configs".into()));
    }
    let mut ends: Vec<(usize, TrialSummary)> = events
        .into_iter()
        .filter_map(|e| match e {
            TraceEvent::TrialEnd {
                trial,
                status,
                quotient,
                success,
                work,
            } => Some((
                trial,
                TrialSummary {
                    status,
                    quotient,
                    success,
                    work,
                },
            )),
            TraceEvent::Round { .. } => None,
        })
        .collect();
    ends.sort_by_key(|(t, _)| *t);
    let summaries: Vec<TrialSummary> = ends.into_iter().map(|(_, s)| s).collect();
    let agg = Aggregate::compute(&summaries);
    if agg != report.aggregate {
        return Err(Error::InvalidInput(format!(
            "aggregate replayed from the trace differs from the report: {agg:?} vs {:?}",
            report.aggregate
        )));
    }
    Ok(agg)
}
