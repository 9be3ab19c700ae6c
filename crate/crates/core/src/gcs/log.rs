//! Newline-delimited JSON event log and deterministic replay.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::service::{GcsError, GcsService, GCS_SUBSCRIPTIONS};
use super::spec::MissionSpec;
use crate::bus::{ClockMode, Envelope, Millis, QosClass, TopicPattern};
use crate::message::{MissionFooter, Payload};

/// Topic and sender of the header and footer records.
pub const MISSION_TOPIC: &str = "gcs/mission";
pub const RECORDER: &str = "recorder";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionHeader {
    pub spec: MissionSpec,
    pub seed: u64,
    pub clock: ClockMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_script: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub seq: u64,
    pub at: Millis,
    pub envelope: Envelope,
}

impl EventLogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot write event log: {0}")]
    Io(#[from] std::io::Error),
}

/// Appends records with a dense global seq, keeping the text in memory and
/// optionally mirroring it to a file.
#[derive(Debug, Default)]
pub struct EventLogWriter {
    next_seq: u64,
    last_at: Millis,
    lines: Vec<String>,
    sink: Option<BufWriter<File>>,
}

impl EventLogWriter {
    pub fn new() -> Self {
        EventLogWriter::default()
    }

    pub fn to_file(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Ok(EventLogWriter {
            sink: Some(BufWriter::new(File::create(path)?)),
            ..EventLogWriter::default()
        })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// The whole log as it would appear on disk.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.lines.iter().map(|l| l.len() + 1).sum());
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    pub fn record(&mut self, at: Millis, envelope: Envelope) -> Result<u64, LogError> {
        debug_assert!(at >= self.last_at, "log time went backwards");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.last_at = at;
        let line = EventLogRecord { seq, at, envelope }.to_line();
        if let Some(w) = self.sink.as_mut() {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        self.lines.push(line);
        Ok(seq)
    }

    fn recorder(&mut self, at: Millis, seq: u64, payload: Payload) -> Result<u64, LogError> {
        let envelope = Envelope {
            topic: MISSION_TOPIC.into(),
            sender: RECORDER.into(),
            seq,
            sent_at: at,
            qos: QosClass::Critical,
            payload,
        };
        self.record(at, envelope)
    }

    pub fn header(&mut self, h: MissionHeader) -> Result<u64, LogError> {
        self.recorder(0, 1, Payload::Header(Box::new(h)))
    }

    pub fn footer(&mut self, f: MissionFooter) -> Result<u64, LogError> {
        let at = f.at;
        let seq = self.recorder(at, 2, Payload::Footer(f))?;
        self.flush()?;
        Ok(seq)
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        if let Some(w) = self.sink.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("seq gap: expected {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("seq {seq}: time {at} precedes {previous}")]
    TimeRegression {
        seq: u64,
        at: Millis,
        previous: Millis,
    },
    #[error("log has no mission header and no fallback spec was given")]
    MissingHeader,
    #[error(transparent)]
    Gcs(#[from] GcsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a log, checking that seq is dense from zero and time never runs back.
pub fn parse_log(text: &str) -> Result<Vec<EventLogRecord>, ReplayError> {
    let mut out: Vec<EventLogRecord> = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let rec: EventLogRecord =
            serde_json::from_str(line).map_err(|source| ReplayError::Parse {
                line: i + 1,
                source,
            })?;
        let expected = out.len() as u64;
        if rec.seq != expected {
            return Err(ReplayError::Gap {
                expected,
                found: rec.seq,
            });
        }
        if let Some(prev) = out.last() {
            if rec.at < prev.at {
                return Err(ReplayError::TimeRegression {
                    seq: rec.seq,
                    at: rec.at,
                    previous: prev.at,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Rebuilds the GCS models from logged deliveries. Housekeeping the live
/// service did on tick boundaries is re-run on the same boundaries.
pub struct Replayer {
    gcs: GcsService,
    tick_ms: Millis,
    patterns: Vec<TopicPattern>,
    applied: Option<u64>,
    finished: Option<MissionFooter>,
}

impl Replayer {
    pub fn new(spec: &MissionSpec) -> Result<Self, ReplayError> {
        Ok(Replayer {
            gcs: GcsService::new(spec)?,
            tick_ms: spec.tick_ms.max(1),
            patterns: GCS_SUBSCRIPTIONS
                .iter()
                .map(|p| TopicPattern::parse(p).expect("static pattern"))
                .collect(),
            applied: None,
            finished: None,
        })
    }

    pub fn gcs(&self) -> &GcsService {
        &self.gcs
    }

    pub fn into_gcs(self) -> GcsService {
        self.gcs
    }

    /// Seq of the last applied record.
    pub fn applied(&self) -> Option<u64> {
        self.applied
    }

    pub fn footer(&self) -> Option<&MissionFooter> {
        self.finished.as_ref()
    }

    fn catch_up(&mut self, bound: Millis, inclusive: bool) {
        while let Some(due) = self.gcs.next_due() {
            let tick = due.div_ceil(self.tick_ms) * self.tick_ms;
            if tick < bound || (inclusive && tick == bound) {
                self.gcs.tick(tick);
                self.gcs.take_outbox();
            } else {
                break;
            }
        }
    }

    pub fn apply(&mut self, rec: &EventLogRecord) {
        self.applied = Some(rec.seq);
        if let Payload::Footer(f) = &rec.envelope.payload {
            self.catch_up(f.at, true);
            self.gcs.tick(f.at);
            self.gcs.take_outbox();
            self.finished = Some(f.clone());
            return;
        }
        if !self.patterns.iter().any(|p| p.matches(&rec.envelope.topic)) {
            return;
        }
        self.catch_up(rec.at, false);
        self.gcs.ingest(&rec.envelope, rec.at);
        self.gcs.take_outbox();
        self.gcs.take_results();
    }
}

#[derive(Debug)]
pub struct ReplayResult {
    pub header: Option<MissionHeader>,
    pub replayer: Replayer,
}

/// Replays records up to and including `upto` (all when `None`).
pub fn replay_records(
    records: &[EventLogRecord],
    fallback: Option<&MissionSpec>,
    upto: Option<u64>,
) -> Result<ReplayResult, ReplayError> {
    let header = records.first().and_then(|r| match &r.envelope.payload {
        Payload::Header(h) => Some((**h).clone()),
        _ => None,
    });
    let spec = header
        .as_ref()
        .map(|h| &h.spec)
        .or(fallback)
        .ok_or(ReplayError::MissingHeader)?;
    let mut replayer = Replayer::new(spec)?;
    for rec in records
        .iter()
        .take_while(|r| upto.is_none_or(|u| r.seq <= u))
    {
        replayer.apply(rec);
    }
    Ok(ReplayResult { header, replayer })
}

pub fn replay(text: &str, fallback: Option<&MissionSpec>) -> Result<ReplayResult, ReplayError> {
    replay_records(&parse_log(text)?, fallback, None)
}

pub fn replay_file(
    path: impl AsRef<Path>,
    fallback: Option<&MissionSpec>,
) -> Result<ReplayResult, ReplayError> {
    replay(&std::fs::read_to_string(path)?, fallback)
}

impl std::fmt::Debug for Replayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Replayer")
            .field("applied", &self.applied)
            .field("version", &self.gcs.version())
            .finish()
    }
}
