//! Session log files: one JSON header line, then one JSON object per event.
//!
//! ```text
//! {"format":"syncteam-session","version":1,"method":"SIA","agents":[{"id":0,"kind":"human"}],"iterations":[[0.0,24.0]],"metadata":{}}
//! {"t":3.02,"agent":0,"kind":"human","event":"start_forward","iteration":0,"early":false}
//! ```
//!
//! Writing always emits events in session time order with a fixed field
//! order, so a written log reads back to the same bytes. Fields this version
//! does not know are kept and written back after the known ones.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use syncteam::{
    AgentId, AgentKind, EventType, IterationWindow, Method, Recording, RecordingBuilder,
    TimedEvent,
};

pub const FORMAT: &str = "syncteam-session";
pub const VERSION: u32 = 1;

pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AgentEntry {
    id: u32,
    kind: AgentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    method: Method,
    agents: Vec<AgentEntry>,
    iterations: Vec<[f64; 2]>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(flatten)]
    extra: Extra,
}

/// One event line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub agent: u32,
    pub kind: AgentKind,
    pub event: EventType,
    pub iteration: u32,
    pub early: bool,
    #[serde(flatten)]
    pub extra: Extra,
}

impl LogRecord {
    pub fn of(ev: &TimedEvent<f64>) -> LogRecord {
        LogRecord {
            t: ev.t,
            agent: ev.agent.id,
            kind: ev.agent.kind,
            event: ev.event,
            iteration: ev.iteration,
            early: ev.event.is_early(),
            extra: Extra::new(),
        }
    }
}

/// A parsed log: the recording plus any fields outside the known schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub recording: Recording,
    pub header_extra: Extra,
    /// Unknown event fields, keyed by the event's position in
    /// [`Recording::events_in_time_order`].
    pub event_extra: BTreeMap<usize, Extra>,
}

impl From<Recording> for SessionLog {
    fn from(recording: Recording) -> Self {
        SessionLog {
            recording,
            header_extra: Extra::new(),
            event_extra: BTreeMap::new(),
        }
    }
}

/// Where and why a log failed to parse. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LogError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for LogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for LogError {}

fn at(line: usize, message: impl Into<String>) -> LogError {
    LogError {
        line,
        column: 1,
        message: message.into(),
    }
}

fn json_error(line: usize, e: serde_json::Error) -> LogError {
    // serde_json appends its own " at line L column C"; keep only the cause.
    let text = e.to_string();
    let message = match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    };
    LogError {
        line,
        column: e.column().max(1),
        message,
    }
}

fn key_of(ev: &TimedEvent<f64>) -> (u32, EventType, u64, u32) {
    (ev.agent.id, ev.event, ev.t.to_bits(), ev.iteration)
}

pub fn parse_log(text: &str) -> Result<SessionLog, LogError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or_else(|| at(1, "empty log: missing header line"))?;
    let header: Header = serde_json::from_str(htext).map_err(|e| json_error(hline, e))?;
    if header.format != FORMAT {
        return Err(at(hline, format!("expected format `{FORMAT}`, got `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(at(hline, format!("unsupported log version {}", header.version)));
    }
    let windows: Vec<IterationWindow<f64>> = header
        .iterations
        .iter()
        .map(|&[start, end]| IterationWindow { start, end })
        .collect();
    let mut agents: BTreeMap<u32, AgentKind> = BTreeMap::new();
    let mut b = RecordingBuilder::new(windows.clone(), header.method);
    for a in &header.agents {
        if agents.insert(a.id, a.kind).is_some() {
            return Err(at(hline, format!("agent {} declared twice", a.id)));
        }
        b.agent(AgentId { id: a.id, kind: a.kind });
    }
    for (k, v) in &header.metadata {
        b.metadata(k.clone(), v.clone());
    }

    let mut extras: Vec<(TimedEvent<f64>, Extra)> = Vec::new();
    for (n, l) in lines {
        let r: LogRecord = serde_json::from_str(l).map_err(|e| json_error(n, e))?;
        match agents.get(&r.agent) {
            None => return Err(at(n, format!("agent {} is not declared in the header", r.agent))),
            Some(&k) if k != r.kind => {
                return Err(at(
                    n,
                    format!("agent {} is declared {} but tagged {}", r.agent, k.token(), r.kind.token()),
                ))
            }
            Some(_) => {}
        }
        if r.early != r.event.is_early() {
            return Err(at(n, format!("`early` is {} for event `{}`", r.early, r.event)));
        }
        let Some(w) = windows.get(r.iteration as usize) else {
            return Err(at(n, format!("iteration {} is not in the header", r.iteration)));
        };
        if !r.t.is_finite() || !w.contains(r.t) {
            return Err(at(
                n,
                format!("t = {} lies outside iteration {} [{}, {})", r.t, r.iteration, w.start, w.end),
            ));
        }
        let ev = TimedEvent::new(AgentId { id: r.agent, kind: r.kind }, r.event, r.t, r.iteration);
        b.push_tagged(ev);
        if !r.extra.is_empty() {
            extras.push((ev, r.extra));
        }
    }
    let recording = b.build().map_err(|e| at(hline, e.to_string()))?;

    let mut event_extra = BTreeMap::new();
    if !extras.is_empty() {
        let order: Vec<_> = recording.events_in_time_order().iter().map(key_of).collect();
        let mut used = vec![false; order.len()];
        for (ev, extra) in extras {
            let k = key_of(&ev);
            if let Some(i) = (0..order.len()).find(|&i| !used[i] && order[i] == k) {
                used[i] = true;
                event_extra.insert(i, extra);
            }
        }
    }
    Ok(SessionLog {
        recording,
        header_extra: header.extra,
        event_extra,
    })
}

pub fn write_log(log: &SessionLog) -> String {
    let rec = &log.recording;
    let header = Header {
        format: FORMAT.to_string(),
        version: VERSION,
        method: rec.method(),
        agents: rec
            .agents()
            .into_iter()
            .map(|a| AgentEntry { id: a.id, kind: a.kind })
            .collect(),
        iterations: rec.iterations().iter().map(|w| [w.start, w.end]).collect(),
        metadata: rec.metadata().clone(),
        extra: log.header_extra.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, ev) in rec.events_in_time_order().iter().enumerate() {
        let mut r = LogRecord::of(ev);
        if let Some(x) = log.event_extra.get(&i) {
            r.extra = x.clone();
        }
        out.push_str(&serde_json::to_string(&r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_recording(rec: &Recording) -> String {
    write_log(&SessionLog::from(rec.clone()))
}

/// Reads and parses a log file; errors name the file, line and column.
pub fn read_log(path: &Path) -> anyhow::Result<SessionLog> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_log(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
