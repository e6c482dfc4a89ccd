use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::protocol::{parse_line, Message, ProtocolError, WireEvent};
use crate::anticipate::{Controller, ControllerKind, RobotCommand};
use crate::error::Result;
use crate::model::{
    window_of, AgentId, AgentKind, IterationWindow, Method, RecordingBuilder, SessionRecording,
    SyncParams, TimedEvent,
};

/// Handshake state of one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSession {
    pub client_id: String,
    pub clock_offset: f64,
    pub last_seq: Option<u64>,
    #[serde(skip)]
    seen: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestOutcome {
    /// Stored with its session time and iteration.
    Tagged(TimedEvent<f64>),
    /// Stored, but no iteration window covers it yet.
    Buffered { agent: AgentId, t_session: f64 },
    /// Already seen from this client.
    Duplicate,
    /// A control message was applied.
    Control,
    /// The session was closed.
    Closed,
}

#[derive(Debug, Clone)]
struct Stored {
    t: f64,
    client: String,
    seq: u64,
    agent: AgentId,
    event: crate::model::EventType,
}

#[derive(Debug, Clone)]
struct Live {
    controller: Controller<f64>,
    iteration: Option<usize>,
    clock: f64,
    commands: Vec<RobotCommand<f64>>,
}

/// Serialized ingestion point of a streaming session. All connections feed
/// one `Ingestor`; it owns the recording under construction and, optionally,
/// a live controller.
#[derive(Debug, Clone)]
pub struct Ingestor {
    params: SyncParams<f64>,
    clients: BTreeMap<String, ClientSession>,
    agents: BTreeMap<u32, AgentId>,
    windows: Vec<IterationWindow<f64>>,
    method: Method,
    metadata: BTreeMap<String, String>,
    events: Vec<Stored>,
    live: Option<Live>,
    diagnostics: Vec<String>,
    closed: bool,
}

impl Ingestor {
    pub fn new(params: SyncParams<f64>) -> Self {
        Ingestor {
            params,
            clients: BTreeMap::new(),
            agents: BTreeMap::new(),
            windows: Vec::new(),
            method: Method::HumansOnly,
            metadata: BTreeMap::new(),
            events: Vec::new(),
            live: None,
            diagnostics: Vec::new(),
            closed: false,
        }
    }

    /// Drives a controller from the incoming events as they arrive.
    pub fn with_controller(mut self, kind: ControllerKind) -> Self {
        self.live = Some(Live {
            controller: Controller::new(kind, self.params),
            iteration: None,
            clock: f64::NEG_INFINITY,
            commands: Vec::new(),
        });
        self
    }

    pub fn params(&self) -> &SyncParams<f64> {
        &self.params
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn clients(&self) -> impl Iterator<Item = &ClientSession> {
        self.clients.values()
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Commands the live controller has issued so far.
    pub fn commands(&self) -> &[RobotCommand<f64>] {
        self.live.as_ref().map_or(&[], |l| &l.commands)
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Parses and applies one line. Errors are also kept as diagnostics, so
    /// callers may ignore them and keep the connection alive.
    pub fn handle_line(&mut self, line: &[u8]) -> std::result::Result<IngestOutcome, ProtocolError> {
        let out = parse_line(line).and_then(|m| self.handle(m));
        if let Err(e) = &out {
            self.diagnostics.push(e.to_string());
        }
        out
    }

    pub fn handle(&mut self, msg: Message) -> std::result::Result<IngestOutcome, ProtocolError> {
        if let Message::Hello { client_id, offset } = &msg {
            return self.hello(client_id, *offset).map(|_| IngestOutcome::Control);
        }
        if !self.clients.contains_key(msg.client_id()) {
            return Err(ProtocolError::UnknownClient(msg.client_id().to_string()));
        }
        match msg {
            Message::Hello { .. } => unreachable!("handled above"),
            Message::Event(we) => self.ingest(we),
            Message::Agent { agent, kind, .. } => {
                let id = match kind {
                    AgentKind::Human => AgentId::human(agent),
                    AgentKind::Robot => AgentId::robot(agent),
                };
                match self.agents.get(&agent) {
                    Some(existing) if *existing != id => Err(ProtocolError::Rejected(format!(
                        "agent {agent} already declared as {}",
                        existing.kind.token()
                    ))),
                    _ => {
                        self.agents.insert(agent, id);
                        Ok(IngestOutcome::Control)
                    }
                }
            }
            Message::Iteration {
                index, start, end, ..
            } => {
                if index != self.windows.len() {
                    return Err(ProtocolError::Rejected(format!(
                        "iteration {index} announced, expected {}",
                        self.windows.len()
                    )));
                }
                let ordered = self.windows.last().map_or(true, |w| w.end <= start);
                if !(start < end) || !ordered {
                    return Err(ProtocolError::Rejected(format!(
                        "iteration window [{start}, {end}) is empty or overlaps"
                    )));
                }
                self.windows.push(IterationWindow { start, end });
                Ok(IngestOutcome::Control)
            }
            Message::Method { method, .. } => {
                self.method = method;
                Ok(IngestOutcome::Control)
            }
            Message::Meta { key, value, .. } => {
                self.metadata.insert(key, value);
                Ok(IngestOutcome::Control)
            }
            Message::End { .. } => {
                self.closed = true;
                Ok(IngestOutcome::Closed)
            }
        }
    }

    fn hello(&mut self, client_id: &str, offset: f64) -> std::result::Result<(), ProtocolError> {
        match self.clients.get(client_id) {
            Some(c) if c.clock_offset != offset => Err(ProtocolError::Rejected(format!(
                "client `{client_id}` already fixed its clock offset at {}",
                c.clock_offset
            ))),
            Some(_) => Ok(()),
            None => {
                self.clients.insert(
                    client_id.to_string(),
                    ClientSession {
                        client_id: client_id.to_string(),
                        clock_offset: offset,
                        last_seq: None,
                        seen: BTreeSet::new(),
                    },
                );
                Ok(())
            }
        }
    }

    /// Applies the client's offset, tags the iteration and stores the event.
    /// Repeated `(client, seq)` pairs are ignored.
    pub fn ingest(&mut self, we: WireEvent) -> std::result::Result<IngestOutcome, ProtocolError> {
        let client = self
            .clients
            .get_mut(&we.client_id)
            .ok_or_else(|| ProtocolError::UnknownClient(we.client_id.clone()))?;
        if client.seen.contains(&we.seq) {
            return Ok(IngestOutcome::Duplicate);
        }
        if let Some(last) = client.last_seq {
            if we.seq < last {
                return Err(ProtocolError::NonMonotoneSeq {
                    client: we.client_id,
                    seq: we.seq,
                    last,
                });
            }
        }
        let t = we.t_client + client.clock_offset;
        if !(t >= 0.0) {
            return Err(ProtocolError::Rejected(format!(
                "event at session time {t} precedes the session clock"
            )));
        }
        client.seen.insert(we.seq);
        client.last_seq = Some(we.seq);
        let agent = *self
            .agents
            .entry(we.agent)
            .or_insert_with(|| AgentId::human(we.agent));
        self.events.push(Stored {
            t,
            client: we.client_id,
            seq: we.seq,
            agent,
            event: we.event,
        });
        match window_of(&self.windows, t) {
            Some(iteration) => {
                let ev = TimedEvent::new(agent, we.event, t, iteration);
                self.feed_controller(&ev);
                Ok(IngestOutcome::Tagged(ev))
            }
            None => Ok(IngestOutcome::Buffered { agent, t_session: t }),
        }
    }

    fn feed_controller(&mut self, ev: &TimedEvent<f64>) {
        let Some(mut live) = self.live.take() else { return };
        if ev.t < live.clock {
            self.diagnostics.push(format!(
                "controller skipped late event at {} (clock at {})",
                ev.t, live.clock
            ));
            self.live = Some(live);
            return;
        }
        let target = ev.iteration as usize;
        while live.iteration.map_or(true, |i| i < target) {
            let next = live.iteration.map_or(0, |i| i + 1);
            if live.iteration.is_some() {
                let cmds = live.controller.end_iteration();
                live.commands.extend(cmds);
            }
            if let Ok(rec) = self.snapshot() {
                if let Err(e) = live.controller.begin_iteration(&rec, next) {
                    self.diagnostics
                        .push(format!("controller idles in iteration {next}: {e}"));
                }
            }
            live.iteration = Some(next);
        }
        live.clock = ev.t;
        let cmds = live.controller.on_event(ev);
        live.commands.extend(cmds);
        self.live = Some(live);
    }

    fn ordered_events(&self) -> Vec<&Stored> {
        let mut evs: Vec<&Stored> = self.events.iter().collect();
        evs.sort_by(|a, b| {
            a.t.partial_cmp(&b.t)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.client.cmp(&b.client))
                .then(a.seq.cmp(&b.seq))
        });
        evs
    }

    fn build(&self, report_unplaced: bool) -> (Result<SessionRecording<f64>>, Vec<String>) {
        let mut b = RecordingBuilder::new(self.windows.clone(), self.method);
        for (k, v) in &self.metadata {
            b.metadata(k.clone(), v.clone());
        }
        for a in self.agents.values() {
            b.agent(*a);
        }
        let mut lost = Vec::new();
        for s in self.ordered_events() {
            if b.push(s.agent, s.event, s.t).is_none() && report_unplaced {
                lost.push(format!(
                    "event {} of {} at {} lies outside every iteration; dropped",
                    s.event, s.agent, s.t
                ));
            }
        }
        (b.build(), lost)
    }

    /// The recording as it stands, leaving buffered events out.
    pub fn snapshot(&self) -> Result<SessionRecording<f64>> {
        self.build(false).0
    }

    /// Final recording in `(t, client, seq)` order, plus every diagnostic
    /// collected over the session.
    pub fn finish(mut self) -> (Result<SessionRecording<f64>>, Vec<String>) {
        let (rec, lost) = self.build(true);
        self.diagnostics.extend(lost);
        (rec, self.diagnostics)
    }
}
