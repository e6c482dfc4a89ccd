//! Domain types shared by every other module: events, per-agent series,
//! session recordings and the parameters of the synchronization measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Task-level events detected on an agent. The four `Early*` variants are
/// upper-body onset precursors; they only ever trigger anticipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    StartForward,
    StopForward,
    StartBackward,
    StopBackward,
    Clap,
    Turn,
    EarlyStartForward,
    EarlyStopForward,
    EarlyStartBackward,
    EarlyStopBackward,
}

/// Equivalence classes used by every index: `Clap` and `Turn` collapse into
/// [`EventKind::Clap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StartForward,
    StopForward,
    StartBackward,
    StopBackward,
    Clap,
}

impl EventType {
    pub const ALL: [EventType; 10] = [
        EventType::StartForward,
        EventType::StopForward,
        EventType::StartBackward,
        EventType::StopBackward,
        EventType::Clap,
        EventType::Turn,
        EventType::EarlyStartForward,
        EventType::EarlyStopForward,
        EventType::EarlyStartBackward,
        EventType::EarlyStopBackward,
    ];

    pub fn is_early(self) -> bool {
        matches!(
            self,
            EventType::EarlyStartForward
                | EventType::EarlyStopForward
                | EventType::EarlyStartBackward
                | EventType::EarlyStopBackward
        )
    }

    pub fn is_motion(self) -> bool {
        !matches!(self, EventType::Clap | EventType::Turn)
    }

    /// The regular event an early variant announces; identity otherwise.
    pub fn regular(self) -> EventType {
        match self {
            EventType::EarlyStartForward => EventType::StartForward,
            EventType::EarlyStopForward => EventType::StopForward,
            EventType::EarlyStartBackward => EventType::StartBackward,
            EventType::EarlyStopBackward => EventType::StopBackward,
            other => other,
        }
    }

    /// The early variant of a motion event, if it has one.
    pub fn early(self) -> Option<EventType> {
        match self.regular() {
            EventType::StartForward => Some(EventType::EarlyStartForward),
            EventType::StopForward => Some(EventType::EarlyStopForward),
            EventType::StartBackward => Some(EventType::EarlyStartBackward),
            EventType::StopBackward => Some(EventType::EarlyStopBackward),
            _ => None,
        }
    }

    pub fn kind(self) -> EventKind {
        match self.regular() {
            EventType::StartForward => EventKind::StartForward,
            EventType::StopForward => EventKind::StopForward,
            EventType::StartBackward => EventKind::StartBackward,
            EventType::StopBackward => EventKind::StopBackward,
            _ => EventKind::Clap,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            EventType::StartForward => "start_forward",
            EventType::StopForward => "stop_forward",
            EventType::StartBackward => "start_backward",
            EventType::StopBackward => "stop_backward",
            EventType::Clap => "clap",
            EventType::Turn => "turn",
            EventType::EarlyStartForward => "early_start_forward",
            EventType::EarlyStopForward => "early_stop_forward",
            EventType::EarlyStartBackward => "early_start_backward",
            EventType::EarlyStopBackward => "early_stop_backward",
        }
    }
}

/// True when two event types count as the same coordinated event.
pub fn same_kind(a: EventType, b: EventType) -> bool {
    a.is_early() == b.is_early() && a.kind() == b.kind()
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EventType::ALL
            .into_iter()
            .find(|e| e.token() == s)
            .ok_or_else(|| format!("unknown event name `{s}`"))
    }
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::StartForward,
        EventKind::StopForward,
        EventKind::StartBackward,
        EventKind::StopBackward,
        EventKind::Clap,
    ];

    /// The human-side event type for this kind.
    pub fn human_event(self) -> EventType {
        match self {
            EventKind::StartForward => EventType::StartForward,
            EventKind::StopForward => EventType::StopForward,
            EventKind::StartBackward => EventType::StartBackward,
            EventKind::StopBackward => EventType::StopBackward,
            EventKind::Clap => EventType::Clap,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.human_event().token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Human,
    Robot,
}

impl AgentKind {
    pub fn token(self) -> &'static str {
        match self {
            AgentKind::Human => "human",
            AgentKind::Robot => "robot",
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "human" => Ok(AgentKind::Human),
            "robot" => Ok(AgentKind::Robot),
            _ => Err(format!("unknown agent kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId {
    pub id: u32,
    pub kind: AgentKind,
}

impl AgentId {
    pub fn human(id: u32) -> Self {
        AgentId {
            id,
            kind: AgentKind::Human,
        }
    }

    pub fn robot(id: u32) -> Self {
        AgentId {
            id,
            kind: AgentKind::Robot,
        }
    }

    pub fn is_robot(&self) -> bool {
        self.kind == AgentKind::Robot
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind.token(), self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TimedEvent<T: Scalar> {
    pub agent: AgentId,
    pub event: EventType,
    /// Seconds on the shared session clock.
    pub t: T,
    pub iteration: u32,
}

impl<T: Scalar> TimedEvent<T> {
    pub fn new(agent: AgentId, event: EventType, t: T, iteration: u32) -> Self {
        TimedEvent {
            agent,
            event,
            t,
            iteration,
        }
    }
}

/// One agent's time-ordered event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventSeries<T: Scalar> {
    agent: AgentId,
    events: Vec<TimedEvent<T>>,
}

impl<T: Scalar> EventSeries<T> {
    pub fn new(agent: AgentId, events: Vec<TimedEvent<T>>) -> Result<Self> {
        for ev in &events {
            if ev.agent != agent {
                return Err(Error::InvalidRecording(format!(
                    "event of {} placed in series of {agent}",
                    ev.agent
                )));
            }
            if !(ev.t >= T::zero()) || !ev.t.is_finite() {
                return Err(Error::InvalidRecording(format!(
                    "event time {} of {agent} is negative or not finite",
                    ev.t
                )));
            }
        }
        if events.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidRecording(format!(
                "series of {agent} is not time ordered"
            )));
        }
        Ok(EventSeries { agent, events })
    }

    pub fn empty(agent: AgentId) -> Self {
        EventSeries {
            agent,
            events: Vec::new(),
        }
    }

    /// Builds a series from `(event, t)` pairs, sorting by time and tagging
    /// everything with iteration 0. Handy for fixtures.
    pub fn from_times(agent: AgentId, events: &[(EventType, T)]) -> Result<Self> {
        let mut evs: Vec<TimedEvent<T>> = events
            .iter()
            .map(|&(e, t)| TimedEvent::new(agent, e, t, 0))
            .collect();
        evs.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
        EventSeries::new(agent, evs)
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn events(&self) -> &[TimedEvent<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sample horizon: the latest timestamp, zero for an empty series.
    pub fn horizon(&self) -> T {
        self.events.last().map(|e| e.t).unwrap_or_else(T::zero)
    }

    /// Sorted times of the regular events of `kind`.
    pub fn times_of(&self, kind: EventKind) -> Vec<T> {
        self.events
            .iter()
            .filter(|e| !e.event.is_early() && e.event.kind() == kind)
            .map(|e| e.t)
            .collect()
    }

    /// m_x(e): number of regular events of `kind`.
    pub fn count_of(&self, kind: EventKind) -> usize {
        self.events
            .iter()
            .filter(|e| !e.event.is_early() && e.event.kind() == kind)
            .count()
    }

    /// Kinds with at least one regular event.
    pub fn kinds(&self) -> BTreeSet<EventKind> {
        self.events
            .iter()
            .filter(|e| !e.event.is_early())
            .map(|e| e.event.kind())
            .collect()
    }

    /// Subseries holding the events tagged with `iteration`.
    pub fn slice(&self, iteration: u32) -> EventSeries<T> {
        EventSeries {
            agent: self.agent,
            events: self
                .events
                .iter()
                .filter(|e| e.iteration == iteration)
                .copied()
                .collect(),
        }
    }

    /// Same events shifted by `dt` seconds. Used for time-shift checks.
    pub fn shifted(&self, dt: T) -> Result<EventSeries<T>> {
        EventSeries::new(
            self.agent,
            self.events
                .iter()
                .map(|e| TimedEvent { t: e.t + dt, ..*e })
                .collect(),
        )
    }
}

/// Parameters of the synchronization measures and the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct SyncParams<T: Scalar> {
    /// Co-occurrence lag, seconds.
    pub tau: T,
    /// Clustering threshold, seconds.
    pub cluster_epsilon: T,
    /// Half-width of the window around a scheduled event in which early
    /// events trigger a command, seconds.
    pub early_window_delta: T,
    pub early_count_threshold: u32,
}

impl<T: Scalar> Default for SyncParams<T> {
    fn default() -> Self {
        SyncParams {
            tau: T::lit(0.25),
            cluster_epsilon: T::lit(0.5),
            early_window_delta: T::lit(0.5),
            early_count_threshold: 1,
        }
    }
}

impl<T: Scalar> SyncParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.tau) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if !positive(self.cluster_epsilon) {
            return Err(Error::InvalidConfig(format!(
                "cluster_epsilon must be positive, got {}",
                self.cluster_epsilon
            )));
        }
        if !positive(self.early_window_delta) {
            return Err(Error::InvalidConfig(format!(
                "early_window_delta must be positive, got {}",
                self.early_window_delta
            )));
        }
        if self.early_count_threshold == 0 {
            return Err(Error::InvalidConfig(
                "early_count_threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Two same-kind events of one series close enough that a pair index could
/// exceed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Violation<T: Scalar> {
    pub agent: AgentId,
    pub event: EventKind,
    pub first_t: T,
    pub second_t: T,
}

/// Reports every pair of same-kind regular events closer than `2·tau`.
///
/// Within that distance one event can co-occur with two events of the other
/// series, which is how Q_τ(e) climbs above one. With all same-kind gaps at
/// least `2·tau` the co-occurring pairs form a matching and every index stays
/// in `[0, 1]`.
pub fn validate_series<T: Scalar>(s: &EventSeries<T>, p: &SyncParams<T>) -> Vec<Violation<T>> {
    let limit = p.tau + p.tau;
    let mut out = Vec::new();
    for kind in EventKind::ALL {
        let times = s.times_of(kind);
        for (i, &a) in times.iter().enumerate() {
            for &b in &times[i + 1..] {
                if b - a >= limit {
                    break;
                }
                out.push(Violation {
                    agent: s.agent,
                    event: kind,
                    first_t: a,
                    second_t: b,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SIA")]
    Sia,
    #[serde(rename = "ECA")]
    Eca,
    HumansOnly,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::Sia => "SIA",
            Method::Eca => "ECA",
            Method::HumansOnly => "HumansOnly",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "SIA" | "sia" => Ok(Method::Sia),
            "ECA" | "eca" => Ok(Method::Eca),
            "HumansOnly" | "humans_only" | "none" => Ok(Method::HumansOnly),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

/// Half-open `[start, end)` window of one choreography iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IterationWindow<T: Scalar> {
    pub start: T,
    pub end: T,
}

impl<T: Scalar> IterationWindow<T> {
    pub fn contains(&self, t: T) -> bool {
        self.start <= t && t < self.end
    }
}

/// Index of the window containing `t`, if any.
pub fn window_of<T: Scalar>(windows: &[IterationWindow<T>], t: T) -> Option<u32> {
    windows.iter().position(|w| w.contains(t)).map(|i| i as u32)
}

fn check_windows<T: Scalar>(windows: &[IterationWindow<T>]) -> Result<()> {
    for (i, w) in windows.iter().enumerate() {
        if !(w.start < w.end) || !w.start.is_finite() || !w.end.is_finite() {
            return Err(Error::InvalidRecording(format!(
                "iteration {i} window [{}, {}) is empty",
                w.start, w.end
            )));
        }
    }
    if windows.windows(2).any(|p| p[1].start < p[0].end) {
        return Err(Error::InvalidRecording(
            "iteration windows overlap or are out of order".into(),
        ));
    }
    Ok(())
}

/// A whole multi-agent session: one series per agent plus iteration windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionRecording<T: Scalar> {
    series: Vec<EventSeries<T>>,
    iterations: Vec<IterationWindow<T>>,
    method: Method,
    metadata: BTreeMap<String, String>,
}

impl<T: Scalar> SessionRecording<T> {
    /// Validates and stores a session. Series are reordered by agent id.
    pub fn new(
        mut series: Vec<EventSeries<T>>,
        iterations: Vec<IterationWindow<T>>,
        method: Method,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        check_windows(&iterations)?;
        series.sort_by_key(|s| s.agent.id);
        if series.windows(2).any(|w| w[0].agent.id == w[1].agent.id) {
            return Err(Error::InvalidRecording("duplicate agent id".into()));
        }
        if series.iter().filter(|s| s.agent.is_robot()).count() > 1 {
            return Err(Error::InvalidRecording("more than one robot".into()));
        }
        for s in &series {
            for ev in &s.events {
                let window = iterations.get(ev.iteration as usize).ok_or_else(|| {
                    Error::InvalidRecording(format!(
                        "event at {} of {} tagged with unknown iteration {}",
                        ev.t, ev.agent, ev.iteration
                    ))
                })?;
                if !window.contains(ev.t) {
                    return Err(Error::InvalidRecording(format!(
                        "event at {} of {} lies outside iteration {}",
                        ev.t, ev.agent, ev.iteration
                    )));
                }
            }
        }
        Ok(SessionRecording {
            series,
            iterations,
            method,
            metadata,
        })
    }

    pub fn series(&self) -> &[EventSeries<T>] {
        &self.series
    }

    pub fn iterations(&self) -> &[IterationWindow<T>] {
        &self.iterations
    }

    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn agents(&self) -> Vec<AgentId> {
        self.series.iter().map(|s| s.agent).collect()
    }

    pub fn humans(&self) -> Vec<AgentId> {
        self.agents().into_iter().filter(|a| !a.is_robot()).collect()
    }

    pub fn robot(&self) -> Option<AgentId> {
        self.agents().into_iter().find(|a| a.is_robot())
    }

    pub fn series_of(&self, agent: AgentId) -> Option<&EventSeries<T>> {
        self.series.iter().find(|s| s.agent == agent)
    }

    /// Every event of the session in `(t, agent id, series position)` order.
    pub fn events_in_time_order(&self) -> Vec<TimedEvent<T>> {
        let mut all: Vec<(usize, usize, TimedEvent<T>)> = self
            .series
            .iter()
            .enumerate()
            .flat_map(|(si, s)| s.events.iter().enumerate().map(move |(k, e)| (si, k, *e)))
            .collect();
        all.sort_by(|a, b| {
            a.2.t
                .partial_cmp(&b.2.t)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });
        all.into_iter().map(|(_, _, e)| e).collect()
    }

    /// The session restricted to one iteration. Agents, windows and labels
    /// are kept, so slices of all iterations concatenate back to `self`.
    pub fn slice_by_iteration(&self, iteration: usize) -> Result<SessionRecording<T>> {
        if iteration >= self.iterations.len() {
            return Err(Error::InvalidIteration(iteration));
        }
        Ok(SessionRecording {
            series: self.series.iter().map(|s| s.slice(iteration as u32)).collect(),
            iterations: self.iterations.clone(),
            method: self.method,
            metadata: self.metadata.clone(),
        })
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Validation diagnostics for every series.
    pub fn violations(&self, p: &SyncParams<T>) -> Vec<Violation<T>> {
        self.series.iter().flat_map(|s| validate_series(s, p)).collect()
    }
}

/// Incremental construction for producers (simulator, stream ingestion) that
/// learn events one at a time and in arbitrary agent order.
#[derive(Debug, Clone)]
pub struct RecordingBuilder<T: Scalar> {
    agents: BTreeMap<u32, AgentId>,
    events: Vec<TimedEvent<T>>,
    iterations: Vec<IterationWindow<T>>,
    method: Method,
    metadata: BTreeMap<String, String>,
}

impl<T: Scalar> RecordingBuilder<T> {
    pub fn new(iterations: Vec<IterationWindow<T>>, method: Method) -> Self {
        RecordingBuilder {
            agents: BTreeMap::new(),
            events: Vec::new(),
            iterations,
            method,
            metadata: BTreeMap::new(),
        }
    }

    pub fn agent(&mut self, agent: AgentId) -> &mut Self {
        self.agents.insert(agent.id, agent);
        self
    }

    pub fn metadata(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn iterations(&self) -> &[IterationWindow<T>] {
        &self.iterations
    }

    /// Appends an event, tagging its iteration from the window table.
    /// Returns `None` (and drops the event) when no window contains it.
    pub fn push(&mut self, agent: AgentId, event: EventType, t: T) -> Option<TimedEvent<T>> {
        let iteration = window_of(&self.iterations, t)?;
        self.agents.insert(agent.id, agent);
        let ev = TimedEvent::new(agent, event, t, iteration);
        self.events.push(ev);
        Some(ev)
    }

    pub fn push_tagged(&mut self, ev: TimedEvent<T>) {
        self.agents.insert(ev.agent.id, ev.agent);
        self.events.push(ev);
    }

    /// Builds the recording. Events keep their push order within an agent
    /// after a stable sort by time.
    pub fn build(&self) -> Result<SessionRecording<T>> {
        let mut per_agent: BTreeMap<u32, Vec<TimedEvent<T>>> =
            self.agents.keys().map(|&id| (id, Vec::new())).collect();
        for ev in &self.events {
            per_agent.entry(ev.agent.id).or_default().push(*ev);
        }
        let mut series = Vec::with_capacity(per_agent.len());
        for (id, mut evs) in per_agent {
            evs.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
            series.push(EventSeries::new(self.agents[&id], evs)?);
        }
        SessionRecording::new(
            series,
            self.iterations.clone(),
            self.method,
            self.metadata.clone(),
        )
    }
}
