//! Event-cluster anticipation: cluster the humans' events of the previous
//! iteration and replay the cluster means as the robot's schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{command_for, CommandKind, RobotCommand};
use crate::error::{Error, Result};
use crate::model::{AgentId, EventKind, EventSeries, EventType, TimedEvent};
use crate::scalar::{from_count, Scalar};

/// Same-kind events of different agents that happened close together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventCluster<T: Scalar> {
    pub event: EventType,
    pub members: Vec<(AgentId, T)>,
    pub mean_t: T,
}

impl<T: Scalar> EventCluster<T> {
    fn open(event: EventType, agent: AgentId, t: T) -> Self {
        EventCluster {
            event,
            members: vec![(agent, t)],
            mean_t: t,
        }
    }

    pub fn member_times(&self) -> Vec<T> {
        self.members.iter().map(|m| m.1).collect()
    }

    /// Earliest member; clusters are anchored on it.
    pub fn anchor(&self) -> T {
        self.members[0].1
    }

    pub fn spread(&self) -> T {
        let times = self.member_times();
        let lo = times.iter().copied().fold(T::infinity(), T::min);
        let hi = times.iter().copied().fold(T::neg_infinity(), T::max);
        hi - lo
    }

    /// The same cluster with every time moved by `dt`.
    pub fn shifted(&self, dt: T) -> Self {
        EventCluster {
            event: self.event,
            members: self.members.iter().map(|&(a, t)| (a, t + dt)).collect(),
            mean_t: self.mean_t + dt,
        }
    }

    fn finish(mut self) -> Self {
        let sum = self.members.iter().fold(T::zero(), |s, m| s + m.1);
        self.mean_t = sum / from_count(self.members.len());
        self
    }
}

/// Greedy chronological clustering of the given events, per kind.
///
/// An event joins the open cluster of its kind when it lies within `epsilon`
/// of that cluster's earliest member and its agent is not yet a member;
/// otherwise it opens a new cluster. Early events are ignored.
pub fn cluster_timed_events<T: Scalar>(
    events: impl IntoIterator<Item = TimedEvent<T>>,
    epsilon: T,
) -> Vec<EventCluster<T>> {
    let mut by_kind: BTreeMap<EventKind, Vec<(T, AgentId)>> = BTreeMap::new();
    for ev in events.into_iter().filter(|e| !e.event.is_early()) {
        by_kind.entry(ev.event.kind()).or_default().push((ev.t, ev.agent));
    }
    let mut clusters = Vec::new();
    for (kind, mut evs) in by_kind {
        evs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let mut open: Option<EventCluster<T>> = None;
        for (t, agent) in evs {
            match open.as_mut() {
                Some(c) if t - c.anchor() <= epsilon && c.members.iter().all(|m| m.0 != agent) => {
                    c.members.push((agent, t));
                }
                _ => {
                    if let Some(done) = open.take() {
                        clusters.push(done.finish());
                    }
                    open = Some(EventCluster::open(kind.human_event(), agent, t));
                }
            }
        }
        if let Some(done) = open {
            clusters.push(done.finish());
        }
    }
    clusters.sort_by(|a, b| {
        a.anchor()
            .partial_cmp(&b.anchor())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.event.cmp(&b.event))
    });
    clusters
}

/// Clusters the events of `iteration` across the given (human) series.
pub fn cluster_events<T: Scalar>(
    series: &[EventSeries<T>],
    iteration: u32,
    epsilon: T,
) -> Vec<EventCluster<T>> {
    cluster_timed_events(
        series
            .iter()
            .flat_map(|s| s.events().iter().filter(|e| e.iteration == iteration).copied()),
        epsilon,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlannedCommand<T: Scalar> {
    pub kind: CommandKind,
    pub source: EventType,
    /// Iteration-relative seconds.
    pub at: T,
}

/// Predicted schedule for the coming iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EcaState<T: Scalar> {
    pub predicted_schedule: Vec<PlannedCommand<T>>,
    pub iteration_start: T,
    next: usize,
}

/// Turns the previous iteration's clusters into a schedule sorted by time.
pub fn eca_predict<T: Scalar>(clusters: &[EventCluster<T>]) -> Result<EcaState<T>> {
    if clusters.is_empty() {
        return Err(Error::EmptyIteration);
    }
    let mut schedule: Vec<PlannedCommand<T>> = clusters
        .iter()
        .filter_map(|c| {
            command_for(c.event).map(|kind| PlannedCommand {
                kind,
                source: c.event,
                at: c.mean_t,
            })
        })
        .collect();
    schedule.sort_by(|a, b| a.at.partial_cmp(&b.at).unwrap_or(std::cmp::Ordering::Equal));
    Ok(EcaState {
        predicted_schedule: schedule,
        iteration_start: T::zero(),
        next: 0,
    })
}

impl<T: Scalar> EcaState<T> {
    /// Pins the relative schedule to an iteration starting at `start`.
    pub fn anchored(mut self, start: T) -> Self {
        self.iteration_start = start;
        self.next = 0;
        self
    }

    fn due(&self, i: usize) -> T {
        self.iteration_start + self.predicted_schedule[i].at
    }

    fn emit(&mut self) -> RobotCommand<T> {
        let plan = &self.predicted_schedule[self.next];
        let cmd = RobotCommand {
            kind: plan.kind,
            issue_t: self.iteration_start + plan.at,
            source: plan.source,
        };
        self.next += 1;
        cmd
    }

    /// Emits everything due at or before absolute time `now`.
    pub fn tick(&mut self, now: T) -> Vec<RobotCommand<T>> {
        let mut out = Vec::new();
        while self.next < self.predicted_schedule.len() && self.due(self.next) <= now {
            out.push(self.emit());
        }
        out
    }

    pub fn next_deadline(&self) -> Option<T> {
        (self.next < self.predicted_schedule.len()).then(|| self.due(self.next))
    }

    pub fn remaining(&self) -> usize {
        self.predicted_schedule.len() - self.next
    }
}

/// Emits every scheduled command whose iteration-relative time has arrived,
/// each exactly once.
pub fn eca_tick<T: Scalar>(st: &mut EcaState<T>, iteration_relative_now: T) -> Vec<RobotCommand<T>> {
    let mut out = Vec::new();
    while st.next < st.predicted_schedule.len()
        && st.predicted_schedule[st.next].at <= iteration_relative_now
    {
        out.push(st.emit());
    }
    out
}
