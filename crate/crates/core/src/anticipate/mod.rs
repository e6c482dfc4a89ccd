//! Robot anticipation controllers.
//!
//! [`sia`] follows the most synchronous human of the previous iteration and
//! fires on that person's early events. [`eca`] averages the previous
//! iteration's event clusters into a fixed schedule. [`Controller`] wraps both
//! behind one clocked interface for the simulator and the live server.

pub mod eca;
pub mod sia;

use serde::{Deserialize, Serialize};

pub use eca::{
    cluster_events, cluster_timed_events, eca_predict, eca_tick, EcaState, EventCluster,
    PlannedCommand,
};
pub use sia::{rank_humans, sia_begin_iteration, sia_on_event, ScheduledEvent, SiaState};

use crate::error::{Error, Result};
use crate::model::{AgentId, EventType, SessionRecording, SyncParams, TimedEvent};
use crate::scalar::{Scalar, Weight};
use crate::sync::IndexReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    MoveForward,
    MoveBackward,
    Stop,
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RobotCommand<T: Scalar> {
    pub kind: CommandKind,
    pub issue_t: T,
    /// The human event this command reproduces.
    pub source: EventType,
}

impl<T: Scalar> RobotCommand<T> {
    /// The event the robot logs once the command executes. Claps become turns.
    pub fn manifest_event(&self) -> EventType {
        match self.source.regular() {
            EventType::Clap => EventType::Turn,
            other => other,
        }
    }
}

/// Command for a regular event; early variants never map to a command.
pub fn command_for(e: EventType) -> Option<CommandKind> {
    match e {
        EventType::StartForward => Some(CommandKind::MoveForward),
        EventType::StartBackward => Some(CommandKind::MoveBackward),
        EventType::StopForward | EventType::StopBackward => Some(CommandKind::Stop),
        EventType::Clap | EventType::Turn => Some(CommandKind::Turn),
        _ => None,
    }
}

/// The human with the largest individual index; ties go to the lowest id.
pub fn most_synchronous_person<W: Weight>(
    report: &IndexReport<W>,
    humans: &[AgentId],
) -> Result<AgentId> {
    let mut candidates: Vec<AgentId> = humans.iter().copied().filter(|a| !a.is_robot()).collect();
    candidates.sort();
    let mut best: Option<(AgentId, W)> = None;
    for a in candidates {
        let i = report.individual(a).ok_or(Error::UnknownAgent(a.id))?;
        match best {
            Some((_, b)) if !(i > b) => {}
            _ => best = Some((a, i)),
        }
    }
    best.map(|(a, _)| a).ok_or(Error::EmptyGroup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Sia,
    Eca,
    None,
}

impl ControllerKind {
    pub fn method(self) -> crate::model::Method {
        match self {
            ControllerKind::Sia => crate::model::Method::Sia,
            ControllerKind::Eca => crate::model::Method::Eca,
            ControllerKind::None => crate::model::Method::HumansOnly,
        }
    }
}

#[derive(Debug, Clone)]
enum State<T: Scalar> {
    Idle,
    Sia(SiaState<T>),
    Eca(EcaState<T>),
}

/// Single-owner controller state machine. The caller serializes calls and
/// supplies a monotone clock.
#[derive(Debug, Clone)]
pub struct Controller<T: Scalar> {
    kind: ControllerKind,
    params: SyncParams<T>,
    state: State<T>,
}

impl<T: Scalar> Controller<T> {
    pub fn new(kind: ControllerKind, params: SyncParams<T>) -> Self {
        Controller {
            kind,
            params,
            state: State::Idle,
        }
    }

    pub fn kind(&self) -> ControllerKind {
        self.kind
    }

    /// Prepares for `iteration` using the finished iteration before it. The
    /// first iteration has no history, so the robot idles through it. On
    /// error the controller idles for the iteration and the error is returned.
    pub fn begin_iteration(&mut self, rec: &SessionRecording<T>, iteration: usize) -> Result<()> {
        self.state = State::Idle;
        if iteration == 0 {
            return Ok(());
        }
        let finished = iteration - 1;
        match self.kind {
            ControllerKind::None => {}
            ControllerKind::Sia => {
                self.state = State::Sia(sia_begin_iteration(rec, finished, &self.params)?);
            }
            ControllerKind::Eca => {
                let windows = rec.iterations();
                let prev = windows.get(finished).ok_or(Error::InvalidIteration(finished))?;
                let next = windows.get(iteration).ok_or(Error::InvalidIteration(iteration))?;
                let humans: Vec<_> = rec
                    .series()
                    .iter()
                    .filter(|s| !s.agent().is_robot())
                    .cloned()
                    .collect();
                let clusters: Vec<_> =
                    cluster_events(&humans, finished as u32, self.params.cluster_epsilon)
                        .into_iter()
                        .map(|c| c.shifted(-prev.start))
                        .collect();
                self.state = State::Eca(eca_predict(&clusters)?.anchored(next.start));
            }
        }
        Ok(())
    }

    pub fn on_event(&mut self, ev: &TimedEvent<T>) -> Vec<RobotCommand<T>> {
        let mut out = self.tick(ev.t);
        if let State::Sia(st) = &mut self.state {
            out.extend(sia_on_event(st, ev, ev.t));
        }
        out
    }

    pub fn tick(&mut self, now: T) -> Vec<RobotCommand<T>> {
        match &mut self.state {
            State::Idle => Vec::new(),
            State::Sia(st) => st.tick(now),
            State::Eca(st) => st.tick(now),
        }
    }

    pub fn next_deadline(&self) -> Option<T> {
        match &self.state {
            State::Idle => None,
            State::Sia(st) => st.next_deadline(),
            State::Eca(st) => st.next_deadline(),
        }
    }

    pub fn end_iteration(&mut self) -> Vec<RobotCommand<T>> {
        let out = match &mut self.state {
            State::Sia(st) => st.end_iteration().into_iter().collect(),
            _ => Vec::new(),
        };
        self.state = State::Idle;
        out
    }

    /// The human currently followed, for SIA.
    pub fn msp(&self) -> Option<AgentId> {
        match &self.state {
            State::Sia(st) => Some(st.current_msp),
            _ => None,
        }
    }
}
