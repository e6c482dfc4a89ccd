//! Synchronization-index anticipation: follow the most synchronous person of
//! the previous iteration, firing on their early events.

use serde::{Deserialize, Serialize};

use super::{command_for, most_synchronous_person, RobotCommand};
use crate::error::{Error, Result};
use crate::model::{AgentId, EventType, SessionRecording, SyncParams, TimedEvent};
use crate::scalar::Scalar;
use crate::sync::{build_gtg, group_index, EdgePolicy, IndexReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScheduledEvent<T: Scalar> {
    pub event: EventType,
    /// Iteration-relative seconds, taken from the MSP's previous iteration.
    pub at: T,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SiaState<T: Scalar> {
    pub current_msp: AgentId,
    pub msp_schedule: Vec<ScheduledEvent<T>>,
    /// Early events of the MSP seen within the last `early_window_delta`,
    /// as `(event, absolute t)`.
    pub pending_early: Vec<(EventType, T)>,
    pub iteration_start: T,
    pub iteration_end: T,
    params: SyncParams<T>,
    turned: bool,
}

/// Individual indices of one iteration over the fully connected graph, and
/// the human with the highest one.
pub fn rank_humans<T: Scalar>(
    rec: &SessionRecording<T>,
    iteration: usize,
    p: &SyncParams<T>,
) -> Result<(AgentId, IndexReport<T>)> {
    let g = build_gtg(rec, iteration, EdgePolicy::FullyConnected, p)?;
    let report = group_index(&g)?;
    let msp = most_synchronous_person(&report, &rec.humans())?;
    Ok((msp, report))
}

/// Picks MSP(`finished_iter`) and stores their iteration-relative regular
/// events as the schedule for the following iteration.
pub fn sia_begin_iteration<T: Scalar>(
    rec: &SessionRecording<T>,
    finished_iter: usize,
    p: &SyncParams<T>,
) -> Result<SiaState<T>> {
    let windows = rec.iterations();
    let finished = windows
        .get(finished_iter)
        .ok_or(Error::InvalidIteration(finished_iter))?;
    let next = windows
        .get(finished_iter + 1)
        .ok_or(Error::InvalidIteration(finished_iter + 1))?;
    let (msp, _) = rank_humans(rec, finished_iter, p)?;
    let series = rec.series_of(msp).ok_or(Error::UnknownAgent(msp.id))?;
    let msp_schedule = series
        .events()
        .iter()
        .filter(|e| e.iteration == finished_iter as u32 && !e.event.is_early())
        .map(|e| ScheduledEvent {
            event: e.event,
            at: e.t - finished.start,
            fired: false,
        })
        .collect();
    Ok(SiaState {
        current_msp: msp,
        msp_schedule,
        pending_early: Vec::new(),
        iteration_start: next.start,
        iteration_end: next.end,
        params: *p,
        turned: false,
    })
}

impl<T: Scalar> SiaState<T> {
    /// Absolute time at which an unfired entry fires without a trigger:
    /// claps at their recorded time, motion events one window late.
    fn fallback_due(&self, entry: &ScheduledEvent<T>) -> T {
        let base = self.iteration_start + entry.at;
        if entry.event.is_motion() {
            base + self.params.early_window_delta
        } else {
            base
        }
    }

    fn fire(&mut self, idx: usize, issue_t: T) -> Option<RobotCommand<T>> {
        let entry = &mut self.msp_schedule[idx];
        entry.fired = true;
        let source = entry.event;
        if !source.is_motion() {
            self.turned = true;
        }
        command_for(source).map(|kind| RobotCommand {
            kind,
            issue_t,
            source,
        })
    }

    /// Late-fires everything whose fallback time is at or before `now`.
    pub fn tick(&mut self, now: T) -> Vec<RobotCommand<T>> {
        let mut due: Vec<(T, usize)> = self
            .msp_schedule
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.fired)
            .map(|(i, e)| (self.fallback_due(e), i))
            .filter(|(t, _)| *t <= now)
            .collect();
        due.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        due.into_iter().filter_map(|(t, i)| self.fire(i, t)).collect()
    }

    pub fn next_deadline(&self) -> Option<T> {
        self.msp_schedule
            .iter()
            .filter(|e| !e.fired)
            .map(|e| self.fallback_due(e))
            .fold(None, |acc: Option<T>, t| Some(acc.map_or(t, |a| a.min(t))))
    }

    /// Iteration rollover. If the MSP's schedule carried no clap the robot
    /// still turns, at the boundary.
    pub fn end_iteration(&mut self) -> Option<RobotCommand<T>> {
        let has_clap = self.msp_schedule.iter().any(|e| !e.event.is_motion());
        if has_clap || self.turned {
            return None;
        }
        self.turned = true;
        command_for(EventType::Clap).map(|kind| RobotCommand {
            kind,
            issue_t: self.iteration_end,
            source: EventType::Clap,
        })
    }
}

/// Handles one incoming event. Only early events of the current MSP matter:
/// when one lands within `early_window_delta` of an unfired scheduled event
/// of the same kind and enough matching early events are pending, the mapped
/// command is issued immediately.
pub fn sia_on_event<T: Scalar>(
    st: &mut SiaState<T>,
    ev: &TimedEvent<T>,
    now: T,
) -> Option<RobotCommand<T>> {
    if ev.agent != st.current_msp || !ev.event.is_early() {
        return None;
    }
    let delta = st.params.early_window_delta;
    st.pending_early.retain(|&(_, t)| now - t <= delta);
    st.pending_early.push((ev.event, ev.t));

    let target = ev.event.regular();
    let rel_now = now - st.iteration_start;
    let idx = st
        .msp_schedule
        .iter()
        .position(|e| !e.fired && e.event == target && (rel_now - e.at).abs() <= delta)?;
    let scheduled = st.iteration_start + st.msp_schedule[idx].at;
    let support = st
        .pending_early
        .iter()
        .filter(|&&(e, t)| e == ev.event && (t - scheduled).abs() <= delta)
        .count();
    if support < st.params.early_count_threshold as usize {
        return None;
    }
    st.pending_early
        .retain(|&(e, t)| !(e == ev.event && (t - scheduled).abs() <= delta));
    st.fire(idx, now)
}
