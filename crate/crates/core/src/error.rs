use thiserror::Error;

use crate::model::{EventKind, EventType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("early event type `{0}` is an anticipation trigger and cannot enter an index")]
    EarlyEventType(EventType),
    #[error("event kind `{0}` is absent from at least one series")]
    EmptyEventType(EventKind),
    #[error("both series are empty; no common basis for a pair index")]
    NoCommonBasis,
    #[error("agent {0} is not a member of the group")]
    UnknownAgent(u32),
    #[error("agent {0} has no outgoing edges")]
    IsolatedVertex(u32),
    #[error("group has {0} member(s); at least 2 are needed")]
    DegenerateGroup(usize),
    #[error("no human candidates to choose from")]
    EmptyGroup,
    #[error("the iteration produced no event clusters")]
    EmptyIteration,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("iteration {0} is out of range")]
    InvalidIteration(usize),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
