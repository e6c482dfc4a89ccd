//! Group synchronization analytics for multi-agent movement.
//!
//! Discrete, timestamped task-level events (start/stop forward, start/stop
//! backward, clap) are compared across agents with an event-synchronization
//! measure. Pair indices form a weighted group graph from which individual
//! and group indices are read. Two anticipation controllers drive a robot
//! member of the group, a seeded simulator produces sessions, and the metrics
//! module scores them. The [`stream`] module ingests live events over TCP.
//!
//! Numeric code is generic: graph arithmetic over any [`Weight`] (floats or
//! exact rationals), time arithmetic over any [`Scalar`] (f32 or f64). The
//! aliases below fix f64 for everyday use.

pub mod anticipate;
pub mod error;
pub mod metrics;
pub mod model;
mod scalar;
pub mod sim;
pub mod stream;
pub mod sync;

pub use error::{Error, Result};
pub use scalar::{Scalar, Weight};

pub use anticipate::{
    command_for, most_synchronous_person, CommandKind, Controller, ControllerKind, RobotCommand,
};
pub use metrics::{
    gsi_table, ta_histogram, timing_appropriateness, wilcoxon_signed_rank, AnalysisReport,
    Histogram, WilcoxonResult, Winner,
};
pub use model::{
    same_kind, validate_series, AgentId, AgentKind, EventKind, EventSeries, EventType,
    IterationWindow, Method, RecordingBuilder, SessionRecording, SyncParams, TimedEvent,
};
pub use sim::{run_comparison, run_session, ComparisonSummary, SimConfig};
pub use sync::{
    build_gtg, connectivity, directed_count, event_sync, group_index, individual_index,
    pair_sync_index, EdgePolicy, GroupTopologyGraph, IndexReport, PairIndex,
};

pub type Event = model::TimedEvent<f64>;
pub type Series = model::EventSeries<f64>;
pub type Recording = model::SessionRecording<f64>;
pub type Params = model::SyncParams<f64>;
pub type Gtg = sync::GroupTopologyGraph<f64>;
pub type Report = metrics::AnalysisReport<f64>;
pub type Pair = sync::PairIndex<f64>;
pub type Cluster = anticipate::EventCluster<f64>;
pub type Command = anticipate::RobotCommand<f64>;
pub type TaSample = metrics::TaSample<f64>;

pub type Series32 = model::EventSeries<f32>;
pub type Params32 = model::SyncParams<f32>;
pub type Gtg32 = sync::GroupTopologyGraph<f32>;
