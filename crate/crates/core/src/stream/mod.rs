//! Live event ingestion over a newline-delimited text protocol, and replay
//! of recorded sessions through the same path.

mod ingest;
mod protocol;
mod replay;
mod server;

pub use ingest::{ClientSession, IngestOutcome, Ingestor};
pub use protocol::{parse_line, Message, ProtocolError, WireEvent};
pub use replay::{replay_into, replay_plan, replay_to_addr, replay_to_writer, ReplayStats, REPLAY_CLIENT};
pub use server::{Server, SessionOutcome};
