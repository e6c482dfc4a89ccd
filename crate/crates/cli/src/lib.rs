//! Library side of the `syncteam` command-line tool: the session log format,
//! the TOML run configuration and one function per subcommand.

pub mod commands;
pub mod config;
pub mod logfile;

pub use commands::{
    analyze_recordings, cmd_analyze, cmd_compare, cmd_replay, cmd_serve, cmd_simulate,
    parse_speed, write_analysis, ServeOptions, Status,
};
pub use config::RunConfig;
pub use logfile::{parse_log, read_log, write_log, write_recording, LogError, LogRecord, SessionLog};
