use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use syncteam_cli::config::RunConfig;
use syncteam_cli::{cmd_analyze, cmd_compare, cmd_replay, cmd_serve, cmd_simulate, parse_speed};
use syncteam_cli::{ServeOptions, Status};
use syncteam::ControllerKind;

/// Group synchronization analytics for human-robot dance sessions.
///
/// Exit codes: 0 success, 1 fatal error, 2 finished with validation
/// diagnostics (outputs are still written).
#[derive(Parser, Debug)]
#[command(name = "syncteam", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ControllerArg {
    Sia,
    Eca,
    None,
}

impl From<ControllerArg> for ControllerKind {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Sia => ControllerKind::Sia,
            ControllerArg::Eca => ControllerKind::Eca,
            ControllerArg::None => ControllerKind::None,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute per-iteration GSI, pair indices and robot timing for session logs.
    ///
    /// Writes gsi.csv, pairs.csv, report.json and, when a robot acted,
    /// ta_histogram.dat / ta_histogram.txt. SIA and ECA logs sharing a
    /// `group` metadata value are compared.
    Analyze {
        /// Session log files (JSON lines).
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// TOML config; only its [params] and [output] sections are used.
        /// Without it: tau 0.25, cluster_epsilon 0.5, early_window_delta 0.5,
        /// early_count_threshold 1.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Co-occurrence lag tau in seconds; overrides the config.
        #[arg(long)]
        tau: Option<f64>,
        /// Output directory [default: [output] dir, else syncteam-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one seeded session and write its log and analysis.
    ///
    /// Writes session.log plus the analyze outputs.
    Simulate {
        /// TOML run config [default: built-in defaults, 3 dancers, SIA, seed 0].
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Robot controller; overrides the config.
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        /// Output directory [default: [output] dir, else syncteam-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run SIA and ECA on identical seeded humans and compare them.
    ///
    /// Writes compare.json, compare.txt and histogram_{sia,eca}.{dat,txt}.
    Compare {
        /// TOML run config [default: built-in defaults].
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of paired runs, seeds seed..seed+N [default: config `runs`, else 30].
        #[arg(long)]
        runs: Option<usize>,
        /// First seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: [output] dir, else syncteam-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a session log over the line protocol.
    Replay {
        /// Session log to replay.
        log: PathBuf,
        /// Time scale: 1 is real time, 10 ten times faster, inf no pacing.
        #[arg(long, default_value = "inf", value_parser = parse_speed)]
        speed: f64,
        /// Server address HOST:PORT; without it the lines go to stdout.
        #[arg(long)]
        connect: Option<String>,
    },
    /// Accept line-protocol clients and analyze each session when it ends.
    ///
    /// Prints `listening on ADDR` once bound. Each session's log and analysis
    /// go to OUT/session-NNN, or to OUT itself with --once.
    Serve {
        /// Address to bind.
        #[arg(long, env = "SYNCTEAM_LISTEN", default_value = "127.0.0.1:7878")]
        listen: String,
        /// TOML config; its [params] and [output] sections are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Live controller run against incoming events.
        #[arg(long, value_enum, default_value = "none")]
        controller: ControllerArg,
        /// Output directory [default: [output] dir, else syncteam-out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit after the first session ends.
        #[arg(long)]
        once: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let mut stdout = io::stdout();
    let mut stderr = io::stderr();
    match cli.command {
        Command::Analyze {
            logs,
            config,
            tau,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let mut params = cfg.params;
            if let Some(t) = tau {
                params.tau = t;
            }
            cmd_analyze(&logs, &params, &cfg.out_dir(out.as_deref()), &mut stdout, &mut stderr)
        }
        Command::Simulate {
            config,
            seed,
            controller,
            out,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(c) = controller {
                cfg.controller = c.into();
            }
            let out = cfg.out_dir(out.as_deref());
            cmd_simulate(&cfg, &out, &mut stdout, &mut stderr)
        }
        Command::Compare {
            config,
            runs,
            seed,
            out,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = cfg.out_dir(out.as_deref());
            cmd_compare(&cfg, runs.unwrap_or(cfg.runs), &out, &mut stdout)?;
            Ok(Status::Ok)
        }
        Command::Replay {
            log,
            speed,
            connect,
        } => {
            let stats = cmd_replay(&log, speed, connect.as_deref(), &mut stdout)?;
            if connect.is_some() {
                writeln!(
                    stderr,
                    "replayed {} events ({} lines) in {:.3} s",
                    stats.events,
                    stats.lines,
                    stats.elapsed.as_secs_f64()
                )?;
            }
            Ok(Status::Ok)
        }
        Command::Serve {
            listen,
            config,
            controller,
            out,
            once,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let opts = ServeOptions {
                listen,
                params: cfg.params,
                controller: controller.into(),
                out: cfg.out_dir(out.as_deref()),
                once,
            };
            let mut ready_out = io::stdout();
            cmd_serve(
                &opts,
                |addr| {
                    let _ = writeln!(ready_out, "listening on {addr}");
                    let _ = ready_out.flush();
                },
                &mut stdout,
                &mut stderr,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
