use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use syncteam::metrics::ta_histogram;
use syncteam::stream::{replay_to_addr, replay_to_writer, Ingestor, ReplayStats, Server};
use syncteam::{
    gsi_table, run_comparison, run_session, ComparisonSummary, ControllerKind, Params, Recording,
    Report,
};

use crate::config::RunConfig;
use crate::logfile::{read_log, write_recording};

/// How a command that did not fail finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Outputs were written but the input had validation problems.
    Diagnostics,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Diagnostics => 2,
        }
    }

    fn from_flag(diagnostics: bool) -> Status {
        if diagnostics {
            Status::Diagnostics
        } else {
            Status::Ok
        }
    }
}

pub const GSI_CSV: &str = "gsi.csv";
pub const PAIRS_CSV: &str = "pairs.csv";
pub const REPORT_JSON: &str = "report.json";
pub const TA_HISTOGRAM_DAT: &str = "ta_histogram.dat";
pub const TA_HISTOGRAM_TXT: &str = "ta_histogram.txt";
pub const SESSION_LOG: &str = "session.log";
pub const COMPARE_JSON: &str = "compare.json";
pub const COMPARE_TXT: &str = "compare.txt";

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Runs the GSI pipeline over recordings, rejecting groups too small to
/// measure.
pub fn analyze_recordings(recs: &[Recording], params: &Params) -> anyhow::Result<Report> {
    if recs.is_empty() {
        bail!("no recordings to analyze");
    }
    for (i, r) in recs.iter().enumerate() {
        let n = r.agents().len();
        if n < 2 {
            bail!("need ≥2 agents, recording {i} has {n}");
        }
    }
    Ok(gsi_table(recs, params)?)
}

/// Writes the GSI table, pair indices, JSON report and, when the robot has
/// timed events, the TA histogram in both data and text form.
pub fn write_analysis(report: &Report, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = vec![
        write_file(out, GSI_CSV, &report.gsi_csv())?,
        write_file(out, PAIRS_CSV, &report.pairs_csv())?,
        write_file(out, REPORT_JSON, &report.to_json())?,
    ];
    let samples: Vec<_> = report
        .sessions
        .iter()
        .flat_map(|s| s.iterations.iter().flat_map(|it| it.ta.iter().copied()))
        .collect();
    if !samples.is_empty() {
        let h = ta_histogram(&samples);
        let title = "timing appropriateness";
        written.push(write_file(out, TA_HISTOGRAM_DAT, &h.to_gnuplot(title))?);
        written.push(write_file(out, TA_HISTOGRAM_TXT, &h.to_text_plot(title))?);
    }
    Ok(written)
}

/// One line per session plus one per diagnostic.
pub fn analysis_summary(report: &Report) -> String {
    let mut s = String::new();
    for sess in &report.sessions {
        let per: Vec<String> = sess.iterations.iter().map(|it| format!("{:.4}", it.gsi)).collect();
        let _ = writeln!(
            s,
            "{} {}: mean GSI {:.4} [{}]",
            sess.group,
            sess.method,
            sess.mean_gsi,
            per.join(", ")
        );
    }
    for c in &report.comparisons {
        let _ = writeln!(s, "{}: winner {}", c.group, c.winner.token());
    }
    s
}

fn report_diagnostics(report: &Report, err: &mut impl Write) {
    for d in &report.diagnostics {
        let it = d.iteration.map(|i| format!(" iteration {i}")).unwrap_or_default();
        let _ = writeln!(err, "diagnostic: {} {}{}: {}", d.group, d.method, it, d.detail);
    }
}

pub fn cmd_analyze(
    logs: &[PathBuf],
    params: &Params,
    out: &Path,
    stdout: &mut impl Write,
    stderr: &mut impl Write,
) -> anyhow::Result<Status> {
    params.validate()?;
    let mut recs = Vec::with_capacity(logs.len());
    for p in logs {
        recs.push(read_log(p)?.recording);
    }
    let report = analyze_recordings(&recs, params)?;
    write_analysis(&report, out)?;
    write!(stdout, "{}", analysis_summary(&report))?;
    report_diagnostics(&report, stderr);
    Ok(Status::from_flag(report.has_diagnostics()))
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    stdout: &mut impl Write,
    stderr: &mut impl Write,
) -> anyhow::Result<Status> {
    let sim = cfg.sim_config();
    sim.validate()?;
    let mut rec = run_session(&sim)?;
    if let Some(g) = &cfg.group {
        rec = rec.with_metadata("group", g.clone());
    }
    ensure_dir(out)?;
    write_file(out, SESSION_LOG, &write_recording(&rec))?;
    let report = analyze_recordings(std::slice::from_ref(&rec), &cfg.params)?;
    write_analysis(&report, out)?;
    let events: usize = rec.series().iter().map(|s| s.len()).sum();
    writeln!(
        stdout,
        "simulated {} agents, {} events, seed {}",
        rec.agents().len(),
        events,
        cfg.seed
    )?;
    write!(stdout, "{}", analysis_summary(&report))?;
    report_diagnostics(&report, stderr);
    Ok(Status::from_flag(report.has_diagnostics()))
}

/// Plain-text summary of a comparison.
pub fn comparison_text(s: &ComparisonSummary) -> String {
    let mut t = String::new();
    let w = &s.winner_counts;
    let _ = writeln!(t, "runs: {}", s.runs.len());
    let _ = writeln!(t, "GSI winners: SIA {} / ECA {} / none {}", w.sia, w.eca, w.none);
    if w.sia == 0 && w.eca == 0 {
        let _ = writeln!(t, "outcome: no winner");
    }
    let _ = writeln!(t, "SIA win fraction: {:.4}", s.sia_win_fraction);
    for (name, st) in [("SIA", &s.ta_sia), ("ECA", &s.ta_eca)] {
        let _ = writeln!(t, "TA {name}: n {} mean {:.6} sd {:.6}", st.n, st.mean, st.sd);
    }
    let _ = writeln!(t, "SIA TA mean lower: {}", s.sia_ta_lower);
    match &s.wilcoxon {
        Some(r) => {
            let _ = writeln!(
                t,
                "Wilcoxon (d = SIA - ECA): pairs {} effective {} W+ {} z {:.4} p {:.6} r {:.4} ({:?})",
                r.n_pairs, r.n_effective, r.w, r.z, r.p_two_sided, r.effect_r, r.method
            );
        }
        None => {
            let _ = writeln!(
                t,
                "Wilcoxon: not applicable (all {} paired differences are zero)",
                s.paired_ta.len()
            );
        }
    }
    t
}

pub fn cmd_compare(
    cfg: &RunConfig,
    runs: usize,
    out: &Path,
    stdout: &mut impl Write,
) -> anyhow::Result<ComparisonSummary> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let summary = run_comparison(&cfg.sim_config(), runs)?;
    ensure_dir(out)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(out, COMPARE_JSON, &json)?;
    let text = comparison_text(&summary);
    write_file(out, COMPARE_TXT, &text)?;
    for (name, h) in [("sia", &summary.histogram_sia), ("eca", &summary.histogram_eca)] {
        let title = format!("timing appropriateness, {}", name.to_uppercase());
        write_file(out, &format!("histogram_{name}.dat"), &h.to_gnuplot(&title))?;
        write_file(out, &format!("histogram_{name}.txt"), &h.to_text_plot(&title))?;
    }
    write!(stdout, "{text}")?;
    writeln!(stdout)?;
    write!(stdout, "{}", summary.histogram_sia.to_text_plot("TA, SIA"))?;
    writeln!(stdout)?;
    write!(stdout, "{}", summary.histogram_eca.to_text_plot("TA, ECA"))?;
    Ok(summary)
}

/// Replays a log to a server, or prints the protocol lines when no address
/// is given.
pub fn cmd_replay(
    log: &Path,
    speed: f64,
    connect: Option<&str>,
    stdout: &mut impl Write,
) -> anyhow::Result<ReplayStats> {
    if !(speed > 0.0) {
        bail!("--speed must be positive, got {speed}");
    }
    let rec = read_log(log)?.recording;
    match connect {
        Some(addr) => {
            replay_to_addr(addr, &rec, speed).with_context(|| format!("cannot replay to {addr}"))
        }
        None => Ok(replay_to_writer(&rec, speed, stdout)?),
    }
}

pub struct ServeOptions {
    pub listen: String,
    pub params: Params,
    pub controller: ControllerKind,
    pub out: PathBuf,
    pub once: bool,
}

/// Serves sessions until interrupted, or for one session with `once`. Each
/// finished session is written as a log plus the analysis files; with
/// `once` they go straight into `out`, otherwise into numbered
/// subdirectories. `on_ready` sees the bound address before the first
/// connection is accepted.
pub fn cmd_serve(
    opts: &ServeOptions,
    on_ready: impl FnOnce(std::net::SocketAddr),
    stdout: &mut impl Write,
    stderr: &mut impl Write,
) -> anyhow::Result<Status> {
    opts.params.validate()?;
    let server =
        Server::bind(&opts.listen).with_context(|| format!("cannot listen on {}", opts.listen))?;
    on_ready(server.local_addr()?);
    let mut any_diagnostics = false;
    for n in 1usize.. {
        let ingestor = Ingestor::new(opts.params).with_controller(opts.controller);
        let outcome = server.serve_session(ingestor, |d| {
            let _ = writeln!(stderr, "diagnostic: {d}");
        })?;
        any_diagnostics |= !outcome.diagnostics.is_empty();
        let dir = if opts.once {
            opts.out.clone()
        } else {
            opts.out.join(format!("session-{n:03}"))
        };
        let result = outcome
            .recording
            .map_err(anyhow::Error::from)
            .and_then(|rec| {
                let report = analyze_recordings(std::slice::from_ref(&rec), &opts.params)?;
                ensure_dir(&dir)?;
                write_file(&dir, SESSION_LOG, &write_recording(&rec))?;
                write_analysis(&report, &dir)?;
                Ok(report)
            });
        match result {
            Ok(report) => {
                writeln!(stdout, "session {n} written to {}", dir.display())?;
                write!(stdout, "{}", analysis_summary(&report))?;
                stdout.flush()?;
                report_diagnostics(&report, stderr);
                any_diagnostics |= report.has_diagnostics();
            }
            Err(e) if opts.once => return Err(e.context(format!("session {n}"))),
            Err(e) => {
                let _ = writeln!(stderr, "session {n} not written: {e:#}");
            }
        }
        if opts.once {
            break;
        }
    }
    Ok(Status::from_flag(any_diagnostics))
}

/// Parses a replay speed; `inf` (or `∞`) means as fast as possible.
pub fn parse_speed(s: &str) -> Result<f64, String> {
    let v = match s.trim() {
        "∞" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| format!("`{s}` is not a number or `inf`"))?,
    };
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("speed must be positive, got {s}"))
    }
}
