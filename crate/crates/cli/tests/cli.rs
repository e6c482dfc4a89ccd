mod common;

use std::fs;
use std::time::Duration;

use common::*;

const TAU: f64 = 0.25;

fn fixture_pair() -> [String; 2] {
    [
        path_str(&fixture("session_sia.log")).to_string(),
        path_str(&fixture("session_eca.log")).to_string(),
    ]
}

#[test]
fn analyze_fixture_matches_golden_csv_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let [sia, eca] = fixture_pair();
    let out = run(&["analyze", &sia, &eca, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let produced = fs::read(dir.path().join("gsi.csv")).unwrap();
    let expected = fs::read(golden("fixture_pair_gsi.csv")).unwrap();
    assert_eq!(text(&produced), text(&expected));
}

#[test]
fn golden_gsi_agrees_with_the_oracle_pipeline() {
    let logs: Vec<String> = fixture_pair().iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    let oracle = oracle_gsi_rows(&logs, TAU);
    let golden = csv_gsi_rows(&fs::read_to_string(golden("fixture_pair_gsi.csv")).unwrap());
    let gap = max_gsi_gap(&oracle, &golden);
    assert!(gap <= 1e-9, "largest oracle gap {gap:e}");
}

#[test]
fn golden_msp_column_agrees_with_the_oracle() {
    let text = fs::read_to_string(fixture("session_sia.log")).unwrap();
    let per = oracle_parse(&text, 0).gsi(TAU);
    let golden = fs::read_to_string(golden("fixture_pair_gsi.csv")).unwrap();
    let msps: Vec<String> = golden
        .lines()
        .filter(|l| l.starts_with("fixture,SIA,") && !l.contains(",mean,"))
        .map(|l| l.split(',').nth(4).unwrap().to_string())
        .collect();
    let expected: Vec<String> = per
        .iter()
        .map(|(_, m)| m.map(|id| format!("human#{id}")).unwrap_or_default())
        .collect();
    assert_eq!(msps, expected);
}

#[test]
fn analyze_fixture_histogram_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let [sia, eca] = fixture_pair();
    let out = run(&["analyze", &sia, &eca, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["ta_histogram.dat", "ta_histogram.txt"] {
        let produced = fs::read_to_string(dir.path().join(name)).unwrap();
        let expected = fs::read_to_string(golden(&format!("fixture_pair_{name}"))).unwrap();
        assert_eq!(produced, expected, "{name}");
    }
}

#[test]
fn analyze_reports_the_winner_and_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let [sia, eca] = fixture_pair();
    let out = run(&["analyze", &sia, &eca, "--out", path_str(dir.path())]);
    let stdout = text(&out.stdout);
    assert!(stdout.contains("fixture: winner ECA"), "{stdout}");
    for f in ["gsi.csv", "pairs.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["winner_counts"]["eca"], 1);
    assert_eq!(report["sessions"].as_array().unwrap().len(), 2);
}

#[test]
fn one_agent_log_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", path_str(&fixture("one_agent.log")), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("need ≥2 agents"), "{}", text(&out.stderr));
}

#[test]
fn tight_spacing_exits_two_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", path_str(&fixture("tight_spacing.log")), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("clamped to 1 for clap"), "{stderr}");
    assert!(stderr.contains("closer than 2*tau"), "{stderr}");
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"clamped\""));
}

#[test]
fn malformed_log_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(fixture("session_sia.log")).unwrap();
    let mut lines: Vec<String> = src.lines().map(str::to_string).collect();
    lines[5] = lines[5].replacen("\"t\":", "\"t\" ", 1);
    let bad = dir.path().join("bad.log");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = run(&["analyze", path_str(&bad), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("line 6, column 6"), "{stderr}");
}

#[test]
fn tau_flag_changes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let sia = path_str(&fixture("session_sia.log")).to_string();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["analyze", &sia, "--out", path_str(&a)]);
    run(&["analyze", &sia, "--tau", "0.1", "--out", path_str(&b)]);
    let ga = fs::read_to_string(a.join("gsi.csv")).unwrap();
    let gb = fs::read_to_string(b.join("gsi.csv")).unwrap();
    assert_ne!(ga, gb);
    let log = fs::read_to_string(fixture("session_sia.log")).unwrap();
    let gap = max_gsi_gap(&oracle_gsi_rows(&[log], 0.1), &csv_gsi_rows(&gb));
    assert!(gap <= 1e-9, "{gap:e}");
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["simulate", "--seed", "42", "--out", path_str(d)]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    for f in ["session.log", "gsi.csv", "pairs.csv", "report.json", "ta_histogram.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn different_seeds_give_different_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["simulate", "--seed", "1", "--out", path_str(&a)]);
    run(&["simulate", "--seed", "2", "--out", path_str(&b)]);
    assert_ne!(fs::read(a.join("session.log")).unwrap(), fs::read(b.join("session.log")).unwrap());
}

#[test]
fn simulate_without_controller_has_no_robot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--controller", "none", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let log = fs::read_to_string(dir.path().join("session.log")).unwrap();
    assert!(!log.contains("robot"), "robot present");
    assert!(log.lines().next().unwrap().contains("\"method\":\"HumansOnly\""));
    assert!(!dir.path().join("ta_histogram.dat").exists());
}

#[test]
fn simulated_log_analyzes_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    run(&["simulate", "--seed", "5", "--out", path_str(&sim)]);
    let again = dir.path().join("again");
    let out = run(&["analyze", path_str(&sim.join("session.log")), "--out", path_str(&again)]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["gsi.csv", "pairs.csv", "report.json"] {
        assert_eq!(fs::read(sim.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 3\n[params]\ntau = 0.25\ntua = 0.3\n").unwrap();
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("tua"), "{stderr}");
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn invalid_config_values_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[robot]\ndrop_rate = 1.5\n").unwrap();
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("drop_rate"));
}

#[test]
fn bundled_configs_load() {
    for name in ["default.toml", "heterogeneous.toml", "noiseless.toml"] {
        syncteam_cli::RunConfig::load(&repo_config(name)).unwrap_or_else(|e| panic!("{name}: {e:#}"));
    }
}

#[test]
fn compare_with_zero_runs_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["compare", "--runs", "0", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_noiseless_reports_wilcoxon_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("noiseless.toml");
    let out = run(&["compare", "--config", path_str(&cfg), "--runs", "3", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("Wilcoxon: not applicable"), "{stdout}");
    // The SIA robot's single out-edge halves its connectivity, so ECA takes
    // every noiseless run on GSI.
    assert!(stdout.contains("GSI winners: SIA 0 / ECA 3 / none 0"), "{stdout}");
    for f in ["compare.json", "compare.txt", "histogram_sia.dat", "histogram_eca.dat", "histogram_sia.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn compare_heterogeneous_sets_the_ta_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("heterogeneous.toml");
    let out = run(&["compare", "--config", path_str(&cfg), "--runs", "30", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(summary["sia_ta_lower"], true);
    let w = &summary["winner_counts"];
    let total = w["sia"].as_u64().unwrap() + w["eca"].as_u64().unwrap() + w["none"].as_u64().unwrap();
    assert_eq!(total, 30);
}

#[test]
fn compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        run(&["compare", "--runs", "4", "--seed", "9", "--out", path_str(d)]);
    }
    for f in ["compare.json", "histogram_sia.dat", "histogram_eca.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replay_without_connect_prints_protocol_lines() {
    let out = run(&["replay", path_str(&fixture("session_sia.log"))]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "HELLO replay 0.0");
    assert_eq!(*lines.last().unwrap(), "END replay");
    let events = lines.iter().filter(|l| l.starts_with("EV ")).count();
    assert_eq!(events, 211);
}

#[test]
fn replay_to_a_dead_port_is_fatal() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let addr = format!("127.0.0.1:{port}");
    let out = run(&["replay", path_str(&fixture("session_sia.log")), "--connect", &addr]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("cannot replay"), "{}", text(&out.stderr));
}

#[test]
fn replay_rejects_a_non_positive_speed() {
    let out = run(&["replay", path_str(&fixture("session_sia.log")), "--speed", "0"]);
    assert_ne!(out.status.code(), Some(0));
}

fn assert_parity(speed: &str) {
    let dir = tempfile::tempdir().unwrap();
    let log = fixture("session_sia.log");
    let offline = dir.path().join("offline");
    let out = run(&["analyze", path_str(&log), "--out", path_str(&offline)]);
    assert_eq!(out.status.code(), Some(0));
    let online = dir.path().join("online");
    let (replay, serve, elapsed) = serve_and_replay(&log, speed, &online);
    assert_eq!(replay, Some(0), "replay exit");
    assert_eq!(serve, Some(0), "serve exit");
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
    for f in ["gsi.csv", "pairs.csv", "report.json", "ta_histogram.dat", "ta_histogram.txt"] {
        assert_eq!(
            text(&fs::read(offline.join(f)).unwrap()),
            text(&fs::read(online.join(f)).unwrap()),
            "{f}"
        );
    }
    assert_eq!(fs::read(log).unwrap(), fs::read(online.join("session.log")).unwrap());
}

#[test]
fn serve_and_replay_at_full_speed_match_analyze() {
    assert_parity("inf");
}

#[test]
fn serve_and_replay_at_ten_times_match_analyze() {
    assert_parity("10");
}

#[test]
fn serve_logs_malformed_lines_and_keeps_the_session() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    let mut served = spawn_serve(dir.path(), &[]);
    let mut lines: Vec<String> = text(&run(&["replay", path_str(&fixture("session_sia.log"))]).stdout)
        .lines()
        .map(str::to_string)
        .collect();
    lines.insert(3, "this is not a protocol line".to_string());
    lines.insert(10, "EV replay x 0 clap 1.0".to_string());
    let mut conn = std::net::TcpStream::connect(&served.addr).unwrap();
    for l in &lines {
        writeln!(conn, "{l}").unwrap();
    }
    conn.shutdown(std::net::Shutdown::Write).unwrap();
    let code = wait_with_timeout(&mut served.child, Duration::from_secs(10));
    let mut stderr = String::new();
    std::io::Read::read_to_string(served.child.stderr.as_mut().unwrap(), &mut stderr).unwrap();
    assert_eq!(code, Some(2), "{stderr}");
    assert_eq!(stderr.matches("diagnostic:").count(), 2, "{stderr}");
    let log = fs::read(dir.path().join("session.log")).unwrap();
    assert_eq!(log, fs::read(fixture("session_sia.log")).unwrap());
}

#[test]
fn listen_address_comes_from_the_environment() {
    let help = std::process::Command::new(bin())
        .args(["serve", "--help"])
        .env("SYNCTEAM_LISTEN", "127.0.0.1:9999")
        .output()
        .unwrap();
    let h = text(&help.stdout);
    assert!(h.contains("SYNCTEAM_LISTEN"), "{h}");
    assert!(h.contains("127.0.0.1:9999"), "{h}");
}

#[test]
fn help_documents_every_flag_and_default() {
    let cases: &[(&str, &[&str])] = &[
        ("analyze", &["--config", "--tau", "--out", "syncteam-out"]),
        ("simulate", &["--config", "--seed", "--controller", "--out", "seed 0"]),
        ("compare", &["--config", "--runs", "--seed", "--out", "30"]),
        ("replay", &["--speed", "--connect", "default: inf"]),
        ("serve", &["--listen", "--config", "--controller", "--out", "--once", "127.0.0.1:7878", "default: none"]),
    ];
    for (cmd, needles) in cases {
        let out = run(&[cmd, "--help"]);
        let h = text(&out.stdout);
        for n in *needles {
            assert!(h.contains(n), "`{cmd} --help` lacks {n}:\n{h}");
        }
    }
    let top = text(&run(&["--help"]).stdout);
    assert!(top.contains("Exit codes"), "{top}");
}
