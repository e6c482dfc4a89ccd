//! Shared helpers for the CLI test targets: paths, process runners, and an
//! oracle pipeline that recomputes GSI tables straight from log text.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_syncteam"))
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("SYNCTEAM_LISTEN")
        .output()
        .expect("spawn syncteam")
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A `syncteam serve --once` child and the address it announced.
pub struct Served {
    pub child: Child,
    pub addr: String,
}

pub fn spawn_serve(out: &Path, extra: &[&str]) -> Served {
    let mut child = Command::new(bin())
        .args(["serve", "--listen", "127.0.0.1:0", "--once", "--out", path_str(out)])
        .args(extra)
        .env_remove("SYNCTEAM_LISTEN")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn serve");
    let stdout = child.stdout.take().expect("serve stdout");
    let mut first = String::new();
    let mut reader = BufReader::new(stdout);
    reader.read_line(&mut first).expect("serve announces its address");
    let addr = first
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected serve banner {first:?}"))
        .to_string();
    // Keep draining stdout so the server never blocks on a full pipe.
    std::thread::spawn(move || {
        let mut sink = String::new();
        while reader.read_line(&mut sink).map(|n| n > 0).unwrap_or(false) {
            sink.clear();
        }
    });
    Served { child, addr }
}

/// Serves one session, replays `log` into it at `speed`, and returns the
/// server's exit code and the wall time of the whole exchange.
pub fn serve_and_replay(log: &Path, speed: &str, out: &Path) -> (Option<i32>, Option<i32>, Duration) {
    let started = Instant::now();
    let mut served = spawn_serve(out, &[]);
    let replay = run(&["replay", path_str(log), "--speed", speed, "--connect", &served.addr]);
    let status = wait_with_timeout(&mut served.child, Duration::from_secs(30));
    (replay.status.code(), status, started.elapsed())
}

pub fn wait_with_timeout(child: &mut Child, limit: Duration) -> Option<i32> {
    let start = Instant::now();
    loop {
        if let Some(s) = child.try_wait().expect("poll child") {
            return s.code();
        }
        if start.elapsed() > limit {
            let _ = child.kill();
            let _ = child.wait();
            return None;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

// ---------------------------------------------------------------------------
// Oracle pipeline
// ---------------------------------------------------------------------------

/// One directed co-occurrence term: 1 when `a` follows `b` by less than
/// `tau`, one half when they coincide.
pub fn j(a: f64, b: f64, tau: f64) -> f64 {
    if a == b {
        0.5
    } else if a - b > 0.0 && a - b < tau {
        1.0
    } else {
        0.0
    }
}

/// Q for one event type by full pairwise enumeration, unclamped.
pub fn brute_q(xs: &[f64], ys: &[f64], tau: f64) -> f64 {
    let mut c = 0.0;
    for &x in xs {
        for &y in ys {
            c += j(x, y, tau) + j(y, x, tau);
        }
    }
    c / ((xs.len() * ys.len()) as f64).sqrt()
}

/// Event-count weighted pair index over per-kind time lists.
pub fn brute_pair(x: &BTreeMap<String, Vec<f64>>, y: &BTreeMap<String, Vec<f64>>, tau: f64) -> f64 {
    let kinds: BTreeSet<&String> = x.keys().chain(y.keys()).collect();
    let empty = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for k in kinds {
        let xs = x.get(k).unwrap_or(&empty);
        let ys = y.get(k).unwrap_or(&empty);
        let w = (xs.len() + ys.len()) as f64;
        let q = if xs.is_empty() || ys.is_empty() {
            0.0
        } else {
            brute_q(xs, ys, tau).min(1.0)
        };
        num += q * w;
        den += w;
    }
    assert!(den > 0.0, "pair without any events");
    num / den
}

#[derive(Debug, Clone)]
pub struct OracleAgent {
    pub id: u64,
    pub robot: bool,
}

/// A session log decoded without any of the crate's types.
#[derive(Debug, Clone)]
pub struct OracleLog {
    pub group: String,
    pub method: String,
    pub agents: Vec<OracleAgent>,
    pub iterations: usize,
    /// (iteration, agent id) -> kind -> times of regular events.
    pub times: BTreeMap<(u64, u64), BTreeMap<String, Vec<f64>>>,
}

fn kind_of(event: &str) -> String {
    let base = event.strip_prefix("early_").unwrap_or(event);
    if base == "turn" {
        "clap".to_string()
    } else {
        base.to_string()
    }
}

pub fn oracle_parse(text: &str, index: usize) -> OracleLog {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let mut agents: Vec<OracleAgent> = header["agents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| OracleAgent {
            id: a["id"].as_u64().unwrap(),
            robot: a["kind"] == "robot",
        })
        .collect();
    agents.sort_by_key(|a| a.id);
    let mut times: BTreeMap<(u64, u64), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for l in lines {
        let v: Value = serde_json::from_str(l).unwrap();
        if v["early"].as_bool().unwrap() {
            continue;
        }
        let key = (v["iteration"].as_u64().unwrap(), v["agent"].as_u64().unwrap());
        times
            .entry(key)
            .or_default()
            .entry(kind_of(v["event"].as_str().unwrap()))
            .or_default()
            .push(v["t"].as_f64().unwrap());
    }
    for kinds in times.values_mut() {
        for ts in kinds.values_mut() {
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
    }
    OracleLog {
        group: header["metadata"]["group"]
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| index.to_string()),
        method: header["method"].as_str().unwrap().to_string(),
        agents,
        iterations: header["iterations"].as_array().unwrap().len(),
        times,
    }
}

impl OracleLog {
    fn kinds(&self, iteration: usize, agent: u64) -> BTreeMap<String, Vec<f64>> {
        self.times
            .get(&(iteration as u64, agent))
            .cloned()
            .unwrap_or_default()
    }

    /// Directed weighted edge list of one iteration. With `follows`, the
    /// robot keeps only its edge to that human.
    fn edges(&self, iteration: usize, tau: f64, follows: Option<u64>) -> Vec<(u64, u64, f64)> {
        let mut out = Vec::new();
        for a in &self.agents {
            for b in &self.agents {
                if a.id == b.id {
                    continue;
                }
                if a.robot {
                    if let Some(m) = follows {
                        if b.id != m {
                            continue;
                        }
                    }
                }
                let q = brute_pair(&self.kinds(iteration, a.id), &self.kinds(iteration, b.id), tau);
                out.push((a.id, b.id, q));
            }
        }
        out
    }

    /// (individual index, connectivity) per agent and the group index.
    fn indices(&self, edges: &[(u64, u64, f64)]) -> (BTreeMap<u64, (f64, f64)>, f64) {
        let h = self.agents.len() as f64;
        let mut per = BTreeMap::new();
        let mut g = 0.0;
        for a in &self.agents {
            let outs: Vec<f64> = edges.iter().filter(|e| e.0 == a.id).map(|e| e.2).collect();
            let i = if outs.is_empty() {
                0.0
            } else {
                outs.iter().sum::<f64>() / outs.len() as f64
            };
            let cv = outs.len() as f64 / (h - 1.0);
            per.insert(a.id, (i, cv));
            g += i * cv;
        }
        (per, g / h)
    }

    fn msp(&self, iteration: usize, tau: f64) -> u64 {
        let (per, _) = self.indices(&self.edges(iteration, tau, None));
        let mut best: Option<(u64, f64)> = None;
        for a in self.agents.iter().filter(|a| !a.robot) {
            let i = per[&a.id].0;
            if best.map(|(_, b)| i > b).unwrap_or(true) {
                best = Some((a.id, i));
            }
        }
        best.unwrap().0
    }

    /// Per-iteration GSI with the edge policy of the session's method.
    pub fn gsi(&self, tau: f64) -> Vec<(f64, Option<u64>)> {
        let has_robot = self.agents.iter().any(|a| a.robot);
        (0..self.iterations)
            .map(|i| {
                let follows = (self.method == "SIA" && has_robot && i > 0).then(|| self.msp(i - 1, tau));
                let (_, g) = self.indices(&self.edges(i, tau, follows));
                (g, follows)
            })
            .collect()
    }
}

/// Oracle rows `(group, method, iteration-or-"mean", gsi)` in table order.
pub fn oracle_gsi_rows(logs: &[String], tau: f64) -> Vec<(String, String, String, f64)> {
    let mut rows = Vec::new();
    for (k, text) in logs.iter().enumerate() {
        let log = oracle_parse(text, k);
        let per = log.gsi(tau);
        for (i, (g, _)) in per.iter().enumerate() {
            rows.push((log.group.clone(), log.method.clone(), i.to_string(), *g));
        }
        let mean = per.iter().map(|p| p.0).sum::<f64>() / per.len() as f64;
        rows.push((log.group.clone(), log.method.clone(), "mean".to_string(), mean));
    }
    rows
}

/// `(group, method, iteration, gsi)` from a GSI CSV.
pub fn csv_gsi_rows(csv: &str) -> Vec<(String, String, String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 6, "bad row {l:?}");
            (f[0].to_string(), f[1].to_string(), f[2].to_string(), f[5].parse().unwrap())
        })
        .collect()
}

/// Largest absolute GSI difference between two row lists with matching keys.
pub fn max_gsi_gap(a: &[(String, String, String, f64)], b: &[(String, String, String, f64)]) -> f64 {
    assert_eq!(a.len(), b.len(), "row counts differ");
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            assert_eq!((&x.0, &x.1, &x.2), (&y.0, &y.1, &y.2), "row keys differ");
            (x.3 - y.3).abs()
        })
        .fold(0.0, f64::max)
}

/// Well-spaced sorted times: consecutive gaps of at least `2 * tau`.
pub fn well_spaced(rng: &mut impl rand::Rng, m: usize, tau: f64) -> Vec<f64> {
    let mut t = 1.0 + rng.gen_range(0.0..1.0);
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push(t);
        t += 2.0 * tau + rng.gen_range(0.0..1.0);
    }
    out
}

/// Exact two-sided signed-rank p by enumerating all 2^n sign patterns.
pub fn permutation_p(diffs: &[f64]) -> f64 {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nz[a].abs().partial_cmp(&nz[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut k = i;
        while k + 1 < n && nz[idx[k + 1]].abs() == nz[idx[i]].abs() {
            k += 1;
        }
        let avg = (i + k + 2) as f64 / 2.0;
        for &p in &idx[i..=k] {
            ranks[p] = avg;
        }
        i = k + 1;
    }
    let observed: f64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| ranks[i]).sum();
    let (mut lo, mut hi) = (0u64, 0u64);
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            lo += 1;
        }
        if w >= observed {
            hi += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * lo.min(hi) as f64 / total).min(1.0)
}
