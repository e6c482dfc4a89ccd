use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ta::{timing_appropriateness, TaSample};
use crate::anticipate::rank_humans;
use crate::error::Result;
use crate::model::{AgentId, Method, SessionRecording, SyncParams};
use crate::scalar::{from_count, Scalar};
use crate::sync::{gtg_from_pairs, group_index, pair_indices, AgentIndex, EdgePolicy, PairIndex};

/// Mean GSIs closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IterationGsi<T: Scalar> {
    pub iteration: usize,
    pub policy: EdgePolicy,
    /// The human the robot followed, for SIA iterations with an active robot.
    pub msp: Option<AgentId>,
    pub gsi: T,
    pub agents: Vec<AgentIndex<T>>,
    pub pairs: Vec<PairIndex<T>>,
    /// Robot timing against the human clusters; empty without robot events.
    pub ta: Vec<TaSample<T>>,
    pub unmatched_robot: usize,
    pub unmatched_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionGsi<T: Scalar> {
    pub group: String,
    pub method: Method,
    pub iterations: Vec<IterationGsi<T>>,
    pub mean_gsi: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Sia,
    Eca,
    None,
}

impl Winner {
    pub fn decide<T: Scalar>(sia: T, eca: T) -> Winner {
        let d = (sia - eca).to_f64().unwrap_or(0.0);
        if d > TIE_TOLERANCE {
            Winner::Sia
        } else if d < -TIE_TOLERANCE {
            Winner::Eca
        } else {
            Winner::None
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Winner::Sia => "SIA",
            Winner::Eca => "ECA",
            Winner::None => "none",
        }
    }
}

/// One group's SIA session against its ECA session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroupComparison<T: Scalar> {
    pub group: String,
    pub sia_mean_gsi: T,
    pub eca_mean_gsi: T,
    pub winner: Winner,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnerCounts {
    pub sia: usize,
    pub eca: usize,
    pub none: usize,
}

impl WinnerCounts {
    pub fn add(&mut self, w: Winner) {
        match w {
            Winner::Sia => self.sia += 1,
            Winner::Eca => self.eca += 1,
            Winner::None => self.none += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.sia + self.eca + self.none
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// Two same-kind events of one agent closer than the validation limit.
    Spacing,
    /// A pair index had a per-kind value above one and was clamped.
    Clamped,
    /// More than one session of the same method within a group.
    DuplicateSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub group: String,
    pub method: Method,
    pub iteration: Option<usize>,
    pub kind: DiagnosticKind,
    pub detail: String,
}

/// Everything the analysis pipeline produces for a set of recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AnalysisReport<T: Scalar> {
    pub params: SyncParams<T>,
    pub sessions: Vec<SessionGsi<T>>,
    pub comparisons: Vec<GroupComparison<T>>,
    pub winner_counts: WinnerCounts,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T: Scalar> AnalysisReport<T> {
    pub fn has_diagnostics(&self) -> bool {
        !self.diagnostics.is_empty()
    }

    /// `group,method,iteration,policy,msp,gsi` rows followed by one `mean`
    /// row per session.
    pub fn gsi_csv(&self) -> String {
        let mut out = String::from("group,method,iteration,policy,msp,gsi\n");
        for s in &self.sessions {
            for it in &s.iterations {
                let (policy, msp) = policy_fields(it.policy);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.12}",
                    s.group, s.method, it.iteration, policy, msp, it.gsi
                );
            }
            let _ = writeln!(out, "{},{},mean,,,{:.12}", s.group, s.method, s.mean_gsi);
        }
        out
    }

    /// Every pair index behind the GSI table.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("group,method,iteration,agent_a,agent_b,q,clamped\n");
        for s in &self.sessions {
            for it in &s.iterations {
                for p in &it.pairs {
                    let clamped: Vec<String> = p.clamped.iter().map(|k| k.to_string()).collect();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.12},{}",
                        s.group,
                        s.method,
                        it.iteration,
                        p.a,
                        p.b,
                        p.q,
                        clamped.join(";")
                    );
                }
            }
        }
        out
    }

    /// Pretty-printed JSON of the whole report, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn policy_fields(p: EdgePolicy) -> (&'static str, String) {
    match p {
        EdgePolicy::FullyConnected => ("fully_connected", String::new()),
        EdgePolicy::RobotFollows(a) => ("robot_follows", a.to_string()),
    }
}

/// Group key of a recording: its `group` metadata entry, else its position.
pub fn group_key<T: Scalar>(rec: &SessionRecording<T>, index: usize) -> String {
    rec.metadata()
        .get("group")
        .cloned()
        .unwrap_or_else(|| index.to_string())
}

/// Edge policy used for `iteration` of a session. An SIA robot that was
/// active follows the person selected at the end of the previous iteration.
fn policy_for<T: Scalar>(
    rec: &SessionRecording<T>,
    iteration: usize,
    p: &SyncParams<T>,
) -> Result<EdgePolicy> {
    if rec.method() != Method::Sia || iteration == 0 || rec.robot().is_none() {
        return Ok(EdgePolicy::FullyConnected);
    }
    let (msp, _) = rank_humans(rec, iteration - 1, p)?;
    Ok(EdgePolicy::RobotFollows(msp))
}

/// Per-iteration GSI, TA samples and pair indices of one recording.
pub fn session_gsi<T: Scalar>(
    rec: &SessionRecording<T>,
    group: String,
    p: &SyncParams<T>,
) -> Result<SessionGsi<T>> {
    let agents = rec.agents();
    let mut iterations = Vec::with_capacity(rec.iteration_count());
    for i in 0..rec.iteration_count() {
        let policy = policy_for(rec, i, p)?;
        let pairs = pair_indices(rec, i, p)?;
        let report = group_index(&gtg_from_pairs(&agents, &pairs, policy)?)?;

        let slice = rec.slice_by_iteration(i)?;
        let humans: Vec<_> = slice
            .series()
            .iter()
            .filter(|s| !s.agent().is_robot())
            .cloned()
            .collect();
        let robot = slice.robot().and_then(|r| slice.series_of(r));
        let (ta, unmatched_robot, unmatched_clusters) = match robot {
            Some(r) if r.events().iter().any(|e| !e.event.is_early()) => {
                let out = timing_appropriateness(&humans, r, p);
                let (ur, uc) = (out.unmatched_robot.len(), out.unmatched_clusters.len());
                (out.samples, ur, uc)
            }
            _ => (Vec::new(), 0, 0),
        };
        iterations.push(IterationGsi {
            iteration: i,
            policy,
            msp: match policy {
                EdgePolicy::RobotFollows(m) => Some(m),
                EdgePolicy::FullyConnected => None,
            },
            gsi: report.group,
            agents: report.agents,
            pairs,
            ta,
            unmatched_robot,
            unmatched_clusters,
        });
    }
    let mean_gsi = if iterations.is_empty() {
        T::zero()
    } else {
        iterations.iter().fold(T::zero(), |s, it| s + it.gsi) / from_count(iterations.len())
    };
    Ok(SessionGsi {
        group,
        method: rec.method(),
        iterations,
        mean_gsi,
    })
}

fn diagnostics_of<T: Scalar>(
    rec: &SessionRecording<T>,
    session: &SessionGsi<T>,
    p: &SyncParams<T>,
) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = rec
        .violations(p)
        .into_iter()
        .map(|v| Diagnostic {
            group: session.group.clone(),
            method: session.method,
            iteration: None,
            kind: DiagnosticKind::Spacing,
            detail: format!(
                "{} {} events at {} and {} are closer than 2*tau",
                v.agent, v.event, v.first_t, v.second_t
            ),
        })
        .collect();
    for it in &session.iterations {
        for pi in it.pairs.iter().filter(|pi| !pi.clamped.is_empty()) {
            let kinds: Vec<String> = pi.clamped.iter().map(|k| k.to_string()).collect();
            out.push(Diagnostic {
                group: session.group.clone(),
                method: session.method,
                iteration: Some(it.iteration),
                kind: DiagnosticKind::Clamped,
                detail: format!(
                    "pair {}-{} clamped to 1 for {}",
                    pi.a,
                    pi.b,
                    kinds.join(", ")
                ),
            });
        }
    }
    out
}

/// Runs the GSI pipeline over a set of recordings and compares each group's
/// SIA session with its ECA session.
pub fn gsi_table<T: Scalar>(
    recordings: &[SessionRecording<T>],
    p: &SyncParams<T>,
) -> Result<AnalysisReport<T>> {
    p.validate()?;
    let mut sessions = Vec::with_capacity(recordings.len());
    let mut diagnostics = Vec::new();
    for (i, rec) in recordings.iter().enumerate() {
        let s = session_gsi(rec, group_key(rec, i), p)?;
        diagnostics.extend(diagnostics_of(rec, &s, p));
        sessions.push(s);
    }

    let mut groups: Vec<&str> = Vec::new();
    for s in &sessions {
        if !groups.contains(&s.group.as_str()) {
            groups.push(&s.group);
        }
    }
    let mut comparisons = Vec::new();
    let mut winner_counts = WinnerCounts::default();
    for g in groups {
        let find = |m: Method| -> Vec<&SessionGsi<T>> {
            sessions
                .iter()
                .filter(|s| s.group == g && s.method == m)
                .collect()
        };
        let (sia, eca) = (find(Method::Sia), find(Method::Eca));
        for (m, list) in [(Method::Sia, &sia), (Method::Eca, &eca)] {
            if list.len() > 1 {
                diagnostics.push(Diagnostic {
                    group: g.to_string(),
                    method: m,
                    iteration: None,
                    kind: DiagnosticKind::DuplicateSession,
                    detail: format!("{} {m} sessions; the first is compared", list.len()),
                });
            }
        }
        if let (Some(s), Some(e)) = (sia.first(), eca.first()) {
            let winner = Winner::decide(s.mean_gsi, e.mean_gsi);
            winner_counts.add(winner);
            comparisons.push(GroupComparison {
                group: g.to_string(),
                sia_mean_gsi: s.mean_gsi,
                eca_mean_gsi: e.mean_gsi,
                winner,
            });
        }
    }
    Ok(AnalysisReport {
        params: *p,
        sessions,
        comparisons,
        winner_counts,
        diagnostics,
    })
}
