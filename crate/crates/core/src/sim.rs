//! Seeded discrete-event simulation of the cyclic group dance.
//!
//! Human timing noise and event loss come from one ChaCha stream, robot
//! command drops from a second stream of the same seed. Swapping the
//! controller therefore never changes what the humans do, which is what the
//! paired comparison in [`run_comparison`] relies on.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::anticipate::{Controller, ControllerKind, RobotCommand};
use crate::error::{Error, Result};
use crate::metrics::{
    gsi_table, histogram_of, wilcoxon_signed_rank, Histogram, SessionGsi, WilcoxonResult, Winner,
    WinnerCounts,
};
use crate::model::{
    AgentId, EventKind, EventType, IterationWindow, RecordingBuilder, SessionRecording, SyncParams,
};

/// Nominal per-iteration schedule of the dance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Choreography {
    pub iteration_period: f64,
    pub iteration_count: usize,
    /// `(event, offset)` pairs, offsets relative to the iteration start.
    pub schedule: Vec<(EventType, f64)>,
}

impl Default for Choreography {
    fn default() -> Self {
        use EventType::*;
        Choreography {
            iteration_period: 24.0,
            iteration_count: 4,
            schedule: vec![
                (StartForward, 3.0),
                (StopForward, 6.0),
                (StartBackward, 9.0),
                (StopBackward, 12.0),
                (StartForward, 14.0),
                (StopForward, 17.0),
                (StartBackward, 19.0),
                (StopBackward, 21.0),
                (Clap, 22.5),
            ],
        }
    }
}

impl Choreography {
    pub fn windows(&self) -> Vec<IterationWindow<f64>> {
        (0..self.iteration_count)
            .map(|k| IterationWindow {
                start: k as f64 * self.iteration_period,
                end: (k + 1) as f64 * self.iteration_period,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iteration_period > 0.0 && self.iteration_period.is_finite()) {
            return Err(Error::InvalidConfig("iteration_period must be positive".into()));
        }
        if self.iteration_count == 0 {
            return Err(Error::InvalidConfig("iteration_count must be at least 1".into()));
        }
        if self.schedule.is_empty() {
            return Err(Error::InvalidConfig("choreography schedule is empty".into()));
        }
        if let Some((e, _)) = self.schedule.iter().find(|(e, _)| e.is_early() || *e == EventType::Turn) {
            return Err(Error::InvalidConfig(format!(
                "schedule entries must be regular human events, got `{e}`"
            )));
        }
        if self.schedule.windows(2).any(|w| !(w[0].1 < w[1].1)) {
            return Err(Error::InvalidConfig("schedule offsets must strictly increase".into()));
        }
        let first = self.schedule[0].1;
        let last = self.schedule[self.schedule.len() - 1].1;
        if first < 0.0 || last >= self.iteration_period {
            return Err(Error::InvalidConfig(
                "schedule offsets must lie in [0, iteration_period)".into(),
            ));
        }
        Ok(())
    }
}

/// Timing behaviour of one simulated dancer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DancerModel {
    /// Standard deviation of the Gaussian timing noise, seconds.
    pub jitter_sd: f64,
    /// Lead of each early event over its regular event, seconds.
    pub early_lead: f64,
    pub miss_rate: f64,
}

impl Default for DancerModel {
    fn default() -> Self {
        DancerModel {
            jitter_sd: 0.15,
            early_lead: 0.3,
            miss_rate: 0.07,
        }
    }
}

impl DancerModel {
    pub fn noiseless() -> Self {
        DancerModel {
            jitter_sd: 0.0,
            miss_rate: 0.0,
            ..DancerModel::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    /// Delay from command issue to the robot's observable event, seconds.
    pub actuation_latency: f64,
    pub drop_rate: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            actuation_latency: 0.15,
            drop_rate: 0.037,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub choreography: Choreography,
    pub dancers: Vec<DancerModel>,
    pub robot: RobotModel,
    pub controller: ControllerKind,
    pub params: SyncParams<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            choreography: Choreography::default(),
            dancers: vec![DancerModel::default(); 3],
            robot: RobotModel::default(),
            controller: ControllerKind::Sia,
            params: SyncParams::default(),
            seed: 0,
        }
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")))
    }
}

impl SimConfig {
    /// Three noiseless dancers and a lossless robot.
    pub fn noiseless(controller: ControllerKind) -> Self {
        SimConfig {
            dancers: vec![DancerModel::noiseless(); 3],
            robot: RobotModel {
                drop_rate: 0.0,
                ..RobotModel::default()
            },
            controller,
            ..SimConfig::default()
        }
    }

    /// Default dancers with the last one `factor` times as jittery.
    pub fn heterogeneous(factor: f64) -> Self {
        let mut cfg = SimConfig::default();
        if let Some(last) = cfg.dancers.last_mut() {
            last.jitter_sd *= factor;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.choreography.validate()?;
        self.params.validate()?;
        if self.dancers.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 dancers, got {}",
                self.dancers.len()
            )));
        }
        for (i, d) in self.dancers.iter().enumerate() {
            check_nonneg(&format!("dancers[{i}].jitter_sd"), d.jitter_sd)?;
            check_nonneg(&format!("dancers[{i}].early_lead"), d.early_lead)?;
            check_prob(&format!("dancers[{i}].miss_rate"), d.miss_rate)?;
        }
        check_nonneg("robot.actuation_latency", self.robot.actuation_latency)?;
        check_prob("robot.drop_rate", self.robot.drop_rate)?;
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_controller(&self, controller: ControllerKind) -> Self {
        SimConfig {
            controller,
            ..self.clone()
        }
    }

    pub fn robot_id(&self) -> AgentId {
        AgentId::robot(self.dancers.len() as u32)
    }
}

/// Human events of a whole session. Every nominal event of every dancer gets
/// Gaussian jitter; motion events also get an early precursor `early_lead`
/// before the jittered time. Regular and early events are lost independently
/// with `miss_rate`, and events pushed outside their own iteration are lost.
pub fn generate_human_events(cfg: &SimConfig) -> Result<SessionRecording<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let windows = cfg.choreography.windows();
    let mut b = RecordingBuilder::new(windows.clone(), crate::model::Method::HumansOnly);
    b.metadata("seed", cfg.seed.to_string());
    for (i, d) in cfg.dancers.iter().enumerate() {
        let agent = AgentId::human(i as u32);
        b.agent(agent);
        let noise = Normal::new(0.0, d.jitter_sd)
            .map_err(|e| Error::InvalidConfig(format!("dancers[{i}].jitter_sd: {e}")))?;
        for (k, w) in windows.iter().enumerate() {
            for &(event, offset) in &cfg.choreography.schedule {
                let jitter = noise.sample(&mut rng);
                let keep_regular = rng.gen::<f64>() >= d.miss_rate;
                let keep_early = rng.gen::<f64>() >= d.miss_rate;
                let t = w.start + offset + jitter;
                if keep_regular && w.contains(t) {
                    b.push_tagged(crate::model::TimedEvent::new(agent, event, t, k as u32));
                }
                if let Some(early) = event.early() {
                    let te = t - d.early_lead;
                    if keep_early && w.contains(te) {
                        b.push_tagged(crate::model::TimedEvent::new(agent, early, te, k as u32));
                    }
                }
            }
        }
    }
    b.build()
}

/// Generates the humans and runs the configured controller against them.
pub fn run_session(cfg: &SimConfig) -> Result<SessionRecording<f64>> {
    let humans = generate_human_events(cfg)?;
    run_session_with_humans(cfg, &humans)
}

/// Plays recorded human events through the configured controller in time
/// order. At equal times an iteration boundary comes first, then robot
/// events manifesting, then controller deadlines, then human events. The
/// robot idles through the first iteration.
pub fn run_session_with_humans(
    cfg: &SimConfig,
    humans: &SessionRecording<f64>,
) -> Result<SessionRecording<f64>> {
    cfg.validate()?;
    let windows = cfg.choreography.windows();
    if humans.iterations() != windows.as_slice() {
        return Err(Error::InvalidConfig(
            "human recording does not match the choreography windows".into(),
        ));
    }
    let method = cfg.controller.method();
    let mut b = RecordingBuilder::new(windows.clone(), method);
    for (k, v) in humans.metadata() {
        b.metadata(k.clone(), v.clone());
    }
    b.metadata("controller", method.token());
    for a in humans.humans() {
        b.agent(a);
    }
    let robot = cfg.robot_id();
    if cfg.controller != ControllerKind::None {
        b.agent(robot);
    }

    let human_events: Vec<_> = humans
        .events_in_time_order()
        .into_iter()
        .filter(|e| !e.agent.is_robot())
        .collect();
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    drop_rng.set_stream(1);
    let latency = cfg.robot.actuation_latency;
    let drop_rate = cfg.robot.drop_rate;
    // Commands waiting to manifest, ordered by manifest time then issue order.
    let mut pending: BTreeMap<(u64, usize), EventType> = BTreeMap::new();
    let mut issued = 0usize;
    let mut schedule = |cmds: Vec<RobotCommand<f64>>,
                        pending: &mut BTreeMap<(u64, usize), EventType>| {
        for c in cmds {
            let dropped = drop_rng.gen::<f64>() < drop_rate;
            issued += 1;
            if !dropped {
                pending.insert((ordered(c.issue_t + latency), issued), c.manifest_event());
            }
        }
    };

    let mut ctl = Controller::new(cfg.controller, cfg.params);
    let mut hi = 0usize;
    for (k, w) in windows.iter().enumerate() {
        if k > 0 {
            let cmds = ctl.end_iteration();
            schedule(cmds, &mut pending);
        }
        if cfg.controller != ControllerKind::None {
            let so_far = b.build()?;
            // A controller that cannot plan (no usable history) idles.
            let _ = ctl.begin_iteration(&so_far, k);
        }
        loop {
            let manifest = pending.keys().next().map(|&(t, _)| from_ordered(t));
            let deadline = ctl.next_deadline();
            let human = human_events.get(hi).map(|e| e.t);
            let next = [manifest, deadline, human]
                .into_iter()
                .enumerate()
                .filter_map(|(p, t)| t.map(|t| (t, p)))
                .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let Some((t, which)) = next else { break };
            if t >= w.end {
                break;
            }
            match which {
                0 => {
                    let key = *pending.keys().next().expect("pending manifest");
                    let event = pending.remove(&key).expect("pending manifest");
                    b.push(robot, event, t);
                }
                1 => {
                    let cmds = ctl.tick(t);
                    schedule(cmds, &mut pending);
                }
                _ => {
                    let ev = human_events[hi];
                    hi += 1;
                    b.push_tagged(ev);
                    let cmds = ctl.on_event(&ev);
                    schedule(cmds, &mut pending);
                }
            }
        }
    }
    b.build()
}

/// Order-preserving key for non-negative finite times.
fn ordered(t: f64) -> u64 {
    t.max(0.0).to_bits()
}

fn from_ordered(k: u64) -> f64 {
    f64::from_bits(k)
}

/// TA of both methods for the same human cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTa {
    pub seed: u64,
    pub iteration: usize,
    pub event: EventKind,
    pub occurrence: usize,
    pub sia: f64,
    pub eca: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 below two samples.
    pub sd: f64,
}

impl SampleStats {
    pub fn of(values: &[f64]) -> SampleStats {
        let n = values.len();
        if n == 0 {
            return SampleStats { n, mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        SampleStats { n, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub sia: SessionGsi<f64>,
    pub eca: SessionGsi<f64>,
    pub winner: Winner,
}

/// Paired SIA/ECA results over a range of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub runs: Vec<RunOutcome>,
    pub winner_counts: WinnerCounts,
    /// Share of runs SIA won on mean GSI.
    pub sia_win_fraction: f64,
    pub ta_sia: SampleStats,
    pub ta_eca: SampleStats,
    pub sia_ta_lower: bool,
    pub paired_ta: Vec<PairedTa>,
    /// Signed-rank test on `sia - eca` TA differences; `None` when every
    /// difference is zero or nothing could be paired.
    pub wilcoxon: Option<WilcoxonResult>,
    pub histogram_sia: Histogram,
    pub histogram_eca: Histogram,
}

/// TA values closer than this (seconds) count as equal when the methods are
/// compared.
pub const TA_RESOLUTION: f64 = 1e-9;

type TaKey = (u64, usize, EventKind, usize);

fn ta_by_key(seed: u64, s: &SessionGsi<f64>) -> BTreeMap<TaKey, f64> {
    s.iterations
        .iter()
        .flat_map(|it| {
            it.ta
                .iter()
                .map(move |x| ((seed, it.iteration, x.event.kind(), x.occurrence), x.ta))
        })
        .collect()
}

/// Runs SIA and ECA on identical humans for seeds `seed..seed + n_runs`.
pub fn run_comparison(base: &SimConfig, n_runs: usize) -> Result<ComparisonSummary> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    base.validate()?;
    let mut runs = Vec::with_capacity(n_runs);
    let mut winner_counts = WinnerCounts::default();
    let (mut all_sia, mut all_eca) = (Vec::new(), Vec::new());
    let mut paired_ta = Vec::new();
    for r in 0..n_runs as u64 {
        let seed = base.seed.wrapping_add(r);
        let cfg = base.with_seed(seed);
        let humans = generate_human_events(&cfg)?;
        let sia = run_session_with_humans(&cfg.with_controller(ControllerKind::Sia), &humans)?;
        let eca = run_session_with_humans(&cfg.with_controller(ControllerKind::Eca), &humans)?;
        let report = gsi_table(&[sia, eca], &base.params)?;
        let mut sessions = report.sessions.into_iter();
        let (s, e) = (
            sessions.next().expect("SIA session"),
            sessions.next().expect("ECA session"),
        );
        let winner = Winner::decide(s.mean_gsi, e.mean_gsi);
        winner_counts.add(winner);

        let (ks, ke) = (ta_by_key(seed, &s), ta_by_key(seed, &e));
        all_sia.extend(ks.values().copied());
        all_eca.extend(ke.values().copied());
        for (key, &ta_s) in &ks {
            if let Some(&ta_e) = ke.get(key) {
                paired_ta.push(PairedTa {
                    seed: key.0,
                    iteration: key.1,
                    event: key.2,
                    occurrence: key.3,
                    sia: ta_s,
                    eca: ta_e,
                });
            }
        }
        runs.push(RunOutcome {
            seed,
            sia: s,
            eca: e,
            winner,
        });
    }
    // Differences below the resolution are rounding in the time arithmetic.
    let pairs: Vec<(f64, f64)> = paired_ta
        .iter()
        .map(|p| {
            if (p.sia - p.eca).abs() <= TA_RESOLUTION {
                (p.sia, p.sia)
            } else {
                (p.sia, p.eca)
            }
        })
        .collect();
    let wilcoxon = wilcoxon_signed_rank(&pairs).ok();
    let (ta_sia, ta_eca) = (SampleStats::of(&all_sia), SampleStats::of(&all_eca));
    Ok(ComparisonSummary {
        sia_win_fraction: winner_counts.sia as f64 / n_runs as f64,
        winner_counts,
        sia_ta_lower: ta_sia.mean < ta_eca.mean - TA_RESOLUTION,
        ta_sia,
        ta_eca,
        histogram_sia: histogram_of(all_sia.iter().copied()),
        histogram_eca: histogram_of(all_eca.iter().copied()),
        paired_ta,
        wilcoxon,
        runs,
    })
}
