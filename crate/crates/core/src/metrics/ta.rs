use serde::{Deserialize, Serialize};

use crate::anticipate::{cluster_timed_events, EventCluster};
use crate::model::{EventSeries, EventType, SyncParams, TimedEvent};
use crate::scalar::Scalar;

/// Timing appropriateness of one robot event against the human consensus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TaSample<T: Scalar> {
    /// Human-side event of the cluster.
    pub event: EventType,
    /// Position of the cluster among same-kind clusters of the iteration.
    pub occurrence: usize,
    pub robot_t: T,
    pub ideal_t: T,
    pub ta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TaOutcome<T: Scalar> {
    pub samples: Vec<TaSample<T>>,
    /// Robot events no cluster claimed.
    pub unmatched_robot: Vec<TimedEvent<T>>,
    /// Clusters the robot never answered.
    pub unmatched_clusters: Vec<EventCluster<T>>,
}

/// Clusters the humans' events, takes each cluster mean as the ideal time and
/// pairs clusters with robot events of the same kind one-to-one, closest
/// pairs first. Inputs should be slices of a single iteration.
pub fn timing_appropriateness<T: Scalar>(
    humans: &[EventSeries<T>],
    robot: &EventSeries<T>,
    p: &SyncParams<T>,
) -> TaOutcome<T> {
    let clusters = cluster_timed_events(
        humans.iter().flat_map(|s| s.events().iter().copied()),
        p.cluster_epsilon,
    );
    let robot_events: Vec<TimedEvent<T>> = robot
        .events()
        .iter()
        .filter(|e| !e.event.is_early())
        .copied()
        .collect();

    let mut candidates: Vec<(T, usize, usize)> = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        for (ri, r) in robot_events.iter().enumerate() {
            if r.event.kind() == c.event.kind() {
                candidates.push(((r.t - c.mean_t).abs(), ci, ri));
            }
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let mut cluster_match: Vec<Option<usize>> = vec![None; clusters.len()];
    let mut robot_taken = vec![false; robot_events.len()];
    for (_, ci, ri) in candidates {
        if cluster_match[ci].is_none() && !robot_taken[ri] {
            cluster_match[ci] = Some(ri);
            robot_taken[ri] = true;
        }
    }

    let mut samples = Vec::new();
    let mut unmatched_clusters = Vec::new();
    let mut seen_per_kind = std::collections::BTreeMap::new();
    for (ci, c) in clusters.iter().enumerate() {
        let occurrence = seen_per_kind.entry(c.event.kind()).or_insert(0usize);
        match cluster_match[ci] {
            Some(ri) => {
                let robot_t = robot_events[ri].t;
                samples.push(TaSample {
                    event: c.event,
                    occurrence: *occurrence,
                    robot_t,
                    ideal_t: c.mean_t,
                    ta: (robot_t - c.mean_t).abs(),
                });
            }
            None => unmatched_clusters.push(c.clone()),
        }
        *occurrence += 1;
    }
    let unmatched_robot = robot_events
        .iter()
        .zip(&robot_taken)
        .filter(|(_, taken)| !**taken)
        .map(|(e, _)| *e)
        .collect();
    TaOutcome {
        samples,
        unmatched_robot,
        unmatched_clusters,
    }
}
