//! Event synchronization measures: directed co-occurrence counts, single-kind
//! and multi-kind pair indices, the group topology graph, individual indices,
//! connectivity values and the group synchronization index.

mod events;
mod graph;

pub use events::{directed_count, event_sync, pair_sync_index, PairIndex};
pub use graph::{
    connectivity, group_index, individual_index, AgentIndex, EdgePolicy, GroupTopologyGraph,
    IndexReport,
};

use crate::error::{Error, Result};
use crate::model::{AgentId, SessionRecording, SyncParams};
use crate::scalar::Scalar;

/// Pair indices for every unordered agent pair, computed on one iteration's
/// slice. Pairs come out in `(a, b)` order with `a.id < b.id`.
pub fn pair_indices<T: Scalar>(
    rec: &SessionRecording<T>,
    iteration: usize,
    p: &SyncParams<T>,
) -> Result<Vec<PairIndex<T>>> {
    let slice = rec.slice_by_iteration(iteration)?;
    let series = slice.series();
    let mut out = Vec::with_capacity(series.len() * series.len().saturating_sub(1) / 2);
    for (i, x) in series.iter().enumerate() {
        for y in &series[i + 1..] {
            out.push(pair_sync_index(x, y, p)?);
        }
    }
    Ok(out)
}

/// Builds a graph from precomputed pair indices.
pub fn gtg_from_pairs<T: Scalar>(
    agents: &[AgentId],
    pairs: &[PairIndex<T>],
    policy: EdgePolicy,
) -> Result<GroupTopologyGraph<T>> {
    if let EdgePolicy::RobotFollows(msp) = policy {
        if msp.is_robot() || !agents.contains(&msp) {
            return Err(Error::UnknownAgent(msp.id));
        }
    }
    let mut g = GroupTopologyGraph::new(agents.iter().copied());
    for pi in pairs {
        g.connect(pi.a, pi.b, pi.q, policy)?;
    }
    Ok(g)
}

/// Group topology graph of one iteration under `policy`.
pub fn build_gtg<T: Scalar>(
    rec: &SessionRecording<T>,
    iteration: usize,
    policy: EdgePolicy,
    p: &SyncParams<T>,
) -> Result<GroupTopologyGraph<T>> {
    if let EdgePolicy::RobotFollows(msp) = policy {
        if !rec.humans().contains(&msp) {
            return Err(Error::UnknownAgent(msp.id));
        }
    }
    let pairs = pair_indices(rec, iteration, p)?;
    gtg_from_pairs(&rec.agents(), &pairs, policy)
}
