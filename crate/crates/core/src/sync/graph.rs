//! Group topology graph and the indices read off it.
//!
//! Everything here is plain field arithmetic over edge weights, so the same
//! code runs on floats and on exact rationals.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AgentId;
use crate::scalar::{from_count, Weight};

/// Which directed edges a graph carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "msp")]
pub enum EdgePolicy {
    /// Both directions for every pair.
    FullyConnected,
    /// Everyone is fully connected except the robot, whose only outgoing
    /// edge points at the human it follows.
    RobotFollows(AgentId),
}

/// Directed weighted graph over agents. Weights come from the symmetric pair
/// index, so `w(a→b) = w(b→a)` whenever both edges exist.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTopologyGraph<W: Weight> {
    vertices: BTreeSet<AgentId>,
    edges: BTreeMap<(AgentId, AgentId), W>,
}

impl<W: Weight> GroupTopologyGraph<W> {
    pub fn new(vertices: impl IntoIterator<Item = AgentId>) -> Self {
        GroupTopologyGraph {
            vertices: vertices.into_iter().collect(),
            edges: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, from: AgentId, to: AgentId, weight: W) -> Result<()> {
        if from == to {
            return Err(Error::InvalidRecording(format!("self edge on {from}")));
        }
        for v in [from, to] {
            if !self.vertices.contains(&v) {
                return Err(Error::UnknownAgent(v.id));
            }
        }
        self.edges.insert((from, to), weight);
        Ok(())
    }

    /// Adds the directed edges `policy` allows between `a` and `b`.
    pub fn connect(&mut self, a: AgentId, b: AgentId, weight: W, policy: EdgePolicy) -> Result<()> {
        for (from, to) in [(a, b), (b, a)] {
            let allowed = match policy {
                EdgePolicy::FullyConnected => true,
                EdgePolicy::RobotFollows(msp) => !from.is_robot() || to == msp,
            };
            if allowed {
                self.add_edge(from, to, weight)?;
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &BTreeSet<AgentId> {
        &self.vertices
    }

    /// H, the number of vertices.
    pub fn order(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, from: AgentId, to: AgentId) -> Option<W> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId, W)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, a: AgentId) -> impl Iterator<Item = (AgentId, W)> + '_ {
        self.edges
            .range((a, min_agent())..)
            .take_while(move |((from, _), _)| *from == a)
            .map(|(&(_, to), &w)| (to, w))
    }

    pub fn out_degree(&self, a: AgentId) -> usize {
        self.out_edges(a).count()
    }

    pub fn in_degree(&self, a: AgentId) -> usize {
        self.edges.keys().filter(|(_, to)| *to == a).count()
    }

    /// Same topology with every weight mapped through `f`.
    pub fn map_weights<V: Weight>(&self, f: impl Fn(W) -> V) -> GroupTopologyGraph<V> {
        GroupTopologyGraph {
            vertices: self.vertices.clone(),
            edges: self.edges.iter().map(|(&k, &w)| (k, f(w))).collect(),
        }
    }

    fn check_vertex(&self, a: AgentId) -> Result<()> {
        if self.vertices.contains(&a) {
            Ok(())
        } else {
            Err(Error::UnknownAgent(a.id))
        }
    }
}

fn min_agent() -> AgentId {
    AgentId {
        id: 0,
        kind: crate::model::AgentKind::Human,
    }
}

/// I_τ(a): mean weight of `a`'s outgoing edges.
pub fn individual_index<W: Weight>(g: &GroupTopologyGraph<W>, a: AgentId) -> Result<W> {
    g.check_vertex(a)?;
    let (sum, count) = g
        .out_edges(a)
        .fold((W::zero(), 0usize), |(s, n), (_, w)| (s + w, n + 1));
    if count == 0 {
        return Err(Error::IsolatedVertex(a.id));
    }
    Ok(sum / from_count(count))
}

/// CV(a): out-degree over the `H - 1` edges a fully connected vertex has.
pub fn connectivity<W: Weight>(g: &GroupTopologyGraph<W>, a: AgentId) -> Result<W> {
    g.check_vertex(a)?;
    let h = g.order();
    if h < 2 {
        return Err(Error::DegenerateGroup(h));
    }
    Ok(from_count::<W>(g.out_degree(a)) / from_count(h - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentIndex<W> {
    pub agent: AgentId,
    pub individual: W,
    pub connectivity: W,
}

/// Per-agent individual indices and connectivity values with the group index
/// they combine into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport<W> {
    pub agents: Vec<AgentIndex<W>>,
    pub group: W,
}

impl<W: Weight> IndexReport<W> {
    pub fn individual(&self, a: AgentId) -> Option<W> {
        self.agents.iter().find(|x| x.agent == a).map(|x| x.individual)
    }

    pub fn connectivity(&self, a: AgentId) -> Option<W> {
        self.agents.iter().find(|x| x.agent == a).map(|x| x.connectivity)
    }

    /// G_τ recomputed from the stored per-agent values.
    pub fn recompute_group(&self) -> W {
        combine(self.agents.iter().map(|x| (x.individual, x.connectivity)), self.agents.len())
    }
}

fn combine<W: Weight>(terms: impl Iterator<Item = (W, W)>, h: usize) -> W {
    terms.fold(W::zero(), |acc, (i, cv)| acc + i * cv) / from_count(h)
}

/// G_τ = Σ I_τ(a)·CV(a) / H, with every per-agent term kept in the report.
pub fn group_index<W: Weight>(g: &GroupTopologyGraph<W>) -> Result<IndexReport<W>> {
    let h = g.order();
    if h < 2 {
        return Err(Error::DegenerateGroup(h));
    }
    let agents = g
        .vertices()
        .iter()
        .map(|&a| {
            Ok(AgentIndex {
                agent: a,
                individual: individual_index(g, a)?,
                connectivity: connectivity(g, a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let group = combine(agents.iter().map(|x| (x.individual, x.connectivity)), h);
    Ok(IndexReport { agents, group })
}
