//! Invitation closure, shortest distances and the layered market division.
//!
//! Edges are directed invitations: the call for bids travels from the
//! requester along reported invitee sets. Invitations back to the requester
//! are ignored.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::model::{AgentId, AgentSet, Instance, Invites};

/// Read access to the reported invitation network.
pub trait InvitationGraph {
    fn root_invitees(&self) -> &AgentSet;
    fn invitees_of(&self, agent: AgentId) -> Option<&AgentSet>;
    fn contains_agent(&self, agent: AgentId) -> bool {
        self.invitees_of(agent).is_some()
    }
}

impl<R: Invites, S: Invites> InvitationGraph for Instance<R, S> {
    fn root_invitees(&self) -> &AgentSet {
        self.requester.invitees()
    }

    fn invitees_of(&self, agent: AgentId) -> Option<&AgentSet> {
        self.suppliers.get(&agent).map(Invites::invitees)
    }
}

/// Suppliers reachable from the requester, with their BFS distance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReachableMarket {
    pub distance: BTreeMap<AgentId, u32>,
}

impl ReachableMarket {
    pub fn members(&self) -> AgentSet {
        self.distance.keys().copied().collect()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.distance.contains_key(&agent)
    }

    pub fn len(&self) -> usize {
        self.distance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distance.is_empty()
    }

    pub fn distance_of(&self, agent: AgentId) -> Option<u32> {
        self.distance.get(&agent).copied()
    }

    /// Members ordered by `(distance, id)`.
    pub fn priority_order(&self) -> Vec<AgentId> {
        let mut order: Vec<_> = self.distance.iter().map(|(a, d)| (*d, *a)).collect();
        order.sort_unstable();
        order.into_iter().map(|(_, a)| a).collect()
    }
}

/// Breadth-first closure. `removed` agents never enter; `silenced` agents
/// enter but forward to nobody.
fn closure<G: InvitationGraph + ?Sized>(
    graph: &G,
    removed: Option<AgentId>,
    silenced: Option<AgentId>,
) -> ReachableMarket {
    let mut distance = BTreeMap::new();
    let mut queue = VecDeque::new();
    let visit = |agent: AgentId,
                 d: u32,
                 distance: &mut BTreeMap<AgentId, u32>,
                 queue: &mut VecDeque<AgentId>| {
        if agent == AgentId::REQUESTER || Some(agent) == removed || !graph.contains_agent(agent) {
            return;
        }
        if let std::collections::btree_map::Entry::Vacant(slot) = distance.entry(agent) {
            slot.insert(d);
            queue.push_back(agent);
        }
    };
    for &a in graph.root_invitees() {
        visit(a, 1, &mut distance, &mut queue);
    }
    while let Some(agent) = queue.pop_front() {
        if Some(agent) == silenced {
            continue;
        }
        let d = distance[&agent];
        if let Some(next) = graph.invitees_of(agent) {
            for &b in next {
                visit(b, d + 1, &mut distance, &mut queue);
            }
        }
    }
    ReachableMarket { distance }
}

/// Closure of the requester's call over the reported invitee sets.
pub fn reachable_market<G: InvitationGraph + ?Sized>(graph: &G) -> ReachableMarket {
    closure(graph, None, None)
}

/// The market that forms when `agent` does not take part at all: she and
/// every supplier only she could have invited are gone.
pub fn market_without<G: InvitationGraph + ?Sized>(graph: &G, agent: AgentId) -> ReachableMarket {
    closure(graph, Some(agent), None)
}

/// `N(r_i) \ N(∅)`: suppliers that enter only because `agent` invites them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildrenSet {
    pub agent: AgentId,
    pub children: AgentSet,
}

pub fn children<G: InvitationGraph + ?Sized>(graph: &G, agent: AgentId) -> Result<ChildrenSet> {
    if !graph.contains_agent(agent) {
        return Err(Error::UnknownAgent(agent));
    }
    let full = reachable_market(graph);
    let silent = closure(graph, None, Some(agent));
    let children = full
        .distance
        .keys()
        .filter(|a| !silent.contains(**a))
        .copied()
        .collect();
    Ok(ChildrenSet { agent, children })
}

/// Children of every member of `market`, computed against `graph`.
pub fn children_map<G: InvitationGraph + ?Sized>(
    graph: &G,
    market: &ReachableMarket,
) -> BTreeMap<AgentId, AgentSet> {
    market
        .distance
        .keys()
        .map(|&a| {
            let silent = closure(graph, None, Some(a));
            let kids = market
                .distance
                .keys()
                .filter(|b| !silent.contains(**b))
                .copied()
                .collect();
            (a, kids)
        })
        .collect()
}

/// Layers `G_1 … G_{d*}` of suppliers grouped by distance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarketDivision {
    pub layers: Vec<AgentSet>,
}

impl MarketDivision {
    pub fn d_star(&self) -> usize {
        self.layers.len()
    }

    /// Layer `k` (1-based), empty when out of range.
    pub fn layer(&self, k: usize) -> AgentSet {
        k.checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .cloned()
            .unwrap_or_default()
    }
}

pub fn market_division(market: &ReachableMarket) -> MarketDivision {
    let d_star = market.distance.values().copied().max().unwrap_or(0) as usize;
    let mut layers = vec![AgentSet::new(); d_star];
    for (agent, d) in &market.distance {
        layers[*d as usize - 1].insert(*agent);
    }
    MarketDivision { layers }
}
