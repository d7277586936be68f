//! Agent types, instances, outcomes and the cost accounting shared by every
//! mechanism.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    /// Reserved for the requester (or the seller in forward auctions).
    pub const REQUESTER: AgentId = AgentId(0);
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type AgentSet = BTreeSet<AgentId>;
pub type TaskSet = BTreeSet<TaskId>;

/// Anything that forwards the call for bids to a set of agents.
pub trait Invites {
    fn invitees(&self) -> &AgentSet;
}

/// What a supplier pays out of pocket to deliver `units` (0/1 for bundles).
pub trait SupplyCost {
    fn supply_cost(&self, units: u64) -> Money;
}

/// A supplier of identical units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupplierHM {
    pub ability: u64,
    pub unit_cost: Money,
    pub neighbors: AgentSet,
}

/// A single-minded supplier of a bundle of distinct tasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupplierHT {
    pub bundle: TaskSet,
    pub total_cost: Money,
    pub neighbors: AgentSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequesterHM {
    pub demand: u64,
    pub reserve_unit: Money,
    pub neighbors: AgentSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequesterHT {
    /// Reserve cost per task; the key set is the task set.
    pub reserve: BTreeMap<TaskId, Money>,
    pub neighbors: AgentSet,
}

impl RequesterHT {
    pub fn tasks(&self) -> TaskSet {
        self.reserve.keys().copied().collect()
    }

    /// Sum of reserves over `tasks`; unknown tasks count as zero.
    pub fn reserve_of<'a>(&self, tasks: impl IntoIterator<Item = &'a TaskId>) -> Money {
        tasks
            .into_iter()
            .filter_map(|t| self.reserve.get(t))
            .sum()
    }
}

/// The seller of a forward (sale) diffusion auction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seller {
    pub units: u64,
    pub neighbors: AgentSet,
}

/// A unit-demand buyer of a forward diffusion auction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardBidder {
    pub valuation: Money,
    pub neighbors: AgentSet,
}

macro_rules! impl_invites {
    ($($ty:ty),*) => {$(
        impl Invites for $ty {
            fn invitees(&self) -> &AgentSet {
                &self.neighbors
            }
        }
    )*};
}

impl_invites!(SupplierHM, SupplierHT, RequesterHM, RequesterHT, Seller, ForwardBidder);

impl SupplyCost for SupplierHM {
    fn supply_cost(&self, units: u64) -> Money {
        self.unit_cost.times(units)
    }
}

impl SupplyCost for SupplierHT {
    fn supply_cost(&self, units: u64) -> Money {
        if units > 0 {
            self.total_cost
        } else {
            Money::ZERO
        }
    }
}

/// Display names for agents and tasks; ids are used when a name is missing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labels {
    pub agents: BTreeMap<AgentId, String>,
    pub tasks: BTreeMap<TaskId, String>,
}

impl Labels {
    pub fn agent(&self, id: AgentId) -> String {
        self.agents
            .get(&id)
            .cloned()
            .unwrap_or_else(|| id.to_string())
    }

    pub fn task(&self, id: TaskId) -> String {
        self.tasks.get(&id).cloned().unwrap_or_else(|| id.to_string())
    }

    /// Reverse lookup by display name.
    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(id, _)| *id)
    }
}

/// A requester (or seller) plus the full reported profile of the other agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance<R, S> {
    pub requester: R,
    pub suppliers: BTreeMap<AgentId, S>,
    pub labels: Labels,
}

pub type HomInstance = Instance<RequesterHM, SupplierHM>;
pub type HetInstance = Instance<RequesterHT, SupplierHT>;
pub type ForwardInstance = Instance<Seller, ForwardBidder>;

impl<R: Invites, S: Invites> Instance<R, S> {
    /// Validates the network part: ids are non-zero, nobody invites herself,
    /// and every invitee exists. Invitations to the requester are allowed and
    /// ignored by the closure.
    pub fn new(requester: R, suppliers: BTreeMap<AgentId, S>) -> Result<Self> {
        let inst = Instance {
            requester,
            suppliers,
            labels: Labels::default(),
        };
        inst.validate_network()?;
        Ok(inst)
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = labels;
        self
    }

    fn validate_network(&self) -> Result<()> {
        if self.suppliers.contains_key(&AgentId::REQUESTER) {
            return Err(Error::InvalidInstance(
                "agent id 0 is reserved for the requester".into(),
            ));
        }
        let check = |owner: String, set: &AgentSet| -> Result<()> {
            for id in set {
                if *id != AgentId::REQUESTER && !self.suppliers.contains_key(id) {
                    return Err(Error::InvalidInstance(format!(
                        "{owner} invites unknown agent {id}"
                    )));
                }
            }
            Ok(())
        };
        check("the requester".into(), self.requester.invitees())?;
        for (id, s) in &self.suppliers {
            if s.invitees().contains(id) {
                return Err(Error::InvalidInstance(format!("agent {id} invites herself")));
            }
            check(format!("agent {id}"), s.invitees())?;
        }
        Ok(())
    }

    pub fn supplier(&self, id: AgentId) -> Result<&S> {
        self.suppliers.get(&id).ok_or(Error::UnknownAgent(id))
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.suppliers.keys().copied()
    }
}

impl HomInstance {
    pub fn validate(&self) -> Result<()> {
        self.validate_network()?;
        if self.requester.reserve_unit.is_negative() {
            return Err(Error::InvalidInstance("negative reserve".into()));
        }
        if let Some((id, _)) = self
            .suppliers
            .iter()
            .find(|(_, s)| s.unit_cost.is_negative())
        {
            return Err(Error::InvalidInstance(format!("agent {id} has a negative cost")));
        }
        Ok(())
    }

    /// Total reserve value `τ · v̄`.
    pub fn budget(&self) -> Money {
        self.requester.reserve_unit.times(self.requester.demand)
    }
}

impl HetInstance {
    pub fn validate(&self) -> Result<()> {
        self.validate_network()?;
        if let Some((t, _)) = self.requester.reserve.iter().find(|(_, v)| v.is_negative()) {
            return Err(Error::InvalidInstance(format!("task {t} has a negative reserve")));
        }
        for (id, s) in &self.suppliers {
            if s.total_cost.is_negative() {
                return Err(Error::InvalidInstance(format!("agent {id} has a negative cost")));
            }
            if let Some(t) = s.bundle.iter().find(|t| !self.requester.reserve.contains_key(t)) {
                return Err(Error::InvalidInstance(format!(
                    "agent {id} offers task {t} which the requester does not post"
                )));
            }
        }
        Ok(())
    }

    /// Total reserve value `Σ v̄(τ)`.
    pub fn budget(&self) -> Money {
        self.requester.reserve.values().sum()
    }
}

impl ForwardInstance {
    pub fn validate(&self) -> Result<()> {
        self.validate_network()?;
        if let Some((id, _)) = self
            .suppliers
            .iter()
            .find(|(_, b)| b.valuation.is_negative())
        {
            return Err(Error::InvalidInstance(format!("agent {id} has a negative value")));
        }
        Ok(())
    }
}

/// Work the requester keeps for herself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfSupply {
    Units(u64),
    Tasks(TaskSet),
}

/// Allocation plus payments for every participating supplier.
///
/// Units are counts for homogeneous goods and 0/1 selection flags for
/// bundles. Payments are transfers from the requester to the supplier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub allocation: BTreeMap<AgentId, u64>,
    pub payments: BTreeMap<AgentId, Money>,
    pub self_supplied: SelfSupply,
}

impl Outcome {
    pub fn empty(self_supplied: SelfSupply) -> Self {
        Outcome {
            allocation: BTreeMap::new(),
            payments: BTreeMap::new(),
            self_supplied,
        }
    }

    /// Registers a participant with zero allocation and payment.
    pub fn enroll(&mut self, agent: AgentId) {
        self.allocation.entry(agent).or_insert(0);
        self.payments.entry(agent).or_insert(Money::ZERO);
    }

    pub fn award(&mut self, agent: AgentId, units: u64, payment: Money) {
        self.allocation.insert(agent, units);
        self.payments.insert(agent, payment);
    }

    pub fn units(&self, agent: AgentId) -> Result<u64> {
        self.allocation
            .get(&agent)
            .copied()
            .ok_or(Error::UnknownAgent(agent))
    }

    pub fn payment(&self, agent: AgentId) -> Result<Money> {
        self.payments
            .get(&agent)
            .copied()
            .ok_or(Error::UnknownAgent(agent))
    }

    pub fn winners(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.allocation
            .iter()
            .filter(|(_, u)| **u > 0)
            .map(|(a, _)| *a)
    }

    pub fn total_payments(&self) -> Money {
        self.payments.values().sum()
    }

    /// Feasibility for identical units: supplied units never exceed ability
    /// and, with the self-supplied remainder, add up to the demand.
    pub fn is_feasible_hm(&self, inst: &HomInstance) -> bool {
        let SelfSupply::Units(own) = self.self_supplied else {
            return false;
        };
        let mut total = own;
        for (id, units) in &self.allocation {
            match inst.suppliers.get(id) {
                Some(s) if *units <= s.ability => total += units,
                _ => return false,
            }
        }
        total == inst.requester.demand
    }

    /// Feasibility for bundles: winners plus self-supplied tasks cover every
    /// posted task.
    pub fn is_feasible_ht(&self, inst: &HetInstance) -> bool {
        let SelfSupply::Tasks(own) = &self.self_supplied else {
            return false;
        };
        let mut covered: TaskSet = own.clone();
        for id in self.winners() {
            match inst.suppliers.get(&id) {
                Some(s) => covered.extend(s.bundle.iter().copied()),
                None => return false,
            }
        }
        inst.requester.reserve.keys().all(|t| covered.contains(t))
    }
}

/// Payment received minus the true cost of what was supplied.
pub fn utility<S: SupplyCost>(outcome: &Outcome, agent: AgentId, true_type: &S) -> Result<Money> {
    let units = outcome.units(agent)?;
    let paid = outcome.payment(agent)?;
    Ok(paid - true_type.supply_cost(units))
}

/// `x_i − π_i · c_i`.
pub fn utility_hm(outcome: &Outcome, agent: AgentId, true_type: &SupplierHM) -> Result<Money> {
    utility(outcome, agent, true_type)
}

/// `x_i − c_i` when selected, `x_i` otherwise.
pub fn utility_ht(outcome: &Outcome, agent: AgentId, true_type: &SupplierHT) -> Result<Money> {
    utility(outcome, agent, true_type)
}

/// Cost accounting that differs between homogeneous and bundle procurement.
pub trait Procurement {
    /// Cost of doing all the work in-house.
    fn total_reserve(&self) -> Money;
    fn self_supply_cost(&self, own: &SelfSupply) -> Money;
    /// Reported production cost of `units` from `agent`.
    fn production_cost(&self, agent: AgentId, units: u64) -> Result<Money>;
}

impl Procurement for HomInstance {
    fn total_reserve(&self) -> Money {
        self.budget()
    }

    fn self_supply_cost(&self, own: &SelfSupply) -> Money {
        match own {
            SelfSupply::Units(u) => self.requester.reserve_unit.times(*u),
            SelfSupply::Tasks(_) => Money::ZERO,
        }
    }

    fn production_cost(&self, agent: AgentId, units: u64) -> Result<Money> {
        Ok(self.supplier(agent)?.supply_cost(units))
    }
}

impl Procurement for HetInstance {
    fn total_reserve(&self) -> Money {
        self.budget()
    }

    fn self_supply_cost(&self, own: &SelfSupply) -> Money {
        match own {
            SelfSupply::Tasks(tasks) => self.requester.reserve_of(tasks),
            SelfSupply::Units(_) => Money::ZERO,
        }
    }

    fn production_cost(&self, agent: AgentId, units: u64) -> Result<Money> {
        Ok(self.supplier(agent)?.supply_cost(units))
    }
}

/// What the requester actually spends: payments plus the reserve cost of the
/// work she keeps.
pub fn requester_cost<P: Procurement>(outcome: &Outcome, inst: &P) -> Money {
    outcome.total_payments() + inst.self_supply_cost(&outcome.self_supplied)
}

/// Budget-balance slack `u_p`: total reserve value minus expenditure.
pub fn requester_surplus<P: Procurement>(outcome: &Outcome, inst: &P) -> Money {
    inst.total_reserve() - requester_cost(outcome, inst)
}

/// Production cost of the winners (at reported costs) plus the reserve cost
/// of the self-supplied residue.
pub fn social_cost<P: Procurement>(outcome: &Outcome, inst: &P) -> Result<Money> {
    let mut total = inst.self_supply_cost(&outcome.self_supplied);
    for (agent, units) in &outcome.allocation {
        total += inst.production_cost(*agent, *units)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> AgentSet {
        v.iter().map(|&i| AgentId(i)).collect()
    }

    fn supplier(ability: u64, cost: i128, neighbors: &[u32]) -> SupplierHM {
        SupplierHM {
            ability,
            unit_cost: Money::from_int(cost),
            neighbors: ids(neighbors),
        }
    }

    #[test]
    fn hm_utility_charges_per_unit() {
        let mut out = Outcome::empty(SelfSupply::Units(0));
        out.award(AgentId(1), 2, Money::from_int(20));
        out.enroll(AgentId(2));
        let s = supplier(4, 3, &[]);
        assert_eq!(utility_hm(&out, AgentId(1), &s).unwrap(), Money::from_int(14));
        assert_eq!(utility_hm(&out, AgentId(2), &s).unwrap(), Money::ZERO);
        assert!(matches!(
            utility_hm(&out, AgentId(9), &s),
            Err(Error::UnknownAgent(AgentId(9)))
        ));
    }

    #[test]
    fn ht_utility_charges_full_bundle_cost() {
        let s = SupplierHT {
            bundle: [TaskId(0), TaskId(1)].into(),
            total_cost: Money::from_int(12),
            neighbors: AgentSet::new(),
        };
        let mut out = Outcome::empty(SelfSupply::Tasks(TaskSet::new()));
        out.award(AgentId(1), 1, Money::from_int(23));
        out.enroll(AgentId(3));
        assert_eq!(utility_ht(&out, AgentId(1), &s).unwrap(), Money::from_int(11));
        assert_eq!(utility_ht(&out, AgentId(3), &s).unwrap(), Money::ZERO);
    }

    #[test]
    fn all_self_supplied_costs_the_full_reserve() {
        let requester = RequesterHT {
            reserve: [(TaskId(0), Money::from_int(3)), (TaskId(1), Money::from_int(5))].into(),
            neighbors: AgentSet::new(),
        };
        let inst = HetInstance::new(requester, BTreeMap::new()).unwrap();
        let out = Outcome::empty(SelfSupply::Tasks(inst.requester.tasks()));
        assert_eq!(requester_cost(&out, &inst), Money::from_int(8));
        assert_eq!(social_cost(&out, &inst).unwrap(), Money::from_int(8));
        assert_eq!(requester_surplus(&out, &inst), Money::ZERO);
        assert!(out.is_feasible_ht(&inst));
    }

    #[test]
    fn empty_task_set_costs_nothing() {
        let requester = RequesterHT {
            reserve: BTreeMap::new(),
            neighbors: AgentSet::new(),
        };
        let inst = HetInstance::new(requester, BTreeMap::new()).unwrap();
        let out = Outcome::empty(SelfSupply::Tasks(TaskSet::new()));
        assert_eq!(requester_cost(&out, &inst), Money::ZERO);
    }

    #[test]
    fn rejects_self_invitation_and_dangling_ids() {
        let requester = RequesterHM {
            demand: 1,
            reserve_unit: Money::ONE,
            neighbors: ids(&[1]),
        };
        let own = BTreeMap::from([(AgentId(1), supplier(1, 1, &[1]))]);
        assert!(HomInstance::new(requester.clone(), own).is_err());
        let dangling = BTreeMap::from([(AgentId(1), supplier(1, 1, &[7]))]);
        assert!(HomInstance::new(requester.clone(), dangling).is_err());
        let reserved = BTreeMap::from([(AgentId(0), supplier(1, 1, &[]))]);
        assert!(HomInstance::new(requester.clone(), reserved).is_err());
        let back_edge = BTreeMap::from([(AgentId(1), supplier(1, 1, &[0]))]);
        assert!(HomInstance::new(requester, back_edge).is_ok());
    }

    #[test]
    fn hm_feasibility_counts_self_supply() {
        let requester = RequesterHM {
            demand: 5,
            reserve_unit: Money::from_int(10),
            neighbors: ids(&[1]),
        };
        let inst =
            HomInstance::new(requester, BTreeMap::from([(AgentId(1), supplier(2, 3, &[]))])).unwrap();
        let mut out = Outcome::empty(SelfSupply::Units(3));
        out.award(AgentId(1), 2, Money::from_int(20));
        assert!(out.is_feasible_hm(&inst));
        assert_eq!(social_cost(&out, &inst).unwrap(), Money::from_int(36));
        assert_eq!(requester_cost(&out, &inst), Money::from_int(50));
        out.self_supplied = SelfSupply::Units(2);
        assert!(!out.is_feasible_hm(&inst));
    }
}
