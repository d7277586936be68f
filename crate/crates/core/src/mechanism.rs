//! Uniform access to every mechanism and instance variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{dna_mu, idm};
use crate::heterogeneous::{local_greedy, ran_ht};
use crate::homogeneous::{d_vcg, nd_vcg, non_monotone_auction, ran_hm};
use crate::model::{
    requester_surplus, AgentId, AgentSet, ForwardInstance, HetInstance, HomInstance, Instance,
    Invites, Outcome,
};
use crate::money::Money;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Homogeneous,
    Heterogeneous,
    Forward,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Homogeneous => "homogeneous",
            Variant::Heterogeneous => "heterogeneous",
            Variant::Forward => "forward",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    RanHm,
    DVcg,
    NdVcg,
    NonMonotone,
    RanHt,
    LocalGreedy,
    Idm,
    DnaMu,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 8] = [
        MechanismKind::RanHm,
        MechanismKind::DVcg,
        MechanismKind::NdVcg,
        MechanismKind::NonMonotone,
        MechanismKind::RanHt,
        MechanismKind::LocalGreedy,
        MechanismKind::Idm,
        MechanismKind::DnaMu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::RanHm => "ran-hm",
            MechanismKind::DVcg => "d-vcg",
            MechanismKind::NdVcg => "nd-vcg",
            MechanismKind::NonMonotone => "non-monotone",
            MechanismKind::RanHt => "ran-ht",
            MechanismKind::LocalGreedy => "local-greedy",
            MechanismKind::Idm => "idm",
            MechanismKind::DnaMu => "dna-mu",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            MechanismKind::RanHm
            | MechanismKind::DVcg
            | MechanismKind::NdVcg
            | MechanismKind::NonMonotone => Variant::Homogeneous,
            MechanismKind::RanHt | MechanismKind::LocalGreedy => Variant::Heterogeneous,
            MechanismKind::Idm | MechanismKind::DnaMu => Variant::Forward,
        }
    }

    fn mismatch(self, variant: Variant) -> Error {
        Error::VariantMismatch {
            mechanism: self.name().to_string(),
            variant: variant.name(),
        }
    }

    pub fn run_hom(self, inst: &HomInstance) -> Result<Outcome> {
        Ok(match self {
            MechanismKind::RanHm => ran_hm(inst),
            MechanismKind::DVcg => d_vcg(inst),
            MechanismKind::NdVcg => nd_vcg(inst),
            MechanismKind::NonMonotone => non_monotone_auction(inst),
            _ => return Err(self.mismatch(Variant::Homogeneous)),
        })
    }

    pub fn run_het(self, inst: &HetInstance) -> Result<Outcome> {
        Ok(match self {
            MechanismKind::RanHt => ran_ht(inst),
            MechanismKind::LocalGreedy => local_greedy(inst),
            _ => return Err(self.mismatch(Variant::Heterogeneous)),
        })
    }

    pub fn run_forward(self, inst: &ForwardInstance) -> Result<Outcome> {
        Ok(match self {
            MechanismKind::Idm => idm(inst),
            MechanismKind::DnaMu => dna_mu(inst),
            _ => return Err(self.mismatch(Variant::Forward)),
        })
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        MechanismKind::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown mechanism `{s}`")))
    }
}

/// An instance of any variant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyInstance {
    Hom(HomInstance),
    Het(HetInstance),
    Forward(ForwardInstance),
}

impl AnyInstance {
    pub fn variant(&self) -> Variant {
        match self {
            AnyInstance::Hom(_) => Variant::Homogeneous,
            AnyInstance::Het(_) => Variant::Heterogeneous,
            AnyInstance::Forward(_) => Variant::Forward,
        }
    }

    pub fn run(&self, mechanism: MechanismKind) -> Result<Outcome> {
        match self {
            AnyInstance::Hom(i) => mechanism.run_hom(i),
            AnyInstance::Het(i) => mechanism.run_het(i),
            AnyInstance::Forward(i) => mechanism.run_forward(i),
        }
    }
}

/// Which way money flows to the agents under study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Agents are sellers; utility is payment minus cost.
    Procurement,
    /// Agents are buyers; utility is value minus payment.
    Sale,
}

/// An instance viewed as a game: each agent reports a bid and an invitee set.
pub trait Scenario: Clone + Send + Sync {
    const SIDE: Side;

    fn agents(&self) -> AgentSet;
    /// Reported cost (per unit or per bundle) or value.
    fn bid(&self, agent: AgentId) -> Money;
    fn invitees(&self, agent: AgentId) -> &AgentSet;
    /// Copy of the scenario with `agent`'s report replaced.
    fn with_report(&self, agent: AgentId, bid: Money, invitees: AgentSet) -> Self;
    /// Bids above this never matter.
    fn bid_cap(&self) -> Money;
    /// Values that can appear in prices: every bid and reserve.
    fn anchors(&self) -> Vec<Money>;
    /// Utility of `agent` with true bid `truth` under `outcome`.
    fn utility(&self, outcome: &Outcome, agent: AgentId, truth: Money) -> Money;
    /// Surplus of the auctioneer; weak budget balance asks for `≥ 0`.
    fn auctioneer_surplus(&self, outcome: &Outcome) -> Money;
    /// Whether `agent` is a winner.
    fn wins(&self, outcome: &Outcome, agent: AgentId) -> bool {
        outcome.allocation.get(&agent).is_some_and(|u| *u > 0)
    }
}

fn paid(outcome: &Outcome, agent: AgentId) -> Money {
    outcome.payments.get(&agent).copied().unwrap_or(Money::ZERO)
}

fn units(outcome: &Outcome, agent: AgentId) -> u64 {
    outcome.allocation.get(&agent).copied().unwrap_or(0)
}

fn replace<R: Clone, S: Clone + Invites>(
    inst: &Instance<R, S>,
    agent: AgentId,
    edit: impl FnOnce(&mut S),
) -> Instance<R, S> {
    let mut dev = inst.clone();
    if let Some(s) = dev.suppliers.get_mut(&agent) {
        edit(s);
    }
    dev
}

impl Scenario for HomInstance {
    const SIDE: Side = Side::Procurement;

    fn agents(&self) -> AgentSet {
        self.suppliers.keys().copied().collect()
    }

    fn bid(&self, agent: AgentId) -> Money {
        self.suppliers[&agent].unit_cost
    }

    fn invitees(&self, agent: AgentId) -> &AgentSet {
        &self.suppliers[&agent].neighbors
    }

    fn with_report(&self, agent: AgentId, bid: Money, invitees: AgentSet) -> Self {
        replace(self, agent, |s| {
            s.unit_cost = bid;
            s.neighbors = invitees;
        })
    }

    fn bid_cap(&self) -> Money {
        self.requester.reserve_unit
    }

    fn anchors(&self) -> Vec<Money> {
        let mut out: Vec<Money> = self.suppliers.values().map(|s| s.unit_cost).collect();
        out.push(self.requester.reserve_unit);
        out
    }

    fn utility(&self, outcome: &Outcome, agent: AgentId, truth: Money) -> Money {
        paid(outcome, agent) - truth.times(units(outcome, agent))
    }

    fn auctioneer_surplus(&self, outcome: &Outcome) -> Money {
        requester_surplus(outcome, self)
    }
}

impl Scenario for HetInstance {
    const SIDE: Side = Side::Procurement;

    fn agents(&self) -> AgentSet {
        self.suppliers.keys().copied().collect()
    }

    fn bid(&self, agent: AgentId) -> Money {
        self.suppliers[&agent].total_cost
    }

    fn invitees(&self, agent: AgentId) -> &AgentSet {
        &self.suppliers[&agent].neighbors
    }

    fn with_report(&self, agent: AgentId, bid: Money, invitees: AgentSet) -> Self {
        replace(self, agent, |s| {
            s.total_cost = bid;
            s.neighbors = invitees;
        })
    }

    fn bid_cap(&self) -> Money {
        self.budget()
    }

    fn anchors(&self) -> Vec<Money> {
        let mut out: Vec<Money> = self.suppliers.values().map(|s| s.total_cost).collect();
        out.extend(self.requester.reserve.values().copied());
        out
    }

    fn utility(&self, outcome: &Outcome, agent: AgentId, truth: Money) -> Money {
        let cost = if units(outcome, agent) > 0 { truth } else { Money::ZERO };
        paid(outcome, agent) - cost
    }

    fn auctioneer_surplus(&self, outcome: &Outcome) -> Money {
        requester_surplus(outcome, self)
    }
}

impl Scenario for ForwardInstance {
    const SIDE: Side = Side::Sale;

    fn agents(&self) -> AgentSet {
        self.suppliers.keys().copied().collect()
    }

    fn bid(&self, agent: AgentId) -> Money {
        self.suppliers[&agent].valuation
    }

    fn invitees(&self, agent: AgentId) -> &AgentSet {
        &self.suppliers[&agent].neighbors
    }

    fn with_report(&self, agent: AgentId, bid: Money, invitees: AgentSet) -> Self {
        replace(self, agent, |s| {
            s.valuation = bid;
            s.neighbors = invitees;
        })
    }

    fn bid_cap(&self) -> Money {
        self.suppliers
            .values()
            .map(|b| b.valuation)
            .max()
            .unwrap_or(Money::ZERO)
            + Money::ONE
    }

    fn anchors(&self) -> Vec<Money> {
        self.suppliers.values().map(|b| b.valuation).collect()
    }

    fn utility(&self, outcome: &Outcome, agent: AgentId, truth: Money) -> Money {
        let value = if units(outcome, agent) > 0 { truth } else { Money::ZERO };
        value - paid(outcome, agent)
    }

    fn auctioneer_surplus(&self, outcome: &Outcome) -> Money {
        outcome.total_payments()
    }
}

/// A mechanism bound to the scenario type it accepts.
pub trait Mechanism<S: Scenario>: Sync {
    fn name(&self) -> String;
    fn run(&self, scenario: &S) -> Outcome;
}

/// A named plain function as a mechanism.
pub struct FnMechanism<S> {
    pub name: &'static str,
    pub run: fn(&S) -> Outcome,
}

impl<S: Scenario> Mechanism<S> for FnMechanism<S> {
    fn name(&self) -> String {
        self.name.to_string()
    }

    fn run(&self, scenario: &S) -> Outcome {
        (self.run)(scenario)
    }
}

/// Binds a kind to its homogeneous implementation.
pub fn hom_mechanism(kind: MechanismKind) -> Result<FnMechanism<HomInstance>> {
    let run: fn(&HomInstance) -> Outcome = match kind {
        MechanismKind::RanHm => ran_hm,
        MechanismKind::DVcg => d_vcg,
        MechanismKind::NdVcg => nd_vcg,
        MechanismKind::NonMonotone => non_monotone_auction,
        _ => return Err(kind.mismatch(Variant::Homogeneous)),
    };
    Ok(FnMechanism {
        name: kind.name(),
        run,
    })
}

pub fn het_mechanism(kind: MechanismKind) -> Result<FnMechanism<HetInstance>> {
    let run: fn(&HetInstance) -> Outcome = match kind {
        MechanismKind::RanHt => ran_ht,
        MechanismKind::LocalGreedy => local_greedy,
        _ => return Err(kind.mismatch(Variant::Heterogeneous)),
    };
    Ok(FnMechanism {
        name: kind.name(),
        run,
    })
}

pub fn forward_mechanism(kind: MechanismKind) -> Result<FnMechanism<ForwardInstance>> {
    let run: fn(&ForwardInstance) -> Outcome = match kind {
        MechanismKind::Idm => idm,
        MechanismKind::DnaMu => dna_mu,
        _ => return Err(kind.mismatch(Variant::Forward)),
    };
    Ok(FnMechanism {
        name: kind.name(),
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in MechanismKind::ALL {
            assert_eq!(m.name().parse::<MechanismKind>().unwrap(), m);
        }
        assert_eq!("RAN_HM".parse::<MechanismKind>().unwrap(), MechanismKind::RanHm);
        assert!("vcg".parse::<MechanismKind>().is_err());
    }

    #[test]
    fn wrong_variant_is_reported() {
        let err = hom_mechanism(MechanismKind::RanHt).err().unwrap();
        assert!(matches!(err, Error::VariantMismatch { variant: "homogeneous", .. }));
        assert!(forward_mechanism(MechanismKind::Idm).is_ok());
    }
}
