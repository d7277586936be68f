//! Procurement of identical units: the layered reverse auction, the two VCG
//! baselines and the distance-ordered mechanism whose allocation is not
//! monotone.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{AgentId, AgentSet, HomInstance, Outcome, SelfSupply};
use crate::money::Money;
use crate::network::{children_map, market_division, market_without, reachable_market};

/// Units a supplier offers at a per-unit cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitOffer {
    pub agent: AgentId,
    pub units: u64,
    pub unit_cost: Money,
}

/// A cost-minimal way of filling a demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fill {
    /// Units per supplier; suppliers that supply nothing are absent.
    pub units: BTreeMap<AgentId, u64>,
    /// Units left to the requester acting as the virtual supplier.
    pub virtual_units: u64,
    pub cost: Money,
}

impl Fill {
    pub fn units_of(&self, agent: AgentId) -> u64 {
        self.units.get(&agent).copied().unwrap_or(0)
    }
}

/// Fills `demand` with the cheapest units.
///
/// With `reserve_unit = Some(v̄)` the requester joins as a virtual supplier
/// with unlimited capacity at `v̄`, losing ties to real suppliers. Ties between
/// real suppliers go to the lower id. Sorting by unit cost is exactly optimal
/// for additive costs.
pub fn optimal_multiunit_allocation(
    offers: &[UnitOffer],
    demand: u64,
    reserve_unit: Option<Money>,
) -> Result<Fill> {
    let mut sorted: Vec<&UnitOffer> = offers.iter().filter(|o| o.units > 0).collect();
    sorted.sort_by_key(|o| (o.unit_cost, o.agent));

    let mut fill = Fill {
        units: BTreeMap::new(),
        virtual_units: 0,
        cost: Money::ZERO,
    };
    let mut left = demand;
    for offer in sorted {
        if left == 0 {
            break;
        }
        if let Some(v) = reserve_unit {
            if offer.unit_cost > v {
                break;
            }
        }
        let take = offer.units.min(left);
        fill.units.insert(offer.agent, take);
        fill.cost += offer.unit_cost.times(take);
        left -= take;
    }
    if left > 0 {
        match reserve_unit {
            Some(v) => {
                fill.virtual_units = left;
                fill.cost += v.times(left);
            }
            None => {
                return Err(Error::Unfillable {
                    demand,
                    capacity: demand - left,
                })
            }
        }
    }
    Ok(fill)
}

/// Unit offers of `agents` at their reported abilities and costs.
pub fn offers_of(inst: &HomInstance, agents: &AgentSet) -> Vec<UnitOffer> {
    agents
        .iter()
        .map(|a| {
            let s = &inst.suppliers[a];
            UnitOffer {
                agent: *a,
                units: s.ability,
                unit_cost: s.unit_cost,
            }
        })
        .collect()
}

fn restrict(offers: &[UnitOffer], keep: impl Fn(AgentId) -> bool) -> Vec<UnitOffer> {
    offers.iter().filter(|o| keep(o.agent)).copied().collect()
}

/// What happened in one layer of the layered auction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerReport {
    /// 1-based layer index.
    pub layer: usize,
    /// Suppliers with unit cost at most the reserve.
    pub eligible: AgentSet,
    /// Demand left when the layer was entered.
    pub demand_in: u64,
    /// Whether the eligible supply exceeded the remaining demand.
    pub oversupplied: bool,
    /// Cost of the layer's allocation plus the remaining demand priced at the
    /// reserve.
    pub cost_with_virtual: Money,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HmTrace {
    pub outcome: Outcome,
    pub layers: Vec<LayerReport>,
}

/// The layered reverse auction for identical units.
pub fn ran_hm(inst: &HomInstance) -> Outcome {
    ran_hm_trace(inst).outcome
}

/// [`ran_hm`] plus a per-layer report.
///
/// Layers are visited from the requester outwards. While a layer's eligible
/// supply does not exceed the remaining demand, every eligible supplier sells
/// her whole ability at the reserve price. The first oversupplied layer runs
/// a VCG auction against the virtual supplier and ends the procedure.
pub fn ran_hm_trace(inst: &HomInstance) -> HmTrace {
    let reserve = inst.requester.reserve_unit;
    let market = reachable_market(inst);
    let division = market_division(&market);

    let mut outcome = Outcome::empty(SelfSupply::Units(0));
    for a in market.distance.keys() {
        outcome.enroll(*a);
    }

    let mut left = inst.requester.demand;
    let mut layers = Vec::new();
    for (k, layer) in division.layers.iter().enumerate() {
        if left == 0 {
            break;
        }
        let eligible: AgentSet = layer
            .iter()
            .filter(|a| inst.suppliers[*a].unit_cost <= reserve)
            .copied()
            .collect();
        let supply: u64 = eligible.iter().map(|a| inst.suppliers[a].ability).sum();
        let demand_in = left;

        if left >= supply {
            let mut cost = Money::ZERO;
            for a in &eligible {
                let s = &inst.suppliers[a];
                if s.ability > 0 {
                    outcome.award(*a, s.ability, reserve.times(s.ability));
                    cost += s.unit_cost.times(s.ability);
                }
            }
            left -= supply;
            layers.push(LayerReport {
                layer: k + 1,
                eligible,
                demand_in,
                oversupplied: false,
                cost_with_virtual: cost + reserve.times(left),
            });
            continue;
        }

        let offers = offers_of(inst, &eligible);
        let fill = optimal_multiunit_allocation(&offers, left, Some(reserve))
            .expect("virtual supplier always fills the demand");
        for (&a, &units) in &fill.units {
            let own = inst.suppliers[&a].unit_cost.times(units);
            let without = optimal_multiunit_allocation(&restrict(&offers, |b| b != a), left, Some(reserve))
                .expect("virtual supplier always fills the demand");
            outcome.award(a, units, without.cost - (fill.cost - own));
        }
        left = fill.virtual_units;
        layers.push(LayerReport {
            layer: k + 1,
            eligible,
            demand_in,
            oversupplied: true,
            cost_with_virtual: fill.cost,
        });
        break;
    }
    outcome.self_supplied = SelfSupply::Units(left);
    HmTrace { outcome, layers }
}

/// VCG against the virtual supplier. `removal(a)` is the set of agents that
/// disappear when `a` does not take part.
fn vcg(
    offers: &[UnitOffer],
    demand: u64,
    reserve: Money,
    removal: impl Fn(AgentId) -> AgentSet,
) -> Outcome {
    let fill = optimal_multiunit_allocation(offers, demand, Some(reserve))
        .expect("virtual supplier always fills the demand");
    let mut outcome = Outcome::empty(SelfSupply::Units(fill.virtual_units));
    for o in offers {
        let units = fill.units_of(o.agent);
        let gone = removal(o.agent);
        // Removing agents that supply nothing leaves the optimum unchanged.
        if gone.iter().all(|g| fill.units_of(*g) == 0) {
            outcome.award(o.agent, units, o.unit_cost.times(units));
            continue;
        }
        let without = optimal_multiunit_allocation(
            &restrict(offers, |b| !gone.contains(&b)),
            demand,
            Some(reserve),
        )
        .expect("virtual supplier always fills the demand");
        let payment = without.cost - (fill.cost - o.unit_cost.times(units));
        outcome.award(o.agent, units, payment);
    }
    outcome
}

/// VCG over the whole diffusion-closed market.
///
/// Each supplier is paid the social-cost increase caused by her absence,
/// where her absence also removes every supplier only she invited. This
/// rewards pure intermediaries and is what makes the requester's budget
/// unsafe.
pub fn d_vcg(inst: &HomInstance) -> Outcome {
    let market = reachable_market(inst);
    let members = market.members();
    let offers = offers_of(inst, &members);
    vcg(
        &offers,
        inst.requester.demand,
        inst.requester.reserve_unit,
        |a| {
            let rest = market_without(inst, a).members();
            members.difference(&rest).copied().collect()
        },
    )
}

/// VCG restricted to the requester's direct invitees.
pub fn nd_vcg(inst: &HomInstance) -> Outcome {
    let market = reachable_market(inst);
    let local: AgentSet = market
        .distance
        .iter()
        .filter(|(_, d)| **d == 1)
        .map(|(a, _)| *a)
        .collect();
    let offers = offers_of(inst, &local);
    vcg(
        &offers,
        inst.requester.demand,
        inst.requester.reserve_unit,
        |a| AgentSet::from([a]),
    )
}

/// Distance-ordered VCG variant whose allocation is not monotone.
///
/// Suppliers are visited by `(distance, id)`. Supplier `i` receives her share
/// of the optimum over the market without her children (capped by the demand
/// still open) and is paid `C(without i and children) − (C(without children)
/// − π_i c_i)`. Every optimum is taken for the full demand with the virtual
/// supplier present.
pub fn non_monotone_auction(inst: &HomInstance) -> Outcome {
    let reserve = inst.requester.reserve_unit;
    let demand = inst.requester.demand;
    let market = reachable_market(inst);
    let members = market.members();
    let offers = offers_of(inst, &members);
    let kids = children_map(inst, &market);

    let mut outcome = Outcome::empty(SelfSupply::Units(0));
    for a in &members {
        outcome.enroll(*a);
    }
    let mut left = demand;
    for i in market.priority_order() {
        if left == 0 {
            break;
        }
        let d_i = &kids[&i];
        let without_kids = optimal_multiunit_allocation(
            &restrict(&offers, |b| !d_i.contains(&b)),
            demand,
            Some(reserve),
        )
        .expect("virtual supplier always fills the demand");
        let without_i = optimal_multiunit_allocation(
            &restrict(&offers, |b| b != i && !d_i.contains(&b)),
            demand,
            Some(reserve),
        )
        .expect("virtual supplier always fills the demand");
        let units = without_kids.units_of(i).min(left);
        left -= units;
        let own = inst.suppliers[&i].unit_cost.times(units);
        outcome.award(i, units, without_i.cost - (without_kids.cost - own));
    }
    outcome.self_supplied = SelfSupply::Units(left);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{requester_cost, social_cost, utility_hm, RequesterHM, SupplierHM};

    fn m(v: i128) -> Money {
        Money::from_int(v)
    }

    fn offer(agent: u32, units: u64, cost: i128) -> UnitOffer {
        UnitOffer {
            agent: AgentId(agent),
            units,
            unit_cost: m(cost),
        }
    }

    fn instance(
        demand: u64,
        reserve: i128,
        root: &[u32],
        suppliers: &[(u32, u64, i128, &[u32])],
    ) -> HomInstance {
        let requester = RequesterHM {
            demand,
            reserve_unit: m(reserve),
            neighbors: root.iter().map(|&i| AgentId(i)).collect(),
        };
        let suppliers = suppliers
            .iter()
            .map(|(id, ability, cost, out)| {
                (
                    AgentId(*id),
                    SupplierHM {
                        ability: *ability,
                        unit_cost: m(*cost),
                        neighbors: out.iter().map(|&i| AgentId(i)).collect(),
                    },
                )
            })
            .collect();
        HomInstance::new(requester, suppliers).unwrap()
    }

    /// Every way of taking `0..=units` from each offer, the rest at `v̄`.
    fn brute_force_cost(offers: &[UnitOffer], demand: u64, reserve: Money) -> Money {
        fn go(offers: &[UnitOffer], left: u64, reserve: Money) -> Money {
            match offers.split_first() {
                None => reserve.times(left),
                Some((o, rest)) => (0..=o.units.min(left))
                    .map(|k| o.unit_cost.times(k) + go(rest, left - k, reserve))
                    .min()
                    .unwrap(),
            }
        }
        go(offers, demand, reserve)
    }

    #[test]
    fn cheapest_units_fill_the_demand() {
        let offers = [offer(1, 2, 4), offer(2, 2, 6), offer(3, 2, 9)];
        let fill = optimal_multiunit_allocation(&offers, 3, Some(m(10))).unwrap();
        assert_eq!(fill.units, BTreeMap::from([(AgentId(1), 2), (AgentId(2), 1)]));
        assert_eq!(fill.virtual_units, 0);
        assert_eq!(fill.cost, m(14));
        assert_eq!(fill.cost, brute_force_cost(&offers, 3, m(10)));
    }

    #[test]
    fn zero_demand_allocates_nothing() {
        let fill = optimal_multiunit_allocation(&[offer(1, 2, 4)], 0, Some(m(10))).unwrap();
        assert!(fill.units.is_empty());
        assert_eq!(fill.cost, Money::ZERO);
    }

    #[test]
    fn single_cheap_supplier_takes_everything() {
        let fill = optimal_multiunit_allocation(&[offer(1, 5, 3)], 4, Some(m(10))).unwrap();
        assert_eq!(fill.units_of(AgentId(1)), 4);
    }

    #[test]
    fn unfillable_without_virtual_supplier() {
        let err = optimal_multiunit_allocation(&[offer(1, 2, 3)], 5, None).unwrap_err();
        assert!(matches!(err, Error::Unfillable { demand: 5, capacity: 2 }));
    }

    #[test]
    fn virtual_supplier_loses_ties() {
        let fill = optimal_multiunit_allocation(&[offer(1, 2, 10)], 3, Some(m(10))).unwrap();
        assert_eq!(fill.units_of(AgentId(1)), 2);
        assert_eq!(fill.virtual_units, 1);
    }

    fn one_layer() -> HomInstance {
        instance(3, 10, &[1, 2, 3], &[(1, 2, 4, &[]), (2, 2, 6, &[]), (3, 2, 9, &[])])
    }

    #[test]
    fn oversupplied_layer_pays_clarke_pivots() {
        let inst = one_layer();
        let out = ran_hm(&inst);
        assert_eq!(out.units(AgentId(1)).unwrap(), 2);
        assert_eq!(out.units(AgentId(2)).unwrap(), 1);
        assert_eq!(out.units(AgentId(3)).unwrap(), 0);
        assert_eq!(out.payment(AgentId(1)).unwrap(), m(15));
        assert_eq!(out.payment(AgentId(2)).unwrap(), m(9));
        assert_eq!(out.payment(AgentId(3)).unwrap(), Money::ZERO);
        let j1 = &inst.suppliers[&AgentId(1)];
        assert_eq!(utility_hm(&out, AgentId(1), j1).unwrap(), m(7));
        assert_eq!(out.self_supplied, SelfSupply::Units(0));
    }

    #[test]
    fn brute_force_pivots_agree() {
        let offers = [offer(1, 2, 4), offer(2, 2, 6), offer(3, 2, 9)];
        let all = brute_force_cost(&offers, 3, m(10));
        let without_1 = brute_force_cost(&offers[1..], 3, m(10));
        let without_2 = brute_force_cost(&[offers[0], offers[2]], 3, m(10));
        assert_eq!(without_1 - (all - m(8)), m(15));
        assert_eq!(without_2 - (all - m(6)), m(9));
    }

    #[test]
    fn undersupplied_layer_pays_the_reserve_and_moves_on() {
        let inst = instance(5, 10, &[1], &[(1, 2, 3, &[2]), (2, 10, 4, &[])]);
        let trace = ran_hm_trace(&inst);
        let out = &trace.outcome;
        assert_eq!(out.units(AgentId(1)).unwrap(), 2);
        assert_eq!(out.payment(AgentId(1)).unwrap(), m(20));
        assert!(!trace.layers[0].oversupplied);
        assert_eq!(trace.layers[1].demand_in, 3);
        assert_eq!(out.units(AgentId(2)).unwrap(), 3);
        assert_eq!(out.payment(AgentId(2)).unwrap(), m(30));
    }

    #[test]
    fn nobody_eligible_means_self_supply() {
        let inst = instance(4, 10, &[1], &[(1, 5, 11, &[2]), (2, 5, 12, &[])]);
        let out = ran_hm(&inst);
        assert_eq!(out.winners().count(), 0);
        assert_eq!(out.self_supplied, SelfSupply::Units(4));
        assert_eq!(requester_cost(&out, &inst), m(40));
    }

    #[test]
    fn single_layer_vcg_baselines_match_ran_hm() {
        let inst = one_layer();
        assert_eq!(d_vcg(&inst), ran_hm(&inst));
        assert_eq!(nd_vcg(&inst), ran_hm(&inst));
    }

    #[test]
    fn zero_demand_is_empty() {
        let inst = instance(0, 10, &[1], &[(1, 2, 4, &[])]);
        for out in [ran_hm(&inst), d_vcg(&inst), nd_vcg(&inst), non_monotone_auction(&inst)] {
            assert_eq!(out.winners().count(), 0);
            assert_eq!(out.total_payments(), Money::ZERO);
        }
    }

    #[test]
    fn d_vcg_runs_a_deficit_on_a_chain() {
        // p → a → b, b is cheap but only reachable through a.
        let inst = instance(1, 10, &[1], &[(1, 1, 9, &[2]), (2, 1, 1, &[])]);
        let out = d_vcg(&inst);
        assert_eq!(out.units(AgentId(2)).unwrap(), 1);
        assert_eq!(out.payment(AgentId(2)).unwrap(), m(9));
        // a is rewarded for bringing b: C(without a and b) − C = 10 − 1.
        assert_eq!(out.payment(AgentId(1)).unwrap(), m(9));
        assert_eq!(requester_cost(&out, &inst), m(18));
        assert!(crate::model::requester_surplus(&out, &inst).is_negative());
        // The layered auction never overspends.
        let layered = ran_hm(&inst);
        assert!(!crate::model::requester_surplus(&layered, &inst).is_negative());
    }

    #[test]
    fn nd_vcg_without_neighbors_self_supplies() {
        let inst = instance(3, 10, &[], &[(1, 5, 1, &[])]);
        let out = nd_vcg(&inst);
        assert_eq!(out.self_supplied, SelfSupply::Units(3));
        assert_eq!(social_cost(&out, &inst).unwrap(), m(30));
    }

    #[test]
    fn non_monotone_reduces_to_vcg_shares_in_one_layer() {
        let inst = one_layer();
        let out = non_monotone_auction(&inst);
        assert_eq!(out.units(AgentId(1)).unwrap(), 2);
        assert_eq!(out.units(AgentId(2)).unwrap(), 1);
        assert_eq!(out.payment(AgentId(1)).unwrap(), m(15));
        assert_eq!(out.payment(AgentId(2)).unwrap(), m(9));
    }
}
