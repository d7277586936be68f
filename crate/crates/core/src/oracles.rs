//! Exhaustive reference solvers. They refuse inputs beyond their size guards
//! instead of approximating.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::homogeneous::{Fill, UnitOffer};
use crate::mechanism::{Mechanism, Scenario, Side};
use crate::model::{AgentId, AgentSet, HetInstance};
use crate::money::Money;
use crate::network::reachable_market;

pub const MULTIUNIT_MAX_SUPPLIERS: usize = 12;
pub const MULTIUNIT_MAX_DEMAND: u64 = 30;
pub const SET_COVER_MAX_SUPPLIERS: usize = 20;

/// Minimum cost of `demand` units over every per-supplier unit count, the
/// rest at `reserve_unit` (or infeasible without one).
///
/// Dynamic program over suppliers and units used so far; it visits the same
/// choice space as enumerating every count vector.
pub fn min_cost_multiunit_oracle(
    offers: &[UnitOffer],
    demand: u64,
    reserve_unit: Option<Money>,
) -> Result<Fill> {
    if offers.len() > MULTIUNIT_MAX_SUPPLIERS || demand > MULTIUNIT_MAX_DEMAND {
        return Err(Error::OracleTooLarge(format!(
            "{} suppliers and demand {} (limits {} and {})",
            offers.len(),
            demand,
            MULTIUNIT_MAX_SUPPLIERS,
            MULTIUNIT_MAX_DEMAND
        )));
    }
    let d = demand as usize;
    // best[k][u]: cheapest way for the first k offers to supply exactly u units.
    let mut best: Vec<Vec<Option<Money>>> = vec![vec![None; d + 1]; offers.len() + 1];
    let mut choice = vec![vec![0u64; d + 1]; offers.len() + 1];
    best[0][0] = Some(Money::ZERO);
    for (k, o) in offers.iter().enumerate() {
        for u in 0..=d {
            let Some(base) = best[k][u] else { continue };
            for take in 0..=o.units.min((d - u) as u64) {
                let cost = base + o.unit_cost.times(take);
                let slot = &mut best[k + 1][u + take as usize];
                if slot.is_none_or(|c| cost < c) {
                    *slot = Some(cost);
                    choice[k + 1][u + take as usize] = take;
                }
            }
        }
    }
    let last = &best[offers.len()];
    let (used, cost) = (0..=d)
        .filter_map(|u| {
            let c = last[u]?;
            match reserve_unit {
                Some(v) => Some((u, c + v.times((d - u) as u64))),
                None if u == d => Some((u, c)),
                None => None,
            }
        })
        .min_by_key(|(_, c)| *c)
        .ok_or(Error::Unfillable {
            demand,
            capacity: offers.iter().map(|o| o.units).sum(),
        })?;

    let mut units = BTreeMap::new();
    let mut u = used;
    for k in (1..=offers.len()).rev() {
        let take = choice[k][u];
        if take > 0 {
            units.insert(offers[k - 1].agent, take);
        }
        u -= take as usize;
    }
    Ok(Fill {
        units,
        virtual_units: (d - used) as u64,
        cost,
    })
}

/// Minimum social cost over every subset of reachable suppliers: their costs
/// plus the reserve of every task nobody in the subset covers.
pub fn min_social_cost_ht(inst: &HetInstance) -> Result<(AgentSet, Money)> {
    let members: Vec<AgentId> = reachable_market(inst).members().into_iter().collect();
    if members.len() > SET_COVER_MAX_SUPPLIERS {
        return Err(Error::OracleTooLarge(format!(
            "{} reachable suppliers (limit {})",
            members.len(),
            SET_COVER_MAX_SUPPLIERS
        )));
    }
    let tasks: Vec<_> = inst.requester.reserve.iter().collect();
    let index: BTreeMap<_, _> = tasks.iter().enumerate().map(|(i, (t, _))| (**t, i)).collect();
    let bundles: Vec<Vec<usize>> = members
        .iter()
        .map(|a| {
            inst.suppliers[a]
                .bundle
                .iter()
                .filter_map(|t| index.get(t).copied())
                .collect()
        })
        .collect();
    let costs: Vec<Money> = members.iter().map(|a| inst.suppliers[a].total_cost).collect();

    let mut cover = vec![0u32; tasks.len()];
    let mut open: Money = tasks.iter().map(|(_, v)| **v).sum();
    let mut paid = Money::ZERO;
    let mut mask = 0u64;
    let mut best = (0u64, open);
    for step in 1u64..(1 << members.len()) {
        // Gray code: flip the lowest set bit of the step counter.
        let bit = step.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let adding = mask & (1 << bit) != 0;
        for &t in &bundles[bit] {
            if adding {
                cover[t] += 1;
                if cover[t] == 1 {
                    open -= *tasks[t].1;
                }
            } else {
                cover[t] -= 1;
                if cover[t] == 0 {
                    open += *tasks[t].1;
                }
            }
        }
        if adding {
            paid += costs[bit];
        } else {
            paid -= costs[bit];
        }
        let total = paid + open;
        if total < best.1 {
            best = (mask, total);
        }
    }
    let chosen = members
        .iter()
        .enumerate()
        .filter(|(i, _)| best.0 & (1 << i) != 0)
        .map(|(_, a)| *a)
        .collect();
    Ok((chosen, best.1))
}

/// Critical winning bid of `agent` with invitee report `invitees` (her true
/// one when `None`), everything else fixed.
///
/// For procurement this is the supremum cost at which she still wins, for a
/// sale the infimum value. `None` when she never wins on `[0, cap]`. When
/// she still wins at the cap the cap is returned.
///
/// Bisection on exact rationals narrows the threshold to an interval shorter
/// than `1/(2D)`, where `D` is the common denominator of all bids and
/// reserves; the unique multiple of `1/D` inside it is then confirmed by
/// re-running the mechanism just below and just above it.
pub fn critical_cost_search<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    agent: AgentId,
    invitees: Option<&AgentSet>,
) -> Option<Money> {
    let r = invitees
        .cloned()
        .unwrap_or_else(|| scenario.invitees(agent).clone());
    let wins = |bid: Money| {
        let dev = scenario.with_report(agent, bid, r.clone());
        dev.wins(&mechanism.run(&dev), agent)
    };
    let cap = scenario.bid_cap();
    let anchors = scenario.anchors();
    let denom = Money::common_denominator(anchors.iter());
    let resolution = Money::new(1, 2 * denom);

    // `good` wins, `bad` loses; for a sale the roles of the ends swap.
    let (mut good, mut bad) = match S::SIDE {
        Side::Procurement => {
            if !wins(Money::ZERO) {
                return None;
            }
            if wins(cap) {
                return Some(cap);
            }
            (Money::ZERO, cap)
        }
        Side::Sale => {
            if !wins(cap) {
                return None;
            }
            if wins(Money::ZERO) {
                return Some(Money::ZERO);
            }
            (cap, Money::ZERO)
        }
    };
    while (good - bad).abs() >= resolution {
        let mid = good.midpoint(bad);
        if wins(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let (lo, hi) = (good.min(bad), good.max(bad));
    let snapped = lo.ceil_to(denom);
    let probe = Money::new(1, 4 * denom);
    let confirmed = snapped <= hi
        && match S::SIDE {
            Side::Procurement => {
                (snapped.is_zero() || wins(snapped - probe)) && !wins(snapped + probe)
            }
            Side::Sale => {
                (snapped.is_zero() || !wins(snapped - probe)) && wins(snapped + probe)
            }
        };
    if confirmed {
        Some(snapped)
    } else {
        log::warn!("critical bid of agent {agent} is not a multiple of 1/{denom}; returning bisection bound");
        Some(good)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogeneous::optimal_multiunit_allocation;
    use proptest::prelude::*;

    fn offer(agent: u32, units: u64, cost: i128) -> UnitOffer {
        UnitOffer {
            agent: AgentId(agent),
            units,
            unit_cost: Money::from_int(cost),
        }
    }

    #[test]
    fn three_suppliers_cost_fourteen() {
        let offers = [offer(1, 2, 4), offer(2, 2, 6), offer(3, 2, 9)];
        let fill = min_cost_multiunit_oracle(&offers, 3, Some(Money::from_int(10))).unwrap();
        assert_eq!(fill.cost, Money::from_int(14));
        assert_eq!(fill.units_of(AgentId(1)), 2);
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let fill = min_cost_multiunit_oracle(&[offer(1, 2, 4)], 0, Some(Money::ONE)).unwrap();
        assert_eq!(fill.cost, Money::ZERO);
        assert!(fill.units.is_empty());
    }

    #[test]
    fn guards_refuse_large_inputs() {
        let offers: Vec<_> = (1..=13).map(|i| offer(i, 1, 1)).collect();
        assert!(matches!(
            min_cost_multiunit_oracle(&offers, 3, None),
            Err(Error::OracleTooLarge(_))
        ));
        assert!(matches!(
            min_cost_multiunit_oracle(&offers[..2], 31, None),
            Err(Error::OracleTooLarge(_))
        ));
    }

    #[test]
    fn infeasible_without_reserve() {
        assert!(matches!(
            min_cost_multiunit_oracle(&[offer(1, 1, 1)], 2, None),
            Err(Error::Unfillable { .. })
        ));
    }

    proptest! {
        #[test]
        fn oracle_agrees_with_sorting(
            specs in proptest::collection::vec((0u64..5, 0i128..15), 0..7),
            demand in 0u64..12,
            reserve in 1i128..15,
        ) {
            let offers: Vec<_> = specs
                .iter()
                .enumerate()
                .map(|(i, (u, c))| offer(i as u32 + 1, *u, *c))
                .collect();
            let v = Some(Money::from_int(reserve));
            let dp = min_cost_multiunit_oracle(&offers, demand, v).unwrap();
            let greedy = optimal_multiunit_allocation(&offers, demand, v).unwrap();
            prop_assert_eq!(dp.cost, greedy.cost);
            let total: u64 = dp.units.values().sum::<u64>() + dp.virtual_units;
            prop_assert_eq!(total, demand);
        }
    }
}
