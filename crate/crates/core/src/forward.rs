//! Forward (sale) diffusion auctions with unit-demand buyers.
//!
//! In these outcomes `payments` are what a buyer pays the seller; a negative
//! payment is a reward for diffusion.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::{AgentId, AgentSet, ForwardInstance, Outcome, SelfSupply};
use crate::money::Money;
use crate::network::{children_map, market_without, reachable_market, ReachableMarket};

/// `v_i − x_i` for a winner, `−x_i` otherwise.
pub fn forward_utility(outcome: &Outcome, agent: AgentId, valuation: Money) -> Result<Money> {
    let won = outcome.units(agent)? > 0;
    let paid = outcome.payment(agent)?;
    Ok(if won { valuation - paid } else { -paid })
}

/// What the seller collects.
pub fn seller_revenue(outcome: &Outcome) -> Money {
    outcome.total_payments()
}

fn highest<'a>(inst: &ForwardInstance, agents: impl IntoIterator<Item = &'a AgentId>) -> Money {
    agents
        .into_iter()
        .map(|a| inst.suppliers[a].valuation)
        .max()
        .unwrap_or(Money::ZERO)
}

/// Highest bidder (lowest id on ties) and the agents every path from the
/// seller to her must pass through, ordered by distance and ending with her.
pub fn critical_sequence(inst: &ForwardInstance, market: &ReachableMarket) -> Vec<AgentId> {
    let Some(top) = market
        .distance
        .keys()
        .copied()
        .max_by(|a, b| {
            inst.suppliers[a]
                .valuation
                .cmp(&inst.suppliers[b].valuation)
                .then(b.cmp(a))
        })
    else {
        return Vec::new();
    };
    let mut seq: Vec<AgentId> = market
        .priority_order()
        .into_iter()
        .filter(|&d| d != top && !market_without(inst, d).contains(top))
        .collect();
    seq.push(top);
    seq
}

/// Single-item information diffusion mechanism.
///
/// Walking the critical sequence, the first agent whose bid is the highest
/// once her successor's subtree is gone takes the item and pays the highest
/// bid in the market without her. Every agent before her is rewarded the
/// increase in that price her successor brings.
pub fn idm(inst: &ForwardInstance) -> Outcome {
    let market = reachable_market(inst);
    let mut outcome = Outcome::empty(SelfSupply::Units(1));
    for a in market.distance.keys() {
        outcome.enroll(*a);
    }
    let seq = critical_sequence(inst, &market);
    if seq.is_empty() {
        return outcome;
    }
    let without: Vec<Money> = seq
        .iter()
        .map(|&c| highest(inst, market_without(inst, c).distance.keys()))
        .collect();
    for (i, &c) in seq.iter().enumerate() {
        let last = i + 1 == seq.len();
        if last || inst.suppliers[&c].valuation >= without[i + 1] {
            outcome.award(c, 1, without[i]);
            outcome.self_supplied = SelfSupply::Units(0);
            break;
        }
        outcome.award(c, 0, without[i] - without[i + 1]);
    }
    outcome
}

/// `v*(S, k)`: the k-th highest valuation in `pool`, zero when `pool` has
/// fewer than `k` members.
fn kth_highest(inst: &ForwardInstance, pool: &AgentSet, k: u64) -> Money {
    let mut values: Vec<Money> = pool.iter().map(|a| inst.suppliers[a].valuation).collect();
    values.sort_unstable_by(|a, b| b.cmp(a));
    k.checked_sub(1)
        .and_then(|i| values.get(i as usize).copied())
        .unwrap_or(Money::ZERO)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnaTrace {
    pub outcome: Outcome,
    pub order: Vec<AgentId>,
    /// Price offered to each visited agent; `None` once the units ran out.
    pub prices: BTreeMap<AgentId, Option<Money>>,
}

/// Distance-ordered multi-unit diffusion auction for `inst.requester.units`
/// units.
pub fn dna_mu(inst: &ForwardInstance) -> Outcome {
    dna_mu_trace(inst).outcome
}

/// [`dna_mu`] with the price offered to every agent.
///
/// Agents are visited by `(distance, id)`. Agent `i` is offered the `k′`-th
/// highest bid among the remaining non-winners outside her own subtree and
/// buys when her bid is strictly higher.
pub fn dna_mu_trace(inst: &ForwardInstance) -> DnaTrace {
    let market = reachable_market(inst);
    let kids = children_map(inst, &market);
    let order = market.priority_order();
    let members = market.members();

    let mut left = inst.requester.units;
    let mut outcome = Outcome::empty(SelfSupply::Units(left));
    let mut winners = AgentSet::new();
    let mut prices = BTreeMap::new();
    for &i in &order {
        outcome.enroll(i);
        if left == 0 {
            prices.insert(i, None);
            continue;
        }
        let pool: AgentSet = members
            .iter()
            .filter(|a| **a != i && !kids[&i].contains(a) && !winners.contains(a))
            .copied()
            .collect();
        let price = kth_highest(inst, &pool, left);
        prices.insert(i, Some(price));
        if inst.suppliers[&i].valuation > price {
            outcome.award(i, 1, price);
            winners.insert(i);
            left -= 1;
        }
    }
    outcome.self_supplied = SelfSupply::Units(left);
    DnaTrace {
        outcome,
        order,
        prices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ForwardBidder, Seller};

    fn m(v: i128) -> Money {
        Money::from_int(v)
    }

    fn instance(units: u64, root: &[u32], bidders: &[(u32, i128, &[u32])]) -> ForwardInstance {
        let seller = Seller {
            units,
            neighbors: root.iter().map(|&i| AgentId(i)).collect(),
        };
        let bidders = bidders
            .iter()
            .map(|(id, v, out)| {
                (
                    AgentId(*id),
                    ForwardBidder {
                        valuation: m(*v),
                        neighbors: out.iter().map(|&i| AgentId(i)).collect(),
                    },
                )
            })
            .collect();
        ForwardInstance::new(seller, bidders).unwrap()
    }

    #[test]
    fn lone_bidder_gets_it_for_free() {
        let inst = instance(1, &[1], &[(1, 7, &[])]);
        let out = idm(&inst);
        assert_eq!(out.units(AgentId(1)).unwrap(), 1);
        assert_eq!(out.payment(AgentId(1)).unwrap(), Money::ZERO);
    }

    #[test]
    fn star_is_second_price() {
        let inst = instance(1, &[1, 2, 3], &[(1, 4, &[]), (2, 9, &[]), (3, 6, &[])]);
        let out = idm(&inst);
        assert_eq!(out.winners().collect::<Vec<_>>(), vec![AgentId(2)]);
        assert_eq!(out.payment(AgentId(2)).unwrap(), m(6));
        assert_eq!(seller_revenue(&out), m(6));
    }

    #[test]
    fn intermediary_can_win_the_item() {
        // 1 → 2, 1 is highest once 2's subtree is gone.
        let inst = instance(1, &[1, 3], &[(1, 8, &[2]), (2, 10, &[]), (3, 5, &[])]);
        let out = idm(&inst);
        assert_eq!(out.winners().collect::<Vec<_>>(), vec![AgentId(1)]);
        assert_eq!(out.payment(AgentId(1)).unwrap(), m(5));
        assert_eq!(forward_utility(&out, AgentId(1), m(8)).unwrap(), m(3));
        assert_eq!(out.payment(AgentId(2)).unwrap(), Money::ZERO);
    }

    #[test]
    fn empty_market_sells_nothing() {
        let inst = instance(1, &[], &[(1, 8, &[])]);
        assert_eq!(idm(&inst).winners().count(), 0);
        assert_eq!(dna_mu(&inst).winners().count(), 0);
    }

    #[test]
    fn more_units_than_bidders_sell_at_zero() {
        let inst = instance(5, &[1, 2], &[(1, 3, &[]), (2, 1, &[])]);
        let out = dna_mu(&inst);
        assert_eq!(out.winners().count(), 2);
        assert_eq!(out.total_payments(), Money::ZERO);
        assert_eq!(out.self_supplied, SelfSupply::Units(3));
    }

    #[test]
    fn units_run_out() {
        let inst = instance(1, &[1, 2], &[(1, 3, &[]), (2, 5, &[])]);
        let trace = dna_mu_trace(&inst);
        assert_eq!(trace.prices[&AgentId(1)], Some(m(5)));
        assert_eq!(trace.prices[&AgentId(2)], Some(m(3)));
        assert_eq!(trace.outcome.winners().collect::<Vec<_>>(), vec![AgentId(2)]);
    }
}
