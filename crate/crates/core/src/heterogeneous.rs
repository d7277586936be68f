//! Procurement of distinct tasks from single-minded bundle suppliers.

use crate::error::{Error, Result};
use crate::model::{AgentId, AgentSet, HetInstance, Outcome, SelfSupply, SupplierHT, TaskSet};
use crate::money::Money;
use crate::network::{market_division, reachable_market};

/// Knobs for the greedy selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HtOptions {
    /// Never select a supplier that would cover nothing new. Such a supplier
    /// can only have zero marginal utility at zero cost, and selecting her
    /// changes nothing but the winner list.
    pub skip_zero_marginal: bool,
}

impl Default for HtOptions {
    fn default() -> Self {
        HtOptions {
            skip_zero_marginal: true,
        }
    }
}

/// `mv_i(L)`: reserve value of the uncovered tasks in the bundle.
pub fn marginal_valuation(supplier: &SupplierHT, uncovered: &TaskSet, inst: &HetInstance) -> Money {
    inst.requester
        .reserve_of(supplier.bundle.intersection(uncovered))
}

/// `ṽ_i(L) = mv_i(L) − c_i`.
pub fn marginal_utility(supplier: &SupplierHT, uncovered: &TaskSet, inst: &HetInstance) -> Money {
    marginal_valuation(supplier, uncovered, inst) - supplier.total_cost
}

/// Highest marginal utility among `pool`, lowest id on ties. Returns the
/// supplier with her marginal utility on `uncovered`.
fn best(
    pool: &AgentSet,
    uncovered: &TaskSet,
    inst: &HetInstance,
    opts: HtOptions,
) -> Option<(AgentId, Money)> {
    let mut top: Option<(AgentId, Money)> = None;
    for &a in pool {
        let s = &inst.suppliers[&a];
        let mv = marginal_valuation(s, uncovered, inst);
        if opts.skip_zero_marginal && mv.is_zero() {
            continue;
        }
        let v = mv - s.total_cost;
        if top.is_none_or(|(_, t)| v > t) {
            top = Some((a, v));
        }
    }
    top
}

/// Result of the greedy pass over one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSelection {
    /// Winners in selection order.
    pub selected: Vec<AgentId>,
    pub uncovered: TaskSet,
}

/// Repeatedly selects the supplier with the highest non-negative marginal
/// utility until none is left, the layer is exhausted or everything is
/// covered.
pub fn greedy_layer_selection(
    layer: &AgentSet,
    uncovered: &TaskSet,
    inst: &HetInstance,
    opts: HtOptions,
) -> LayerSelection {
    let mut pool = layer.clone();
    let mut left = uncovered.clone();
    let mut selected = Vec::new();
    while !left.is_empty() {
        match best(&pool, &left, inst, opts) {
            Some((a, v)) if !v.is_negative() => {
                pool.remove(&a);
                for t in &inst.suppliers[&a].bundle {
                    left.remove(t);
                }
                selected.push(a);
            }
            _ => break,
        }
    }
    LayerSelection {
        selected,
        uncovered: left,
    }
}

/// Critical payment of `winner`, selected in `layer` when `entry` was still
/// uncovered.
///
/// The layer is re-run without the winner. At every step she would have
/// beaten the current best `ℓ` with any cost up to `mv_j(L) − ṽ_ℓ(L)`, and
/// once the re-run stops she would still be picked with any cost up to
/// `mv_j(L)` on whatever is left.
pub fn ran_ht_payment(
    inst: &HetInstance,
    layer_index: usize,
    layer: &AgentSet,
    winner: AgentId,
    entry: &TaskSet,
    opts: HtOptions,
) -> Result<Money> {
    if !layer.contains(&winner) {
        return Err(Error::NotALayerWinner {
            agent: winner,
            layer: layer_index,
        });
    }
    let me = inst.supplier(winner)?;
    let mut pool = layer.clone();
    pool.remove(&winner);
    let mut left = entry.clone();
    let mut pay = Money::ZERO;
    while !left.is_empty() {
        match best(&pool, &left, inst, opts) {
            Some((l, v)) if !v.is_negative() => {
                pay = pay.max(marginal_valuation(me, &left, inst) - v);
                pool.remove(&l);
                for t in &inst.suppliers[&l].bundle {
                    left.remove(t);
                }
            }
            _ => break,
        }
    }
    Ok(pay.max(marginal_valuation(me, &left, inst)))
}

/// One visited layer of [`ran_ht_trace`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtLayerReport {
    pub layer: usize,
    pub entry_uncovered: TaskSet,
    pub selected: Vec<AgentId>,
    pub payments: Vec<Money>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtTrace {
    pub outcome: Outcome,
    pub layers: Vec<HtLayerReport>,
}

pub fn ran_ht(inst: &HetInstance) -> Outcome {
    ran_ht_with(inst, HtOptions::default())
}

pub fn ran_ht_with(inst: &HetInstance, opts: HtOptions) -> Outcome {
    ran_ht_trace(inst, opts, usize::MAX).outcome
}

/// Runs the layered greedy over at most `max_layers` layers.
pub fn ran_ht_trace(inst: &HetInstance, opts: HtOptions, max_layers: usize) -> HtTrace {
    let market = reachable_market(inst);
    let division = market_division(&market);

    let mut outcome = Outcome::empty(SelfSupply::Tasks(TaskSet::new()));
    let mut left = inst.requester.tasks();
    let mut layers = Vec::new();
    for (k, layer) in division.layers.iter().enumerate().take(max_layers) {
        for a in layer {
            outcome.enroll(*a);
        }
        if left.is_empty() {
            continue;
        }
        let pick = greedy_layer_selection(layer, &left, inst, opts);
        let mut payments = Vec::with_capacity(pick.selected.len());
        for &w in &pick.selected {
            let x = ran_ht_payment(inst, k + 1, layer, w, &left, opts)
                .expect("selected supplier belongs to her layer");
            outcome.award(w, 1, x);
            payments.push(x);
        }
        layers.push(HtLayerReport {
            layer: k + 1,
            entry_uncovered: left.clone(),
            selected: pick.selected,
            payments,
        });
        left = pick.uncovered;
    }
    outcome.self_supplied = SelfSupply::Tasks(left);
    HtTrace { outcome, layers }
}

/// The same greedy run on the requester's direct invitees only.
pub fn local_greedy(inst: &HetInstance) -> Outcome {
    ran_ht_trace(inst, HtOptions::default(), 1).outcome
}
