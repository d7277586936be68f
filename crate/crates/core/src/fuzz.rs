//! Strategic-deviation search for IR, IC, weak budget balance and the two
//! monotonicity properties.
//!
//! Every agent may report any bid and any subset of her true invitees; the
//! other agents keep their reports and reachability does the rest. Bids are
//! drawn from a grid built around every value that can appear in a price,
//! so mechanisms that are piecewise constant in the bid are covered by
//! construction.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, Scenario, Side};
use crate::model::{AgentId, AgentSet, Outcome};
use crate::money::Money;
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    IndividualRationality,
    IncentiveCompatibility,
    WeakBudgetBalance,
    ValueMonotonicity,
    DiffusionMonotonicity,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::IndividualRationality,
        Property::IncentiveCompatibility,
        Property::WeakBudgetBalance,
        Property::ValueMonotonicity,
        Property::DiffusionMonotonicity,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Property::IndividualRationality => "IR",
            Property::IncentiveCompatibility => "IC",
            Property::WeakBudgetBalance => "WBB",
            Property::ValueMonotonicity => "value-monotone",
            Property::DiffusionMonotonicity => "diffusion-monotone",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// A bid plus an invitee set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Report {
    pub bid: Money,
    pub invitees: AgentSet,
}

/// A recorded violation, replayable against the same mechanism and instance.
///
/// For IR and IC `deviation` is the offending report (the truthful one for
/// IR). For the monotonicity properties `deviation` is the report that is
/// better in the partial order (lower cost or higher value, or fewer
/// invitees) and `reference` the worse one that nonetheless won more. For
/// WBB the agent is the auctioneer and the utilities are her surplus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub property: Property,
    pub agent: AgentId,
    pub deviation: Report,
    pub reference: Option<Report>,
    pub mechanism: String,
    pub truth: Report,
    pub truthful_utility: Money,
    pub deviant_utility: Money,
    pub truthful_units: u64,
    pub deviant_units: u64,
    pub reference_units: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// No violation. `exhaustive` is false when some invitee sets or bids
    /// were sampled rather than enumerated.
    Pass { exhaustive: bool, deviations: usize },
    Violation(Box<DeviationWitness>),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    pub fn witness(&self) -> Option<&DeviationWitness> {
        match self {
            Verdict::Violation(w) => Some(w),
            Verdict::Pass { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Every bid of the grid with every invitee subset (sampled beyond
    /// `subset_limit` invitees).
    Exhaustive,
    /// `samples` random deviations per agent, bids in `[0, 2 · cap]`.
    Sampled { samples: usize },
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub mode: SearchMode,
    /// Largest invitee set whose subsets are all enumerated.
    pub subset_limit: usize,
    /// Random subsets drawn when the limit is exceeded.
    pub subset_samples: usize,
    /// Extra grid points per gap between neighbouring grid points.
    pub refine: u32,
    pub seed: u64,
    /// Only these agents deviate; all when `None`.
    pub agents: Option<AgentSet>,
    pub execution: Execution,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            mode: SearchMode::Exhaustive,
            subset_limit: 8,
            subset_samples: 64,
            refine: 1,
            seed: 0,
            agents: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Row {
    report: Report,
    units: u64,
    utility: Money,
}

#[derive(Clone, Debug)]
struct AgentTable {
    agent: AgentId,
    truth: Report,
    truthful_units: u64,
    truthful_utility: Money,
    rows: Vec<Row>,
    exhaustive: bool,
}

fn units_of(outcome: &Outcome, agent: AgentId) -> u64 {
    outcome.allocation.get(&agent).copied().unwrap_or(0)
}

fn truth_of<S: Scenario>(scenario: &S, agent: AgentId) -> Report {
    Report {
        bid: scenario.bid(agent),
        invitees: scenario.invitees(agent).clone(),
    }
}

/// Bid grid for `agent`: anchors, their midpoints, optional refinement and
/// points a hair above and below every anchor.
pub fn bid_grid<S: Scenario>(scenario: &S, agent: AgentId, truthful: &Outcome, refine: u32) -> Vec<Money> {
    let cap = scenario.bid_cap();
    let mut anchors = scenario.anchors();
    anchors.extend([Money::ZERO, cap, scenario.bid(agent)]);
    if let Some(&paid) = truthful.payments.get(&agent) {
        let units = units_of(truthful, agent);
        if units > 0 {
            anchors.push(match S::SIDE {
                Side::Procurement => paid / units as i128,
                Side::Sale => paid,
            });
        }
    }
    anchors.retain(|a| !a.is_negative() && *a <= cap);
    anchors.sort();
    anchors.dedup();

    let mut grid = anchors.clone();
    let parts = refine.max(1) as i128 + 1;
    for w in anchors.windows(2) {
        let gap = w[1] - w[0];
        for k in 1..parts {
            grid.push(w[0] + gap * k / parts);
        }
    }
    grid.sort();
    grid.dedup();
    let eps = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or(Money::ONE)
        / 1024;
    for a in &anchors {
        if *a >= eps {
            grid.push(*a - eps);
        }
        if *a + eps <= cap {
            grid.push(*a + eps);
        }
    }
    grid.sort();
    grid.dedup();
    grid
}

fn subsets(set: &AgentSet, cfg: &FuzzConfig, rng: &mut ChaCha8Rng) -> (Vec<AgentSet>, bool) {
    let items: Vec<AgentId> = set.iter().copied().filter(|a| *a != AgentId::REQUESTER).collect();
    if items.len() <= cfg.subset_limit {
        let all = (0u32..1 << items.len())
            .map(|mask| {
                items
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, a)| *a)
                    .collect()
            })
            .collect();
        return (all, true);
    }
    let full: AgentSet = items.iter().copied().collect();
    let mut out = vec![AgentSet::new(), full.clone()];
    for a in &items {
        let mut s = full.clone();
        s.remove(a);
        out.push(s);
        out.push(AgentSet::from([*a]));
    }
    for _ in 0..cfg.subset_samples {
        out.push(items.iter().copied().filter(|_| rng.gen_bool(0.5)).collect());
    }
    out.sort();
    out.dedup();
    (out, false)
}

fn random_bid(cap: Money, denom: i128, rng: &mut ChaCha8Rng) -> Money {
    let steps = (cap * 2 * (4 * denom)).numer().max(1);
    Money::new(rng.gen_range(0..=steps), 4 * denom)
}

fn build_tables<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    truthful: &Outcome,
    cfg: &FuzzConfig,
) -> Vec<AgentTable> {
    let agents: Vec<AgentId> = match &cfg.agents {
        Some(chosen) => chosen.iter().copied().filter(|a| scenario.agents().contains(a)).collect(),
        None => scenario.agents().into_iter().collect(),
    };
    let denom = Money::common_denominator(scenario.anchors().iter());
    let mut tables = Vec::with_capacity(agents.len());
    let mut jobs: Vec<(usize, Report)> = Vec::new();
    for (k, &agent) in agents.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (u64::from(agent.0) << 32));
        let truth = truth_of(scenario, agent);
        let (sets, complete) = subsets(&truth.invitees, cfg, &mut rng);
        let exhaustive = match cfg.mode {
            SearchMode::Exhaustive => {
                for bid in bid_grid(scenario, agent, truthful, cfg.refine) {
                    for r in &sets {
                        jobs.push((k, Report { bid, invitees: r.clone() }));
                    }
                }
                complete
            }
            SearchMode::Sampled { samples } => {
                for _ in 0..samples {
                    let bid = random_bid(scenario.bid_cap(), denom, &mut rng);
                    let r = sets.choose(&mut rng).cloned().unwrap_or_default();
                    jobs.push((k, Report { bid, invitees: r }));
                }
                false
            }
        };
        tables.push(AgentTable {
            agent,
            truthful_units: units_of(truthful, agent),
            truthful_utility: scenario.utility(truthful, agent, truth.bid),
            truth,
            rows: Vec::new(),
            exhaustive,
        });
    }
    let truths: Vec<Money> = tables.iter().map(|t| t.truth.bid).collect();
    let results = par::map(cfg.execution, &jobs, |(k, report)| {
        let agent = agents[*k];
        let dev = scenario.with_report(agent, report.bid, report.invitees.clone());
        let outcome = mechanism.run(&dev);
        (units_of(&outcome, agent), scenario.utility(&outcome, agent, truths[*k]))
    });
    for ((k, report), (units, utility)) in jobs.into_iter().zip(results) {
        tables[k].rows.push(Row {
            report,
            units,
            utility,
        });
    }
    tables
}

fn witness(
    property: Property,
    mechanism: String,
    table: &AgentTable,
    deviation: &Row,
    reference: Option<&Row>,
) -> DeviationWitness {
    DeviationWitness {
        property,
        agent: table.agent,
        deviation: deviation.report.clone(),
        reference: reference.map(|r| r.report.clone()),
        mechanism,
        truth: table.truth.clone(),
        truthful_utility: table.truthful_utility,
        deviant_utility: deviation.utility,
        truthful_units: table.truthful_units,
        deviant_units: deviation.units,
        reference_units: reference.map(|r| r.units),
    }
}

fn ic_witnesses(name: &str, table: &AgentTable) -> Vec<DeviationWitness> {
    table
        .rows
        .iter()
        .filter(|r| r.utility > table.truthful_utility)
        .map(|r| witness(Property::IncentiveCompatibility, name.to_string(), table, r, None))
        .collect()
}

/// `a` is a better bid than `b` in the partial order.
fn better_bid(side: Side, a: Money, b: Money) -> bool {
    match side {
        Side::Procurement => a < b,
        Side::Sale => a > b,
    }
}

fn value_witnesses(name: &str, side: Side, table: &AgentTable) -> Vec<DeviationWitness> {
    let mut by_set: BTreeMap<&AgentSet, Vec<&Row>> = BTreeMap::new();
    for r in &table.rows {
        by_set.entry(&r.report.invitees).or_default().push(r);
    }
    let mut out = Vec::new();
    for rows in by_set.values() {
        for good in rows {
            if let Some(bad) = rows
                .iter()
                .filter(|b| better_bid(side, good.report.bid, b.report.bid) && b.units > good.units)
                .min_by(|x, y| x.report.cmp(&y.report))
            {
                out.push(witness(Property::ValueMonotonicity, name.to_string(), table, good, Some(bad)));
            }
        }
    }
    out
}

fn diffusion_witnesses(name: &str, table: &AgentTable) -> Vec<DeviationWitness> {
    let mut by_bid: BTreeMap<Money, Vec<&Row>> = BTreeMap::new();
    for r in &table.rows {
        by_bid.entry(r.report.bid).or_default().push(r);
    }
    let mut out = Vec::new();
    for rows in by_bid.values() {
        for small in rows {
            if let Some(big) = rows
                .iter()
                .filter(|b| {
                    b.units > small.units
                        && small.report.invitees.is_subset(&b.report.invitees)
                })
                .min_by(|x, y| x.report.cmp(&y.report))
            {
                out.push(witness(Property::DiffusionMonotonicity, name.to_string(), table, small, Some(big)));
            }
        }
    }
    out
}

fn verdict(mut witnesses: Vec<DeviationWitness>, exhaustive: bool, deviations: usize) -> Verdict {
    witnesses.sort();
    match witnesses.into_iter().next() {
        Some(w) => Verdict::Violation(Box::new(w)),
        None => Verdict::Pass {
            exhaustive,
            deviations,
        },
    }
}

fn ir_witnesses<S: Scenario>(name: &str, scenario: &S, truthful: &Outcome) -> Vec<DeviationWitness> {
    scenario
        .agents()
        .into_iter()
        .filter_map(|agent| {
            let truth = truth_of(scenario, agent);
            let u = scenario.utility(truthful, agent, truth.bid);
            (u.is_negative()).then(|| DeviationWitness {
                property: Property::IndividualRationality,
                agent,
                deviation: truth.clone(),
                reference: None,
                mechanism: name.to_string(),
                truth,
                truthful_utility: u,
                deviant_utility: u,
                truthful_units: units_of(truthful, agent),
                deviant_units: units_of(truthful, agent),
                reference_units: None,
            })
        })
        .collect()
}

fn wbb_witnesses<S: Scenario>(name: &str, scenario: &S, truthful: &Outcome) -> Vec<DeviationWitness> {
    let surplus = scenario.auctioneer_surplus(truthful);
    if !surplus.is_negative() {
        return Vec::new();
    }
    let truth = Report {
        bid: Money::ZERO,
        invitees: AgentSet::new(),
    };
    vec![DeviationWitness {
        property: Property::WeakBudgetBalance,
        agent: AgentId::REQUESTER,
        deviation: truth.clone(),
        reference: None,
        mechanism: name.to_string(),
        truth,
        truthful_utility: surplus,
        deviant_utility: surplus,
        truthful_units: 0,
        deviant_units: 0,
        reference_units: None,
    }]
}

pub fn check_ir<S: Scenario, M: Mechanism<S> + ?Sized>(mechanism: &M, scenario: &S) -> Verdict {
    let truthful = mechanism.run(scenario);
    verdict(ir_witnesses(&mechanism.name(), scenario, &truthful), true, 0)
}

pub fn check_wbb<S: Scenario, M: Mechanism<S> + ?Sized>(mechanism: &M, scenario: &S) -> Verdict {
    let truthful = mechanism.run(scenario);
    verdict(wbb_witnesses(&mechanism.name(), scenario, &truthful), true, 0)
}

fn single_agent<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    agent: AgentId,
    cfg: &FuzzConfig,
) -> Result<AgentTable> {
    if !scenario.agents().contains(&agent) {
        return Err(Error::UnknownAgent(agent));
    }
    let truthful = mechanism.run(scenario);
    let cfg = FuzzConfig {
        agents: Some(AgentSet::from([agent])),
        ..cfg.clone()
    };
    Ok(build_tables(mechanism, scenario, &truthful, &cfg).remove(0))
}

pub fn check_ic<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    agent: AgentId,
    cfg: &FuzzConfig,
) -> Result<Verdict> {
    let t = single_agent(mechanism, scenario, agent, cfg)?;
    Ok(verdict(ic_witnesses(&mechanism.name(), &t), t.exhaustive, t.rows.len()))
}

pub fn check_value_monotone<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    agent: AgentId,
    cfg: &FuzzConfig,
) -> Result<Verdict> {
    let t = single_agent(mechanism, scenario, agent, cfg)?;
    Ok(verdict(value_witnesses(&mechanism.name(), S::SIDE, &t), t.exhaustive, t.rows.len()))
}

pub fn check_diffusion_monotone<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    agent: AgentId,
    cfg: &FuzzConfig,
) -> Result<Verdict> {
    let t = single_agent(mechanism, scenario, agent, cfg)?;
    Ok(verdict(diffusion_witnesses(&mechanism.name(), &t), t.exhaustive, t.rows.len()))
}

/// Verdicts for every property on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct FuzzReport {
    pub mechanism: String,
    pub verdicts: BTreeMap<Property, Verdict>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(Verdict::is_pass)
    }

    /// The smallest witness over all properties.
    pub fn first_violation(&self) -> Option<&DeviationWitness> {
        self.verdicts.values().filter_map(Verdict::witness).min()
    }

    pub fn violation(&self, property: Property) -> Option<&DeviationWitness> {
        self.verdicts.get(&property).and_then(Verdict::witness)
    }
}

/// Runs every check from one shared deviation table.
pub fn fuzz<S: Scenario, M: Mechanism<S> + ?Sized>(mechanism: &M, scenario: &S, cfg: &FuzzConfig) -> FuzzReport {
    let name = mechanism.name();
    let truthful = mechanism.run(scenario);
    let tables = build_tables(mechanism, scenario, &truthful, cfg);
    let exhaustive = tables.iter().all(|t| t.exhaustive);
    let rows: usize = tables.iter().map(|t| t.rows.len()).sum();

    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        Property::IndividualRationality,
        verdict(ir_witnesses(&name, scenario, &truthful), true, 0),
    );
    verdicts.insert(
        Property::WeakBudgetBalance,
        verdict(wbb_witnesses(&name, scenario, &truthful), true, 0),
    );
    let collect = |f: &dyn Fn(&AgentTable) -> Vec<DeviationWitness>| {
        verdict(tables.iter().flat_map(f).collect(), exhaustive, rows)
    };
    verdicts.insert(
        Property::IncentiveCompatibility,
        collect(&|t| ic_witnesses(&name, t)),
    );
    verdicts.insert(
        Property::ValueMonotonicity,
        collect(&|t| value_witnesses(&name, S::SIDE, t)),
    );
    verdicts.insert(
        Property::DiffusionMonotonicity,
        collect(&|t| diffusion_witnesses(&name, t)),
    );
    FuzzReport {
        mechanism: name,
        verdicts,
    }
}

/// Re-runs a witness and reports whether the recorded numbers come out
/// exactly the same.
pub fn replay<S: Scenario, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    scenario: &S,
    w: &DeviationWitness,
) -> bool {
    let run = |report: &Report| {
        let dev = scenario.with_report(w.agent, report.bid, report.invitees.clone());
        let outcome = mechanism.run(&dev);
        (
            units_of(&outcome, w.agent),
            scenario.utility(&outcome, w.agent, w.truth.bid),
            scenario.auctioneer_surplus(&outcome),
        )
    };
    match w.property {
        Property::WeakBudgetBalance => {
            scenario.auctioneer_surplus(&mechanism.run(scenario)) == w.deviant_utility
        }
        Property::IndividualRationality | Property::IncentiveCompatibility => {
            let (units, utility, _) = run(&w.deviation);
            let truthful = mechanism.run(scenario);
            units == w.deviant_units
                && utility == w.deviant_utility
                && scenario.utility(&truthful, w.agent, w.truth.bid) == w.truthful_utility
        }
        Property::ValueMonotonicity | Property::DiffusionMonotonicity => {
            let Some(reference) = &w.reference else {
                return false;
            };
            let (units, _, _) = run(&w.deviation);
            let (ref_units, _, _) = run(reference);
            units == w.deviant_units && Some(ref_units) == w.reference_units && ref_units > units
        }
    }
}
