//! Random markets and the experiment sweeps.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{AnyInstance, MechanismKind, Variant};
use crate::model::{
    requester_cost, social_cost, AgentId, AgentSet, HetInstance, HomInstance, Instance, Outcome,
    Procurement, RequesterHM, RequesterHT, SupplierHM, SupplierHT, TaskId,
};
use crate::money::Money;
use crate::par::{self, Execution};

/// Attempts before the connectivity loop gives up.
pub const MAX_GRAPH_ATTEMPTS: u64 = 1_000_000;

/// Reserve per unit in generated homogeneous markets.
pub const HOM_RESERVE: i128 = 10;

const SNAP: i128 = 1000;

/// Undirected graph on nodes `0..=n`; node 0 is the requester.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<BTreeSet<u32>>,
}

impl Graph {
    fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![BTreeSet::new(); n + 1],
        }
    }

    fn add(&mut self, a: u32, b: u32) {
        if a != b {
            self.adjacency[a as usize].insert(b);
            self.adjacency[b as usize].insert(a);
        }
    }

    /// Number of suppliers.
    pub fn n(&self) -> usize {
        self.adjacency.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.range(a as u32 + 1..).map(move |&b| (a as u32, b)))
    }

    pub fn neighbors(&self, node: u32) -> AgentSet {
        self.adjacency[node as usize].iter().map(|&b| AgentId(b)).collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![0u32];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..=n as u32 {
            for j in i + 1..=n as u32 {
                g.add(i, j);
            }
        }
        g
    }

    /// Uniform random recursive tree: node `i` hangs below a uniform node
    /// among `0..i`.
    pub fn random_tree(n: usize, rng: &mut impl Rng) -> Self {
        let mut g = Graph::empty(n);
        for i in 1..=n as u32 {
            g.add(i, rng.gen_range(0..i));
        }
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphConfig {
    pub n: usize,
    pub prob: f64,
    pub seed: u64,
}

/// Random graph on the requester plus `n` suppliers.
///
/// Every pass offers each pair an edge with probability `prob`; edges from
/// earlier passes stay, and passes repeat until the graph is connected.
pub fn gen_random_graph(config: &GraphConfig) -> Result<Graph> {
    gen_random_graph_with(config.n, config.prob, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

pub fn gen_random_graph_with(n: usize, prob: f64, rng: &mut impl Rng) -> Result<Graph> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Config(format!("edge probability {prob} is outside [0, 1]")));
    }
    let mut g = Graph::empty(n);
    for _ in 0..MAX_GRAPH_ATTEMPTS {
        for i in 0..=n as u32 {
            for j in i + 1..=n as u32 {
                if rng.gen::<f64>() < prob {
                    g.add(i, j);
                }
            }
        }
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GraphGeneration {
        attempts: MAX_GRAPH_ATTEMPTS,
        n,
        prob,
    })
}

fn uniform_money(lo: i128, hi: i128, rng: &mut impl Rng) -> Money {
    Money::new(rng.gen_range(lo * SNAP..=hi * SNAP), SNAP)
}

fn supplier_neighbors(g: &Graph, i: u32) -> AgentSet {
    let mut out = g.neighbors(i);
    out.remove(&AgentId::REQUESTER);
    out
}

/// Identical-unit market on `g`: abilities `U{1..10}`, unit costs `U[1, 10]`
/// in steps of 1/1000, reserve 10 per unit.
pub fn gen_instance_hm(g: &Graph, demand: u64, rng: &mut impl Rng) -> HomInstance {
    let requester = RequesterHM {
        demand,
        reserve_unit: Money::from_int(HOM_RESERVE),
        neighbors: g.neighbors(0),
    };
    let suppliers = (1..=g.n() as u32)
        .map(|i| {
            (
                AgentId(i),
                SupplierHM {
                    ability: rng.gen_range(1..=10),
                    unit_cost: uniform_money(1, 10, rng),
                    neighbors: supplier_neighbors(g, i),
                },
            )
        })
        .collect();
    Instance::new(requester, suppliers).expect("generated networks are consistent")
}

/// Bundle market on `g`: reserves `U[1, 10]`, bundle sizes `U{2..10}` capped
/// at the task count, costs `U[5, 20]`.
pub fn gen_instance_ht(g: &Graph, tasks: usize, rng: &mut impl Rng) -> HetInstance {
    if tasks < 2 {
        log::warn!("only {tasks} task(s): bundle sizes are capped at the task count");
    }
    let reserve = (0..tasks as u32)
        .map(|t| (TaskId(t), uniform_money(1, 10, rng)))
        .collect();
    let requester = RequesterHT {
        reserve,
        neighbors: g.neighbors(0),
    };
    let suppliers = (1..=g.n() as u32)
        .map(|i| {
            let size = rng.gen_range(2..=10usize).min(tasks);
            let bundle = sample(rng, tasks, size)
                .into_iter()
                .map(|t| TaskId(t as u32))
                .collect();
            (
                AgentId(i),
                SupplierHT {
                    bundle,
                    total_cost: uniform_money(5, 20, rng),
                    neighbors: supplier_neighbors(g, i),
                },
            )
        })
        .collect();
    Instance::new(requester, suppliers).expect("generated networks are consistent")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Prob,
    Tasks,
    Suppliers,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Prob => "prob",
            Axis::Tasks => "tasks",
            Axis::Suppliers => "suppliers",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Random,
    Complete,
    Tree,
}

/// Fixed parameters of one curve; the swept one is left out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Market {
    #[serde(default)]
    pub suppliers: Option<usize>,
    #[serde(default)]
    pub tasks: Option<usize>,
}

fn default_repetitions() -> usize {
    20
}

fn default_timing() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub variant: Variant,
    pub axis: Axis,
    pub points: Vec<f64>,
    pub markets: Vec<Market>,
    /// Edge probability when the axis is not `prob`.
    #[serde(default)]
    pub prob: Option<f64>,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub mechanisms: Vec<MechanismKind>,
    #[serde(default)]
    pub seed: u64,
    /// Record wall time; off gives byte-identical output across runs.
    #[serde(default = "default_timing")]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.variant == Variant::Forward {
            return fail("sweeps cover procurement markets only".into());
        }
        if let Some(m) = self.mechanisms.iter().find(|m| m.variant() != self.variant) {
            return Err(Error::VariantMismatch {
                mechanism: m.name().to_string(),
                variant: self.variant.name(),
            });
        }
        for (i, m) in self.markets.iter().enumerate() {
            let (n, t) = (m.suppliers.is_some(), m.tasks.is_some());
            let ok = match self.axis {
                Axis::Prob => n && t,
                Axis::Tasks => n,
                Axis::Suppliers => t,
            };
            if !ok {
                return fail(format!("market {i} lacks a fixed parameter for a {} sweep", self.axis.name()));
            }
        }
        if self.axis != Axis::Prob && self.topology == Topology::Random && self.prob.is_none() {
            return fail("`prob` is required unless it is the swept axis".into());
        }
        if self.axis == Axis::Prob && self.points.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("probabilities must lie in [0, 1]".into());
        }
        if self.axis != Axis::Prob && self.points.iter().any(|p| *p < 1.0 || p.fract() != 0.0) {
            return fail("counts must be positive integers".into());
        }
        Ok(())
    }

    /// `(market, point)` → `(suppliers, tasks, prob)`.
    fn parameters(&self, market: &Market, point: f64) -> (usize, usize, f64) {
        let prob = self.prob.unwrap_or(0.0);
        match self.axis {
            Axis::Prob => (market.suppliers.unwrap_or(0), market.tasks.unwrap_or(0), point),
            Axis::Tasks => (market.suppliers.unwrap_or(0), point as usize, prob),
            Axis::Suppliers => (point as usize, market.tasks.unwrap_or(0), prob),
        }
    }
}

/// One mechanism run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub sweep_axis: Axis,
    pub point: f64,
    pub rep: usize,
    pub mechanism: MechanismKind,
    pub n: usize,
    pub tasks: usize,
    pub prob: f64,
    pub social_cost: Money,
    /// Requester expenditure, self-supplied work included.
    pub payment: Money,
    pub budget: Money,
    pub winners: usize,
    pub ms: f64,
}

impl RunRecord {
    /// `u_p`: budget minus expenditure.
    pub fn surplus(&self) -> Money {
        self.budget - self.payment
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub point: f64,
    pub rep: usize,
    pub mechanism: Option<MechanismKind>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run, independent of scheduling.
pub fn run_seed(base: u64, market: usize, point: usize, rep: usize) -> u64 {
    mix(mix(mix(base ^ market as u64) ^ point as u64) ^ rep as u64)
}

/// Graph for one run under the configured topology.
pub fn gen_graph(topology: Topology, n: usize, prob: f64, rng: &mut impl Rng) -> Result<Graph> {
    match topology {
        Topology::Random => gen_random_graph_with(n, prob, rng),
        Topology::Complete => Ok(Graph::complete(n)),
        Topology::Tree => Ok(Graph::random_tree(n, rng)),
    }
}

fn measure<P: Procurement>(
    inst: &P,
    run: impl FnOnce() -> Result<Outcome>,
    timing: bool,
) -> Result<(Money, Money, usize, f64)> {
    let start = Instant::now();
    let out = run()?;
    let ms = if timing {
        start.elapsed().as_secs_f64() * 1000.0
    } else {
        0.0
    };
    Ok((
        social_cost(&out, inst)?,
        requester_cost(&out, inst),
        out.winners().count(),
        ms,
    ))
}

struct Job {
    market: usize,
    point_index: usize,
    point: f64,
    rep: usize,
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> SweepResult {
    let market = &cfg.markets[job.market];
    let (n, tasks, prob) = cfg.parameters(market, job.point);
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, job.market, job.point_index, job.rep));
    let mut result = SweepResult::default();
    let graph = match gen_graph(cfg.topology, n, prob, &mut rng) {
        Ok(g) => g,
        Err(e) => {
            result.failures.push(RunFailure {
                point: job.point,
                rep: job.rep,
                mechanism: None,
                message: e.to_string(),
            });
            return result;
        }
    };
    let instance = match cfg.variant {
        Variant::Homogeneous => AnyInstance::Hom(gen_instance_hm(&graph, tasks as u64, &mut rng)),
        _ => AnyInstance::Het(gen_instance_ht(&graph, tasks, &mut rng)),
    };
    for &mech in &cfg.mechanisms {
        let measured = match &instance {
            AnyInstance::Hom(i) => measure(i, || instance.run(mech), cfg.timing).map(|m| (m, i.budget())),
            AnyInstance::Het(i) => measure(i, || instance.run(mech), cfg.timing).map(|m| (m, i.budget())),
            AnyInstance::Forward(_) => unreachable!("validated away"),
        };
        match measured {
            Ok(((social_cost, payment, winners, ms), budget)) => result.records.push(RunRecord {
                sweep_axis: cfg.axis,
                point: job.point,
                rep: job.rep,
                mechanism: mech,
                n,
                tasks,
                prob,
                social_cost,
                payment,
                budget,
                winners,
                ms,
            }),
            Err(e) => result.failures.push(RunFailure {
                point: job.point,
                rep: job.rep,
                mechanism: Some(mech),
                message: e.to_string(),
            }),
        }
    }
    result
}

/// Runs every market × point × repetition. Records come out in that order
/// whatever the execution mode.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.variant == Variant::Homogeneous {
        log::info!("homogeneous reserve fixed at {HOM_RESERVE} per unit");
    }
    let mut jobs = Vec::new();
    for market in 0..cfg.markets.len() {
        for (point_index, &point) in cfg.points.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                jobs.push(Job {
                    market,
                    point_index,
                    point,
                    rep,
                });
            }
        }
    }
    let parts = par::map(exec, &jobs, |job| run_job(cfg, job));
    let mut out = SweepResult::default();
    for p in parts {
        out.records.extend(p.records);
        out.failures.extend(p.failures);
    }
    for f in &out.failures {
        log::warn!("run at point {} rep {} failed: {}", f.point, f.rep, f.message);
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 12] = [
    "sweep_axis",
    "point",
    "rep",
    "mechanism",
    "n",
    "tasks",
    "prob",
    "social_cost",
    "payment",
    "budget",
    "winners",
    "ms",
];

/// Writes records in the CSV contract; amounts get six decimals.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.sweep_axis.name().to_string(),
            r.point.to_string(),
            r.rep.to_string(),
            r.mechanism.name().to_string(),
            r.n.to_string(),
            r.tasks.to_string(),
            r.prob.to_string(),
            r.social_cost.to_decimal(6),
            r.payment.to_decimal(6),
            r.budget.to_decimal(6),
            r.winners.to_string(),
            format!("{:.3}", r.ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Small random identical-unit market for exhaustive checks: 3 to 8
/// suppliers on a sparse network, demand up to 8, abilities up to 3, unit
/// costs in halves on `[1/2, 10]`.
pub fn small_hom_instance(seed: u64) -> HomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = small_graph(&mut rng);
    let demand = rng.gen_range(1..=8);
    let requester = RequesterHM {
        demand,
        reserve_unit: Money::from_int(HOM_RESERVE),
        neighbors: g.neighbors(0),
    };
    let suppliers = (1..=g.n() as u32)
        .map(|i| {
            (
                AgentId(i),
                SupplierHM {
                    ability: rng.gen_range(1..=3),
                    unit_cost: Money::new(rng.gen_range(1..=20), 2),
                    neighbors: supplier_neighbors(&g, i),
                },
            )
        })
        .collect();
    Instance::new(requester, suppliers).expect("generated networks are consistent")
}

/// Small random bundle market: 3 to 8 suppliers, 3 to 5 tasks with integer
/// reserves up to 6, bundles of 1 to 3 tasks, integer costs up to 10.
pub fn small_het_instance(seed: u64) -> HetInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = small_graph(&mut rng);
    let tasks = rng.gen_range(3..=5usize);
    let reserve = (0..tasks as u32)
        .map(|t| (TaskId(t), Money::from_int(rng.gen_range(1..=6))))
        .collect();
    let requester = RequesterHT {
        reserve,
        neighbors: g.neighbors(0),
    };
    let suppliers = (1..=g.n() as u32)
        .map(|i| {
            let size = rng.gen_range(1..=3);
            let bundle = sample(&mut rng, tasks, size)
                .into_iter()
                .map(|t| TaskId(t as u32))
                .collect();
            (
                AgentId(i),
                SupplierHT {
                    bundle,
                    total_cost: Money::from_int(rng.gen_range(1..=10)),
                    neighbors: supplier_neighbors(&g, i),
                },
            )
        })
        .collect();
    Instance::new(requester, suppliers).expect("generated networks are consistent")
}

fn small_graph(rng: &mut impl Rng) -> Graph {
    let n = rng.gen_range(3..=8);
    if rng.gen_bool(0.5) {
        Graph::random_tree(n, rng)
    } else {
        gen_random_graph_with(n, 0.2, rng).expect("positive probability connects")
    }
}
