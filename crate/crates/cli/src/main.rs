use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use netauction::fuzz::{fuzz, DeviationWitness, FuzzConfig, FuzzReport, SearchMode};
use netauction::homogeneous::{offers_of, ran_hm_trace};
use netauction::io::{instance_to_json, load_instance, resolve_agent};
use netauction::mechanism::{
    forward_mechanism, het_mechanism, hom_mechanism, AnyInstance, MechanismKind, Variant,
};
use netauction::model::{requester_cost, social_cost, AgentSet, Labels, Outcome, Procurement};
use netauction::network::reachable_market;
use netauction::oracles::{min_cost_multiunit_oracle, min_social_cost_ht};
use netauction::par::{self, Execution};
use netauction::sim::{self, ExperimentConfig};
use netauction::{Error, Money};

const SEED_VAR: &str = "NETAUCTION_SEED";

/// Diffusion auctions on invitation networks.
#[derive(Parser)]
#[command(name = "netauction", version)]
struct Cli {
    /// Worker threads for fuzzing and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism on an instance file and print the outcome.
    Run {
        instance: PathBuf,
        #[arg(short, long)]
        mechanism: MechanismKind,
        #[arg(long)]
        json: bool,
    },
    /// Search for IR, IC, WBB and monotonicity violations.
    Fuzz(FuzzArgs),
    /// Run a simulation sweep and write the CSV.
    Sweep {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Write 0 for wall time so that reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        /// Overrides the config seed (also via NETAUCTION_SEED).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare mechanism social cost with the exhaustive optimum.
    Oracle { instance: PathBuf },
}

#[derive(Args)]
struct FuzzArgs {
    /// Instance file; omit with --random.
    instance: Option<PathBuf>,
    #[arg(short, long)]
    mechanism: MechanismKind,
    /// Fuzz this many small random instances instead of a file.
    #[arg(long, conflicts_with = "instance")]
    random: Option<u64>,
    /// Enumerate the bid grid and invitee subsets (the default).
    #[arg(long, conflicts_with = "samples")]
    exhaustive: bool,
    /// Random deviations per agent instead of the full grid.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Only let this agent (id or name) deviate.
    #[arg(long)]
    agent: Option<String>,
    /// Extra bid grid points between neighbouring grid points.
    #[arg(long, default_value_t = 1)]
    refine: u32,
    #[arg(long)]
    json: bool,
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_VAR}={v} is not a seed"))?)),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> anyhow::Result<AnyInstance> {
    load_instance(path).with_context(|| format!("reading {}", path.display()))
}

fn labels_of(inst: &AnyInstance) -> &Labels {
    match inst {
        AnyInstance::Hom(i) => &i.labels,
        AnyInstance::Het(i) => &i.labels,
        AnyInstance::Forward(i) => &i.labels,
    }
}

fn ids_of(inst: &AnyInstance) -> AgentSet {
    match inst {
        AnyInstance::Hom(i) => i.suppliers.keys().copied().collect(),
        AnyInstance::Het(i) => i.suppliers.keys().copied().collect(),
        AnyInstance::Forward(i) => i.suppliers.keys().copied().collect(),
    }
}

fn totals<P: Procurement>(outcome: &Outcome, inst: &P, budget: Money) -> anyhow::Result<(Money, Money, Money)> {
    Ok((social_cost(outcome, inst)?, requester_cost(outcome, inst), budget))
}

fn cmd_run(path: &Path, mechanism: MechanismKind, as_json: bool) -> anyhow::Result<ExitCode> {
    let inst = load(path)?;
    let outcome = inst.run(mechanism)?;
    let labels = labels_of(&inst);
    let money = match &inst {
        AnyInstance::Hom(i) => Some(totals(&outcome, i, i.budget())?),
        AnyInstance::Het(i) => Some(totals(&outcome, i, i.budget())?),
        AnyInstance::Forward(_) => None,
    };
    if as_json {
        let mut out = json!({
            "mechanism": mechanism.name(),
            "variant": inst.variant().name(),
            "outcome": outcome,
        });
        if let Some((sc, pay, budget)) = money {
            out["social_cost"] = json!(sc);
            out["payment"] = json!(pay);
            out["budget"] = json!(budget);
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{} on {} instance", mechanism, inst.variant());
    println!("{:<12} {:>6} {:>12}", "agent", "units", "payment");
    for (agent, pay) in &outcome.payments {
        let units = outcome.allocation.get(agent).copied().unwrap_or(0);
        if units > 0 || !pay.is_zero() {
            println!("{:<12} {:>6} {:>12}", labels.agent(*agent), units, pay.to_string());
        }
    }
    match money {
        Some((sc, pay, budget)) => {
            println!("social cost  {sc}");
            println!("expenditure  {pay}");
            println!("budget       {budget}");
            println!("surplus      {}", budget - pay);
        }
        None => println!("revenue      {}", outcome.total_payments()),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_witness(w: &DeviationWitness, labels: &Labels) {
    let agent = if w.agent.0 == 0 {
        "auctioneer".to_string()
    } else {
        labels.agent(w.agent)
    };
    let set = |s: &AgentSet| s.iter().map(|a| labels.agent(*a)).collect::<Vec<_>>().join(",");
    println!("VIOLATION {} by {} under {}", w.property, agent, w.mechanism);
    println!("  truth      bid {} invites {{{}}}", w.truth.bid, set(&w.truth.invitees));
    println!("  deviation  bid {} invites {{{}}}", w.deviation.bid, set(&w.deviation.invitees));
    if let Some(r) = &w.reference {
        println!("  reference  bid {} invites {{{}}}", r.bid, set(&r.invitees));
    }
    println!(
        "  utility    {} -> {}   units {} -> {}",
        w.truthful_utility, w.deviant_utility, w.truthful_units, w.deviant_units
    );
    if let Some(u) = w.reference_units {
        println!("  reference units {u}");
    }
}

fn fuzz_any(inst: &AnyInstance, kind: MechanismKind, cfg: &FuzzConfig) -> netauction::Result<FuzzReport> {
    Ok(match inst {
        AnyInstance::Hom(i) => fuzz(&hom_mechanism(kind)?, i, cfg),
        AnyInstance::Het(i) => fuzz(&het_mechanism(kind)?, i, cfg),
        AnyInstance::Forward(i) => fuzz(&forward_mechanism(kind)?, i, cfg),
    })
}

fn report(inst: &AnyInstance, rep: &FuzzReport, as_json: bool, label: &str) -> anyhow::Result<()> {
    if as_json {
        let mut out = json!({ "instance": label, "report": rep });
        if !rep.passed() {
            out["instance_json"] = serde_json::from_str(&instance_to_json(inst))?;
        }
        println!("{}", serde_json::to_string(&out)?);
        return Ok(());
    }
    for (property, verdict) in &rep.verdicts {
        match verdict.witness() {
            None => println!("{label}: {property} pass"),
            Some(w) => print_witness(w, labels_of(inst)),
        }
    }
    Ok(())
}

fn cmd_fuzz(args: &FuzzArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = FuzzConfig {
        seed: args.seed.or(env_seed()?).unwrap_or(0),
        refine: args.refine,
        execution: Execution::default(),
        ..FuzzConfig::default()
    };
    if let Some(samples) = args.samples {
        cfg.mode = SearchMode::Sampled { samples };
    }
    let mut violated = false;
    match (&args.instance, args.random) {
        (Some(path), _) => {
            let inst = load(path)?;
            if let Some(key) = &args.agent {
                let id = resolve_agent(labels_of(&inst), &ids_of(&inst), key)?;
                cfg.agents = Some(AgentSet::from([id]));
            }
            let rep = fuzz_any(&inst, args.mechanism, &cfg)?;
            violated |= !rep.passed();
            report(&inst, &rep, args.json, &path.display().to_string())?;
        }
        (None, Some(count)) => {
            if args.agent.is_some() {
                bail!("--agent needs an instance file");
            }
            for k in 0..count {
                let seed = cfg.seed.wrapping_add(k);
                let inst = match args.mechanism.variant() {
                    Variant::Homogeneous => AnyInstance::Hom(sim::small_hom_instance(seed)),
                    Variant::Heterogeneous => AnyInstance::Het(sim::small_het_instance(seed)),
                    Variant::Forward => bail!("random instances exist for procurement mechanisms only"),
                };
                let rep = fuzz_any(&inst, args.mechanism, &cfg)?;
                if !rep.passed() {
                    violated = true;
                    report(&inst, &rep, args.json, &format!("random #{seed}"))?;
                    if !args.json {
                        println!("{}", instance_to_json(&inst));
                    }
                    break;
                }
            }
            if !violated {
                println!("{count} random instances: no violations");
            }
        }
        (None, None) => bail!("give an instance file or --random N"),
    }
    Ok(if violated { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_sweep(config: &Path, out: &Path, no_timing: bool, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed.or(env_seed()?) {
        cfg.seed = s;
    }
    if no_timing {
        cfg.timing = false;
    }
    if cfg.variant == Variant::Homogeneous {
        eprintln!("note: homogeneous reserve fixed at {} per unit", sim::HOM_RESERVE);
    }
    let result = sim::run_sweep(&cfg, Execution::default())?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    sim::write_csv(&result.records, BufWriter::new(file))?;
    eprintln!(
        "{} records written to {}, {} failed runs",
        result.records.len(),
        out.display(),
        result.failures.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(path: &Path) -> anyhow::Result<ExitCode> {
    let inst = load(path)?;
    let mut stdout = io::stdout().lock();
    match &inst {
        AnyInstance::Hom(i) => {
            let market = reachable_market(i);
            let offers = offers_of(i, &market.members());
            let best = min_cost_multiunit_oracle(&offers, i.requester.demand, Some(i.requester.reserve_unit))?;
            writeln!(stdout, "optimum      {}", best.cost)?;
            for kind in [MechanismKind::DVcg, MechanismKind::NdVcg, MechanismKind::RanHm] {
                let sc = social_cost(&kind.run_hom(i)?, i)?;
                writeln!(stdout, "{:<12} {}  gap {}", kind.name(), sc, sc - best.cost)?;
            }
            for layer in ran_hm_trace(i).layers {
                let eligible = offers_of(i, &layer.eligible);
                let local = min_cost_multiunit_oracle(&eligible, layer.demand_in, Some(i.requester.reserve_unit))?;
                writeln!(
                    stdout,
                    "layer {:<6} {}  layer optimum {}",
                    layer.layer, layer.cost_with_virtual, local.cost
                )?;
            }
        }
        AnyInstance::Het(i) => {
            let (chosen, best) = min_social_cost_ht(i)?;
            let names: Vec<_> = chosen.iter().map(|a| i.labels.agent(*a)).collect();
            writeln!(stdout, "optimum      {}  with {{{}}}", best, names.join(","))?;
            for kind in [MechanismKind::RanHt, MechanismKind::LocalGreedy] {
                let sc = social_cost(&kind.run_het(i)?, i)?;
                writeln!(stdout, "{:<12} {}  gap {}", kind.name(), sc, sc - best)?;
            }
        }
        AnyInstance::Forward(_) => bail!("no oracle for forward auctions"),
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::VariantMismatch { .. }) => 3,
        Some(Error::OracleTooLarge(_)) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = par::install(cli.threads, || match &cli.command {
        Command::Run { instance, mechanism, json } => cmd_run(instance, *mechanism, *json),
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Sweep { config, out, no_timing, seed } => cmd_sweep(config, out, *no_timing, *seed),
        Command::Oracle { instance } => cmd_oracle(instance),
    });
    match result.map_err(anyhow::Error::from).and_then(|r| r) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
