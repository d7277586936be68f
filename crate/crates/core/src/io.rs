//! Instance files.
//!
//! ```json
//! {
//!   "variant": "heterogeneous",
//!   "requester": { "tasks": ["a", "b"], "reserve": { "a": 3, "b": "5.5" }, "neighbors": [1] },
//!   "suppliers": [ { "id": 1, "name": "s1", "ability": ["a"], "cost": 2, "neighbors": [] } ]
//! }
//! ```
//!
//! Homogeneous files use `"demand"`, a single `"reserve"` and integer
//! abilities. Forward files have a `"seller"` with `"units"` and `"bidders"`
//! with a `"value"`. Amounts may be numbers or exact decimal / fraction
//! strings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{AnyInstance, Variant};
use crate::model::{
    AgentId, AgentSet, ForwardBidder, ForwardInstance, HetInstance, HomInstance, Instance, Labels,
    RequesterHM, RequesterHT, Seller, SupplierHM, SupplierHT, TaskId, TaskSet,
};
use crate::money::Money;

#[derive(Deserialize)]
struct Header {
    variant: Variant,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomFile {
    variant: Variant,
    requester: HomRequesterFile,
    suppliers: Vec<HomSupplierFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomRequesterFile {
    demand: u64,
    reserve: Money,
    #[serde(default)]
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomSupplierFile {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    ability: u64,
    cost: Money,
    #[serde(default)]
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HetFile {
    variant: Variant,
    requester: HetRequesterFile,
    suppliers: Vec<HetSupplierFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ReserveFile {
    Uniform(Money),
    PerTask(BTreeMap<String, Money>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HetRequesterFile {
    tasks: Vec<String>,
    reserve: ReserveFile,
    #[serde(default)]
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HetSupplierFile {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    ability: Vec<String>,
    cost: Money,
    #[serde(default)]
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardFile {
    variant: Variant,
    seller: SellerFile,
    bidders: Vec<BidderFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SellerFile {
    units: u64,
    #[serde(default)]
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BidderFile {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    value: Money,
    #[serde(default)]
    neighbors: Vec<u32>,
}

fn syntax(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn ids(v: &[u32]) -> AgentSet {
    v.iter().map(|&i| AgentId(i)).collect()
}

fn id_list(set: &AgentSet) -> Vec<u32> {
    set.iter().map(|a| a.0).collect()
}

/// Collects `(id, name, supplier)` triples, rejecting duplicate ids.
fn agents<S>(
    entries: impl IntoIterator<Item = (u32, Option<String>, S)>,
) -> Result<(BTreeMap<AgentId, S>, BTreeMap<AgentId, String>)> {
    let mut suppliers = BTreeMap::new();
    let mut names = BTreeMap::new();
    for (id, name, s) in entries {
        let id = AgentId(id);
        if suppliers.insert(id, s).is_some() {
            return Err(Error::InvalidInstance(format!("agent {id} is listed twice")));
        }
        if let Some(n) = name {
            names.insert(id, n);
        }
    }
    Ok((suppliers, names))
}

fn hom_from(file: HomFile) -> Result<HomInstance> {
    let requester = RequesterHM {
        demand: file.requester.demand,
        reserve_unit: file.requester.reserve,
        neighbors: ids(&file.requester.neighbors),
    };
    let (suppliers, names) = agents(file.suppliers.into_iter().map(|s| {
        (
            s.id,
            s.name,
            SupplierHM {
                ability: s.ability,
                unit_cost: s.cost,
                neighbors: ids(&s.neighbors),
            },
        )
    }))?;
    let inst = Instance::new(requester, suppliers)?.with_labels(Labels {
        agents: names,
        tasks: BTreeMap::new(),
    });
    inst.validate()?;
    Ok(inst)
}

fn het_from(file: HetFile) -> Result<HetInstance> {
    let mut task_ids: BTreeMap<String, TaskId> = BTreeMap::new();
    let mut task_names = BTreeMap::new();
    for (i, name) in file.requester.tasks.iter().enumerate() {
        let id = TaskId(i as u32);
        if task_ids.insert(name.clone(), id).is_some() {
            return Err(Error::InvalidInstance(format!("task `{name}` is listed twice")));
        }
        task_names.insert(id, name.clone());
    }
    let lookup = |name: &str| {
        task_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidInstance(format!("unknown task `{name}`")))
    };
    let reserve = match &file.requester.reserve {
        ReserveFile::Uniform(v) => task_ids.values().map(|t| (*t, *v)).collect(),
        ReserveFile::PerTask(map) => {
            let mut out = BTreeMap::new();
            for (name, v) in map {
                out.insert(lookup(name)?, *v);
            }
            if let Some(missing) = file.requester.tasks.iter().find(|t| !map.contains_key(*t)) {
                return Err(Error::InvalidInstance(format!("task `{missing}` has no reserve")));
            }
            out
        }
    };
    let requester = RequesterHT {
        reserve,
        neighbors: ids(&file.requester.neighbors),
    };
    let mut entries = Vec::with_capacity(file.suppliers.len());
    for s in file.suppliers {
        let bundle = s
            .ability
            .iter()
            .map(|t| lookup(t))
            .collect::<Result<TaskSet>>()?;
        entries.push((
            s.id,
            s.name,
            SupplierHT {
                bundle,
                total_cost: s.cost,
                neighbors: ids(&s.neighbors),
            },
        ));
    }
    let (suppliers, names) = agents(entries)?;
    let inst = Instance::new(requester, suppliers)?.with_labels(Labels {
        agents: names,
        tasks: task_names,
    });
    inst.validate()?;
    Ok(inst)
}

fn forward_from(file: ForwardFile) -> Result<ForwardInstance> {
    let seller = Seller {
        units: file.seller.units,
        neighbors: ids(&file.seller.neighbors),
    };
    let (bidders, names) = agents(file.bidders.into_iter().map(|b| {
        (
            b.id,
            b.name,
            ForwardBidder {
                valuation: b.value,
                neighbors: ids(&b.neighbors),
            },
        )
    }))?;
    let inst = Instance::new(seller, bidders)?.with_labels(Labels {
        agents: names,
        tasks: BTreeMap::new(),
    });
    inst.validate()?;
    Ok(inst)
}

/// Parses an instance file. Syntax and shape errors carry line and column.
pub fn parse_instance(text: &str) -> Result<AnyInstance> {
    let header: Header = serde_json::from_str(text).map_err(syntax)?;
    Ok(match header.variant {
        Variant::Homogeneous => AnyInstance::Hom(hom_from(serde_json::from_str(text).map_err(syntax)?)?),
        Variant::Heterogeneous => AnyInstance::Het(het_from(serde_json::from_str(text).map_err(syntax)?)?),
        Variant::Forward => AnyInstance::Forward(forward_from(serde_json::from_str(text).map_err(syntax)?)?),
    })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<AnyInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

fn name_of(labels: &Labels, id: AgentId) -> Option<String> {
    labels.agents.get(&id).cloned()
}

fn hom_to(inst: &HomInstance) -> HomFile {
    HomFile {
        variant: Variant::Homogeneous,
        requester: HomRequesterFile {
            demand: inst.requester.demand,
            reserve: inst.requester.reserve_unit,
            neighbors: id_list(&inst.requester.neighbors),
        },
        suppliers: inst
            .suppliers
            .iter()
            .map(|(id, s)| HomSupplierFile {
                id: id.0,
                name: name_of(&inst.labels, *id),
                ability: s.ability,
                cost: s.unit_cost,
                neighbors: id_list(&s.neighbors),
            })
            .collect(),
    }
}

fn het_to(inst: &HetInstance) -> HetFile {
    let task = |t: &TaskId| inst.labels.task(*t);
    HetFile {
        variant: Variant::Heterogeneous,
        requester: HetRequesterFile {
            tasks: inst.requester.reserve.keys().map(task).collect(),
            reserve: ReserveFile::PerTask(
                inst.requester.reserve.iter().map(|(t, v)| (task(t), *v)).collect(),
            ),
            neighbors: id_list(&inst.requester.neighbors),
        },
        suppliers: inst
            .suppliers
            .iter()
            .map(|(id, s)| HetSupplierFile {
                id: id.0,
                name: name_of(&inst.labels, *id),
                ability: s.bundle.iter().map(task).collect(),
                cost: s.total_cost,
                neighbors: id_list(&s.neighbors),
            })
            .collect(),
    }
}

fn forward_to(inst: &ForwardInstance) -> ForwardFile {
    ForwardFile {
        variant: Variant::Forward,
        seller: SellerFile {
            units: inst.requester.units,
            neighbors: id_list(&inst.requester.neighbors),
        },
        bidders: inst
            .suppliers
            .iter()
            .map(|(id, b)| BidderFile {
                id: id.0,
                name: name_of(&inst.labels, *id),
                value: b.valuation,
                neighbors: id_list(&b.neighbors),
            })
            .collect(),
    }
}

/// Pretty JSON in the instance file format.
pub fn instance_to_json(inst: &AnyInstance) -> String {
    let out = match inst {
        AnyInstance::Hom(i) => serde_json::to_string_pretty(&hom_to(i)),
        AnyInstance::Het(i) => serde_json::to_string_pretty(&het_to(i)),
        AnyInstance::Forward(i) => serde_json::to_string_pretty(&forward_to(i)),
    };
    out.expect("instance files always serialize")
}

/// Resolves an agent given by id or by display name.
pub fn resolve_agent(labels: &Labels, known: &AgentSet, key: &str) -> Result<AgentId> {
    if let Some(id) = labels.agent_by_name(key) {
        return Ok(id);
    }
    key.parse::<u32>()
        .ok()
        .map(AgentId)
        .filter(|id| known.contains(id))
        .ok_or_else(|| Error::Config(format!("unknown agent `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOM: &str = r#"{
        "variant": "homogeneous",
        "requester": { "demand": 3, "reserve": 10, "neighbors": [1, 2] },
        "suppliers": [
            { "id": 1, "name": "j1", "ability": 2, "cost": "4", "neighbors": [2] },
            { "id": 2, "ability": 2, "cost": 6.5, "neighbors": [0] }
        ]
    }"#;

    #[test]
    fn homogeneous_round_trip() {
        let inst = parse_instance(HOM).unwrap();
        let AnyInstance::Hom(h) = &inst else { panic!() };
        assert_eq!(h.suppliers[&AgentId(2)].unit_cost, Money::new(13, 2));
        assert_eq!(h.labels.agent(AgentId(1)), "j1");
        let again = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn heterogeneous_uniform_reserve() {
        let text = r#"{"variant":"heterogeneous","requester":{"tasks":["x","y"],"reserve":2,"neighbors":[1]},
            "suppliers":[{"id":1,"ability":["y"],"cost":"1/3","neighbors":[]}]}"#;
        let inst = parse_instance(text).unwrap();
        let AnyInstance::Het(h) = &inst else { panic!() };
        assert_eq!(h.budget(), Money::from_int(4));
        assert_eq!(parse_instance(&instance_to_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_instance("{\n  \"variant\": \"homogeneous\",\n  \"requester\": {\"demand\": }\n}").unwrap_err();
        let Error::Parse { line, column, .. } = err else { panic!("{err}") };
        assert_eq!(line, 3);
        assert!(column > 0);
    }

    #[test]
    fn dangling_and_unknown_references_are_rejected() {
        let dangling = HOM.replace("\"neighbors\": [2] }", "\"neighbors\": [7] }");
        assert!(matches!(parse_instance(&dangling), Err(Error::InvalidInstance(_))));
        let text = r#"{"variant":"heterogeneous","requester":{"tasks":["x"],"reserve":{"x":1},"neighbors":[]},
            "suppliers":[{"id":1,"ability":["z"],"cost":1,"neighbors":[]}]}"#;
        assert!(matches!(parse_instance(text), Err(Error::InvalidInstance(_))));
        assert!(matches!(parse_instance(r#"{"variant":"cubic"}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn agents_resolve_by_name_or_id() {
        let AnyInstance::Hom(h) = parse_instance(HOM).unwrap() else { panic!() };
        let known = h.suppliers.keys().copied().collect();
        assert_eq!(resolve_agent(&h.labels, &known, "j1").unwrap(), AgentId(1));
        assert_eq!(resolve_agent(&h.labels, &known, "2").unwrap(), AgentId(2));
        assert!(resolve_agent(&h.labels, &known, "9").is_err());
    }
}
