//! Scenario files, metrics, replay and run checks.
//!
//! A scenario is a UTF-8 JSON object with the top-level keys `parties`,
//! `locations`, `relationships`, `agents`, `catalog`, `inventory`, `orders`,
//! `latency` and `params`. Any other top-level key is rejected. `parties`,
//! `agents` and `catalog` are required; the rest default to empty or to the
//! documented defaults.

mod check;
mod metrics;
mod replay;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{AgentRole, LatencyTable, RandomSource, World, DEFAULT_MAX_EVENTS};
use crate::party::{
    CommunicationPoint, Location, LocationId, Party, PartyError, PartyId, PartyKind, Registry,
    RelationshipId, RelationshipType, Role,
};
use crate::protocol::OrderId;
use crate::time::SimTime;
use crate::units::{Money, Sku};

pub use check::{check_run, Violation};
pub use metrics::{compute_metrics, Metrics, MetricsError};
pub use replay::{compare_logs, replay_check, ReplayVerdict};

pub const TOP_LEVEL_KEYS: [&str; 9] = [
    "parties",
    "locations",
    "relationships",
    "agents",
    "catalog",
    "inventory",
    "orders",
    "latency",
    "params",
];

pub const DEFAULT_LATENCY: u64 = 1;
pub const DEFAULT_BUCKET_WIDTH: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid {entity}: {reason}")]
    Validation { entity: String, reason: String },
}

fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        entity: entity.into(),
        reason: reason.into(),
    }
}

// ---- file format ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub parties: Vec<PartySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locations: Vec<LocationSpec>,
    #[serde(default)]
    pub relationships: Vec<RelationshipSpec>,
    pub agents: AgentsSpec,
    pub catalog: Vec<CatalogSpec>,
    #[serde(default)]
    pub inventory: Vec<StockSpec>,
    #[serde(default)]
    pub orders: Vec<OrderSpec>,
    #[serde(default)]
    pub latency: LatencySpec,
    #[serde(default)]
    pub params: ParamsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartySpec {
    pub id: String,
    pub kind: PartyKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roles: Vec<Role>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub communication_points: Vec<CommunicationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub address: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipSpec {
    pub from: String,
    pub to: String,
    #[serde(rename = "type")]
    pub rel_type: RelationshipType,
    #[serde(default)]
    pub start: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSpec {
    pub retailer: String,
    pub warehouses: Vec<WarehouseAgentSpec>,
    pub manufacturers: Vec<ManufacturerAgentSpec>,
    pub customers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarehouseAgentSpec {
    pub id: String,
    pub manufacturer: String,
    pub reorder_qty: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturerAgentSpec {
    pub id: String,
    pub production_delay: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub sku: String,
    pub unit_price: u64,
    pub unit_cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockSpec {
    pub owner: String,
    pub sku: String,
    pub qty: u64,
}

/// One customer order. Either `sku` + `qty`, or several `lines`, which are
/// split into one single-SKU order each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSpec {
    pub time: u64,
    pub buyer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sku: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qty: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<OrderLineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderLineSpec {
    pub sku: String,
    pub qty: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySpec {
    #[serde(default = "default_latency")]
    pub default: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<RoleLatency>,
    /// Inclusive `[min, max]` for seeded per-agent-pair latencies. Requires
    /// `params.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_range: Option<[u64; 2]>,
}

impl Default for LatencySpec {
    fn default() -> Self {
        LatencySpec {
            default: DEFAULT_LATENCY,
            pairs: Vec::new(),
            random_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleLatency {
    pub from: AgentRole,
    pub to: AgentRole,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "default_bucket_width")]
    pub bucket_width: u64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fault injection: every `POSubmit` is delivered twice.
    #[serde(default)]
    pub duplicate_po_submits: bool,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        ParamsSpec {
            bucket_width: DEFAULT_BUCKET_WIDTH,
            max_events: DEFAULT_MAX_EVENTS,
            seed: None,
            duplicate_po_submits: false,
        }
    }
}

fn default_latency() -> u64 {
    DEFAULT_LATENCY
}

fn default_bucket_width() -> u64 {
    DEFAULT_BUCKET_WIDTH
}

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

// ---- validated form -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarehouseSpec {
    pub id: PartyId,
    pub manufacturer: PartyId,
    pub reorder_qty: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManufacturerSpec {
    pub id: PartyId,
    pub production_delay: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogItem {
    pub unit_price: Money,
    pub unit_cost: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StockLine {
    pub owner: PartyId,
    pub sku: Sku,
    pub qty: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderArrival {
    pub id: OrderId,
    pub time: SimTime,
    pub buyer: PartyId,
    pub sku: Sku,
    pub qty: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    pub bucket_width: u64,
    pub max_events: u64,
    pub seed: Option<u64>,
    pub duplicate_po_submits: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Latency {
    pub default: u64,
    pub pairs: Vec<RoleLatency>,
    pub random_range: Option<(u64, u64)>,
}

/// A fully validated scenario: every reference resolves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub registry: Registry,
    pub retailer: PartyId,
    pub warehouses: Vec<WarehouseSpec>,
    pub manufacturers: Vec<ManufacturerSpec>,
    pub customers: Vec<PartyId>,
    pub catalog: BTreeMap<Sku, CatalogItem>,
    pub inventory: Vec<StockLine>,
    pub orders: Vec<OrderArrival>,
    pub latency: Latency,
    pub params: Params,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let parse_err = |e: serde_json::Error| ScenarioError::Parse {
        line: e.line(),
        reason: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let object = value
        .as_object()
        .ok_or_else(|| invalid("scenario", "top level must be a JSON object"))?;
    if let Some(key) = object.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
        return Err(invalid("scenario", format!("unknown top-level key `{key}`")));
    }
    let file: ScenarioFile = serde_json::from_str(text).map_err(parse_err)?;
    Scenario::from_file(&file)
}

fn party_id(entity: &str, raw: &str) -> Result<PartyId, ScenarioError> {
    PartyId::new(raw).ok_or_else(|| invalid(entity, format!("bad party id {raw:?}")))
}

fn sku(entity: &str, raw: &str) -> Result<Sku, ScenarioError> {
    Sku::new(raw).ok_or_else(|| invalid(entity, format!("bad sku {raw:?}")))
}

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Scenario, ScenarioError> {
        let params = &file.params;
        if params.bucket_width == 0 {
            return Err(invalid("params", "bucket_width must be at least 1"));
        }
        if params.max_events == 0 {
            return Err(invalid("params", "max_events must be at least 1"));
        }
        let mut registry = Registry::with_bucket_width(params.bucket_width);

        for loc in &file.locations {
            let entity = format!("location {}", loc.id);
            if loc.id.is_empty() {
                return Err(invalid("location", "empty id"));
            }
            registry
                .insert_location(Location {
                    id: LocationId(loc.id.clone()),
                    label: loc.label.clone(),
                    address: loc.address.clone(),
                })
                .map_err(|e| invalid(entity, e.to_string()))?;
        }

        for p in &file.parties {
            let id = party_id("party", &p.id)?;
            let entity = format!("party {id}");
            registry
                .insert_party(Party {
                    id,
                    kind: p.kind,
                    name: p.name.clone(),
                    locations: p.locations.iter().map(|l| LocationId(l.clone())).collect(),
                    communication_points: p.communication_points.clone(),
                    roles: p.roles.iter().copied().collect(),
                })
                .map_err(|e| invalid(entity, e.to_string()))?;
        }

        let retailer = party_id("agents", &file.agents.retailer)?;
        let mut rel_ids: Vec<(RelationshipId, Option<&str>)> = Vec::new();
        for (i, r) in file.relationships.iter().enumerate() {
            let entity = format!("relationship #{}", i + 1);
            let from = party_id(&entity, &r.from)?;
            let to = party_id(&entity, &r.to)?;
            let id = registry
                .link_relationship(&from, &to, r.rel_type, SimTime(r.start))
                .map_err(|e| invalid(&entity, e.to_string()))?;
            if let Some(end) = r.end {
                registry
                    .end_relationship(id, SimTime(end))
                    .map_err(|e| invalid(&entity, e.to_string()))?;
            }
            rel_ids.push((id, r.customer_code.as_deref()));
        }
        for (i, (id, code)) in rel_ids.into_iter().enumerate() {
            if let Some(code) = code {
                registry
                    .add_customer_info(id, code)
                    .map_err(|e| invalid(format!("relationship #{}", i + 1), e.to_string()))?;
            }
        }

        // Agents.
        let mut roles: BTreeMap<PartyId, AgentRole> = BTreeMap::new();
        let mut claim = |id: &PartyId, role: AgentRole| -> Result<(), ScenarioError> {
            if registry.party(id).is_none() {
                return Err(invalid(
                    format!("{role} {id}"),
                    PartyError::UnknownParty(id.clone()).to_string(),
                ));
            }
            if let Some(prev) = roles.insert(id.clone(), role) {
                return Err(invalid(
                    format!("{role} {id}"),
                    format!("already declared as {prev}"),
                ));
            }
            Ok(())
        };
        claim(&retailer, AgentRole::Retailer)?;
        let mut manufacturers = Vec::new();
        for m in &file.agents.manufacturers {
            let id = party_id("manufacturer", &m.id)?;
            claim(&id, AgentRole::Manufacturer)?;
            if m.production_delay == 0 {
                return Err(invalid(
                    format!("manufacturer {id}"),
                    "production_delay must be at least 1",
                ));
            }
            manufacturers.push(ManufacturerSpec {
                id,
                production_delay: m.production_delay,
            });
        }
        let mut warehouses = Vec::new();
        for w in &file.agents.warehouses {
            let id = party_id("warehouse", &w.id)?;
            claim(&id, AgentRole::Warehouse)?;
            let entity = format!("warehouse {id}");
            let manufacturer = party_id(&entity, &w.manufacturer)?;
            if !manufacturers.iter().any(|m| m.id == manufacturer) {
                return Err(invalid(
                    entity,
                    format!("{manufacturer} is not a declared manufacturer"),
                ));
            }
            if !registry.is_supplier_to(&manufacturer, &id, SimTime::ZERO) {
                return Err(invalid(
                    entity,
                    format!("no active SupplierTo link from {manufacturer}"),
                ));
            }
            if w.reorder_qty == 0 {
                return Err(invalid(entity, "reorder_qty must be at least 1"));
            }
            warehouses.push(WarehouseSpec {
                id,
                manufacturer,
                reorder_qty: w.reorder_qty,
            });
        }
        let mut customers = Vec::new();
        for c in &file.agents.customers {
            let id = party_id("customer", c)?;
            claim(&id, AgentRole::Customer)?;
            customers.push(id);
        }
        if warehouses.is_empty() {
            return Err(invalid("agents", "at least one warehouse is required"));
        }
        if manufacturers.is_empty() {
            return Err(invalid("agents", "at least one manufacturer is required"));
        }
        if customers.is_empty() {
            return Err(invalid("agents", "at least one customer is required"));
        }
        for p in registry.parties() {
            if p.kind == PartyKind::Person && p.roles.contains(&Role::Seller) && p.id != retailer {
                return Err(invalid(
                    format!("party {}", p.id),
                    "a person may hold the Seller role only as the retailer",
                ));
            }
        }

        let mut catalog = BTreeMap::new();
        for item in &file.catalog {
            let code = sku("catalog", &item.sku)?;
            let entry = CatalogItem {
                unit_price: Money(item.unit_price),
                unit_cost: Money(item.unit_cost),
            };
            if catalog.insert(code.clone(), entry).is_some() {
                return Err(invalid("catalog", format!("duplicate sku {code}")));
            }
        }

        let mut inventory = Vec::new();
        let mut stocked = BTreeSet::new();
        for line in &file.inventory {
            let owner = party_id("inventory", &line.owner)?;
            let code = sku("inventory", &line.sku)?;
            let entity = format!("inventory {owner}/{code}");
            if !matches!(
                roles.get(&owner),
                Some(AgentRole::Warehouse | AgentRole::Retailer)
            ) {
                return Err(invalid(entity, "owner must be the retailer or a warehouse"));
            }
            if !catalog.contains_key(&code) {
                return Err(invalid(entity, format!("unknown sku {code}")));
            }
            if !stocked.insert((owner.clone(), code.clone())) {
                return Err(invalid(entity, "listed twice"));
            }
            inventory.push(StockLine {
                owner,
                sku: code,
                qty: line.qty,
            });
        }

        let mut orders = Vec::new();
        for (i, o) in file.orders.iter().enumerate() {
            let entity = format!("order #{}", i + 1);
            let buyer = party_id(&entity, &o.buyer)?;
            if roles.get(&buyer) != Some(&AgentRole::Customer) {
                return Err(invalid(&entity, format!("{buyer} is not a customer agent")));
            }
            let lines: Vec<(String, u64)> = match (&o.sku, o.qty, o.lines.is_empty()) {
                (Some(s), Some(q), true) => vec![(s.clone(), q)],
                (None, None, false) => o.lines.iter().map(|l| (l.sku.clone(), l.qty)).collect(),
                _ => {
                    return Err(invalid(
                        &entity,
                        "give either `sku` and `qty` or a nonempty `lines` list",
                    ))
                }
            };
            for (raw, qty) in lines {
                let code = sku(&entity, &raw)?;
                let Some(item) = catalog.get(&code) else {
                    return Err(invalid(&entity, format!("unknown sku {code}")));
                };
                if qty == 0 {
                    return Err(invalid(&entity, "qty must be at least 1"));
                }
                if item.unit_price.checked_times(qty).is_none() {
                    return Err(invalid(&entity, "order value overflows"));
                }
                orders.push(OrderArrival {
                    id: OrderId(format!("O{}", orders.len() + 1)),
                    time: SimTime(o.time),
                    buyer: buyer.clone(),
                    sku: code,
                    qty,
                });
            }
        }

        let random_range = match file.latency.random_range {
            Some([lo, hi]) if lo > hi => {
                return Err(invalid("latency", "random_range min exceeds max"))
            }
            Some(_) if params.seed.is_none() => {
                return Err(invalid("latency", "random_range needs params.seed"))
            }
            Some([lo, hi]) => Some((lo, hi)),
            None => None,
        };

        Ok(Scenario {
            registry,
            retailer,
            warehouses,
            manufacturers,
            customers,
            catalog,
            inventory,
            orders,
            latency: Latency {
                default: file.latency.default,
                pairs: file.latency.pairs.clone(),
                random_range,
            },
            params: Params {
                bucket_width: params.bucket_width,
                max_events: params.max_events,
                seed: params.seed,
                duplicate_po_submits: params.duplicate_po_submits,
            },
        })
    }

    /// Latency table for `world`'s agents. Seeded entries come from `rng`.
    pub fn latency_table<R: RandomSource + ?Sized>(&self, world: &World, rng: &mut R) -> LatencyTable {
        let roles = world
            .agents
            .iter()
            .map(|(id, a)| (id.clone(), a.role()))
            .collect();
        let mut table = LatencyTable::constant(self.latency.default).with_roles(roles);
        for p in &self.latency.pairs {
            table.set_role_pair(p.from, p.to, p.ticks);
        }
        if let Some((lo, hi)) = self.latency.random_range {
            table.seed_pairs(rng, lo, hi);
        }
        table
    }
}
