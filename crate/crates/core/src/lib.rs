//! Deterministic discrete-event simulator of a retail value chain.
//!
//! Customers order from a retailer, the retailer sources goods from its
//! warehouses, and warehouses replenish from manufacturers through a
//! four-stage procurement workflow. Every delivered message, state
//! transition and inventory movement lands in an append-only [`EventLog`],
//! which is the system of record for [`Metrics`] and invariant checks.
//!
//! Module map:
//!
//! - [`party`]: trading-community CRM model (parties, relationships, patterns)
//! - [`procurement`]: plan / transmit / receive / warrant / book state machine
//! - [`inventory`]: per-owner SKU ledger with reservations
//! - [`protocol`]: message vocabulary and the per-role handlers
//! - [`engine`]: event queue, clock, dispatch, event log
//! - [`scenario`]: scenario files, metrics, replay and invariant checks

pub mod engine;
pub mod inventory;
pub mod party;
pub mod procurement;
pub mod protocol;
pub mod scenario;
mod time;
mod units;

pub use engine::{
    Envelope, EventLog, LatencyTable, Lcg64, LogEntry, RandomSource, RunOutcome, SimError,
    Simulation, StepOutcome, World,
};
pub use inventory::{InventoryError, InventoryLedger, StockOp};
pub use party::{PartyError, PartyId, PartyKind, Registry, RelationshipType};
pub use procurement::{ProcurementBook, ProcurementError, ProcurementState};
pub use protocol::{Message, ProtocolError};
pub use scenario::{
    check_run, compute_metrics, load_scenario, replay_check, Metrics, ReplayVerdict, Scenario,
    ScenarioError,
};
pub use time::SimTime;
pub use units::{Money, Sku};
