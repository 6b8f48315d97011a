//! Deterministic discrete-event engine.
//!
//! Envelopes are totally ordered by `(deliver_at, seq)`, where `seq` is a
//! global send counter. [`Simulation::step`] pops the minimum, advances the
//! clock, runs the recipient's handler and schedules whatever it sends. The
//! same scenario always produces the same [`EventLog`] bytes.

mod latency;
mod log;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::inventory::InventoryLedger;
use crate::party::{PartyId, Registry};
use crate::protocol::{
    CustomerState, Ctx, ManufacturerState, Message, OrderId, Outgoing, ProtocolError, Reaction,
    RetailerState, WarehouseState,
};
use crate::scenario::Scenario;
use crate::time::SimTime;

pub use latency::{draw_in_range, AgentRole, LatencyTable, Lcg64, RandomSource};
pub use log::{EventLog, LogEntry};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub deliver_at: SimTime,
    pub seq: u64,
    pub from: PartyId,
    pub to: PartyId,
    pub payload: Message,
}

impl Envelope {
    fn key(&self) -> (SimTime, u64) {
        (self.deliver_at, self.seq)
    }
}

impl Ord for Envelope {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Envelope {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("envelope for t={deliver_at} scheduled while the clock reads {clock}")]
    SchedulesInPast { deliver_at: SimTime, clock: SimTime },
    #[error("no agent {0} to deliver to")]
    UnknownRecipient(PartyId),
    #[error("more than {0} events without quiescence")]
    EventBudgetExceeded(u64),
    #[error("{agent} failed at t={at}: {source}")]
    Protocol {
        agent: PartyId,
        at: SimTime,
        #[source]
        source: ProtocolError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Retailer(RetailerState),
    Warehouse(WarehouseState),
    Manufacturer(ManufacturerState),
    Customer(CustomerState),
}

impl Agent {
    pub fn role(&self) -> AgentRole {
        match self {
            Agent::Retailer(_) => AgentRole::Retailer,
            Agent::Warehouse(_) => AgentRole::Warehouse,
            Agent::Manufacturer(_) => AgentRole::Manufacturer,
            Agent::Customer(_) => AgentRole::Customer,
        }
    }

    pub fn ledger(&self) -> Option<&InventoryLedger> {
        match self {
            Agent::Retailer(r) => Some(&r.ledger),
            Agent::Warehouse(w) => Some(&w.ledger),
            _ => None,
        }
    }

    fn handle(self, env: &Envelope, ctx: &Ctx<'_>) -> Result<(Agent, Reaction), ProtocolError> {
        Ok(match self {
            Agent::Retailer(s) => {
                let (s, r) = s.handle(env, ctx)?;
                (Agent::Retailer(s), r)
            }
            Agent::Warehouse(s) => {
                let (s, r) = s.handle(env, ctx)?;
                (Agent::Warehouse(s), r)
            }
            Agent::Manufacturer(s) => {
                let (s, r) = s.handle(env, ctx)?;
                (Agent::Manufacturer(s), r)
            }
            Agent::Customer(s) => {
                let (s, r) = s.handle(env, ctx)?;
                (Agent::Customer(s), r)
            }
        })
    }
}

/// Every agent's state plus the shared, read-only party registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub registry: Registry,
    pub retailer: PartyId,
    pub agents: BTreeMap<PartyId, Agent>,
}

impl World {
    pub fn retailer(&self) -> &RetailerState {
        match &self.agents[&self.retailer] {
            Agent::Retailer(r) => r,
            _ => unreachable!("retailer id maps to a retailer"),
        }
    }

    pub fn warehouses(&self) -> impl Iterator<Item = &WarehouseState> {
        self.agents.values().filter_map(|a| match a {
            Agent::Warehouse(w) => Some(w),
            _ => None,
        })
    }

    pub fn ledgers(&self) -> impl Iterator<Item = &InventoryLedger> {
        self.agents.values().filter_map(Agent::ledger)
    }

    pub fn total_on_hand(&self) -> u64 {
        self.ledgers().map(InventoryLedger::total_on_hand).sum()
    }

    pub fn total_reserved(&self) -> u64 {
        self.ledgers().map(InventoryLedger::total_reserved).sum()
    }

    /// Builds the initial agent states described by a validated scenario.
    pub fn from_scenario(scenario: &Scenario) -> World {
        let mut agents = BTreeMap::new();
        let prices = scenario
            .catalog
            .iter()
            .map(|(sku, item)| (sku.clone(), item.unit_price))
            .collect();
        let costs: BTreeMap<_, _> = scenario
            .catalog
            .iter()
            .map(|(sku, item)| (sku.clone(), item.unit_cost))
            .collect();
        let warehouse_ids = scenario.warehouses.iter().map(|w| w.id.clone()).collect();
        let mut retailer = RetailerState::new(scenario.retailer.clone(), warehouse_ids, prices);
        let mut ledgers: BTreeMap<&PartyId, InventoryLedger> = scenario
            .warehouses
            .iter()
            .map(|w| (&w.id, InventoryLedger::new(w.id.clone())))
            .collect();
        for line in &scenario.inventory {
            let ledger = if line.owner == scenario.retailer {
                &mut retailer.ledger
            } else {
                ledgers.get_mut(&line.owner).expect("validated owner")
            };
            ledger.seed(line.sku.clone(), line.qty, SimTime::ZERO);
        }
        agents.insert(scenario.retailer.clone(), Agent::Retailer(retailer));
        for w in &scenario.warehouses {
            let ledger = ledgers.remove(&w.id).expect("one ledger per warehouse");
            agents.insert(
                w.id.clone(),
                Agent::Warehouse(WarehouseState::new(
                    ledger,
                    w.manufacturer.clone(),
                    w.reorder_qty,
                    costs.clone(),
                )),
            );
        }
        for m in &scenario.manufacturers {
            agents.insert(
                m.id.clone(),
                Agent::Manufacturer(ManufacturerState::new(m.id.clone(), m.production_delay)),
            );
        }
        for c in &scenario.customers {
            agents.insert(c.clone(), Agent::Customer(CustomerState::new(c.clone())));
        }
        World {
            registry: scenario.registry.clone(),
            retailer: scenario.retailer.clone(),
            agents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Delivered(Envelope),
    Quiescent,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: EventLog,
    pub world: World,
}

pub const DEFAULT_MAX_EVENTS: u64 = 10_000;

pub struct Simulation {
    world: World,
    queue: BinaryHeap<Reverse<Envelope>>,
    log: EventLog,
    latency: LatencyTable,
    clock: SimTime,
    next_seq: u64,
    delivered: u64,
    max_events: u64,
    duplicate_po_submits: bool,
}

impl Simulation {
    /// An engine with no agents and no pending envelopes.
    pub fn empty(world: World, latency: LatencyTable, max_events: u64) -> Self {
        Simulation {
            world,
            queue: BinaryHeap::new(),
            log: EventLog::new(),
            latency,
            clock: SimTime::ZERO,
            next_seq: 0,
            delivered: 0,
            max_events,
            duplicate_po_submits: false,
        }
    }

    /// Sets up a scenario using the built-in [`Lcg64`] for seeded latencies.
    pub fn new(scenario: &Scenario) -> Self {
        let seed = scenario.params.seed.unwrap_or_default();
        Simulation::with_rng(scenario, &mut Lcg64::new(seed))
    }

    /// Sets up a scenario drawing seeded latencies from `rng`.
    pub fn with_rng<R: RandomSource + ?Sized>(scenario: &Scenario, rng: &mut R) -> Self {
        let world = World::from_scenario(scenario);
        let latency = scenario.latency_table(&world, rng);
        let mut sim = Simulation::empty(world, latency, scenario.params.max_events);
        sim.duplicate_po_submits = scenario.params.duplicate_po_submits;

        let notes = setup_notes(scenario);
        for text in notes {
            sim.note(text);
        }
        let initial: Vec<_> = sim
            .world
            .ledgers()
            .flat_map(|l| l.history().iter().cloned())
            .collect();
        for row in initial {
            sim.log.push(LogEntry::Inventory(row));
        }
        for order in &scenario.orders {
            let env = Envelope {
                deliver_at: order.time,
                seq: sim.take_seq(),
                from: order.buyer.clone(),
                to: scenario.retailer.clone(),
                payload: Message::CustomerOrder {
                    order_id: order.id.clone(),
                    buyer: order.buyer.clone(),
                    sku: order.sku.clone(),
                    qty: order.qty,
                },
            };
            sim.schedule(env).expect("arrivals are never in the past");
        }
        sim
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    fn take_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    fn note(&mut self, text: String) {
        self.log.push(LogEntry::Note {
            at: self.clock,
            text,
        });
    }

    /// Enqueues an envelope as-is. Its `seq` must be fresh.
    pub fn schedule(&mut self, envelope: Envelope) -> Result<(), SimError> {
        if envelope.deliver_at < self.clock {
            return Err(SimError::SchedulesInPast {
                deliver_at: envelope.deliver_at,
                clock: self.clock,
            });
        }
        self.next_seq = self.next_seq.max(envelope.seq + 1);
        self.queue.push(Reverse(envelope));
        Ok(())
    }

    /// Stamps a sequence number and delivery time on `out` and enqueues it.
    pub fn send(&mut self, from: &PartyId, out: Outgoing) -> Result<(), SimError> {
        let leaves = out.send_at.max(self.clock);
        let deliver_at = leaves + self.latency.latency(from, &out.to);
        let duplicate = self.duplicate_po_submits && matches!(out.payload, Message::PoSubmit { .. });
        let env = Envelope {
            deliver_at,
            seq: self.take_seq(),
            from: from.clone(),
            to: out.to,
            payload: out.payload,
        };
        if duplicate {
            let copy = Envelope {
                seq: self.take_seq(),
                ..env.clone()
            };
            self.schedule(env)?;
            self.schedule(copy)
        } else {
            self.schedule(env)
        }
    }

    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        let Some(Reverse(env)) = self.queue.pop() else {
            return Ok(StepOutcome::Quiescent);
        };
        self.clock = env.deliver_at;
        let agent = self
            .world
            .agents
            .remove(&env.to)
            .ok_or_else(|| SimError::UnknownRecipient(env.to.clone()))?;
        let seen = agent.ledger().map_or(0, |l| l.history().len());
        let ctx = Ctx {
            now: self.clock,
            registry: &self.world.registry,
        };
        let (agent, reaction) = agent.handle(&env, &ctx).map_err(|source| SimError::Protocol {
            agent: env.to.clone(),
            at: self.clock,
            source,
        })?;
        self.delivered += 1;
        self.log.push(LogEntry::Message(env.clone()));
        if let Some(ledger) = agent.ledger() {
            for row in &ledger.history()[seen..] {
                self.log.push(LogEntry::Inventory(row.clone()));
            }
        }
        self.world.agents.insert(env.to.clone(), agent);
        for text in reaction.notes {
            self.note(text);
        }
        for out in reaction.outgoing {
            self.send(&env.to, out)?;
        }
        Ok(StepOutcome::Delivered(env))
    }

    /// Steps until quiescence, then closes the log with an `END` line.
    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        loop {
            if !self.queue.is_empty() && self.delivered >= self.max_events {
                return Err(SimError::EventBudgetExceeded(self.max_events));
            }
            if self.step()? == StepOutcome::Quiescent {
                break;
            }
        }
        self.log.push(LogEntry::End {
            final_time: self.clock,
            event_count: self.delivered,
        });
        record_patterns(&mut self.world);
        Ok(RunOutcome {
            log: self.log,
            world: self.world,
        })
    }
}

/// Runs a validated scenario to quiescence.
pub fn run(scenario: &Scenario) -> Result<RunOutcome, SimError> {
    Simulation::new(scenario).run()
}

fn setup_notes(scenario: &Scenario) -> Vec<String> {
    let mut notes = vec![format!("setup retailer {}", scenario.retailer)];
    for w in &scenario.warehouses {
        notes.push(format!(
            "setup warehouse {} manufacturer {} reorder {}",
            w.id, w.manufacturer, w.reorder_qty
        ));
    }
    for m in &scenario.manufacturers {
        notes.push(format!(
            "setup manufacturer {} delay {}",
            m.id, m.production_delay
        ));
    }
    for c in &scenario.customers {
        notes.push(format!("setup customer {c}"));
    }
    notes
}

/// Feeds each closed order into the customer pattern of its buyer's
/// relationship with the retailer, when such a relationship exists.
fn record_patterns(world: &mut World) {
    let closed: Vec<(OrderId, PartyId, SimTime, u64)> = world
        .retailer()
        .open_orders
        .iter()
        .filter_map(|(id, o)| {
            let at = o.closed_at?;
            Some((id.clone(), o.buyer.clone(), at, o.invoice.unwrap_or_default().0))
        })
        .collect();
    let retailer = world.retailer.clone();
    for (_, buyer, at, value) in closed {
        if let Some(rel) = world.registry.customer_relationship(&retailer, &buyer, at) {
            let value = i64::try_from(value).unwrap_or(i64::MAX);
            world
                .registry
                .record_interaction(rel, at, value)
                .expect("relationship exists and value is non-negative");
        }
    }
}
