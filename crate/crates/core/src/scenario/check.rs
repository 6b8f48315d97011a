use std::collections::BTreeMap;
use std::fmt;

use crate::engine::{Agent, LogEntry, RunOutcome};
use crate::inventory::{InventoryLedger, StockOp};
use crate::procurement::ProcurementState;
use crate::protocol::{Message, OrderId, PoId, RequestId, Verdict};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

#[derive(Default)]
struct OrderTally {
    messages: u64,
    declines: u64,
    terminal: bool,
}

#[derive(Default)]
struct PoTally {
    submits: u64,
    acks: u64,
    deliveries: u64,
}

/// Checks a completed run against the global invariants. An empty result
/// means every check passed.
///
/// The per-order event bound counts the order's deliveries to the retailer
/// and warehouses, leaving out `CancelReservation` and `ShipmentNotice`. A
/// stocked order then costs exactly `4 + 2·|warehouses|`: the order, the
/// requests, the responses, `ShipConfirm`, `GoodsShipped` and `Payment`.
pub fn check_run(outcome: &RunOutcome) -> Vec<Violation> {
    let mut found = Vec::new();
    let mut fail = |invariant: &'static str, detail: String| {
        found.push(Violation { invariant, detail });
    };
    let log = &outcome.log;
    let world = &outcome.world;
    let warehouses = world.warehouses().count() as u64;

    if !log.is_complete() {
        fail("quiescence", "log has no END line".into());
    }

    let mut initial = 0u64;
    let mut manufactured = 0u64;
    let mut shipped = 0u64;
    let mut last_key: Option<(SimTime, u64)> = None;
    let mut last_time = SimTime::ZERO;
    let mut requests: BTreeMap<RequestId, (OrderId, u64)> = BTreeMap::new();
    let mut orders: BTreeMap<OrderId, OrderTally> = BTreeMap::new();
    let mut pos: BTreeMap<PoId, PoTally> = BTreeMap::new();

    for entry in log.entries() {
        let at = match entry {
            LogEntry::Message(env) => env.deliver_at,
            LogEntry::Inventory(row) => row.at,
            LogEntry::Note { at, .. } => *at,
            LogEntry::End { final_time, .. } => *final_time,
        };
        if at < last_time {
            fail("clock", format!("time goes back from {last_time} to {at}"));
        }
        last_time = at;
        match entry {
            LogEntry::Inventory(row) if row.op == StockOp::Initial => {
                initial += row.delta.unsigned_abs();
            }
            LogEntry::Message(env) => {
                let key = (env.deliver_at, env.seq);
                if last_key.is_some_and(|k| k >= key) {
                    fail("ordering", format!("seq {} delivered out of order", env.seq));
                }
                last_key = Some(key);
                let payload = &env.payload;
                let order_of = |r: &RequestId| requests.get(r).map(|(o, _)| o.clone());
                let order = match payload {
                    Message::CustomerOrder { order_id, .. }
                    | Message::OrderInvoice { order_id, .. }
                    | Message::OrderRejected { order_id, .. }
                    | Message::GoodsShipped { order_id, .. }
                    | Message::ShipmentNotice { order_id }
                    | Message::Payment { order_id, .. } => Some(order_id.clone()),
                    Message::ShipGoodsRequest {
                        request_id,
                        order_id,
                        qty,
                        ..
                    } => {
                        requests.insert(request_id.clone(), (order_id.clone(), *qty));
                        Some(order_id.clone())
                    }
                    Message::ShipGoodsResponse { request_id, .. }
                    | Message::ShipConfirm { request_id, .. }
                    | Message::CancelReservation { request_id } => order_of(request_id),
                    _ => None,
                };
                if let Some(order) = order {
                    let tally = orders.entry(order).or_default();
                    let to_customer = matches!(world.agents.get(&env.to), Some(Agent::Customer(_)));
                    if !payload.is_bookkeeping() && !to_customer {
                        tally.messages += 1;
                    }
                    match payload {
                        Message::ShipGoodsResponse {
                            verdict: Verdict::Decline,
                            ..
                        } => tally.declines += 1,
                        Message::Payment { .. } | Message::OrderRejected { .. } => {
                            tally.terminal = true
                        }
                        _ => {}
                    }
                }
                match payload {
                    Message::ShipGoodsResponse {
                        request_id,
                        verdict: Verdict::Accept { available },
                    } => {
                        let qty = requests.get(request_id).map_or(0, |(_, q)| *q);
                        if *available < qty {
                            fail(
                                "accept",
                                format!("{request_id} accepted {qty} with {available} available"),
                            );
                        }
                    }
                    Message::GoodsShipped { qty, .. } => shipped += qty,
                    Message::PoSubmit { po_id, .. } => pos.entry(po_id.clone()).or_default().submits += 1,
                    Message::PoAck { po_id, .. } => pos.entry(po_id.clone()).or_default().acks += 1,
                    Message::GoodsDelivery { po_id, qty, .. } => {
                        manufactured += qty;
                        pos.entry(po_id.clone()).or_default().deliveries += 1;
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }

    let on_hand = world.total_on_hand();
    if shipped + on_hand != initial + manufactured {
        fail(
            "conservation",
            format!(
                "shipped {shipped} + on hand {on_hand} != initial {initial} + delivered {manufactured}"
            ),
        );
    }
    let reserved = world.total_reserved();
    if reserved != 0 {
        fail("reservations", format!("{reserved} units still reserved"));
    }

    for (id, order) in &world.retailer().open_orders {
        if !order.phase.is_terminal() {
            fail("terminality", format!("order {id} ends in {}", order.phase.name()));
        }
    }
    for (id, tally) in &orders {
        if !tally.terminal {
            fail("terminality", format!("order {id} never closed or rejected"));
        }
        let bound = 4 + 2 * warehouses + 3 * tally.declines;
        if tally.messages > bound {
            fail(
                "order bound",
                format!("order {id} took {} events, bound {bound}", tally.messages),
            );
        }
    }

    for (po, tally) in &pos {
        if tally.submits == 0 {
            fail("purchase orders", format!("{po} acted on without a POSubmit"));
        }
        if tally.acks != 1 {
            fail("purchase orders", format!("{po} acknowledged {} times", tally.acks));
        }
        if tally.deliveries != 1 {
            fail("purchase orders", format!("{po} delivered {} times", tally.deliveries));
        }
    }

    for ledger in world.ledgers() {
        let replayed = InventoryLedger::replay(ledger.owner().clone(), ledger.history());
        if &replayed != ledger {
            fail("ledger replay", format!("{} history does not rebuild its rows", ledger.owner()));
        }
    }
    for w in world.warehouses() {
        for plan in w.procurement.plan_ids() {
            let trace = w.procurement.trace(plan);
            if !ProcurementState::CHAIN.starts_with(&trace) {
                fail("procurement", format!("{} plan {plan:?} traced {trace:?}", w.id));
            }
        }
    }
    found
}
