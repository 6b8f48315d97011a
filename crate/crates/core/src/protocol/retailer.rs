use std::collections::BTreeMap;

use super::{
    select_warehouse, unexpected, Ctx, Message, OrderId, ProtocolError, Reaction, RequestId,
    Verdict,
};
use crate::engine::Envelope;
use crate::inventory::InventoryLedger;
use crate::party::PartyId;
use crate::time::SimTime;
use crate::units::{Money, Sku};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OrderPhase {
    AwaitingSourcing,
    AwaitingResponses {
        pending: Vec<PartyId>,
        accepts: Vec<(PartyId, u64)>,
    },
    AwaitingShipment,
    AwaitingPayment,
    Closed,
    Rejected,
}

impl OrderPhase {
    pub fn name(&self) -> &'static str {
        match self {
            OrderPhase::AwaitingSourcing => "AwaitingSourcing",
            OrderPhase::AwaitingResponses { .. } => "AwaitingResponses",
            OrderPhase::AwaitingShipment => "AwaitingShipment",
            OrderPhase::AwaitingPayment => "AwaitingPayment",
            OrderPhase::Closed => "Closed",
            OrderPhase::Rejected => "Rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, OrderPhase::Closed | OrderPhase::Rejected)
    }
}

/// Where one warehouse's answer to one request stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Answer {
    /// Nothing heard yet.
    Awaiting,
    /// Declined once; the warehouse will answer again after replenishing.
    Deferred,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpenOrder {
    pub buyer: PartyId,
    pub sku: Sku,
    pub qty: u64,
    pub phase: OrderPhase,
    pub arrived_at: SimTime,
    pub invoice: Option<Money>,
    pub closed_at: Option<SimTime>,
    pub selected: Option<(PartyId, RequestId)>,
    requests: Vec<(PartyId, RequestId, Answer)>,
}

impl OpenOrder {
    fn answer_mut(&mut self, request_id: &RequestId) -> Option<(&PartyId, &mut Answer)> {
        self.requests
            .iter_mut()
            .find(|(_, r, _)| r == request_id)
            .map(|(w, _, a)| (&*w, a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RetailerState {
    pub id: PartyId,
    /// Own stock. Sourcing always goes through the warehouses; scenarios may
    /// still seed this.
    pub ledger: InventoryLedger,
    pub known_warehouses: Vec<PartyId>,
    pub prices: BTreeMap<Sku, Money>,
    pub open_orders: BTreeMap<OrderId, OpenOrder>,
    request_index: BTreeMap<RequestId, OrderId>,
}

impl RetailerState {
    pub fn new(id: PartyId, known_warehouses: Vec<PartyId>, prices: BTreeMap<Sku, Money>) -> Self {
        RetailerState {
            ledger: InventoryLedger::new(id.clone()),
            id,
            known_warehouses,
            prices,
            open_orders: BTreeMap::new(),
            request_index: BTreeMap::new(),
        }
    }

    pub fn request_id(order_id: &OrderId, warehouse: &PartyId) -> RequestId {
        RequestId(format!("{order_id}-{warehouse}"))
    }

    pub fn handle(
        mut self,
        env: &Envelope,
        ctx: &Ctx<'_>,
    ) -> Result<(Self, Reaction), ProtocolError> {
        let mut out = Reaction::default();
        match &env.payload {
            Message::CustomerOrder {
                order_id,
                buyer,
                sku,
                qty,
            } => self.on_order(order_id, buyer, sku, *qty, ctx.now, &mut out)?,
            Message::ShipGoodsResponse {
                request_id,
                verdict,
            } => self.on_response(env, request_id, *verdict, ctx.now, &mut out)?,
            Message::GoodsShipped { order_id, .. } => {
                let order = self.order_mut(order_id)?;
                let from_selected = order.selected.as_ref().map(|(w, _)| w) == Some(&env.from);
                if order.phase != OrderPhase::AwaitingShipment || !from_selected {
                    return Err(unexpected(&self.id, env));
                }
                order.phase = OrderPhase::AwaitingPayment;
                let buyer = order.buyer.clone();
                out.send(
                    ctx.now,
                    &buyer,
                    Message::ShipmentNotice {
                        order_id: order_id.clone(),
                    },
                );
                out.note(format!("order {order_id} AwaitingPayment"));
            }
            Message::Payment { order_id, amount } => {
                let order = self.order_mut(order_id)?;
                if order.phase != OrderPhase::AwaitingPayment || order.buyer != env.from {
                    return Err(unexpected(&self.id, env));
                }
                let expected = order.invoice.expect("invoiced before shipment");
                if expected != *amount {
                    return Err(ProtocolError::PaymentMismatch {
                        order_id: order_id.clone(),
                        expected,
                        got: *amount,
                    });
                }
                order.phase = OrderPhase::Closed;
                order.closed_at = Some(ctx.now);
                out.note(format!("order {order_id} Closed"));
            }
            _ => return Err(unexpected(&self.id, env)),
        }
        Ok((self, out))
    }

    fn order_mut(&mut self, order_id: &OrderId) -> Result<&mut OpenOrder, ProtocolError> {
        self.open_orders
            .get_mut(order_id)
            .ok_or_else(|| ProtocolError::UnknownOrder(order_id.to_string()))
    }

    fn on_order(
        &mut self,
        order_id: &OrderId,
        buyer: &PartyId,
        sku: &Sku,
        qty: u64,
        now: SimTime,
        out: &mut Reaction,
    ) -> Result<(), ProtocolError> {
        if self.open_orders.contains_key(order_id) {
            return Err(ProtocolError::DuplicateOrder(order_id.clone()));
        }
        if !self.prices.contains_key(sku) {
            return Err(ProtocolError::UnknownSku(sku.clone()));
        }
        let mut order = OpenOrder {
            buyer: buyer.clone(),
            sku: sku.clone(),
            qty,
            phase: OrderPhase::AwaitingSourcing,
            arrived_at: now,
            invoice: None,
            closed_at: None,
            selected: None,
            requests: Vec::new(),
        };
        for w in &self.known_warehouses {
            let request_id = Self::request_id(order_id, w);
            self.request_index
                .insert(request_id.clone(), order_id.clone());
            out.send(
                now,
                w,
                Message::ShipGoodsRequest {
                    request_id: request_id.clone(),
                    order_id: order_id.clone(),
                    sku: sku.clone(),
                    qty,
                },
            );
            order.requests.push((w.clone(), request_id, Answer::Awaiting));
        }
        order.phase = OrderPhase::AwaitingResponses {
            pending: self.known_warehouses.clone(),
            accepts: Vec::new(),
        };
        out.note(format!("order {order_id} AwaitingResponses"));
        self.open_orders.insert(order_id.clone(), order);
        self.try_decide(order_id, now, out)
    }

    fn on_response(
        &mut self,
        env: &Envelope,
        request_id: &RequestId,
        verdict: Verdict,
        now: SimTime,
        out: &mut Reaction,
    ) -> Result<(), ProtocolError> {
        let order_id = self
            .request_index
            .get(request_id)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownOrder(request_id.to_string()))?;
        let order = self.order_mut(&order_id)?;
        let (warehouse, answer) = order
            .answer_mut(request_id)
            .expect("indexed requests belong to their order");
        if *warehouse != env.from {
            return Err(ProtocolError::UnknownRequest(request_id.clone()));
        }
        let warehouse = warehouse.clone();
        let was = *answer;
        *answer = match (was, verdict) {
            (Answer::Final, _) => return Err(ProtocolError::DuplicateResponse(request_id.clone())),
            (Answer::Awaiting, Verdict::Decline) => Answer::Deferred,
            _ => Answer::Final,
        };
        let waiting = matches!(order.phase, OrderPhase::AwaitingResponses { .. });
        match verdict {
            Verdict::Accept { available } if waiting => {
                if let OrderPhase::AwaitingResponses { accepts, .. } = &mut order.phase {
                    accepts.push((warehouse, available));
                }
            }
            Verdict::Accept { .. } => {
                // Late re-answer for an order that was already decided.
                out.send(
                    now,
                    &warehouse,
                    Message::CancelReservation {
                        request_id: request_id.clone(),
                    },
                );
            }
            Verdict::Decline => {}
        }
        if waiting {
            let still: Vec<PartyId> = order
                .requests
                .iter()
                .filter(|(_, _, a)| *a != Answer::Final)
                .map(|(w, _, _)| w.clone())
                .collect();
            if let OrderPhase::AwaitingResponses { pending, .. } = &mut order.phase {
                *pending = still;
            }
            self.try_decide(&order_id, now, out)?;
        }
        Ok(())
    }

    /// Decides once every warehouse has answered at least once. With no
    /// usable accept the order keeps waiting for deferred re-answers, and is
    /// rejected only once none remain.
    fn try_decide(
        &mut self,
        order_id: &OrderId,
        now: SimTime,
        out: &mut Reaction,
    ) -> Result<(), ProtocolError> {
        let order = self.open_orders.get_mut(order_id).expect("order exists");
        let OrderPhase::AwaitingResponses { accepts, .. } = &order.phase else {
            return Ok(());
        };
        if order.requests.iter().any(|(_, _, a)| *a == Answer::Awaiting) {
            return Ok(());
        }
        let accepts = accepts.clone();
        let chosen = select_warehouse(&accepts, order.qty, &self.known_warehouses);
        let deferred = order.requests.iter().any(|(_, _, a)| *a == Answer::Deferred);
        if chosen.is_none() && deferred {
            return Ok(());
        }
        let request_of = |w: &PartyId| {
            order
                .requests
                .iter()
                .find(|(x, _, _)| x == w)
                .map(|(_, r, _)| r.clone())
                .expect("accepting warehouse was asked")
        };
        match chosen {
            Some(w) => {
                let request_id = request_of(&w);
                let amount = self
                    .prices
                    .get(&order.sku)
                    .ok_or_else(|| ProtocolError::UnknownSku(order.sku.clone()))?
                    .checked_times(order.qty)
                    .ok_or_else(|| ProtocolError::AmountOverflow(order_id.clone()))?;
                out.send(
                    now,
                    &w,
                    Message::ShipConfirm {
                        request_id: request_id.clone(),
                        warehouse: w.clone(),
                    },
                );
                out.send(
                    now,
                    &order.buyer,
                    Message::OrderInvoice {
                        order_id: order_id.clone(),
                        amount,
                    },
                );
                for (loser, _) in accepts.iter().filter(|(x, _)| *x != w) {
                    out.send(
                        now,
                        loser,
                        Message::CancelReservation {
                            request_id: request_of(loser),
                        },
                    );
                }
                order.invoice = Some(amount);
                order.selected = Some((w, request_id));
                order.phase = OrderPhase::AwaitingShipment;
                out.note(format!("order {order_id} AwaitingShipment"));
            }
            None => {
                // Only reachable with no deferred answers left; accepts that
                // do not cover the quantity are still holding stock.
                for (loser, _) in &accepts {
                    out.send(
                        now,
                        loser,
                        Message::CancelReservation {
                            request_id: request_of(loser),
                        },
                    );
                }
                out.send(
                    now,
                    &order.buyer,
                    Message::OrderRejected {
                        order_id: order_id.clone(),
                        reason: "no_capacity".to_owned(),
                    },
                );
                order.phase = OrderPhase::Rejected;
                out.note(format!("order {order_id} Rejected"));
            }
        }
        Ok(())
    }
}
