//! Message vocabulary and per-role handlers.
//!
//! Handlers take their state by value together with one delivered
//! [`Envelope`] and hand back the successor state plus a [`Reaction`]: the
//! envelopes to send and the notes to log. They never touch anything else,
//! which is what makes a run replayable.
//!
//! Flows:
//!
//! - goods purchase: `CustomerOrder → … → OrderInvoice → GoodsShipped → Payment`
//! - source goods: the retailer fans `ShipGoodsRequest` out to every warehouse
//!   and confirms one `Accept`
//! - replenish stocks: a declining warehouse sends `POSubmit`, the manufacturer
//!   answers `POAck` and later `GoodsDelivery`

mod customer;
mod manufacturer;
mod retailer;
mod warehouse;

use std::fmt;

use crate::engine::Envelope;
use crate::inventory::InventoryError;
use crate::party::{PartyId, Registry};
use crate::procurement::ProcurementError;
use crate::time::SimTime;
use crate::units::{Money, Sku};

pub use customer::CustomerState;
pub use manufacturer::ManufacturerState;
pub use retailer::{OpenOrder, OrderPhase, RetailerState};
pub use warehouse::{PendingPo, WarehouseState};

macro_rules! token_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }
    };
}

token_id!(OrderId);
token_id!(RequestId);
token_id!(PoId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accept { available: u64 },
    Decline,
}

/// Everything that travels between agents.
///
/// `CancelReservation` and `ShipmentNotice` are bookkeeping variants: the
/// first frees a losing warehouse's reservation, the second tells the buyer
/// its goods left so it can pay.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Message {
    CustomerOrder {
        order_id: OrderId,
        buyer: PartyId,
        sku: Sku,
        qty: u64,
    },
    OrderInvoice {
        order_id: OrderId,
        amount: Money,
    },
    Payment {
        order_id: OrderId,
        amount: Money,
    },
    ShipGoodsRequest {
        request_id: RequestId,
        order_id: OrderId,
        sku: Sku,
        qty: u64,
    },
    ShipGoodsResponse {
        request_id: RequestId,
        verdict: Verdict,
    },
    ShipConfirm {
        request_id: RequestId,
        warehouse: PartyId,
    },
    GoodsShipped {
        order_id: OrderId,
        sku: Sku,
        qty: u64,
    },
    PoSubmit {
        po_id: PoId,
        sku: Sku,
        qty: u64,
    },
    PoAck {
        po_id: PoId,
        eta: SimTime,
    },
    GoodsDelivery {
        po_id: PoId,
        sku: Sku,
        qty: u64,
    },
    OrderRejected {
        order_id: OrderId,
        reason: String,
    },
    CancelReservation {
        request_id: RequestId,
    },
    ShipmentNotice {
        order_id: OrderId,
    },
}

impl Message {
    /// Name used in log lines.
    pub fn variant(&self) -> &'static str {
        match self {
            Message::CustomerOrder { .. } => "CustomerOrder",
            Message::OrderInvoice { .. } => "OrderInvoice",
            Message::Payment { .. } => "Payment",
            Message::ShipGoodsRequest { .. } => "ShipGoodsRequest",
            Message::ShipGoodsResponse { .. } => "ShipGoodsResponse",
            Message::ShipConfirm { .. } => "ShipConfirm",
            Message::GoodsShipped { .. } => "GoodsShipped",
            Message::PoSubmit { .. } => "POSubmit",
            Message::PoAck { .. } => "POAck",
            Message::GoodsDelivery { .. } => "GoodsDelivery",
            Message::OrderRejected { .. } => "OrderRejected",
            Message::CancelReservation { .. } => "CancelReservation",
            Message::ShipmentNotice { .. } => "ShipmentNotice",
        }
    }

    /// Fields in declaration order, as log tokens. A verdict renders as
    /// `Accept <available>` or `Decline`.
    pub fn fields(&self) -> Vec<String> {
        fn s(v: impl ToString) -> String {
            v.to_string()
        }
        match self {
            Message::CustomerOrder {
                order_id,
                buyer,
                sku,
                qty,
            } => vec![s(order_id), s(buyer), s(sku), s(qty)],
            Message::OrderInvoice { order_id, amount } | Message::Payment { order_id, amount } => {
                vec![s(order_id), s(amount)]
            }
            Message::ShipGoodsRequest {
                request_id,
                order_id,
                sku,
                qty,
            } => vec![s(request_id), s(order_id), s(sku), s(qty)],
            Message::ShipGoodsResponse {
                request_id,
                verdict,
            } => match verdict {
                Verdict::Accept { available } => {
                    vec![s(request_id), s("Accept"), s(available)]
                }
                Verdict::Decline => vec![s(request_id), s("Decline")],
            },
            Message::ShipConfirm {
                request_id,
                warehouse,
            } => vec![s(request_id), s(warehouse)],
            Message::GoodsShipped { order_id, sku, qty } => vec![s(order_id), s(sku), s(qty)],
            Message::PoSubmit { po_id, sku, qty } | Message::GoodsDelivery { po_id, sku, qty } => {
                vec![s(po_id), s(sku), s(qty)]
            }
            Message::PoAck { po_id, eta } => vec![s(po_id), s(eta)],
            Message::OrderRejected { order_id, reason } => vec![s(order_id), s(reason)],
            Message::CancelReservation { request_id } => vec![s(request_id)],
            Message::ShipmentNotice { order_id } => vec![s(order_id)],
        }
    }

    /// Inverse of [`Message::variant`] + [`Message::fields`].
    pub fn parse(variant: &str, fields: &[&str]) -> Option<Message> {
        let num = |i: usize| fields.get(i)?.parse::<u64>().ok();
        let sku = |i: usize| Sku::new(*fields.get(i)?);
        let party = |i: usize| PartyId::new(*fields.get(i)?);
        let text = |i: usize| fields.get(i).map(|f| f.to_string());
        let arity = |n: usize| (fields.len() == n).then_some(());
        Some(match variant {
            "CustomerOrder" => {
                arity(4)?;
                Message::CustomerOrder {
                    order_id: OrderId(text(0)?),
                    buyer: party(1)?,
                    sku: sku(2)?,
                    qty: num(3)?,
                }
            }
            "OrderInvoice" => {
                arity(2)?;
                Message::OrderInvoice {
                    order_id: OrderId(text(0)?),
                    amount: Money(num(1)?),
                }
            }
            "Payment" => {
                arity(2)?;
                Message::Payment {
                    order_id: OrderId(text(0)?),
                    amount: Money(num(1)?),
                }
            }
            "ShipGoodsRequest" => {
                arity(4)?;
                Message::ShipGoodsRequest {
                    request_id: RequestId(text(0)?),
                    order_id: OrderId(text(1)?),
                    sku: sku(2)?,
                    qty: num(3)?,
                }
            }
            "ShipGoodsResponse" => {
                let verdict = match *fields.get(1)? {
                    "Accept" => {
                        arity(3)?;
                        Verdict::Accept { available: num(2)? }
                    }
                    "Decline" => {
                        arity(2)?;
                        Verdict::Decline
                    }
                    _ => return None,
                };
                Message::ShipGoodsResponse {
                    request_id: RequestId(text(0)?),
                    verdict,
                }
            }
            "ShipConfirm" => {
                arity(2)?;
                Message::ShipConfirm {
                    request_id: RequestId(text(0)?),
                    warehouse: party(1)?,
                }
            }
            "GoodsShipped" => {
                arity(3)?;
                Message::GoodsShipped {
                    order_id: OrderId(text(0)?),
                    sku: sku(1)?,
                    qty: num(2)?,
                }
            }
            "POSubmit" => {
                arity(3)?;
                Message::PoSubmit {
                    po_id: PoId(text(0)?),
                    sku: sku(1)?,
                    qty: num(2)?,
                }
            }
            "POAck" => {
                arity(2)?;
                Message::PoAck {
                    po_id: PoId(text(0)?),
                    eta: SimTime(num(1)?),
                }
            }
            "GoodsDelivery" => {
                arity(3)?;
                Message::GoodsDelivery {
                    po_id: PoId(text(0)?),
                    sku: sku(1)?,
                    qty: num(2)?,
                }
            }
            "OrderRejected" => {
                arity(2)?;
                Message::OrderRejected {
                    order_id: OrderId(text(0)?),
                    reason: text(1)?,
                }
            }
            "CancelReservation" => {
                arity(1)?;
                Message::CancelReservation {
                    request_id: RequestId(text(0)?),
                }
            }
            "ShipmentNotice" => {
                arity(1)?;
                Message::ShipmentNotice {
                    order_id: OrderId(text(0)?),
                }
            }
            _ => return None,
        })
    }

    /// Bookkeeping variants that have no counterpart in the business flows.
    pub fn is_bookkeeping(&self) -> bool {
        matches!(
            self,
            Message::CancelReservation { .. } | Message::ShipmentNotice { .. }
        )
    }
}

/// An envelope a handler wants sent. It leaves at `send_at` and arrives one
/// latency later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: PartyId,
    pub payload: Message,
    pub send_at: SimTime,
}

/// What a handler produced besides its new state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reaction {
    pub outgoing: Vec<Outgoing>,
    pub notes: Vec<String>,
}

impl Reaction {
    fn send(&mut self, now: SimTime, to: &PartyId, payload: Message) {
        self.outgoing.push(Outgoing {
            to: to.clone(),
            payload,
            send_at: now,
        });
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }
}

/// Read-only view a handler gets of the world.
#[derive(Debug, Clone, Copy)]
pub struct Ctx<'a> {
    pub now: SimTime,
    pub registry: &'a Registry,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("no open order {0}")]
    UnknownOrder(String),
    #[error("order {0} already exists")]
    DuplicateOrder(OrderId),
    #[error("request {0} already answered")]
    DuplicateResponse(RequestId),
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} already received")]
    DuplicateRequest(RequestId),
    #[error("unknown purchase order {0}")]
    UnknownPo(PoId),
    #[error("purchase order {0} delivered twice")]
    DuplicateDelivery(PoId),
    #[error("sku {0} has no price")]
    UnknownSku(Sku),
    #[error("invoice for {0} overflows")]
    AmountOverflow(OrderId),
    #[error("payment for {order_id}: expected {expected}, got {got}")]
    PaymentMismatch {
        order_id: OrderId,
        expected: Money,
        got: Money,
    },
    #[error("{agent} cannot handle {variant} from {from} in its current state")]
    Unexpected {
        agent: PartyId,
        from: PartyId,
        variant: &'static str,
    },
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Procurement(#[from] ProcurementError),
}

fn unexpected(agent: &PartyId, env: &Envelope) -> ProtocolError {
    ProtocolError::Unexpected {
        agent: agent.clone(),
        from: env.from.clone(),
        variant: env.payload.variant(),
    }
}

/// Picks the confirming warehouse: among accepts that cover `qty`, the one
/// with the most available stock; ties go to whichever comes first in
/// `preference`.
pub fn select_warehouse(
    accepts: &[(PartyId, u64)],
    qty: u64,
    preference: &[PartyId],
) -> Option<PartyId> {
    let rank = |p: &PartyId| {
        preference
            .iter()
            .position(|q| q == p)
            .unwrap_or(usize::MAX)
    };
    accepts
        .iter()
        .filter(|(_, available)| *available >= qty)
        .min_by(|(a, av), (b, bv)| bv.cmp(av).then_with(|| rank(a).cmp(&rank(b))))
        .map(|(p, _)| p.clone())
}
