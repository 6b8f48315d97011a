use std::collections::{BTreeMap, BTreeSet};

use super::{unexpected, Ctx, Message, OrderId, ProtocolError, Reaction};
use crate::engine::Envelope;
use crate::party::PartyId;
use crate::units::Money;

/// A buyer. Pays an invoice once it has both the invoice and word that the
/// goods shipped, whichever arrives last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CustomerState {
    pub id: PartyId,
    pub invoices: BTreeMap<OrderId, (PartyId, Money)>,
    pub shipped: BTreeSet<OrderId>,
    pub paid: BTreeSet<OrderId>,
    pub rejected: BTreeSet<OrderId>,
}

impl CustomerState {
    pub fn new(id: PartyId) -> Self {
        CustomerState {
            id,
            invoices: BTreeMap::new(),
            shipped: BTreeSet::new(),
            paid: BTreeSet::new(),
            rejected: BTreeSet::new(),
        }
    }

    pub fn handle(
        mut self,
        env: &Envelope,
        ctx: &Ctx<'_>,
    ) -> Result<(Self, Reaction), ProtocolError> {
        let mut out = Reaction::default();
        let order_id = match &env.payload {
            Message::OrderInvoice { order_id, amount } => {
                self.invoices
                    .insert(order_id.clone(), (env.from.clone(), *amount));
                order_id
            }
            Message::ShipmentNotice { order_id } => {
                self.shipped.insert(order_id.clone());
                order_id
            }
            Message::OrderRejected { order_id, .. } => {
                self.rejected.insert(order_id.clone());
                return Ok((self, out));
            }
            _ => return Err(unexpected(&self.id, env)),
        };
        if self.shipped.contains(order_id) && !self.paid.contains(order_id) {
            if let Some((seller, amount)) = self.invoices.get(order_id) {
                out.send(
                    ctx.now,
                    seller,
                    Message::Payment {
                        order_id: order_id.clone(),
                        amount: *amount,
                    },
                );
                self.paid.insert(order_id.clone());
            }
        }
        Ok((self, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::party::Registry;
    use crate::time::SimTime;

    fn env(payload: Message) -> Envelope {
        Envelope {
            deliver_at: SimTime(3),
            seq: 0,
            from: PartyId::new("R").unwrap(),
            to: PartyId::new("C").unwrap(),
            payload,
        }
    }

    #[test]
    fn pays_once_both_invoice_and_notice_arrived() {
        let reg = Registry::new();
        let ctx = Ctx {
            now: SimTime(3),
            registry: &reg,
        };
        let c = CustomerState::new(PartyId::new("C").unwrap());
        let notice = env(Message::ShipmentNotice {
            order_id: "O1".into(),
        });
        let (c, r) = c.handle(&notice, &ctx).unwrap();
        assert!(r.outgoing.is_empty());
        let invoice = env(Message::OrderInvoice {
            order_id: "O1".into(),
            amount: Money(40),
        });
        let (c, r) = c.handle(&invoice, &ctx).unwrap();
        assert_eq!(
            r.outgoing[0].payload,
            Message::Payment {
                order_id: "O1".into(),
                amount: Money(40)
            }
        );
        let (_, r) = c.handle(&notice, &ctx).unwrap();
        assert!(r.outgoing.is_empty());
    }
}
