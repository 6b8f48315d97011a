use std::collections::BTreeMap;

use super::{unexpected, Ctx, Message, Outgoing, PoId, ProtocolError, Reaction};
use crate::engine::Envelope;
use crate::party::PartyId;
use crate::time::SimTime;

/// Acknowledges purchase orders and delivers each one exactly once,
/// `production_delay` ticks after the first submission. Repeated
/// submissions of a known po id produce a note and nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ManufacturerState {
    pub id: PartyId,
    pub production_delay: u64,
    /// Every purchase order seen so far, with its promised ready time.
    pub seen_pos: BTreeMap<PoId, SimTime>,
}

impl ManufacturerState {
    pub fn new(id: PartyId, production_delay: u64) -> Self {
        ManufacturerState {
            id,
            production_delay,
            seen_pos: BTreeMap::new(),
        }
    }

    pub fn handle(
        mut self,
        env: &Envelope,
        ctx: &Ctx<'_>,
    ) -> Result<(Self, Reaction), ProtocolError> {
        let Message::PoSubmit { po_id, sku, qty } = &env.payload else {
            return Err(unexpected(&self.id, env));
        };
        let mut out = Reaction::default();
        if let Some(eta) = self.seen_pos.get(po_id) {
            out.note(format!("{} duplicate {po_id} ignored eta {eta}", self.id));
            return Ok((self, out));
        }
        let eta = ctx.now + self.production_delay;
        self.seen_pos.insert(po_id.clone(), eta);
        out.send(
            ctx.now,
            &env.from,
            Message::PoAck {
                po_id: po_id.clone(),
                eta,
            },
        );
        out.outgoing.push(Outgoing {
            to: env.from.clone(),
            payload: Message::GoodsDelivery {
                po_id: po_id.clone(),
                sku: sku.clone(),
                qty: *qty,
            },
            send_at: eta,
        });
        Ok((self, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::party::Registry;
    use crate::units::Sku;

    fn submit(at: u64, po: &str) -> Envelope {
        Envelope {
            deliver_at: SimTime(at),
            seq: 0,
            from: PartyId::new("W1").unwrap(),
            to: PartyId::new("M1").unwrap(),
            payload: Message::PoSubmit {
                po_id: po.into(),
                sku: Sku::new("A").unwrap(),
                qty: 20,
            },
        }
    }

    fn run(s: ManufacturerState, e: Envelope) -> (ManufacturerState, Reaction) {
        let reg = Registry::new();
        let ctx = Ctx {
            now: e.deliver_at,
            registry: &reg,
        };
        s.handle(&e, &ctx).unwrap()
    }

    #[test]
    fn ack_now_and_deliver_at_eta() {
        let s = ManufacturerState::new(PartyId::new("M1").unwrap(), 3);
        let (_, r) = run(s, submit(4, "W1-PO1"));
        assert_eq!(r.outgoing.len(), 2);
        assert_eq!(
            r.outgoing[0].payload,
            Message::PoAck {
                po_id: "W1-PO1".into(),
                eta: SimTime(7)
            }
        );
        assert_eq!(r.outgoing[0].send_at, SimTime(4));
        assert_eq!(r.outgoing[1].payload.variant(), "GoodsDelivery");
        assert_eq!(r.outgoing[1].send_at, SimTime(7));
    }

    #[test]
    fn duplicate_is_only_noted() {
        let s = ManufacturerState::new(PartyId::new("M1").unwrap(), 3);
        let (s, _) = run(s, submit(4, "W1-PO1"));
        let (s, r) = run(s, submit(5, "W1-PO1"));
        assert!(r.outgoing.is_empty());
        assert_eq!(r.notes, vec!["M1 duplicate W1-PO1 ignored eta 7".to_owned()]);
        let (_, r) = run(s, submit(5, "W1-PO2"));
        assert_eq!(r.outgoing.len(), 2);
    }
}
