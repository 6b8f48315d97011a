use std::collections::{BTreeMap, BTreeSet};

use super::{unexpected, Ctx, Message, OrderId, PoId, ProtocolError, Reaction, RequestId, Verdict};
use crate::engine::Envelope;
use crate::inventory::InventoryLedger;
use crate::party::PartyId;
use crate::procurement::{DocumentId, Inspection, PlanLine, ProcurementBook, PurchaseDocument};
use crate::time::SimTime;
use crate::units::{Money, Sku};

/// A shipping request parked until replenishment arrives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Backlogged {
    pub request_id: RequestId,
    pub order_id: OrderId,
    pub sku: Sku,
    pub qty: u64,
    pub retailer: PartyId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PendingPo {
    pub document: DocumentId,
    pub sku: Sku,
    pub qty: u64,
    pub eta: Option<SimTime>,
    pub backlog: Vec<Backlogged>,
}

/// Units reserved for a request until the retailer confirms or cancels it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Held {
    order_id: OrderId,
    sku: Sku,
    qty: u64,
    retailer: PartyId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WarehouseState {
    pub id: PartyId,
    pub ledger: InventoryLedger,
    pub manufacturer: PartyId,
    pub reorder_qty: u64,
    pub unit_costs: BTreeMap<Sku, Money>,
    pub procurement: ProcurementBook,
    pub pending_pos: BTreeMap<PoId, PendingPo>,
    delivered_pos: BTreeSet<PoId>,
    held: BTreeMap<RequestId, Held>,
    seen_requests: BTreeSet<RequestId>,
}

impl WarehouseState {
    pub fn new(
        ledger: InventoryLedger,
        manufacturer: PartyId,
        reorder_qty: u64,
        unit_costs: BTreeMap<Sku, Money>,
    ) -> Self {
        WarehouseState {
            id: ledger.owner().clone(),
            ledger,
            manufacturer,
            reorder_qty,
            unit_costs,
            procurement: ProcurementBook::new(),
            pending_pos: BTreeMap::new(),
            delivered_pos: BTreeSet::new(),
            held: BTreeMap::new(),
            seen_requests: BTreeSet::new(),
        }
    }

    pub fn po_id(&self, doc: DocumentId) -> PoId {
        PoId(format!("{}-PO{}", self.id, doc))
    }

    /// Units currently reserved for unconfirmed requests.
    pub fn held_units(&self) -> u64 {
        self.held.values().map(|h| h.qty).sum()
    }

    pub fn handle(
        mut self,
        env: &Envelope,
        ctx: &Ctx<'_>,
    ) -> Result<(Self, Reaction), ProtocolError> {
        let mut out = Reaction::default();
        let now = ctx.now;
        match &env.payload {
            Message::ShipGoodsRequest {
                request_id,
                order_id,
                sku,
                qty,
            } => {
                if !self.seen_requests.insert(request_id.clone()) {
                    return Err(ProtocolError::DuplicateRequest(request_id.clone()));
                }
                let request = Backlogged {
                    request_id: request_id.clone(),
                    order_id: order_id.clone(),
                    sku: sku.clone(),
                    qty: *qty,
                    retailer: env.from.clone(),
                };
                if !self.try_accept(&request, now, &mut out)? {
                    self.decline_and_replenish(request, ctx, &mut out)?;
                }
            }
            Message::ShipConfirm { request_id, .. } => {
                let held = self
                    .held
                    .remove(request_id)
                    .ok_or_else(|| ProtocolError::UnknownRequest(request_id.clone()))?;
                self.ledger.ship(&held.sku, held.qty, now)?;
                out.send(
                    now,
                    &held.retailer,
                    Message::GoodsShipped {
                        order_id: held.order_id,
                        sku: held.sku,
                        qty: held.qty,
                    },
                );
            }
            Message::CancelReservation { request_id } => {
                let held = self
                    .held
                    .remove(request_id)
                    .ok_or_else(|| ProtocolError::UnknownRequest(request_id.clone()))?;
                self.ledger.release(&held.sku, held.qty, now)?;
            }
            Message::PoAck { po_id, eta } => match self.pending_pos.get_mut(po_id) {
                Some(po) => po.eta = Some(*eta),
                // Acks may trail the delivery when latencies are uneven.
                None if self.delivered_pos.contains(po_id) => {}
                None => return Err(ProtocolError::UnknownPo(po_id.clone())),
            },
            Message::GoodsDelivery { po_id, sku, qty } => {
                let po = match self.pending_pos.remove(po_id) {
                    Some(po) => po,
                    None if self.delivered_pos.contains(po_id) => {
                        return Err(ProtocolError::DuplicateDelivery(po_id.clone()))
                    }
                    None => return Err(ProtocolError::UnknownPo(po_id.clone())),
                };
                self.delivered_pos.insert(po_id.clone());
                self.book_delivery(&po, po_id, sku, *qty, now, &mut out)?;
                // Second chance, first come first served. A request that
                // still does not fit is declined for good.
                for request in po.backlog {
                    if !self.try_accept(&request, now, &mut out)? {
                        out.send(
                            now,
                            &request.retailer,
                            Message::ShipGoodsResponse {
                                request_id: request.request_id,
                                verdict: Verdict::Decline,
                            },
                        );
                    }
                }
            }
            _ => return Err(unexpected(&self.id, env)),
        }
        Ok((self, out))
    }

    fn try_accept(
        &mut self,
        request: &Backlogged,
        now: SimTime,
        out: &mut Reaction,
    ) -> Result<bool, ProtocolError> {
        let available = self.ledger.available(&request.sku);
        if available < request.qty {
            return Ok(false);
        }
        self.ledger.reserve(&request.sku, request.qty, now)?;
        self.held.insert(
            request.request_id.clone(),
            Held {
                order_id: request.order_id.clone(),
                sku: request.sku.clone(),
                qty: request.qty,
                retailer: request.retailer.clone(),
            },
        );
        out.send(
            now,
            &request.retailer,
            Message::ShipGoodsResponse {
                request_id: request.request_id.clone(),
                verdict: Verdict::Accept { available },
            },
        );
        Ok(true)
    }

    fn decline_and_replenish(
        &mut self,
        request: Backlogged,
        ctx: &Ctx<'_>,
        out: &mut Reaction,
    ) -> Result<(), ProtocolError> {
        let now = ctx.now;
        let shortfall = request.qty - self.ledger.available(&request.sku);
        let qty = self.reorder_qty.max(shortfall);
        let unit_cost = self.unit_costs.get(&request.sku).copied().unwrap_or_default();
        let plan = self.procurement.create_plan(
            self.id.clone(),
            vec![PlanLine {
                sku: request.sku.clone(),
                quantity: qty,
                unit_cost,
            }],
            now,
        )?;
        let doc = self
            .procurement
            .transmit_document(plan.id, &self.manufacturer, now, ctx.registry)?;
        out.note(format!("{} PLAN {} Planned", self.id, plan.id));
        self.note_document(&doc, true, out);

        let po_id = self.po_id(doc.id);
        out.send(
            now,
            &request.retailer,
            Message::ShipGoodsResponse {
                request_id: request.request_id.clone(),
                verdict: Verdict::Decline,
            },
        );
        out.send(
            now,
            &self.manufacturer,
            Message::PoSubmit {
                po_id: po_id.clone(),
                sku: request.sku.clone(),
                qty,
            },
        );
        self.pending_pos.insert(
            po_id,
            PendingPo {
                document: doc.id,
                sku: request.sku.clone(),
                qty,
                eta: None,
                backlog: vec![request],
            },
        );
        Ok(())
    }

    /// Runs stages 3 and 4 of procurement for a delivery.
    fn book_delivery(
        &mut self,
        po: &PendingPo,
        po_id: &PoId,
        sku: &Sku,
        qty: u64,
        now: SimTime,
        out: &mut Reaction,
    ) -> Result<(), ProtocolError> {
        let receipt = self.procurement.receive_goods(
            po.document,
            vec![(sku.clone(), qty)],
            Inspection::Passed,
            now,
            &mut self.ledger,
        )?;
        self.note_state(po.document, out);
        let warrant = self.procurement.issue_warrant(receipt.id, &self.id, now)?;
        self.note_state(po.document, out);
        let entry = self
            .procurement
            .book_ledger(warrant.id, &format!("INV-{po_id}"), now)?;
        self.note_state(po.document, out);
        out.note(format!(
            "{} BOOK {} {} {}",
            self.id, entry.id, entry.invoice_ref, entry.amount
        ));
        Ok(())
    }

    fn note_state(&self, doc: DocumentId, out: &mut Reaction) {
        let doc = self.procurement.document(doc).expect("document exists");
        self.note_document(doc, false, out);
    }

    fn note_document(&self, doc: &PurchaseDocument, with_lines: bool, out: &mut Reaction) {
        out.note(format!("{} {}", self.id, doc.header()));
        if with_lines {
            for line in doc.line_records() {
                out.note(format!("{} {}", self.id, line));
            }
        }
    }
}
