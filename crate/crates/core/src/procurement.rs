//! Four-stage procurement workflow.
//!
//! 1. A purchase plan is set up and its expenditure formulated.
//! 2. A purchase document is transmitted to a supplier.
//! 3. Goods are received and inspected; passed goods go into storage and a
//!    warehouse warrant is issued.
//! 4. A ledger entry is booked against the invoice.
//!
//! Each plan moves along `Planned → Transmitted → Received → WarrantIssued →
//! Booked`. Any call out of order fails with [`ProcurementError::WrongState`]
//! and leaves the book untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::inventory::{InventoryError, InventoryLedger};
use crate::party::{PartyId, Registry};
use crate::time::SimTime;
use crate::units::{Money, Sku};

macro_rules! seq_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

seq_id!(PlanId, "");
seq_id!(DocumentId, "");
seq_id!(ReceiptId, "");
seq_id!(WarrantId, "");
seq_id!(EntryId, "");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcurementState {
    Planned,
    Transmitted,
    Received,
    WarrantIssued,
    Booked,
}

impl ProcurementState {
    pub const CHAIN: [ProcurementState; 5] = [
        ProcurementState::Planned,
        ProcurementState::Transmitted,
        ProcurementState::Received,
        ProcurementState::WarrantIssued,
        ProcurementState::Booked,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProcurementState::Planned => "Planned",
            ProcurementState::Transmitted => "Transmitted",
            ProcurementState::Received => "Received",
            ProcurementState::WarrantIssued => "WarrantIssued",
            ProcurementState::Booked => "Booked",
        }
    }
}

impl fmt::Display for ProcurementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanLine {
    pub sku: Sku,
    pub quantity: u64,
    pub unit_cost: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PurchasePlan {
    pub id: PlanId,
    pub lines: Vec<PlanLine>,
    pub requested_by: PartyId,
    pub created_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Expenditure {
    pub plan: PlanId,
    pub total: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PurchaseDocument {
    pub id: DocumentId,
    pub plan: PlanId,
    pub supplier: PartyId,
    pub lines: Vec<PlanLine>,
    pub state: ProcurementState,
}

impl PurchaseDocument {
    /// `PO <id> <supplier> <state>`
    pub fn header(&self) -> String {
        format!("PO {} {} {}", self.id, self.supplier, self.state)
    }

    /// One `LINE <sku> <qty> <unit_cost>` per plan line.
    pub fn line_records(&self) -> impl Iterator<Item = String> + '_ {
        self.lines
            .iter()
            .map(|l| format!("LINE {} {} {}", l.sku, l.quantity, l.unit_cost))
    }

    /// Canonical text rendering: header then one line per plan line, each
    /// newline-terminated.
    pub fn render(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for line in self.line_records() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inspection {
    Passed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoodsReceipt {
    pub id: ReceiptId,
    pub document: DocumentId,
    pub received: Vec<(Sku, u64)>,
    pub inspection: Inspection,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WarehouseWarrant {
    pub id: WarrantId,
    pub receipt: ReceiptId,
    pub warehouse: PartyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    /// Owed by the purchaser to the supplier.
    Payable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LedgerEntry {
    pub id: EntryId,
    pub warrant: WarrantId,
    pub invoice_ref: String,
    pub amount: Money,
    pub kind: EntryKind,
}

/// One observed stage change of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub plan: PlanId,
    pub state: ProcurementState,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProcurementError {
    #[error("plan has no lines")]
    EmptyPlan,
    #[error("sku {0} appears more than once")]
    DuplicateSku(Sku),
    #[error("quantity must be at least 1")]
    NonPositiveQuantity,
    #[error("unknown plan {0}")]
    UnknownPlan(PlanId),
    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error("unknown receipt {0}")]
    UnknownReceipt(ReceiptId),
    #[error("unknown warrant {0}")]
    UnknownWarrant(WarrantId),
    #[error("operation not allowed in state {actual}")]
    WrongState { actual: ProcurementState },
    #[error("{0} is not a supplier of the requesting party")]
    NotASupplier(PartyId),
    #[error("sku {0} is not on the document")]
    UnknownSku(Sku),
    #[error("received {received} of {sku}, only {ordered} ordered")]
    OverDelivery {
        sku: Sku,
        ordered: u64,
        received: u64,
    },
    #[error("receipt failed inspection")]
    InspectionFailed,
    #[error("receipt {0} already has a warrant")]
    DuplicateWarrant(ReceiptId),
    #[error("amount overflows 64-bit minor units")]
    AmountOverflow,
    #[error("storing goods failed: {0}")]
    Storage(#[from] InventoryError),
}

/// Destination for inspected goods. Implementations must be all-or-nothing.
pub trait GoodsSink {
    fn post(&mut self, lines: &[(Sku, u64)], at: SimTime) -> Result<(), InventoryError>;
}

impl GoodsSink for InventoryLedger {
    fn post(&mut self, lines: &[(Sku, u64)], at: SimTime) -> Result<(), InventoryError> {
        self.restock_all(lines, at)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PlanRecord {
    plan: PurchasePlan,
    state: ProcurementState,
    document: Option<DocumentId>,
}

/// Store for every procurement artifact owned by one purchasing party.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ProcurementBook {
    plans: BTreeMap<PlanId, PlanRecord>,
    expenditures: BTreeMap<PlanId, Expenditure>,
    documents: BTreeMap<DocumentId, PurchaseDocument>,
    receipts: BTreeMap<ReceiptId, GoodsReceipt>,
    receipt_of_document: BTreeMap<DocumentId, ReceiptId>,
    warrants: BTreeMap<WarrantId, WarehouseWarrant>,
    warrant_of_receipt: BTreeMap<ReceiptId, WarrantId>,
    entries: BTreeMap<EntryId, LedgerEntry>,
    trail: Vec<Transition>,
    next_plan: u64,
    next_document: u64,
    next_receipt: u64,
    next_warrant: u64,
    next_entry: u64,
}

fn line_total(lines: impl IntoIterator<Item = (u64, Money)>) -> Result<Money, ProcurementError> {
    lines.into_iter().try_fold(Money::ZERO, |acc, (qty, cost)| {
        cost.checked_times(qty)
            .and_then(|v| acc.checked_add(v))
            .ok_or(ProcurementError::AmountOverflow)
    })
}

impl ProcurementBook {
    pub fn new() -> Self {
        ProcurementBook::default()
    }

    pub fn create_plan(
        &mut self,
        requested_by: PartyId,
        lines: Vec<PlanLine>,
        at: SimTime,
    ) -> Result<PurchasePlan, ProcurementError> {
        if lines.is_empty() {
            return Err(ProcurementError::EmptyPlan);
        }
        let mut seen = BTreeSet::new();
        for line in &lines {
            if line.quantity == 0 {
                return Err(ProcurementError::NonPositiveQuantity);
            }
            if !seen.insert(&line.sku) {
                return Err(ProcurementError::DuplicateSku(line.sku.clone()));
            }
        }
        self.next_plan += 1;
        let plan = PurchasePlan {
            id: PlanId(self.next_plan),
            lines,
            requested_by,
            created_at: at,
        };
        self.plans.insert(
            plan.id,
            PlanRecord {
                plan: plan.clone(),
                state: ProcurementState::Planned,
                document: None,
            },
        );
        self.trail.push(Transition {
            plan: plan.id,
            state: ProcurementState::Planned,
            at,
        });
        Ok(plan)
    }

    /// Total cost of a plan. Formulated once; later calls return the same
    /// record.
    pub fn formulate_expenditure(&mut self, plan: PlanId) -> Result<Expenditure, ProcurementError> {
        if let Some(e) = self.expenditures.get(&plan) {
            return Ok(*e);
        }
        let record = self
            .plans
            .get(&plan)
            .ok_or(ProcurementError::UnknownPlan(plan))?;
        let total = line_total(record.plan.lines.iter().map(|l| (l.quantity, l.unit_cost)))?;
        let e = Expenditure { plan, total };
        self.expenditures.insert(plan, e);
        Ok(e)
    }

    /// Sends the plan to `supplier`, which must hold an active `SupplierTo`
    /// link toward the requesting party. Formulates the expenditure first if
    /// that has not happened yet.
    pub fn transmit_document(
        &mut self,
        plan: PlanId,
        supplier: &PartyId,
        at: SimTime,
        registry: &Registry,
    ) -> Result<PurchaseDocument, ProcurementError> {
        let record = self
            .plans
            .get(&plan)
            .ok_or(ProcurementError::UnknownPlan(plan))?;
        expect_state(record.state, ProcurementState::Planned)?;
        if registry.party(supplier).is_none()
            || !registry.is_supplier_to(supplier, &record.plan.requested_by, at)
        {
            return Err(ProcurementError::NotASupplier(supplier.clone()));
        }
        self.formulate_expenditure(plan)?;

        self.next_document += 1;
        let record = self.plans.get_mut(&plan).expect("checked above");
        let doc = PurchaseDocument {
            id: DocumentId(self.next_document),
            plan,
            supplier: supplier.clone(),
            lines: record.plan.lines.clone(),
            state: ProcurementState::Transmitted,
        };
        record.document = Some(doc.id);
        self.documents.insert(doc.id, doc.clone());
        self.set_state(plan, ProcurementState::Transmitted, at);
        Ok(doc)
    }

    /// Records a receipt. Passed goods are posted to `sink` in the same step;
    /// if the sink refuses, nothing is recorded.
    pub fn receive_goods<S: GoodsSink + ?Sized>(
        &mut self,
        document: DocumentId,
        received: Vec<(Sku, u64)>,
        inspection: Inspection,
        at: SimTime,
        sink: &mut S,
    ) -> Result<GoodsReceipt, ProcurementError> {
        let doc = self
            .documents
            .get(&document)
            .ok_or(ProcurementError::UnknownDocument(document))?;
        expect_state(doc.state, ProcurementState::Transmitted)?;
        let mut seen = BTreeSet::new();
        for (sku, qty) in &received {
            if *qty == 0 {
                return Err(ProcurementError::NonPositiveQuantity);
            }
            if !seen.insert(sku) {
                return Err(ProcurementError::DuplicateSku(sku.clone()));
            }
            let line = doc
                .lines
                .iter()
                .find(|l| l.sku == *sku)
                .ok_or_else(|| ProcurementError::UnknownSku(sku.clone()))?;
            if *qty > line.quantity {
                return Err(ProcurementError::OverDelivery {
                    sku: sku.clone(),
                    ordered: line.quantity,
                    received: *qty,
                });
            }
        }
        if inspection == Inspection::Passed {
            sink.post(&received, at)?;
        }

        self.next_receipt += 1;
        let receipt = GoodsReceipt {
            id: ReceiptId(self.next_receipt),
            document,
            received,
            inspection,
            at,
        };
        let plan = doc.plan;
        self.receipts.insert(receipt.id, receipt.clone());
        self.receipt_of_document.insert(document, receipt.id);
        self.set_state(plan, ProcurementState::Received, at);
        Ok(receipt)
    }

    pub fn issue_warrant(
        &mut self,
        receipt: ReceiptId,
        warehouse: &PartyId,
        at: SimTime,
    ) -> Result<WarehouseWarrant, ProcurementError> {
        let r = self
            .receipts
            .get(&receipt)
            .ok_or(ProcurementError::UnknownReceipt(receipt))?;
        if r.inspection == Inspection::Rejected {
            return Err(ProcurementError::InspectionFailed);
        }
        if self.warrant_of_receipt.contains_key(&receipt) {
            return Err(ProcurementError::DuplicateWarrant(receipt));
        }
        let doc = &self.documents[&r.document];
        expect_state(doc.state, ProcurementState::Received)?;
        let plan = doc.plan;

        self.next_warrant += 1;
        let warrant = WarehouseWarrant {
            id: WarrantId(self.next_warrant),
            receipt,
            warehouse: warehouse.clone(),
        };
        self.warrants.insert(warrant.id, warrant.clone());
        self.warrant_of_receipt.insert(receipt, warrant.id);
        self.set_state(plan, ProcurementState::WarrantIssued, at);
        Ok(warrant)
    }

    /// Books the payable for what was actually received, not what was
    /// ordered.
    pub fn book_ledger(
        &mut self,
        warrant: WarrantId,
        invoice_ref: &str,
        at: SimTime,
    ) -> Result<LedgerEntry, ProcurementError> {
        let w = self
            .warrants
            .get(&warrant)
            .ok_or(ProcurementError::UnknownWarrant(warrant))?;
        let receipt = &self.receipts[&w.receipt];
        let doc = &self.documents[&receipt.document];
        expect_state(doc.state, ProcurementState::WarrantIssued)?;
        let amount = line_total(receipt.received.iter().map(|(sku, qty)| {
            let cost = doc
                .lines
                .iter()
                .find(|l| l.sku == *sku)
                .map(|l| l.unit_cost)
                .unwrap_or_default();
            (*qty, cost)
        }))?;
        let plan = doc.plan;

        self.next_entry += 1;
        let entry = LedgerEntry {
            id: EntryId(self.next_entry),
            warrant,
            invoice_ref: invoice_ref.to_owned(),
            amount,
            kind: EntryKind::Payable,
        };
        self.entries.insert(entry.id, entry.clone());
        self.set_state(plan, ProcurementState::Booked, at);
        Ok(entry)
    }

    fn set_state(&mut self, plan: PlanId, state: ProcurementState, at: SimTime) {
        let record = self.plans.get_mut(&plan).expect("plan exists");
        record.state = state;
        if let Some(doc) = record.document {
            self.documents.get_mut(&doc).expect("document exists").state = state;
        }
        self.trail.push(Transition { plan, state, at });
    }

    pub fn plan(&self, id: PlanId) -> Option<&PurchasePlan> {
        self.plans.get(&id).map(|r| &r.plan)
    }

    pub fn plan_state(&self, id: PlanId) -> Option<ProcurementState> {
        self.plans.get(&id).map(|r| r.state)
    }

    pub fn plan_ids(&self) -> impl Iterator<Item = PlanId> + '_ {
        self.plans.keys().copied()
    }

    pub fn expenditure(&self, plan: PlanId) -> Option<&Expenditure> {
        self.expenditures.get(&plan)
    }

    pub fn document(&self, id: DocumentId) -> Option<&PurchaseDocument> {
        self.documents.get(&id)
    }

    pub fn document_of_plan(&self, plan: PlanId) -> Option<&PurchaseDocument> {
        self.plans
            .get(&plan)
            .and_then(|r| r.document)
            .and_then(|d| self.documents.get(&d))
    }

    pub fn receipt(&self, id: ReceiptId) -> Option<&GoodsReceipt> {
        self.receipts.get(&id)
    }

    pub fn receipt_of_document(&self, doc: DocumentId) -> Option<&GoodsReceipt> {
        self.receipt_of_document
            .get(&doc)
            .and_then(|r| self.receipts.get(r))
    }

    pub fn warrant(&self, id: WarrantId) -> Option<&WarehouseWarrant> {
        self.warrants.get(&id)
    }

    pub fn warrants(&self) -> impl Iterator<Item = &WarehouseWarrant> {
        self.warrants.values()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    /// Every stage change, in the order it happened.
    pub fn trail(&self) -> &[Transition] {
        &self.trail
    }

    /// Observed states of one plan, oldest first.
    pub fn trace(&self, plan: PlanId) -> Vec<ProcurementState> {
        self.trail
            .iter()
            .filter(|t| t.plan == plan)
            .map(|t| t.state)
            .collect()
    }
}

fn expect_state(actual: ProcurementState, wanted: ProcurementState) -> Result<(), ProcurementError> {
    if actual == wanted {
        Ok(())
    } else {
        Err(ProcurementError::WrongState { actual })
    }
}
