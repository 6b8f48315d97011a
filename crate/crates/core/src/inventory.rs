//! Per-owner SKU ledger with reservations.
//!
//! `on_hand` counts physical units, `reserved` counts units promised to a
//! pending shipment. Every successful mutation appends a [`HistoryRow`]; the
//! rows alone are enough to rebuild the ledger (see [`InventoryLedger::replay`]).
//! Failed operations leave the ledger untouched.

use std::collections::BTreeMap;
use std::fmt;

use crate::party::PartyId;
use crate::time::SimTime;
use crate::units::Sku;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StockOp {
    /// Opening balance; affects `on_hand`.
    Initial,
    /// Goods received; affects `on_hand`.
    Restock,
    /// Units promised; affects `reserved`.
    Reserve,
    /// Promise withdrawn; affects `reserved` (delta is negative).
    Release,
    /// Goods leave; affects both `on_hand` and `reserved` (delta is negative).
    Ship,
}

impl StockOp {
    pub fn as_str(self) -> &'static str {
        match self {
            StockOp::Initial => "initial",
            StockOp::Restock => "restock",
            StockOp::Reserve => "reserve",
            StockOp::Release => "release",
            StockOp::Ship => "ship",
        }
    }

    pub fn parse(s: &str) -> Option<StockOp> {
        Some(match s {
            "initial" => StockOp::Initial,
            "restock" => StockOp::Restock,
            "reserve" => StockOp::Reserve,
            "release" => StockOp::Release,
            "ship" => StockOp::Ship,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HistoryRow {
    pub at: SimTime,
    pub op: StockOp,
    pub sku: Sku,
    pub delta: i64,
}

impl fmt::Display for HistoryRow {
    /// `INV <time> <op> <sku> <delta>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "INV {} {} {} {}",
            self.at,
            self.op.as_str(),
            self.sku,
            self.delta
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct StockRow {
    pub on_hand: u64,
    pub reserved: u64,
}

impl StockRow {
    pub fn available(&self) -> u64 {
        self.on_hand - self.reserved
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InventoryError {
    #[error("quantity must be at least 1")]
    NonPositiveQuantity,
    #[error("insufficient stock of {sku}: {available} available, {requested} requested")]
    Insufficient {
        sku: Sku,
        available: u64,
        requested: u64,
    },
    #[error("only {reserved} units of {sku} reserved, {requested} requested")]
    NotReserved {
        sku: Sku,
        reserved: u64,
        requested: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InventoryLedger {
    owner: PartyId,
    rows: BTreeMap<Sku, StockRow>,
    history: Vec<HistoryRow>,
}

impl InventoryLedger {
    pub fn new(owner: PartyId) -> Self {
        InventoryLedger {
            owner,
            rows: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    pub fn owner(&self) -> &PartyId {
        &self.owner
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn row(&self, sku: &Sku) -> StockRow {
        self.rows.get(sku).copied().unwrap_or_default()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Sku, &StockRow)> {
        self.rows.iter()
    }

    pub fn on_hand(&self, sku: &Sku) -> u64 {
        self.row(sku).on_hand
    }

    pub fn reserved(&self, sku: &Sku) -> u64 {
        self.row(sku).reserved
    }

    /// `on_hand − reserved`; unknown SKUs read as 0.
    pub fn available(&self, sku: &Sku) -> u64 {
        self.row(sku).available()
    }

    pub fn total_on_hand(&self) -> u64 {
        self.rows.values().map(|r| r.on_hand).sum()
    }

    pub fn total_reserved(&self) -> u64 {
        self.rows.values().map(|r| r.reserved).sum()
    }

    /// Opening balance. Zero is accepted and recorded so the row exists.
    pub fn seed(&mut self, sku: Sku, qty: u64, at: SimTime) {
        self.rows.entry(sku.clone()).or_default().on_hand += qty;
        self.push(at, StockOp::Initial, sku, qty as i64);
    }

    pub fn restock(&mut self, sku: &Sku, qty: u64, at: SimTime) -> Result<(), InventoryError> {
        positive(qty)?;
        self.rows.entry(sku.clone()).or_default().on_hand += qty;
        self.push(at, StockOp::Restock, sku.clone(), qty as i64);
        Ok(())
    }

    /// Restocks several lines, all or nothing.
    pub fn restock_all(&mut self, lines: &[(Sku, u64)], at: SimTime) -> Result<(), InventoryError> {
        for (_, qty) in lines {
            positive(*qty)?;
        }
        for (sku, qty) in lines {
            self.restock(sku, *qty, at)?;
        }
        Ok(())
    }

    pub fn reserve(&mut self, sku: &Sku, qty: u64, at: SimTime) -> Result<(), InventoryError> {
        positive(qty)?;
        let available = self.available(sku);
        if available < qty {
            return Err(InventoryError::Insufficient {
                sku: sku.clone(),
                available,
                requested: qty,
            });
        }
        self.rows.get_mut(sku).expect("available > 0").reserved += qty;
        self.push(at, StockOp::Reserve, sku.clone(), qty as i64);
        Ok(())
    }

    /// Returns reserved units to the available pool without shipping them.
    pub fn release(&mut self, sku: &Sku, qty: u64, at: SimTime) -> Result<(), InventoryError> {
        positive(qty)?;
        self.check_reserved(sku, qty)?;
        self.rows.get_mut(sku).expect("reserved > 0").reserved -= qty;
        self.push(at, StockOp::Release, sku.clone(), -(qty as i64));
        Ok(())
    }

    /// Ships previously reserved units.
    pub fn ship(&mut self, sku: &Sku, qty: u64, at: SimTime) -> Result<(), InventoryError> {
        positive(qty)?;
        self.check_reserved(sku, qty)?;
        let row = self.rows.get_mut(sku).expect("reserved > 0");
        row.reserved -= qty;
        row.on_hand -= qty;
        self.push(at, StockOp::Ship, sku.clone(), -(qty as i64));
        Ok(())
    }

    fn check_reserved(&self, sku: &Sku, qty: u64) -> Result<(), InventoryError> {
        let reserved = self.reserved(sku);
        if reserved < qty {
            return Err(InventoryError::NotReserved {
                sku: sku.clone(),
                reserved,
                requested: qty,
            });
        }
        Ok(())
    }

    fn push(&mut self, at: SimTime, op: StockOp, sku: Sku, delta: i64) {
        self.history.push(HistoryRow { at, op, sku, delta });
    }

    /// Rebuilds a ledger purely from history rows.
    pub fn replay(owner: PartyId, history: &[HistoryRow]) -> InventoryLedger {
        let mut rows: BTreeMap<Sku, StockRow> = BTreeMap::new();
        for h in history {
            let row = rows.entry(h.sku.clone()).or_default();
            let apply = |v: &mut u64| *v = (*v as i64 + h.delta) as u64;
            match h.op {
                StockOp::Initial | StockOp::Restock => apply(&mut row.on_hand),
                StockOp::Reserve | StockOp::Release => apply(&mut row.reserved),
                StockOp::Ship => {
                    apply(&mut row.on_hand);
                    apply(&mut row.reserved);
                }
            }
        }
        InventoryLedger {
            owner,
            rows,
            history: history.to_vec(),
        }
    }

    pub fn render_history(&self) -> String {
        self.history.iter().map(|h| format!("{h}\n")).collect()
    }
}

fn positive(qty: u64) -> Result<(), InventoryError> {
    if qty == 0 {
        Err(InventoryError::NonPositiveQuantity)
    } else {
        Ok(())
    }
}
