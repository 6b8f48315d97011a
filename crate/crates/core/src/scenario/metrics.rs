use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde_json::{json, Map, Value};

use crate::engine::{EventLog, LogEntry};
use crate::protocol::{Message, Verdict};

/// Performance measures derived from an event log alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    pub orders_total: u64,
    pub orders_closed: u64,
    pub orders_rejected: u64,
    /// `orders_closed / orders_total`, or 1 with no orders.
    pub fill_rate: Ratio<u64>,
    /// Mean ticks from `CustomerOrder` delivery to `Payment` delivery over
    /// closed orders; 0 when nothing closed.
    pub mean_cycle_time: Ratio<u64>,
    pub cycle_time_defined: bool,
    /// Distinct po ids among delivered `POSubmit` messages.
    pub replenishments: u64,
    pub declines: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("log line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("log has no END line")]
    TruncatedLog,
    #[error("order {0} closed without arriving")]
    OrphanClosure(String),
}

/// Parses rendered log text and computes its metrics.
pub fn compute_metrics(log_text: &str) -> Result<Metrics, MetricsError> {
    let log = EventLog::parse(log_text)
        .map_err(|(line, reason)| MetricsError::Malformed { line, reason })?;
    Metrics::from_log(&log)
}

impl Metrics {
    pub fn from_log(log: &EventLog) -> Result<Metrics, MetricsError> {
        if !log.is_complete() {
            return Err(MetricsError::TruncatedLog);
        }
        let mut arrivals = BTreeMap::new();
        let mut closed = BTreeMap::new();
        let mut rejected = BTreeSet::new();
        let mut pos = BTreeSet::new();
        let mut declines = 0;
        for entry in log.entries() {
            let LogEntry::Message(env) = entry else {
                continue;
            };
            match &env.payload {
                Message::CustomerOrder { order_id, .. } => {
                    arrivals.insert(order_id.clone(), env.deliver_at);
                }
                Message::Payment { order_id, .. } => {
                    closed.insert(order_id.clone(), env.deliver_at);
                }
                Message::OrderRejected { order_id, .. } => {
                    rejected.insert(order_id.clone());
                }
                Message::PoSubmit { po_id, .. } => {
                    pos.insert(po_id.clone());
                }
                Message::ShipGoodsResponse {
                    verdict: Verdict::Decline,
                    ..
                } => declines += 1,
                _ => {}
            }
        }
        let mut total_cycle = 0u64;
        for (order, at) in &closed {
            let arrived = arrivals
                .get(order)
                .ok_or_else(|| MetricsError::OrphanClosure(order.to_string()))?;
            total_cycle += at.ticks() - arrived.ticks();
        }
        let orders_total = arrivals.len() as u64;
        let orders_closed = closed.len() as u64;
        let fill_rate = if orders_total == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(orders_closed, orders_total)
        };
        let (mean_cycle_time, cycle_time_defined) = if orders_closed == 0 {
            (Ratio::from_integer(0), false)
        } else {
            (Ratio::new(total_cycle, orders_closed), true)
        };
        Ok(Metrics {
            orders_total,
            orders_closed,
            orders_rejected: rejected.len() as u64,
            fill_rate,
            mean_cycle_time,
            cycle_time_defined,
            replenishments: pos.len() as u64,
            declines,
        })
    }

    /// Flat JSON object. Each rational appears twice: as an exact `"n/d"`
    /// string and as a 6-decimal string under a `_decimal` key.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("orders_total".into(), json!(self.orders_total));
        map.insert("orders_closed".into(), json!(self.orders_closed));
        map.insert("orders_rejected".into(), json!(self.orders_rejected));
        map.insert("fill_rate".into(), json!(fraction(&self.fill_rate)));
        map.insert("fill_rate_decimal".into(), json!(decimal6(&self.fill_rate)));
        map.insert("mean_cycle_time".into(), json!(fraction(&self.mean_cycle_time)));
        map.insert(
            "mean_cycle_time_decimal".into(),
            json!(decimal6(&self.mean_cycle_time)),
        );
        map.insert("cycle_time_defined".into(), json!(self.cycle_time_defined));
        map.insert("replenishments".into(), json!(self.replenishments));
        map.insert("declines".into(), json!(self.declines));
        Value::Object(map)
    }
}

pub fn fraction(r: &Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Rounds half up to six decimal places.
pub fn decimal6(r: &Ratio<u64>) -> String {
    let (n, d) = (*r.numer() as u128, *r.denom() as u128);
    let scaled = (n * 2_000_000 + d) / (2 * d);
    format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run() {
        let m = compute_metrics("NOTE 0 setup retailer R\nEND 0 0\n").unwrap();
        assert_eq!(m.fill_rate, Ratio::from_integer(1));
        assert!(!m.cycle_time_defined);
        assert_eq!(m.mean_cycle_time, Ratio::from_integer(0));
    }

    #[test]
    fn truncated() {
        assert_eq!(
            compute_metrics("NOTE 0 setup retailer R\n"),
            Err(MetricsError::TruncatedLog)
        );
    }

    #[test]
    fn counts_and_cycle_time() {
        let log = "\
MSG 0 0 C R CustomerOrder O1 C A 2
MSG 1 1 C R CustomerOrder O2 C A 9
MSG 2 3 W1 R ShipGoodsResponse O2-W1 Decline
MSG 3 4 C R OrderRejected O2 no_capacity
MSG 3 5 W1 M POSubmit W1-PO1 A 20
MSG 3 6 W1 M POSubmit W1-PO1 A 20
MSG 7 9 C R Payment O1 1000
END 7 7
";
        let m = compute_metrics(log).unwrap();
        assert_eq!(m.orders_total, 2);
        assert_eq!(m.orders_closed, 1);
        assert_eq!(m.orders_rejected, 1);
        assert_eq!(m.fill_rate, Ratio::new(1, 2));
        assert_eq!(m.mean_cycle_time, Ratio::from_integer(7));
        assert_eq!(m.replenishments, 1);
        assert_eq!(m.declines, 1);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal6(&Ratio::new(2, 3)), "0.666667");
        assert_eq!(decimal6(&Ratio::new(1, 8)), "0.125000");
        assert_eq!(decimal6(&Ratio::from_integer(12)), "12.000000");
        assert_eq!(fraction(&Ratio::new(8, 10)), "4/5");
    }
}
