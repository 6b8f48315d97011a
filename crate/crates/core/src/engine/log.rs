use std::fmt;

use super::Envelope;
use crate::inventory::{HistoryRow, StockOp};
use crate::party::PartyId;
use crate::protocol::Message;
use crate::time::SimTime;
use crate::units::Sku;

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    /// `MSG <time> <seq> <from> <to> <variant> <fields...>`
    Message(Envelope),
    /// `INV <time> <op> <sku> <delta>`
    Inventory(HistoryRow),
    /// `NOTE <time> <text>`
    Note { at: SimTime, text: String },
    /// `END <final_time> <event_count>`
    End { final_time: SimTime, event_count: u64 },
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogEntry::Message(env) => {
                write!(
                    f,
                    "MSG {} {} {} {} {}",
                    env.deliver_at,
                    env.seq,
                    env.from,
                    env.to,
                    env.payload.variant()
                )?;
                for field in env.payload.fields() {
                    write!(f, " {field}")?;
                }
                Ok(())
            }
            LogEntry::Inventory(row) => row.fmt(f),
            LogEntry::Note { at, text } => write!(f, "NOTE {at} {text}"),
            LogEntry::End {
                final_time,
                event_count,
            } => write!(f, "END {final_time} {event_count}"),
        }
    }
}

impl LogEntry {
    /// Parses one rendered line back into an entry.
    pub fn parse_line(line: &str) -> Result<LogEntry, String> {
        let mut tokens = line.split(' ');
        let tag = tokens.next().unwrap_or_default();
        let mut num = |what: &str| -> Result<u64, String> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format!("bad {what}"))
        };
        match tag {
            "MSG" => {
                let at = num("time")?;
                let seq = num("seq")?;
                let rest: Vec<&str> = line.split(' ').skip(3).collect();
                let [from, to, variant, fields @ ..] = rest.as_slice() else {
                    return Err("truncated message".into());
                };
                let from = PartyId::new(*from).ok_or("bad sender")?;
                let to = PartyId::new(*to).ok_or("bad recipient")?;
                let payload = Message::parse(variant, fields)
                    .ok_or_else(|| format!("bad {variant} payload"))?;
                Ok(LogEntry::Message(Envelope {
                    deliver_at: SimTime(at),
                    seq,
                    from,
                    to,
                    payload,
                }))
            }
            "INV" => {
                let at = num("time")?;
                let rest: Vec<&str> = line.split(' ').skip(2).collect();
                let [op, sku, delta] = rest.as_slice() else {
                    return Err("malformed inventory row".into());
                };
                Ok(LogEntry::Inventory(HistoryRow {
                    at: SimTime(at),
                    op: StockOp::parse(op).ok_or("bad stock op")?,
                    sku: Sku::new(*sku).ok_or("bad sku")?,
                    delta: delta.parse().map_err(|_| "bad delta")?,
                }))
            }
            "NOTE" => {
                let at = num("time")?;
                let text = line.splitn(3, ' ').nth(2).unwrap_or_default();
                Ok(LogEntry::Note {
                    at: SimTime(at),
                    text: text.to_owned(),
                })
            }
            "END" => {
                let final_time = SimTime(num("final time")?);
                let event_count = num("event count")?;
                if tokens.next().is_some() {
                    return Err("trailing tokens".into());
                }
                Ok(LogEntry::End {
                    final_time,
                    event_count,
                })
            }
            other => Err(format!("unknown record {other:?}")),
        }
    }
}

/// Append-only record of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub(crate) fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn messages(&self) -> impl Iterator<Item = &Envelope> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Message(env) => Some(env),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.entries.last(), Some(LogEntry::End { .. }))
    }

    /// Newline-terminated text rendering; the byte-exact form used for
    /// replay comparison.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<EventLog, (usize, String)> {
        let entries = text
            .lines()
            .enumerate()
            .map(|(i, l)| LogEntry::parse_line(l).map_err(|e| (i + 1, e)))
            .collect::<Result<_, _>>()?;
        Ok(EventLog { entries })
    }
}
