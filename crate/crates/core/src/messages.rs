//! Message-book file IO.
//!
//! The on-disk format is delimited text with the exact column set
//! `timestamp,id,price,quantity,event,side`, one event per row.

use crate::error::{Error, Result};
use crate::types::{EventKind, MessageEvent, Side};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const HEADER: &str = "timestamp,id,price,quantity,event,side";

/// Parse a message-book file into time-ordered events.
///
/// Malformed rows and non-monotone timestamps are reported with their
/// 1-based line number.
pub fn parse_message_file(path: &Path) -> Result<Vec<MessageEvent>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_message_reader(BufReader::new(file))
}

pub fn parse_message_reader<R: BufRead>(reader: R) -> Result<Vec<MessageEvent>> {
    let mut events = Vec::new();
    let mut prev_ts: Option<i64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 {
            if normalize_header(trimmed) != HEADER {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("header `{trimmed}` does not match `{HEADER}`"),
                });
            }
            continue;
        }
        let event = parse_row(trimmed, lineno)?;
        if let Some(prev) = prev_ts {
            if event.timestamp < prev {
                return Err(Error::NonMonotoneTimestamps {
                    line: lineno,
                    prev,
                    curr: event.timestamp,
                });
            }
        }
        prev_ts = Some(event.timestamp);
        events.push(event);
    }
    Ok(events)
}

fn normalize_header(line: &str) -> String {
    line.split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_row(line: &str, lineno: usize) -> Result<MessageEvent> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != 6 {
        return Err(Error::Parse {
            line: lineno,
            reason: format!("expected 6 columns, got {}", cols.len()),
        });
    }
    macro_rules! col {
        ($i:expr, $name:expr, $ty:ty) => {
            cols[$i].parse::<$ty>().map_err(|e| Error::Parse {
                line: lineno,
                reason: format!("column `{}`: {e}", $name),
            })?
        };
    }

    let timestamp = col!(0, "timestamp", i64);
    let order_id = col!(1, "id", u64);
    let price = col!(2, "price", i64);
    let quantity: i64 = col!(3, "quantity", i64);
    let kind: EventKind = cols[4].parse().map_err(|e| Error::Parse {
        line: lineno,
        reason: e,
    })?;
    let side: Side = cols[5].parse().map_err(|e| Error::Parse {
        line: lineno,
        reason: e,
    })?;

    if price <= 0 {
        return Err(Error::Parse {
            line: lineno,
            reason: format!("price must be positive, got {price}"),
        });
    }
    if quantity < 0 {
        return Err(Error::Parse {
            line: lineno,
            reason: format!("quantity must be non-negative, got {quantity}"),
        });
    }

    Ok(MessageEvent {
        timestamp,
        order_id,
        price,
        quantity: quantity as u64,
        kind,
        side,
    })
}

/// Write events in the Table-1 column layout.
pub fn write_message_file(path: &Path, events: &[MessageEvent]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    let write = |e: std::io::Error| Error::io(path.display().to_string(), e);
    writeln!(out, "{HEADER}").map_err(write)?;
    for ev in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            ev.timestamp,
            ev.order_id,
            ev.price,
            ev.quantity,
            ev.kind.as_str(),
            ev.side.as_str()
        )
        .map_err(write)?;
    }
    Ok(())
}
