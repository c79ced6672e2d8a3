//! Snapshot persistence: delimited text mirroring the book layout, and a
//! fixed-width little-endian binary format for fast re-reads.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! header:  magic "ELOBSNP1" (8 bytes) | version u16 | depth u16
//! record:  timestamp i64
//!          mid_twice i64   (i64::MIN when the book is one-sided)
//!          spread    i64   (i64::MIN when the book is one-sided)
//!          n_asks u8 | n_bids u8
//!          depth x (price i64, quantity u64) asks, zero-padded
//!          depth x (price i64, quantity u64) bids, zero-padded
//! ```

use crate::error::{Error, Result};
use crate::types::{BookSnapshot, Level, MidPrice};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"ELOBSNP1";
const VERSION: u16 = 1;

pub fn write_snapshots_text(path: &Path, snapshots: &[BookSnapshot], depth: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);

    let mut header = String::from("timestamp,mid_price,spread");
    for l in 1..=depth {
        header.push_str(&format!(",ask_price_{l},ask_qty_{l}"));
    }
    for l in 1..=depth {
        header.push_str(&format!(",bid_price_{l},bid_qty_{l}"));
    }
    writeln!(out, "{header}").map_err(ioerr)?;

    for snap in snapshots {
        let mid = snap.mid.map(|m| m.to_string()).unwrap_or_default();
        let spread = snap.spread.map(|s| s.to_string()).unwrap_or_default();
        let mut row = format!("{},{},{}", snap.timestamp, mid, spread);
        for side in [&snap.asks, &snap.bids] {
            for l in 0..depth {
                match side.get(l) {
                    Some(level) => row.push_str(&format!(",{},{}", level.price, level.quantity)),
                    None => row.push_str(",,"),
                }
            }
        }
        writeln!(out, "{row}").map_err(ioerr)?;
    }
    Ok(())
}

pub fn write_snapshots_binary(path: &Path, snapshots: &[BookSnapshot], depth: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);

    out.write_all(MAGIC).map_err(ioerr)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(ioerr)?;
    out.write_all(&(depth as u16).to_le_bytes()).map_err(ioerr)?;

    for snap in snapshots {
        out.write_all(&snap.timestamp.to_le_bytes()).map_err(ioerr)?;
        let mid = snap.mid.map(|m| m.twice()).unwrap_or(i64::MIN);
        out.write_all(&mid.to_le_bytes()).map_err(ioerr)?;
        let spread = snap.spread.unwrap_or(i64::MIN);
        out.write_all(&spread.to_le_bytes()).map_err(ioerr)?;
        out.write_all(&[snap.asks.len() as u8, snap.bids.len() as u8])
            .map_err(ioerr)?;
        for side in [&snap.asks, &snap.bids] {
            for l in 0..depth {
                let (p, q) = side
                    .get(l)
                    .map(|lvl| (lvl.price, lvl.quantity))
                    .unwrap_or((0, 0));
                out.write_all(&p.to_le_bytes()).map_err(ioerr)?;
                out.write_all(&q.to_le_bytes()).map_err(ioerr)?;
            }
        }
    }
    Ok(())
}

pub fn read_snapshots_binary(path: &Path) -> Result<Vec<BookSnapshot>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cursor = std::io::Cursor::new(&bytes);

    let mut magic = [0u8; 8];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("snapshot file truncated".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad snapshot magic".into()));
    }
    let version = read_u16(&mut cursor)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let depth = read_u16(&mut cursor)? as usize;

    let mut snapshots = Vec::new();
    loop {
        let timestamp = match try_read_i64(&mut cursor) {
            Some(ts) => ts,
            None => break,
        };
        let mid_twice = read_i64(&mut cursor)?;
        let spread = read_i64(&mut cursor)?;
        let mut counts = [0u8; 2];
        cursor
            .read_exact(&mut counts)
            .map_err(|_| Error::Checkpoint("snapshot record truncated".into()))?;
        let mut sides = [Vec::new(), Vec::new()];
        for (s, count) in sides.iter_mut().zip(counts) {
            for l in 0..depth {
                let price = read_i64(&mut cursor)?;
                let quantity = read_u64(&mut cursor)?;
                if l < count as usize {
                    s.push(Level { price, quantity });
                }
            }
        }
        let [asks, bids] = sides;
        snapshots.push(BookSnapshot {
            timestamp,
            mid: (mid_twice != i64::MIN).then(|| MidPrice::from_twice(mid_twice)),
            spread: (spread != i64::MIN).then_some(spread),
            asks,
            bids,
        });
    }
    Ok(snapshots)
}

fn read_u16(c: &mut std::io::Cursor<&Vec<u8>>) -> Result<u16> {
    let mut b = [0u8; 2];
    c.read_exact(&mut b)
        .map_err(|_| Error::Checkpoint("snapshot file truncated".into()))?;
    Ok(u16::from_le_bytes(b))
}

fn read_i64(c: &mut std::io::Cursor<&Vec<u8>>) -> Result<i64> {
    let mut b = [0u8; 8];
    c.read_exact(&mut b)
        .map_err(|_| Error::Checkpoint("snapshot record truncated".into()))?;
    Ok(i64::from_le_bytes(b))
}

fn try_read_i64(c: &mut std::io::Cursor<&Vec<u8>>) -> Option<i64> {
    let mut b = [0u8; 8];
    c.read_exact(&mut b).ok()?;
    Some(i64::from_le_bytes(b))
}

fn read_u64(c: &mut std::io::Cursor<&Vec<u8>>) -> Result<u64> {
    let mut b = [0u8; 8];
    c.read_exact(&mut b)
        .map_err(|_| Error::Checkpoint("snapshot record truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}
