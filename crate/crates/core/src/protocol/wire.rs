//! `.fqs` binary encoding of silo messages, plus a JSON mirror.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "FQS1"
//! u16 silo-id length, UTF-8 silo id
//! u32 k, f64 trim_epsilon
//! u16 group count
//! per group: u16 label length, UTF-8 label, u64 count, k x f64 values
//! ```
//!
//! Decoding rejects truncated input, trailing bytes and unknown versions,
//! and re-validates the grid and every sketch.

use serde::{Deserialize, Serialize};

use super::{GroupEntry, SiloMessage};
use crate::error::{Error, Result};
use crate::sketch::{GridSpec, QuantileSketch};

pub const MAGIC: &[u8; 4] = b"FQS1";

pub fn encode_message(msg: &SiloMessage) -> Result<Vec<u8>> {
    let k = msg.grid.k();
    let mut out = Vec::with_capacity(32 + msg.groups.len() * (8 * k + 16));
    out.extend_from_slice(MAGIC);
    put_str(&mut out, &msg.silo_id, "silo id")?;
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&msg.grid.trim_epsilon().to_le_bytes());
    let groups = u16::try_from(msg.groups.len())
        .map_err(|_| Error::InvalidParameter(format!("{} groups exceed the u16 limit", msg.groups.len())))?;
    out.extend_from_slice(&groups.to_le_bytes());
    for entry in &msg.groups {
        put_str(&mut out, &entry.label, "group label")?;
        out.extend_from_slice(&entry.count().to_le_bytes());
        for v in entry.sketch.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::InvalidParameter(format!("{what} is longer than {} bytes", u16::MAX)))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::MalformedMessage(format!("truncated {what} at byte {}", self.pos))
        })?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::MalformedMessage(format!("{what} is not UTF-8")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_message(bytes: &[u8]) -> Result<SiloMessage> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.array::<4>("magic")?;
    if &magic != MAGIC {
        if &magic[..3] == b"FQS" {
            return Err(Error::UnsupportedVersion(magic[3] as char));
        }
        return Err(Error::MalformedMessage("bad magic".into()));
    }
    let silo_id = r.string("silo id")?;
    let k = r.u32("k")? as usize;
    let eps = r.f64("trim epsilon")?;
    let grid = GridSpec::trimmed(k, eps)?;
    let count = r.u16("group count")? as usize;
    let mut groups = Vec::with_capacity(count.min(r.remaining() / 8));
    for _ in 0..count {
        let label = r.string("group label")?;
        let n = r.u64("group count")?;
        let needed = k
            .checked_mul(8)
            .ok_or_else(|| Error::MalformedMessage("k overflows the message size".into()))?;
        let raw = r.take(needed, "sketch values")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        groups.push(GroupEntry {
            label,
            sketch: QuantileSketch::new(grid, values, n)?,
        });
    }
    if r.remaining() != 0 {
        return Err(Error::MalformedMessage(format!("{} trailing bytes", r.remaining())));
    }
    SiloMessage::new(silo_id, grid, groups)
}

#[derive(Serialize, Deserialize)]
pub(super) struct MessageDoc {
    silo_id: String,
    grid: GridSpec,
    groups: Vec<GroupDoc>,
}

#[derive(Serialize, Deserialize)]
struct GroupDoc {
    label: String,
    count: u64,
    values: Vec<f64>,
}

impl TryFrom<MessageDoc> for SiloMessage {
    type Error = Error;

    fn try_from(doc: MessageDoc) -> Result<Self> {
        let groups = doc
            .groups
            .into_iter()
            .map(|g| {
                Ok(GroupEntry {
                    label: g.label,
                    sketch: QuantileSketch::new(doc.grid, g.values, g.count)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SiloMessage::new(doc.silo_id, doc.grid, groups)
    }
}

impl From<SiloMessage> for MessageDoc {
    fn from(m: SiloMessage) -> Self {
        MessageDoc {
            silo_id: m.silo_id,
            grid: m.grid,
            groups: m
                .groups
                .into_iter()
                .map(|e| GroupDoc {
                    count: e.count(),
                    label: e.label,
                    values: e.sketch.quantiles().values().to_vec(),
                })
                .collect(),
        }
    }
}

pub fn to_json(msg: &SiloMessage) -> String {
    serde_json::to_string_pretty(msg).expect("messages always serialize")
}

pub fn from_json(text: &str) -> Result<SiloMessage> {
    serde_json::from_str(text).map_err(|e| Error::MalformedMessage(e.to_string()))
}
