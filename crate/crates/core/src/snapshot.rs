//! Binary field snapshots.
//!
//! Layout (all little-endian), 40-byte header followed by the payload:
//!
//! | offset | size | content                       |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"VPMF"`               |
//! | 4      | 4    | format version (`u32`, = 1)   |
//! | 8      | 4    | dimension `d` (`u32`)         |
//! | 12     | 4    | nodes per axis `n` (`u32`)    |
//! | 16     | 8    | `ε` (`f64`)                   |
//! | 24     | 8    | time `t` (`f64`)              |
//! | 32     | 8    | step index (`u64`)            |
//! | 40     | 8n^d | values, row-major, last axis fastest |

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};

pub const MAGIC: [u8; 4] = *b"VPMF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: ScalarField,
    pub eps: f64,
    pub t: f64,
    pub step: u64,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let grid = self.field.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(grid.d() as u32).to_le_bytes());
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
        out.extend_from_slice(&self.eps.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        for v in self.field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let grid = GridSpec::new(u32_at(8) as usize, u32_at(12) as usize)?;
        let eps = f64_at(16);
        let t = f64_at(24);
        let step = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != 8 * grid.len() {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                8 * grid.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Snapshot {
            field: ScalarField::new(grid, values)?,
            eps,
            t,
            step,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
