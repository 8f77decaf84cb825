//! Portable checkpoint encoding.
//!
//! ```text
//! magic            8 bytes   "TKCHKPT\0"
//! version          u64
//! body length      u64       bytes between this field and the checksum
//! body
//!   iteration, levels, grid_points, virtual_time_ns, last_event   u64 x 5
//!   total_checkpoint_ns, total_elapsed_ns                           u64 x 2
//!   last_start: flag u64 (0/1) + u64, last_end: flag + u64
//!   checkpoints_taken                                               u64
//!   timer count u64, then per timer:
//!     name (u64 length + UTF-8), clock count u64, then per clock:
//!       name (u64 length + UTF-8), value count u64, values u64...
//! checksum         u64       CRC-32 of every preceding byte, zero-extended
//! ```
//!
//! Every integer is little-endian and 64 bits wide.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::CheckpointAccounting;
use crate::timer::{ClockReading, TimerReading};

pub const MAGIC: [u8; 8] = *b"TKCHKPT\0";
pub const FORMAT_VERSION: u64 = 1;

const HEADER_LEN: usize = 8 + 8 + 8;
const CHECKSUM_LEN: usize = 8;

/// `checkpoint.it_<iteration>.chk`
pub fn checkpoint_file_name(iteration: u64) -> String {
    format!("checkpoint.it_{iteration}.chk")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("checkpoint data is truncated")]
    Truncated,
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u64),
    #[error("checkpoint checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u64, computed: u64 },
    #[error("checkpoint body is malformed: {0}")]
    Malformed(&'static str),
}

/// Synthetic simulation state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SimulationState {
    pub iteration: u64,
    pub levels: u64,
    pub grid_points: u64,
    /// Virtual time since simulation start.
    pub virtual_time_ns: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckpointFile {
    pub state: SimulationState,
    /// Driver-defined code for what happened at `state.iteration`.
    pub last_event: u64,
    pub accounting: CheckpointAccounting,
    /// Timer values by timer name, for restoring the timer database.
    pub timers: Vec<(String, TimerReading)>,
}

impl CheckpointFile {
    pub fn encode(&self) -> Vec<u8> {
        let mut body = Writer::default();
        let s = &self.state;
        for v in [s.iteration, s.levels, s.grid_points, s.virtual_time_ns, self.last_event] {
            body.u64(v);
        }
        let a = &self.accounting;
        body.u64(a.total_checkpoint_ns());
        body.u64(a.total_elapsed_ns());
        body.opt(a.last_checkpoint_start_ns());
        body.opt(a.last_checkpoint_end_ns());
        body.u64(a.checkpoints_taken());
        body.u64(self.timers.len() as u64);
        for (name, reading) in &self.timers {
            body.str(name);
            body.u64(reading.clocks.len() as u64);
            for c in &reading.clocks {
                body.str(&c.clock);
                body.u64(c.values.len() as u64);
                c.values.iter().for_each(|&v| body.u64(v));
            }
        }

        let mut out = Vec::with_capacity(HEADER_LEN + body.0.len() + CHECKSUM_LEN);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(body.0.len() as u64).to_le_bytes());
        out.extend_from_slice(&body.0);
        let crc = crc32fast::hash(&out) as u64;
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 8 {
            return Err(FormatError::Truncated);
        }
        if bytes[..8] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated);
        }
        let version = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let body_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let expected = (HEADER_LEN as u64)
            .checked_add(body_len)
            .and_then(|n| n.checked_add(CHECKSUM_LEN as u64))
            .ok_or(FormatError::Malformed("body length overflow"))?;
        if (bytes.len() as u64) < expected {
            return Err(FormatError::Truncated);
        }
        if bytes.len() as u64 > expected {
            return Err(FormatError::Malformed("trailing bytes"));
        }
        let split = bytes.len() - CHECKSUM_LEN;
        let stored = u64::from_le_bytes(bytes[split..].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..split]) as u64;
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }

        let mut r = Reader(&bytes[HEADER_LEN..split]);
        let state = SimulationState {
            iteration: r.u64()?,
            levels: r.u64()?,
            grid_points: r.u64()?,
            virtual_time_ns: r.u64()?,
        };
        let last_event = r.u64()?;
        let accounting = CheckpointAccounting::from_parts(r.u64()?, r.u64()?, r.opt()?, r.opt()?, r.u64()?)
            .ok_or(FormatError::Malformed("inconsistent checkpoint accounting"))?;
        let n_timers = r.len()?;
        let mut timers = Vec::with_capacity(n_timers);
        for _ in 0..n_timers {
            let name = r.str()?;
            let n_clocks = r.len()?;
            let mut clocks = Vec::with_capacity(n_clocks);
            for _ in 0..n_clocks {
                let clock = r.str()?;
                let n_values = r.len()?;
                let values = (0..n_values).map(|_| r.u64()).collect::<Result<_, _>>()?;
                clocks.push(ClockReading { clock, values });
            }
            timers.push((name, TimerReading { clocks }));
        }
        if !r.0.is_empty() {
            return Err(FormatError::Malformed("unread bytes in body"));
        }
        Ok(Self {
            state,
            last_event,
            accounting,
            timers,
        })
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn opt(&mut self, v: Option<u64>) {
        self.u64(v.is_some() as u64);
        self.u64(v.unwrap_or(0));
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FormatError> {
        if self.0.len() < n {
            return Err(FormatError::Malformed("field runs past end of body"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A count of items that each take at least 8 bytes.
    fn len(&mut self) -> Result<usize, FormatError> {
        let n = self.u64()?;
        if n > (self.0.len() / 8) as u64 {
            return Err(FormatError::Malformed("count exceeds remaining data"));
        }
        Ok(n as usize)
    }

    fn opt(&mut self) -> Result<Option<u64>, FormatError> {
        let flag = self.u64()?;
        let v = self.u64()?;
        match flag {
            0 => Ok(None),
            1 => Ok(Some(v)),
            _ => Err(FormatError::Malformed("bad option flag")),
        }
    }

    fn str(&mut self) -> Result<String, FormatError> {
        let n = self.u64()?;
        if n > self.0.len() as u64 {
            return Err(FormatError::Malformed("string runs past end of body"));
        }
        let bytes = self.take(n as usize)?;
        core::str::from_utf8(bytes)
            .map(String::from)
            .map_err(|_| FormatError::Malformed("string is not UTF-8"))
    }
}
