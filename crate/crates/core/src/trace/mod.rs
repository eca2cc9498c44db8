//! Memory-access traces: file formats, synthetic generators and per-core
//! interleaving.
//!
//! Text format:
//!
//! ```text
//! HYTRACE v1 cores=<n> data=<0|1>
//! # optional description lines
//! <core> <gap_cycles> <R|W|I> 0x<hex address> [<128 hex digits>]
//! ```
//!
//! The payload column is present on every record of a data-bearing trace and
//! on none otherwise. `gap_cycles` is the issue delay after the previous
//! record of the same core completes. Lines starting with `#` are comments.
//!
//! The binary twin starts with the 8-byte magic `HYTRACEB`, followed by
//! little-endian `u32 version`, `u32 cores`, `u8 data`, `u32 description
//! length` and the UTF-8 description. Each record is a `u16` body length and
//! a body of `u32 core`, `u64 gap`, `u8 op` (0 read, 1 write, 2 ifetch),
//! `u64 addr` and, for data-bearing traces, the 64 payload bytes in the same
//! order as the hex digits of the text form.

mod format;
mod gen;
mod interleave;

pub use format::{
    open_trace, read_trace, write_binary, write_text, BinaryReader, TextReader, TraceStream, BINARY_MAGIC,
};
pub use gen::{generate, generate_cores, GenKind, GenParams, TraceGen, CORE_ADDR_SHIFT};
pub use interleave::{interleave, Interleave};

use crate::cache::Line;

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceOp {
    Read,
    Write,
    Ifetch,
}

impl TraceOp {
    pub fn code(self) -> char {
        match self {
            TraceOp::Read => 'R',
            TraceOp::Write => 'W',
            TraceOp::Ifetch => 'I',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceHeader {
    pub version: u32,
    pub cores: u32,
    pub data_bearing: bool,
    pub description: String,
}

impl TraceHeader {
    pub fn new(cores: u32, data_bearing: bool) -> TraceHeader {
        TraceHeader { version: TRACE_VERSION, cores, data_bearing, description: String::new() }
    }

    pub fn with_description(mut self, d: impl Into<String>) -> TraceHeader {
        self.description = d.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub core: u32,
    pub gap_cycles: u64,
    pub op: TraceOp,
    pub addr: u64,
    pub payload: Option<Line>,
}
