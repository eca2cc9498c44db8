//! Trace-driven simulation of multi-level caches built from SRAM, gain-cell
//! eDRAM, conventional eDRAM and STT-RAM arrays.

pub mod cache;
pub mod catalog;
pub mod config;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod refresh;
pub mod report;
pub mod sim;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
