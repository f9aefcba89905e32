//! Cycle-approximate, energy-accounting simulator of a hybrid
//! analog/digital processing-using-memory accelerator.
//!
//! The chip is a grid of hybrid compute tiles (HCTs). Each tile contains an
//! analog compute element (ACE: 64 crossbars doing current-summed MVM behind
//! SAR or ramp ADCs) and a digital compute element (DCE: 64 bit-pipelines of
//! NOR-capable arrays), joined by a transfer network and an arbiter that lets
//! the same arrays serve either domain.
//!
//! Modules, bottom up:
//! - [`fixed`], [`slicing`]: number formats and bit-slicing/striping layouts
//! - [`cost`], [`config`]: energy/latency constants and run configuration
//! - [`dce`]: NOR-microop pipelines and the vector macro library
//! - [`ace`]: conductance arrays, noise proxies, ADC models
//! - [`hct`]: the tile — arbiter, vACore MVM engine, transfers
//! - [`chip`]: many tiles plus the instruction front ends and the user ISA
//! - [`apps`]: AES-128, a tiny CNN, a tiny transformer encoder
//! - [`report`]: run reports, design-space sweep, ADC study

pub mod ace;
pub mod apps;
pub mod chip;
pub mod config;
pub mod cost;
pub mod dce;
pub mod error;
pub mod fixed;
pub mod hct;
pub mod report;
pub mod slicing;
pub mod trace;

pub use error::{Result, SimError};
