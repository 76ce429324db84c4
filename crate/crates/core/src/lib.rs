//! Price formation from order flow.
//!
//! This crate holds the pure numerical pieces: the closed-form mean-field
//! solution (`mfg`), its finite-population counterpart (`finite_pop`), a
//! Monte Carlo engine for the underlying control problem (`sim`), order-flow
//! metrics computed from trades and top-of-book snapshots (`orderflow`), and
//! the regression/diagnostics layer used on market data (`regress`, `adf`,
//! `report`).
//!
//! Everything here is `no_std` with `alloc`. File formats, ingestion and the
//! command-line front end live in the `flowprice` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adf;
pub mod error;
pub mod finite_pop;
pub mod linalg;
pub mod mfg;
pub mod orderflow;
pub mod path;
pub mod regress;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
pub use path::{SampledPath, TimeGrid};
