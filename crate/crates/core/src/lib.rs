//! Multi-party coherent-state fingerprinting networks built from balanced beam splitters.
//!
//! `qfnet-core` models a referee that interferes `N = 2^s` weak coherent pulse trains in a
//! binary tree of 50/50 beam splitters and counts clicks on `N` detectors. From those counts
//! it decides the full equality relationship among the senders' messages (a set partition),
//! and from that the all-equal and exists-equal predicates.
//!
//! The crate is `no_std` (it needs `alloc`) and has no IO. It provides:
//!
//! - [`relationship`]: set partitions, canonical labels, worst-case codeword pattern weights.
//! - [`optics`]: the exact field transfer of the splitter tree, used as a brute-force oracle.
//! - [`probmodel`]: closed-form per-pulse click probabilities (symmetric and asymmetric
//!   channels, two-bit phase encoding, finite interference visibility).
//! - [`stats`]: binomial/Poisson count tails, threshold selection and the protocol error
//!   probability.
//! - [`optimizer`]: photon-budget minimization under an error constraint.
//! - [`decision`]: the referee's lookup tables and adaptive position-swap schedule.
//! - [`complexity`]: quantum and classical communication-complexity accounting.
//! - [`montecarlo`]: seeded pulse-level simulation of the whole protocol.
//!
//! ```
//! use qfnet_core::relationship::Relationship;
//! use qfnet_core::decision::{resolve_f_r, Resolution, RunOutcome};
//!
//! let r1: RunOutcome = "011".parse().unwrap();
//! let r2: RunOutcome = "110".parse().unwrap();
//! match resolve_f_r(&[r1, r2]).unwrap() {
//!     Resolution::Resolved(d) => {
//!         assert_eq!(d.f_r, 12);
//!         assert_eq!(d.relationship, "AABA".parse::<Relationship>().unwrap());
//!     }
//!     other => panic!("unexpected {other:?}"),
//! }
//! ```
#![no_std]
// `!(x <= y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod numeric;

pub mod complexity;
pub mod decision;
pub mod montecarlo;
pub mod optics;
pub mod optimizer;
pub mod params;
pub mod probmodel;
pub mod relationship;
pub mod stats;

pub use error::{Error, Result};
pub use params::{ChannelModel, CodeLength, Encoding, Pairing, ProtocolParams, RunConfig};
pub use relationship::Relationship;
