//! Operator-space tensor norms for finite tuples of complex matrices.
//!
//! The crate pairs two engines that bracket the same quantity from opposite
//! sides:
//!
//! * an upper-bound engine ([`norms::dec_norm`]) that solves the
//!   factorization semidefinite program and recovers an explicit
//!   factorization `x_i = a_i b_i`;
//! * a lower-bound engine ([`norms::unitary_sup`]) that maximizes
//!   `‖Σ u_i ⊗ x_i‖` over tuples of unitaries.
//!
//! Agreement of the two is what [`norms::min_norm_estimate`] reports. The
//! [`dilation`] module extends unital maps from unitary spans to completely
//! positive maps and checks that unitary images force multiplicativity, and
//! [`verify`] bundles the property suites that tie everything together.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature pulls in
//! `std` and rayon and runs independent restarts concurrently; results do not
//! depend on it.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod dilation;
pub mod error;
pub mod matkit;
pub mod norms;
mod par;
pub mod sdp;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
pub use matkit::{CMatrix, C64};

/// Version string embedded in reports and cache keys.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
