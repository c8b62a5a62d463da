//! Intrinsic reduced-order velocity observer for geodesic flow.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod builtin;
pub mod error;
pub mod manifold;
pub mod observer;
pub mod scenario;

pub use error::{GeoError, Result};
