//! Numerical tools for the prescribed Ricci curvature problem on compact
//! homogeneous spaces with pairwise inequivalent isotropy summands.

// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod invariants;
pub mod mountainpass;
pub mod search;
pub mod space;

pub use error::{Error, Result};
