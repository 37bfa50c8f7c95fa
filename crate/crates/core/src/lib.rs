#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop)] // grid index loops mirror the stencil maths

pub mod bohm;
pub mod error;
pub mod filter;
pub mod grw;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod schrodinger;
pub mod transport;

pub use error::{Error, Result};
