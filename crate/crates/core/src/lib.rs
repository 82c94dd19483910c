//! Finite-volume toolkit for heterogeneous porous media on structured grids.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod benchmarks;
pub mod constitutive;
pub mod coupling;
pub mod error;
pub mod flow;
pub mod geostat;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod transport;

pub use error::{Error, Result};
