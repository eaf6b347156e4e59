//! Two-dimensional electro-hydrodynamics: two charged species carried by an
//! incompressible fluid in a closed box, coupled through the electric
//! potential. Finite volumes on a staggered grid.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod fluid;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod sim;
pub mod steady;
pub mod transport;

pub use error::{EhdError, Result};
pub use grid::{GridSpec, ScalarField, VectorField};
