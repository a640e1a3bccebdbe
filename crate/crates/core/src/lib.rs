//! 1-D numerical laboratory for divergence-form elliptic operators:
//! principal eigenvalues under mixed Dirichlet/Robin conditions, a
//! generalized Picone identity checker, pseudo-arclength continuation of
//! positive solution branches of Lu = λu − a(x)f(u), and coexistence-state
//! analysis for diffusive symbiotic and competitive Lotka-Volterra systems.

// stencil code indexes several arrays per loop; enumerate() buys nothing here
#![allow(clippy::needless_range_loop)]
// !(x > 0.0) deliberately rejects NaN, x <= 0.0 would not
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod lotka_volterra;
pub mod picone;
pub mod scalar_branch;
pub mod util;

pub use error::{Error, Result};
