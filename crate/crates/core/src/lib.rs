//! Capacitary solutions of ∇·(∇f(∇u)) = 0 on planar ring domains, the
//! boundary measures they induce, and dimension estimates for those
//! measures.

// Guards are written `!(x > 0.0)` so that NaN is rejected too; dense
// kernels index several arrays per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod integrand;
pub mod linalg;
pub mod measure;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use integrand::{quasiconformal_k, AngularProfile, Integrand};
pub use linalg::{Mat2, Vec2};
