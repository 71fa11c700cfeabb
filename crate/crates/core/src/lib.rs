//! Exact finite-sample models of real matrix semigroups and recovery of
//! their structural decomposition.
//!
//! The library builds generative models of matrix semigroups `g(x)`,
//! `x >= 0`, indexed by elements of a finitely generated rational
//! submodule of the reals, samples them, and recovers from the samples
//! the full structural ladder: kernel split, simultaneous primary
//! decomposition, multiplicative Jordan–Chevalley decomposition,
//! generator extraction, and the final classification
//! `g(x) = S(x) exp(Mx)` with `S` an orthogonally conjugated
//! block-rotation semigroup driven by a (possibly non-measurable)
//! additive function.

pub mod cauchy;
pub mod decomp;
pub mod error;
pub mod gaussmarkov;
pub mod gen;
pub mod linalg;
pub mod semigroup;

pub use error::Error;

/// Exact rational scalar used throughout the exact-arithmetic paths.
pub type Rat = num_rational::BigRational;

/// Complex double, used internally by the decomposition engine.
pub type C64 = num_complex::Complex64;

/// Maximum matrix dimension accepted by the kernel.
pub const MAX_DIM: usize = 64;
