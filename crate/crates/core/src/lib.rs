//! Iterated function systems on coding spaces, with exact arithmetic.
//!
//! An iterated function system is a finite family of branch maps
//! `tau_1, ..., tau_N` that are right inverses of a single endomorphism
//! `sigma` (`sigma . tau_i = id`). Points of the coding space are infinite
//! symbol sequences; finite words address cylinder sets. This crate makes
//! the standard constructions over such systems executable at finite
//! cylinder resolution:
//!
//! - [`coding`]: alphabets, eventually periodic words, branch/shift actions,
//!   and the address geometry of interval and Cantor realizations.
//! - [`measure`]: measures with exact rational cylinder masses and atoms,
//!   pushforwards under branches and the shift, Radon-Nikodym tables, the
//!   self-similar fixed point of the weighted branch-pushforward map, and a
//!   seeded chaos-game sampler.
//! - [`hilbert`]: the Hilbert space of square densities `phi sqrt(d mu)`,
//!   where the isometries `S_i phi sqrt(d mu) = (phi . sigma) sqrt(d mu . tau_i^-1)`
//!   satisfy the Cuntz relations.
//! - [`l2`]: the concrete `L^2(mu)` picture `S phi = (phi . sigma) sqrt(p)`
//!   for a fixed base measure with absolutely continuous branch pushforwards,
//!   and the isometric embedding into the square-density space.
//! - [`cuntz`]: permutative Cuntz representations on `l^2(Z)`, the
//!   projection-valued measure of cylinder projections, the measures
//!   `E -> |P(E) f|^2` they attach to vectors, and the intertwiner back
//!   onto the square-density space.
//! - [`io`]: JSON/CSV schemas and config parsing shared with the CLI.
//!
//! Cylinder masses are `BigRational` throughout; floating point enters only
//! through density values and square roots, so identities that hold at the
//! level of masses hold exactly.

pub mod coding;
pub mod cuntz;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod l2;
pub mod measure;
pub mod rational;

pub use coding::{Alphabet, Geometry, IfsSystem, Symbol, Word};
pub use cuntz::{IndexMap, PermutativeRep, RepVector};
pub use error::{Error, Result};
pub use hilbert::SquareDensity;
pub use l2::{BranchDensity, L2Vector};
pub use measure::{AtomicPart, CylinderPart, Measure, RefinementModel};

/// Exact scalar for masses and weights.
pub type Rational = num_rational::BigRational;

/// Complex double used for density values and coefficients.
pub type C64 = num_complex::Complex64;
