//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by coding-space, measure, and operator computations.
#[derive(Debug, Error)]
pub enum Error {
    /// A symbol or branch index lies outside `1..=N`.
    #[error("branch {branch} out of range for alphabet of size {size}")]
    BranchOutOfRange { branch: u32, size: u32 },

    /// A branch index is valid for the alphabet but excluded by the system's
    /// branch restriction.
    #[error("branch {branch} is not present in this system")]
    BranchNotPresent { branch: u32 },

    /// The shift needs at least one symbol to consume.
    #[error("cannot shift the empty word")]
    EmptyWord,

    /// A finite word was expanded past its own length.
    #[error("word of length {len} has no symbol at position {index}")]
    PastEnd { len: usize, index: usize },

    /// The requested quantity needs a metric realization, but the system is
    /// symbolic only.
    #[error("operation requires a metric geometry; this system is symbolic only")]
    UnsupportedGeometry,

    /// The operation is only defined for finite words.
    #[error("operation needs a finite word, got an eventually periodic one")]
    NotFinite,

    /// A point passed to a geometric map lies outside the attractor.
    #[error("point {point} is outside the system's attractor")]
    OutsideDomain { point: String },

    /// A cylinder table cannot be produced at the requested depth because the
    /// refinement model does not determine finer masses.
    #[error("cannot resolve masses at depth {requested}: table is frozen at depth {available}")]
    Resolution { requested: usize, available: usize },

    /// Radon-Nikodym failure: the numerator puts mass where the denominator
    /// has none. `witness` is the offending cylinder word or atom in 0-based
    /// digit form.
    #[error("not absolutely continuous: {} {witness} has positive numerator mass and zero denominator mass", if *.atom { "atom" } else { "cylinder" })]
    NotAbsolutelyContinuous { witness: String, atom: bool },

    /// Weight vectors must be positive and sum to 1.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// A measure table violates a structural invariant (negative mass,
    /// depth mismatch, atom with empty period, ...).
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// The branch maps of an interval system are invalid (non-contractive,
    /// leaving the unit interval, or not tiling it).
    #[error("invalid branch system: {0}")]
    InvalidSystem(String),

    /// Vectors over different base measures cannot be combined.
    #[error("operands have different base measures")]
    BaseMismatch,

    /// The operands live over alphabets of different sizes.
    #[error("alphabet sizes differ: {left} vs {right}")]
    AlphabetMismatch { left: u32, right: u32 },

    /// The index maps of a permutative representation fail injectivity,
    /// disjointness, or totality.
    #[error("invalid permutative representation: {0}")]
    InvalidRep(String),

    /// An index escaped the `i64` range while applying generators.
    #[error("basis index overflow while applying index maps")]
    IndexOverflow,

    /// Malformed textual input (rationals, words, configs, vector files).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
