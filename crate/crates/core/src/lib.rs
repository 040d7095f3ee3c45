//! Design and analysis of composite group-formation experiments.
//!
//! Units carrying fixed categorical attributes are randomly partitioned into
//! equal-size groups and then given an external treatment. The pair of
//! interventions is summarized by each unit's *exposure* (own treatment plus
//! the multiset of peer attribute/treatment pairs). Re-randomization happens
//! by permuting an initial assignment with a uniform draw from the stabilizer
//! subgroup of the attribute vector, which induces a stratified completely
//! randomized design on the exposure scale. On top of that engine the crate
//! provides:
//!
//! - conditional (focal-set) and global Fisher randomization tests,
//! - Neymanian difference-in-means estimation with conservative Wald intervals,
//! - power-optimal initial designs via an LP relaxation of an integer program,
//!   with rejection-sampling and pure-random baselines,
//! - a Monte Carlo power-study harness with CSV/SVG reporting.
//!
//! Numeric kernels (`simplex`, `stats`) are generic over the scalar type via
//! `num-traits`; the crate-root aliases pin the default `f64` instantiations.

pub mod design;
pub mod error;
pub mod exposure;
pub mod harness;
pub mod inference;
pub mod io;
pub mod optimal_design;
pub mod population;
pub mod rngutil;
pub mod simplex;
pub mod stats;
pub mod symmetry;

pub use error::{Error, Result};

/// Default scalar type for all statistical and LP computations.
pub type Real = f64;

/// Attribute code (member of the declared finite alphabet).
pub type Attr = u8;

/// Treatment code (member of the declared finite alphabet, binary by default).
pub type Treat = u8;

/// Dense two-phase simplex instantiated at the default scalar.
pub type Simplex = simplex::SimplexSolver<Real>;
