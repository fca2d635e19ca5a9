//! Elasticity and plasticity of periodic weighted graphs.
//!
//! A *net* is a periodic graph realized with straight edges in
//! Euclidean space, stored by its finite quotient: vertex orbits,
//! edge orbits with integer lattice offsets, and non-negative weights.
//! Treating edges as zero-rest-length springs, the crate computes
//!
//! - harmonic and standard realizations via the reduced weighted
//!   graph Laplacian ([`solver`]),
//! - tension and stress tensors, uniaxial extension profiles, Young's
//!   modulus, and permanent strain ([`mechanics`]),
//! - threshold-triggered contraction and splitting moves ([`moves`]),
//! - fast and slow deformation runs with event detection, stress-strain
//!   curves, and the energy loss ratio ([`deform`]),
//! - weight-variation laws and blending analytics ([`analysis`]).
//!
//! ```
//! use netelast::net::{lattice_preset, LatticePreset};
//! use netelast::solver::{harmonic_realize, energy, global_tension};
//!
//! let (graph, period) = lattice_preset(&LatticePreset::Hexagonal {
//!     l: 1.0,
//!     w0: 1.0,
//!     w1: 1.0,
//! })?;
//! let realization = harmonic_realize(&graph, &period)?;
//! assert!((energy(&graph, &realization) - 3.0).abs() < 1e-12);
//! let tension = global_tension(&graph, &realization);
//! assert_eq!(tension.trace(), energy(&graph, &realization));
//! # Ok::<(), netelast::Error>(())
//! ```

pub mod analysis;
pub mod deform;
pub mod error;
pub mod linalg;
pub mod mechanics;
pub mod moves;
pub mod net;
pub mod solver;

pub use error::{Error, Result};
