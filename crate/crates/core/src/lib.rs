//! A non-isotropic random walk on words over {1, 2, 3} whose Martin
//! boundary is the Sierpinski gasket.
//!
//! The crate computes hitting probabilities through an exact recursion and
//! through sparse linear solves, builds the associated 3x3 transfer
//! products, evaluates Green functions and Martin kernels, and derives the
//! Martin metric and the three minimal harmonic functions. Every quantity
//! can be cross-checked against a seeded Monte Carlo simulator.

pub mod boundary;
pub mod graph;
pub mod interval;
pub mod kernel;
pub mod linalg;
pub mod matrices;
pub mod potential;
pub mod recursion;
pub mod scalar;
pub mod words;

pub use kernel::{ChainParams, KernelChoice, Mode, ParamError};
pub use scalar::{Rational, Scalar};
pub use words::{AnyWord, BoundaryWord, FiniteWord, Point2D};
