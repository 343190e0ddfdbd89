//! Numerical laboratory for matrix-valued Poincaré inequalities and matrix
//! Bernstein concentration over strong Rayleigh subset measures.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measures`] | dense measures on `{0,1}^n`, conditioning, covering couplings, SCP check, SR families |
//! | [`matrix`] | symmetric-matrix functions, PSD order, Schatten norms, trace-inequality checkers |
//! | [`chains`] | reversible generators, projection/restriction decompositions, χ, the flip-swap walk construction |
//! | [`functional`] | matrix variance and Dirichlet forms, spectral gaps, matrix Poincaré checks |
//! | [`concentration`] | oscillation, trace MGFs, the doubling induction, tail bounds, comparison with the martingale bound |
//! | [`samplers`] | exact samplers (alias table, Wilson, projection DPP) and empirical tails |
//! | [`io`] | JSON and CSV formats |
//!
//! Every state is a bitmask ([`Mask`]); bit `i` is coordinate `i` of the cube
//! (element `i + 1` of the ground set).

pub mod chains;
pub mod concentration;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod functional;
pub mod io;
pub mod matrix;
pub mod measures;
pub mod random;
pub mod samplers;

pub use error::{Error, Result};

/// A subset of the ground set, bit `i` set iff element `i` is present.
pub type Mask = u64;
