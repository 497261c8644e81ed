//! Symbolic-numeric verification of correlator coalgebra identities.
//!
//! The library has two halves that meet in the verification suites:
//!
//! - An exact half: cyclic words in punctures and 1-forms over Q with their
//!   shuffle relations and coproduct (`corwords`), the base-point calculus of
//!   star products and corrected elements (`basepoint`), modular complexes
//!   over Z, Z[i], Z[rho] (`modcx`), the Bianchi cell complex in degrees 1-2
//!   (`bianchi`), the generating-series map theta between them (`thetamap`),
//!   and the degeneration map to the projective line (`degen`). All of it is
//!   driven by sparse Gaussian elimination over Q (`exactlin`).
//!
//! - A numeric half: Arakelov and based Green's functions on complex tori and
//!   on P^1 (`ellnum`), and seeded stratified Monte Carlo evaluation of the
//!   plane-trivalent-tree integrals defining correlator functions (`treeint`).
//!
//! The named verification suites live in `suites` and are exposed through the
//! `corlab` binary.

pub mod basepoint;
pub mod bianchi;
pub mod corwords;
pub mod degen;
pub mod ellnum;
pub mod exactlin;
pub mod modcx;
pub mod oint;
pub mod suites;
pub mod thetamap;
pub mod treeint;

pub use exactlin::{Rat, Span, SparseVector};
