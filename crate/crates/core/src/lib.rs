//! Exact computations in Neretin groups and related totally disconnected groups.
//!
//! The crate covers the rooted trees `T(d,k)`, almost automorphisms with
//! finitary tails, Haar measure and coset calculus, a convolution algebra of
//! atomic plus locally constant measures, conjugation-orbit certificates,
//! HNN and amalgamated free product normal forms, Burger–Mozes local actions
//! and finite Hecke algebras.

pub mod afp;
pub mod bruhat;
pub mod burger_mozes;
pub mod element;
pub mod error;
pub mod group;
pub mod haar;
pub mod hecke;
pub mod hnn;
pub mod orbit;
pub mod perm;
pub mod portrait;
pub mod selftest;
pub mod tree;

pub use element::{AlmostAutomorphism, Piece, SubgroupClass, TreePair};
pub use error::{Error, Result};
pub use perm::Perm;
pub use portrait::Portrait;
pub use tree::{Address, CompleteAntichain, TreeShape};
