//! Numerical certification of fermionic mode de Finetti bounds at desk scale.
//!
//! The crate is organized bottom-up:
//!
//! - [`majorana`]: exact symbolic algebra of Majorana words.
//! - [`fock`]: Jordan-Wigner matrices, partial traces, trace norms.
//! - [`invariance`]: permutation invariance of fermionic states and the
//!   suppression of their locally odd part.
//! - [`definetti`]: convex mixtures of mode product states approximating
//!   reduced states.
//! - [`cumulant`]: even-partition cumulants and the Fourier-mode central
//!   limit theorem.
//! - [`oracle`]: seeded cross-checks against dense matrices.
//! - [`rdm`]: one-particle reduced density matrices.
//! - [`meanfield`]: product-state energy bounds for permutation invariant
//!   Hamiltonians.

pub mod cumulant;
pub mod definetti;
pub mod error;
pub mod even_state;
pub mod fock;
pub mod invariance;
pub mod linalg;
pub mod majorana;
pub mod meanfield;
pub mod oracle;
pub mod rdm;
pub mod report;

pub use error::{Error, Result};
pub use fock::DenseOperator;
pub use majorana::{MajoranaWord, ModeIndex, OperatorExpansion, Sign, SitePermutation, SystemShape};
pub use report::{Relation, VerificationReport};
