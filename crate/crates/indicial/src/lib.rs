//! Spectral analysis of symmetric Fuchs-type indicial operators given by
//! matrix pencils `p(sigma) = sum_j a_j sigma^j` with weight `m`.
//!
//! The crate computes, for such a pencil:
//!
//! - the boundary spectrum (indicial roots) with multiplicities and band
//!   classification relative to the lines `Im = 0, -m/2, -m` ([`roots`]);
//! - the spaces of principal parts annihilated by the pencil at each root,
//!   with the nilpotent action of multiplication by `sigma - sigma0` and
//!   the dictionary to singular functions `log^j(x) x^{i sigma0}`
//!   ([`germs`]);
//! - the indefinite residue pairing, sign characteristic, normal-form block
//!   data, and signature ([`forms`]);
//! - the spectral flow of the Hermitian family along the critical line as
//!   an independent route to the signature ([`spectralflow`]);
//! - the finite-dimensional quotient model of the maximal domain with its
//!   generator and Gram form, and the distinguished selfadjoint extensions:
//!   Friedrichs, Krein, and invariant ones ([`extensions`]);
//! - quadrature-based oracles that confirm the residue pairing against
//!   direct integration of the operator ([`oracle`]).

pub mod corpus;
pub mod error;
pub mod extensions;
pub mod forms;
pub mod germs;
pub mod numerics;
pub mod oracle;
pub mod pencil;
pub mod roots;
pub mod spectralflow;

pub use error::{Error, ErrorKind, Result};
pub use numerics::{CMatrix, CVector, Tolerances};
pub use pencil::{star, PencilSpec};
