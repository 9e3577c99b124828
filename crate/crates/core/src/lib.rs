#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Resonances of a Friedrichs model (a continuum `p^2` coupled to one bound
//! state at energy 1 through a form factor `phi`) under static and
//! time-periodic electric fields.
//!
//! Static field: resonances are zeros of the continued function
//! `F(z) = 1 - z - (phi, (p^2 + f x - z)^{-1} phi)`, see [`resolvent`] and
//! [`rootfind`]. Periodic field: resonances are eigenvalues of a truncated,
//! complex-dilated Floquet matrix, see [`floquet`].

pub mod error;
pub mod floquet;
pub mod formfactor;
pub mod oracle;
pub mod quadrature;
pub mod resolvent;
pub mod rootfind;
pub mod sweep;

pub use error::{Error, Result};
pub use formfactor::{DilationParameter, FormFactor, Term};
pub use resolvent::{ResolventEvaluator, ResolventSettings};
pub use rootfind::{find_zeros, Resonance, RootSettings, Window};
