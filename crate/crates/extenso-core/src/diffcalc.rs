//! Truncated Taylor expansions (jets) and the smooth objects built on them.
//!
//! A [`Jet`] carries a value together with exact partial derivatives up to
//! order 3, propagated through arithmetic by the chain rule — no finite
//! differencing anywhere. [`ScalarField`] wraps either a parsed expression
//! or a native closure behind one jet-in/jet-out interface, which is what
//! makes composition, coefficient arithmetic on differential forms, and
//! flow-backed chart maps all look the same downstream. [`SmoothMap`]
//! bundles scalar components into a map between open boxes.

mod field;
mod jet;

pub use field::{DomainBox, ScalarField, SmoothMap};
pub use jet::{Jet, MAX_ORDER};

use crate::error::Result;

/// Jet of `f` at `p` up to `order` (≤ 3). Convenience alias for
/// [`ScalarField::jet_at`].
pub fn jet_of(f: &ScalarField, p: &[f64], order: usize) -> Result<Jet> {
    f.jet_at(p, order)
}

/// Jacobian matrix of `map` at `p`, target components along rows.
pub fn jacobian(map: &SmoothMap, p: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    map.jacobian(p)
}

/// Symmetric Hessian matrix of `f` at `p`.
pub fn hessian(f: &ScalarField, p: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    f.hessian_at(p)
}
