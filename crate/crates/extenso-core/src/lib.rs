//! Numerical exterior calculus for extensivity analysis on open boxes of R^n.
//!
//! The crate verifies, rather than assumes, the structures that make a
//! thermodynamic state space behave extensively: degree-1 homogeneous
//! functions and their scaling flows, differential forms invariant under
//! those flows, transversality of contact forms to the scaling field, and
//! entropy reconstruction by path integration. Everything reduces to exact
//! jet arithmetic plus a controlled-accuracy ODE integrator; every check
//! reports a residual against an explicit tolerance instead of a bare bool.
//!
//! Layering, bottom to top:
//!
//! * [`expr`] — a small smooth expression language (`+ - * / ^ ln exp`);
//! * [`diffcalc`] — jets to order 3, scalar fields, smooth maps;
//! * [`exterior`] — k-forms, wedge, d, contraction, Lie derivatives,
//!   pullbacks;
//! * [`flows`] — integral curves with variational equations, flow-box and
//!   scaling-adapted charts, singularity classification;
//! * [`extensivity`] — residual definitions, sampling, check reports,
//!   entropy recovery;
//! * [`models`] — ready-made gas models, metric structures, and the
//!   counterexamples that delimit the theory.

pub mod diffcalc;
pub mod error;
pub mod expr;
pub mod extensivity;
pub mod exterior;
pub mod flows;
pub mod models;

pub use diffcalc::{DomainBox, Jet, ScalarField, SmoothMap, MAX_ORDER};
pub use error::{Error, Result};
pub use expr::{Binding, Expression};
pub use extensivity::{CheckReport, SampleSpec, Verdict, Witness};
pub use exterior::{FormValue, KForm, MultiIndex, SymTensor2Field, VectorField};
pub use flows::{Chart, FlowResult, SingularityClass};
pub use models::ThermoSystem;
