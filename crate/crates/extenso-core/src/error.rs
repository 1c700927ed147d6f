//! Shared error type for the whole crate.
//!
//! Everything fallible funnels into [`Error`]; the variants are grouped
//! roughly by the layer that raises them (parsing, jet arithmetic, flows,
//! checks). Callers that only care about pass/fail can treat any error as a
//! failed check; the CLI renders them verbatim.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Lexical or grammatical error in an expression source string.
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },

    /// A call to something other than the recognized function names.
    #[error("unknown function `{name}` at byte {offset} (supported: ln, exp)")]
    UnknownFunction { name: String, offset: usize },

    /// An identifier that is neither a bound variable nor a declared constant.
    #[error("unbound identifier `{0}`")]
    Unbound(String),

    /// Exponents must evaluate to constants before differentiation.
    #[error("exponent at byte {offset} is not constant: depends on `{name}`")]
    NonConstantExponent { name: String, offset: usize },

    /// Evaluation left the mathematical domain of an operation
    /// (`ln` of a non-positive value, division by zero, fractional power of a
    /// non-positive base, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A point fell outside the open box a field is declared on.
    #[error("point outside declared domain: {0}")]
    OutsideDomain(String),

    /// Structurally incompatible operands (dimension or jet-order mismatch).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A derivative of higher order than the jets carry was requested.
    #[error("unsupported jet order {requested} (maximum {max}): {context}")]
    UnsupportedOrder {
        requested: usize,
        max: usize,
        context: String,
    },

    /// A caller-supplied argument is invalid independent of any point.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An integral curve left the field's domain before the requested time.
    #[error("flow left the field domain near t = {t_exit:.6e} (requested t = {t_requested:.6e})")]
    DomainExit { t_exit: f64, t_requested: f64 },

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t:.6e}; the field may be singular or too stiff")]
    StepSizeUnderflow { t: f64 },

    /// Too many steps without reaching the requested time.
    #[error("step limit exceeded at t = {t:.6e} after {steps} steps")]
    StepLimit { t: f64, steps: usize },

    /// A flow-box chart was requested at a zero of the field.
    #[error("field vanishes at the requested base point (|X(p)| = {norm:.3e}); no flow-box chart exists")]
    SingularPoint { norm: f64 },

    /// Newton iteration for a chart inversion failed to converge.
    #[error("chart inversion did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NewtonDivergence { residual: f64, iterations: usize },

    /// Chart verification found pushforward residuals above tolerance.
    #[error("chart verification failed: pushforward residual {max_residual:.3e} exceeds {allowed:.3e}")]
    ChartVerification { max_residual: f64, allowed: f64 },

    /// Two charts were compared on an empty overlap.
    #[error("chart overlap is empty; transition map is undefined")]
    EmptyOverlap,

    /// The contraction theta(rho) vanished along an integration path.
    #[error("theta(rho) vanishes near {location} (|value| = {value:.3e}); entropy recovery is undefined there")]
    VanishingContraction { location: String, value: f64 },

    /// d(theta / theta(rho)) failed to vanish at quadrature nodes.
    #[error("normalized form is not closed: max d-residual {max_residual:.3e} exceeds {tol:.3e}")]
    ClosednessViolation { max_residual: f64, tol: f64 },

    /// A precondition check for extensivity failed.
    #[error("{what} is not extensive: max residual {max_residual:.3e} exceeds {tol:.3e}")]
    NotExtensive {
        what: String,
        max_residual: f64,
        tol: f64,
    },

    /// A precondition check for integrability failed.
    #[error("form is not integrable: max wedge residual {max_residual:.3e} exceeds {tol:.3e}")]
    NotIntegrable { max_residual: f64, tol: f64 },

    /// Two functions were compared that are not constant multiples.
    #[error("ratio g/f is not constant: mean {mean:.6e}, spread {spread:.3e}")]
    NonConstantRatio { mean: f64, spread: f64 },

    /// Rejection sampling failed to produce enough admissible points.
    #[error("could not draw {requested} admissible samples after {attempts} attempts")]
    SampleExhausted { requested: usize, attempts: usize },

    /// Configuration file problems (CLI layer).
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}
