//! Extensivity and homogeneity checks: residual definitions, deterministic
//! sampling, pass/fail reports, and entropy recovery along paths.
//!
//! Every check follows one pattern: evaluate a residual that vanishes
//! exactly when the property holds, over a deterministic sample of points,
//! and report the worst offenders against an explicit tolerance. Residuals
//! come in dual pairs on purpose — the infinitesimal form (a jet identity,
//! e.g. `df(ρ) = f`) and the integrated form (a flow identity, e.g.
//! `f(λp) = λf(p)`) — so each check's two routes cross-validate the other's
//! machinery.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcalc::{DomainBox, ScalarField, SmoothMap};
use crate::error::{Error, Result};
use crate::exterior::{
    derivative_form, exterior_derivative, interior_form, lie_derivative_form, pullback_value,
    FormValue, KForm, MultiIndex, VectorField,
};
use crate::flows::{flow, scale_state, Chart};

/// Scaling factors used by the integrated (flow-based) extensivity tests.
pub const DEFAULT_LAMBDAS: [f64; 4] = [0.5, 0.9, 1.1, 2.0];

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Where and how a check draws its evaluation points.
///
/// Points are drawn uniformly from a bounded box with a seeded generator,
/// so a spec with the same seed always produces the same points. Explicit
/// points are prepended and validated; an optional predicate restricts
/// sampling to a sub-region (rejection sampling).
#[derive(Clone)]
pub struct SampleSpec {
    domain: DomainBox,
    count: usize,
    seed: u64,
    explicit: Vec<Vec<f64>>,
    predicate: Option<Predicate>,
}

impl fmt::Debug for SampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleSpec")
            .field("domain", &self.domain)
            .field("count", &self.count)
            .field("seed", &self.seed)
            .field("explicit", &self.explicit.len())
            .field("predicate", &self.predicate.is_some())
            .finish()
    }
}

impl SampleSpec {
    pub fn new(domain: DomainBox, count: usize, seed: u64) -> SampleSpec {
        SampleSpec {
            domain,
            count,
            seed,
            explicit: Vec::new(),
            predicate: None,
        }
    }

    /// Prepend explicit evaluation points (validated by [`points`][Self::points]).
    pub fn with_explicit(mut self, points: Vec<Vec<f64>>) -> SampleSpec {
        self.explicit = points;
        self
    }

    /// Restrict sampling to points satisfying `pred`.
    pub fn with_predicate(
        mut self,
        pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> SampleSpec {
        self.predicate = Some(Arc::new(pred));
        self
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materialize the evaluation points: explicit ones first, then `count`
    /// seeded uniform draws (rejection-sampled against the predicate).
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.domain.dim();
        let mut out = Vec::with_capacity(self.explicit.len() + self.count);
        for p in &self.explicit {
            if !self.domain.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "explicit sample point {p:?} lies outside the sampling box"
                )));
            }
            if let Some(pred) = &self.predicate {
                if !pred(p) {
                    return Err(Error::InvalidArgument(format!(
                        "explicit sample point {p:?} fails the sampling predicate"
                    )));
                }
            }
            out.push(p.clone());
        }
        if self.count == 0 {
            return Ok(out);
        }
        if !self.domain.is_bounded() {
            return Err(Error::InvalidArgument(
                "sampling requires a bounded box; restrict the domain".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let max_attempts = self.count.saturating_mul(1000).max(1000);
        let mut attempts = 0usize;
        let mut drawn = 0usize;
        while drawn < self.count {
            if attempts >= max_attempts {
                return Err(Error::SampleExhausted {
                    requested: self.count,
                    attempts,
                });
            }
            attempts += 1;
            let p: Vec<f64> = (0..n)
                .map(|i| {
                    let (a, b) = (self.domain.lo()[i], self.domain.hi()[i]);
                    a + rng.gen::<f64>() * (b - a)
                })
                .collect();
            if !self.domain.contains(&p) {
                continue; // boundary draw (measure zero, but stay strict)
            }
            if let Some(pred) = &self.predicate {
                if !pred(&p) {
                    continue;
                }
            }
            out.push(p);
            drawn += 1;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// One offending (or representative) sample point.
#[derive(Debug, Clone)]
pub struct Witness {
    pub point: Vec<f64>,
    pub residual: f64,
}

/// Outcome of one check over a sample: worst residual versus tolerance,
/// with up to five witnesses for diagnosis.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub note: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Stable machine-readable one-liner (`key=value` fields).
    pub fn to_record(&self) -> String {
        let mut s = format!(
            "check={} verdict={} samples={} skipped={} max_residual={} tol={}",
            self.name,
            match self.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
            },
            self.samples,
            self.skipped,
            fmt_float(self.max_residual),
            fmt_float(self.tol),
        );
        for (i, w) in self.witnesses.iter().enumerate() {
            let coords: Vec<String> = w.point.iter().map(|c| fmt_float(*c)).collect();
            s.push_str(&format!(
                " witness{}=[{}]:{}",
                i,
                coords.join(","),
                fmt_float(w.residual)
            ));
        }
        if let Some(note) = &self.note {
            s.push_str(" note=\"");
            s.push_str(&note.replace('"', "'"));
            s.push('"');
        }
        s
    }
}

/// Deterministic shortest-roundtrip float formatting for records.
fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        write!(
            f,
            "[{tag}] {}: max residual {:.3e} vs tol {:.3e} ({} samples",
            self.name, self.max_residual, self.tol, self.samples
        )?;
        if self.skipped > 0 {
            write!(f, ", {} skipped", self.skipped)?;
        }
        write!(f, ")")?;
        if self.verdict == Verdict::Fail {
            if let Some(w) = self.witnesses.first() {
                let coords: Vec<String> = w.point.iter().map(|c| format!("{c:.6}")).collect();
                write!(f, "; worst at [{}]", coords.join(", "))?;
            }
        }
        if let Some(note) = &self.note {
            write!(f, " — {note}")?;
        }
        Ok(())
    }
}

pub(crate) struct ReportBuilder {
    name: String,
    tol: f64,
    samples: usize,
    skipped: usize,
    witnesses: Vec<Witness>,
    note: Option<String>,
}

impl ReportBuilder {
    pub fn new(name: &str, tol: f64) -> ReportBuilder {
        ReportBuilder {
            name: name.to_string(),
            tol,
            samples: 0,
            skipped: 0,
            witnesses: Vec::new(),
            note: None,
        }
    }

    pub fn record(&mut self, point: &[f64], residual: f64) {
        self.samples += 1;
        self.witnesses.push(Witness {
            point: point.to_vec(),
            residual,
        });
        self.witnesses
            .sort_by(|a, b| b.residual.partial_cmp(&a.residual).unwrap_or(std::cmp::Ordering::Equal));
        self.witnesses.truncate(8);
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn note(&mut self, note: String) {
        self.note = Some(note);
    }

    pub fn finish(mut self) -> CheckReport {
        let max_residual = if self.samples == 0 {
            f64::INFINITY
        } else {
            self.witnesses.first().map(|w| w.residual).unwrap_or(0.0)
        };
        let verdict = if self.samples > 0 && max_residual <= self.tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        if self.samples == 0 && self.note.is_none() {
            self.note = Some("no sample point could be evaluated".into());
        }
        self.witnesses.truncate(5);
        CheckReport {
            name: self.name,
            samples: self.samples,
            skipped: self.skipped,
            max_residual,
            tol: self.tol,
            verdict,
            witnesses: self.witnesses,
            note: self.note,
        }
    }
}

/// Errors that disqualify a single sample point rather than the whole check.
pub(crate) fn recoverable_at_point(e: &Error) -> bool {
    matches!(
        e,
        Error::OutsideDomain(_)
            | Error::Domain(_)
            | Error::DomainExit { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::NewtonDivergence { .. }
    )
}

pub(crate) fn require_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tolerance must be positive and finite, got {tol}"
        )))
    }
}

/// Shared sample-iterate-report loop.
pub(crate) fn run_pointwise(
    name: &str,
    s: &SampleSpec,
    tol: f64,
    mut residual_at: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<CheckReport> {
    let mut builder = ReportBuilder::new(name, tol);
    for p in s.points()? {
        match residual_at(&p) {
            Ok(r) => builder.record(&p, r),
            Err(e) if recoverable_at_point(&e) => builder.skip(),
            Err(e) => return Err(e),
        }
    }
    Ok(builder.finish())
}

fn flow_tol_for(tol: f64) -> f64 {
    (tol * 1e-2).clamp(1e-13, 1e-10)
}

// ---------------------------------------------------------------------------
// Extensive functions
// ---------------------------------------------------------------------------

/// Infinitesimal extensivity residual `df(ρ)(p) − f(p)`; zero exactly when
/// `f` satisfies the degree-1 homogeneity identity at `p`.
pub fn euler_residual(f: &ScalarField, rho: &VectorField, p: &[f64]) -> Result<f64> {
    let jet = f.jet_at(p, 1)?;
    let x = rho.value_at(p)?;
    let directional: f64 = jet.gradient().iter().zip(&x).map(|(g, v)| g * v).sum();
    Ok(directional - jet.value())
}

/// Literal scaling defect `|f(λp) − λ·f(p)|` with `λp` computed by plain
/// coordinate multiplication. Exact (no flow) but only meaningful where the
/// generating field is the radial field of the ambient chart.
pub fn scaling_defect(f: &ScalarField, p: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must be positive and finite, got {lambda}"
        )));
    }
    let scaled: Vec<f64> = p.iter().map(|c| c * lambda).collect();
    Ok((f.value_at(&scaled)? - lambda * f.value_at(p)?).abs())
}

/// Both extensivity residuals — the jet identity and the flow identity with
/// custom scaling factors — reported together (worst of the family).
pub fn check_extensive_function_with(
    f: &ScalarField,
    rho: &VectorField,
    s: &SampleSpec,
    tol: f64,
    lambdas: &[f64],
) -> Result<CheckReport> {
    require_tol(tol)?;
    let ftol = flow_tol_for(tol);
    run_pointwise("extensive-function", s, tol, |p| {
        let mut worst = euler_residual(f, rho, p)?.abs();
        let fp = f.value_at(p)?;
        for &lambda in lambdas {
            let q = scale_state(rho, p, lambda, ftol)?;
            let defect = (f.value_at(&q)? - lambda * fp).abs();
            worst = worst.max(defect);
        }
        Ok(worst)
    })
}

/// Standard extensive-function check with the default scaling factors.
pub fn check_extensive_function(
    f: &ScalarField,
    rho: &VectorField,
    s: &SampleSpec,
    tol: f64,
) -> Result<CheckReport> {
    check_extensive_function_with(f, rho, s, tol, &DEFAULT_LAMBDAS)
}

// ---------------------------------------------------------------------------
// Homogeneous maps and chart transitions
// ---------------------------------------------------------------------------

/// Literal scaling defect of a map: `F(λp) − λF(p)` componentwise.
pub fn homogeneity_defect_map(map: &SmoothMap, p: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must be positive and finite, got {lambda}"
        )));
    }
    let scaled: Vec<f64> = p.iter().map(|c| c * lambda).collect();
    let left = map.eval_at(&scaled)?;
    let right = map.eval_at(p)?;
    Ok(left
        .iter()
        .zip(&right)
        .map(|(a, b)| a - lambda * b)
        .collect())
}

const MAP_LAMBDAS: [f64; 2] = [0.5, 2.0];

/// Infinitesimal test: dF_p applied to the radial vector at p must equal
/// the radial vector at F(p), i.e. J_F(p)·p = F(p).
fn map_jacobian_residual(map: &SmoothMap, p: &[f64]) -> Result<f64> {
    let jac = map.jacobian(p)?;
    let image = map.eval_at(p)?;
    let pv = nalgebra::DVector::from_column_slice(p);
    let pushed = jac * pv;
    Ok(pushed
        .iter()
        .zip(&image)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Jacobian residual plus scaling defects. With `strict_lambdas` a scaled
/// point leaving the domain disqualifies the sample; otherwise that factor
/// is silently dropped (bounded chart patches cannot survive doubling).
fn map_residual_at(
    map: &SmoothMap,
    p: &[f64],
    lambdas: &[f64],
    strict_lambdas: bool,
) -> Result<f64> {
    let mut worst = map_jacobian_residual(map, p)?;
    for &lambda in lambdas {
        match homogeneity_defect_map(map, p, lambda) {
            Ok(defect) => {
                worst = worst.max(defect.iter().fold(0.0_f64, |m, d| m.max(d.abs())));
            }
            Err(e) if !strict_lambdas && recoverable_at_point(&e) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(worst)
}

/// Check that a map between same-dimensional spaces commutes with scaling:
/// the Jacobian identity `J_F(p)·p = F(p)` plus finite scalings λ ∈ {½, 2}.
pub fn check_homogeneous_diffeo(map: &SmoothMap, s: &SampleSpec, tol: f64) -> Result<CheckReport> {
    require_tol(tol)?;
    if map.source_dim() != map.target_dim() {
        return Err(Error::Dimension(
            "homogeneity check expects a map between spaces of equal dimension".into(),
        ));
    }
    run_pointwise("homogeneous-diffeo", s, tol, |p| {
        map_residual_at(map, p, &MAP_LAMBDAS, true)
    })
}

/// Check that two charts are compatible as extensive structures: the
/// transition `b ∘ a⁻¹` must be degree-1 homogeneous on the overlap.
/// Samples are manifold points; those outside the overlap are skipped.
pub fn check_transition_compatibility(
    a: &Chart,
    b: &Chart,
    s: &SampleSpec,
    tol: f64,
) -> Result<CheckReport> {
    require_tol(tol)?;
    let overlap = a.domain.intersect(&b.domain)?;
    let transition = b.forward.compose(&a.inverse)?;
    let mut builder = ReportBuilder::new("transition-compatibility", tol);
    for q in s.points()? {
        if !overlap.contains(&q) {
            builder.skip();
            continue;
        }
        let outcome = (|| -> Result<f64> {
            let y = a.forward.eval_at(&q)?;
            map_residual_at(&transition, &y, &[0.9, 1.1], false)
        })();
        match outcome {
            Ok(r) => builder.record(&q, r),
            Err(e) if recoverable_at_point(&e) => builder.skip(),
            Err(e) => return Err(e),
        }
    }
    Ok(builder.finish())
}

// ---------------------------------------------------------------------------
// Extensive forms
// ---------------------------------------------------------------------------

/// Coefficientwise residual of form extensivity: `(L_ρ ω − ω)(p)`.
pub fn form_extensivity_residual(
    omega: &KForm,
    rho: &VectorField,
    p: &[f64],
) -> Result<FormValue> {
    lie_derivative_form(rho, omega, p)?.sub(&omega.value_at(p)?)
}

/// Check `L_ρ ω = ω` over a sample (max coefficient residual per point).
pub fn check_form_extensive(
    omega: &KForm,
    rho: &VectorField,
    s: &SampleSpec,
    tol: f64,
) -> Result<CheckReport> {
    require_tol(tol)?;
    run_pointwise("form-extensive", s, tol, |p| {
        Ok(form_extensivity_residual(omega, rho, p)?.max_abs())
    })
}

/// Compare the pullback of `ω` along the time-`t` flow of `ρ` against
/// `e^t ω` at `p` (the integrated form of extensivity). Single-point report.
pub fn check_scaling_law(
    omega: &KForm,
    rho: &VectorField,
    p: &[f64],
    t: f64,
    tol: f64,
) -> Result<CheckReport> {
    require_tol(tol)?;
    let mut builder = ReportBuilder::new("scaling-law", tol);
    let ftol = flow_tol_for(tol);
    let outcome = (|| -> Result<f64> {
        let fr = flow(rho, p, t, ftol)?;
        let pulled = pullback_value(&fr.fundamental, &omega.value_at(&fr.endpoint)?)?;
        let expected = omega.value_at(p)?.scale(t.exp());
        Ok(pulled.sub(&expected)?.max_abs())
    })();
    match outcome {
        Ok(r) => builder.record(p, r),
        Err(e) if recoverable_at_point(&e) => builder.skip(),
        Err(e) => return Err(e),
    }
    Ok(builder.finish())
}

// ---------------------------------------------------------------------------
// Integrability and transversality
// ---------------------------------------------------------------------------

/// Frobenius defect `(θ ∧ dθ)(p)` of a 1-form; identically zero when n ≤ 2.
pub fn integrability_defect(theta: &KForm, p: &[f64]) -> Result<FormValue> {
    if theta.degree() != 1 {
        return Err(Error::InvalidArgument(
            "integrability defect is defined for 1-forms".into(),
        ));
    }
    theta.value_at(p)?.wedge(&exterior_derivative(theta, p)?)
}

/// Check `θ ∧ dθ = 0` over a sample.
pub fn check_integrability(theta: &KForm, s: &SampleSpec, tol: f64) -> Result<CheckReport> {
    require_tol(tol)?;
    let mut report = run_pointwise("integrability", s, tol, |p| {
        Ok(integrability_defect(theta, p)?.max_abs())
    })?;
    if theta.dim() <= 2 {
        report.note = Some("3-form on a space of dimension ≤ 2: identically zero".into());
    }
    Ok(report)
}

/// The contraction `θ(ρ)` at a point (transversality indicator).
pub fn transversality_value(theta: &KForm, rho: &VectorField, p: &[f64]) -> Result<f64> {
    if theta.degree() != 1 {
        return Err(Error::InvalidArgument(
            "transversality is defined for 1-forms".into(),
        ));
    }
    Ok(theta
        .value_at(p)?
        .contract(&rho.value_at(p)?)?
        .coeff(&MultiIndex::empty()))
}

/// Pass iff `|θ(ρ)| ≥ min_abs` at every sample; the residual recorded per
/// point is the shortfall `max(0, min_abs − |θ(ρ)|)`.
pub fn check_transversal(
    theta: &KForm,
    rho: &VectorField,
    s: &SampleSpec,
    min_abs: f64,
) -> Result<CheckReport> {
    if !(min_abs > 0.0 && min_abs.is_finite()) {
        return Err(Error::InvalidArgument(
            "transversality bound min_abs must be positive and finite".into(),
        ));
    }
    let mut smallest = f64::INFINITY;
    let mut report = run_pointwise("transversal", s, 0.0, |p| {
        let v = transversality_value(theta, rho, p)?.abs();
        smallest = smallest.min(v);
        Ok((min_abs - v).max(0.0))
    })?;
    if smallest.is_finite() {
        report.note = Some(format!(
            "min |θ(ρ)| = {smallest:.6e} against bound {min_abs:.6e}"
        ));
    }
    Ok(report)
}

/// Pass iff `|θ(ρ)| ≤ tol` at every sample (annihilation, the opposite of
/// transversality).
pub fn check_vanishing_contraction(
    theta: &KForm,
    rho: &VectorField,
    s: &SampleSpec,
    tol: f64,
) -> Result<CheckReport> {
    require_tol(tol)?;
    run_pointwise("vanishing-contraction", s, tol, |p| {
        Ok(transversality_value(theta, rho, p)?.abs())
    })
}

/// On the level set `f = c` of an extensive function, `df(ρ)` equals `c`,
/// which is nonzero — so `ρ` is never tangent to a nonzero level set.
/// Samples are Newton-projected onto the level set first.
pub fn check_transversal_level_set(
    f: &ScalarField,
    rho: &VectorField,
    c: f64,
    s: &SampleSpec,
    tol: f64,
) -> Result<CheckReport> {
    require_tol(tol)?;
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(
            "level value must be nonzero and finite (the zero level is the degenerate cone)"
                .into(),
        ));
    }
    let pre = check_extensive_function(f, rho, s, tol.max(1e-9) * 100.0)?;
    if !pre.passed() {
        return Err(Error::NotExtensive {
            what: "level-set function".into(),
            max_residual: pre.max_residual,
            tol: pre.tol,
        });
    }
    run_pointwise("transversal-level-set", s, tol, |p| {
        let projected = project_to_level(f, p, c)?;
        let jet = f.jet_at(&projected, 1)?;
        let grad_norm: f64 = jet.gradient().iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < 1e-12 {
            // A critical point on the level set: the set is not a regular
            // hypersurface there, which counts as maximal failure.
            return Ok(f64::INFINITY);
        }
        let x = rho.value_at(&projected)?;
        let along: f64 = jet.gradient().iter().zip(&x).map(|(g, v)| g * v).sum();
        Ok((along - c).abs())
    })
}

fn project_to_level(f: &ScalarField, start: &[f64], c: f64) -> Result<Vec<f64>> {
    let mut p = start.to_vec();
    for _ in 0..40 {
        let jet = f.jet_at(&p, 1)?;
        let gap = jet.value() - c;
        if gap.abs() <= 1e-13 * c.abs().max(1.0) {
            return Ok(p);
        }
        let g = jet.gradient();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg < 1e-24 {
            return Err(Error::NewtonDivergence {
                residual: gap.abs(),
                iterations: 0,
            });
        }
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi -= gap * gi / gg;
        }
    }
    Err(Error::NewtonDivergence {
        residual: f64::NAN,
        iterations: 40,
    })
}

// ---------------------------------------------------------------------------
// Uniqueness modulo scale
// ---------------------------------------------------------------------------

/// Two extensive functions cutting the same transversal structure differ by
/// a constant factor; recover that factor as the (checked constant) ratio
/// `g/f` over the sample. Extensivity is verified against the radial field
/// of the ambient box first.
pub fn defining_function_scale(
    f: &ScalarField,
    g: &ScalarField,
    s: &SampleSpec,
    tol: f64,
) -> Result<f64> {
    require_tol(tol)?;
    let rho = VectorField::radial(s.domain());
    let pre_tol = (tol * 1e3).max(1e-9);
    for (what, func) in [("f", f), ("g", g)] {
        let mut worst = 0.0_f64;
        for p in s.points()? {
            match euler_residual(func, &rho, &p) {
                Ok(r) => worst = worst.max(r.abs()),
                Err(e) if recoverable_at_point(&e) => {}
                Err(e) => return Err(e),
            }
        }
        if worst > pre_tol {
            return Err(Error::NotExtensive {
                what: format!("ratio input {what}"),
                max_residual: worst,
                tol: pre_tol,
            });
        }
    }
    let mut ratios = Vec::new();
    for p in s.points()? {
        let (fv, gv) = match (f.value_at(&p), g.value_at(&p)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) if recoverable_at_point(&e) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if fv.abs() <= 1e-12 * (1.0 + gv.abs()) {
            return Err(Error::InvalidArgument(format!(
                "defining function vanishes at sample {p:?}; the ratio is undefined there"
            )));
        }
        ratios.push(gv / fv);
    }
    if ratios.is_empty() {
        return Err(Error::SampleExhausted {
            requested: s.count(),
            attempts: 0,
        });
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios
        .iter()
        .fold(0.0_f64, |m, r| m.max((r - mean).abs()));
    if spread > tol * mean.abs().max(1.0) {
        return Err(Error::NonConstantRatio { mean, spread });
    }
    Ok(mean)
}

// ---------------------------------------------------------------------------
// Entropy recovery
// ---------------------------------------------------------------------------

/// Diagnostics from one entropy-recovery integration.
#[derive(Debug, Clone)]
pub struct EntropyRecovery {
    /// Recovered value `S(target) = S(base) · exp(∫ θ/θ(ρ))`.
    pub value: f64,
    /// The path integral of the normalized form.
    pub integral: f64,
    /// Worst `|d(θ/θ(ρ))|` coefficient observed at quadrature nodes.
    pub closedness_residual: f64,
    /// Total integrand evaluations.
    pub nodes: usize,
}

/// Recover `S(target)` from `S(base) = s0` by integrating the normalized
/// form `θ/θ(ρ)` (which equals `d ln S` for θ generated by an extensive S)
/// along the straight segment from `base` to `target`.
pub fn recover_entropy(
    theta: &KForm,
    rho: &VectorField,
    base: &[f64],
    s0: f64,
    target: &[f64],
    tol: f64,
) -> Result<f64> {
    Ok(recover_entropy_path(theta, rho, &[base.to_vec(), target.to_vec()], s0, tol)?.value)
}

/// Path-integral entropy recovery along a polygonal path of waypoints.
///
/// Preconditions checked in order: θ must be a 1-form of the right
/// dimension; θ extensive (`L_ρθ = θ`) and integrable (`θ∧dθ = 0`) at probe
/// points along the path; `θ(ρ)` bounded away from zero at every quadrature
/// node; and `d(θ/θ(ρ)) = 0` at every node (path independence).
pub fn recover_entropy_path(
    theta: &KForm,
    rho: &VectorField,
    waypoints: &[Vec<f64>],
    s0: f64,
    tol: f64,
) -> Result<EntropyRecovery> {
    require_tol(tol)?;
    let n = theta.dim();
    if theta.degree() != 1 {
        return Err(Error::InvalidArgument(
            "entropy recovery integrates a 1-form".into(),
        ));
    }
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument(
            "entropy recovery needs at least a base and a target point".into(),
        ));
    }
    if waypoints.iter().any(|w| w.len() != n) {
        return Err(Error::Dimension(
            "waypoint dimension does not match the form".into(),
        ));
    }
    if s0 == 0.0 || !s0.is_finite() {
        return Err(Error::InvalidArgument(
            "base value s0 must be nonzero and finite".into(),
        ));
    }

    // Probe extensivity and integrability along the path before integrating.
    let pre_tol = (tol * 1e3).max(1e-9);
    for seg in waypoints.windows(2) {
        for i in 1..=5 {
            let s = i as f64 / 6.0;
            let p: Vec<f64> = seg[0]
                .iter()
                .zip(&seg[1])
                .map(|(a, b)| a + s * (b - a))
                .collect();
            let ext = form_extensivity_residual(theta, rho, &p)?.max_abs();
            if ext > pre_tol {
                return Err(Error::NotExtensive {
                    what: "integrand form".into(),
                    max_residual: ext,
                    tol: pre_tol,
                });
            }
            if n >= 3 {
                let frob = integrability_defect(theta, &p)?.max_abs();
                if frob > pre_tol {
                    return Err(Error::NotIntegrable {
                        max_residual: frob,
                        tol: pre_tol,
                    });
                }
            }
        }
    }

    // Normalized form θ/θ(ρ) as a field-level object for closedness checks.
    let contraction = interior_form(rho, theta)?;
    let contraction_field = contraction
        .coeff(&MultiIndex::empty())
        .ok_or_else(|| Error::InvalidArgument("θ has no coefficients".into()))?
        .clone();
    let normalized = theta.scale_by(&contraction_field.recip())?;
    let d_normalized = derivative_form(&normalized)?;

    let vanish_floor = 10.0 * tol;
    let mut closedness: f64 = 0.0;
    let mut nodes = 0usize;
    let mut total = 0.0;

    for seg in waypoints.windows(2) {
        let direction: Vec<f64> = seg[0].iter().zip(&seg[1]).map(|(a, b)| b - a).collect();
        let mut integrand = |s: f64| -> Result<f64> {
            let p: Vec<f64> = seg[0]
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + s * d)
                .collect();
            let theta_v = theta.value_at(&p)?;
            let rho_v = rho.value_at(&p)?;
            let den = theta_v.contract(&rho_v)?.coeff(&MultiIndex::empty());
            if den.abs() <= vanish_floor {
                return Err(Error::VanishingContraction {
                    location: format!("{p:?}"),
                    value: den,
                });
            }
            let num: f64 = (0..n)
                .map(|i| theta_v.coeff(&MultiIndex::single(i)) * direction[i])
                .sum();
            let d_res = d_normalized.value_at(&p)?.max_abs();
            closedness = closedness.max(d_res);
            nodes += 1;
            Ok(num / den)
        };
        total += adaptive_gk(&mut integrand, 0.0, 1.0, tol, 0)?;
    }

    if closedness > tol {
        return Err(Error::ClosednessViolation {
            max_residual: closedness,
            tol,
        });
    }

    Ok(EntropyRecovery {
        value: s0 * total.exp(),
        integral: total,
        closedness_residual: closedness,
        nodes,
    })
}

// 15-point Kronrod extension of 7-point Gauss (nodes descending, positive
// half; the even-index nodes are Kronrod-only, the odd ones shared with
// Gauss).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &mut impl FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let left = f(c - x)?;
        let right = f(c + x)?;
        resk += WGK[j] * (left + right);
        if j % 2 == 1 {
            resg += WG[j / 2] * (left + right);
        }
    }
    Ok((resk * h, (resk - resg).abs() * h.abs()))
}

fn adaptive_gk(
    f: &mut impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let (value, err) = gk15(f, a, b)?;
    if err <= tol || depth >= 28 {
        return Ok(value);
    }
    let mid = 0.5 * (a + b);
    Ok(adaptive_gk(f, a, mid, 0.5 * tol, depth + 1)?
        + adaptive_gk(f, mid, b, 0.5 * tol, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn no_consts() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn field(src: &str, vars: &[&str], domain: &DomainBox) -> ScalarField {
        ScalarField::parse(src, vars, &no_consts(), domain.clone()).unwrap()
    }

    fn spec(domain: DomainBox, count: usize, seed: u64) -> SampleSpec {
        SampleSpec::new(domain, count, seed)
    }

    fn pos_box(n: usize, lo: f64, hi: f64) -> DomainBox {
        DomainBox::new(vec![lo; n], vec![hi; n]).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_respects_predicates() {
        let b = pos_box(2, 0.0, 1.0);
        let s1 = spec(b.clone(), 10, 42).points().unwrap();
        let s2 = spec(b.clone(), 10, 42).points().unwrap();
        assert_eq!(s1, s2);
        let s3 = spec(b.clone(), 10, 43).points().unwrap();
        assert_ne!(s1, s3);
        let filtered = spec(b, 25, 7)
            .with_predicate(|p| p[0] > p[1])
            .points()
            .unwrap();
        assert_eq!(filtered.len(), 25);
        assert!(filtered.iter().all(|p| p[0] > p[1]));
        // unbounded boxes cannot be sampled
        assert!(spec(DomainBox::positive_orthant(2), 5, 0).points().is_err());
    }

    #[test]
    fn euler_residual_separates_homogeneous_from_not() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        let good = field("x^2/(x + y)", &["x", "y"], &dom);
        let bad = field("x^2/(x + y) + x^2", &["x", "y"], &dom);
        let p = [1.0, 2.0];
        assert!(euler_residual(&good, &rho, &p).unwrap().abs() < 1e-14);
        // residual of the perturbation x² is exactly (2-1)·x² = 1
        assert!((euler_residual(&bad, &rho, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extensive_function_check_passes_and_fails_correctly() {
        let dom = DomainBox::positive_orthant(3);
        let rho = VectorField::radial(&dom);
        let s = spec(pos_box(3, 0.5, 2.0), 15, 11);
        let good = field("x*y/z", &["x", "y", "z"], &dom);
        let report = check_extensive_function(&good, &rho, &s, 1e-9).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.samples, 15);

        let bad = field("x*y/z + 0.001*x^2", &["x", "y", "z"], &dom);
        let report = check_extensive_function(&bad, &rho, &s, 1e-9).unwrap();
        assert!(!report.passed());
        assert!(!report.witnesses.is_empty());
        assert!(report.max_residual > 1e-4);
    }

    #[test]
    fn rational_map_scaling_defect_vanishes() {
        let dom = DomainBox::positive_orthant(2);
        let f = SmoothMap::from_exprs(
            &["x^2/(x + y)", "y^2/(x + y)"],
            &["x", "y"],
            &no_consts(),
            dom,
        )
        .unwrap();
        let defect = homogeneity_defect_map(&f, &[1.0, 2.0], 3.0).unwrap();
        for d in defect {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_diffeo_check_verdicts() {
        let dom = DomainBox::positive_orthant(2);
        let s = spec(pos_box(2, 0.5, 2.0), 20, 3);
        let linear = SmoothMap::from_exprs(
            &["2*x + y", "x + 3*y"],
            &["x", "y"],
            &no_consts(),
            dom.clone(),
        )
        .unwrap();
        assert!(check_homogeneous_diffeo(&linear, &s, 1e-9).unwrap().passed());

        let translation = SmoothMap::from_exprs(
            &["x + 1", "y"],
            &["x", "y"],
            &no_consts(),
            dom.clone(),
        )
        .unwrap();
        assert!(!check_homogeneous_diffeo(&translation, &s, 1e-9)
            .unwrap()
            .passed());

        let squares =
            SmoothMap::from_exprs(&["x^2", "y^2"], &["x", "y"], &no_consts(), dom).unwrap();
        assert!(!check_homogeneous_diffeo(&squares, &s, 1e-9).unwrap().passed());
    }

    #[test]
    fn transition_compatibility_detects_nonhomogeneous_charts() {
        let manifold = pos_box(2, 0.5, 3.0);
        let a = Chart {
            forward: SmoothMap::identity(manifold.clone()),
            inverse: SmoothMap::identity(DomainBox::positive_orthant(2)),
            domain: manifold.clone(),
        };
        // b squares each coordinate: transition y ↦ y² is not homogeneous.
        let b = Chart {
            forward: SmoothMap::from_exprs(
                &["x^2", "y^2"],
                &["x", "y"],
                &no_consts(),
                DomainBox::positive_orthant(2),
            )
            .unwrap(),
            inverse: SmoothMap::from_exprs(
                &["x^0.5", "y^0.5"],
                &["x", "y"],
                &no_consts(),
                DomainBox::positive_orthant(2),
            )
            .unwrap(),
            domain: manifold.clone(),
        };
        let s = spec(manifold.clone(), 10, 5);
        let identity_vs_identity =
            check_transition_compatibility(&a, &a, &s, 1e-9).unwrap();
        assert!(identity_vs_identity.passed());
        let incompatible = check_transition_compatibility(&a, &b, &s, 1e-9).unwrap();
        assert!(!incompatible.passed());
    }

    #[test]
    fn form_extensivity_residual_matches_hand_value() {
        // ω = x dy on the plane: L_ρω = ρ(x) dy + x d(ρ(y)) = x dy + x dy,
        // so L_ρω − ω = x dy.
        let dom = DomainBox::unbounded(2);
        let omega = KForm::from_coeffs(
            2,
            1,
            vec![(MultiIndex::single(1), field("x", &["x", "y"], &dom))],
        )
        .unwrap();
        let rho = VectorField::radial(&dom);
        let r = form_extensivity_residual(&omega, &rho, &[2.0, -1.0]).unwrap();
        assert!((r.coeff(&MultiIndex::single(1)) - 2.0).abs() < 1e-13);
        assert!(r.coeff(&MultiIndex::single(0)).abs() < 1e-13);
    }

    #[test]
    fn scaling_law_holds_for_basis_forms_along_radial_flow() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        let dx = KForm::dx(0, &dom);
        let report =
            check_scaling_law(&dx, &rho, &[1.0, 1.0], (3.0_f64).ln(), 1e-6).unwrap();
        assert!(report.passed(), "{report}");
        // and a form that is NOT extensive fails: ω = x² dx scales by e^{2t}
        let omega = KForm::from_coeffs(
            2,
            1,
            vec![(MultiIndex::single(0), field("x^2", &["x", "y"], &dom))],
        )
        .unwrap();
        let report = check_scaling_law(&omega, &rho, &[1.0, 1.0], (3.0_f64).ln(), 1e-6).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn contact_form_fails_integrability() {
        // θ = dz − y dx on R³: θ∧dθ = dx∧dy∧dz (up to sign), never zero.
        let dom = DomainBox::unbounded(3);
        let vars = ["x", "y", "z"];
        let theta = KForm::from_coeffs(
            3,
            1,
            vec![
                (MultiIndex::single(0), field("-y", &vars, &dom)),
                (MultiIndex::single(2), field("1", &vars, &dom)),
            ],
        )
        .unwrap();
        let defect = integrability_defect(&theta, &[0.2, 0.4, 0.6]).unwrap();
        assert!((defect.max_abs() - 1.0).abs() < 1e-13);
        let s = spec(pos_box(3, 0.1, 1.0), 8, 2);
        assert!(!check_integrability(&theta, &s, 1e-9).unwrap().passed());

        // exact forms are integrable: θ = d(xyz)
        let exact = KForm::from_coeffs(
            3,
            1,
            vec![
                (MultiIndex::single(0), field("y*z", &vars, &dom)),
                (MultiIndex::single(1), field("x*z", &vars, &dom)),
                (MultiIndex::single(2), field("x*y", &vars, &dom)),
            ],
        )
        .unwrap();
        assert!(check_integrability(&exact, &s, 1e-9).unwrap().passed());
    }

    #[test]
    fn transversality_checks() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        // θ = dx + dy: θ(ρ) = x + y ≥ 1 on [0.5, 2]²
        let theta = KForm::one_form(vec![
            ScalarField::constant(1.0, dom.clone()),
            ScalarField::constant(1.0, dom.clone()),
        ])
        .unwrap();
        let s = spec(pos_box(2, 0.5, 2.0), 12, 9);
        assert!((transversality_value(&theta, &rho, &[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-14);
        assert!(check_transversal(&theta, &rho, &s, 0.9).unwrap().passed());
        assert!(!check_transversal(&theta, &rho, &s, 10.0).unwrap().passed());
        // the annihilating form from the two-variable counterexample
        let alpha = KForm::one_form(vec![
            field("1 + y/x", &["x", "y"], &dom),
            field("-(1 + x/y)", &["x", "y"], &dom),
        ])
        .unwrap();
        assert!(check_vanishing_contraction(&alpha, &rho, &s, 1e-12)
            .unwrap()
            .passed());
    }

    #[test]
    fn level_set_transversality_for_an_extensive_function() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        let f = field("x + y", &["x", "y"], &dom);
        let s = spec(pos_box(2, 0.5, 2.0), 10, 21);
        let report = check_transversal_level_set(&f, &rho, 2.0, &s, 1e-9).unwrap();
        assert!(report.passed(), "{report}");
        // zero level is rejected outright
        assert!(check_transversal_level_set(&f, &rho, 0.0, &s, 1e-9).is_err());
        // non-extensive functions are rejected before projection
        let g = field("x + y + 1", &["x", "y"], &dom);
        assert!(matches!(
            check_transversal_level_set(&g, &rho, 2.0, &s, 1e-9),
            Err(Error::NotExtensive { .. })
        ));
    }

    #[test]
    fn ratio_of_proportional_functions_is_recovered() {
        let dom = DomainBox::positive_orthant(2);
        let f = field("x*y/(x + y)", &["x", "y"], &dom);
        let g = f.scale(3.0);
        let s = spec(pos_box(2, 0.5, 2.0), 20, 8);
        let k = defining_function_scale(&f, &g, &s, 1e-10).unwrap();
        assert!((k - 3.0).abs() < 1e-13);
        // independent extensive functions have no constant ratio
        let h = field("x", &["x", "y"], &dom);
        let w = field("y", &["x", "y"], &dom);
        assert!(matches!(
            defining_function_scale(&h, &w, &s, 1e-10),
            Err(Error::NonConstantRatio { .. })
        ));
    }

    #[test]
    fn entropy_recovery_for_an_exact_form() {
        // θ = dx¹ on R³₊ comes from S = x¹: recovery must reproduce the
        // coordinate, along one segment or around a corner.
        let dom = DomainBox::positive_orthant(3);
        let rho = VectorField::radial(&dom);
        let theta = KForm::from_coeffs(
            3,
            1,
            vec![(
                MultiIndex::single(0),
                ScalarField::constant(1.0, dom.clone()),
            )],
        )
        .unwrap();
        let base = [1.0, 1.0, 1.0];
        let target = [2.0, 1.5, 0.7];
        let direct = recover_entropy(&theta, &rho, &base, 1.0, &target, 1e-8).unwrap();
        assert!((direct - 2.0).abs() < 1e-9, "direct = {direct}");
        let detour = recover_entropy_path(
            &theta,
            &rho,
            &[base.to_vec(), vec![1.5, 2.0, 1.0], target.to_vec()],
            1.0,
            1e-8,
        )
        .unwrap();
        assert!((detour.value - 2.0).abs() < 1e-9);
        assert!(detour.closedness_residual <= 1e-8);
        assert!(detour.nodes >= 30);
    }

    #[test]
    fn entropy_recovery_rejects_annihilating_forms() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        let alpha = KForm::one_form(vec![
            field("1 + y/x", &["x", "y"], &dom),
            field("-(1 + x/y)", &["x", "y"], &dom),
        ])
        .unwrap();
        let err =
            recover_entropy(&alpha, &rho, &[1.0, 1.0], 1.0, &[2.0, 1.5], 1e-8).unwrap_err();
        assert!(matches!(err, Error::VanishingContraction { .. }), "{err}");
    }

    #[test]
    fn entropy_recovery_rejects_nonextensive_forms() {
        let dom = DomainBox::positive_orthant(2);
        let rho = VectorField::radial(&dom);
        // θ = dx + x dx-ish perturbation breaks L_ρθ = θ
        let theta = KForm::one_form(vec![
            field("1 + x", &["x", "y"], &dom),
            ScalarField::constant(0.0, dom.clone()),
        ])
        .unwrap();
        let err =
            recover_entropy(&theta, &rho, &[1.0, 1.0], 1.0, &[2.0, 1.5], 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotExtensive { .. }), "{err}");
    }

    #[test]
    fn quadrature_integrates_smooth_functions_tightly() {
        let mut f = |x: f64| -> Result<f64> { Ok((x * x).exp()) };
        let got = adaptive_gk(&mut f, 0.0, 1.0, 1e-12, 0).unwrap();
        // ∫₀¹ e^{x²} dx to 15 digits
        let expected = 1.462651745907182;
        assert!((got - expected).abs() < 1e-11);
    }

    #[test]
    fn report_serialization_is_stable() {
        let mut b = ReportBuilder::new("demo", 1e-9);
        b.record(&[1.0, 2.0], 3.5e-10);
        b.record(&[0.5, 0.25], 1.5e-11);
        let r1 = b.finish();
        assert!(r1.passed());
        let line = r1.to_record();
        assert!(line.starts_with("check=demo verdict=pass samples=2 skipped=0"));
        assert!(line.contains("max_residual=3.5e-10"));
        // failing empty report
        let r2 = ReportBuilder::new("empty", 1e-9).finish();
        assert!(!r2.passed());
        assert_eq!(r2.max_residual, f64::INFINITY);
    }
}
