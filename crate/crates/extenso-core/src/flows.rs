//! Integral curves, their linearizations, and charts adapted to a field.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with PI step
//! control, advancing the state jointly with the fundamental matrix of the
//! variational equation `Φ' = (∂X/∂x) Φ`. Having Φ available at no extra
//! conceptual cost is what makes flow pullbacks and shooting-based chart
//! inversion cheap: the Jacobian of the time-t map *is* Φ.
//!
//! Charts come in two flavors. A flow-box chart straightens `X` to `∂/∂y¹`
//! near a regular point by flowing off a transverse slice; composing it with
//! the fixed rescaling `x¹ = e^{y¹}, x^i = y^i e^{y¹}` turns `X` into the
//! radial field instead, which is the coordinate form extensivity lives in.
//! Both constructions verify themselves at sampled points before returning.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcalc::{DomainBox, Jet, ScalarField, SmoothMap};
use crate::error::{Error, Result};
use crate::exterior::VectorField;

// Dormand–Prince 5(4) tableau. Row i of A holds the coefficients for stage
// i + 2; B5 is the fifth-order solution weight vector, E = B5 - B4 the
// embedded error weights (seven stages, first-same-as-last).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 200_000;

/// Endpoint and linearization of one integral-curve segment.
#[derive(Debug, Clone)]
pub struct FlowResult {
    /// φ_t(p).
    pub endpoint: Vec<f64>,
    /// Fundamental matrix Φ(t) with Φ(0) = I; the Jacobian of φ_t at p.
    pub fundamental: DMatrix<f64>,
    /// Accepted integrator steps.
    pub steps: usize,
    /// Accumulated local error estimate (sum of per-step estimates).
    pub est_error: f64,
}

#[derive(Clone)]
struct Stage {
    dx: Vec<f64>,
    dphi: DMatrix<f64>,
}

fn eval_sys(x: &VectorField, point: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = x.dim();
    let mut value = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, n);
    for (i, c) in x.components().iter().enumerate() {
        let jet = c.jet_at(point, 1)?;
        value[i] = jet.value();
        for (j, g) in jet.gradient().iter().enumerate() {
            jac[(i, j)] = *g;
        }
    }
    Ok((value, jac))
}

fn stage_at(x: &VectorField, point: &[f64], phi: &DMatrix<f64>) -> Result<Stage> {
    let (dx, a) = eval_sys(x, point)?;
    Ok(Stage {
        dx,
        dphi: a * phi,
    })
}

fn is_domain_failure(e: &Error) -> bool {
    matches!(e, Error::OutsideDomain(_) | Error::Domain(_))
}

/// Integrate the flow of `x` from `p` for time `t` (either sign), carrying
/// the variational equation. `tol` is used as both absolute and relative
/// local tolerance.
pub fn flow(x: &VectorField, p: &[f64], t: f64, tol: f64) -> Result<FlowResult> {
    let n = x.dim();
    if p.len() != n {
        return Err(Error::Dimension(format!(
            "flow start point has dimension {}, field has {}",
            p.len(),
            n
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "flow tolerance must be positive and finite, got {tol}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("flow time must be finite".into()));
    }
    let domain = x.domain()?;
    if !domain.contains(p) {
        return Err(Error::OutsideDomain(format!(
            "flow starting point {p:?} is outside the field domain"
        )));
    }
    if t == 0.0 {
        return Ok(FlowResult {
            endpoint: p.to_vec(),
            fundamental: DMatrix::identity(n, n),
            steps: 0,
            est_error: 0.0,
        });
    }

    let dir = t.signum();
    let mut cur_t = 0.0;
    let mut xv = p.to_vec();
    let mut phi = DMatrix::identity(n, n);
    let mut first = stage_at(x, &xv, &phi)?;

    // Conservative starting step; the controller adapts within a few steps.
    let x_scale = xv.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let f_scale = first
        .dx
        .iter()
        .fold(1e-8_f64, |m, v| m.max(v.abs()));
    let mut h = dir * (0.01 * x_scale / f_scale).min(t.abs());

    let h_min = 1e-13 * t.abs().max(1.0);
    let mut steps = 0usize;
    let mut est_error = 0.0;
    let mut err_prev: f64 = 1.0;

    while (t - cur_t) * dir > 0.0 {
        if steps >= MAX_STEPS {
            return Err(Error::StepLimit { t: cur_t, steps });
        }
        if (cur_t + h - t) * dir > 0.0 {
            h = t - cur_t;
        }

        // Stages 2..=6, then the FSAL evaluation at the candidate endpoint.
        let mut stages: Vec<Stage> = Vec::with_capacity(7);
        stages.push(first.clone());
        let mut failed: Option<Error> = None;
        for row in A.iter().take(5) {
            let mut xs = xv.clone();
            let mut ps = phi.clone();
            for (j, stage) in stages.iter().enumerate() {
                let w = h * row[j];
                if w != 0.0 {
                    for (a, b) in xs.iter_mut().zip(&stage.dx) {
                        *a += w * b;
                    }
                    ps += &stage.dphi * w;
                }
            }
            match stage_at(x, &xs, &ps) {
                Ok(s) => stages.push(s),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }

        let (x_new, phi_new, last_stage, err) = if failed.is_none() {
            let mut x_new = xv.clone();
            let mut phi_new = phi.clone();
            for (j, stage) in stages.iter().enumerate() {
                let w = h * B5[j];
                if w != 0.0 {
                    for (a, b) in x_new.iter_mut().zip(&stage.dx) {
                        *a += w * b;
                    }
                    phi_new += &stage.dphi * w;
                }
            }
            match stage_at(x, &x_new, &phi_new) {
                Ok(s) => {
                    stages.push(s.clone());
                    // Scaled RMS of the embedded error over state and Φ.
                    let mut acc = 0.0;
                    let mut m = 0usize;
                    for i in 0..n {
                        let mut e = 0.0;
                        for (j, stage) in stages.iter().enumerate() {
                            e += E[j] * stage.dx[i];
                        }
                        e *= h;
                        let sc = tol * (1.0 + xv[i].abs().max(x_new[i].abs()));
                        acc += (e / sc) * (e / sc);
                        m += 1;
                    }
                    for r in 0..n {
                        for c in 0..n {
                            let mut e = 0.0;
                            for (j, stage) in stages.iter().enumerate() {
                                e += E[j] * stage.dphi[(r, c)];
                            }
                            e *= h;
                            let sc = tol * (1.0 + phi[(r, c)].abs().max(phi_new[(r, c)].abs()));
                            acc += (e / sc) * (e / sc);
                            m += 1;
                        }
                    }
                    let err = (acc / m as f64).sqrt();
                    (x_new, phi_new, Some(s), err)
                }
                Err(e) => {
                    failed = Some(e);
                    (Vec::new(), DMatrix::zeros(0, 0), None, f64::INFINITY)
                }
            }
        } else {
            (Vec::new(), DMatrix::zeros(0, 0), None, f64::INFINITY)
        };

        if let Some(e) = failed {
            if !is_domain_failure(&e) {
                return Err(e);
            }
            // The step reached outside the domain; shrink toward the
            // boundary until the step size gives out.
            h *= 0.25;
            if h.abs() < h_min {
                return Err(Error::DomainExit {
                    t_exit: cur_t,
                    t_requested: t,
                });
            }
            continue;
        }

        if err <= 1.0 {
            // Accept, then make sure we are still strictly inside.
            if !domain.contains(&x_new) {
                let frac = exit_fraction(&domain, &xv, &x_new);
                return Err(Error::DomainExit {
                    t_exit: cur_t + frac * h,
                    t_requested: t,
                });
            }
            cur_t += h;
            xv = x_new;
            phi = phi_new;
            first = last_stage.expect("accepted step has its FSAL stage");
            steps += 1;
            est_error += err * tol;
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * err_prev.max(1e-10).powf(0.04))
                .clamp(0.2, 5.0);
            err_prev = err;
            h *= fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h *= fac;
            if h.abs() < h_min {
                return Err(Error::StepSizeUnderflow { t: cur_t });
            }
        }
    }

    Ok(FlowResult {
        endpoint: xv,
        fundamental: phi,
        steps,
        est_error,
    })
}

/// Estimate where the segment from `from` to `to` first crosses the box
/// boundary, as a fraction of the step (linear interpolation per coordinate).
fn exit_fraction(domain: &DomainBox, from: &[f64], to: &[f64]) -> f64 {
    let mut frac: f64 = 1.0;
    for i in 0..from.len() {
        for bound in [domain.lo()[i], domain.hi()[i]] {
            if bound.is_finite() {
                let (a, b) = (from[i] - bound, to[i] - bound);
                if a != 0.0 && a.signum() != b.signum() {
                    frac = frac.min(a.abs() / (a - b).abs());
                }
            }
        }
    }
    frac.clamp(0.0, 1.0)
}

/// The scaled state `λ · p` realized as the time-`ln λ` flow of `rho`
/// (exact multiplication only when `rho` really is the radial field).
pub fn scale_state(rho: &VectorField, p: &[f64], lambda: f64, tol: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must be positive and finite, got {lambda}"
        )));
    }
    if lambda == 1.0 {
        return Ok(p.to_vec());
    }
    Ok(flow(rho, p, lambda.ln(), tol)?.endpoint)
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

/// A local chart: mutually inverse smooth maps plus the (manifold-side)
/// box the construction is valid on.
#[derive(Debug, Clone)]
pub struct Chart {
    pub forward: SmoothMap,
    pub inverse: SmoothMap,
    pub domain: DomainBox,
}

/// How a zero of a vector field relates to the radial normal form.
///
/// The test is the *necessary* condition only: a field that is locally the
/// radial field in some chart centered at the zero must have unit
/// linearization there. `RadialCompatible` therefore means "not ruled out",
/// never "proven radial".
#[derive(Debug, Clone, PartialEq)]
pub enum SingularityClass {
    /// `|X(p)| > tol`: not a singular point at this tolerance.
    Regular,
    /// Singular with linearization equal to the identity within `tol`.
    RadialCompatible { jacobian: DMatrix<f64> },
    /// Singular with linearization ≠ identity: no chart can radialize it.
    RadialIncompatible { jacobian: DMatrix<f64> },
}

/// Classify a candidate singular point of `x` at absolute tolerance `tol`.
pub fn classify_singularity(x: &VectorField, p: &[f64], tol: f64) -> Result<SingularityClass> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(
            "classification tolerance must be positive and finite".into(),
        ));
    }
    let v = x.value_at(p)?;
    if v.iter().any(|c| c.abs() > tol) {
        return Ok(SingularityClass::Regular);
    }
    let jac = x.jacobian_at(p)?;
    let n = x.dim();
    let mut max_dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((jac[(i, j)] - target).abs());
        }
    }
    if max_dev <= tol {
        Ok(SingularityClass::RadialCompatible { jacobian: jac })
    } else {
        Ok(SingularityClass::RadialIncompatible { jacobian: jac })
    }
}

/// Push `x` forward through `map` at `q`: `J_map(q) · X(q)`.
pub fn pushforward(map: &SmoothMap, x: &VectorField, q: &[f64]) -> Result<Vec<f64>> {
    let jac = map.jacobian(q)?;
    let v = nalgebra::DVector::from_vec(x.value_at(q)?);
    Ok((jac * v).iter().copied().collect())
}

/// Orthonormal completion of `v/|v|` to a basis, via the Householder
/// reflection sending `e₁` to `v/|v|`; returns the n−1 transverse vectors.
fn transverse_basis(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let vhat: Vec<f64> = v.iter().map(|a| a / norm).collect();
    let mut w: Vec<f64> = vhat.clone();
    w[0] -= 1.0;
    let wnorm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for j in 1..n {
        let mut b = vec![0.0; n];
        b[j] = 1.0;
        if wnorm > 1e-12 {
            let dot = w[j] / wnorm;
            for (bi, wi) in b.iter_mut().zip(&w) {
                *bi -= 2.0 * dot * wi / wnorm;
            }
        }
        out.push(b);
    }
    out
}

/// Shooting state shared by all forward components of a flow-box chart.
struct Shooter {
    x: VectorField,
    p: Vec<f64>,
    basis: Vec<Vec<f64>>,
    newton_tol: f64,
    flow_tol: f64,
}

impl Shooter {
    fn slice_point(&self, z: &[f64]) -> Vec<f64> {
        let mut base = self.p.clone();
        for (j, b) in self.basis.iter().enumerate() {
            for (bi, bj) in base.iter_mut().zip(b) {
                *bi += z[j + 1] * bj;
            }
        }
        base
    }

    fn endpoint(&self, z: &[f64]) -> Result<FlowResult> {
        flow(&self.x, &self.slice_point(z), z[0], self.flow_tol)
    }

    /// Solve `flow(slice(z₂..), z₁) = q` by damped Newton iteration,
    /// returning the chart coordinates and the endpoint Jacobian columns
    /// `[X(q) | Φ·b₂ | ... | Φ·bₙ]`.
    fn solve(&self, q: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = self.p.len();
        let mut z = vec![0.0; n];
        let dq: Vec<f64> = q.iter().zip(&self.p).map(|(a, b)| a - b).collect();
        let v0: Vec<f64> = self.x.value_at(&self.p)?;
        let vv = v0.iter().map(|a| a * a).sum::<f64>();
        z[0] = dq.iter().zip(&v0).map(|(a, b)| a * b).sum::<f64>() / vv;
        for (j, b) in self.basis.iter().enumerate() {
            z[j + 1] = dq.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        }

        let mut result = self.endpoint(&z)?;
        let mut residual: Vec<f64> =
            result.endpoint.iter().zip(q).map(|(a, b)| a - b).collect();
        let mut rnorm = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));

        for iteration in 0..60 {
            if rnorm < self.newton_tol {
                let jac = self.jacobian_columns(&result)?;
                return Ok((z, jac));
            }
            let jac = self.jacobian_columns(&result)?;
            let lu = jac.clone().lu();
            let rhs = nalgebra::DVector::from_iterator(n, residual.iter().map(|r| -r));
            let delta = lu.solve(&rhs).ok_or(Error::NewtonDivergence {
                residual: rnorm,
                iterations: iteration,
            })?;

            // Backtracking line search on the residual norm.
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..8 {
                let zc: Vec<f64> = z
                    .iter()
                    .zip(delta.iter())
                    .map(|(a, d)| a + alpha * d)
                    .collect();
                match self.endpoint(&zc) {
                    Ok(rc) => {
                        let res: Vec<f64> =
                            rc.endpoint.iter().zip(q).map(|(a, b)| a - b).collect();
                        let rn = res.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
                        if rn < rnorm * (1.0 - 0.25 * alpha) || rn < self.newton_tol {
                            z = zc;
                            result = rc;
                            residual = res;
                            rnorm = rn;
                            improved = true;
                            break;
                        }
                    }
                    Err(_) => {}
                }
                alpha *= 0.5;
            }
            if !improved {
                return Err(Error::NewtonDivergence {
                    residual: rnorm,
                    iterations: iteration,
                });
            }
        }
        Err(Error::NewtonDivergence {
            residual: rnorm,
            iterations: 60,
        })
    }

    fn jacobian_columns(&self, at: &FlowResult) -> Result<DMatrix<f64>> {
        let n = self.p.len();
        let mut jac = DMatrix::zeros(n, n);
        let velocity = self.x.value_at(&at.endpoint)?;
        for (i, v) in velocity.iter().enumerate() {
            jac[(i, 0)] = *v;
        }
        for (j, b) in self.basis.iter().enumerate() {
            let col = &at.fundamental * nalgebra::DVector::from_vec(b.clone());
            for i in 0..n {
                jac[(i, j + 1)] = col[i];
            }
        }
        Ok(jac)
    }
}

/// Build a flow-box (straightening) chart for `x` around the regular point
/// `p`: in the returned coordinates the field is `∂/∂y¹`. The chart is
/// declared on the open cube of half-width `radius` around `p` and verified
/// at sampled points to `10·tol` before being returned.
pub fn flow_box_chart(x: &VectorField, p: &[f64], radius: f64, tol: f64) -> Result<Chart> {
    let chart = flow_box_chart_unverified(x, p, radius, tol)?;
    let mut e1 = vec![0.0; x.dim()];
    e1[0] = 1.0;
    verify_pushforward(&chart, x, move |_y| e1.clone(), 10.0 * tol)?;
    Ok(chart)
}

fn flow_box_chart_unverified(
    x: &VectorField,
    p: &[f64],
    radius: f64,
    tol: f64,
) -> Result<Chart> {
    let n = x.dim();
    if p.len() != n {
        return Err(Error::Dimension("chart base point dimension mismatch".into()));
    }
    if !(radius > 0.0 && radius.is_finite() && tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(
            "chart radius and tolerance must be positive and finite".into(),
        ));
    }
    let v = x.value_at(p)?;
    let vnorm = v.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let scale = 1.0 + p.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if vnorm <= 1e-8 * scale {
        return Err(Error::SingularPoint { norm: vnorm });
    }
    let basis = transverse_basis(&v);
    let flow_tol = (tol * 1e-2).max(1e-13);
    let domain = DomainBox::around(p, radius);

    let shooter = std::sync::Arc::new(Shooter {
        x: x.clone(),
        p: p.to_vec(),
        basis: basis.clone(),
        newton_tol: tol,
        flow_tol,
    });

    // Forward: manifold point -> (time, slice offsets). Each component
    // reruns the same Newton solve; charts are evaluated at a handful of
    // points per check, so clarity wins over caching here.
    let forward_components: Vec<ScalarField> = (0..n)
        .map(|i| {
            let sh = shooter.clone();
            ScalarField::from_fn(n, domain.clone(), move |inputs: &[Jet]| {
                let q: Vec<f64> = inputs.iter().map(|j| j.value()).collect();
                let (z, jac) = sh.solve(&q)?;
                let inv = jac.clone().try_inverse().ok_or(Error::NewtonDivergence {
                    residual: f64::INFINITY,
                    iterations: 0,
                })?;
                let dvals: Vec<f64> = (0..q.len()).map(|c| inv[(i, c)]).collect();
                Jet::compose_linear(z[i], &dvals, inputs)
            })
        })
        .collect();

    // Inverse: (time, offsets) -> flow endpoint. The Jacobian columns come
    // straight from the fundamental matrix.
    let y_domain = DomainBox::unbounded(n);
    let inverse_components: Vec<ScalarField> = (0..n)
        .map(|i| {
            let sh = shooter.clone();
            ScalarField::from_fn(n, y_domain.clone(), move |inputs: &[Jet]| {
                let z: Vec<f64> = inputs.iter().map(|j| j.value()).collect();
                let result = sh.endpoint(&z)?;
                let jac = sh.jacobian_columns(&result)?;
                let dvals: Vec<f64> = (0..z.len()).map(|c| jac[(i, c)]).collect();
                Jet::compose_linear(result.endpoint[i], &dvals, inputs)
            })
        })
        .collect();

    Ok(Chart {
        forward: SmoothMap::new(forward_components)?,
        inverse: SmoothMap::new(inverse_components)?,
        domain,
    })
}

/// Build a chart in which `x` becomes the radial field `x^i ∂_i`: a flow-box
/// chart post-composed with `x¹ = e^{y¹}, x^i = y^i e^{y¹}`. Verified at
/// sampled points to `10·tol`.
pub fn extensive_chart_from_field(
    x: &VectorField,
    p: &[f64],
    radius: f64,
    tol: f64,
) -> Result<Chart> {
    let n = x.dim();
    let fb = flow_box_chart_unverified(x, p, radius, tol)?;

    // y -> e: first coordinate exponentiates, the rest ride along.
    let y_domain = DomainBox::unbounded(n);
    let mut scale_components: Vec<ScalarField> = Vec::with_capacity(n);
    scale_components.push(ScalarField::from_fn(n, y_domain.clone(), |inputs| {
        Ok(inputs[0].exp())
    }));
    for i in 1..n {
        scale_components.push(ScalarField::from_fn(n, y_domain.clone(), move |inputs| {
            inputs[i].mul(&inputs[0].exp())
        }));
    }
    let rescale = SmoothMap::new(scale_components)?;

    // e -> y: logarithm and ratios; first coordinate must stay positive.
    let mut lo = vec![f64::NEG_INFINITY; n];
    lo[0] = 0.0;
    let e_domain = DomainBox::new(lo, vec![f64::INFINITY; n])?;
    let mut unscale_components: Vec<ScalarField> = Vec::with_capacity(n);
    unscale_components.push(ScalarField::from_fn(n, e_domain.clone(), |inputs| {
        inputs[0].ln()
    }));
    for i in 1..n {
        unscale_components.push(ScalarField::from_fn(n, e_domain.clone(), move |inputs| {
            inputs[i].div(&inputs[0])
        }));
    }
    let unscale = SmoothMap::new(unscale_components)?;

    let chart = Chart {
        forward: rescale.compose(&fb.forward)?,
        inverse: fb.inverse.compose(&unscale)?,
        domain: fb.domain,
    };
    verify_pushforward(&chart, x, |image| image.to_vec(), 10.0 * tol)?;
    Ok(chart)
}

/// Check `J_forward(q) · X(q) = expected(forward(q))` at sampled points of
/// the chart domain; error out when the worst residual exceeds `allowed`.
fn verify_pushforward(
    chart: &Chart,
    x: &VectorField,
    expected: impl Fn(&[f64]) -> Vec<f64>,
    allowed: f64,
) -> Result<()> {
    let sample_box = chart.domain.shrunk(0.75);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c4a2);
    let mut checked = 0usize;
    let mut max_residual = 0.0_f64;
    let mut last_err: Option<Error> = None;
    for _ in 0..24 {
        if checked >= 8 {
            break;
        }
        let q: Vec<f64> = sample_box
            .lo()
            .iter()
            .zip(sample_box.hi())
            .map(|(a, b)| a + rng.gen::<f64>() * (b - a))
            .collect();
        let outcome = (|| -> Result<f64> {
            let pushed = pushforward(&chart.forward, x, &q)?;
            let image = chart.forward.eval_at(&q)?;
            let want = expected(&image);
            Ok(pushed
                .iter()
                .zip(&want)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
        })();
        match outcome {
            Ok(r) => {
                checked += 1;
                max_residual = max_residual.max(r);
            }
            Err(e) => last_err = Some(e),
        }
    }
    if checked < 4 {
        return Err(last_err.unwrap_or_else(|| {
            Error::InvalidArgument("chart verification could not evaluate samples".into())
        }));
    }
    if max_residual > allowed {
        return Err(Error::ChartVerification {
            max_residual,
            allowed,
        });
    }
    Ok(())
}
