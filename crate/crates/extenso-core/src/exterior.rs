//! Exterior calculus in a fixed chart: k-forms with field coefficients,
//! wedge products, exterior derivatives, contractions, Lie derivatives,
//! and pullbacks.
//!
//! Coefficients are stored sparsely against strictly increasing
//! multi-indices, so every basis k-form appears exactly once and sign
//! bookkeeping reduces to counting inversions when indices merge. Forms come
//! in two flavors: [`KForm`] holds [`ScalarField`] coefficients (an object
//! you can differentiate), while [`FormValue`] is its pointwise evaluation
//! (an object you can compare). Operations that only need values — wedge of
//! evaluations, contraction with a vector, pullback through a Jacobian —
//! live on [`FormValue`]; everything needing derivatives goes through
//! [`KForm`].

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::diffcalc::{DomainBox, ScalarField, SmoothMap};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------------

/// A strictly increasing tuple of coordinate indices naming a basis k-form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Build from a strictly increasing index list.
    pub fn new(indices: Vec<usize>) -> Result<MultiIndex> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(format!(
                    "multi-index {indices:?} is not strictly increasing"
                )));
            }
        }
        Ok(MultiIndex(indices))
    }

    /// The empty index (degree 0).
    pub fn empty() -> MultiIndex {
        MultiIndex(Vec::new())
    }

    /// The singleton index for `dx^i`.
    pub fn single(i: usize) -> MultiIndex {
        MultiIndex(vec![i])
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Insert `i`, returning the sign `(-1)^position` of moving `dx^i` past
    /// the earlier factors; `None` if `i` already occurs.
    pub fn insert(&self, i: usize) -> Option<(f64, MultiIndex)> {
        match self.0.binary_search(&i) {
            Ok(_) => None,
            Err(pos) => {
                let mut v = self.0.clone();
                v.insert(pos, i);
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                Some((sign, MultiIndex(v)))
            }
        }
    }

    /// Remove `i`, returning the same sign convention; `None` if absent.
    pub fn remove(&self, i: usize) -> Option<(f64, MultiIndex)> {
        match self.0.binary_search(&i) {
            Err(_) => None,
            Ok(pos) => {
                let mut v = self.0.clone();
                v.remove(pos);
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                Some((sign, MultiIndex(v)))
            }
        }
    }

    /// Merge with a disjoint index, returning the shuffle sign; `None` when
    /// the indices overlap (the wedge vanishes).
    pub fn merge(&self, other: &MultiIndex) -> Option<(f64, MultiIndex)> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let mut inversions = 0usize;
        let (mut a, mut b) = (0usize, 0usize);
        while a < self.0.len() && b < other.0.len() {
            if self.0[a] == other.0[b] {
                return None;
            }
            if self.0[a] < other.0[b] {
                out.push(self.0[a]);
                a += 1;
            } else {
                // other.0[b] jumps over the remaining entries of self
                inversions += self.0.len() - a;
                out.push(other.0[b]);
                b += 1;
            }
        }
        out.extend_from_slice(&self.0[a..]);
        out.extend_from_slice(&other.0[b..]);
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        Some((sign, MultiIndex(out)))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|i| format!("dx{i}")).collect();
        write!(f, "{}", parts.join("^"))
    }
}

/// All strictly increasing k-subsets of `0..n`, in lexicographic order.
pub fn increasing_indices(n: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if current.len() == k {
            out.push(MultiIndex(current.clone()));
            return;
        }
        for i in start..n {
            current.push(i);
            rec(n, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(n, k, 0, &mut current, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Pointwise form values
// ---------------------------------------------------------------------------

/// The value of a k-form at one point: numbers per increasing multi-index.
///
/// Absent indices mean zero. Degree `n + 1` is allowed only as the
/// structurally empty result of differentiating a top form.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    n: usize,
    k: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl FormValue {
    pub fn zero(n: usize, k: usize) -> FormValue {
        FormValue {
            n,
            k,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn scalar(n: usize, value: f64) -> FormValue {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(MultiIndex::empty(), value);
        FormValue { n, k: 0, coeffs }
    }

    pub fn from_coeffs(
        n: usize,
        k: usize,
        coeffs: BTreeMap<MultiIndex, f64>,
    ) -> Result<FormValue> {
        for idx in coeffs.keys() {
            check_index(idx, n, k)?;
        }
        Ok(FormValue { n, k, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeff(&self, idx: &MultiIndex) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.coeffs.iter()
    }

    pub fn set(&mut self, idx: MultiIndex, value: f64) -> Result<()> {
        check_index(&idx, self.n, self.k)?;
        self.coeffs.insert(idx, value);
        Ok(())
    }

    fn accumulate(&mut self, idx: MultiIndex, value: f64) {
        *self.coeffs.entry(idx).or_insert(0.0) += value;
    }

    fn compat(&self, other: &FormValue) -> Result<()> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::Dimension(format!(
                "form values differ in shape: ({}, degree {}) vs ({}, degree {})",
                self.n, self.k, other.n, other.k
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &FormValue) -> Result<FormValue> {
        self.compat(other)?;
        let mut out = self.clone();
        for (idx, v) in &other.coeffs {
            out.accumulate(idx.clone(), *v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &FormValue) -> Result<FormValue> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> FormValue {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out
    }

    /// Largest coefficient magnitude (0 for the empty form).
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise wedge with sign bookkeeping via index merges.
    pub fn wedge(&self, other: &FormValue) -> Result<FormValue> {
        if self.n != other.n {
            return Err(Error::Dimension(
                "wedge operands live in different dimensions".into(),
            ));
        }
        let k = self.k + other.k;
        let mut out = FormValue::zero(self.n, k);
        if k > self.n {
            return Ok(out); // identically zero above top degree
        }
        for (ia, va) in &self.coeffs {
            for (ib, vb) in &other.coeffs {
                if let Some((sign, merged)) = ia.merge(ib) {
                    out.accumulate(merged, sign * va * vb);
                }
            }
        }
        Ok(out)
    }

    /// Contraction with vector components: `(ι_X ω)(...) = ω(X, ...)`.
    pub fn contract(&self, x: &[f64]) -> Result<FormValue> {
        if x.len() != self.n {
            return Err(Error::Dimension(
                "contraction vector has the wrong dimension".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "cannot contract a 0-form with a vector".into(),
            ));
        }
        let mut out = FormValue::zero(self.n, self.k - 1);
        for (idx, v) in &self.coeffs {
            for &i in idx.indices() {
                let (sign, rest) = idx.remove(i).expect("index is present");
                out.accumulate(rest, sign * x[i] * v);
            }
        }
        Ok(out)
    }
}

fn check_index(idx: &MultiIndex, n: usize, k: usize) -> Result<()> {
    if idx.degree() != k {
        return Err(Error::Dimension(format!(
            "index {idx} has degree {}, form has degree {k}",
            idx.degree()
        )));
    }
    if idx.indices().iter().any(|&i| i >= n) {
        return Err(Error::Dimension(format!(
            "index {idx} out of range for dimension {n}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Forms with field coefficients
// ---------------------------------------------------------------------------

/// A differential k-form with scalar-field coefficients.
#[derive(Debug, Clone)]
pub struct KForm {
    n: usize,
    k: usize,
    coeffs: BTreeMap<MultiIndex, ScalarField>,
}

impl KForm {
    pub fn zero(n: usize, k: usize) -> KForm {
        KForm {
            n,
            k,
            coeffs: BTreeMap::new(),
        }
    }

    /// Degree-0 form wrapping a function.
    pub fn scalar(f: ScalarField) -> KForm {
        let n = f.arity();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(MultiIndex::empty(), f);
        KForm { n, k: 0, coeffs }
    }

    /// One-form from per-coordinate coefficients (must supply all `n`).
    pub fn one_form(components: Vec<ScalarField>) -> Result<KForm> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidArgument("one-form needs components".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (i, c) in components.into_iter().enumerate() {
            if c.arity() != n {
                return Err(Error::Dimension(
                    "one-form coefficients must be functions of all n coordinates".into(),
                ));
            }
            coeffs.insert(MultiIndex::single(i), c);
        }
        Ok(KForm { n, k: 1, coeffs })
    }

    /// The constant basis form `dx^i` on `domain`.
    pub fn dx(i: usize, domain: &DomainBox) -> KForm {
        let n = domain.dim();
        assert!(i < n);
        let mut coeffs = BTreeMap::new();
        coeffs.insert(
            MultiIndex::single(i),
            ScalarField::constant(1.0, domain.clone()),
        );
        KForm { n, k: 1, coeffs }
    }

    /// Assemble from explicit (index, coefficient) pairs.
    pub fn from_coeffs(
        n: usize,
        k: usize,
        entries: Vec<(MultiIndex, ScalarField)>,
    ) -> Result<KForm> {
        let mut coeffs = BTreeMap::new();
        for (idx, f) in entries {
            check_index(&idx, n, k)?;
            if f.arity() != n {
                return Err(Error::Dimension(
                    "coefficient arity must match the form dimension".into(),
                ));
            }
            if coeffs.insert(idx.clone(), f).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate coefficient for index {idx}"
                )));
            }
        }
        Ok(KForm { n, k, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Option<&ScalarField> {
        self.coeffs.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &ScalarField)> {
        self.coeffs.iter()
    }

    /// Evaluate all coefficients at a point.
    pub fn value_at(&self, p: &[f64]) -> Result<FormValue> {
        let mut out = FormValue::zero(self.n, self.k);
        for (idx, f) in &self.coeffs {
            out.coeffs.insert(idx.clone(), f.value_at(p)?);
        }
        Ok(out)
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::Dimension("form shapes differ in add".into()));
        }
        let mut coeffs = self.coeffs.clone();
        for (idx, f) in &other.coeffs {
            let merged = match coeffs.remove(idx) {
                Some(existing) => existing.add(f)?,
                None => f.clone(),
            };
            coeffs.insert(idx.clone(), merged);
        }
        Ok(KForm {
            n: self.n,
            k: self.k,
            coeffs,
        })
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> KForm {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(idx, f)| (idx.clone(), f.scale(c)))
            .collect();
        KForm {
            n: self.n,
            k: self.k,
            coeffs,
        }
    }

    pub fn scale_by(&self, factor: &ScalarField) -> Result<KForm> {
        let mut coeffs = BTreeMap::new();
        for (idx, f) in &self.coeffs {
            coeffs.insert(idx.clone(), f.mul(factor)?);
        }
        Ok(KForm {
            n: self.n,
            k: self.k,
            coeffs,
        })
    }
}

// ---------------------------------------------------------------------------
// Vector fields and symmetric 2-tensors
// ---------------------------------------------------------------------------

/// A vector field with scalar-field components.
#[derive(Debug, Clone)]
pub struct VectorField {
    n: usize,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<VectorField> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidArgument("vector field needs components".into()));
        }
        for c in &components {
            if c.arity() != n {
                return Err(Error::Dimension(
                    "vector components must be functions of all n coordinates".into(),
                ));
            }
        }
        Ok(VectorField { n, components })
    }

    /// The radial (Euler) field `x^i ∂_i` on `domain`.
    pub fn radial(domain: &DomainBox) -> VectorField {
        let n = domain.dim();
        let components = (0..n)
            .map(|i| ScalarField::coordinate(i, domain.clone()))
            .collect();
        VectorField { n, components }
    }

    pub fn from_exprs(
        sources: &[&str],
        vars: &[&str],
        consts: &BTreeMap<String, f64>,
        domain: DomainBox,
    ) -> Result<VectorField> {
        let components = sources
            .iter()
            .map(|s| ScalarField::parse(s, vars, consts, domain.clone()))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(components)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    /// Common domain of all components.
    pub fn domain(&self) -> Result<DomainBox> {
        let mut d = self.components[0].domain().clone();
        for c in &self.components[1..] {
            d = d.intersect(c.domain())?;
        }
        Ok(d)
    }

    pub fn value_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.value_at(p)).collect()
    }

    /// Component Jacobian `∂_j X^i` at `p` (rows = components).
    pub fn jacobian_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (i, c) in self.components.iter().enumerate() {
            let jet = c.jet_at(p, 1)?;
            for (j, g) in jet.gradient().iter().enumerate() {
                out[(i, j)] = *g;
            }
        }
        Ok(out)
    }
}

/// A field of symmetric 2-tensors (covariant), e.g. a metric candidate.
#[derive(Debug, Clone)]
pub struct SymTensor2Field {
    n: usize,
    // Row-major upper storage mirrored on construction; we keep all n*n
    // entries as fields for uniform evaluation.
    entries: Vec<ScalarField>,
}

impl SymTensor2Field {
    /// Build from entries for i ≤ j; the lower triangle is mirrored.
    pub fn from_upper(n: usize, upper: Vec<((usize, usize), ScalarField)>) -> Result<SymTensor2Field> {
        let mut slots: Vec<Option<ScalarField>> = vec![None; n * n];
        for ((i, j), f) in upper {
            if i > j || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "upper-triangle entry ({i}, {j}) out of range"
                )));
            }
            if f.arity() != n {
                return Err(Error::Dimension(
                    "tensor entries must be functions of all n coordinates".into(),
                ));
            }
            slots[i * n + j] = Some(f.clone());
            slots[j * n + i] = Some(f);
        }
        let zero_domain = slots
            .iter()
            .flatten()
            .next()
            .map(|f| f.domain().clone())
            .unwrap_or_else(|| DomainBox::unbounded(n));
        let entries = slots
            .into_iter()
            .map(|s| s.unwrap_or_else(|| ScalarField::constant(0.0, zero_domain.clone())))
            .collect();
        Ok(SymTensor2Field { n, entries })
    }

    /// The Hessian tensor of a potential (requires order-3 jets of it).
    pub fn hessian_of(potential: &ScalarField) -> Result<SymTensor2Field> {
        let n = potential.arity();
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                upper.push(((i, j), potential.second_partial(i, j)?));
            }
        }
        SymTensor2Field::from_upper(n, upper)
    }

    /// Entry-wise multiplication by a scalar field.
    pub fn scaled_by(&self, factor: &ScalarField) -> Result<SymTensor2Field> {
        let entries = self
            .entries
            .iter()
            .map(|f| f.mul(factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymTensor2Field {
            n: self.n,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.n + j]
    }

    pub fn value_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = self.entries[i * self.n + j].value_at(p)?;
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Wedge product of two forms (field level).
pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    if a.n != b.n {
        return Err(Error::Dimension(
            "wedge operands live in different dimensions".into(),
        ));
    }
    let k = a.k + b.k;
    let mut out = KForm::zero(a.n, k);
    if k > a.n {
        return Ok(out);
    }
    for (ia, fa) in &a.coeffs {
        for (ib, fb) in &b.coeffs {
            if let Some((sign, merged)) = ia.merge(ib) {
                let term = fa.mul(fb)?.scale(sign);
                let entry = match out.coeffs.remove(&merged) {
                    Some(existing) => existing.add(&term)?,
                    None => term,
                };
                out.coeffs.insert(merged, entry);
            }
        }
    }
    Ok(out)
}

/// Exterior derivative as a form with derivative-field coefficients.
///
/// For a top form the result is the structurally empty degree `n + 1` form.
/// Coefficients of the result need jets one order deeper than requested, so
/// they support orders up to `MAX_ORDER - 1`.
pub fn derivative_form(omega: &KForm) -> Result<KForm> {
    let mut out = KForm::zero(omega.n, omega.k + 1);
    if omega.k >= omega.n {
        return Ok(out);
    }
    for (idx, f) in &omega.coeffs {
        for j in 0..omega.n {
            if let Some((sign, widened)) = idx.insert(j) {
                let term = f.partial(j)?.scale(sign);
                let entry = match out.coeffs.remove(&widened) {
                    Some(existing) => existing.add(&term)?,
                    None => term,
                };
                out.coeffs.insert(widened, entry);
            }
        }
    }
    Ok(out)
}

/// Exterior derivative evaluated at a point.
pub fn exterior_derivative(omega: &KForm, p: &[f64]) -> Result<FormValue> {
    let mut out = FormValue::zero(omega.n, omega.k + 1);
    if omega.k >= omega.n {
        return Ok(out);
    }
    for (idx, f) in &omega.coeffs {
        let grad = f.jet_at(p, 1)?;
        for (j, g) in grad.gradient().iter().enumerate() {
            if let Some((sign, widened)) = idx.insert(j) {
                out.accumulate(widened, sign * g);
            }
        }
    }
    Ok(out)
}

/// Interior product `ι_X ω` as a form (field level); degree must be ≥ 1.
pub fn interior_form(x: &VectorField, omega: &KForm) -> Result<KForm> {
    if x.dim() != omega.n {
        return Err(Error::Dimension(
            "contraction operands live in different dimensions".into(),
        ));
    }
    if omega.k == 0 {
        return Err(Error::InvalidArgument(
            "cannot contract a 0-form with a vector field".into(),
        ));
    }
    let mut out = KForm::zero(omega.n, omega.k - 1);
    for (idx, f) in &omega.coeffs {
        for &i in idx.indices() {
            let (sign, rest) = idx.remove(i).expect("index is present");
            let term = f.mul(x.component(i))?.scale(sign);
            let entry = match out.coeffs.remove(&rest) {
                Some(existing) => existing.add(&term)?,
                None => term,
            };
            out.coeffs.insert(rest, entry);
        }
    }
    Ok(out)
}

/// Interior product evaluated at a point.
pub fn interior_product(x: &VectorField, omega: &KForm, p: &[f64]) -> Result<FormValue> {
    omega.value_at(p)?.contract(&x.value_at(p)?)
}

/// Lie derivative of a k-form along a vector field, at a point, via the
/// homotopy identity `L_X = ι_X ∘ d + d ∘ ι_X`.
pub fn lie_derivative_form(x: &VectorField, omega: &KForm, p: &[f64]) -> Result<FormValue> {
    if x.dim() != omega.n {
        return Err(Error::Dimension(
            "Lie derivative operands live in different dimensions".into(),
        ));
    }
    if omega.k == 0 {
        // L_X f = df(X)
        let f = omega
            .coeffs
            .get(&MultiIndex::empty())
            .ok_or_else(|| Error::InvalidArgument("0-form without a coefficient".into()))?;
        let grad = f.jet_at(p, 1)?;
        let xv = x.value_at(p)?;
        let val = grad
            .gradient()
            .iter()
            .zip(&xv)
            .map(|(g, v)| g * v)
            .sum::<f64>();
        return Ok(FormValue::scalar(omega.n, val));
    }
    // ι_X dω at p: dω evaluates pointwise, then contracts with X(p).
    let d_omega = exterior_derivative(omega, p)?;
    let term1 = if omega.k + 1 > omega.n {
        FormValue::zero(omega.n, omega.k)
    } else {
        d_omega.contract(&x.value_at(p)?)?
    };
    // d(ι_X ω) at p: needs the contraction as a field.
    let term2 = exterior_derivative(&interior_form(x, omega)?, p)?;
    term1.add(&term2)
}

/// Lie derivative of a symmetric 2-tensor along a vector field at a point:
/// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`.
pub fn lie_derivative_sym2(
    x: &VectorField,
    g: &SymTensor2Field,
    p: &[f64],
) -> Result<DMatrix<f64>> {
    let n = g.dim();
    if x.dim() != n {
        return Err(Error::Dimension(
            "Lie derivative operands live in different dimensions".into(),
        ));
    }
    let xv = x.value_at(p)?;
    let xjac = x.jacobian_at(p)?; // xjac[(k, i)] = ∂_i X^k
    let gval = g.value_at(p)?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let gij = g.entry(i, j).jet_at(p, 1)?;
            let mut acc = 0.0;
            for k in 0..n {
                acc += xv[k] * gij.gradient()[k];
                acc += gval[(k, j)] * xjac[(k, i)];
                acc += gval[(i, k)] * xjac[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Pull a form value on the target back through a Jacobian: coefficients
/// contract against k×k minors. `jac` has target rows and source columns.
pub fn pullback_value(jac: &DMatrix<f64>, target: &FormValue) -> Result<FormValue> {
    let (t_dim, s_dim) = (jac.nrows(), jac.ncols());
    if t_dim != target.dim() {
        return Err(Error::Dimension(format!(
            "Jacobian has {t_dim} target rows but the form lives in dimension {}",
            target.dim()
        )));
    }
    let k = target.degree();
    if k == 0 {
        return Ok(FormValue::scalar(s_dim, target.coeff(&MultiIndex::empty())));
    }
    let mut out = FormValue::zero(s_dim, k);
    if k > s_dim {
        return Ok(out);
    }
    for source_idx in increasing_indices(s_dim, k) {
        let mut acc = 0.0;
        for (target_idx, v) in target.iter() {
            if *v == 0.0 {
                continue;
            }
            let mut minor = DMatrix::zeros(k, k);
            for (r, &ti) in target_idx.indices().iter().enumerate() {
                for (c, &si) in source_idx.indices().iter().enumerate() {
                    minor[(r, c)] = jac[(ti, si)];
                }
            }
            acc += v * minor.determinant();
        }
        if acc != 0.0 {
            out.coeffs.insert(source_idx, acc);
        }
    }
    Ok(out)
}

/// Pullback `F^*ω` evaluated at a source point `p`.
pub fn pullback(f: &SmoothMap, omega: &KForm, p: &[f64]) -> Result<FormValue> {
    if f.target_dim() != omega.dim() {
        return Err(Error::Dimension(
            "pullback target dimension does not match the form".into(),
        ));
    }
    let image = f.eval_at(p)?;
    let value = omega.value_at(&image)?;
    if omega.degree() == 0 {
        return Ok(FormValue::scalar(f.source_dim(), value.coeff(&MultiIndex::empty())));
    }
    pullback_value(&f.jacobian(p)?, &value)
}
