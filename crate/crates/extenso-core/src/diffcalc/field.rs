//! Scalar fields and smooth maps over open boxes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::diffcalc::jet::{Jet, MAX_ORDER};
use crate::error::{Error, Result};
use crate::expr::{eval_ast, Expression};

/// An open axis-aligned box in R^n; `±∞` bounds are allowed.
///
/// All membership tests are strict: fields are defined on the interior only,
/// so boundary points are already outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<DomainBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument(
                "domain box bounds must be non-empty and of equal length".into(),
            ));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a < b) {
                return Err(Error::InvalidArgument(format!(
                    "domain box needs lo < hi in every coordinate (got [{a}, {b}])"
                )));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    /// All of R^n.
    pub fn unbounded(n: usize) -> DomainBox {
        DomainBox {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    /// The open positive orthant (0, ∞)^n.
    pub fn positive_orthant(n: usize) -> DomainBox {
        DomainBox {
            lo: vec![0.0; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    /// The open cube of half-width `radius` centered at `p`.
    pub fn around(p: &[f64], radius: f64) -> DomainBox {
        DomainBox {
            lo: p.iter().map(|v| v - radius).collect(),
            hi: p.iter().map(|v| v + radius).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.lo.len()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| a < x && x < b)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().all(|v| v.is_finite()) && self.hi.iter().all(|v| v.is_finite())
    }

    /// Intersection of two boxes over the same space.
    pub fn intersect(&self, other: &DomainBox) -> Result<DomainBox> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot intersect boxes of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let lo: Vec<f64> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(a, b)| a.max(*b))
            .collect();
        let hi: Vec<f64> = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(a, b)| a.min(*b))
            .collect();
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::EmptyOverlap);
        }
        Ok(DomainBox { lo, hi })
    }

    /// Shrink bounded coordinates toward the center by `factor` ∈ (0, 1];
    /// unbounded coordinates are left alone. Used to keep sampled points
    /// comfortably interior.
    pub fn shrunk(&self, factor: f64) -> DomainBox {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for i in 0..self.dim() {
            if lo[i].is_finite() && hi[i].is_finite() {
                let c = 0.5 * (lo[i] + hi[i]);
                let h = 0.5 * (hi[i] - lo[i]) * factor;
                lo[i] = c - h;
                hi[i] = c + h;
            }
        }
        DomainBox { lo, hi }
    }

    fn describe_violation(&self, p: &[f64]) -> String {
        if p.len() != self.dim() {
            return format!("point has {} coordinates, box has {}", p.len(), self.dim());
        }
        for (i, x) in p.iter().enumerate() {
            if !(self.lo[i] < *x && *x < self.hi[i]) {
                return format!(
                    "coordinate {i} = {x} not in ({}, {})",
                    self.lo[i], self.hi[i]
                );
            }
        }
        "inside".into()
    }
}

type NativeBody = Arc<dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync>;

#[derive(Clone)]
enum Body {
    Expr {
        ast: Arc<Expression>,
        vars: Arc<Vec<String>>,
        consts: Arc<BTreeMap<String, f64>>,
    },
    Native(NativeBody),
}

/// A smooth scalar function on an open box, evaluated on jets.
///
/// Two backings share one interface: parsed expressions (closed under
/// differentiation to order 3) and native closures (used for derived
/// quantities, coefficient arithmetic, and flow-backed charts). Cloning is
/// cheap — the backing is reference-counted.
#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    domain: DomainBox,
    body: Body,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Expr { ast, .. } => write!(f, "ScalarField({} vars, `{ast}`)", self.n),
            Body::Native(_) => write!(f, "ScalarField({} vars, native)", self.n),
        }
    }
}

impl ScalarField {
    /// Wrap a parsed expression. `vars` fixes the coordinate slot order;
    /// every identifier in the expression must be a variable or a constant.
    pub fn from_expr(
        expr: Expression,
        vars: &[&str],
        consts: &BTreeMap<String, f64>,
        domain: DomainBox,
    ) -> Result<ScalarField> {
        if vars.len() != domain.dim() {
            return Err(Error::Dimension(format!(
                "{} variables but a {}-dimensional domain",
                vars.len(),
                domain.dim()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in vars {
            if !seen.insert(*v) {
                return Err(Error::InvalidArgument(format!("duplicate variable `{v}`")));
            }
        }
        for ident in expr.free_idents() {
            if !seen.contains(ident.as_str()) && !consts.contains_key(&ident) {
                return Err(Error::Unbound(ident));
            }
        }
        Ok(ScalarField {
            n: vars.len(),
            domain,
            body: Body::Expr {
                ast: Arc::new(expr),
                vars: Arc::new(vars.iter().map(|s| s.to_string()).collect()),
                consts: Arc::new(consts.clone()),
            },
        })
    }

    /// Parse-and-wrap convenience.
    pub fn parse(
        src: &str,
        vars: &[&str],
        consts: &BTreeMap<String, f64>,
        domain: DomainBox,
    ) -> Result<ScalarField> {
        ScalarField::from_expr(Expression::parse(src)?, vars, consts, domain)
    }

    /// Wrap a native jet-to-jet closure.
    pub fn from_fn(
        n: usize,
        domain: DomainBox,
        f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    ) -> ScalarField {
        assert_eq!(n, domain.dim(), "field arity must match its domain");
        ScalarField {
            n,
            domain,
            body: Body::Native(Arc::new(f)),
        }
    }

    /// The i-th coordinate function on `domain`.
    pub fn coordinate(i: usize, domain: DomainBox) -> ScalarField {
        let n = domain.dim();
        assert!(i < n, "coordinate index out of range");
        ScalarField::from_fn(n, domain, move |inputs| Ok(inputs[i].clone()))
    }

    /// The constant function `c` on `domain`.
    pub fn constant(c: f64, domain: DomainBox) -> ScalarField {
        let n = domain.dim();
        ScalarField::from_fn(n, domain, move |inputs| {
            let (d, ord) = shape_of(inputs)?;
            Ok(Jet::constant(d, ord, c))
        })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Same field on a smaller (or differently clipped) domain.
    pub fn restricted(&self, domain: DomainBox) -> Result<ScalarField> {
        if domain.dim() != self.n {
            return Err(Error::Dimension(
                "restriction domain has the wrong dimension".into(),
            ));
        }
        let mut out = self.clone();
        out.domain = domain;
        Ok(out)
    }

    /// Evaluate on caller-supplied jets (the engine behind everything else).
    ///
    /// The jet values must form a point interior to the declared domain;
    /// their ambient dimension is free, which is what makes composition work.
    pub fn eval_on_jets(&self, inputs: &[Jet]) -> Result<Jet> {
        if inputs.len() != self.n {
            return Err(Error::Dimension(format!(
                "field of {} variables applied to {} jets",
                self.n,
                inputs.len()
            )));
        }
        let (d, ord) = shape_of(inputs)?;
        let point: Vec<f64> = inputs.iter().map(|j| j.value()).collect();
        if !self.domain.contains(&point) {
            return Err(Error::OutsideDomain(self.domain.describe_violation(&point)));
        }
        match &self.body {
            Body::Expr { ast, vars, consts } => {
                let slots: BTreeMap<String, usize> = vars
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), i))
                    .collect();
                eval_ast(ast.root(), &slots, consts, inputs, d, ord)
            }
            Body::Native(f) => f(inputs),
        }
    }

    /// Jet of the field at a point, seeding coordinates as variables.
    pub fn jet_at(&self, p: &[f64], order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: MAX_ORDER,
                context: "jet_at".into(),
            });
        }
        if p.len() != self.n {
            return Err(Error::Dimension(format!(
                "point of dimension {} for a field of {} variables",
                p.len(),
                self.n
            )));
        }
        let seeds: Vec<Jet> = p
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(self.n, order, i, v))
            .collect();
        self.eval_on_jets(&seeds)
    }

    pub fn value_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.jet_at(p, 0)?.value())
    }

    pub fn gradient_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet_at(p, 1)?.gradient().to_vec())
    }

    pub fn hessian_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.jet_at(p, 2)?.hessian_matrix()
    }

    // -- combinators --------------------------------------------------------

    fn combine(
        &self,
        other: &ScalarField,
        op: impl Fn(&Jet, &Jet) -> Result<Jet> + Send + Sync + 'static,
    ) -> Result<ScalarField> {
        if self.n != other.n {
            return Err(Error::Dimension(
                "combined fields must share their variable count".into(),
            ));
        }
        let a = self.clone();
        let b = other.clone();
        let domain = self.domain.intersect(&other.domain)?;
        Ok(ScalarField::from_fn(self.n, domain, move |inputs| {
            op(&a.eval_on_jets(inputs)?, &b.eval_on_jets(inputs)?)
        }))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, |a, b| a.sub(b))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, |a, b| a.mul(b))
    }

    pub fn div(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, |a, b| a.div(b))
    }

    pub fn neg(&self) -> ScalarField {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let a = self.clone();
        ScalarField::from_fn(self.n, self.domain.clone(), move |inputs| {
            Ok(a.eval_on_jets(inputs)?.scale(c))
        })
    }

    pub fn add_constant(&self, c: f64) -> ScalarField {
        let a = self.clone();
        ScalarField::from_fn(self.n, self.domain.clone(), move |inputs| {
            Ok(a.eval_on_jets(inputs)?.add_constant(c))
        })
    }

    pub fn recip(&self) -> ScalarField {
        let a = self.clone();
        ScalarField::from_fn(self.n, self.domain.clone(), move |inputs| {
            a.eval_on_jets(inputs)?.recip()
        })
    }

    /// The field `∂_i self`, evaluated by carrying one extra derivative
    /// order through the base field and composing back onto the inputs.
    /// Supports jets up to order `MAX_ORDER - 1`.
    pub fn partial(&self, i: usize) -> Result<ScalarField> {
        if i >= self.n {
            return Err(Error::Dimension(format!(
                "partial index {i} out of range for {} variables",
                self.n
            )));
        }
        let base = self.clone();
        Ok(ScalarField::from_fn(
            self.n,
            self.domain.clone(),
            move |inputs| {
                let (_, ord) = shape_of(inputs)?;
                if ord + 1 > MAX_ORDER {
                    return Err(Error::UnsupportedOrder {
                        requested: ord,
                        max: MAX_ORDER - 1,
                        context: "jet of a first-derivative field".into(),
                    });
                }
                let point: Vec<f64> = inputs.iter().map(|j| j.value()).collect();
                let full = base.jet_at(&point, ord + 1)?;
                Jet::compose(&full.extract_partial(i)?, inputs)
            },
        ))
    }

    /// The field `∂_i ∂_j self`; supports jets up to order `MAX_ORDER - 2`.
    pub fn second_partial(&self, i: usize, j: usize) -> Result<ScalarField> {
        if i >= self.n || j >= self.n {
            return Err(Error::Dimension(format!(
                "second-partial indices ({i}, {j}) out of range for {} variables",
                self.n
            )));
        }
        let base = self.clone();
        Ok(ScalarField::from_fn(
            self.n,
            self.domain.clone(),
            move |inputs| {
                let (_, ord) = shape_of(inputs)?;
                if ord + 2 > MAX_ORDER {
                    return Err(Error::UnsupportedOrder {
                        requested: ord,
                        max: MAX_ORDER - 2,
                        context: "jet of a second-derivative field".into(),
                    });
                }
                let point: Vec<f64> = inputs.iter().map(|j| j.value()).collect();
                let full = base.jet_at(&point, ord + 2)?;
                Jet::compose(&full.extract_second(i, j)?, inputs)
            },
        ))
    }
}

pub(crate) fn shape_of(inputs: &[Jet]) -> Result<(usize, usize)> {
    let first = inputs.first().ok_or_else(|| {
        Error::Dimension("evaluation needs at least one input jet".into())
    })?;
    let (d, ord) = (first.dim(), first.order());
    for j in inputs {
        if j.dim() != d || j.order() != ord {
            return Err(Error::Dimension(
                "input jets must share dimension and order".into(),
            ));
        }
    }
    Ok((d, ord))
}

/// A smooth map between open boxes, stored componentwise.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    source_dim: usize,
    target_dim: usize,
    domain: DomainBox,
    components: Vec<ScalarField>,
}

impl SmoothMap {
    /// Bundle scalar components (all over the same source space) into a map.
    pub fn new(components: Vec<ScalarField>) -> Result<SmoothMap> {
        let first = components.first().ok_or_else(|| {
            Error::InvalidArgument("a map needs at least one component".into())
        })?;
        let source_dim = first.arity();
        let mut domain = first.domain().clone();
        for c in &components[1..] {
            if c.arity() != source_dim {
                return Err(Error::Dimension(
                    "map components must share their source dimension".into(),
                ));
            }
            domain = domain.intersect(c.domain())?;
        }
        Ok(SmoothMap {
            source_dim,
            target_dim: components.len(),
            domain,
            components,
        })
    }

    /// The identity map of `domain`.
    pub fn identity(domain: DomainBox) -> SmoothMap {
        let n = domain.dim();
        let components = (0..n)
            .map(|i| ScalarField::coordinate(i, domain.clone()))
            .collect();
        SmoothMap::new(components).expect("identity map is always well-formed")
    }

    /// Parse components from expression sources sharing one variable list.
    pub fn from_exprs(
        sources: &[&str],
        vars: &[&str],
        consts: &BTreeMap<String, f64>,
        domain: DomainBox,
    ) -> Result<SmoothMap> {
        let components = sources
            .iter()
            .map(|src| ScalarField::parse(src, vars, consts, domain.clone()))
            .collect::<Result<Vec<_>>>()?;
        SmoothMap::new(components)
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Intersection of all component domains.
    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn eval_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.value_at(p)).collect()
    }

    pub fn eval_on_jets(&self, inputs: &[Jet]) -> Result<Vec<Jet>> {
        self.components
            .iter()
            .map(|c| c.eval_on_jets(inputs))
            .collect()
    }

    /// Jacobian at `p`: `target_dim` rows by `source_dim` columns.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.target_dim, self.source_dim);
        for (r, c) in self.components.iter().enumerate() {
            let jet = c.jet_at(p, 1)?;
            for (s, g) in jet.gradient().iter().enumerate() {
                out[(r, s)] = *g;
            }
        }
        Ok(out)
    }

    /// The composite `self ∘ inner` (apply `inner` first).
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if inner.target_dim != self.source_dim {
            return Err(Error::Dimension(format!(
                "cannot compose: inner target dimension {} differs from outer source dimension {}",
                inner.target_dim, self.source_dim
            )));
        }
        let components = (0..self.target_dim)
            .map(|i| {
                let outer_c = self.components[i].clone();
                let inner_cl = inner.clone();
                ScalarField::from_fn(
                    inner.source_dim,
                    inner.domain.clone(),
                    move |inputs| {
                        let mids = inner_cl.eval_on_jets(inputs)?;
                        outer_c.eval_on_jets(&mids)
                    },
                )
            })
            .collect();
        SmoothMap::new(components)
    }
}
