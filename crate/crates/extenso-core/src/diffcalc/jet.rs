//! Jet arithmetic: values with derivatives to order 3, exact chain rules.

use crate::error::{Error, Result};

/// Highest derivative order a [`Jet`] can carry.
pub const MAX_ORDER: usize = 3;

/// A truncated Taylor expansion of a scalar quantity in `n` variables.
///
/// Storage is dense and fully symmetric: the Hessian keeps all `n²` entries
/// and the third-order tensor all `n³`, with symmetry maintained by
/// construction. Dimensions here stay small (state spaces of a handful of
/// variables), so the redundancy buys simple, branch-free indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: usize,
    value: f64,
    grad: Vec<f64>,  // length n       when order >= 1
    hess: Vec<f64>,  // length n*n     when order >= 2
    third: Vec<f64>, // length n*n*n   when order == 3
}

#[inline]
fn falling_factorial(c: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    for step in 0..k {
        acc *= c - step as f64;
    }
    acc
}

impl Jet {
    fn zeroed(n: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        assert!(n > 0, "jets need at least one variable");
        Jet {
            n,
            order,
            value,
            grad: if order >= 1 { vec![0.0; n] } else { Vec::new() },
            hess: if order >= 2 { vec![0.0; n * n] } else { Vec::new() },
            third: if order >= 3 { vec![0.0; n * n * n] } else { Vec::new() },
        }
    }

    /// The constant function `value`.
    pub fn constant(n: usize, order: usize, value: f64) -> Jet {
        Jet::zeroed(n, order, value)
    }

    /// The coordinate function for `slot`, seeded at `value`.
    pub fn variable(n: usize, order: usize, slot: usize, value: f64) -> Jet {
        assert!(slot < n, "variable slot {slot} out of range for n = {n}");
        let mut j = Jet::zeroed(n, order, value);
        if order >= 1 {
            j.grad[slot] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Gradient slice (empty when the jet has order 0).
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    #[inline]
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.n + j]
    }

    #[inline]
    pub fn third_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.n + j) * self.n + k]
    }

    /// Hessian as a dense symmetric matrix; requires order ≥ 2.
    pub fn hessian_matrix(&self) -> Result<nalgebra::DMatrix<f64>> {
        if self.order < 2 {
            return Err(Error::UnsupportedOrder {
                requested: 2,
                max: self.order,
                context: "hessian from an order < 2 jet".into(),
            });
        }
        Ok(nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.hess))
    }

    fn compat(&self, other: &Jet) -> Result<()> {
        if self.n != other.n || self.order != other.order {
            return Err(Error::Dimension(format!(
                "jet shapes differ: ({}, order {}) vs ({}, order {})",
                self.n, self.order, other.n, other.order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.compat(other)?;
        let mut out = self.clone();
        out.value += other.value;
        for (a, b) in out.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in out.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        for (a, b) in out.third.iter_mut().zip(&other.third) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value *= c;
        for a in out.grad.iter_mut() {
            *a *= c;
        }
        for a in out.hess.iter_mut() {
            *a *= c;
        }
        for a in out.third.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn add_constant(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value += c;
        out
    }

    /// Leibniz product to order 3.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.compat(other)?;
        let n = self.n;
        let mut out = Jet::zeroed(n, self.order, self.value * other.value);
        if self.order >= 1 {
            for i in 0..n {
                out.grad[i] = self.grad[i] * other.value + self.value * other.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.hess[i * n + j] = self.hess_at(i, j) * other.value
                        + self.grad[i] * other.grad[j]
                        + self.grad[j] * other.grad[i]
                        + self.value * other.hess_at(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.third[(i * n + j) * n + k] = self.third_at(i, j, k) * other.value
                            + self.hess_at(i, j) * other.grad[k]
                            + self.hess_at(i, k) * other.grad[j]
                            + self.hess_at(j, k) * other.grad[i]
                            + self.grad[i] * other.hess_at(j, k)
                            + self.grad[j] * other.hess_at(i, k)
                            + self.grad[k] * other.hess_at(i, j)
                            + self.value * other.third_at(i, j, k);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Composition with a scalar function given its derivatives
    /// `d = [h(v), h'(v), h''(v), h'''(v)]` at `v = self.value`.
    fn unary_chain(&self, d: [f64; 4]) -> Jet {
        let n = self.n;
        let mut out = Jet::zeroed(n, self.order, d[0]);
        if self.order >= 1 {
            for i in 0..n {
                out.grad[i] = d[1] * self.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.hess[i * n + j] =
                        d[2] * self.grad[i] * self.grad[j] + d[1] * self.hess_at(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.third[(i * n + j) * n + k] = d[3]
                            * self.grad[i]
                            * self.grad[j]
                            * self.grad[k]
                            + d[2]
                                * (self.hess_at(i, j) * self.grad[k]
                                    + self.hess_at(i, k) * self.grad[j]
                                    + self.hess_at(j, k) * self.grad[i])
                            + d[1] * self.third_at(i, j, k);
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Jet> {
        let v = self.value;
        if v == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        let iv = 1.0 / v;
        Ok(self.unary_chain([iv, -iv * iv, 2.0 * iv * iv * iv, -6.0 * iv * iv * iv * iv]))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.mul(&other.recip()?)
    }

    pub fn ln(&self) -> Result<Jet> {
        let v = self.value;
        if v <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value {v}")));
        }
        let iv = 1.0 / v;
        Ok(self.unary_chain([v.ln(), iv, -iv * iv, 2.0 * iv * iv * iv]))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.unary_chain([e, e, e, e])
    }

    /// Power with a constant exponent. Integer exponents extend to any base
    /// where the result stays finite; fractional exponents require a
    /// strictly positive base.
    pub fn powc(&self, c: f64) -> Result<Jet> {
        let v = self.value;
        let integral = c.fract() == 0.0 && c.abs() < 2147483648.0;
        if !integral && v <= 0.0 {
            return Err(Error::Domain(format!(
                "fractional power {c} of non-positive base {v}"
            )));
        }
        let mut d = [0.0; 4];
        for (k, slot) in d.iter_mut().enumerate() {
            let fac = falling_factorial(c, k);
            if fac == 0.0 {
                *slot = 0.0;
                continue;
            }
            let e = c - k as f64;
            if v == 0.0 && e < 0.0 {
                return Err(Error::Domain(format!(
                    "derivative of x^{c} is singular at 0"
                )));
            }
            let base_pow = if integral {
                v.powi(e as i32)
            } else {
                v.powf(e)
            };
            *slot = fac * base_pow;
        }
        Ok(self.unary_chain(d))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.powc(0.5)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.unary_chain([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.unary_chain([c, -s, -c, s])
    }

    pub fn atan(&self) -> Jet {
        let v = self.value;
        let q = 1.0 + v * v;
        self.unary_chain([
            v.atan(),
            1.0 / q,
            -2.0 * v / (q * q),
            (6.0 * v * v - 2.0) / (q * q * q),
        ])
    }

    /// Jet of the partial derivative `∂_i f`, one order lower than `self`.
    pub fn extract_partial(&self, i: usize) -> Result<Jet> {
        if self.order < 1 {
            return Err(Error::UnsupportedOrder {
                requested: 1,
                max: 0,
                context: "partial extraction from an order-0 jet".into(),
            });
        }
        let n = self.n;
        let mut out = Jet::zeroed(n, self.order - 1, self.grad[i]);
        if out.order >= 1 {
            for j in 0..n {
                out.grad[j] = self.hess_at(i, j);
            }
        }
        if out.order >= 2 {
            for j in 0..n {
                for k in 0..n {
                    out.hess[j * n + k] = self.third_at(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Jet of `∂_i ∂_j f`, two orders lower than `self`.
    pub fn extract_second(&self, i: usize, j: usize) -> Result<Jet> {
        if self.order < 2 {
            return Err(Error::UnsupportedOrder {
                requested: 2,
                max: self.order,
                context: "second-partial extraction".into(),
            });
        }
        let n = self.n;
        let mut out = Jet::zeroed(n, self.order - 2, self.hess_at(i, j));
        if out.order >= 1 {
            for k in 0..n {
                out.grad[k] = self.third_at(i, j, k);
            }
        }
        Ok(out)
    }

    /// Multivariate chain rule (Faà di Bruno through order 3): the jet of
    /// `f ∘ G` where `outer` is the jet of `f` in `m` variables and
    /// `inners[a]` the jet of the a-th component of `G`.
    ///
    /// `outer.order` must be at least the inner order; the result carries
    /// the inner order and dimension.
    pub fn compose(outer: &Jet, inners: &[Jet]) -> Result<Jet> {
        let m = outer.n;
        if inners.len() != m {
            return Err(Error::Dimension(format!(
                "composition needs {m} inner jets, got {}",
                inners.len()
            )));
        }
        let first = &inners[0];
        let n = first.n;
        let ord = first.order;
        for g in inners {
            if g.n != n || g.order != ord {
                return Err(Error::Dimension(
                    "inner jets must share dimension and order".into(),
                ));
            }
        }
        if outer.order < ord {
            return Err(Error::UnsupportedOrder {
                requested: ord,
                max: outer.order,
                context: "outer jet too shallow for composition".into(),
            });
        }

        let mut out = Jet::zeroed(n, ord, outer.value);
        if ord >= 1 {
            for i in 0..n {
                let mut acc = 0.0;
                for a in 0..m {
                    acc += outer.grad[a] * inners[a].grad[i];
                }
                out.grad[i] = acc;
            }
        }
        if ord >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            acc += outer.hess_at(a, b) * inners[a].grad[i] * inners[b].grad[j];
                        }
                        acc += outer.grad[a] * inners[a].hess_at(i, j);
                    }
                    out.hess[i * n + j] = acc;
                }
            }
        }
        if ord >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for a in 0..m {
                            for b in 0..m {
                                for c in 0..m {
                                    acc += outer.third_at(a, b, c)
                                        * inners[a].grad[i]
                                        * inners[b].grad[j]
                                        * inners[c].grad[k];
                                }
                                acc += outer.hess_at(a, b)
                                    * (inners[a].hess_at(i, j) * inners[b].grad[k]
                                        + inners[a].hess_at(i, k) * inners[b].grad[j]
                                        + inners[a].hess_at(j, k) * inners[b].grad[i]);
                            }
                            acc += outer.grad[a] * inners[a].third_at(i, j, k);
                        }
                        out.third[(i * n + j) * n + k] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// First-order composition for maps that only expose value and Jacobian
    /// (flow-backed charts). `dvals[a]` is `∂f/∂x_a` at the point; inner
    /// jets of order ≥ 2 are rejected rather than silently truncated.
    pub fn compose_linear(value: f64, dvals: &[f64], inners: &[Jet]) -> Result<Jet> {
        let m = dvals.len();
        if inners.len() != m {
            return Err(Error::Dimension(format!(
                "linear composition needs {m} inner jets, got {}",
                inners.len()
            )));
        }
        let first = &inners[0];
        let (n, ord) = (first.n, first.order);
        if ord > 1 {
            return Err(Error::UnsupportedOrder {
                requested: ord,
                max: 1,
                context: "flow-backed maps only carry first derivatives".into(),
            });
        }
        for g in inners {
            if g.n != n || g.order != ord {
                return Err(Error::Dimension(
                    "inner jets must share dimension and order".into(),
                ));
            }
        }
        let mut out = Jet::zeroed(n, ord, value);
        if ord >= 1 {
            for i in 0..n {
                let mut acc = 0.0;
                for a in 0..m {
                    acc += dvals[a] * inners[a].grad[i];
                }
                out.grad[i] = acc;
            }
        }
        Ok(out)
    }
}
