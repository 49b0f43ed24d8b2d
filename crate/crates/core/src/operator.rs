//! Second-order operators in nondivergence form,
//! `DΦ = -Σ a_ij ∂_i∂_j Φ + Σ b_i ∂_i Φ + cΦ`, with right-hand side `g`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interval::{Interval, IntervalBox, Rounding};

/// A user-supplied coefficient: point evaluator plus interval enclosure.
///
/// The enclosure must be inclusion isotonic and contain `eval` over every box.
pub trait CoefficientFn: Send + Sync + fmt::Debug {
    fn eval(&self, x: &[f64]) -> Result<f64>;
    fn enclose(&self, k: &IntervalBox, r: Rounding) -> Result<Interval>;
    /// Constant `L` with `w(enclose(K)) <= L·w(K)` on `Ω`, if known.
    fn lipschitz(&self, _omega: &IntervalBox) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub enum Coefficient {
    Constant(f64),
    Expr(Expr),
    Custom(Arc<dyn CoefficientFn>),
}

impl Coefficient {
    /// Parses an expression, folding variable-free ones into constants.
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.is_constant() {
            Ok(Coefficient::Constant(e.eval(&[])?))
        } else {
            Ok(Coefficient::Expr(e))
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::Expr(e) => e.eval(x),
            Coefficient::Custom(f) => f.eval(x),
        }
    }

    pub fn enclose(&self, k: &IntervalBox, r: Rounding) -> Result<Interval> {
        match self {
            Coefficient::Constant(c) => Ok(Interval::point(*c)),
            Coefficient::Expr(e) => e.enclose(k, r),
            Coefficient::Custom(f) => f
                .enclose(k, r)
                .map_err(|e| Error::CoefficientEnclosure(e.to_string())),
        }
    }

    pub fn lipschitz(&self, omega: &IntervalBox, r: Rounding) -> Result<f64> {
        match self {
            Coefficient::Constant(_) => Ok(0.0),
            Coefficient::Expr(e) => e.lipschitz(omega, r),
            Coefficient::Custom(f) => f.lipschitz(omega).ok_or_else(|| {
                Error::CoefficientEnclosure("custom coefficient has no Lipschitz constant".into())
            }),
        }
    }

    fn arity(&self) -> usize {
        match self {
            Coefficient::Expr(e) => e.arity(),
            _ => 0,
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

impl From<Expr> for Coefficient {
    fn from(e: Expr) -> Self {
        Coefficient::Expr(e)
    }
}

#[derive(Clone, Debug)]
pub struct EllipticOperator {
    dim: usize,
    a: Vec<Coefficient>,
    b: Vec<Coefficient>,
    c: Coefficient,
    g: Coefficient,
}

/// Coefficient values at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientValues<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: T,
    pub g: T,
}

impl EllipticOperator {
    /// `a` is row-major `dim × dim`, `b` has length `dim`.
    pub fn new(
        dim: usize,
        a: Vec<Coefficient>,
        b: Vec<Coefficient>,
        c: Coefficient,
        g: Coefficient,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: a.len(),
            });
        }
        if b.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.len(),
            });
        }
        let op = EllipticOperator { dim, a, b, c, g };
        let arity = op.all().map(Coefficient::arity).max().unwrap_or(0);
        if arity > dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: arity,
            });
        }
        Ok(op)
    }

    /// `DΦ = ΔΦ` (that is, `a = -I`, `b = 0`, `c = 0`).
    pub fn laplacian(dim: usize, g: Coefficient) -> Self {
        Self::scaled_laplacian(dim, -1.0, g)
    }

    /// `DΦ = -ΔΦ` (`a = I`).
    pub fn negative_laplacian(dim: usize, g: Coefficient) -> Self {
        Self::scaled_laplacian(dim, 1.0, g)
    }

    fn scaled_laplacian(dim: usize, diag: f64, g: Coefficient) -> Self {
        let a = (0..dim * dim)
            .map(|k| Coefficient::Constant(if k / dim == k % dim { diag } else { 0.0 }))
            .collect();
        EllipticOperator {
            dim,
            a,
            b: vec![Coefficient::Constant(0.0); dim],
            c: Coefficient::Constant(0.0),
            g,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self, i: usize, j: usize) -> &Coefficient {
        &self.a[i * self.dim + j]
    }

    pub fn b(&self, i: usize) -> &Coefficient {
        &self.b[i]
    }

    pub fn c(&self) -> &Coefficient {
        &self.c
    }

    pub fn g(&self) -> &Coefficient {
        &self.g
    }

    fn all(&self) -> impl Iterator<Item = &Coefficient> {
        self.a
            .iter()
            .chain(&self.b)
            .chain(std::iter::once(&self.c))
            .chain(std::iter::once(&self.g))
    }

    pub fn eval(&self, x: &[f64]) -> Result<CoefficientValues<f64>> {
        Ok(CoefficientValues {
            a: self.a.iter().map(|c| c.eval(x)).collect::<Result<_>>()?,
            b: self.b.iter().map(|c| c.eval(x)).collect::<Result<_>>()?,
            c: self.c.eval(x)?,
            g: self.g.eval(x)?,
        })
    }

    pub fn enclose(&self, k: &IntervalBox, r: Rounding) -> Result<CoefficientValues<Interval>> {
        Ok(CoefficientValues {
            a: self.a.iter().map(|c| c.enclose(k, r)).collect::<Result<_>>()?,
            b: self.b.iter().map(|c| c.enclose(k, r)).collect::<Result<_>>()?,
            c: self.c.enclose(k, r)?,
            g: self.g.enclose(k, r)?,
        })
    }

    pub fn lipschitz(&self, omega: &IntervalBox, r: Rounding) -> Result<CoefficientValues<f64>> {
        Ok(CoefficientValues {
            a: self.a.iter().map(|c| c.lipschitz(omega, r)).collect::<Result<_>>()?,
            b: self.b.iter().map(|c| c.lipschitz(omega, r)).collect::<Result<_>>()?,
            c: self.c.lipschitz(omega, r)?,
            g: self.g.lipschitz(omega, r)?,
        })
    }

    /// `DΦ(x) - g(x)` from point derivatives of a scalar function.
    pub fn apply_point(&self, value: f64, grad: &[f64], hess: &[f64], x: &[f64]) -> Result<f64> {
        let cv = self.eval(x)?;
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc -= cv.a[i * d + j] * hess[i * d + j];
            }
            acc += cv.b[i] * grad[i];
        }
        acc += cv.c * value;
        Ok(acc - cv.g)
    }

    /// Interval version of [`apply_point`](Self::apply_point).
    pub fn apply_interval(
        &self,
        value: Interval,
        grad: &[Interval],
        hess: &[Interval],
        k: &IntervalBox,
        r: Rounding,
    ) -> Result<Interval> {
        let cv = self.enclose(k, r)?;
        let d = self.dim;
        let mut acc = Interval::ZERO;
        for i in 0..d {
            for j in 0..d {
                if !self.a[i * d + j].is_zero() {
                    acc = r.sub(acc, r.mul(cv.a[i * d + j], hess[i * d + j]));
                }
            }
            if !self.b[i].is_zero() {
                acc = r.add(acc, r.mul(cv.b[i], grad[i]));
            }
        }
        if !self.c.is_zero() {
            acc = r.add(acc, r.mul(cv.c, value));
        }
        Ok(r.sub(acc, cv.g))
    }
}
