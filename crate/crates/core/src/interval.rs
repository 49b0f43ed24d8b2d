//! Closed real intervals, boxes and interval matrices.
//!
//! Endpoints are IEEE doubles. Under [`Rounding::Outward`] every primitive
//! moves the lower endpoint one ulp down and the upper endpoint one ulp up,
//! so a result computed with round-to-nearest still contains the exact real
//! result. [`Rounding::Exact`] skips the nudge; it is meant for comparisons
//! against hand-computed values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extra ulps applied to results of library transcendental functions
/// (`tanh`, `exp`, `powf`, ...), which are not correctly rounded.
pub const TRANSCENDENTAL_ULPS: u32 = 4;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Degenerate interval `[x, x]`.
    ///
    /// Panics if `x` is NaN.
    pub fn point(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN interval endpoint");
        Interval { lo: x, hi: x }
    }

    /// Builds `[min(a,b), max(a,b)]`.
    pub(crate) fn spanning(a: f64, b: f64) -> Self {
        debug_assert!(!a.is_nan() && !b.is_nan());
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Caller guarantees `lo <= hi` and no NaN.
    pub(crate) fn raw(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "raw interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// True when zero lies strictly between the endpoints.
    pub fn straddles_zero(&self) -> bool {
        self.lo < 0.0 && self.hi > 0.0
    }

    /// `|X|` by the three-case endpoint table. Exact, needs no rounding.
    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi >= 0.0 {
            Interval {
                lo: 0.0,
                hi: (-self.lo).max(self.hi),
            }
        } else {
            Interval {
                lo: -self.hi,
                hi: -self.lo,
            }
        }
    }

    /// `|X|^p` for `p > 0`: absolute value followed by the monotone power map.
    pub fn abs_pow(&self, p: f64, r: Rounding) -> Interval {
        let a = self.abs();
        if p == 1.0 || a.hi == 0.0 {
            return a;
        }
        if p == 2.0 {
            let lo = r.mul_down(a.lo, a.lo).max(0.0);
            let hi = r.mul_up(a.hi, a.hi);
            return Interval { lo, hi };
        }
        let lo = r.down_n(a.lo.powf(p), TRANSCENDENTAL_ULPS).max(0.0);
        let hi = r.up_n(a.hi.powf(p), TRANSCENDENTAL_ULPS);
        Interval { lo, hi }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(v: Interval) -> Self {
        [v.lo, v.hi]
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

/// Floating-point policy for interval endpoints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    /// Plain round-to-nearest endpoints.
    #[serde(alias = "exact-double")]
    Exact,
    /// Every primitive widens its result by one ulp on each side.
    #[default]
    #[serde(alias = "outward-one-ulp")]
    Outward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Applies one of the four interval operations under the given policy.
pub fn arith(op: ArithOp, x: Interval, y: Interval, r: Rounding) -> Result<Interval> {
    match op {
        ArithOp::Add => Ok(r.add(x, y)),
        ArithOp::Sub => Ok(r.sub(x, y)),
        ArithOp::Mul => Ok(r.mul(x, y)),
        ArithOp::Div => r.div(x, y),
    }
}

impl Rounding {
    #[inline]
    pub fn down(self, v: f64) -> f64 {
        match self {
            Rounding::Exact => v,
            Rounding::Outward => v.next_down(),
        }
    }

    #[inline]
    pub fn up(self, v: f64) -> f64 {
        match self {
            Rounding::Exact => v,
            Rounding::Outward => v.next_up(),
        }
    }

    pub fn down_n(self, mut v: f64, n: u32) -> f64 {
        if self == Rounding::Outward {
            for _ in 0..n {
                v = v.next_down();
            }
        }
        v
    }

    pub fn up_n(self, mut v: f64, n: u32) -> f64 {
        if self == Rounding::Outward {
            for _ in 0..n {
                v = v.next_up();
            }
        }
        v
    }

    /// `a + b` rounded down: the nearest sum is kept when the error-free
    /// remainder shows it is already a lower bound.
    #[inline]
    pub fn add_down(self, a: f64, b: f64) -> f64 {
        let s = a + b;
        match self {
            Rounding::Exact => s,
            Rounding::Outward => {
                if two_sum_err(a, b, s) < 0.0 || !s.is_finite() {
                    s.next_down()
                } else {
                    s
                }
            }
        }
    }

    #[inline]
    pub fn add_up(self, a: f64, b: f64) -> f64 {
        let s = a + b;
        match self {
            Rounding::Exact => s,
            Rounding::Outward => {
                if two_sum_err(a, b, s) > 0.0 || !s.is_finite() {
                    s.next_up()
                } else {
                    s
                }
            }
        }
    }

    #[inline]
    pub fn mul_down(self, a: f64, b: f64) -> f64 {
        let p = a * b;
        match self {
            Rounding::Exact => p,
            Rounding::Outward => match two_prod_err(a, b, p) {
                Some(e) if e >= 0.0 => p,
                _ => p.next_down(),
            },
        }
    }

    #[inline]
    pub fn mul_up(self, a: f64, b: f64) -> f64 {
        let p = a * b;
        match self {
            Rounding::Exact => p,
            Rounding::Outward => match two_prod_err(a, b, p) {
                Some(e) if e <= 0.0 => p,
                _ => p.next_up(),
            },
        }
    }

    /// Widens by `n` ulps on each side; used after non-correctly-rounded
    /// library functions.
    pub fn widen(self, x: Interval, n: u32) -> Interval {
        Interval {
            lo: self.down_n(x.lo, n),
            hi: self.up_n(x.hi, n),
        }
    }

    #[inline]
    pub fn add(self, x: Interval, y: Interval) -> Interval {
        // exact cases need no widening
        if y == Interval::ZERO {
            return x;
        }
        if x == Interval::ZERO {
            return y;
        }
        Interval {
            lo: self.add_down(x.lo, y.lo),
            hi: self.add_up(x.hi, y.hi),
        }
    }

    #[inline]
    pub fn sub(self, x: Interval, y: Interval) -> Interval {
        if y == Interval::ZERO {
            return x;
        }
        if x == Interval::ZERO {
            return self.neg(y);
        }
        Interval {
            lo: self.add_down(x.lo, -y.hi),
            hi: self.add_up(x.hi, -y.lo),
        }
    }

    #[inline]
    pub fn mul(self, x: Interval, y: Interval) -> Interval {
        if x == Interval::ZERO || y == Interval::ZERO {
            return Interval::ZERO;
        }
        if x == Interval::ONE {
            return y;
        }
        if y == Interval::ONE {
            return x;
        }
        let (a, b, c, d) = (x.lo, x.hi, y.lo, y.hi);
        let lo = self
            .mul_down(a, c)
            .min(self.mul_down(a, d))
            .min(self.mul_down(b, c))
            .min(self.mul_down(b, d));
        let hi = self
            .mul_up(a, c)
            .max(self.mul_up(a, d))
            .max(self.mul_up(b, c))
            .max(self.mul_up(b, d));
        Interval { lo, hi }
    }

    /// `X / Y = X · [1/Ȳ, 1/Y̲]`; zero must not lie in `Y`.
    pub fn div(self, x: Interval, y: Interval) -> Result<Interval> {
        if y.contains(0.0) {
            return Err(Error::DivisionByIntervalContainingZero { lo: y.lo, hi: y.hi });
        }
        let recip = Interval {
            lo: self.recip_nudge(1.0 / y.hi, y.hi, false),
            hi: self.recip_nudge(1.0 / y.lo, y.lo, true),
        };
        Ok(self.mul(x, recip))
    }

    /// Rounds a computed reciprocal `q ≈ 1/y` down or up.
    fn recip_nudge(self, q: f64, y: f64, up: bool) -> f64 {
        if self == Rounding::Exact {
            return q;
        }
        match two_prod_err(q, y, 1.0) {
            Some(0.0) => q,
            _ => {
                if up {
                    q.next_up()
                } else {
                    q.next_down()
                }
            }
        }
    }

    /// `w · X` for a real scalar `w`.
    #[inline]
    pub fn scale(self, x: Interval, w: f64) -> Interval {
        if w == 0.0 || x == Interval::ZERO {
            return Interval::ZERO;
        }
        if w == 1.0 {
            return x;
        }
        if w == -1.0 {
            return self.neg(x);
        }
        if w > 0.0 {
            Interval {
                lo: self.mul_down(w, x.lo),
                hi: self.mul_up(w, x.hi),
            }
        } else {
            Interval {
                lo: self.mul_down(w, x.hi),
                hi: self.mul_up(w, x.lo),
            }
        }
    }

    #[inline]
    pub fn shift(self, x: Interval, c: f64) -> Interval {
        Interval {
            lo: self.add_down(x.lo, c),
            hi: self.add_up(x.hi, c),
        }
    }

    pub fn neg(self, x: Interval) -> Interval {
        Interval {
            lo: -x.hi,
            hi: -x.lo,
        }
    }

    /// Sum of a sequence of intervals.
    pub fn sum<I: IntoIterator<Item = Interval>>(self, items: I) -> Interval {
        items
            .into_iter()
            .fold(Interval::ZERO, |acc, x| self.add(acc, x))
    }
}

/// Exact remainder `(a + b) - s` of a rounded sum `s` (Knuth's TwoSum).
#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// Sign-exact remainder `a·b - p` via fused multiply-add, or `None` when
/// underflow or overflow makes the remainder unreliable.
#[inline]
fn two_prod_err(a: f64, b: f64, p: f64) -> Option<f64> {
    if !p.is_finite() || (p.abs() < 1e-290 && a != 0.0 && b != 0.0) {
        return None;
    }
    Some(a.mul_add(b, -p))
}

/// Axis-aligned box: a Cartesian product of intervals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct IntervalBox {
    axes: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(axes: Vec<Interval>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        Ok(IntervalBox { axes })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let axes = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        IntervalBox::new(axes)
    }

    pub fn singleton(x: &[f64]) -> Result<Self> {
        IntervalBox::new(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub(crate) fn from_axes_unchecked(axes: Vec<Interval>) -> Self {
        debug_assert!(!axes.is_empty());
        IntervalBox { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Interval {
        self.axes[i]
    }

    pub fn into_axes(self) -> Vec<Interval> {
        self.axes
    }

    /// Largest per-axis width.
    pub fn width(&self) -> f64 {
        self.axes.iter().map(Interval::width).fold(0.0, f64::max)
    }

    /// Product of per-axis widths, in plain floating point.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Interval::width).product()
    }

    /// Interval guaranteed to contain the exact volume.
    pub fn volume_enclosure(&self, r: Rounding) -> Interval {
        let mut lo = 1.0;
        let mut hi = 1.0;
        for a in &self.axes {
            let wl = r.add_down(a.hi, -a.lo).max(0.0);
            let wh = r.add_up(a.hi, -a.lo);
            lo = r.mul_down(lo, wl).max(0.0);
            hi = r.mul_up(hi, wh);
        }
        Interval { lo, hi }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.axes.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(a, &v)| a.contains(v))
    }

    pub fn is_subset_of(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.is_subset_of(b))
    }

    /// All `2^d` corners, ordered by the binary index `b` with axis 0 as the
    /// most significant bit. Duplicates appear for degenerate axes.
    pub fn vertices(&self, cap: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        if d > cap || d >= usize::BITS as usize {
            return Err(Error::VertexBudgetExceeded { dim: d, cap });
        }
        let n = 1usize << d;
        Ok((0..n)
            .map(|b| {
                self.axes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        if (b >> (d - 1 - i)) & 1 == 1 {
                            a.hi
                        } else {
                            a.lo
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Maps a point of the reference cube `[0,1]^d` into the box.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .zip(u)
            .map(|(a, &t)| (a.lo + t * (a.hi - a.lo)).clamp(a.lo, a.hi))
            .collect()
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.axes).finish()
    }
}

impl TryFrom<Vec<Interval>> for IntervalBox {
    type Error = Error;
    fn try_from(v: Vec<Interval>) -> Result<Self> {
        IntervalBox::new(v)
    }
}

impl From<IntervalBox> for Vec<Interval> {
    fn from(b: IntervalBox) -> Self {
        b.axes
    }
}

/// Row-major matrix of intervals.
#[derive(Clone, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Interval>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(IntervalMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntervalMatrix {
            rows,
            cols,
            data: vec![Interval::ZERO; rows * cols],
        }
    }

    /// Degenerate interval matrix from real rows.
    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend(row.iter().map(|&v| Interval::point(v)));
        }
        Ok(IntervalMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Column vector from a box.
    pub fn column(b: &IntervalBox) -> Self {
        IntervalMatrix {
            rows: b.dim(),
            cols: 1,
            data: b.axes().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Interval] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Interval] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest entry width.
    pub fn width(&self) -> f64 {
        self.data.iter().map(Interval::width).fold(0.0, f64::max)
    }

    /// Maximum row sum of entry magnitudes.
    pub fn norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(Interval::magnitude).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum column sum of entry magnitudes.
    pub fn col_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).magnitude()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(Interval::magnitude).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &IntervalMatrix, r: Rounding) -> Result<IntervalMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(IntervalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| r.add(a, b))
                .collect(),
        })
    }

    /// Interval matrix product, entrywise sums of interval products.
    pub fn mul(&self, other: &IntervalMatrix, r: Rounding) -> Result<IntervalMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = IntervalMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Interval::ZERO;
                for k in 0..self.cols {
                    acc = r.add(acc, r.mul(self.get(i, k), other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Product with an interval vector, returned as a box.
    pub fn mul_box(&self, v: &IntervalBox, r: Rounding) -> Result<IntervalBox> {
        let m = self.mul(&IntervalMatrix::column(v), r)?;
        IntervalBox::new(m.data)
    }

    pub fn transpose(&self) -> IntervalMatrix {
        let mut out = IntervalMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn is_subset_of(&self, other: &IntervalMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.is_subset_of(b))
    }

    /// True if the real matrix (row-major) lies entrywise inside.
    pub fn contains_real(&self, m: &[f64]) -> bool {
        m.len() == self.data.len() && self.data.iter().zip(m).all(|(a, &v)| a.contains(v))
    }
}

impl fmt::Debug for IntervalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Interval]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: Rounding = Rounding::Exact;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn endpoint_arithmetic() {
        assert_eq!(arith(ArithOp::Add, iv(1., 2.), iv(3., 4.), E).unwrap(), iv(4., 6.));
        assert_eq!(arith(ArithOp::Sub, iv(1., 2.), iv(3., 4.), E).unwrap(), iv(-3., -1.));
        assert_eq!(arith(ArithOp::Mul, iv(-1., 2.), iv(3., 4.), E).unwrap(), iv(-4., 8.));
        assert_eq!(
            arith(ArithOp::Div, iv(1., 2.), iv(-4., -2.), E).unwrap(),
            iv(-1., -0.25)
        );
    }

    #[test]
    fn division_by_zero_interval_is_an_error() {
        let err = E.div(iv(1., 2.), iv(-1., 1.)).unwrap_err();
        assert!(matches!(err, Error::DivisionByIntervalContainingZero { .. }));
        assert!(E.div(iv(1., 2.), iv(0., 1.)).is_err());
    }

    #[test]
    fn constructor_rejects_bad_endpoints() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn width_and_magnitude() {
        assert_eq!(iv(1., 3.).width(), 2.0);
        let b = IntervalBox::from_bounds(&[(0., 1.), (0., 0.5)]).unwrap();
        assert_eq!(b.width(), 1.0);
        assert_eq!(b.volume(), 0.5);
        assert_eq!(iv(-3., 1.).magnitude(), 3.0);
        assert_eq!(Interval::ZERO.magnitude(), 0.0);
        assert_eq!(iv(2., 5.).magnitude(), 5.0);
    }

    #[test]
    fn width_is_linear_in_scalar_combinations() {
        // w(2X + 3Y) = 2 w(X) + 3 w(Y)
        let x = iv(0., 1.);
        let y = iv(0., 2.);
        let z = E.add(E.scale(x, 2.0), E.scale(y, 3.0));
        assert_eq!(z.width(), 8.0);
        let z = E.add(E.scale(x, -2.0), E.scale(y, 3.0));
        assert_eq!(z.width(), 8.0);
    }

    #[test]
    fn abs_and_power() {
        assert_eq!(iv(-2., 1.).abs_pow(1.0, E), iv(0., 2.));
        assert_eq!(iv(-2., 1.).abs_pow(2.0, E), iv(0., 4.));
        assert_eq!(iv(1., 3.).abs_pow(2.0, E), iv(1., 9.));
        assert_eq!(iv(-3., -1.).abs(), iv(1., 3.));
        assert_eq!(iv(-1., 4.).abs(), iv(0., 4.));
        let x = iv(-2., 1.5);
        assert!(x.abs().width() <= x.width());
        let p = iv(1., 2.).abs_pow(3.0, Rounding::Outward);
        assert!(p.contains(1.0) && p.contains(8.0));
    }

    #[test]
    fn matrix_products() {
        let a = IntervalMatrix::new(1, 1, vec![Interval::ONE]).unwrap();
        let b = IntervalMatrix::new(1, 1, vec![iv(2., 3.)]).unwrap();
        assert_eq!(a.mul(&b, E).unwrap().get(0, 0), iv(2., 3.));

        let a = IntervalMatrix::from_real(&[vec![1.0, -1.0]]).unwrap();
        let v = IntervalBox::from_bounds(&[(0., 1.), (0., 1.)]).unwrap();
        assert_eq!(a.mul_box(&v, E).unwrap().axis(0), iv(-1., 1.));

        let a = IntervalMatrix::from_real(&[vec![2.0]]).unwrap();
        let b = IntervalMatrix::from_real(&[vec![3.0]]).unwrap();
        let c = a.mul(&b, E).unwrap();
        assert_eq!(c.get(0, 0), Interval::point(6.0));
        assert_eq!(c.width(), 0.0);

        let a = IntervalMatrix::zeros(2, 3);
        let b = IntervalMatrix::zeros(2, 3);
        assert!(matches!(a.mul(&b, E), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matrix_norms() {
        let a = IntervalMatrix::new(1, 2, vec![iv(-1., 2.), iv(0., 1.)]).unwrap();
        assert_eq!(a.norm(), 3.0);
        assert_eq!(IntervalMatrix::zeros(3, 2).norm(), 0.0);
        let a = IntervalMatrix::from_real(&[vec![1.0], vec![-5.0]]).unwrap();
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.col_norm(), 6.0);
    }

    #[test]
    fn row_sum_norm_does_not_bound_the_right_factor() {
        // w(AB) <= ||A|| w(B) + ||B|| w(A) fails with the row-sum norm on B:
        // a 1x2 interval row times a point column of ones.
        let a = IntervalMatrix::new(1, 2, vec![iv(0., 1.), iv(0., 1.)]).unwrap();
        let b = IntervalMatrix::from_real(&[vec![1.0], vec![1.0]]).unwrap();
        let ab = a.mul(&b, E).unwrap();
        assert_eq!(ab.width(), 2.0);
        assert!(ab.width() > a.norm() * b.width() + b.norm() * a.width());
        assert!(ab.width() <= a.norm() * b.width() + b.col_norm() * a.width());
    }

    #[test]
    fn vertices_enumeration() {
        let b = IntervalBox::from_bounds(&[(0., 1.)]).unwrap();
        assert_eq!(b.vertices(20).unwrap(), vec![vec![0.0], vec![1.0]]);
        let b = IntervalBox::from_bounds(&[(0., 1.), (2., 3.)]).unwrap();
        assert_eq!(
            b.vertices(20).unwrap(),
            vec![vec![0., 2.], vec![0., 3.], vec![1., 2.], vec![1., 3.]]
        );
        let b = IntervalBox::from_bounds(&[(1., 1.)]).unwrap();
        assert_eq!(b.vertices(20).unwrap(), vec![vec![1.0], vec![1.0]]);
        let b = IntervalBox::from_bounds(&[(0., 1.); 5]).unwrap();
        assert!(matches!(
            b.vertices(4),
            Err(Error::VertexBudgetExceeded { dim: 5, cap: 4 })
        ));
    }

    #[test]
    fn degenerate_axis_has_zero_volume() {
        let b = IntervalBox::from_bounds(&[(1., 1.), (0., 2.)]).unwrap();
        assert_eq!(b.volume(), 0.0);
        assert_eq!(b.volume_enclosure(Rounding::Outward).lo(), 0.0);
    }

    #[test]
    fn outward_volume_encloses_exact() {
        let b = IntervalBox::from_bounds(&[(0.1, 0.7), (0.3, 0.9)]).unwrap();
        let v = b.volume_enclosure(Rounding::Outward);
        assert!(v.contains(b.volume()));
        assert!(v.width() > 0.0 && v.width() < 1e-15);
    }

    #[test]
    fn serde_shapes() {
        let x = iv(-1., 2.);
        assert_eq!(serde_json::to_string(&x).unwrap(), "[-1.0,2.0]");
        let y: Interval = serde_json::from_str("[0.5, 1.5]").unwrap();
        assert_eq!(y, iv(0.5, 1.5));
        assert!(serde_json::from_str::<Interval>("[2, 1]").is_err());
        let b: IntervalBox = serde_json::from_str("[[0,1],[2,3]]").unwrap();
        assert_eq!(b.dim(), 2);
        assert!(serde_json::from_str::<IntervalBox>("[]").is_err());
    }
}
