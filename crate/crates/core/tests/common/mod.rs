//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use certnorm::enclosure::PointDerivatives;
use certnorm::expr::Expr;
use certnorm::interval::{IntervalBox, Rounding};
use certnorm::network::{Activation, Network};

/// Second-order forward-mode number in `d` variables.
#[derive(Clone, Debug)]
pub struct Jet {
    pub v: f64,
    pub g: Vec<f64>,
    /// Row-major `d × d`.
    pub h: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, d: usize) -> Self {
        Jet { v, g: vec![0.0; d], h: vec![0.0; d * d] }
    }

    pub fn variable(x: f64, i: usize, d: usize) -> Self {
        let mut j = Jet::constant(x, d);
        j.g[i] = 1.0;
        j
    }

    fn axpy(&mut self, a: f64, other: &Jet) {
        self.v += a * other.v;
        for (s, o) in self.g.iter_mut().zip(&other.g) {
            *s += a * o;
        }
        for (s, o) in self.h.iter_mut().zip(&other.h) {
            *s += a * o;
        }
    }

    /// `f(self)` given `f`, `f'`, `f''` at `self.v`.
    fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let d = self.g.len();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = f2 * self.g[i] * self.g[j] + f1 * self.h[i * d + j];
            }
        }
        Jet { v: f0, g: self.g.iter().map(|g| f1 * g).collect(), h }
    }
}

/// `(σ, σ', σ'')` written out from the textbook formulas.
pub fn activation_jet(act: Activation, x: f64) -> (f64, f64, f64) {
    match act {
        Activation::Relu => {
            if x > 0.0 {
                (x, 1.0, 0.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        Activation::Tanh => {
            let t = x.tanh();
            let s = 1.0 - t * t;
            (t, s, -2.0 * t * s)
        }
        Activation::Sigmoid => {
            let s = 1.0 / (1.0 + (-x).exp());
            let d = s * (1.0 - s);
            (s, d, d * (1.0 - 2.0 * s))
        }
    }
}

/// Forward-mode evaluation of all outputs with gradients and Hessians.
pub fn jets(net: &Network, x: &[f64]) -> Vec<Jet> {
    let d = x.len();
    let mut cur: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::variable(v, i, d)).collect();
    let depth = net.layers().len();
    for (k, layer) in net.layers().iter().enumerate() {
        let mut next = Vec::with_capacity(layer.rows());
        for r in 0..layer.rows() {
            let mut z = Jet::constant(layer.bias()[r], d);
            for (c, w) in layer.weight_row(r).iter().enumerate() {
                z.axpy(*w, &cur[c]);
            }
            if k + 1 < depth {
                let (f0, f1, f2) = activation_jet(net.activation(), z.v);
                z = z.compose(f0, f1, f2);
            }
            next.push(z);
        }
        cur = next;
    }
    cur
}

/// The AD oracle in the crate's point-derivative layout.
pub fn ad_oracle(net: &Network, x: &[f64]) -> PointDerivatives {
    let js = jets(net, x);
    PointDerivatives {
        value: js.iter().map(|j| j.v).collect(),
        jac: js.iter().flat_map(|j| j.g.clone()).collect(),
        hess: js.into_iter().map(|j| j.h).collect(),
    }
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian, row-major.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let at = |di: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in di {
            y[i] += s;
        }
        f(&y)
    };
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = if i == j {
                (at(&[(i, h)]) - 2.0 * f(x) + at(&[(i, -h)])) / (h * h)
            } else {
                (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                    + at(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            };
        }
    }
    out
}

/// Composite Simpson rule with `n` (even) panels per axis over a box of
/// dimension one or two.
pub fn simpson(f: impl Fn(&[f64]) -> f64, k: &IntervalBox, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let weights = |i: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let axis = |a: usize| {
        let iv = k.axis(a);
        let h = (iv.hi() - iv.lo()) / n as f64;
        (iv.lo(), h)
    };
    match k.dim() {
        1 => {
            let (a, h) = axis(0);
            let s: f64 = (0..=n).map(|i| weights(i) * f(&[a + i as f64 * h])).sum();
            s * h / 3.0
        }
        2 => {
            let (a, h) = axis(0);
            let (b, g) = axis(1);
            let mut s = 0.0;
            for i in 0..=n {
                let mut row = 0.0;
                for j in 0..=n {
                    row += weights(j) * f(&[a + i as f64 * h, b + j as f64 * g]);
                }
                s += weights(i) * row;
            }
            s * h * g / 9.0
        }
        d => panic!("simpson oracle supports d <= 2, got {d}"),
    }
}

/// A closed-form integrand on `[0,1]^dim` with its exact integral.
pub struct ClosedForm {
    pub expr: Expr,
    pub dim: usize,
    pub exact: f64,
}

impl ClosedForm {
    pub fn domain(&self) -> IntervalBox {
        IntervalBox::from_bounds(&vec![(0.0, 1.0); self.dim]).unwrap()
    }
}

/// Twenty integrands: polynomials and tanh compositions in one and two
/// variables. Exact values come from antiderivatives.
pub fn closed_forms() -> Vec<ClosedForm> {
    let t1 = 1f64.tanh();
    let lc = |x: f64| x.cosh().ln();
    let list: Vec<(&str, usize, f64)> = vec![
        ("x1^2", 1, 1.0 / 3.0),
        ("x1^3 - x1/2", 1, 0.0),
        ("3*x1^2 - 2*x1 + 1", 1, 1.0),
        ("x1^5", 1, 1.0 / 6.0),
        ("(x1 - 0.3)^4", 1, (0.7f64.powi(5) + 0.3f64.powi(5)) / 5.0),
        ("x1*x2", 2, 0.25),
        ("x1^2 + x2^2", 2, 2.0 / 3.0),
        ("(x1 - x2)^2", 2, 1.0 / 6.0),
        ("x1^3*x2^2", 2, 1.0 / 12.0),
        ("1 + x1*x2^3", 2, 1.125),
        ("tanh(x1)", 1, lc(1.0)),
        ("tanh(x1)^2", 1, 1.0 - t1),
        ("tanh(3*x1 - 1)", 1, (lc(2.0) - lc(1.0)) / 3.0),
        ("(1 - tanh(x1)^2)*cos(tanh(x1))", 1, t1.sin()),
        ("exp(tanh(x1))*(1 - tanh(x1)^2)", 1, t1.exp() - 1.0),
        ("tanh(x1)*(1 - tanh(x1)^2)", 1, t1 * t1 / 2.0),
        ("tanh(x1)*tanh(x2)", 2, lc(1.0) * lc(1.0)),
        ("(1 - tanh(x1*x2)^2)*(1 - 2*x1*x2*tanh(x1*x2))", 2, t1),
        ("tanh(x1)^2*x2", 2, (1.0 - t1) / 2.0),
        ("(1 - tanh(x1)^2)*x2^2", 2, t1 / 3.0),
    ];
    list.into_iter()
        .map(|(s, dim, exact)| ClosedForm { expr: Expr::parse(s).unwrap(), dim, exact })
        .collect()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub const OUTWARD: Rounding = Rounding::Outward;

/// `|a - b| / max(1, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
