//! Positive-weight quadrature rules on boxes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::enclosure::Encloser;
use crate::error::{Error, Result};
use crate::interval::IntervalBox;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuadratureRule {
    #[default]
    Midpoint,
    /// Tensor-product Gauss–Legendre with `n` nodes per axis.
    GaussTensor(usize),
}

impl QuadratureRule {
    /// Degree of exactness per axis.
    pub fn degree(&self) -> usize {
        match self {
            QuadratureRule::Midpoint => 1,
            QuadratureRule::GaussTensor(n) => 2 * n - 1,
        }
    }

    /// Nodes and weights on `[0, 1]`; weights sum to one.
    pub fn unit_rule(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            QuadratureRule::Midpoint => (vec![0.5], vec![1.0]),
            QuadratureRule::GaussTensor(n) => {
                let (x, w) = gauss_legendre(*n);
                (
                    x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
                    w.iter().map(|v| 0.5 * v).collect(),
                )
            }
        }
    }

    /// Nodes mapped into `K` with weights summing to `vol(K)`.
    pub fn points(&self, k: &IntervalBox) -> Vec<(Vec<f64>, f64)> {
        let (u, w) = self.unit_rule();
        let d = k.dim();
        let n = u.len();
        let vol = k.volume();
        let total = n.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let unit: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
            let weight = idx.iter().map(|&i| w[i]).product::<f64>() * vol;
            out.push((k.map_unit(&unit), weight));
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < n {
                    break;
                }
                *slot = 0;
            }
        }
        out
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate<F>(&self, mut f: F, k: &IntervalBox) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        if k.volume() == 0.0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for (x, w) in self.points(k) {
            let v = f(&x)?;
            if !v.is_finite() {
                return Err(Error::Evaluator(format!("integrand is not finite at {x:?}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureRule::Midpoint => f.write_str("midpoint"),
            QuadratureRule::GaussTensor(n) => write!(f, "gauss:{n}"),
        }
    }
}

impl FromStr for QuadratureRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "midpoint" {
            return Ok(QuadratureRule::Midpoint);
        }
        if let Some(n) = s.strip_prefix("gauss:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad node count in `{s}`")))?;
            if n == 0 || n > 64 {
                return Err(Error::Parse(format!("gauss node count must be 1..=64, got {n}")));
            }
            return Ok(QuadratureRule::GaussTensor(n));
        }
        Err(Error::Parse(format!("unknown quadrature rule `{s}`")))
    }
}

impl TryFrom<String> for QuadratureRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QuadratureRule> for String {
    fn from(r: QuadratureRule) -> Self {
        r.to_string()
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`, by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}

/// `∫_K Σ_i |Φ_i|^p` for a ReLU network that is affine on `K`, computed with a
/// Gauss rule of sufficient degree. Returns `None` unless `p` is a positive
/// integer, the network is certified affine on `K`, and `|Φ_i|^p` is a
/// polynomial there (even `p`, or no output changes sign on `K`).
pub fn exact_for_affine_piece(enc: &Encloser<'_>, p: f64, k: &IntervalBox) -> Result<Option<f64>> {
    if !(p >= 1.0 && p.fract() == 0.0 && p <= 64.0) {
        return Ok(None);
    }
    if !enc.affine_on_box(k)? {
        return Ok(None);
    }
    let even = (p as u64) % 2 == 0;
    if !even {
        let out = enc.output(k)?;
        if out.axes().iter().any(|v| v.straddles_zero()) {
            return Ok(None);
        }
    }
    let n = (p as usize + 2) / 2;
    let net = enc.network();
    let rule = QuadratureRule::GaussTensor(n);
    let v = rule.integrate(
        |x| {
            Ok(net
                .eval(x)?
                .iter()
                .map(|v| v.abs().powi(p as i32))
                .sum())
        },
        k,
    )?;
    Ok(Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Rounding;
    use crate::network::{Activation, Network};

    fn bx(b: &[(f64, f64)]) -> IntervalBox {
        IntervalBox::from_bounds(b).unwrap()
    }

    #[test]
    fn integrate_examples() {
        let k = bx(&[(0.0, 2.0)]);
        assert_eq!(QuadratureRule::Midpoint.integrate(|_| Ok(3.0), &k).unwrap(), 6.0);
        let v = QuadratureRule::GaussTensor(2)
            .integrate(|x| Ok(x[0].powi(3)), &bx(&[(0.0, 1.0)]))
            .unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let v = QuadratureRule::GaussTensor(3)
            .integrate(|x| Ok(x[0] * x[0] * x[1] * x[1]), &bx(&[(0.0, 1.0), (0.0, 1.0)]))
            .unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_nodes() {
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(w.iter().all(|&v| v > 0.0));
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for &z in &x {
                assert!(legendre(n, z).0.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn parse_and_display() {
        for s in ["midpoint", "gauss:3"] {
            assert_eq!(s.parse::<QuadratureRule>().unwrap().to_string(), s);
        }
        assert!("gauss:0".parse::<QuadratureRule>().is_err());
        assert!("simpson".parse::<QuadratureRule>().is_err());
        assert_eq!(QuadratureRule::GaussTensor(4).degree(), 7);
    }

    #[test]
    fn degenerate_box_gives_zero() {
        let k = bx(&[(1.0, 1.0), (0.0, 2.0)]);
        assert_eq!(QuadratureRule::Midpoint.integrate(|_| Ok(5.0), &k).unwrap(), 0.0);
    }

    #[test]
    fn affine_piece_examples() {
        let net = Network::from_parts(
            Activation::Relu,
            vec![(vec![vec![1.0]], vec![0.0]), (vec![vec![1.0]], vec![0.0])],
        )
        .unwrap();
        let enc = Encloser::new(&net, Rounding::Outward);
        let v = exact_for_affine_piece(&enc, 2.0, &bx(&[(1.0, 2.0)])).unwrap().unwrap();
        assert!((v - 7.0 / 3.0).abs() < 1e-15);
        assert!(exact_for_affine_piece(&enc, 1.5, &bx(&[(1.0, 2.0)])).unwrap().is_none());
        assert!(exact_for_affine_piece(&enc, 2.0, &bx(&[(-1.0, 1.0)])).unwrap().is_none());

        // Φ(x) = x - 1 via an always-active hidden unit: affine with a sign change
        let shifted = Network::from_parts(
            Activation::Relu,
            vec![(vec![vec![1.0]], vec![5.0]), (vec![vec![1.0]], vec![-6.0])],
        )
        .unwrap();
        let enc = Encloser::new(&shifted, Rounding::Outward);
        let k = bx(&[(0.0, 2.0)]);
        assert!(exact_for_affine_piece(&enc, 1.0, &k).unwrap().is_none());
        let v = exact_for_affine_piece(&enc, 2.0, &k).unwrap().unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
        let v = exact_for_affine_piece(&enc, 3.0, &bx(&[(1.0, 2.0)])).unwrap().unwrap();
        assert!((v - 0.25).abs() < 1e-14);
    }
}
