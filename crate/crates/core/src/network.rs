//! Dense feedforward networks and activation enclosures.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, Rounding};

/// Extra ulps for activation values and derivatives; covers libm error and
/// the few products used to form derivatives.
const ACT_ULPS: u32 = 8;

/// `atanh(1/√3)`: extrema of `tanh''`.
const TANH_D2_CRIT: f64 = 0.658_478_948_462_408_4;
/// `|tanh''|` at its extrema, `4/(3√3)`.
const TANH_D2_PEAK: f64 = 0.769_800_358_919_501_3;
/// `ln(2+√3)`: extrema of the logistic second derivative.
const SIGMOID_D2_CRIT: f64 = 1.316_957_896_924_816_6;
/// `|s''|` at its extrema, `1/(6√3)`.
const SIGMOID_D2_PEAK: f64 = 0.096_225_044_864_937_63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" | "logistic" => Ok(Activation::Sigmoid),
            other => Err(Error::UnsupportedActivation(other.to_string())),
        }
    }

    /// Highest derivative order with an enclosure: 0 for ReLU, 2 otherwise.
    pub fn max_order(self) -> usize {
        match self {
            Activation::Relu => 0,
            Activation::Tanh | Activation::Sigmoid => 2,
        }
    }

    pub fn check_order(self, order: usize) -> Result<()> {
        if order > self.max_order() {
            Err(Error::UnsupportedDerivativeOrder {
                activation: self.name().to_string(),
                order,
            })
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// First derivative. For ReLU this is the a.e. derivative (0 at 0).
    #[inline]
    pub fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => tanh_d1(x),
            Activation::Sigmoid => sigmoid_d1(x),
        }
    }

    #[inline]
    pub fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Tanh => -2.0 * x.tanh() * tanh_d1(x),
            Activation::Sigmoid => -sigmoid_d1(x) * (0.5 * x).tanh(),
        }
    }

    pub fn derivative(self, order: usize, x: f64) -> f64 {
        match order {
            0 => self.eval(x),
            1 => self.d1(x),
            _ => self.d2(x),
        }
    }

    /// Global Lipschitz constant of the `order`-th derivative, i.e. the
    /// supremum of the next derivative.
    pub fn lipschitz(self, order: usize) -> f64 {
        match (self, order) {
            (Activation::Relu, _) => 1.0,
            (Activation::Tanh, 0) => 1.0,
            (Activation::Tanh, 1) => TANH_D2_PEAK,
            (Activation::Tanh, _) => 2.0,
            (Activation::Sigmoid, 0) => 0.25,
            (Activation::Sigmoid, 1) => SIGMOID_D2_PEAK,
            (Activation::Sigmoid, _) => 0.125,
        }
    }

    /// Range enclosure of the `order`-th derivative over `x`.
    ///
    /// Each derivative is piecewise monotone with known turning points, so the
    /// range is spanned by the endpoint values and the extremal values at any
    /// turning point inside `x`.
    pub fn enclosure(self, order: usize, x: Interval, r: Rounding) -> Result<Interval> {
        self.check_order(order)?;
        let (lo, hi) = (x.lo(), x.hi());
        let out = match (self, order) {
            (Activation::Relu, _) => return Ok(Interval::raw(lo.max(0.0), hi.max(0.0))),
            (_, 0) => {
                let v = r.widen(Interval::raw(self.eval(lo), self.eval(hi)), ACT_ULPS);
                let (a, b) = match self {
                    Activation::Tanh => (-1.0, 1.0),
                    _ => (0.0, 1.0),
                };
                clamp(v, a, b)
            }
            (_, 1) => {
                let peak = if self == Activation::Tanh { 1.0 } else { 0.25 };
                let (a, b) = (self.d1(lo), self.d1(hi));
                let v = if x.contains(0.0) {
                    Interval::raw(a.min(b), peak)
                } else {
                    Interval::spanning(a, b)
                };
                clamp(r.widen(v, ACT_ULPS), 0.0, peak)
            }
            _ => {
                let (crit, peak) = if self == Activation::Tanh {
                    (TANH_D2_CRIT, TANH_D2_PEAK)
                } else {
                    (SIGMOID_D2_CRIT, SIGMOID_D2_PEAK)
                };
                let (a, b) = (self.d2(lo), self.d2(hi));
                let mut vlo = a.min(b);
                let mut vhi = a.max(b);
                // d2 is odd: maximum +peak at -crit, minimum -peak at +crit.
                if x.contains(-crit) {
                    vhi = peak;
                }
                if x.contains(crit) {
                    vlo = -peak;
                }
                let mut v = r.widen(Interval::raw(vlo, vhi), ACT_ULPS);
                if r == Rounding::Outward {
                    // Turning points are rounded; allow for that neighbourhood.
                    if (lo - -crit).abs() < 1e-12 || (hi - -crit).abs() < 1e-12 {
                        v = v.hull(&Interval::point(peak));
                    }
                    if (lo - crit).abs() < 1e-12 || (hi - crit).abs() < 1e-12 {
                        v = v.hull(&Interval::point(-peak));
                    }
                }
                clamp(v, -peak, peak)
            }
        };
        Ok(out)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn clamp(v: Interval, a: f64, b: f64) -> Interval {
    let lo = v.lo().clamp(a, b);
    let hi = v.hi().clamp(a, b);
    Interval::raw(lo, hi)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sech²(x)` without overflow.
#[inline]
fn tanh_d1(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

#[inline]
fn sigmoid_d1(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// One affine layer `x ↦ W x + b`, weights stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let rows = weight.len();
        let cols = weight.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: "empty weight matrix".into(),
            });
        }
        if let Some(bad) = weight.iter().position(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!("row {bad} has {} columns, expected {cols}", weight[bad].len()),
            });
        }
        if bias.len() != rows {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!("bias has length {}, expected {rows}", bias.len()),
            });
        }
        let weight: Vec<f64> = weight.into_iter().flatten().collect();
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: "non-finite parameter".into(),
            });
        }
        Ok(Dense {
            rows,
            cols,
            weight,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.weight[i * self.cols + j]
    }

    pub fn weight_row(&self, i: usize) -> &[f64] {
        &self.weight[i * self.cols..(i + 1) * self.cols]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.weight_row(i).to_vec()).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.weight_row(i).iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn col_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.w(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.weight_row(i)
                    .iter()
                    .zip(x)
                    .fold(self.bias[i], |acc, (w, v)| acc + w * v)
            })
            .collect()
    }

    /// Interval image `W X + b`.
    pub fn apply_interval(&self, x: &[Interval], r: Rounding) -> Vec<Interval> {
        (0..self.rows)
            .map(|i| {
                let mut acc = Interval::point(self.bias[i]);
                for (j, xj) in x.iter().enumerate() {
                    let w = self.w(i, j);
                    if w != 0.0 {
                        acc = r.add(acc, r.scale(*xj, w));
                    }
                }
                acc
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    activation: String,
    layers: Vec<LayerFile>,
}

/// Feedforward network `Φ = W^(L) ∘ σ ∘ ... ∘ σ ∘ W^(0)` with one activation
/// shared by all hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    activation: Activation,
    layers: Vec<Dense>,
}

/// Per-layer values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `z^(1) .. z^(L+1)`.
    pub preactivations: Vec<Vec<f64>>,
    /// `x^(0) .. x^(L)`.
    pub activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Network {
    pub fn new(activation: Activation, layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: "network has no layers".into(),
            });
        }
        for k in 1..layers.len() {
            if layers[k].cols != layers[k - 1].rows {
                return Err(Error::ShapeMismatch {
                    layer: k,
                    detail: format!(
                        "weight has {} columns but previous layer has width {}",
                        layers[k].cols,
                        layers[k - 1].rows
                    ),
                });
            }
        }
        Ok(Network { activation, layers })
    }

    /// Network from `(weight rows, bias)` pairs.
    pub fn from_parts(activation: Activation, parts: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> Result<Self> {
        let layers = parts
            .into_iter()
            .enumerate()
            .map(|(k, (w, b))| Dense::new(w, b).map_err(|e| relabel(e, k)))
            .collect::<Result<Vec<_>>>()?;
        Network::new(activation, layers)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        let act = Activation::parse(&file.activation)?;
        Network::from_parts(
            act,
            file.layers.into_iter().map(|l| (l.weight, l.bias)).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Network::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            activation: self.activation.name().to_string(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight_rows(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("network serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// Seeded network with weights and biases drawn from
    /// `U(-1/√fan_in, 1/√fan_in)`.
    pub fn random(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!("invalid widths {widths:?}"),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = (0..fan_out)
                    .map(|_| (0..fan_in).map(|_| rng.gen_range(-bound..bound)).collect())
                    .collect();
                let bias = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
                (weight, bias)
            })
            .collect();
        Network::from_parts(activation, parts)
    }

    /// `Φ ≡ c` on `R^d`: a single layer with zero weights.
    pub fn constant(input_dim: usize, c: &[f64], activation: Activation) -> Result<Self> {
        Network::from_parts(
            activation,
            vec![(vec![vec![0.0; input_dim]; c.len()], c.to_vec())],
        )
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Dense {
        &self.layers[k]
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// `d_0 .. d_{L+1}`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols)
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn width(&self, l: usize) -> usize {
        if l == 0 {
            self.layers[0].cols
        } else {
            self.layers[l - 1].rows
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut activations = vec![x.to_vec()];
        let mut preactivations = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&activations[k]);
            if k < self.depth() {
                activations.push(z.iter().map(|&v| self.activation.eval(v)).collect());
            }
            preactivations.push(z);
        }
        let output = preactivations.last().cloned().unwrap_or_default();
        Ok(ForwardTrace {
            preactivations,
            activations,
            output,
        })
    }

    /// `Φ(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut v = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            v = layer.apply(&v);
            if k < self.depth() {
                v.iter_mut().for_each(|z| *z = self.activation.eval(*z));
            }
        }
        Ok(v)
    }
}

fn relabel(e: Error, layer: usize) -> Error {
    match e {
        Error::ShapeMismatch { detail, .. } => Error::ShapeMismatch { layer, detail },
        other => other,
    }
}
