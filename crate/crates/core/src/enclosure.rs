//! Interval enclosures of network values, Jacobians and Hessians over boxes.
//!
//! Values come from forward interval propagation. Derivatives run the chain
//! rule backwards through the tail networks: `J^(L) = W^(L)`,
//! `J^(k) = J^(k+1) diag(Σ'(Z^(k+1))) W^(k)`, and for output `i`
//! `H^(L) = 0`,
//! `H^(k) = W^(k)ᵀ [diag(s) H^(k+1) diag(s) + diag(Σ''(Z^(k+1)) ⊙ J_i^(k+1))] W^(k)`
//! with `s = Σ'(Z^(k+1))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox, IntervalMatrix, Rounding};
use crate::network::{Activation, Dense, Network};
use crate::operator::EllipticOperator;

/// Default cap on the input dimension for vertex enumeration.
pub const DEFAULT_VERTEX_CAP: usize = 20;

/// Relative slack applied to computed Hölder constants to absorb rounding.
const HOELDER_SLACK: f64 = 1.0 + 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoelderParams {
    pub c: f64,
    pub gamma: f64,
}

impl HoelderParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(crate::error::config_err("hoelder.c", format!("must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(crate::error::config_err(
                "hoelder.gamma",
                format!("must lie in (0, 1], got {gamma}"),
            ));
        }
        Ok(HoelderParams { c, gamma })
    }

    /// Lipschitz parameters, clamping a zero constant to the smallest
    /// positive value so the parameters stay valid.
    fn lipschitz(c: f64) -> Self {
        HoelderParams {
            c: (c * HOELDER_SLACK).max(f64::MIN_POSITIVE),
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnclosureKind {
    Fval,
    Jac,
    Hess,
}

/// Per-layer signs of hidden activations, `-1`, `0` or `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivationPattern(pub Vec<Vec<i8>>);

/// Value, Jacobian and Hessians of the whole network over one box.
#[derive(Clone, Debug)]
pub struct DerivativeEnclosure {
    pub value: Vec<Interval>,
    /// `d_{L+1} × d_0`, present for order ≥ 1.
    pub jac: Option<IntervalMatrix>,
    /// One `d_0 × d_0` matrix per output, present for order 2.
    pub hess: Vec<IntervalMatrix>,
}

/// Point analogue of [`DerivativeEnclosure`]; matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointDerivatives {
    pub value: Vec<f64>,
    pub jac: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

/// Enclosure algorithms for one network under one rounding policy.
#[derive(Clone, Copy, Debug)]
pub struct Encloser<'a> {
    net: &'a Network,
    rounding: Rounding,
    vertex_cap: usize,
}

struct Chains {
    /// `Z^(1) .. Z^(L+1)`.
    z: Vec<Vec<Interval>>,
    /// `Σ'(Z^(h))` for hidden layers, index `h-1`.
    s: Vec<Vec<Interval>>,
    /// `Σ''(Z^(h))`, index `h-1`.
    t: Vec<Vec<Interval>>,
    /// `J^(k)` for `k = lowest ..= L`, index `k - lowest`.
    jac: Vec<IntervalMatrix>,
    lowest: usize,
}

impl<'a> Encloser<'a> {
    pub fn new(net: &'a Network, rounding: Rounding) -> Self {
        Encloser {
            net,
            rounding,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }

    pub fn with_vertex_cap(mut self, cap: usize) -> Self {
        self.vertex_cap = cap;
        self
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    fn check_box(&self, k: &IntervalBox) -> Result<()> {
        if k.dim() != self.net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.net.input_dim(),
                got: k.dim(),
            });
        }
        Ok(())
    }

    fn act(&self) -> Activation {
        self.net.activation()
    }

    /// Forward interval pass, returning `Z^(1) .. Z^(L+1)`.
    fn forward(&self, k: &IntervalBox) -> Result<Vec<Vec<Interval>>> {
        self.check_box(k)?;
        let r = self.rounding;
        let depth = self.net.depth();
        let mut x = k.axes().to_vec();
        let mut zs = Vec::with_capacity(depth + 1);
        for (l, layer) in self.net.layers().iter().enumerate() {
            let z = layer.apply_interval(&x, r);
            if l < depth {
                x = z
                    .iter()
                    .map(|&v| self.act().enclosure(0, v, r))
                    .collect::<Result<_>>()?;
            }
            zs.push(z);
        }
        Ok(zs)
    }

    /// `Z^(l)` over `K` for `1 <= l <= L+1`; `l = L+1` encloses `Φ(K)`.
    pub fn fval(&self, l: usize, k: &IntervalBox) -> Result<IntervalBox> {
        let n = self.net.depth() + 1;
        if l == 0 || l > n {
            return Err(Error::IndexOutOfRange { index: l, len: n + 1 });
        }
        let mut zs = self.forward(k)?;
        zs.truncate(l);
        Ok(IntervalBox::from_axes_unchecked(zs.pop().expect("l >= 1")))
    }

    /// Enclosure of `Φ(K)`.
    pub fn output(&self, k: &IntervalBox) -> Result<IntervalBox> {
        self.fval(self.net.depth() + 1, k)
    }

    fn chains(&self, k: &IntervalBox, order: usize, lowest: usize) -> Result<Chains> {
        self.act().check_order(order)?;
        let r = self.rounding;
        let depth = self.net.depth();
        let z = self.forward(k)?;
        let mut s = Vec::new();
        let mut t = Vec::new();
        if order >= 1 {
            for zh in &z[..depth] {
                s.push(
                    zh.iter()
                        .map(|&v| self.act().enclosure(1, v, r))
                        .collect::<Result<Vec<_>>>()?,
                );
                if order >= 2 {
                    t.push(
                        zh.iter()
                            .map(|&v| self.act().enclosure(2, v, r))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
            }
        }
        let mut jac = Vec::new();
        if order >= 1 {
            let last = self.net.layer(depth);
            let mut j = IntervalMatrix::from_real(&last.weight_rows())?;
            jac.push(j.clone());
            for kk in (lowest..depth).rev() {
                j = scale_cols_times_real(&j, &s[kk], self.net.layer(kk), r);
                jac.push(j.clone());
            }
            jac.reverse();
        }
        Ok(Chains {
            z,
            s,
            t,
            jac,
            lowest,
        })
    }

    /// `J^(l) ⊇ ∇Φ^(l)(x^(l)(K))` for `0 <= l <= L`.
    pub fn jac(&self, l: usize, k: &IntervalBox) -> Result<IntervalMatrix> {
        let depth = self.net.depth();
        if l > depth {
            return Err(Error::IndexOutOfRange {
                index: l,
                len: depth + 1,
            });
        }
        let mut c = self.chains(k, 1, l)?;
        Ok(c.jac.swap_remove(0))
    }

    /// `H^(k)` for `k = lowest ..= L` for output `i`, index `k - lowest`; only
    /// `H^(lowest)` unless `all` is set.
    fn hess_chain(&self, c: &Chains, i: usize, lowest: usize, all: bool) -> Vec<IntervalMatrix> {
        let r = self.rounding;
        let depth = self.net.depth();
        // the output layer is affine, so H^(L) = 0 and the first step is a
        // diagonal congruence
        let mut h: Option<IntervalMatrix> = None;
        let mut out = Vec::new();
        if all || lowest == depth {
            out.push(IntervalMatrix::zeros(self.net.width(depth), self.net.width(depth)));
        }
        for kk in (lowest..depth).rev() {
            let s = &c.s[kk];
            let t = &c.t[kk];
            let jrow = &c.jac[kk + 1 - c.lowest];
            let n = s.len();
            let diag: Vec<Interval> = (0..n).map(|a| r.mul(t[a], jrow.get(i, a))).collect();
            let next = match &h {
                None => diagonal_congruence(&diag, self.net.layer(kk), r),
                Some(h) => {
                    let mut m = IntervalMatrix::zeros(n, n);
                    for a in 0..n {
                        for b in a..n {
                            let mut v = r.mul(r.mul(s[a], h.get(a, b)), s[b]);
                            if a == b {
                                v = r.add(v, diag[a]);
                            }
                            m.set(a, b, v);
                            m.set(b, a, v);
                        }
                    }
                    congruence(&m, self.net.layer(kk), r)
                }
            };
            if all {
                out.push(next.clone());
            }
            h = Some(next);
        }
        if let Some(h) = h.filter(|_| !all) {
            out.push(h);
        }
        out.reverse();
        out
    }

    /// `H^(l) ⊇ ∇²Φ_i^(l)(x^(l)(K))` for output `i` (0-based) and `0 <= l <= L`.
    pub fn hess(&self, i: usize, l: usize, k: &IntervalBox) -> Result<IntervalMatrix> {
        let depth = self.net.depth();
        if i >= self.net.output_dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.net.output_dim(),
            });
        }
        if l > depth {
            return Err(Error::IndexOutOfRange {
                index: l,
                len: depth + 1,
            });
        }
        let c = self.chains(k, 2, l)?;
        Ok(self.hess_chain(&c, i, l, false).swap_remove(0))
    }

    /// Value, Jacobian and Hessian enclosures with one shared forward pass.
    pub fn derivatives(&self, k: &IntervalBox, order: usize) -> Result<DerivativeEnclosure> {
        let c = self.chains(k, order, 0)?;
        let value = c.z.last().cloned().expect("at least one layer");
        let jac = (order >= 1).then(|| c.jac[0].clone());
        let hess = if order >= 2 {
            (0..self.net.output_dim())
                .map(|i| self.hess_chain(&c, i, 0, false).swap_remove(0))
                .collect()
        } else {
            Vec::new()
        };
        Ok(DerivativeEnclosure { value, jac, hess })
    }

    /// Exact point values of `Φ`, `∇Φ` and `∇²Φ_i` via the same recursions in
    /// real arithmetic.
    pub fn point_derivatives(&self, x: &[f64], order: usize) -> Result<PointDerivatives> {
        self.act().check_order(order)?;
        let net = self.net;
        let act = self.act();
        let depth = net.depth();
        let trace = net.forward(x)?;
        let dout = net.output_dim();
        let mut out = PointDerivatives {
            value: trace.output.clone(),
            jac: Vec::new(),
            hess: Vec::new(),
        };
        if order == 0 {
            return Ok(out);
        }
        let s: Vec<Vec<f64>> = trace.preactivations[..depth]
            .iter()
            .map(|z| z.iter().map(|&v| act.d1(v)).collect())
            .collect();
        // jac[k] is J^(k), dout × d_k row-major
        let mut jac: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
        jac[depth] = net.layer(depth).weight_rows().concat();
        for kk in (0..depth).rev() {
            let w = net.layer(kk);
            let n = w.rows();
            let m = w.cols();
            let next = &jac[kk + 1];
            let mut j = vec![0.0; dout * m];
            for i in 0..dout {
                for a in 0..n {
                    let f = next[i * n + a] * s[kk][a];
                    if f != 0.0 {
                        for (col, wv) in w.weight_row(a).iter().enumerate() {
                            j[i * m + col] += f * wv;
                        }
                    }
                }
            }
            jac[kk] = j;
        }
        out.jac = jac[0].clone();
        if order >= 2 {
            let t: Vec<Vec<f64>> = trace.preactivations[..depth]
                .iter()
                .map(|z| z.iter().map(|&v| act.d2(v)).collect())
                .collect();
            for i in 0..dout {
                // H^(L) = 0, so the first step is diagonal
                let mut h: Option<Vec<f64>> = None;
                for kk in (0..depth).rev() {
                    let w = net.layer(kk);
                    let n = w.rows();
                    let m = w.cols();
                    let diag: Vec<f64> = (0..n).map(|a| t[kk][a] * jac[kk + 1][i * n + a]).collect();
                    let mut next = vec![0.0; m * m];
                    match &h {
                        None => {
                            for (a, &da) in diag.iter().enumerate() {
                                let row = w.weight_row(a);
                                for (p, &wp) in row.iter().enumerate() {
                                    let f = da * wp;
                                    for (slot, wq) in next[p * m..(p + 1) * m].iter_mut().zip(row) {
                                        *slot += f * wq;
                                    }
                                }
                            }
                        }
                        Some(h) => {
                            // inner · W, then Wᵀ · (inner · W)
                            let mut iw = vec![0.0; n * m];
                            for a in 0..n {
                                let row = &mut iw[a * m..(a + 1) * m];
                                for b in 0..n {
                                    let mut v = s[kk][a] * h[a * n + b] * s[kk][b];
                                    if a == b {
                                        v += diag[a];
                                    }
                                    if v != 0.0 {
                                        for (slot, wv) in row.iter_mut().zip(w.weight_row(b)) {
                                            *slot += v * wv;
                                        }
                                    }
                                }
                            }
                            for a in 0..n {
                                let row = &iw[a * m..(a + 1) * m];
                                for (p, &wv) in w.weight_row(a).iter().enumerate() {
                                    if wv != 0.0 {
                                        for (slot, v) in next[p * m..(p + 1) * m].iter_mut().zip(row) {
                                            *slot += wv * v;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    h = Some(next);
                }
                let h = h.unwrap_or_else(|| vec![0.0; net.width(depth).pow(2)]);
                out.hess.push(h);
            }
        }
        Ok(out)
    }

    /// `f(x) = Σ_i Σ_{|α|<=k} |D^α Φ_i(x)|^p`; mixed partials counted once.
    pub fn sobolev_integrand_point(&self, k: usize, p: f64, x: &[f64]) -> Result<f64> {
        let d = self.point_derivatives(x, k)?;
        Ok(sobolev_sum_point(&d, k, p, self.net.input_dim()))
    }

    /// Interval enclosure of [`sobolev_integrand_point`](Self::sobolev_integrand_point) over `K`.
    pub fn sobolev_integrand_enclosure(&self, k: usize, p: f64, b: &IntervalBox) -> Result<Interval> {
        let d = self.derivatives(b, k)?;
        Ok(sobolev_sum_interval(&d, k, p, self.rounding))
    }

    /// Signs of hidden activations at `x` (ReLU only).
    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        self.require_relu()?;
        let trace = self.net.forward(x)?;
        let depth = self.net.depth();
        Ok(ActivationPattern(
            trace.preactivations[..depth]
                .iter()
                .map(|v| v.iter().map(|&a| sign(a)).collect())
                .collect(),
        ))
    }

    fn require_relu(&self) -> Result<()> {
        if self.act() != Activation::Relu {
            return Err(Error::UnsupportedActivation(format!(
                "activation patterns need relu, network uses {}",
                self.act()
            )));
        }
        Ok(())
    }

    /// Sufficient test for `Φ` being affine on `K`: every vertex has the same
    /// activation pattern with no neuron on its kink. Pre-activations at the
    /// vertices are bounded with interval arithmetic, so a sign counts only
    /// when it is certain despite rounding.
    pub fn affine_on_box(&self, k: &IntervalBox) -> Result<bool> {
        self.require_relu()?;
        self.check_box(k)?;
        let verts = k.vertices(self.vertex_cap)?;
        let depth = self.net.depth();
        let mut reference: Option<Vec<Vec<i8>>> = None;
        for v in verts {
            let zs = self.forward(&IntervalBox::singleton(&v)?)?;
            let mut pattern = Vec::with_capacity(depth);
            for z in &zs[..depth] {
                let mut signs = Vec::with_capacity(z.len());
                for iv in z {
                    if iv.lo() > 0.0 {
                        signs.push(1);
                    } else if iv.hi() < 0.0 {
                        signs.push(-1);
                    } else {
                        return Ok(false);
                    }
                }
                pattern.push(signs);
            }
            match &reference {
                None => reference = Some(pattern),
                Some(p) if *p != pattern => return Ok(false),
                Some(_) => {}
            }
        }
        Ok(true)
    }

    /// `r(x) = |DΦ(x) - g(x)|^p` for scalar-output networks.
    pub fn residual_point(&self, op: &EllipticOperator, p: f64, x: &[f64]) -> Result<f64> {
        self.check_residual(op)?;
        let d = self.point_derivatives(x, 2)?;
        let v = op.apply_point(d.value[0], &d.jac, &d.hess[0], x)?;
        Ok(v.abs().powf(p))
    }

    /// Interval enclosure of `DΦ - g` over `K`, before the power map.
    pub fn operator_enclosure(&self, op: &EllipticOperator, k: &IntervalBox) -> Result<Interval> {
        self.check_residual(op)?;
        let d = self.derivatives(k, 2)?;
        let jac = d.jac.as_ref().expect("order 2 has a Jacobian");
        op.apply_interval(d.value[0], jac.entries(), d.hess[0].entries(), k, self.rounding)
    }

    /// Interval enclosure of `r(K)`.
    pub fn residual_enclosure(&self, op: &EllipticOperator, p: f64, k: &IntervalBox) -> Result<Interval> {
        Ok(self.operator_enclosure(op, k)?.abs_pow(p, self.rounding))
    }

    fn check_residual(&self, op: &EllipticOperator) -> Result<()> {
        if self.net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.net.output_dim(),
            });
        }
        if op.dim() != self.net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.net.input_dim(),
                got: op.dim(),
            });
        }
        self.act().check_order(2)
    }

    /// Width constants over `Ω`: `c_z[l]` for `Z^(l+1)`, `c_j[k]` for `J^(k)`,
    /// `c_h[k]` for all `H_i^(k)`, each bounding the enclosure width by a
    /// multiple of `w(K)` for boxes `K ⊆ Ω`.
    fn width_constants(&self, omega: &IntervalBox, order: usize) -> Result<WidthConstants> {
        let net = self.net;
        let act = self.act();
        let depth = net.depth();
        let mut c_z = Vec::with_capacity(depth + 1);
        let mut prev = 1.0;
        for (l, layer) in net.layers().iter().enumerate() {
            let cz = layer.norm() * prev;
            c_z.push(cz);
            if l < depth {
                prev = act.lipschitz(0) * cz;
            }
        }
        let mut c_j = vec![0.0; depth + 1];
        let mut c_h = vec![0.0; depth + 1];
        if order == 0 {
            return Ok(WidthConstants { c_z, c_j, c_h });
        }
        let ch = self.chains(omega, order, 0)?;
        let mag = |v: &[Interval]| v.iter().map(Interval::magnitude).fold(0.0, f64::max);
        for kk in (0..depth).rev() {
            let wn = net.layer(kk).col_norm();
            let ms = mag(&ch.s[kk]);
            let mj = ch.jac[kk + 1].max_magnitude();
            c_j[kk] = wn * (mj * act.lipschitz(1) * c_z[kk] + ms * c_j[kk + 1]);
        }
        if order >= 2 {
            let hs: Vec<Vec<IntervalMatrix>> = (0..net.output_dim())
                .map(|i| self.hess_chain(&ch, i, 0, true))
                .collect();
            for kk in (0..depth).rev() {
                let wn = net.layer(kk).col_norm();
                let ms = mag(&ch.s[kk]);
                let mt = mag(&ch.t[kk]);
                let mj = ch.jac[kk + 1].max_magnitude();
                let mh = hs.iter().map(|h| h[kk + 1].max_magnitude()).fold(0.0, f64::max);
                c_h[kk] = wn
                    * wn
                    * (ms * ms * c_h[kk + 1]
                        + 2.0 * ms * mh * act.lipschitz(1) * c_z[kk]
                        + mt * c_j[kk + 1]
                        + mj * act.lipschitz(2) * c_z[kk]);
            }
        }
        Ok(WidthConstants { c_z, c_j, c_h })
    }

    /// Lipschitz-type parameters for the raw enclosures on `Ω`: `w(F(K)) <=
    /// C·w(K)^γ` for every box `K ⊆ Ω`, for the output values (`Fval`), the
    /// input Jacobian, or the input Hessians.
    pub fn hoelder_params(&self, kind: EnclosureKind, omega: &IntervalBox) -> Result<HoelderParams> {
        self.check_box(omega)?;
        let order = match kind {
            EnclosureKind::Fval => 0,
            EnclosureKind::Jac => 1,
            EnclosureKind::Hess => 2,
        };
        let wc = self.width_constants(omega, order)?;
        let c = match kind {
            EnclosureKind::Fval => wc.c_z[self.net.depth()],
            EnclosureKind::Jac => wc.c_j[0],
            EnclosureKind::Hess => wc.c_h[0],
        };
        Ok(HoelderParams::lipschitz(c))
    }

    /// Parameters for the Sobolev integrand enclosure on `Ω`.
    pub fn hoelder_integrand(&self, k: usize, p: f64, omega: &IntervalBox) -> Result<HoelderParams> {
        self.check_box(omega)?;
        let wc = self.width_constants(omega, k)?;
        let d0 = self.net.input_dim() as f64;
        let dout = self.net.output_dim() as f64;
        let mut sum = dout * wc.c_z[self.net.depth()];
        if k >= 1 {
            sum += dout * d0 * wc.c_j[0];
        }
        if k >= 2 {
            sum += dout * d0 * (d0 + 1.0) / 2.0 * wc.c_h[0];
        }
        let d = self.derivatives(omega, k)?;
        let m = term_magnitude(&d, k);
        Ok(HoelderParams::lipschitz(power_slope(p, m) * sum))
    }

    /// Parameters for the residual enclosure on `Ω`.
    pub fn hoelder_residual(&self, op: &EllipticOperator, p: f64, omega: &IntervalBox) -> Result<HoelderParams> {
        self.check_residual(op)?;
        let r = self.rounding;
        let wc = self.width_constants(omega, 2)?;
        let d = self.derivatives(omega, 2)?;
        let cv = op.enclose(omega, r)?;
        let lv = op.lipschitz(omega, r)?;
        let jac = d.jac.as_ref().expect("order 2");
        let h = &d.hess[0];
        let n = op.dim();
        let mut c = 0.0;
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                c += cv.a[idx].magnitude() * wc.c_h[0] + h.entries()[idx].magnitude() * lv.a[idx];
            }
            c += cv.b[i].magnitude() * wc.c_j[0] + jac.entries()[i].magnitude() * lv.b[i];
        }
        c += cv.c.magnitude() * wc.c_z[self.net.depth()] + d.value[0].magnitude() * lv.c;
        c += lv.g;
        let m = op
            .apply_interval(d.value[0], jac.entries(), h.entries(), omega, r)?
            .magnitude();
        Ok(HoelderParams::lipschitz(power_slope(p, m) * c))
    }
}

struct WidthConstants {
    c_z: Vec<f64>,
    c_j: Vec<f64>,
    c_h: Vec<f64>,
}

/// Lipschitz constant of `t ↦ |t|^p` on `[-m, m]`.
fn power_slope(p: f64, m: f64) -> f64 {
    if p == 1.0 {
        1.0
    } else {
        p * m.powf(p - 1.0)
    }
}

fn term_magnitude(d: &DerivativeEnclosure, k: usize) -> f64 {
    let mut m = d.value.iter().map(Interval::magnitude).fold(0.0, f64::max);
    if k >= 1 {
        m = m.max(d.jac.as_ref().map_or(0.0, IntervalMatrix::max_magnitude));
    }
    if k >= 2 {
        m = d.hess.iter().map(IntervalMatrix::max_magnitude).fold(m, f64::max);
    }
    m
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn sobolev_sum_point(d: &PointDerivatives, k: usize, p: f64, d0: usize) -> f64 {
    let pw = |v: f64| if p == 2.0 { v * v } else { v.abs().powf(p) };
    let mut acc: f64 = d.value.iter().map(|&v| pw(v)).sum();
    if k >= 1 {
        acc += d.jac.iter().map(|&v| pw(v)).sum::<f64>();
    }
    if k >= 2 {
        for h in &d.hess {
            for a in 0..d0 {
                for b in a..d0 {
                    acc += pw(h[a * d0 + b]);
                }
            }
        }
    }
    acc
}

fn sobolev_sum_interval(d: &DerivativeEnclosure, k: usize, p: f64, r: Rounding) -> Interval {
    let mut acc = r.sum(d.value.iter().map(|v| v.abs_pow(p, r)));
    if k >= 1 {
        if let Some(j) = &d.jac {
            acc = r.add(acc, r.sum(j.entries().iter().map(|v| v.abs_pow(p, r))));
        }
    }
    if k >= 2 {
        for h in &d.hess {
            let n = h.rows();
            for a in 0..n {
                for b in a..n {
                    acc = r.add(acc, h.get(a, b).abs_pow(p, r));
                }
            }
        }
    }
    Interval::raw(acc.lo().max(0.0), acc.hi())
}

/// `(J ⊙ s_cols) · W`: scales column `a` of `J` by `s_a`, then multiplies by
/// the real matrix `W`.
fn scale_cols_times_real(j: &IntervalMatrix, s: &[Interval], w: &Dense, r: Rounding) -> IntervalMatrix {
    let rows = j.rows();
    let n = w.rows();
    let m = w.cols();
    let mut out = IntervalMatrix::zeros(rows, m);
    for i in 0..rows {
        let scaled: Vec<Interval> = (0..n).map(|a| r.mul(j.get(i, a), s[a])).collect();
        for col in 0..m {
            let mut acc = Interval::ZERO;
            for (a, sa) in scaled.iter().enumerate() {
                let wv = w.w(a, col);
                if wv != 0.0 {
                    acc = r.add(acc, r.scale(*sa, wv));
                }
            }
            out.set(i, col, acc);
        }
    }
    out
}

/// `Wᵀ diag(D) W = Σ_a D_a w_a w_aᵀ` over the rows `w_a` of `W`.
fn diagonal_congruence(diag: &[Interval], w: &Dense, r: Rounding) -> IntervalMatrix {
    let cols = w.cols();
    let mut out = vec![Interval::ZERO; cols * cols];
    for (a, &da) in diag.iter().enumerate() {
        if da == Interval::ZERO {
            continue;
        }
        let wrow = w.weight_row(a);
        for (p, &wp) in wrow.iter().enumerate() {
            if wp == 0.0 {
                continue;
            }
            let dp = r.scale(da, wp);
            let orow = &mut out[p * cols..(p + 1) * cols];
            for q in p..cols {
                orow[q] = r.add(orow[q], r.scale(dp, wrow[q]));
            }
        }
    }
    for p in 0..cols {
        for q in 0..p {
            out[p * cols + q] = out[q * cols + p];
        }
    }
    IntervalMatrix::new(cols, cols, out).expect("shape is consistent")
}

/// `Wᵀ M W` for symmetric interval `M` and real `W`; the result is symmetric.
fn congruence(m: &IntervalMatrix, w: &Dense, r: Rounding) -> IntervalMatrix {
    if r == Rounding::Outward {
        if let Some(out) = congruence_midrad(m, w) {
            return out;
        }
    }
    let n = w.rows();
    let cols = w.cols();
    let me = m.entries();
    // mw = M W, n × cols, accumulated row by row of W for contiguous access
    let mut mw = vec![Interval::ZERO; n * cols];
    for a in 0..n {
        let acc = &mut mw[a * cols..(a + 1) * cols];
        for b in 0..n {
            let mab = me[a * n + b];
            if mab == Interval::ZERO {
                continue;
            }
            for (slot, &wv) in acc.iter_mut().zip(w.weight_row(b)) {
                if wv != 0.0 {
                    *slot = r.add(*slot, r.scale(mab, wv));
                }
            }
        }
    }
    // out = Wᵀ (M W), upper triangle then mirrored
    let mut out = vec![Interval::ZERO; cols * cols];
    for a in 0..n {
        let wrow = w.weight_row(a);
        let mrow = &mw[a * cols..(a + 1) * cols];
        for (p, &wv) in wrow.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            let orow = &mut out[p * cols..(p + 1) * cols];
            for q in p..cols {
                orow[q] = r.add(orow[q], r.scale(mrow[q], wv));
            }
        }
    }
    for p in 0..cols {
        for q in 0..p {
            out[p * cols + q] = out[q * cols + p];
        }
    }
    IntervalMatrix::new(cols, cols, out).expect("shape is consistent")
}

/// Bound on `|Σ a_i b_i - fl(Σ a_i b_i)| + Σ r_i |b_i|` for an `n`-term
/// midpoint-radius dot product, from the floating-point sums `rad = fl(Σ r_i|b_i|)`
/// and `mag = fl(Σ |a_i b_i|)`.
#[inline]
fn midrad_radius(rad: f64, mag: f64, n: usize) -> f64 {
    let k = (n + 4) as f64 * f64::EPSILON * 0.5;
    let g = k / (1.0 - k);
    (rad + g * mag) * (1.0 + 4.0 * g) + (n as f64 + 2.0) * f64::MIN_POSITIVE
}

/// Outward `Wᵀ M W` in midpoint-radius form: both stages are plain
/// floating-point products followed by an a-priori rounding-error bound.
/// `None` if anything overflows, in which case the endpoint path is used.
fn congruence_midrad(m: &IntervalMatrix, w: &Dense) -> Option<IntervalMatrix> {
    let n = w.rows();
    let cols = w.cols();
    let mut c = Vec::with_capacity(n * n);
    let mut rr = Vec::with_capacity(n * n);
    for v in m.entries() {
        let mid = 0.5 * v.lo() + 0.5 * v.hi();
        c.push(mid);
        rr.push((mid - v.lo()).max(v.hi() - mid).next_up());
    }
    // stage 1: M W, n × cols
    let mut c1 = vec![0.0; n * cols];
    let mut r1 = vec![0.0; n * cols];
    let mut e1 = vec![0.0; n * cols];
    for a in 0..n {
        let cs = &mut c1[a * cols..(a + 1) * cols];
        let rs = &mut r1[a * cols..(a + 1) * cols];
        let es = &mut e1[a * cols..(a + 1) * cols];
        for b in 0..n {
            let (cab, rab) = (c[a * n + b], rr[a * n + b]);
            if cab == 0.0 && rab == 0.0 {
                continue;
            }
            let acab = cab.abs();
            for (q, &wv) in w.weight_row(b).iter().enumerate() {
                let aw = wv.abs();
                cs[q] += cab * wv;
                rs[q] += rab * aw;
                es[q] += acab * aw;
            }
        }
    }
    for (rad, mag) in r1.iter_mut().zip(&e1) {
        *rad = midrad_radius(*rad, *mag, n);
    }
    // stage 2: Wᵀ (M W), upper triangle
    let mut c2 = vec![0.0; cols * cols];
    let mut r2 = vec![0.0; cols * cols];
    let mut e2 = vec![0.0; cols * cols];
    for a in 0..n {
        let crow = &c1[a * cols..(a + 1) * cols];
        let rrow = &r1[a * cols..(a + 1) * cols];
        for (p, &wv) in w.weight_row(a).iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            let aw = wv.abs();
            for q in p..cols {
                c2[p * cols + q] += wv * crow[q];
                r2[p * cols + q] += aw * rrow[q];
                e2[p * cols + q] += aw * crow[q].abs();
            }
        }
    }
    let mut out = vec![Interval::ZERO; cols * cols];
    for p in 0..cols {
        for q in p..cols {
            let i = p * cols + q;
            let rad = midrad_radius(r2[i], e2[i], n);
            let (lo, hi) = ((c2[i] - rad).next_down(), (c2[i] + rad).next_up());
            if !(lo.is_finite() && hi.is_finite()) {
                return None;
            }
            out[i] = Interval::raw(lo, hi);
            out[q * cols + p] = out[i];
        }
    }
    Some(IntervalMatrix::new(cols, cols, out).expect("shape is consistent"))
}
