//! Certified Sobolev-norm and residual-norm bounds for networks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adaquad::{self, AlgorithmInstance, Integrand, ProblemInstance, Refinement, RunOutcome, StopCriteria, StopReason};
use crate::enclosure::{Encloser, DEFAULT_VERTEX_CAP};
use crate::error::{config_err, Error, Result};
use crate::interval::{Interval, IntervalBox, Rounding, TRANSCENDENTAL_ULPS};
use crate::network::{Activation, Network};
use crate::operator::EllipticOperator;
use crate::quadrature::exact_for_affine_piece;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lp,
    W1p,
    W2p,
    Residual,
}

impl Target {
    /// Derivative order of the Sobolev norm; 2 for residuals.
    pub fn order(self) -> usize {
        match self {
            Target::Lp => 0,
            Target::W1p => 1,
            Target::W2p | Target::Residual => 2,
        }
    }

    pub fn from_order(k: usize) -> Result<Self> {
        match k {
            0 => Ok(Target::Lp),
            1 => Ok(Target::W1p),
            2 => Ok(Target::W2p),
            _ => Err(config_err("k", format!("derivative order must be 0, 1 or 2, got {k}"))),
        }
    }
}

/// `x ↦ Σ_i Σ_{|α|<=k} |D^α Φ_i(x)|^p`.
pub struct SobolevIntegrand<'a> {
    enc: Encloser<'a>,
    k: usize,
    p: f64,
    exact_affine: bool,
}

impl<'a> SobolevIntegrand<'a> {
    pub fn new(enc: Encloser<'a>, k: usize, p: f64) -> Result<Self> {
        check_p(p)?;
        if k > 2 {
            return Err(config_err("k", format!("derivative order must be at most 2, got {k}")));
        }
        enc.network().activation().check_order(k)?;
        Ok(SobolevIntegrand {
            enc,
            k,
            p,
            exact_affine: false,
        })
    }

    /// Integrate affine ReLU pieces exactly (only meaningful for `k = 0`).
    pub fn with_exact_affine(mut self, on: bool) -> Self {
        self.exact_affine = on && self.k == 0 && self.enc.network().activation() == Activation::Relu;
        self
    }
}

impl Integrand for SobolevIntegrand<'_> {
    fn dim(&self) -> usize {
        self.enc.network().input_dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.enc.sobolev_integrand_point(self.k, self.p, x)
    }
    fn enclose(&self, k: &IntervalBox) -> Result<Interval> {
        self.enc.sobolev_integrand_enclosure(self.k, self.p, k)
    }
    fn exact(&self, k: &IntervalBox) -> Result<Option<f64>> {
        if self.exact_affine {
            exact_for_affine_piece(&self.enc, self.p, k)
        } else {
            Ok(None)
        }
    }
}

/// `x ↦ |DΦ(x) - g(x)|^p`.
pub struct ResidualIntegrand<'a> {
    enc: Encloser<'a>,
    op: &'a EllipticOperator,
    p: f64,
}

impl<'a> ResidualIntegrand<'a> {
    pub fn new(enc: Encloser<'a>, op: &'a EllipticOperator, p: f64) -> Result<Self> {
        check_p(p)?;
        let net = enc.network();
        if net.output_dim() != 1 {
            return Err(config_err("target", "residual norms need a scalar-output network"));
        }
        if op.dim() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                got: op.dim(),
            });
        }
        net.activation().check_order(2)?;
        Ok(ResidualIntegrand { enc, op, p })
    }
}

impl Integrand for ResidualIntegrand<'_> {
    fn dim(&self) -> usize {
        self.enc.network().input_dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.enc.residual_point(self.op, self.p, x)
    }
    fn enclose(&self, k: &IntervalBox) -> Result<Interval> {
        self.enc.residual_enclosure(self.op, self.p, k)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(config_err("p", format!("must satisfy 1 <= p < inf, got {p}")));
    }
    Ok(())
}

/// Extra knobs for norm certification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Use exact integration on affine ReLU pieces.
    pub exact_affine: bool,
    pub vertex_cap: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            exact_affine: true,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHistory {
    pub step: usize,
    /// `η_n`, the gap of the p-th power integral.
    pub eta: f64,
    pub cells: usize,
    /// `norm_upper - norm_lower` after this step.
    pub gap: f64,
    /// `gap` divided by the final `norm_upper`.
    pub normalized_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedReport {
    pub target: Target,
    pub p: f64,
    pub norm_lower: f64,
    pub norm_upper: f64,
    /// Certified bounds on the p-th power integral.
    pub integral_lower: f64,
    pub integral_upper: f64,
    #[serde(rename = "Q")]
    pub quad: f64,
    pub eta: f64,
    pub steps: usize,
    pub cells: usize,
    pub stop: StopReason,
    pub history: Vec<ReportHistory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
}

impl CertifiedReport {
    pub fn from_outcome(target: Target, p: f64, out: &RunOutcome) -> Self {
        let r = Rounding::Outward;
        let b = out.state.bounds();
        let (lo_n, hi_n) = (root_down(b.lo(), p, r), root_up(b.hi(), p, r));
        let denom = if hi_n > 0.0 { hi_n } else { 1.0 };
        let history = out
            .history
            .iter()
            .map(|h| {
                let gap = root_up(h.upper, p, r) - root_down(h.lower, p, r);
                ReportHistory {
                    step: h.step,
                    eta: h.eta,
                    cells: h.cells,
                    gap,
                    normalized_gap: gap / denom,
                }
            })
            .collect();
        CertifiedReport {
            target,
            p,
            norm_lower: lo_n,
            norm_upper: hi_n,
            integral_lower: b.lo(),
            integral_upper: b.hi(),
            quad: out.state.quad(),
            eta: out.state.eta(),
            steps: out.state.step,
            cells: out.state.len(),
            stop: out.stop,
            history,
            partition: None,
        }
    }

    pub fn gap(&self) -> f64 {
        self.norm_upper - self.norm_lower
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// CSV with columns `step,eta,cells,gap,normalized_gap`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("step,eta,cells,gap,normalized_gap\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{},{},{},{}", h.step, h.eta, h.cells, h.gap, h.normalized_gap);
        }
        out
    }
}

/// `max(0, v)^{1/p}` rounded down.
fn root_down(v: f64, p: f64, r: Rounding) -> f64 {
    let v = v.max(0.0);
    if v == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return v;
    }
    if p == 2.0 {
        // sqrt is correctly rounded; the FMA residual tells which side it is on
        let s = v.sqrt();
        return if s.mul_add(s, -v) > 0.0 { r.down(s) } else { s };
    }
    r.down_n(v.powf(1.0 / p), TRANSCENDENTAL_ULPS).max(0.0)
}

/// `v^{1/p}` rounded up.
fn root_up(v: f64, p: f64, r: Rounding) -> f64 {
    let v = v.max(0.0);
    if v == 0.0 || p == 1.0 {
        return v;
    }
    if p == 2.0 {
        let s = v.sqrt();
        return if s.mul_add(s, -v) < 0.0 { r.up(s) } else { s };
    }
    r.up_n(v.powf(1.0 / p), TRANSCENDENTAL_ULPS)
}

/// Certifies `‖Φ‖_{W^{k,p}(Ω)}` with the given algorithm and stop criteria.
pub fn certify_norm(
    net: &Network,
    omega: &IntervalBox,
    k: usize,
    p: f64,
    alg: &AlgorithmInstance,
    stop: &StopCriteria,
    opts: CertifyOptions,
) -> Result<(CertifiedReport, RunOutcome)> {
    let target = Target::from_order(k)?;
    let enc = Encloser::new(net, alg.rounding).with_vertex_cap(opts.vertex_cap);
    let integrand = SobolevIntegrand::new(enc, k, p)?.with_exact_affine(opts.exact_affine);
    let mut problem = ProblemInstance::new(&integrand, omega.clone())?;
    if matches!(alg.refinement, Refinement::Hoelder { .. }) {
        problem = problem.with_hoelder(enc.hoelder_integrand(k, p, omega)?);
    }
    let out = adaquad::run(&problem, alg, stop)?;
    Ok((CertifiedReport::from_outcome(target, p, &out), out))
}

/// Certifies `(∫_Ω |DΦ - g|^p)^{1/p}`.
pub fn certify_residual(
    net: &Network,
    op: &EllipticOperator,
    omega: &IntervalBox,
    p: f64,
    alg: &AlgorithmInstance,
    stop: &StopCriteria,
) -> Result<(CertifiedReport, RunOutcome)> {
    let enc = Encloser::new(net, alg.rounding);
    let integrand = ResidualIntegrand::new(enc, op, p)?;
    let mut problem = ProblemInstance::new(&integrand, omega.clone())?;
    if matches!(alg.refinement, Refinement::Hoelder { .. }) {
        problem = problem.with_hoelder(enc.hoelder_residual(op, p, omega)?);
    }
    let out = adaquad::run(&problem, alg, stop)?;
    Ok((CertifiedReport::from_outcome(Target::Residual, p, &out), out))
}
