//! Run configuration shared by the command-line tool and the browser demo.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adaquad::{AlgorithmInstance, Refinement, StopCriteria, DEFAULT_MAX_CHILDREN};
use crate::certify::Target;
use crate::enclosure::DEFAULT_VERTEX_CAP;
use crate::error::{config_err, Error, Result};
use crate::interval::{Interval, IntervalBox, Rounding};
use crate::operator::{Coefficient, EllipticOperator};
use crate::quadrature::QuadratureRule;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementKind {
    Hoelder,
    #[default]
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorPreset {
    /// `DΦ = ΔΦ`.
    Laplacian,
    /// `DΦ = -ΔΦ`.
    NegativeLaplacian,
}

/// Coefficients as expression strings; missing entries default to zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<OperatorPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default = "zero_expr")]
    pub g: String,
}

fn zero_expr() -> String {
    "0".to_string()
}

impl OperatorConfig {
    pub fn build(&self, dim: usize) -> Result<EllipticOperator> {
        let field = |name: &str, e: Error| config_err(&format!("operator.{name}"), e.to_string());
        let g = Coefficient::parse(&self.g).map_err(|e| field("g", e))?;
        let a = match (&self.preset, &self.a) {
            (Some(_), Some(_)) => {
                return Err(config_err("operator.a", "give either `preset` or `a`, not both"))
            }
            (Some(OperatorPreset::Laplacian), None) => {
                return self.with_lower_order(EllipticOperator::laplacian(dim, g.clone()), dim, g)
            }
            (Some(OperatorPreset::NegativeLaplacian), None) => {
                return self.with_lower_order(EllipticOperator::negative_laplacian(dim, g.clone()), dim, g)
            }
            (None, None) => return Err(config_err("operator.a", "missing (or set `preset`)")),
            (None, Some(a)) => a,
        };
        if a.len() != dim || a.iter().any(|row| row.len() != dim) {
            return Err(config_err("operator.a", format!("must be a {dim}x{dim} matrix")));
        }
        let a = a
            .iter()
            .flatten()
            .map(|s| Coefficient::parse(s))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| field("a", e))?;
        let (b, c) = self.lower_order(dim)?;
        EllipticOperator::new(dim, a, b, c, g).map_err(|e| config_err("operator", e.to_string()))
    }

    fn lower_order(&self, dim: usize) -> Result<(Vec<Coefficient>, Coefficient)> {
        let b = match &self.b {
            None => vec![Coefficient::Constant(0.0); dim],
            Some(b) if b.len() == dim => b
                .iter()
                .map(|s| Coefficient::parse(s))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| config_err("operator.b", e.to_string()))?,
            Some(_) => return Err(config_err("operator.b", format!("must have {dim} entries"))),
        };
        let c = match &self.c {
            None => Coefficient::Constant(0.0),
            Some(s) => Coefficient::parse(s).map_err(|e| config_err("operator.c", e.to_string()))?,
        };
        Ok((b, c))
    }

    fn with_lower_order(&self, base: EllipticOperator, dim: usize, g: Coefficient) -> Result<EllipticOperator> {
        let (b, c) = self.lower_order(dim)?;
        let a = (0..dim * dim)
            .map(|k| base.a(k / dim, k % dim).clone())
            .collect();
        EllipticOperator::new(dim, a, b, c, g).map_err(|e| config_err("operator", e.to_string()))
    }
}

/// Output file names; relative names resolve against the `--out` directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_history")]
    pub history: String,
    /// Partition dump; `.json` selects the JSON variant, anything else CSV.
    #[serde(default)]
    pub partition: Option<String>,
}

fn default_report() -> String {
    "report.json".into()
}

fn default_history() -> String {
    "history.csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            report: default_report(),
            history: default_history(),
            partition: Some("partition.csv".into()),
        }
    }
}

/// Settings of the sampling audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_boxes")]
    pub boxes: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest box width as a fraction of each domain axis.
    #[serde(default = "default_box_fraction")]
    pub max_box_fraction: f64,
}

fn default_boxes() -> usize {
    100
}

fn default_samples() -> usize {
    1000
}

fn default_box_fraction() -> f64 {
    0.25
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            boxes: default_boxes(),
            samples: default_samples(),
            max_box_fraction: default_box_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: PathBuf,
    pub domain: Vec<[f64; 2]>,
    pub target: Target,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_half")]
    pub theta: f64,
    #[serde(default = "default_half")]
    pub rho: f64,
    #[serde(default)]
    pub refinement: RefinementKind,
    #[serde(default = "default_max_children")]
    pub max_children: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
    #[serde(default = "default_stop")]
    pub stop: StopCriteria,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_vertex_cap")]
    pub vertex_cap: usize,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default = "default_true")]
    pub exact_affine: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_p() -> f64 {
    2.0
}

fn default_half() -> f64 {
    0.5
}

fn default_max_children() -> usize {
    DEFAULT_MAX_CHILDREN
}

fn default_stop() -> StopCriteria {
    StopCriteria::steps(30)
}

fn default_vertex_cap() -> usize {
    DEFAULT_VERTEX_CAP
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| config_err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.is_empty() {
            return Err(config_err("domain", "needs at least one axis"));
        }
        for (i, [lo, hi]) in self.domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(config_err(&format!("domain[{i}]"), format!("invalid bounds [{lo}, {hi}]")));
            }
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(config_err("p", format!("must satisfy 1 <= p < inf, got {}", self.p)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config_err("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(config_err("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        if self.max_children < 2 {
            return Err(config_err("max_children", "must be at least 2"));
        }
        self.stop.validate()?;
        if self.target == Target::Residual && self.operator.is_none() {
            return Err(config_err("operator", "required for target `residual`"));
        }
        if let Some(op) = &self.operator {
            op.build(self.domain.len())?;
        }
        if self.verify.boxes == 0 || self.verify.samples == 0 {
            return Err(config_err("verify", "boxes and samples must be positive"));
        }
        if !(self.verify.max_box_fraction > 0.0 && self.verify.max_box_fraction <= 1.0) {
            return Err(config_err("verify.max_box_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn domain_box(&self) -> Result<IntervalBox> {
        IntervalBox::new(
            self.domain
                .iter()
                .map(|&[lo, hi]| Interval::new(lo, hi))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn refinement(&self) -> Refinement {
        match self.refinement {
            RefinementKind::Half => Refinement::Half,
            RefinementKind::Hoelder => Refinement::Hoelder {
                rho: self.rho,
                max_children: self.max_children,
            },
        }
    }

    pub fn algorithm(&self) -> Result<AlgorithmInstance> {
        Ok(AlgorithmInstance::new(self.rule, self.theta, self.refinement())?.with_rounding(self.rounding))
    }

    pub fn operator(&self) -> Result<Option<EllipticOperator>> {
        self.operator
            .as_ref()
            .map(|o| o.build(self.domain.len()))
            .transpose()
    }
}
