//! Sampling audit of the derivative enclosures.
//!
//! Random sub-boxes of the domain are enclosed once and then probed at their
//! vertices and at uniform samples. Any sampled value outside its enclosure is
//! a violation. Tightness is the enclosure width over the width of the sampled
//! hull, so it is at least one for a sound enclosure (up to sampling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::enclosure::{Encloser, PointDerivatives};
use crate::error::{config_err, Result};
use crate::interval::{Interval, IntervalBox};
use crate::operator::EllipticOperator;

const MAX_VERTEX_DIM: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub boxes: usize,
    pub samples: usize,
    /// Largest box width as a fraction of each domain axis.
    pub max_box_fraction: f64,
    /// Highest derivative order to audit (0, 1 or 2).
    pub order: usize,
    pub seed: u64,
    /// Collapses every enclosure to its midpoint before checking. Used as a
    /// negative control: a working audit must report violations.
    pub corrupt: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            boxes: 100,
            samples: 1000,
            max_box_fraction: 0.25,
            order: 2,
            seed: 0,
            corrupt: false,
        }
    }
}

/// Results for one kind of quantity (values, Jacobian entries, ...).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub checks: u64,
    pub violations: u64,
    /// Largest violation distance seen.
    pub worst_excess: f64,
    /// Mean, median and maximum of enclosure width / sampled width over
    /// entries with a nonzero sampled width.
    pub tightness_mean: f64,
    pub tightness_median: f64,
    pub tightness_max: f64,
    #[serde(skip)]
    ratios: Vec<f64>,
}

impl KindStats {
    fn record(&mut self, enc: Interval, samples: &[f64]) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in samples {
            self.checks += 1;
            if !enc.contains(v) {
                self.violations += 1;
                let excess = (enc.lo() - v).max(v - enc.hi());
                self.worst_excess = self.worst_excess.max(excess);
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            self.ratios.push(enc.width() / (hi - lo));
        }
    }

    fn finish(&mut self) {
        if self.ratios.is_empty() {
            return;
        }
        self.ratios.sort_by(f64::total_cmp);
        self.tightness_mean = self.ratios.iter().sum::<f64>() / self.ratios.len() as f64;
        self.tightness_median = self.ratios[self.ratios.len() / 2];
        self.tightness_max = *self.ratios.last().unwrap();
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub boxes: usize,
    pub points_per_box: usize,
    pub value: KindStats,
    pub jac: KindStats,
    pub hess: KindStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<KindStats>,
}

impl AuditReport {
    pub fn violations(&self) -> u64 {
        self.value.violations
            + self.jac.violations
            + self.hess.violations
            + self.residual.as_ref().map_or(0, |r| r.violations)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Audits against the network's own point recursions.
pub fn audit(
    enc: &Encloser<'_>,
    omega: &IntervalBox,
    op: Option<&EllipticOperator>,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let order = opts.order;
    audit_with(enc, omega, op, opts, |x| enc.point_derivatives(x, order))
}

/// Audits against an arbitrary point oracle, which must return derivatives
/// up to `opts.order` (order 2 if `op` is given).
pub fn audit_with<F>(
    enc: &Encloser<'_>,
    omega: &IntervalBox,
    op: Option<&EllipticOperator>,
    opts: &AuditOptions,
    oracle: F,
) -> Result<AuditReport>
where
    F: Fn(&[f64]) -> Result<PointDerivatives>,
{
    if opts.order > 2 {
        return Err(config_err("order", "must be 0, 1 or 2"));
    }
    if op.is_some() && opts.order < 2 {
        return Err(config_err("order", "the residual audit needs order 2"));
    }
    if !(opts.max_box_fraction > 0.0 && opts.max_box_fraction <= 1.0) {
        return Err(config_err("max_box_fraction", "must lie in (0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let d = omega.dim();
    let mut report = AuditReport {
        boxes: opts.boxes,
        residual: op.map(|_| KindStats::default()),
        ..Default::default()
    };

    for _ in 0..opts.boxes {
        let k = random_sub_box(&mut rng, omega, opts.max_box_fraction)?;
        // vertices only in low dimension; beyond that the samples suffice
        let mut points = if d <= MAX_VERTEX_DIM { k.vertices(MAX_VERTEX_DIM)? } else { Vec::new() };
        for _ in 0..opts.samples {
            points.push(k.axes().iter().map(|a| sample(&mut rng, *a)).collect());
        }
        report.points_per_box = points.len();

        let shrink = |i: Interval| if opts.corrupt { Interval::point(i.mid()) } else { i };
        let de = enc.derivatives(&k, opts.order)?;
        let pts: Vec<PointDerivatives> = points.iter().map(|x| oracle(x)).collect::<Result<_>>()?;

        for (i, v) in de.value.iter().enumerate() {
            let s: Vec<f64> = pts.iter().map(|p| p.value[i]).collect();
            report.value.record(shrink(*v), &s);
        }
        if let Some(jac) = &de.jac {
            for (e, v) in jac.entries().iter().enumerate() {
                let s: Vec<f64> = pts.iter().map(|p| p.jac[e]).collect();
                report.jac.record(shrink(*v), &s);
            }
        }
        for (i, h) in de.hess.iter().enumerate() {
            for (e, v) in h.entries().iter().enumerate() {
                let s: Vec<f64> = pts.iter().map(|p| p.hess[i][e]).collect();
                report.hess.record(shrink(*v), &s);
            }
        }
        if let (Some(op), Some(stats)) = (op, report.residual.as_mut()) {
            let encl = enc.operator_enclosure(op, &k)?;
            let s = pts
                .iter()
                .zip(&points)
                .map(|(p, x)| op.apply_point(p.value[0], &p.jac, &p.hess[0], x))
                .collect::<Result<Vec<_>>>()?;
            stats.record(shrink(encl), &s);
        }
    }
    report.value.finish();
    report.jac.finish();
    report.hess.finish();
    if let Some(r) = report.residual.as_mut() {
        r.finish();
    }
    Ok(report)
}

fn sample(rng: &mut ChaCha8Rng, a: Interval) -> f64 {
    if a.is_point() {
        a.lo()
    } else {
        rng.gen_range(a.lo()..=a.hi())
    }
}

fn random_sub_box(rng: &mut ChaCha8Rng, omega: &IntervalBox, frac: f64) -> Result<IntervalBox> {
    let axes = omega
        .axes()
        .iter()
        .map(|a| {
            let w = a.width() * frac * rng.gen::<f64>();
            let lo = a.lo() + (a.width() - w) * rng.gen::<f64>();
            Interval::new(lo, (lo + w).min(a.hi()))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalBox::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Rounding;
    use crate::network::{Activation, Network};

    #[test]
    fn sound_and_negative_control() {
        let net = Network::random(&[2, 6, 6, 1], Activation::Tanh, 3).unwrap();
        let enc = Encloser::new(&net, Rounding::Outward);
        let omega = IntervalBox::from_bounds(&[(-1.0, 1.0), (0.0, 2.0)]).unwrap();
        let op = EllipticOperator::laplacian(2, crate::operator::Coefficient::parse("x1*x2").unwrap());
        let opts = AuditOptions {
            boxes: 10,
            samples: 50,
            ..Default::default()
        };
        let rep = audit(&enc, &omega, Some(&op), &opts).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.points_per_box, 54);
        assert!(rep.value.tightness_median >= 1.0);
        assert!(rep.hess.checks > 0 && rep.residual.as_ref().unwrap().checks == 540);

        let bad = audit(&enc, &omega, Some(&op), &AuditOptions { corrupt: true, ..opts }).unwrap();
        assert!(bad.value.violations > 0 && bad.jac.violations > 0 && bad.hess.violations > 0);
    }
}
