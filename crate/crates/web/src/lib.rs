//! Browser demo: certified norms of a small tanh net, the adaptive partition
//! of a ReLU net, and an enclosure explorer.
//!
//! Every export has a plain `*_json` twin returning `Result<String, String>`
//! so the logic runs and is tested natively.

use certnorm::adaquad::{AlgorithmInstance, Refinement, StopCriteria};
use certnorm::certify::{certify_norm, CertifyOptions};
use certnorm::enclosure::Encloser;
use certnorm::interval::{Interval, IntervalBox, Rounding};
use certnorm::network::{Activation, Network};
use certnorm::quadrature::QuadratureRule;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_WIDTH: usize = 64;
const MAX_STEPS: usize = 24;
const CURVE_POINTS: usize = 200;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn pair(i: Interval) -> Value {
    json!([i.lo(), i.hi()])
}

fn tanh_net(width: usize, seed: u64) -> Result<Network, String> {
    check((1..=MAX_WIDTH).contains(&width), "width must be between 1 and 64")?;
    Network::random(&[1, width, width, 1], Activation::Tanh, seed).map_err(err)
}

fn curve(net: &Network, lo: f64, hi: f64) -> Result<Vec<[f64; 2]>, String> {
    (0..=CURVE_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / CURVE_POINTS as f64;
            Ok([x, net.eval(&[x]).map_err(err)?[0]])
        })
        .collect()
}

fn half(theta: f64) -> Result<AlgorithmInstance, String> {
    AlgorithmInstance::new(QuadratureRule::Midpoint, theta, Refinement::Half).map_err(err)
}

/// Certifies `‖Φ‖_{W^{k,2}}` of a random `[1, w, w, 1]` tanh net on `[lo, hi]`
/// and returns the per-step gaps, the final cells and a sampled curve.
pub fn certify_1d_json(width: usize, seed: u64, order: usize, steps: usize, lo: f64, hi: f64) -> Result<String, String> {
    check(order <= 2, "order must be 0, 1 or 2")?;
    check(steps <= MAX_STEPS, "at most 24 steps")?;
    check(lo.is_finite() && hi.is_finite() && lo < hi, "need lo < hi")?;
    let net = tanh_net(width, seed)?;
    let omega = IntervalBox::from_bounds(&[(lo, hi)]).map_err(err)?;
    let (rep, out) = certify_norm(
        &net,
        &omega,
        order,
        2.0,
        &half(0.5)?,
        &StopCriteria::steps(steps),
        CertifyOptions::default(),
    )
    .map_err(err)?;
    let cells: Vec<Value> = out
        .state
        .cells
        .iter()
        .map(|c| json!({"x": pair(c.region.axis(0)), "f": pair(c.enclosure), "eta": c.eta}))
        .collect();
    Ok(json!({
        "norm": [rep.norm_lower, rep.norm_upper],
        "history": rep.history,
        "cells": cells,
        "curve": curve(&net, lo, hi)?,
    })
    .to_string())
}

/// Adaptive partition of `|Φ|²` for a random ReLU net on `[-1, 1]²`; cells
/// on which the net is affine are integrated exactly and carry `eta = 0`.
pub fn relu_partition_json(width: usize, depth: usize, seed: u64, steps: usize) -> Result<String, String> {
    check((1..=MAX_WIDTH).contains(&width), "width must be between 1 and 64")?;
    check((1..=6).contains(&depth), "depth must be between 1 and 6")?;
    check(steps <= MAX_STEPS, "at most 24 steps")?;
    let mut widths = vec![2];
    widths.extend(std::iter::repeat_n(width, depth));
    widths.push(1);
    let net = Network::random(&widths, Activation::Relu, seed).map_err(err)?;
    let omega = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).map_err(err)?;
    let (rep, out) = certify_norm(
        &net,
        &omega,
        0,
        2.0,
        &half(0.5)?,
        &StopCriteria::steps(steps),
        CertifyOptions::default(),
    )
    .map_err(err)?;
    let cells: Vec<Value> = out
        .state
        .cells
        .iter()
        .map(|c| json!({"x": pair(c.region.axis(0)), "y": pair(c.region.axis(1)), "eta": c.eta, "exact": c.exact}))
        .collect();
    Ok(json!({"norm": [rep.norm_lower, rep.norm_upper], "steps": rep.steps, "cells": cells}).to_string())
}

/// Value, first and second derivative enclosures of a random `[1, w, w, 1]`
/// tanh net on `[lo, hi]`, next to the sampled ranges and the curve over
/// `[-3, 3]`.
pub fn enclosure_explorer_json(width: usize, seed: u64, lo: f64, hi: f64) -> Result<String, String> {
    check(lo.is_finite() && hi.is_finite() && lo <= hi, "need lo <= hi")?;
    let net = tanh_net(width, seed)?;
    let enc = Encloser::new(&net, Rounding::Outward);
    let k = IntervalBox::from_bounds(&[(lo, hi)]).map_err(err)?;
    let d = enc.derivatives(&k, 2).map_err(err)?;
    let jac = d.jac.as_ref().expect("order 2 includes the Jacobian").get(0, 0);
    let hess = d.hess[0].get(0, 0);
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for i in 0..=CURVE_POINTS {
        let x = lo + (hi - lo) * i as f64 / CURVE_POINTS as f64;
        let p = enc.point_derivatives(&[x], 2).map_err(err)?;
        for (r, v) in ranges.iter_mut().zip([p.value[0], p.jac[0], p.hess[0][0]]) {
            *r = (r.0.min(v), r.1.max(v));
        }
    }
    let sampled: Vec<[f64; 2]> = ranges.iter().map(|&(a, b)| [a, b]).collect();
    Ok(json!({
        "enclosure": {"value": pair(d.value[0]), "jac": pair(jac), "hess": pair(hess)},
        "sampled": {"value": sampled[0], "jac": sampled[1], "hess": sampled[2]},
        "curve": curve(&net, -3.0, 3.0)?,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn certify_1d(width: usize, seed: u64, order: usize, steps: usize, lo: f64, hi: f64) -> Result<String, JsError> {
    certify_1d_json(width, seed, order, steps, lo, hi).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn relu_partition(width: usize, depth: usize, seed: u64, steps: usize) -> Result<String, JsError> {
    relu_partition_json(width, depth, seed, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn enclosure_explorer(width: usize, seed: u64, lo: f64, hi: f64) -> Result<String, JsError> {
    enclosure_explorer_json(width, seed, lo, hi).map_err(|e| JsError::new(&e))
}
