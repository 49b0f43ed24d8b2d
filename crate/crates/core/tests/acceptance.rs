//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p certnorm --test acceptance -- --nocapture` (the
//! lines are printed either way since this target has its own harness).

mod common;

use std::time::Instant;

use certnorm::adaquad::{
    doerfler_mark, half_refine, halving_surrogate, run_with, AlgorithmInstance, FnIntegrand, ProblemInstance,
    Refinement, StopCriteria,
};
use certnorm::audit::{audit_with, AuditOptions};
use certnorm::certify::{certify_norm, certify_residual, CertifyOptions, SobolevIntegrand};
use certnorm::enclosure::{Encloser, HoelderParams};
use certnorm::interval::IntervalBox;
use certnorm::network::{Activation, Network};
use certnorm::operator::{Coefficient, EllipticOperator};
use certnorm::quadrature::QuadratureRule;
use common::{ad_oracle, closed_forms, fd_gradient, fixture, jets, rel_err, simpson, OUTWARD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;

fn alg(theta: f64, refinement: Refinement) -> AlgorithmInstance {
    AlgorithmInstance::new(QuadratureRule::Midpoint, theta, refinement).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn soundness() -> Outcome {
    let forms = closed_forms();
    let mut steps = 0;
    for cf in &forms {
        let e = &cf.expr;
        let integrand = FnIntegrand::new(cf.dim, |x| e.eval(x).unwrap(), |k: &IntervalBox| e.enclose(k, OUTWARD));
        let omega = cf.domain();
        let lip = e.lipschitz(&omega, OUTWARD).map_err(|e| e.to_string())?;
        let problem = ProblemInstance::new(&integrand, omega)
            .unwrap()
            .with_hoelder(HoelderParams::new(lip.max(1e-300), 1.0).unwrap());
        for (refinement, n) in [(Refinement::Half, 20), (Refinement::hoelder(0.5), 4)] {
            let mut bad = None;
            let out = run_with(&problem, &alg(0.5, refinement), &StopCriteria::steps(n), |s, _| {
                if !s.bounds().contains(cf.exact) && bad.is_none() {
                    bad = Some(s.step);
                }
            })
            .map_err(|err| format!("{}: {err}", e.source()))?;
            if let Some(step) = bad {
                return Err(format!("{}: exact value escapes at step {step}", e.source()));
            }
            let h0 = &out.history[0];
            ensure(h0.lower <= cf.exact && cf.exact <= h0.upper, || format!("{}: step 0", e.source()))?;
            steps += out.history.len();
        }
    }
    Ok(format!("{} integrands, {steps} states checked", forms.len()))
}

fn geometric_decay() -> Outcome {
    // Hölder counts scale with C / (local width rate), so the net is kept
    // well conditioned: equal-magnitude inner weights and an output bias that
    // keeps Φ away from zero. Otherwise 30 steps need billions of cells.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let w: Vec<Vec<f64>> = (0..16).map(|_| vec![if rng.gen_bool(0.5) { 0.5 } else { -0.5 }]).collect();
    let b: Vec<f64> = (0..16).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let shift = 2.0 * v.iter().map(|x| x.abs()).sum::<f64>();
    let net = Network::from_parts(Activation::Tanh, vec![(w, b), (vec![v], vec![shift])]).unwrap();
    let omega = IntervalBox::from_bounds(&[(-1.0, 1.0)]).unwrap();
    let enc = Encloser::new(&net, OUTWARD);
    let integrand = SobolevIntegrand::new(enc, 0, 2.0).unwrap();
    let hp = enc.hoelder_integrand(0, 2.0, &omega).unwrap();
    let problem = ProblemInstance::new(&integrand, omega).unwrap().with_hoelder(hp);
    let mut worst: f64 = 0.0;
    let out = run_with(&problem, &alg(0.5, Refinement::hoelder(0.5)), &StopCriteria::steps(30), |_, st| {
        worst = worst.max(st.eta_after / st.eta_before);
    })
    .map_err(|e| e.to_string())?;
    ensure(out.state.step == 30, || format!("stopped early: {:?}", out.stop))?;
    ensure(worst <= 0.75, || format!("worst ratio {worst:.4}"))?;
    Ok(format!(
        "worst η ratio {worst:.4} over 30 steps, η {:.3e} -> {:.3e}",
        out.history[0].eta,
        out.state.eta()
    ))
}

fn enclosure_audit() -> Outcome {
    let g = Coefficient::parse("-4*(1 - tanh(x1 + x2 - 1)^2)*tanh(x1 + x2 - 1)").unwrap();
    let op2 = EllipticOperator::laplacian(2, g);
    let op1 = EllipticOperator::negative_laplacian(1, Coefficient::parse("sin(x1)").unwrap());
    let nets: [&[usize]; 4] = [&[1, 32, 1], &[2, 32, 32, 1], &[2, 16, 32, 24, 1], &[1, 32, 32, 32, 1]];
    let mut checks = 0u64;
    let mut tight: f64 = 0.0;
    for (i, widths) in nets.iter().enumerate() {
        let net = Network::random(widths, Activation::Tanh, 300 + i as u64).unwrap();
        let d = widths[0];
        let omega = IntervalBox::from_bounds(&vec![(-1.0, 1.0); d]).unwrap();
        let op = if d == 2 { &op2 } else { &op1 };
        let enc = Encloser::new(&net, OUTWARD);
        let opts = AuditOptions { seed: i as u64, ..Default::default() };
        let rep = audit_with(&enc, &omega, Some(op), &opts, |x| Ok(ad_oracle(&net, x))).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("net {widths:?}: {rep:?}"))?;
        let res = rep.residual.as_ref().unwrap();
        checks += rep.value.checks + rep.jac.checks + rep.hess.checks + res.checks;
        tight = tight.max(rep.hess.tightness_median);
    }
    Ok(format!("4 nets x 100 boxes x 1000 samples, {checks} checks, 0 violations, max median Hessian tightness {tight:.2}"))
}

fn extension_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for (seed, widths) in [(1u64, &[2usize, 24, 24, 1][..]), (2, &[1, 32, 32, 32, 1]), (3, &[2, 200, 1])] {
        let net = Network::random(widths, Activation::Tanh, seed).unwrap();
        let enc = Encloser::new(&net, OUTWARD);
        let d = widths[0];
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = enc.derivatives(&IntervalBox::singleton(&x).unwrap(), 2).map_err(|e| e.to_string())?;
            let value = jets(&net, &x)[0].v;
            let grad = fd_gradient(|y| jets(&net, y)[0].v, &x, 1e-5);
            worst = worst.max(rel_err(e.value[0].mid(), value));
            for i in 0..d {
                worst = worst.max(rel_err(e.jac.as_ref().unwrap().get(0, i).mid(), grad[i]));
                let row = fd_gradient(|y| jets(&net, y)[0].g[i], &x, 1e-5);
                for j in 0..d {
                    worst = worst.max(rel_err(e.hess[0].get(i, j).mid(), row[j]));
                }
            }
        }
    }
    ensure(worst <= 1e-6, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!("3 nets x 100 points, worst relative error {worst:.2e}"))
}

fn relu_exact_integration() -> Outcome {
    let net = Network::random(&[2, 40, 40, 40, 40, 40, 1], Activation::Relu, 5).unwrap();
    let omega = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let enc = Encloser::new(&net, OUTWARD);
    let (_, out) = certify_norm(&net, &omega, 0, 2.0, &alg(0.5, Refinement::Half), &StopCriteria::steps(14), CertifyOptions::default())
        .map_err(|e| e.to_string())?;
    let mut affine = 0;
    let mut worst: f64 = 0.0;
    for cell in &out.state.cells {
        if !enc.affine_on_box(&cell.region).map_err(|e| e.to_string())? {
            continue;
        }
        affine += 1;
        ensure(cell.exact && cell.eta == 0.0, || format!("affine cell {} has η = {}", cell.id, cell.eta))?;
        let reference = simpson(|x| net.eval(x).unwrap()[0].powi(2), &cell.region, 100);
        worst = worst.max((cell.quad - reference).abs() / reference.abs().max(f64::MIN_POSITIVE));
    }
    ensure(affine > 0, || "no affine cells found".into())?;
    ensure(worst <= 1e-9, || format!("worst relative deviation {worst:.3e}"))?;
    Ok(format!(
        "{affine} of {} cells affine with η = 0, worst deviation from Simpson {worst:.2e}",
        out.state.len()
    ))
}

fn halving_surrogate_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=3);
        let w = rng.gen_range(1e-3..4.0);
        let b: Vec<(f64, f64)> = (0..d)
            .map(|_| {
                let lo = rng.gen_range(-10.0..10.0);
                (lo, lo + w)
            })
            .collect();
        let k = IntervalBox::from_bounds(&b).unwrap();
        for gamma in [0.5, 1.0] {
            let hp = HoelderParams::new(rng.gen_range(0.01..100.0), gamma).unwrap();
            let kids: f64 = half_refine(&k).iter().map(|c| halving_surrogate(c, &hp)).sum();
            worst = worst.max((kids / halving_surrogate(&k, &hp) - 0.5f64.powf(gamma)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("worst deviation {worst:.3e}"))?;
    Ok(format!("1000 boxes x γ in {{0.5, 1}}, worst deviation {worst:.2e}"))
}

#[derive(Deserialize)]
struct Reference {
    model: String,
    k: usize,
    estimate: f64,
    stderr: f64,
}

fn references() -> Vec<Reference> {
    serde_json::from_str(&std::fs::read_to_string(fixture("references.json")).unwrap()).unwrap()
}

fn norm_bracketing() -> Outcome {
    let omega = IntervalBox::from_bounds(&[(0.0, 2.0 * std::f64::consts::PI)]).unwrap();
    let refs = references();
    let mut runs = 0;
    let mut min_reduction = f64::INFINITY;
    for r in refs.iter().filter(|r| r.model.starts_with("gaussian")) {
        let net = Network::load(fixture(&format!("{}.json", r.model))).map_err(|e| e.to_string())?;
        let (rep, _) = certify_norm(&net, &omega, r.k, 2.0, &alg(0.5, Refinement::Half), &StopCriteria::steps(30), CertifyOptions::default())
            .map_err(|e| e.to_string())?;
        let (lo, hi) = ((r.estimate - 3.0 * r.stderr).max(0.0).sqrt(), (r.estimate + 3.0 * r.stderr).sqrt());
        ensure(rep.norm_lower <= hi && lo <= rep.norm_upper, || {
            format!("{} k={}: [{}, {}] misses MC band [{lo}, {hi}]", r.model, r.k, rep.norm_lower, rep.norm_upper)
        })?;
        let reduction = rep.history[0].normalized_gap / rep.history[30].normalized_gap;
        ensure(reduction >= 10.0, || format!("{} k={}: gap reduced only {reduction:.2}x", r.model, r.k))?;
        min_reduction = min_reduction.min(reduction);
        runs += 1;
    }
    ensure(runs == 30, || format!("expected 30 runs, found {runs}"))?;
    Ok(format!("{runs} runs (10 nets x L2/W12/W22) bracket the MC band, min gap reduction {min_reduction:.1}x"))
}

fn pinn_residual() -> Outcome {
    let net = Network::load(fixture("pinn.json")).map_err(|e| e.to_string())?;
    let g = Coefficient::parse("-4*(1 - tanh(x1 + x2 - 1)^2)*tanh(x1 + x2 - 1)").unwrap();
    let op = EllipticOperator::laplacian(2, g);
    let omega = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let r = references().into_iter().find(|r| r.model == "pinn").ok_or("no pinn reference")?;
    let (rep, _) = certify_residual(&net, &op, &omega, 2.0, &alg(0.32, Refinement::Half), &StopCriteria::steps(20))
        .map_err(|e| e.to_string())?;
    ensure(rep.integral_lower <= r.estimate && r.estimate <= rep.integral_upper, || {
        format!("MC {} not in [{}, {}]", r.estimate, rep.integral_lower, rep.integral_upper)
    })?;
    let gaps: Vec<f64> = rep.history.iter().map(|h| h.gap).collect();
    ensure(gaps.len() == 21, || format!("{} history entries", gaps.len()))?;
    ensure(gaps.windows(2).all(|w| w[1] < w[0]), || format!("gap not strictly decreasing: {gaps:?}"))?;
    Ok(format!(
        "MC {:.4e} in [{:.4e}, {:.4e}], gap {:.3e} -> {:.3e} strictly decreasing",
        r.estimate, rep.integral_lower, rep.integral_upper, gaps[0], gaps[20]
    ))
}

fn doerfler_bulk() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut marked_total = 0;
    for v in 0..1000 {
        let n = rng.gen_range(1..200);
        let errors: Vec<(u64, f64)> = (0..n)
            .map(|i| {
                let e = match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.gen_range(0.0..1.0f64).powi(3),
                };
                (i as u64, e)
            })
            .collect();
        let total: f64 = errors.iter().map(|e| e.1).sum();
        for t in 1..=9 {
            let theta = t as f64 / 10.0;
            let marked = doerfler_mark(&errors, theta);
            let set: std::collections::HashSet<u64> = marked.iter().copied().collect();
            let mass: f64 = errors.iter().filter(|e| set.contains(&e.0)).map(|e| e.1).sum();
            ensure(mass >= theta * total * (1.0 - 1e-12), || format!("vector {v}, θ={theta}: bulk violated"))?;
            let min_in = errors.iter().filter(|e| set.contains(&e.0)).map(|e| e.1).fold(f64::INFINITY, f64::min);
            let max_out = errors.iter().filter(|e| !set.contains(&e.0)).map(|e| e.1).fold(0.0, f64::max);
            ensure(set.is_empty() || min_in > max_out || (max_out == 0.0 && min_in > 0.0), || {
                format!("vector {v}, θ={theta}: not a greedy prefix")
            })?;
            marked_total += marked.len();
        }
    }
    Ok(format!("1000 vectors x 9 θ values, {marked_total} marks"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("certificate soundness", soundness),
        ("geometric decay", geometric_decay),
        ("enclosure soundness audit", enclosure_audit),
        ("extension exactness", extension_exactness),
        ("ReLU exact integration", relu_exact_integration),
        ("halving surrogate reduction", halving_surrogate_reduction),
        ("norm bracketing", norm_bracketing),
        ("PINN residual certification", pinn_residual),
        ("Doerfler bulk property", doerfler_bulk),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.to_lowercase().contains(&f.to_lowercase())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
