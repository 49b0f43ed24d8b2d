mod common;

use certnorm::adaquad::{AlgorithmInstance, Refinement, StopCriteria, StopReason};
use certnorm::certify::{certify_norm, certify_residual, CertifyOptions, Target};
use certnorm::interval::{IntervalBox, Rounding};
use certnorm::network::{Activation, Network};
use certnorm::operator::{Coefficient, EllipticOperator};
use certnorm::quadrature::QuadratureRule;
use common::{jets, simpson};

fn half(theta: f64) -> AlgorithmInstance {
    AlgorithmInstance::new(QuadratureRule::Midpoint, theta, Refinement::Half).unwrap()
}

fn sobolev_density(net: &Network, k: usize, x: &[f64]) -> f64 {
    let d = x.len();
    jets(net, x)
        .iter()
        .map(|j| {
            let mut s = j.v * j.v;
            if k >= 1 {
                s += j.g.iter().map(|g| g * g).sum::<f64>();
            }
            if k >= 2 {
                for a in 0..d {
                    for b in a..d {
                        s += j.h[a * d + b].powi(2);
                    }
                }
            }
            s
        })
        .sum()
}

#[test]
fn unit_tanh_against_fine_simpson() {
    let net = Network::from_parts(
        Activation::Tanh,
        vec![(vec![vec![1.0]], vec![0.0]), (vec![vec![1.0]], vec![0.0])],
    )
    .unwrap();
    let omega = IntervalBox::from_bounds(&[(0.0, 1.0)]).unwrap();
    let reference = simpson(|x| x[0].tanh().powi(2), &omega, 1_000_000).sqrt();
    let (rep, out) = certify_norm(&net, &omega, 0, 2.0, &half(0.5), &StopCriteria::steps(20), CertifyOptions::default())
        .unwrap();
    assert!(rep.norm_lower <= reference && reference <= rep.norm_upper);
    // norm interval sits inside Q^{1/p} ± η^{1/p}
    let (q, e) = (out.state.quad().sqrt(), out.state.eta().sqrt());
    assert!(rep.norm_lower >= q - e - 1e-15 && rep.norm_upper <= q + e + 1e-15);
    assert!(rep.gap() < rep.history[0].gap / 100.0, "{rep:?}");
}

#[test]
fn sobolev_norms_of_a_2d_net() {
    let net = Network::random(&[2, 6, 6, 1], Activation::Tanh, 3).unwrap();
    let omega = IntervalBox::from_bounds(&[(0.0, 1.0), (-0.5, 0.5)]).unwrap();
    for k in 0..=2 {
        let reference = simpson(|x| sobolev_density(&net, k, x), &omega, 200).sqrt();
        for r in [Rounding::Exact, Rounding::Outward] {
            let alg = half(0.5).with_rounding(r);
            let (rep, _) = certify_norm(&net, &omega, k, 2.0, &alg, &StopCriteria::steps(10), CertifyOptions::default())
                .unwrap();
            assert_eq!(rep.target, Target::from_order(k).unwrap());
            assert!(rep.norm_lower <= reference && reference <= rep.norm_upper, "k={k} {r:?}: {reference} vs {rep:?}");
        }
    }
}

#[test]
fn p_other_than_two() {
    let net = Network::random(&[1, 8, 1], Activation::Sigmoid, 5).unwrap();
    let omega = IntervalBox::from_bounds(&[(-2.0, 2.0)]).unwrap();
    for p in [1.0, 1.5, 3.0] {
        let reference = simpson(|x| net.eval(x).unwrap()[0].abs().powf(p), &omega, 20_000).powf(1.0 / p);
        let (rep, _) = certify_norm(&net, &omega, 0, p, &half(0.5), &StopCriteria::steps(12), CertifyOptions::default())
            .unwrap();
        assert!(rep.norm_lower <= reference && reference <= rep.norm_upper, "p={p}");
    }
}

#[test]
fn exact_wavefront_network_has_vanishing_residual() {
    // Φ(x, y) = tanh(x + y - 1) solves Δu = -4(1 - tanh²z)tanh z exactly
    let net = Network::from_parts(
        Activation::Tanh,
        vec![(vec![vec![1.0, 1.0]], vec![-1.0]), (vec![vec![1.0]], vec![0.0])],
    )
    .unwrap();
    let g = Coefficient::parse("-4*(1 - tanh(x1 + x2 - 1)^2)*tanh(x1 + x2 - 1)").unwrap();
    let op = EllipticOperator::laplacian(2, g);
    let omega = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let (rep, _) = certify_residual(&net, &op, &omega, 2.0, &half(0.5), &StopCriteria::steps(12)).unwrap();
    assert_eq!(rep.norm_lower, 0.0);
    assert!(rep.norm_upper < 0.2, "{}", rep.norm_upper);
    assert!(rep.history.windows(2).all(|w| w[1].gap <= w[0].gap));
    assert!(rep.history.last().unwrap().gap < rep.history[0].gap);
}

#[test]
fn reports_are_deterministic_and_budget_is_reported() {
    let net = Network::random(&[2, 8, 1], Activation::Tanh, 9).unwrap();
    let omega = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let stop = StopCriteria::steps(6);
    let a = certify_norm(&net, &omega, 1, 2.0, &half(0.5), &stop, CertifyOptions::default()).unwrap().0;
    let b = certify_norm(&net, &omega, 1, 2.0, &half(0.5), &stop, CertifyOptions::default()).unwrap().0;
    assert_eq!(a.to_json(), b.to_json());

    let budget = StopCriteria { max_steps: Some(50), max_cells: Some(40), ..Default::default() };
    let (rep, out) = certify_norm(&net, &omega, 1, 2.0, &half(0.5), &budget, CertifyOptions::default()).unwrap();
    assert_eq!(rep.stop, StopReason::BudgetExhausted);
    assert!(rep.cells <= 40 && rep.cells == out.state.len());
    assert!(rep.norm_lower <= rep.norm_upper);
}

#[test]
fn relu_affine_cells_contribute_no_gap() {
    let net = Network::random(&[2, 10, 10, 1], Activation::Relu, 2).unwrap();
    let omega = IntervalBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let stop = StopCriteria::steps(10);
    let (with, out) = certify_norm(&net, &omega, 0, 2.0, &half(0.5), &stop, CertifyOptions::default()).unwrap();
    let exact_cells = out.state.cells.iter().filter(|c| c.exact).count();
    assert!(exact_cells > 0);
    assert!(out.state.cells.iter().filter(|c| c.exact).all(|c| c.eta == 0.0));
    let opts = CertifyOptions { exact_affine: false, ..Default::default() };
    let (without, _) = certify_norm(&net, &omega, 0, 2.0, &half(0.5), &stop, opts).unwrap();
    assert!(with.gap() < without.gap());
    let reference = simpson(|x| net.eval(x).unwrap()[0].powi(2), &omega, 400).sqrt();
    assert!((with.norm_lower..=with.norm_upper).contains(&reference));
}
