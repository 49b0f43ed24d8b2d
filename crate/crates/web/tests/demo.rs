use certnorm_web::{certify_1d_json, enclosure_explorer_json, relu_partition_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn pair(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn certify_1d_brackets_a_trapezoid_estimate() {
    let v = parse(certify_1d_json(8, 3, 0, 10, -2.0, 2.0));
    let (lo, hi) = pair(&v["norm"]);
    let curve = v["curve"].as_array().unwrap();
    // trapezoid on the returned curve is a loose sanity estimate of ‖Φ‖₂
    let pts: Vec<(f64, f64)> = curve.iter().map(pair).collect();
    let est: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powi(2) + w[1].1.powi(2))).sum();
    let est = est.sqrt();
    assert!(lo <= est * 1.001 && est * 0.999 <= hi, "{lo} {est} {hi}");
    assert_eq!(v["history"].as_array().unwrap().len(), 11);
    let cells = v["cells"].as_array().unwrap();
    let total: f64 = cells.iter().map(|c| { let (a, b) = pair(&c["x"]); b - a }).sum();
    assert!((total - 4.0).abs() < 1e-12);
}

#[test]
fn relu_partition_has_exact_cells() {
    let v = parse(relu_partition_json(12, 3, 1, 10));
    let cells = v["cells"].as_array().unwrap();
    let exact: Vec<&Value> = cells.iter().filter(|c| c["exact"] == true).collect();
    assert!(!exact.is_empty());
    assert!(exact.iter().all(|c| c["eta"] == 0.0));
    let area: f64 = cells
        .iter()
        .map(|c| {
            let ((a, b), (p, q)) = (pair(&c["x"]), pair(&c["y"]));
            (b - a) * (q - p)
        })
        .sum();
    assert!((area - 4.0).abs() < 1e-12);
}

#[test]
fn explorer_enclosures_contain_the_sampled_ranges() {
    for (lo, hi) in [(-0.5, 0.5), (1.0, 1.0), (-3.0, 3.0)] {
        let v = parse(enclosure_explorer_json(16, 7, lo, hi));
        for kind in ["value", "jac", "hess"] {
            let (elo, ehi) = pair(&v["enclosure"][kind]);
            let (slo, shi) = pair(&v["sampled"][kind]);
            assert!(elo <= slo && shi <= ehi, "{kind} on [{lo}, {hi}]");
        }
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(certify_1d_json(0, 1, 0, 4, 0.0, 1.0).is_err());
    assert!(certify_1d_json(4, 1, 3, 4, 0.0, 1.0).is_err());
    assert!(certify_1d_json(4, 1, 0, 4, 1.0, 0.0).is_err());
    assert!(certify_1d_json(4, 1, 0, 100, 0.0, 1.0).is_err());
    assert!(relu_partition_json(4, 0, 1, 4).is_err());
    assert!(enclosure_explorer_json(4, 1, f64::NAN, 1.0).is_err());
}
