use nnsieve_web::{entropy_curves, fit_explorer, symmetry_check, CURVE_POINTS};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).expect("exports return JSON")
}

#[test]
fn fit_explorer_returns_curves_and_errors() {
    let v = parse(fit_explorer("trig", "tanh", 200, 5, 10.0, 300, 0.05, 7));
    assert!(v.get("error").is_none(), "{v}");
    assert_eq!(v["x"].as_array().unwrap().len(), CURVE_POINTS);
    assert_eq!(v["fit"].as_array().unwrap().len(), CURVE_POINTS);
    assert_eq!(v["data_y"].as_array().unwrap().len(), 200);
    assert!(v["est_error"].as_f64().unwrap() >= 0.0);
    let traj = v["trajectory"].as_array().unwrap();
    let objectives: Vec<f64> = traj.iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(objectives.windows(2).all(|w| w[1] <= w[0]));

    let again = parse(fit_explorer("trig", "tanh", 200, 5, 10.0, 300, 0.05, 7));
    assert_eq!(v, again);
}

#[test]
fn fit_explorer_reports_bad_input() {
    assert!(parse(fit_explorer("cubic", "tanh", 100, 3, 1.0, 10, 0.05, 0))["error"].is_string());
    assert!(parse(fit_explorer("trig", "sigmoid", 100, 3, 1.0, 10, 0.05, 0))["error"].is_string());
    assert!(parse(fit_explorer("trig", "relu", 1_000_000, 3, 1.0, 10, 0.05, 0))["error"].is_string());
}

#[test]
fn entropy_curve_starts_at_the_known_value() {
    let v = parse(entropy_curves("tanh", 1, 2.0, 1.0, 1.0, 8));
    let integral = v["entropy_integral_bound"].as_array().unwrap();
    assert_eq!(integral.len(), 8);
    assert!((integral[0].as_f64().unwrap() - 42.124_301_563_746_55).abs() < 1e-10);
    assert!((v["log_covering_bound"][0].as_f64().unwrap() - 17.862_943_611_198_906).abs() < 1e-10);
    let vals: Vec<f64> = integral.iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
    assert!(parse(entropy_curves("tanh", 1, 1.0, 1.0, 1.0, 8))["error"].is_string());
}

#[test]
fn symmetries_leave_function_and_penalty_unchanged() {
    for act in ["tanh", "relu"] {
        for seed in 0..5 {
            let v = parse(symmetry_check(act, 6, seed));
            assert!(v.get("error").is_none(), "{v}");
            assert!(v["max_forward_deviation"].as_f64().unwrap() <= 1e-12, "{v}");
            if act == "tanh" {
                assert_eq!(v["penalty_original"], v["penalty_transformed"]);
            } else {
                let a = v["penalty_original"]["gradient_sparsity"].as_f64().unwrap();
                let b = v["penalty_transformed"]["gradient_sparsity"].as_f64().unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }
}
