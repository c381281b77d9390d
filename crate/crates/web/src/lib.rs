//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON document; failures
//! come back as `{"error": "..."}`. The same operations are available natively through
//! the `*_json` functions, which is what the tests exercise.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use nnsieve::penalty::{self, PenaltyKind, PenaltySpec};
use nnsieve::rng;
use nnsieve::sieve;
use nnsieve::simulate::{self, plot_grid, F0Tag, SimConfig};
use nnsieve::{trainer, ActivationKind, Error, NetworkParams, Result, SieveSpec, SignedPermutation, TrainConfig};

/// Largest sample size and iteration count the fit explorer accepts, to keep the page
/// responsive.
pub const MAX_DEMO_N: usize = 5_000;
pub const MAX_DEMO_ITERATIONS: usize = 50_000;
/// Points of the fitted curve sent back to the page.
pub const CURVE_POINTS: usize = 201;

fn render(result: Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Simulates one dataset from `f0`, fits a penalized network and returns the data, the
/// target and fitted curves, both errors and the objective trajectory.
#[allow(clippy::too_many_arguments)]
pub fn fit_explorer_json(
    f0: &str,
    activation: &str,
    n: usize,
    hidden_units: usize,
    lambda_base: f64,
    iterations: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Value> {
    let f0: F0Tag = f0.parse()?;
    let activation: ActivationKind = activation.parse()?;
    if n > MAX_DEMO_N || iterations > MAX_DEMO_ITERATIONS {
        return Err(Error::InvalidConfig(format!(
            "the demo allows n <= {MAX_DEMO_N} and iterations <= {MAX_DEMO_ITERATIONS}"
        )));
    }
    let kind = match activation {
        ActivationKind::Tanh => PenaltyKind::ParameterL1,
        ActivationKind::Relu => PenaltyKind::GradientSparsity,
    };
    let train = TrainConfig {
        iterations,
        learning_rate,
        penalty: PenaltySpec::new(kind, lambda_base)?,
        seed,
        record_every: (iterations / 100).max(1),
        ..TrainConfig::new(activation, SieveSpec::new(hidden_units, 1e3, 1e3, 1)?)
    };
    let sim = SimConfig {
        f0: f0.instantiate(activation),
        n,
        noise_sd: 0.7,
        x_low: -2.0,
        x_high: 2.0,
        seed,
        train,
    };
    let data = simulate::generate_dataset(&sim)?;
    let fit = trainer::fit_dataset(&data, &sim.train)?;
    let xs: Vec<f64> = plot_grid(sim.x_low, sim.x_high).into_iter().step_by(5).collect();
    debug_assert_eq!(xs.len(), CURVE_POINTS);
    let grid = nnsieve::Matrix::column(xs.clone())?;
    let est_error = simulate::empirical_error(&fit.final_params, &sim.f0, &data.x)?;
    Ok(json!({
        "x": xs,
        "truth": sim.f0.eval_batch(&grid)?,
        "fit": fit.final_params.forward_batch(&grid)?,
        "data_x": data.x.as_slice(),
        "data_y": data.y,
        "est_error": est_error,
        "lsq_error": fit.empirical_risk,
        "penalty_term": fit.penalty_term,
        "stalled": fit.stalled,
        "trajectory": fit.objective_trajectory.iter().map(|p| [p.iteration as f64, p.objective]).collect::<Vec<_>>(),
    }))
}

/// Covering-number and entropy-integral bounds for widths `1..=r_max`.
pub fn entropy_curves_json(activation: &str, d: usize, v: f64, m: f64, eps: f64, r_max: usize) -> Result<Value> {
    let activation: ActivationKind = activation.parse()?;
    if r_max == 0 || r_max > 4096 {
        return Err(Error::InvalidConfig("r_max must be between 1 and 4096".into()));
    }
    let mut covering = Vec::with_capacity(r_max);
    let mut integral = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let spec = SieveSpec::new(r, v, m, d)?;
        covering.push(match activation {
            ActivationKind::Tanh => sieve::covering_bound_tanh(&spec, eps)?,
            ActivationKind::Relu => sieve::covering_bound_relu(&spec, eps)?,
        });
        integral.push(sieve::entropy_integral_bound(&spec, activation)?);
    }
    Ok(json!({
        "r": (1..=r_max).collect::<Vec<_>>(),
        "log_covering_bound": covering,
        "entropy_integral_bound": integral,
    }))
}

/// Draws a random network and checks its symmetries: a random signed permutation for
/// tanh, the canonical rescaling for ReLU. Reports the largest change of the network
/// output over a probe grid and the penalty before and after.
pub fn symmetry_check_json(activation: &str, hidden_units: usize, seed: u64) -> Result<Value> {
    let activation: ActivationKind = activation.parse()?;
    if hidden_units == 0 || hidden_units > 256 {
        return Err(Error::InvalidConfig("hidden_units must be between 1 and 256".into()));
    }
    let mut rng = rng::stream(seed, rng::INIT_STREAM);
    let net = NetworkParams::random_uniform(activation, 1, hidden_units, 2.0, &mut rng)?;
    let (other, transform) = match activation {
        ActivationKind::Tanh => {
            let sp = SignedPermutation::random(hidden_units, &mut rng);
            let permuted = net.signed_permutation(&sp)?;
            let t = json!({ "perm": sp.perm(), "signs": sp.signs() });
            (permuted, t)
        }
        ActivationKind::Relu => (net.canonicalize_relu()?, json!("canonical rescaling")),
    };
    let probes = nnsieve::Matrix::column(plot_grid(-3.0, 3.0))?;
    let before = net.forward_batch(&probes)?;
    let after = other.forward_batch(&probes)?;
    let max_dev = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let penalties = |p: &NetworkParams| -> Result<Value> {
        Ok(match activation {
            ActivationKind::Tanh => json!({ "l1": penalty::l1_parameter_penalty(p) }),
            ActivationKind::Relu => json!({
                "l1": penalty::l1_parameter_penalty(p),
                "gradient_sparsity": penalty::gradient_sparsity_penalty(p, &probes)?.value,
            }),
        })
    };
    let minimality = match activation {
        ActivationKind::Tanh => Some(net.is_minimal_tanh(1e-12)?.to_string()),
        ActivationKind::Relu => None,
    };
    Ok(json!({
        "original": serde_json::to_value(&net)?,
        "transformed": serde_json::to_value(&other)?,
        "transform": transform,
        "max_forward_deviation": max_dev,
        "penalty_original": penalties(&net)?,
        "penalty_transformed": penalties(&other)?,
        "minimality": minimality,
    }))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn fit_explorer(
    f0: &str,
    activation: &str,
    n: usize,
    hidden_units: usize,
    lambda_base: f64,
    iterations: usize,
    learning_rate: f64,
    seed: u32,
) -> String {
    render(fit_explorer_json(
        f0,
        activation,
        n,
        hidden_units,
        lambda_base,
        iterations,
        learning_rate,
        u64::from(seed),
    ))
}

#[wasm_bindgen]
pub fn entropy_curves(activation: &str, d: usize, v: f64, m: f64, eps: f64, r_max: usize) -> String {
    render(entropy_curves_json(activation, d, v, m, eps, r_max))
}

#[wasm_bindgen]
pub fn symmetry_check(activation: &str, hidden_units: usize, seed: u32) -> String {
    render(symmetry_check_json(activation, hidden_units, u64::from(seed)))
}
