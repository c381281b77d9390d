//! Full-batch gradient descent on the penalized least-squares objective
//! `Q~_n(f) = (1/n) sum_i (f(x_i) - y_i)^2 + lambda_n J_n(f)`, plus the audit of the
//! basic inequality that the consistency argument starts from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::model::{ActivationKind, NetworkParams, ParamGradient, DEFAULT_KINK_TOLERANCE};
use crate::penalty::{self, PenaltyKind, PenaltySpec};
use crate::rng;
use crate::sieve::{self, SieveSpec};

/// Objective values above this abort the fit.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// The step size is never halved below this; reaching it means no descent step exists.
pub const MIN_LEARNING_RATE: f64 = 1e-14;
/// Iterations a ReLU unit stays frozen after its kink blocked every step.
pub const FREEZE_ITERATIONS: usize = 200;
/// Residual allowed in the basic-inequality audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

fn default_iterations() -> usize {
    20_000
}
fn default_learning_rate() -> f64 {
    5e-2
}
fn default_init_scale() -> f64 {
    0.5
}
fn default_record_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub activation: ActivationKind,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub penalty: PenaltySpec,
    /// `r_n` is the hidden width and `d` the input dimension of the fitted network.
    pub sieve: SieveSpec,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub enforce_sieve: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl TrainConfig {
    pub fn new(activation: ActivationKind, sieve: SieveSpec) -> Self {
        Self {
            activation,
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            penalty: PenaltySpec::default(),
            sieve,
            init_scale: default_init_scale(),
            seed: 0,
            enforce_sieve: false,
            record_every: default_record_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be finite and >= 0".into()));
        }
        self.penalty.validate()?;
        self.sieve.validate()?;
        if self.activation == ActivationKind::Tanh && self.penalty.kind == PenaltyKind::GradientSparsity {
            return Err(Error::InvalidConfig(
                "the gradient-sparsity penalty is defined for relu networks only".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub objective: f64,
    pub empirical_risk: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_params: NetworkParams,
    pub objective_trajectory: Vec<TrajectoryPoint>,
    /// `Q_n(f^) = (1/n) sum_i (f^(x_i) - y_i)^2`
    pub empirical_risk: f64,
    /// `lambda_n J_n(f^)`
    pub penalty_term: f64,
    pub objective: f64,
    /// `Q~_n(f^)` minus the smallest recorded objective; a measured stand-in for the
    /// optimization slack `eta_n`.
    pub eta_slack: f64,
    pub penalty: PenaltySpec,
    pub init_scale: f64,
    pub seed: u64,
    pub iterations_run: usize,
    pub final_learning_rate: f64,
    /// Set when backtracking could not find a descent step before `iterations`.
    pub stalled: bool,
    pub wall_time_ms: u64,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_trajectory_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "objective", "empirical_risk", "penalty"])?;
        for p in &self.objective_trajectory {
            w.write_record(&[
                p.iteration.to_string(),
                format!("{:?}", p.objective),
                format!("{:?}", p.empirical_risk),
                format!("{:?}", p.penalty),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn empirical_risk(net: &NetworkParams, x: &Matrix, y: &[f64]) -> Result<f64> {
    let f = net.forward_batch(x)?;
    if f.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "response vector",
            expected: f.len(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    Ok(f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// `Q~_n(f)`: empirical squared error plus `lambda_n J_n(f)`.
pub fn objective(net: &NetworkParams, x: &Matrix, y: &[f64], penalty: &PenaltySpec) -> Result<f64> {
    let risk = empirical_risk(net, x, y)?;
    Ok(risk + penalty::penalty_value(penalty, net, Some(x), y.len())?)
}

struct Evaluation {
    risk: f64,
    penalty: f64,
    grad: ParamGradient,
}

impl Evaluation {
    fn objective(&self) -> f64 {
        self.risk + self.penalty
    }
}

/// Wall-clock timer; reads zero on targets without a clock (wasm32 in the browser).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_millis() as u64;
        #[cfg(target_arch = "wasm32")]
        return 0;
    }
}

/// The parameter `l1` penalty is handled by its proximal map, so only the risk gradient
/// is needed for it.
fn uses_prox(spec: &PenaltySpec) -> bool {
    spec.kind == PenaltyKind::ParameterL1 && spec.lambda_base != 0.0
}

fn evaluate(net: &NetworkParams, x: &Matrix, y: &[f64], spec: &PenaltySpec) -> Result<Evaluation> {
    let n = y.len();
    let (risk, mut grad) = net.loss_and_gradient(x, y)?;
    let penalty = penalty::penalty_value(spec, net, Some(x), n)?;
    if spec.lambda_base != 0.0 && !uses_prox(spec) {
        let pg = penalty::penalty_gradient(spec, net, Some(x), n)?;
        grad.add_scaled(&pg, 1.0);
    }
    Ok(Evaluation { risk, penalty, grad })
}

fn point(iteration: usize, e: &Evaluation) -> TrajectoryPoint {
    TrajectoryPoint {
        iteration,
        objective: e.objective(),
        empirical_risk: e.risk,
        penalty: e.penalty,
    }
}

fn soft_threshold(net: &mut NetworkParams, threshold: f64) {
    let mut flat = net.to_flat();
    for v in &mut flat {
        *v = v.signum() * (v.abs() - threshold).max(0.0);
    }
    net.set_flat(&flat).expect("same parameter count");
}

/// Hidden units whose kink sits on a sample of `x` in `a`, or lies on opposite sides of
/// some sample in `a` and `b`.
fn kink_crossings(a: &NetworkParams, b: &NetworkParams, x: &Matrix) -> Vec<bool> {
    (0..a.hidden_units())
        .map(|j| {
            x.iter_rows().any(|row| {
                let z = a.pre_activation(j, row);
                z.abs() <= DEFAULT_KINK_TOLERANCE || (z > 0.0) != (b.pre_activation(j, row) > 0.0)
            })
        })
        .collect()
}

fn masked(grad: &ParamGradient, frozen: &[bool], d: usize) -> ParamGradient {
    let mut out = grad.clone();
    for (j, _) in frozen.iter().enumerate().filter(|(_, f)| **f) {
        out.gammas[j * d..(j + 1) * d].fill(0.0);
        out.gamma0s[j] = 0.0;
    }
    out
}

/// Fits a network by full-batch descent with backtracking.
///
/// With the parameter `l1` penalty each step is proximal: a gradient step on the
/// empirical risk followed by soft-thresholding at `step * lambda_n`. The
/// gradient-sparsity penalty is handled by subgradient steps.
///
/// Parameters start i.i.d. uniform on `[-init_scale, init_scale]` from stream 0 of
/// `seed`. A step that would increase the objective is rejected and the step size
/// halved; after an accepted step it grows by a quarter, never past `learning_rate`.
/// The recorded objective therefore never increases. With `enforce_sieve` every
/// iterate is projected onto the sieve.
///
/// The gradient-sparsity penalty jumps when a ReLU kink crosses a sample, so a step can
/// be blocked at every size. When that happens the blocking units' hidden weights are
/// frozen for [`FREEZE_ITERATIONS`] iterations and the step is retried; the fit only
/// stalls when no such unit is left.
pub fn fit(x: &Matrix, y: &[f64], config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "response vector",
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.cols() != config.sieve.d {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: config.sieve.d,
            got: x.cols(),
        });
    }
    let started = Stopwatch::start();
    let spec = &config.penalty;

    let mut init_rng = rng::stream(config.seed, rng::INIT_STREAM);
    let mut net = NetworkParams::random_uniform(
        config.activation,
        config.sieve.d,
        config.sieve.r_n,
        config.init_scale,
        &mut init_rng,
    )?;
    if config.enforce_sieve {
        net = sieve::project_to_sieve(&net, &config.sieve)?;
    }

    let mut current = evaluate(&net, x, y, spec)?;
    let mut trajectory = vec![point(0, &current)];
    let diverged = |iteration: usize, objective: f64, trajectory: &[TrajectoryPoint]| Error::Diverged {
        iteration,
        objective,
        trajectory: trajectory.iter().map(|p| (p.iteration, p.objective)).collect(),
    };
    if !(current.objective() <= DIVERGENCE_THRESHOLD) {
        return Err(diverged(0, current.objective(), &trajectory));
    }

    let mut lr = config.learning_rate;
    let mut stalled = false;
    let mut iterations_run = 0;
    let d = config.sieve.d;
    let mut frozen = vec![false; config.sieve.r_n];
    let mut frozen_until = 0;
    'outer: for it in 1..=config.iterations {
        if it == frozen_until {
            frozen.fill(false);
        }
        loop {
            let step_grad = if frozen.iter().any(|f| *f) {
                masked(&current.grad, &frozen, d)
            } else {
                current.grad.clone()
            };
            let mut candidate = net.stepped(&step_grad, lr);
            if uses_prox(spec) {
                soft_threshold(&mut candidate, lr * spec.lambda_n(y.len()));
            }
            if config.enforce_sieve {
                candidate = sieve::project_to_sieve(&candidate, &config.sieve)?;
            }
            let finite = candidate.to_flat().iter().all(|v| v.is_finite());
            if finite {
                let next = evaluate(&candidate, x, y, spec)?;
                if next.objective() <= current.objective() {
                    net = candidate;
                    current = next;
                    lr = (lr * 1.25).min(config.learning_rate);
                    break;
                }
            }
            lr *= 0.5;
            if lr < MIN_LEARNING_RATE {
                if config.activation == ActivationKind::Relu {
                    let blocking = kink_crossings(&net, &net.stepped(&step_grad, lr * 2.0), x);
                    if blocking.iter().zip(&frozen).any(|(b, f)| *b && !*f) {
                        for (f, b) in frozen.iter_mut().zip(blocking) {
                            *f |= b;
                        }
                        frozen_until = it + FREEZE_ITERATIONS;
                        lr = config.learning_rate;
                        continue;
                    }
                }
                stalled = true;
                break 'outer;
            }
        }
        iterations_run = it;
        if !(current.objective() <= DIVERGENCE_THRESHOLD) {
            trajectory.push(point(it, &current));
            return Err(diverged(it, current.objective(), &trajectory));
        }
        if it % config.record_every == 0 {
            trajectory.push(point(it, &current));
        }
    }
    if trajectory.last().map(|p| p.iteration) != Some(iterations_run) {
        trajectory.push(point(iterations_run, &current));
    }

    let best = trajectory.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
    Ok(FitReport {
        final_params: net,
        empirical_risk: current.risk,
        penalty_term: current.penalty,
        objective: current.objective(),
        eta_slack: (current.objective() - best).max(0.0),
        objective_trajectory: trajectory,
        penalty: *spec,
        init_scale: config.init_scale,
        seed: config.seed,
        iterations_run,
        final_learning_rate: lr,
        stalled,
        wall_time_ms: started.elapsed_ms(),
    })
}

pub fn fit_dataset(data: &Dataset, config: &TrainConfig) -> Result<FitReport> {
    fit(&data.x, &data.y, config)
}

/// Terms of the basic inequality
/// `LHS <= I + II + III + eta` with
/// `LHS = ||f^ - f0||_n^2`, `I = ||f0 - pi f0||_n^2`,
/// `II = (2/n) sum_i eps_i (f^(x_i) - pi f0(x_i))`, `III = lambda_n (J(pi f0) - J(f^))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lhs: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub eta_slack: f64,
    /// `LHS - (I + II + III + eta)`; algebraically `Q~(f^) - Q~(pi f0) - eta`.
    pub residual: f64,
    pub objective_fit: f64,
    pub objective_projection: f64,
    /// `Q~(f^) <= Q~(pi f0) + eta`, the extremum property the inequality rests on.
    pub extremum_holds: bool,
    pub inequality_holds: bool,
    pub tolerance: f64,
}

pub fn audit_basic_inequality(
    fit: &FitReport,
    pi_n_f0: &NetworkParams,
    f0_values: &[f64],
    eps_values: &[f64],
    x: &Matrix,
) -> Result<AuditReport> {
    let n = x.rows();
    for (what, len) in [("f0 values", f0_values.len()), ("noise values", eps_values.len())] {
        if len != n {
            return Err(Error::DimensionMismatch { what, expected: n, got: len });
        }
    }
    if n == 0 {
        return Err(Error::InvalidConfig("audit needs at least one sample".into()));
    }
    let fhat = fit.final_params.forward_batch(x)?;
    let proj = pi_n_f0.forward_batch(x)?;
    let nf = n as f64;
    let mut lhs = 0.0;
    let mut term_i = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        lhs += (fhat[i] - f0_values[i]).powi(2);
        term_i += (f0_values[i] - proj[i]).powi(2);
        cross += eps_values[i] * (fhat[i] - proj[i]);
    }
    lhs /= nf;
    term_i /= nf;
    let term_ii = 2.0 * cross / nf;

    let spec = &fit.penalty;
    let pen_fit = penalty::penalty_value(spec, &fit.final_params, Some(x), n)?;
    let pen_proj = penalty::penalty_value(spec, pi_n_f0, Some(x), n)?;
    let term_iii = pen_proj - pen_fit;

    let y: Vec<f64> = f0_values.iter().zip(eps_values).map(|(f, e)| f + e).collect();
    let objective_fit = objective(&fit.final_params, x, &y, spec)?;
    let objective_projection = objective(pi_n_f0, x, &y, spec)?;
    let residual = lhs - (term_i + term_ii + term_iii + fit.eta_slack);
    Ok(AuditReport {
        lhs,
        term_i,
        term_ii,
        term_iii,
        eta_slack: fit.eta_slack,
        residual,
        objective_fit,
        objective_projection,
        extremum_holds: objective_fit <= objective_projection + fit.eta_slack,
        inequality_holds: residual <= AUDIT_TOLERANCE,
        tolerance: AUDIT_TOLERANCE,
    })
}
