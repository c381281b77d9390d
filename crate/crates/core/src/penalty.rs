//! Penalty functionals and their (sub)gradients.
//!
//! Two penalties are provided:
//!
//! * [`l1_parameter_penalty`]: the sum of absolute values of every parameter, output bias
//!   included. For tanh networks it takes the same value on every parameterization of a
//!   function related by a signed permutation or by zero padding.
//! * [`gradient_sparsity_penalty`]: the average `l1` norm of the input gradient over the
//!   design points, for ReLU networks where parameter-space penalties are not invariant.
//!
//! Both are scaled by `lambda_n = lambda / n` through [`PenaltySpec`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::model::{ActivationKind, NetworkParams, ParamGradient, SignedPermutation, DEFAULT_KINK_TOLERANCE};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    ParameterL1,
    GradientSparsity,
}

/// Penalty kind plus the base regularization weight; the effective weight at sample
/// size `n` is `lambda_base / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda_base: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda_base: f64) -> Result<Self> {
        let spec = Self { kind, lambda_base };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_base >= 0.0 && self.lambda_base.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_base must be finite and >= 0, got {}",
                self.lambda_base
            )));
        }
        Ok(())
    }

    pub fn lambda_n(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        self.lambda_base / n as f64
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::ParameterL1,
            lambda_base: 10.0,
        }
    }
}

/// Sum of `|theta_i|` over all parameters.
///
/// The absolute values are summed in sorted order, so the result depends only on the
/// multiset of magnitudes: relabeling or sign-flipping units gives a bitwise-equal value.
pub fn l1_parameter_penalty(net: &NetworkParams) -> f64 {
    let mut mags: Vec<f64> = net.to_flat().iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    mags.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSparsity {
    pub value: f64,
    /// Rows where some unit sat on a kink. They are still counted, using `relu'(0) = 0`.
    pub on_kink_rows: usize,
}

/// `(1/n) sum_i || grad_x f(x_i) ||_1` for a ReLU network.
pub fn gradient_sparsity_penalty(net: &NetworkParams, x: &Matrix) -> Result<GradientSparsity> {
    require_relu(net, "gradient_sparsity_penalty")?;
    check_design(net, x)?;
    let mut total = 0.0;
    let mut on_kink_rows = 0;
    for row in x.iter_rows() {
        let g = net.input_gradient_unchecked(row, DEFAULT_KINK_TOLERANCE);
        on_kink_rows += usize::from(g.on_kink);
        total += g.gradient.iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok(GradientSparsity {
        value: total / x.rows() as f64,
        on_kink_rows,
    })
}

/// `sum_k sum_j |alpha_j| |gamma_jk|`, an upper bound on `||grad_x f(x)||_1` at every `x`.
/// For canonical ReLU networks (`|alpha_j| = 1`) this is the plain hidden-weight `l1` norm.
pub fn gradient_domination_bound(net: &NetworkParams) -> f64 {
    (0..net.hidden_units())
        .map(|j| net.alphas()[j].abs() * net.gamma_row(j).iter().map(|g| g.abs()).sum::<f64>())
        .sum()
}

/// `sum_k sum_j |gamma_jk|`, hidden biases excluded.
pub fn hidden_weight_l1(net: &NetworkParams) -> f64 {
    net.gammas().iter().map(|g| g.abs()).sum()
}

/// Unscaled penalty `J_n(f)`.
pub fn penalty_functional(kind: PenaltyKind, net: &NetworkParams, x: Option<&Matrix>) -> Result<f64> {
    match kind {
        PenaltyKind::ParameterL1 => Ok(l1_parameter_penalty(net)),
        PenaltyKind::GradientSparsity => {
            let x = x.ok_or(Error::MissingDesign)?;
            Ok(gradient_sparsity_penalty(net, x)?.value)
        }
    }
}

/// `lambda_n * J_n(f)` with `lambda_n = lambda_base / n`.
pub fn penalty_value(spec: &PenaltySpec, net: &NetworkParams, x: Option<&Matrix>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    if spec.kind == PenaltyKind::GradientSparsity && x.is_none() {
        return Err(Error::MissingDesign);
    }
    if spec.lambda_base == 0.0 {
        return Ok(0.0);
    }
    Ok(spec.lambda_n(n) * penalty_functional(spec.kind, net, x)?)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient of `lambda_n * J_n` in the parameters.
///
/// For the `l1` penalty this is `lambda_n * sign(theta)` with `sign(0) = 0`. For the
/// gradient-sparsity penalty the ReLU indicators are held fixed, which is the exact
/// gradient inside each region where no design point changes side of a kink.
pub fn penalty_gradient(
    spec: &PenaltySpec,
    net: &NetworkParams,
    x: Option<&Matrix>,
    n: usize,
) -> Result<ParamGradient> {
    let mut grad = ParamGradient::zeros_like(net);
    if spec.lambda_base == 0.0 {
        return Ok(grad);
    }
    let lambda = spec.lambda_n(n);
    match spec.kind {
        PenaltyKind::ParameterL1 => {
            grad.alpha0 = lambda * sign(net.alpha0());
            for (g, v) in grad.alphas.iter_mut().zip(net.alphas()) {
                *g = lambda * sign(*v);
            }
            for (g, v) in grad.gammas.iter_mut().zip(net.gammas()) {
                *g = lambda * sign(*v);
            }
            for (g, v) in grad.gamma0s.iter_mut().zip(net.gamma0s()) {
                *g = lambda * sign(*v);
            }
        }
        PenaltyKind::GradientSparsity => {
            let x = x.ok_or(Error::MissingDesign)?;
            require_relu(net, "gradient-sparsity penalty gradient")?;
            check_design(net, x)?;
            let r = net.hidden_units();
            let d = net.input_dim();
            let scale = lambda / x.rows() as f64;
            let mut active = vec![false; r];
            let mut slope = vec![0.0; d];
            for row in x.iter_rows() {
                slope.fill(0.0);
                for j in 0..r {
                    active[j] = net.pre_activation(j, row) > 0.0;
                    if active[j] {
                        let a = net.alphas()[j];
                        for (s, g) in slope.iter_mut().zip(net.gamma_row(j)) {
                            *s += a * g;
                        }
                    }
                }
                for j in (0..r).filter(|&j| active[j]) {
                    let a = net.alphas()[j];
                    let row_g = net.gamma_row(j);
                    for k in 0..d {
                        let s = sign(slope[k]);
                        if s != 0.0 {
                            grad.alphas[j] += scale * s * row_g[k];
                            grad.gammas[j * d + k] += scale * s * a;
                        }
                    }
                }
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellDefinedReport {
    pub trials: usize,
    pub probes_per_trial: usize,
    pub max_forward_deviation: f64,
    pub max_penalty_deviation: f64,
    pub tol: f64,
}

impl WellDefinedReport {
    pub fn holds(&self) -> bool {
        self.max_forward_deviation <= self.tol && self.max_penalty_deviation <= self.tol
    }
}

pub const WELL_DEFINED_PROBES: usize = 100;

/// Draws `trials` random signed permutations of a tanh network and measures how far the
/// input-output map (on probes uniform in `[-2, 2]^d`) and the `l1` penalty move.
pub fn check_well_defined(net: &NetworkParams, trials: usize, tol: f64, seed: u64) -> Result<WellDefinedReport> {
    if net.activation() != ActivationKind::Tanh {
        return Err(Error::WrongActivation {
            op: "check_well_defined",
            expected: ActivationKind::Tanh,
            got: net.activation(),
        });
    }
    let mut rng = rng::stream(seed, 0);
    let base_penalty = l1_parameter_penalty(net);
    let mut max_forward: f64 = 0.0;
    let mut max_penalty: f64 = 0.0;
    let d = net.input_dim();
    let mut x = vec![0.0; d];
    for _ in 0..trials {
        let sp = SignedPermutation::random(net.hidden_units(), &mut rng);
        let other = net.signed_permutation(&sp)?;
        max_penalty = max_penalty.max((l1_parameter_penalty(&other) - base_penalty).abs());
        for _ in 0..WELL_DEFINED_PROBES {
            for v in x.iter_mut() {
                *v = rng.gen_range(-2.0..=2.0);
            }
            max_forward = max_forward.max((net.eval(&x) - other.eval(&x)).abs());
        }
    }
    Ok(WellDefinedReport {
        trials,
        probes_per_trial: WELL_DEFINED_PROBES,
        max_forward_deviation: max_forward,
        max_penalty_deviation: max_penalty,
        tol,
    })
}

fn require_relu(net: &NetworkParams, op: &'static str) -> Result<()> {
    if net.activation() != ActivationKind::Relu {
        return Err(Error::WrongActivation {
            op,
            expected: ActivationKind::Relu,
            got: net.activation(),
        });
    }
    Ok(())
}

fn check_design(net: &NetworkParams, x: &Matrix) -> Result<()> {
    if x.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: net.input_dim(),
            got: x.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::InvalidConfig("penalty needs at least one design point".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn example_net() -> NetworkParams {
        NetworkParams::from_units(ActivationKind::Tanh, 0.5, vec![-1.5], &[vec![2.0, -1.0]], vec![0.25])
            .unwrap()
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_parameter_penalty(&NetworkParams::zeros(ActivationKind::Tanh, 3, 4).unwrap()), 0.0);
        assert_eq!(l1_parameter_penalty(&example_net()), 5.25);
        let net = example_net().zero_padded(3).unwrap();
        assert_eq!(l1_parameter_penalty(&net), 5.25);
    }

    #[test]
    fn gradient_sparsity_examples() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.2], vec![2.0, -1.0]], 2).unwrap();
        let dead = NetworkParams::from_units(ActivationKind::Relu, 1.0, vec![1.0], &[vec![0.0, 0.0]], vec![-1.0])
            .unwrap();
        assert_eq!(gradient_sparsity_penalty(&dead, &x).unwrap().value, 0.0);

        let live = NetworkParams::from_units(ActivationKind::Relu, 0.0, vec![1.0], &[vec![2.0, -3.0]], vec![5.0])
            .unwrap();
        for n in 1..=3 {
            let sub = x.select_rows(&(0..n).collect::<Vec<_>>());
            let g = gradient_sparsity_penalty(&live, &sub).unwrap();
            assert_eq!(g.value, 5.0);
            assert_eq!(g.on_kink_rows, 0);
        }
        assert!(gradient_sparsity_penalty(&example_net(), &x).is_err());
    }

    #[test]
    fn kink_rows_are_counted() {
        let net = NetworkParams::from_units(ActivationKind::Relu, 0.0, vec![1.0], &[vec![1.0]], vec![0.0])
            .unwrap();
        let x = Matrix::column(vec![0.0, 1.0]).unwrap();
        let g = gradient_sparsity_penalty(&net, &x).unwrap();
        assert_eq!(g.on_kink_rows, 1);
        assert_eq!(g.value, 0.5);
    }

    #[test]
    fn penalty_value_examples() {
        let net = example_net();
        let spec = |lambda| PenaltySpec::new(PenaltyKind::ParameterL1, lambda).unwrap();
        assert_eq!(penalty_value(&spec(0.0), &net, None, 100).unwrap(), 0.0);
        assert!((penalty_value(&spec(10.0), &net, None, 100).unwrap() - 0.525).abs() < 1e-15);
        assert!((penalty_value(&spec(10.0), &net, None, 2000).unwrap() - 0.02625).abs() < 1e-15);
        let sparse = PenaltySpec::new(PenaltyKind::GradientSparsity, 1.0).unwrap();
        assert!(matches!(penalty_value(&sparse, &net, None, 10), Err(Error::MissingDesign)));
        assert!(PenaltySpec::new(PenaltyKind::ParameterL1, -1.0).is_err());
    }

    #[test]
    fn well_defined_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = NetworkParams::random_uniform(ActivationKind::Tanh, 2, 5, 1.0, &mut rng).unwrap();
        let report = check_well_defined(&net, 50, 1e-12, 9).unwrap();
        assert_eq!(report.max_penalty_deviation, 0.0);
        assert!(report.holds(), "{report:?}");
        let relu = NetworkParams::zeros(ActivationKind::Relu, 1, 2).unwrap();
        assert!(check_well_defined(&relu, 5, 1e-12, 0).is_err());
    }

    /// Central differences of the penalty with indicators recomputed at each probe, valid
    /// away from kinks.
    fn numeric_penalty_gradient(spec: &PenaltySpec, net: &NetworkParams, x: &Matrix) -> Vec<f64> {
        let base = net.to_flat();
        let h = 1e-6;
        (0..base.len())
            .map(|k| {
                let eval = |delta: f64| {
                    let mut p = net.clone();
                    let mut theta = base.clone();
                    theta[k] += delta;
                    p.set_flat(&theta).unwrap();
                    penalty_value(spec, &p, Some(x), x.rows()).unwrap()
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sparsity_gradient_matches_finite_differences_off_kinks() {
        let spec = PenaltySpec::new(PenaltyKind::GradientSparsity, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 20 {
            let net = NetworkParams::random_uniform(ActivationKind::Relu, 2, 4, 1.0, &mut rng).unwrap();
            let rows: Vec<Vec<f64>> = (0..16).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
            let x = Matrix::from_rows(&rows, 2).unwrap();
            let clear = x.iter_rows().all(|row| (0..4).all(|j| net.pre_activation(j, row).abs() > 1e-3));
            let slopes_clear = x.iter_rows().all(|row| {
                net.input_gradient(row).unwrap().gradient.iter().all(|g| g.abs() > 1e-3)
            });
            if !(clear && slopes_clear) {
                continue;
            }
            let analytic = penalty_gradient(&spec, &net, Some(&x), x.rows()).unwrap().to_flat();
            let numeric = numeric_penalty_gradient(&spec, &net, &x);
            for (a, b) in analytic.iter().zip(&numeric) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
            checked += 1;
        }
    }

    #[test]
    fn l1_subgradient_uses_zero_at_zero() {
        let spec = PenaltySpec::new(PenaltyKind::ParameterL1, 4.0).unwrap();
        let g = penalty_gradient(&spec, &example_net().zero_padded(2).unwrap(), None, 2).unwrap();
        assert_eq!(g.to_flat(), vec![2.0, -2.0, 0.0, 2.0, -2.0, 0.0, 0.0, 2.0, 0.0]);
    }

    fn arb_relu_net() -> impl Strategy<Value = NetworkParams> {
        (1usize..6, 1usize..4).prop_flat_map(|(r, d)| {
            prop::collection::vec(-3.0f64..3.0, r * (d + 2) + 1).prop_map(move |flat| {
                let mut net = NetworkParams::zeros(ActivationKind::Relu, d, r).unwrap();
                net.set_flat(&flat).unwrap();
                net
            })
        })
    }

    proptest! {
        #[test]
        fn gradient_sparsity_is_dominated(net in arb_relu_net(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = net.input_dim();
            let rows: Vec<Vec<f64>> = (0..32).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let x = Matrix::from_rows(&rows, d).unwrap();
            let value = gradient_sparsity_penalty(&net, &x).unwrap().value;
            prop_assert!(value <= gradient_domination_bound(&net) * (1.0 + 1e-12));
            let canonical = net.canonicalize_relu().unwrap();
            let cval = gradient_sparsity_penalty(&canonical, &x).unwrap().value;
            prop_assert!(cval <= hidden_weight_l1(&canonical) * (1.0 + 1e-12));
            prop_assert!((cval - value).abs() <= 1e-10 * value.max(1.0));
        }

        #[test]
        fn l1_is_absolutely_homogeneous(net in arb_relu_net(), c in -5.0f64..5.0) {
            let mut scaled = net.clone();
            let flat: Vec<f64> = net.to_flat().iter().map(|v| c * v).collect();
            scaled.set_flat(&flat).unwrap();
            let (a, b) = (l1_parameter_penalty(&scaled), c.abs() * l1_parameter_penalty(&net));
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
