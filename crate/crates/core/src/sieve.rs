//! Sieve classes of shallow networks and the entropy arithmetic that controls them.
//!
//! A sieve at index `(r_n, V_n, M_n)` contains networks with `r_n` hidden units whose output
//! weights (bias included) have `l1` norm at most `V_n` and whose hidden units each have
//! `l1` norm (bias included) at most `M_n`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::model::{ActivationKind, NetworkParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    pub r_n: usize,
    pub v_n: f64,
    pub m_n: f64,
    pub d: usize,
}

impl SieveSpec {
    pub fn new(r_n: usize, v_n: f64, m_n: f64, d: usize) -> Result<Self> {
        let spec = Self { r_n, v_n, m_n, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("sieve needs r_n >= 1 and d >= 1".into()));
        }
        if !(self.v_n > 1.0 && self.v_n.is_finite()) {
            return Err(Error::InvalidConfig(format!("V_n must be finite and > 1, got {}", self.v_n)));
        }
        if !(self.m_n > 0.0 && self.m_n.is_finite()) {
            return Err(Error::InvalidConfig(format!("M_n must be finite and > 0, got {}", self.m_n)));
        }
        Ok(())
    }

    /// `r_n (d + 2) + 1`, the parameter count of a network in the sieve.
    pub fn num_params(&self) -> usize {
        self.r_n * (self.d + 2) + 1
    }
}

/// How far a network sits outside the sieve constraints; both zero iff it is inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub a_excess: f64,
    pub g_excess: f64,
}

impl ConstraintResiduals {
    pub fn is_feasible(&self) -> bool {
        self.a_excess == 0.0 && self.g_excess == 0.0
    }
}

fn output_l1(net: &NetworkParams) -> f64 {
    net.alphas().iter().fold(net.alpha0().abs(), |s, a| s + a.abs())
}

fn unit_l1(net: &NetworkParams, j: usize) -> f64 {
    net.gamma_row(j).iter().fold(net.gamma0s()[j].abs(), |s, g| s + g.abs())
}

fn check_dim(net: &NetworkParams, spec: &SieveSpec) -> Result<()> {
    if net.input_dim() != spec.d {
        return Err(Error::DimensionMismatch {
            what: "sieve input dimension",
            expected: spec.d,
            got: net.input_dim(),
        });
    }
    Ok(())
}

pub fn constraint_residuals(net: &NetworkParams, spec: &SieveSpec) -> Result<ConstraintResiduals> {
    check_dim(net, spec)?;
    let a_excess = (output_l1(net) - spec.v_n).max(0.0);
    let widest = (0..net.hidden_units()).map(|j| unit_l1(net, j)).fold(0.0, f64::max);
    Ok(ConstraintResiduals {
        a_excess,
        g_excess: (widest - spec.m_n).max(0.0),
    })
}

/// Largest factor `c <= budget / norm` with `norm_of(c) <= budget` in floating point.
fn shrink_factor(budget: f64, norm: f64, norm_of: impl Fn(f64) -> f64) -> f64 {
    let mut c = budget / norm;
    while norm_of(c) > budget {
        c = c.next_down();
    }
    c
}

/// Radial `l1` rescaling onto the sieve: the output block is scaled by `V_n / ||alpha||_1`
/// when over budget, and each over-budget hidden unit by `M_n / ||(gamma_j, gamma_0j)||_1`.
/// Feasible networks are returned unchanged, so the map is idempotent.
pub fn project_to_sieve(net: &NetworkParams, spec: &SieveSpec) -> Result<NetworkParams> {
    check_dim(net, spec)?;
    let mut out = net.clone();

    let a_norm = output_l1(net);
    if a_norm > spec.v_n {
        let c = shrink_factor(spec.v_n, a_norm, |c| {
            net.alphas().iter().fold((c * net.alpha0()).abs(), |s, a| s + (c * a).abs())
        });
        out.set_alpha0(c * net.alpha0());
        for a in out.alphas_mut() {
            *a *= c;
        }
    }

    for j in 0..net.hidden_units() {
        let g_norm = unit_l1(net, j);
        if g_norm > spec.m_n {
            let c = shrink_factor(spec.m_n, g_norm, |c| {
                net.gamma_row(j).iter().fold((c * net.gamma0s()[j]).abs(), |s, g| s + (c * g).abs())
            });
            out.gamma0s_mut()[j] *= c;
            for g in out.gamma_row_mut(j) {
                *g *= c;
            }
        }
    }
    Ok(out)
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Log of the sup-norm covering number bound for the tanh sieve:
/// `P log(2 e P V^2 / (eps (V - 1)))` with `P = r (d + 2) + 1`.
pub fn covering_bound_tanh(spec: &SieveSpec, eps: f64) -> Result<f64> {
    spec.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let p = spec.num_params() as f64;
    let v = spec.v_n;
    let log_base = compensated_sum(&[
        std::f64::consts::LN_2,
        1.0,
        p.ln(),
        2.0 * v.ln(),
        -eps.ln(),
        -(v - 1.0).ln(),
    ]);
    Ok(p * log_base)
}

/// Metric entropy bound for the ReLU sieve: `(r (d + 2) + 2) log(16 (d + 1)^2 (r + 1)^2 / u)`.
pub fn covering_bound_relu(spec: &SieveSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    if !(u > 0.0) {
        return Err(Error::InvalidConfig(format!("u must be positive, got {u}")));
    }
    let q = (spec.r_n * (spec.d + 2) + 2) as f64;
    let log_base = compensated_sum(&[
        16f64.ln(),
        2.0 * ((spec.d + 1) as f64).ln(),
        2.0 * ((spec.r_n + 1) as f64).ln(),
        -u.ln(),
    ]);
    Ok(q * log_base)
}

/// `B = P log(2 P V^2 / (V - 1))`, the entropy constant of the tanh sieve.
pub fn tanh_entropy_constant(spec: &SieveSpec) -> f64 {
    let p = spec.num_params() as f64;
    let v = spec.v_n;
    p * compensated_sum(&[std::f64::consts::LN_2, p.ln(), 2.0 * v.ln(), -(v - 1.0).ln()])
}

/// `C = 2 (r (d + 2) + 2) log(4 (d + 1) (r + 1) / e^(1/2))`, the ReLU counterpart.
pub fn relu_entropy_constant(spec: &SieveSpec) -> f64 {
    let q = (spec.r_n * (spec.d + 2) + 2) as f64;
    2.0 * q
        * compensated_sum(&[
            4f64.ln(),
            ((spec.d + 1) as f64).ln(),
            ((spec.r_n + 1) as f64).ln(),
            -0.5,
        ])
}

/// Upper bound `4 sqrt(2) B^(1/2) V_n` on the entropy integral of the tanh sieve.
pub fn entropy_integral_bound_tanh(spec: &SieveSpec) -> Result<f64> {
    spec.validate()?;
    Ok(4.0 * std::f64::consts::SQRT_2 * tanh_entropy_constant(spec).sqrt() * spec.v_n)
}

/// Upper bound `4 sqrt(2) C^(1/2) r_n M_n` on the entropy integral of the ReLU sieve.
pub fn entropy_integral_bound_relu(spec: &SieveSpec) -> Result<f64> {
    spec.validate()?;
    Ok(4.0 * std::f64::consts::SQRT_2 * relu_entropy_constant(spec).sqrt() * spec.r_n as f64 * spec.m_n)
}

pub fn entropy_integral_bound(spec: &SieveSpec, activation: ActivationKind) -> Result<f64> {
    match activation {
        ActivationKind::Tanh => entropy_integral_bound_tanh(spec),
        ActivationKind::Relu => entropy_integral_bound_relu(spec),
    }
}

/// One row of a rate-condition schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub r_n: f64,
    #[serde(rename = "V_n")]
    pub v_n: f64,
    #[serde(rename = "M_n")]
    pub m_n: f64,
    pub lambda_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCheckInput {
    pub rows: Vec<RateRow>,
    /// Lojasiewicz exponent, supplied by the user (must exceed 1).
    pub nu: f64,
}

impl RateCheckInput {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 3 {
            return Err(Error::InvalidConfig("rate check needs at least 3 rows".into()));
        }
        if !(self.nu > 1.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("nu must exceed 1, got {}", self.nu)));
        }
        for w in self.rows.windows(2) {
            if w[1].n <= w[0].n {
                return Err(Error::InvalidConfig(format!(
                    "n must be strictly increasing ({} then {})",
                    w[0].n, w[1].n
                )));
            }
        }
        for row in &self.rows {
            let vals = [row.n as f64, row.r_n, row.v_n, row.m_n, row.lambda_n];
            if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!("non-positive entry in row n = {}", row.n)));
            }
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, nu: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let rows = reader.deserialize().collect::<std::result::Result<Vec<RateRow>, _>>()?;
        let input = Self { rows, nu };
        input.validate()?;
        Ok(input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub statement: &'static str,
    /// Finite-sample ratio at each row; the condition is read as "this tends to zero".
    pub ratios: Vec<f64>,
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub activation: ActivationKind,
    pub rows: Vec<RateRow>,
    pub conditions: Vec<ConditionCheck>,
}

impl RateReport {
    pub fn all_decreasing(&self) -> bool {
        self.conditions.iter().all(|c| c.decreasing)
    }

    pub fn verdict_text(&self) -> String {
        let mut out = format!(
            "rate conditions for {} (asymptotic proxy: o(.) read as a strictly decreasing ratio over the grid)\n",
            self.activation
        );
        for c in &self.conditions {
            out.push_str(&format!(
                "{}: {} -> {} ({:.4e} .. {:.4e})\n",
                c.name,
                c.statement,
                if c.decreasing { "holds" } else { "FAILS" },
                c.ratios.first().copied().unwrap_or(f64::NAN),
                c.ratios.last().copied().unwrap_or(f64::NAN),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["n", "r_n", "V_n", "M_n", "lambda_n"];
        header.extend(self.conditions.iter().map(|c| c.name));
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![
                row.n.to_string(),
                format!("{:?}", row.r_n),
                format!("{:?}", row.v_n),
                format!("{:?}", row.m_n),
                format!("{:?}", row.lambda_n),
            ];
            rec.extend(self.conditions.iter().map(|c| format!("{:?}", c.ratios[i])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Checks the growth conditions of the consistency results on a finite schedule.
///
/// tanh: `r V^2 log(rV) / n` and `lambda_n / min(r^(-1/2), r^(-(nu-1)/(2 nu)))`.
/// ReLU: `r^3 M^2 log r / n` and `lambda_n r M`.
pub fn check_rate_conditions(input: &RateCheckInput, activation: ActivationKind) -> Result<RateReport> {
    input.validate()?;
    let nu = input.nu;
    let (entropy, lambda): (Vec<f64>, Vec<f64>) = input
        .rows
        .iter()
        .map(|row| {
            let n = row.n as f64;
            let r = row.r_n;
            match activation {
                ActivationKind::Tanh => {
                    let e = r * row.v_n * row.v_n * (r * row.v_n).ln() / n;
                    let rate = r.powf(-0.5).min(r.powf(-(nu - 1.0) / (2.0 * nu)));
                    (e, row.lambda_n / rate)
                }
                ActivationKind::Relu => {
                    let e = r.powi(3) * row.m_n * row.m_n * r.ln() / n;
                    (e, row.lambda_n * r * row.m_n)
                }
            }
        })
        .unzip();
    let (e_stmt, l_stmt) = match activation {
        ActivationKind::Tanh => (
            "r_n V_n^2 log(r_n V_n) = o(n)",
            "lambda_n = o(r_n^(-1/2) ^ r_n^(-(nu-1)/(2nu)))",
        ),
        ActivationKind::Relu => ("r_n^3 M_n^2 log r_n = o(n)", "lambda_n = o((r_n M_n)^(-1))"),
    };
    Ok(RateReport {
        activation,
        rows: input.rows.clone(),
        conditions: vec![
            ConditionCheck {
                name: "entropy_ratio",
                statement: e_stmt,
                decreasing: strictly_decreasing(&entropy),
                ratios: entropy,
            },
            ConditionCheck {
                name: "lambda_ratio",
                statement: l_stmt,
                decreasing: strictly_decreasing(&lambda),
                ratios: lambda,
            },
        ],
    })
}

/// A network in the sieve: parameters uniform on `[-1, 1]`, then projected.
pub fn sample_sieve_network<R: Rng + ?Sized>(
    spec: &SieveSpec,
    activation: ActivationKind,
    rng: &mut R,
) -> Result<NetworkParams> {
    let raw = NetworkParams::random_uniform(activation, spec.d, spec.r_n, 1.0, rng)?;
    project_to_sieve(&raw, spec)
}

/// Monte Carlo estimate of `E max_k |n^(-1/2) sum_i xi_i (f_k(x_i) - pi(x_i))|` over the
/// given networks, with Rademacher `xi` drawn from stream `round` of `seed`.
pub fn multiplier_process_for_nets(
    nets: &[NetworkParams],
    pi_n_f0: &NetworkParams,
    x: &Matrix,
    mc_rounds: usize,
    seed: u64,
) -> Result<f64> {
    if nets.is_empty() || mc_rounds == 0 {
        return Err(Error::InvalidConfig("need at least one network and one round".into()));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one design point".into()));
    }
    let base = pi_n_f0.forward_batch(x)?;
    let residuals = nets
        .iter()
        .map(|net| {
            let f = net.forward_batch(x)?;
            Ok(f.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / (n as f64).sqrt();

    let round = |k: usize| -> f64 {
        let mut rng = rng::stream(seed, k as u64);
        let xi: Vec<f64> = (0..n).map(|_| rng::rademacher(&mut rng)).collect();
        residuals
            .iter()
            .map(|g| (g.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>() * scale).abs())
            .fold(0.0, f64::max)
    };

    #[cfg(feature = "parallel")]
    let per_round: Vec<f64> = {
        use rayon::prelude::*;
        (0..mc_rounds).into_par_iter().map(round).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_round: Vec<f64> = (0..mc_rounds).map(round).collect();

    Ok(per_round.iter().sum::<f64>() / mc_rounds as f64)
}

/// [`multiplier_process_for_nets`] over `net_count` networks sampled inside the sieve.
///
/// Networks are drawn sequentially from one stream, so a larger `net_count` extends the
/// same family; together with the per-round sign streams this makes the estimate
/// nondecreasing in `net_count` for a fixed seed. Being a max over finitely many members
/// it underestimates the supremum over the whole sieve.
pub fn multiplier_process_estimate(
    spec: &SieveSpec,
    pi_n_f0: &NetworkParams,
    x: &Matrix,
    net_count: usize,
    mc_rounds: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    if x.cols() != spec.d {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: spec.d,
            got: x.cols(),
        });
    }
    let mut rng = rng::stream(seed, rng::SIEVE_SAMPLE_STREAM);
    let nets = (0..net_count)
        .map(|_| sample_sieve_network(spec, pi_n_f0.activation(), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    multiplier_process_for_nets(&nets, pi_n_f0, x, mc_rounds, seed)
}
