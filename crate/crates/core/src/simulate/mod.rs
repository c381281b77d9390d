//! Synthetic regression problems `y = f0(x) + eps` with `x ~ U(x_low, x_high)` and
//! `eps ~ N(0, noise_sd^2)`, and the experiment grid built on them.

mod grid;
mod output;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Generation, Matrix};
use crate::error::{Error, Result};
use crate::model::{ActivationKind, NetworkParams};
use crate::rng::{self, Gaussian};
use crate::trainer::TrainConfig;

pub use grid::{
    run_grid, BaseTrainConfig, CellKey, CellRecord, CellStatus, ExperimentResult, GridConfig, Manifest,
    SummaryRow,
};
pub use output::{audit_cell, build_plot_data, emit_plot_data, emit_tables, plot_grid, render_svg, PlotData, PLOT_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F0Tag {
    TwoUnitNet,
    Trig,
    Complex,
}

impl F0Tag {
    pub const ALL: [F0Tag; 3] = [F0Tag::TwoUnitNet, F0Tag::Trig, F0Tag::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            F0Tag::TwoUnitNet => "two_unit_net",
            F0Tag::Trig => "trig",
            F0Tag::Complex => "complex",
        }
    }

    fn index(self) -> u64 {
        match self {
            F0Tag::TwoUnitNet => 0,
            F0Tag::Trig => 1,
            F0Tag::Complex => 2,
        }
    }

    /// The target used in experiments with the given activation. Only the two-unit
    /// network depends on it.
    pub fn instantiate(self, activation: ActivationKind) -> TrueFunction {
        match self {
            F0Tag::TwoUnitNet => TrueFunction::two_unit_net(activation),
            F0Tag::Trig => TrueFunction::Trig,
            F0Tag::Complex => TrueFunction::Complex,
        }
    }
}

impl fmt::Display for F0Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for F0Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        F0Tag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown f0 {s:?} (two_unit_net, trig, complex)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueFunction {
    TwoUnitNet { params: NetworkParams },
    /// `sin(pi x / 3) + cos(pi x / 4 + 1) / 3`
    Trig,
    /// `sin(x) + exp(-4 x^2)`
    Complex,
}

/// Weights of the two-unit target network: `a0 = 0`, `a = (1.5, -1)`, `g = (2, -1)`,
/// `b = (0.5, 1)`.
pub const TWO_UNIT_ALPHAS: [f64; 2] = [1.5, -1.0];
pub const TWO_UNIT_GAMMAS: [f64; 2] = [2.0, -1.0];
pub const TWO_UNIT_GAMMA0S: [f64; 2] = [0.5, 1.0];

/// One-line description of the two-unit target weights, written into output headers.
pub fn two_unit_net_description() -> String {
    format!(
        "two_unit_net: alpha0=0, alpha={:?}, gamma={:?}, gamma0={:?}, activation as in the experiment",
        TWO_UNIT_ALPHAS, TWO_UNIT_GAMMAS, TWO_UNIT_GAMMA0S
    )
}

impl TrueFunction {
    pub fn two_unit_net(activation: ActivationKind) -> Self {
        let params = NetworkParams::from_parts(
            activation,
            1,
            0.0,
            TWO_UNIT_ALPHAS.to_vec(),
            TWO_UNIT_GAMMAS.to_vec(),
            TWO_UNIT_GAMMA0S.to_vec(),
        )
        .expect("two-unit target is well formed");
        TrueFunction::TwoUnitNet { params }
    }

    pub fn tag(&self) -> F0Tag {
        match self {
            TrueFunction::TwoUnitNet { .. } => F0Tag::TwoUnitNet,
            TrueFunction::Trig => F0Tag::Trig,
            TrueFunction::Complex => F0Tag::Complex,
        }
    }

    /// Evaluates at a univariate input.
    pub fn eval(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            TrueFunction::TwoUnitNet { params } => params.eval(&[x]),
            TrueFunction::Trig => (PI * x / 3.0).sin() + (PI * x / 4.0 + 1.0).cos() / 3.0,
            TrueFunction::Complex => x.sin() + (-4.0 * x * x).exp(),
        }
    }

    pub fn eval_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != 1 {
            return Err(Error::DimensionMismatch {
                what: "simulation input dimension",
                expected: 1,
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|row| self.eval(row[0])).collect())
    }

    /// The target as a member of a width-`hidden_units` sieve, when it is one.
    pub fn sieve_member(&self, hidden_units: usize) -> Option<Result<NetworkParams>> {
        match self {
            TrueFunction::TwoUnitNet { params } => Some(params.zero_padded(hidden_units)),
            _ => None,
        }
    }
}

fn default_noise_sd() -> f64 {
    0.7
}
fn default_x_low() -> f64 {
    -2.0
}
fn default_x_high() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub f0: TrueFunction,
    pub n: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_x_low")]
    pub x_low: f64,
    #[serde(default = "default_x_high")]
    pub x_high: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("noise_sd must be finite and >= 0".into()));
        }
        if !(self.x_low < self.x_high && self.x_low.is_finite() && self.x_high.is_finite()) {
            return Err(Error::InvalidConfig("need finite x_low < x_high".into()));
        }
        self.train.validate()?;
        if self.train.sieve.d != 1 {
            return Err(Error::InvalidConfig("simulations are univariate (d = 1)".into()));
        }
        Ok(())
    }

    /// Stream id `(f0 index + 1) << 32 | n`, so datasets for different targets and sizes
    /// never share random numbers while reruns reproduce them exactly.
    pub fn data_stream(&self) -> u64 {
        ((self.f0.tag().index() + 1) << 32) | (self.n as u64 & 0xffff_ffff)
    }
}

/// Draws `x_1..x_n` uniform on `[x_low, x_high)`, then `eps_1..eps_n` Gaussian, from the
/// data stream of `config.seed`. `y_i` is computed as `f0(x_i) + eps_i` and both addends
/// are kept in [`Dataset::generation`].
pub fn generate_dataset(config: &SimConfig) -> Result<Dataset> {
    use rand::Rng;
    config.validate()?;
    let stream = config.data_stream();
    let mut rng = rng::stream(config.seed, stream);
    let width = config.x_high - config.x_low;
    let xs: Vec<f64> = (0..config.n)
        .map(|_| config.x_low + width * rng.gen::<f64>())
        .collect();
    let mut gauss = Gaussian::new();
    let noise: Vec<f64> = (0..config.n)
        .map(|_| config.noise_sd * gauss.sample(&mut rng))
        .collect();
    let f0_values: Vec<f64> = xs.iter().map(|&x| config.f0.eval(x)).collect();
    let y: Vec<f64> = f0_values.iter().zip(&noise).map(|(f, e)| f + e).collect();
    let mut data = Dataset::new(Matrix::column(xs)?, y)?;
    data.generation = Some(Generation {
        f0_values,
        noise,
        seed: config.seed,
        stream,
        noise_sd: config.noise_sd,
    });
    Ok(data)
}

/// `||f^ - f0||_n^2 = (1/n) sum_i (f^(x_i) - f0(x_i))^2`
pub fn empirical_error(net: &NetworkParams, f0: &TrueFunction, x: &Matrix) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let fhat = net.forward_batch(x)?;
    let truth = f0.eval_batch(x)?;
    Ok(fhat.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.rows() as f64)
}
