//! Single-hidden-layer networks `f(x) = a0 + sum_j a_j * act(g_j . x + b_j)`.
//!
//! Parameters are stored unit-major: `alphas[j]`, the `j`-th row of `gammas` (length `d`)
//! and `gamma0s[j]` all belong to hidden unit `j`. The flat parameter order used by
//! [`NetworkParams::to_flat`] is `alpha0, alphas, gammas (row-major), gamma0s`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

/// Pre-activations with `|z| <= DEFAULT_KINK_TOLERANCE` are reported as sitting on a ReLU kink.
pub const DEFAULT_KINK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Relu,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Relu => z.max(0.0),
        }
    }

    /// Derivative with the strict-inequality convention for ReLU: `act'(0) = 0`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation {other:?} (expected tanh or relu)"
            ))),
        }
    }
}

/// Wire form. `gammas` is the `r x d` hidden weight matrix flattened row-major.
#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    activation: ActivationKind,
    alpha0: f64,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
    gamma0s: Vec<f64>,
    input_dim: usize,
    hidden_units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct NetworkParams {
    activation: ActivationKind,
    alpha0: f64,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
    gamma0s: Vec<f64>,
    input_dim: usize,
}

impl TryFrom<NetworkRepr> for NetworkParams {
    type Error = Error;

    fn try_from(raw: NetworkRepr) -> Result<Self> {
        if raw.alphas.len() != raw.hidden_units {
            return Err(Error::DimensionMismatch {
                what: "alphas",
                expected: raw.hidden_units,
                got: raw.alphas.len(),
            });
        }
        Self::from_parts(
            raw.activation,
            raw.input_dim,
            raw.alpha0,
            raw.alphas,
            raw.gammas,
            raw.gamma0s,
        )
    }
}

impl From<NetworkParams> for NetworkRepr {
    fn from(net: NetworkParams) -> Self {
        let hidden_units = net.hidden_units();
        NetworkRepr {
            activation: net.activation,
            alpha0: net.alpha0,
            alphas: net.alphas,
            gammas: net.gammas,
            gamma0s: net.gamma0s,
            input_dim: net.input_dim,
            hidden_units,
        }
    }
}

/// Result of [`NetworkParams::input_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub gradient: Vec<f64>,
    /// Set when some ReLU pre-activation is within the kink tolerance of zero. The gradient
    /// is still returned under the `act'(0) = 0` convention, but callers that need a true
    /// derivative should resample.
    pub on_kink: bool,
}

/// Gradient of a scalar function of the parameters, laid out like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    /// Row-major `r x d`.
    pub gammas: Vec<f64>,
    pub gamma0s: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        let r = net.hidden_units();
        Self {
            alpha0: 0.0,
            alphas: vec![0.0; r],
            gammas: vec![0.0; r * net.input_dim()],
            gamma0s: vec![0.0; r],
        }
    }

    /// Same order as [`NetworkParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + self.alphas.len() * 2 + self.gammas.len());
        out.push(self.alpha0);
        out.extend_from_slice(&self.alphas);
        out.extend_from_slice(&self.gammas);
        out.extend_from_slice(&self.gamma0s);
        out
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ParamGradient, scale: f64) {
        self.alpha0 += scale * other.alpha0;
        for (a, b) in self.alphas.iter_mut().zip(&other.alphas) {
            *a += scale * b;
        }
        for (a, b) in self.gammas.iter_mut().zip(&other.gammas) {
            *a += scale * b;
        }
        for (a, b) in self.gamma0s.iter_mut().zip(&other.gamma0s) {
            *a += scale * b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_flat().iter().all(|&v| v == 0.0)
    }
}

/// Relabels hidden units and flips the sign of whole units.
///
/// Unit `j` of the input network becomes unit `perm[j]` of the output; if `signs[j]` is
/// `-1` its output weight, hidden weights and hidden bias are all negated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        if perm.len() != signs.len() {
            return Err(Error::InvalidPermutation(format!(
                "{} targets but {} signs",
                perm.len(),
                signs.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{perm:?} is not a bijection on 0..{}",
                    perm.len()
                )));
            }
        }
        if let Some(s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::InvalidPermutation(format!("sign {s} is not +1 or -1")));
        }
        Ok(Self { perm, signs })
    }

    pub fn identity(r: usize) -> Self {
        Self {
            perm: (0..r).collect(),
            signs: vec![1; r],
        }
    }

    /// Uniform random permutation (Fisher-Yates) with independent fair signs.
    pub fn random<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..r).collect();
        for i in (1..r).rev() {
            let k = rng.gen_range(0..=i);
            perm.swap(i, k);
        }
        let signs = (0..r).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        Self { perm, signs }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }
}

/// Which of the three minimality conditions failed. Unit indices are zero-based; the
/// `Display` impl prints them one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalityViolation {
    /// Condition 1: hidden weight vector of `unit` is zero.
    ZeroHiddenWeights { unit: usize },
    /// Condition 2: the whole output weight vector is zero.
    ZeroOutputWeights,
    /// Condition 3: `(g, b)` of the two units agree up to a global sign.
    DuplicateUnits {
        first: usize,
        second: usize,
        negated: bool,
    },
}

impl MinimalityViolation {
    pub fn condition(&self) -> u8 {
        match self {
            MinimalityViolation::ZeroHiddenWeights { .. } => 1,
            MinimalityViolation::ZeroOutputWeights => 2,
            MinimalityViolation::DuplicateUnits { .. } => 3,
        }
    }
}

impl fmt::Display for MinimalityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MinimalityViolation::ZeroHiddenWeights { unit } => {
                write!(f, "violation: condition 1 ({})", unit + 1)
            }
            MinimalityViolation::ZeroOutputWeights => write!(f, "violation: condition 2"),
            MinimalityViolation::DuplicateUnits { first, second, .. } => {
                write!(f, "violation: condition 3 ({},{})", first + 1, second + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Minimality {
    Minimal,
    Violation(MinimalityViolation),
}

impl fmt::Display for Minimality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Minimality::Minimal => f.write_str("minimal"),
            Minimality::Violation(v) => v.fmt(f),
        }
    }
}

impl NetworkParams {
    pub fn from_parts(
        activation: ActivationKind,
        input_dim: usize,
        alpha0: f64,
        alphas: Vec<f64>,
        gammas: Vec<f64>,
        gamma0s: Vec<f64>,
    ) -> Result<Self> {
        let r = alphas.len();
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if r == 0 {
            return Err(Error::InvalidConfig("hidden_units must be positive".into()));
        }
        if gammas.len() != r * input_dim {
            return Err(Error::DimensionMismatch {
                what: "gammas",
                expected: r * input_dim,
                got: gammas.len(),
            });
        }
        if gamma0s.len() != r {
            return Err(Error::DimensionMismatch {
                what: "gamma0s",
                expected: r,
                got: gamma0s.len(),
            });
        }
        let net = Self {
            activation,
            alpha0,
            alphas,
            gammas,
            gamma0s,
            input_dim,
        };
        if net.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    /// Convenience constructor from per-unit hidden weight rows.
    pub fn from_units(
        activation: ActivationKind,
        alpha0: f64,
        alphas: Vec<f64>,
        gamma_rows: &[Vec<f64>],
        gamma0s: Vec<f64>,
    ) -> Result<Self> {
        let d = gamma_rows.first().map_or(0, Vec::len);
        let gammas = Matrix::from_rows(gamma_rows, d)?;
        Self::from_parts(activation, d, alpha0, alphas, gammas.as_slice().to_vec(), gamma0s)
    }

    pub fn zeros(activation: ActivationKind, input_dim: usize, hidden_units: usize) -> Result<Self> {
        Self::from_parts(
            activation,
            input_dim,
            0.0,
            vec![0.0; hidden_units],
            vec![0.0; hidden_units * input_dim],
            vec![0.0; hidden_units],
        )
    }

    /// Every parameter i.i.d. uniform on `[-scale, scale]`, drawn in flat-parameter order.
    pub fn random_uniform<R: Rng + ?Sized>(
        activation: ActivationKind,
        input_dim: usize,
        hidden_units: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(activation, input_dim, hidden_units)?;
        let flat: Vec<f64> = (0..net.num_params())
            .map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        net.set_flat(&flat)?;
        Ok(net)
    }

    #[inline]
    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn hidden_units(&self) -> usize {
        self.alphas.len()
    }

    /// `r (d + 2) + 1`
    pub fn num_params(&self) -> usize {
        self.hidden_units() * (self.input_dim + 2) + 1
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn set_alpha0(&mut self, v: f64) {
        self.alpha0 = v;
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alphas_mut(&mut self) -> &mut [f64] {
        &mut self.alphas
    }

    /// Row-major `r x d`.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn gammas_mut(&mut self) -> &mut [f64] {
        &mut self.gammas
    }

    #[inline]
    pub fn gamma_row(&self, j: usize) -> &[f64] {
        &self.gammas[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub fn gamma_row_mut(&mut self, j: usize) -> &mut [f64] {
        let d = self.input_dim;
        &mut self.gammas[j * d..(j + 1) * d]
    }

    pub fn gamma0s(&self) -> &[f64] {
        &self.gamma0s
    }

    pub fn gamma0s_mut(&mut self) -> &mut [f64] {
        &mut self.gamma0s
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.push(self.alpha0);
        out.extend_from_slice(&self.alphas);
        out.extend_from_slice(&self.gammas);
        out.extend_from_slice(&self.gamma0s);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let r = self.hidden_units();
        let d = self.input_dim;
        self.alpha0 = flat[0];
        self.alphas.copy_from_slice(&flat[1..1 + r]);
        self.gammas.copy_from_slice(&flat[1 + r..1 + r + r * d]);
        self.gamma0s.copy_from_slice(&flat[1 + r + r * d..]);
        Ok(())
    }

    /// Same network widened to `hidden_units` by appending all-zero units.
    pub fn zero_padded(&self, hidden_units: usize) -> Result<Self> {
        if hidden_units < self.hidden_units() {
            return Err(Error::InvalidConfig(format!(
                "cannot pad {} hidden units down to {hidden_units}",
                self.hidden_units()
            )));
        }
        let mut out = self.clone();
        out.alphas.resize(hidden_units, 0.0);
        out.gammas.resize(hidden_units * self.input_dim, 0.0);
        out.gamma0s.resize(hidden_units, 0.0);
        Ok(out)
    }

    /// `g_j . x + b_j`
    #[inline]
    pub fn pre_activation(&self, j: usize, x: &[f64]) -> f64 {
        let mut z = self.gamma0s[j];
        for (g, xi) in self.gamma_row(j).iter().zip(x) {
            z += g * xi;
        }
        z
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input vector",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input vector"));
        }
        Ok(())
    }

    fn check_design(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "design matrix columns",
                expected: self.input_dim,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Evaluation without shape checks; `x.len()` must equal `input_dim`.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut out = self.alpha0;
        for j in 0..self.hidden_units() {
            out += self.alphas[j] * self.activation.apply(self.pre_activation(j, x));
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.eval(x))
    }

    /// Row-wise [`forward`](Self::forward); identical to calling it per row.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_design(x)?;
        Ok(x.iter_rows().map(|row| self.eval(row)).collect())
    }

    pub fn input_gradient(&self, x: &[f64]) -> Result<InputGradient> {
        self.input_gradient_with_tolerance(x, DEFAULT_KINK_TOLERANCE)
    }

    /// `d f / d x_k = sum_j a_j g_jk act'(g_j . x + b_j)`.
    pub fn input_gradient_with_tolerance(
        &self,
        x: &[f64],
        kink_tolerance: f64,
    ) -> Result<InputGradient> {
        self.check_input(x)?;
        Ok(self.input_gradient_unchecked(x, kink_tolerance))
    }

    pub(crate) fn input_gradient_unchecked(&self, x: &[f64], kink_tolerance: f64) -> InputGradient {
        let mut gradient = vec![0.0; self.input_dim];
        let mut on_kink = false;
        for j in 0..self.hidden_units() {
            let z = self.pre_activation(j, x);
            if self.activation == ActivationKind::Relu && z.abs() <= kink_tolerance {
                on_kink = true;
            }
            let slope = self.alphas[j] * self.activation.derivative(z);
            if slope != 0.0 {
                for (g, w) in gradient.iter_mut().zip(self.gamma_row(j)) {
                    *g += slope * w;
                }
            }
        }
        InputGradient { gradient, on_kink }
    }

    /// Empirical risk `(1/n) sum_i (f(x_i) - y_i)^2` and its analytic gradient in the
    /// parameters. ReLU units use `act'(0) = 0`.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64]) -> Result<(f64, ParamGradient)> {
        self.check_design(x)?;
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        let n = y.len() as f64;
        let r = self.hidden_units();
        let d = self.input_dim;
        let mut grad = ParamGradient::zeros_like(self);
        let mut loss = 0.0;
        let mut z = vec![0.0; r];
        let mut act = vec![0.0; r];
        for (row, &yi) in x.iter_rows().zip(y) {
            let mut f = self.alpha0;
            for j in 0..r {
                z[j] = self.pre_activation(j, row);
                act[j] = self.activation.apply(z[j]);
                f += self.alphas[j] * act[j];
            }
            let resid = f - yi;
            loss += resid * resid;
            let dl = 2.0 * resid / n;
            grad.alpha0 += dl;
            for j in 0..r {
                grad.alphas[j] += dl * act[j];
                let slope = match self.activation {
                    ActivationKind::Tanh => 1.0 - act[j] * act[j],
                    ActivationKind::Relu => self.activation.derivative(z[j]),
                };
                let back = dl * self.alphas[j] * slope;
                if back != 0.0 {
                    grad.gamma0s[j] += back;
                    for (g, xi) in grad.gammas[j * d..(j + 1) * d].iter_mut().zip(row) {
                        *g += back * xi;
                    }
                }
            }
        }
        Ok((loss / n, grad))
    }

    pub fn parameter_gradient(&self, x: &Matrix, y: &[f64]) -> Result<ParamGradient> {
        self.loss_and_gradient(x, y).map(|(_, g)| g)
    }

    /// `self - step * grad`
    pub fn stepped(&self, grad: &ParamGradient, step: f64) -> Self {
        let mut out = self.clone();
        out.alpha0 -= step * grad.alpha0;
        for (a, g) in out.alphas.iter_mut().zip(&grad.alphas) {
            *a -= step * g;
        }
        for (a, g) in out.gammas.iter_mut().zip(&grad.gammas) {
            *a -= step * g;
        }
        for (a, g) in out.gamma0s.iter_mut().zip(&grad.gamma0s) {
            *a -= step * g;
        }
        out
    }

    /// Applies a signed permutation of the hidden units. Sign flips are only a symmetry of
    /// odd activations, so any negative sign on a ReLU network is rejected.
    pub fn signed_permutation(&self, sp: &SignedPermutation) -> Result<Self> {
        if sp.len() != self.hidden_units() {
            return Err(Error::DimensionMismatch {
                what: "signed permutation",
                expected: self.hidden_units(),
                got: sp.len(),
            });
        }
        if self.activation == ActivationKind::Relu && sp.signs.iter().any(|&s| s < 0) {
            return Err(Error::InvalidPermutation(
                "relu is not odd, so flipping the sign of a unit changes the network".into(),
            ));
        }
        let mut out = self.clone();
        for j in 0..self.hidden_units() {
            let target = sp.perm[j];
            let s = f64::from(sp.signs[j]);
            out.alphas[target] = s * self.alphas[j];
            out.gamma0s[target] = s * self.gamma0s[j];
            let row: Vec<f64> = self.gamma_row(j).iter().map(|g| s * g).collect();
            out.gamma_row_mut(target).copy_from_slice(&row);
        }
        Ok(out)
    }

    /// Moves each output weight's magnitude into the hidden layer using
    /// `relu(c z) = c relu(z)` for `c >= 0`, leaving output weights in `{-1, 0, 1}`.
    /// Units with a zero output weight are zeroed; `alpha0` is kept.
    pub fn canonicalize_relu(&self) -> Result<Self> {
        if self.activation != ActivationKind::Relu {
            return Err(Error::WrongActivation {
                op: "canonicalize_relu",
                expected: ActivationKind::Relu,
                got: self.activation,
            });
        }
        let mut out = self.clone();
        for j in 0..self.hidden_units() {
            let a = self.alphas[j];
            let scale = a.abs();
            out.alphas[j] = if a == 0.0 { 0.0 } else { a.signum() };
            out.gamma0s[j] *= scale;
            for g in out.gamma_row_mut(j) {
                *g *= scale;
            }
        }
        Ok(out)
    }

    /// True when every output weight is exactly -1, 0 or 1 and zero-weight units are dead.
    pub fn is_canonical_relu(&self) -> bool {
        self.activation == ActivationKind::Relu
            && (0..self.hidden_units()).all(|j| {
                let a = self.alphas[j];
                a.abs() == 1.0
                    || (a == 0.0
                        && self.gamma0s[j] == 0.0
                        && self.gamma_row(j).iter().all(|&g| g == 0.0))
            })
    }

    /// Checks the three conditions characterizing minimal tanh networks, comparing in the
    /// sup norm against `tol`. Returns the first violated condition.
    pub fn is_minimal_tanh(&self, tol: f64) -> Result<Minimality> {
        if self.activation != ActivationKind::Tanh {
            return Err(Error::WrongActivation {
                op: "is_minimal_tanh",
                expected: ActivationKind::Tanh,
                got: self.activation,
            });
        }
        let r = self.hidden_units();
        let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0_f64, |m, x| m.max(x.abs()));

        for j in 0..r {
            if sup(&mut self.gamma_row(j).iter().copied()) <= tol {
                return Ok(Minimality::Violation(
                    MinimalityViolation::ZeroHiddenWeights { unit: j },
                ));
            }
        }
        if sup(&mut self.alphas.iter().copied()) <= tol {
            return Ok(Minimality::Violation(MinimalityViolation::ZeroOutputWeights));
        }
        for j1 in 0..r {
            for j2 in j1 + 1..r {
                for (negated, s) in [(false, 1.0), (true, -1.0)] {
                    let diff = self
                        .gamma_row(j1)
                        .iter()
                        .zip(self.gamma_row(j2))
                        .map(|(a, b)| a - s * b)
                        .chain(std::iter::once(self.gamma0s[j1] - s * self.gamma0s[j2]));
                    if sup(&mut diff.into_iter()) <= tol {
                        return Ok(Minimality::Violation(MinimalityViolation::DuplicateUnits {
                            first: j1,
                            second: j2,
                            negated,
                        }));
                    }
                }
            }
        }
        Ok(Minimality::Minimal)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
