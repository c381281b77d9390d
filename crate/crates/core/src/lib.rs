//! Penalized least squares over sieves of single-hidden-layer networks.
//!
//! * [`model`]: tanh / ReLU networks, analytic gradients, and the symmetry operations
//!   (signed permutations, ReLU rescaling, minimality of tanh networks).
//! * [`penalty`]: the parameter `l1` penalty and the input-gradient sparsity penalty.
//! * [`sieve`]: sieve constraints, projection, covering-number and entropy-integral
//!   bounds, rate-condition checks and a Monte Carlo multiplier-process estimate.
//! * [`trainer`]: gradient descent on the penalized objective and the basic-inequality
//!   audit.
//! * [`simulate`]: synthetic regression problems, the experiment grid and its outputs.

pub mod data;
pub mod error;
pub mod model;
pub mod penalty;
pub mod rng;
pub mod sieve;
pub mod simulate;
pub mod trainer;

mod config;

pub use config::{read_config, ConfigFormat};
pub use data::{Dataset, Matrix};
pub use error::{Error, Result};
pub use model::{ActivationKind, Minimality, MinimalityViolation, NetworkParams, SignedPermutation};
pub use penalty::{PenaltyKind, PenaltySpec};
pub use sieve::SieveSpec;
pub use trainer::{FitReport, TrainConfig};
