//! Compressed gradient coding with error feedback (COCO-EF) under Bernoulli
//! stragglers.
//!
//! The crate is organised around the pieces of one synchronous training
//! round:
//!
//! - [`allocation`] assigns the `M` training subsets redundantly to `N`
//!   devices and computes the allocation deficit `ϑ = Σ_k (1/d_k − 1/N)`.
//! - [`task`] is the synthetic linear-regression workload.
//! - [`compression`] holds the biased compressors (grouped sign-bit, top-K),
//!   the unbiased baselines (stochastic sign, amplified rand-K) and their
//!   contraction constants.
//! - [`protocol`] is the device/server logic: gradient encoding, error
//!   feedback, straggler sampling, aggregation and the model update.
//! - [`theory`] evaluates the convergence constants and the bound on the
//!   average squared gradient norm.
//! - [`harness`] runs seeded multi-trial experiments, the figure presets and
//!   the CSV writer.
//!
//! Every source of randomness is a [`rng::RandomStream`] derived from a root
//! seed and a tuple of labels, so results do not depend on execution order.

pub mod allocation;
pub mod compression;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod task;
pub mod theory;

pub use allocation::AllocationMatrix;
pub use compression::CompressorSpec;
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, LrSchedule, RunMetrics};
pub use protocol::{MethodKind, MethodSpec};
pub use rng::RandomStream;
pub use task::LinearRegressionTask;
pub use theory::{TheoryConstants, TheoryInputs};
