//! Device and server logic of one synchronous round: gradient encoding,
//! error-feedback compression, Bernoulli stragglers, aggregation and the model
//! update, plus the unbiased baselines.
//!
//! [`Simulation`] strings these together into a full training loop over a
//! [`LinearRegressionTask`](crate::task::LinearRegressionTask).

mod simulation;

pub use simulation::{Simulation, StepReport};

use crate::compression::CompressorSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, check_dim, Vector};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    /// Biased compression with error feedback.
    CocoEf,
    /// Biased compression, error vectors pinned at zero.
    Coco,
    /// Unbiased compression of the coded gradient; server applies `γ`.
    Unbiased,
    /// Unbiased compression of the difference to a synchronised reference.
    UnbiasedDiff,
    /// Coded gradients sent uncompressed.
    Uncompressed,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::CocoEf => "coco_ef",
            MethodKind::Coco => "coco",
            MethodKind::Unbiased => "unbiased",
            MethodKind::UnbiasedDiff => "unbiased_diff",
            MethodKind::Uncompressed => "uncompressed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "coco_ef" => MethodKind::CocoEf,
            "coco" => MethodKind::Coco,
            "unbiased" => MethodKind::Unbiased,
            "unbiased_diff" => MethodKind::UnbiasedDiff,
            "uncompressed" => MethodKind::Uncompressed,
            other => return Err(Error::config(format!("unknown method {other:?}"))),
        })
    }

    /// Whether `γ` is folded into the device message rather than applied by
    /// the server.
    pub fn scales_on_device(self) -> bool {
        matches!(self, MethodKind::CocoEf | MethodKind::Coco)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    kind: MethodKind,
    compressor: CompressorSpec,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, compressor: CompressorSpec) -> Result<Self> {
        let ok = match kind {
            MethodKind::CocoEf | MethodKind::Coco => compressor.is_biased(),
            MethodKind::Unbiased | MethodKind::UnbiasedDiff => compressor.is_unbiased(),
            MethodKind::Uncompressed => compressor == CompressorSpec::Identity,
        };
        if !ok {
            return Err(Error::config(format!(
                "method {} is incompatible with compressor {}",
                kind.name(),
                compressor.name()
            )));
        }
        Ok(Self { kind, compressor })
    }

    pub fn uncompressed() -> Self {
        Self {
            kind: MethodKind::Uncompressed,
            compressor: CompressorSpec::Identity,
        }
    }

    pub fn kind(&self) -> MethodKind {
        self.kind
    }

    pub fn compressor(&self) -> &CompressorSpec {
        &self.compressor
    }

    /// e.g. `coco_ef(top_k)`
    pub fn label(&self) -> String {
        format!("{}({})", self.kind.name(), self.compressor.name())
    }
}

/// Per-device state that persists across rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    /// `S_i`, ascending subset indices
    pub subsets: Vec<usize>,
    /// error-feedback memory `e_i`, zero before the first round
    pub error: Vector,
    /// last transmitted reconstruction, used by gradient-difference compression
    pub reference: Vector,
}

impl DeviceState {
    pub fn new(subsets: Vec<usize>, dim: usize) -> Self {
        Self {
            subsets,
            error: vec![0.0; dim],
            reference: vec![0.0; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StragglerDraw {
    /// `I_i = true` when device `i` responds this round.
    pub indicators: Vec<bool>,
}

impl StragglerDraw {
    pub fn responders(&self) -> usize {
        self.indicators.iter().filter(|&&b| b).count()
    }
}

/// `g_i = Σ_{k ∈ S_i} ∇f_k / (d_k (1 − p))`, accumulated in the order given.
pub fn encode_local(
    dim: usize,
    subset_grads: &[(usize, &[f64])],
    replication: &[usize],
    p: f64,
) -> Result<Vector> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("straggler probability must lie in [0, 1), got {p}")));
    }
    let mut g = vec![0.0; dim];
    for &(k, grad) in subset_grads {
        check_dim(dim, grad.len())?;
        let d = *replication.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: replication.len(),
        })?;
        if d == 0 {
            return Err(Error::config(format!("subset {k} has replication 0")));
        }
        let coeff = 1.0 / (d as f64 * (1.0 - p));
        linalg::axpy(coeff, grad, &mut g);
    }
    Ok(g)
}

/// Error-feedback step: `m = C(γg + e)`, `e' = γg + e − m`.
pub fn device_step_cocoef(
    g: &[f64],
    error: &[f64],
    gamma: f64,
    spec: &CompressorSpec,
    rng: &mut RandomStream,
) -> Result<(Vector, Vector)> {
    check_dim(g.len(), error.len())?;
    let corrected: Vector = g.iter().zip(error).map(|(gj, ej)| gamma * gj + ej).collect();
    let message = spec.compress(&corrected, rng)?;
    let new_error = linalg::sub(&corrected, &message);
    Ok((message, new_error))
}

pub fn device_step_unbiased(g: &[f64], spec: &CompressorSpec, rng: &mut RandomStream) -> Result<Vector> {
    require_unbiased(spec)?;
    spec.compress(g, rng)
}

/// Gradient-difference step: `m = C(g − h)`, `h' = h + α·m` (see [`advance_reference`]).
/// The receiver's estimate of `g` is `h + m`.
pub fn device_step_unbiased_diff(
    g: &[f64],
    reference: &[f64],
    spec: &CompressorSpec,
    rng: &mut RandomStream,
) -> Result<(Vector, Vector)> {
    require_unbiased(spec)?;
    check_dim(g.len(), reference.len())?;
    let message = spec.compress(&linalg::sub(g, reference), rng)?;
    let new_reference = advance_reference(reference, &message, spec)?;
    Ok((message, new_reference))
}

/// `h + α·m` with `α = 1/(1 + ω)`, the largest step that keeps the
/// reference recursion stable for a compressor of variance factor `ω`.
pub fn advance_reference(reference: &[f64], message: &[f64], spec: &CompressorSpec) -> Result<Vector> {
    check_dim(reference.len(), message.len())?;
    let alpha = 1.0 / (1.0 + spec.variance_factor(reference.len())?);
    let mut next = reference.to_vec();
    linalg::axpy(alpha, message, &mut next);
    Ok(next)
}

fn require_unbiased(spec: &CompressorSpec) -> Result<()> {
    if spec.is_unbiased() {
        Ok(())
    } else {
        Err(Error::config(format!("compressor {} is not unbiased", spec.name())))
    }
}

/// Independent Bernoulli draws with `P(I_i = 1) = 1 − p`.
pub fn sample_stragglers(devices: usize, p: f64, rng: &mut RandomStream) -> StragglerDraw {
    StragglerDraw {
        indicators: (0..devices).map(|_| rng.uniform() >= p).collect(),
    }
}

/// Elementwise sum; an empty round yields the zero vector.
pub fn server_aggregate(dim: usize, messages: &[Vector]) -> Result<Vector> {
    let mut acc = vec![0.0; dim];
    for m in messages {
        check_dim(dim, m.len())?;
        linalg::add_assign(&mut acc, m);
    }
    Ok(acc)
}

pub fn server_update(theta: &[f64], aggregate: &[f64], method: MethodKind, gamma: f64) -> Result<Vector> {
    check_dim(theta.len(), aggregate.len())?;
    Ok(if method.scales_on_device() {
        theta.iter().zip(aggregate).map(|(t, a)| t - a).collect()
    } else {
        theta.iter().zip(aggregate).map(|(t, a)| t - gamma * a).collect()
    })
}

/// `x = θ − Σᵢ eᵢ`
pub fn virtual_iterate(theta: &[f64], errors: &[Vector]) -> Result<Vector> {
    let mut x = theta.to_vec();
    for e in errors {
        check_dim(theta.len(), e.len())?;
        for (xj, ej) in x.iter_mut().zip(e) {
            *xj -= ej;
        }
    }
    Ok(x)
}
