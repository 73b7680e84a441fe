use super::{
    advance_reference, device_step_cocoef, device_step_unbiased, device_step_unbiased_diff, encode_local, sample_stragglers,
    server_aggregate, server_update, virtual_iterate, DeviceState, MethodKind, MethodSpec,
};
use crate::allocation::AllocationMatrix;
use crate::compression::{self, CompressorSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::rng::{domain, RandomStream};
use crate::task::LinearRegressionTask;

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub responders: usize,
    /// `‖Σ(xᵢ − C(xᵢ))‖² / ‖Σxᵢ‖²` over this round's compressor inputs, when
    /// something was compressed and the inputs do not cancel.
    pub qa: Option<f64>,
    /// Relative residual of `x^{t+1} = x^t − γ Σᵢ Iᵢ gᵢ` (error feedback only).
    pub virtual_residual: Option<f64>,
    /// Relative residual of `(1 − p) Σᵢ gᵢ = ∇F(θ)` over all devices, when
    /// encoding checks are enabled.
    pub encoding_residual: Option<f64>,
    /// `‖Σᵢ eᵢ^{t+1}‖²`
    pub error_sum_norm_sq: f64,
}

/// One training run: server model, per-device state and the random
/// substreams for a single `(seed, trial)`.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    task: &'a LinearRegressionTask,
    allocation: &'a AllocationMatrix,
    method: MethodSpec,
    p: f64,
    seed: u64,
    trial: u64,
    theta: Vector,
    devices: Vec<DeviceState>,
    /// server copies of the gradient-difference references
    server_references: Vec<Vector>,
    iteration: u64,
    check_encoding: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        task: &'a LinearRegressionTask,
        allocation: &'a AllocationMatrix,
        method: MethodSpec,
        p: f64,
        theta0: Vector,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("straggler probability must lie in [0, 1), got {p}")));
        }
        let dim = task.dim();
        linalg::check_dim(dim, theta0.len())?;
        linalg::check_dim(task.samples(), allocation.subsets())?;
        if let Some(d) = method.compressor().dim() {
            linalg::check_dim(dim, d)?;
        }
        let devices = (0..allocation.devices())
            .map(|i| DeviceState::new(allocation.subsets_of(i), dim))
            .collect();
        Ok(Self {
            task,
            allocation,
            method,
            p,
            seed,
            trial,
            theta: theta0,
            devices,
            server_references: vec![vec![0.0; dim]; allocation.devices()],
            iteration: 0,
            check_encoding: false,
        })
    }

    /// Also verify the encoding identity every round (costs one extra
    /// gradient encoding per straggler).
    pub fn with_encoding_check(mut self, on: bool) -> Self {
        self.check_encoding = on;
        self
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn devices(&self) -> &[DeviceState] {
        &self.devices
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn errors(&self) -> Vec<Vector> {
        self.devices.iter().map(|d| d.error.clone()).collect()
    }

    fn encode(&self, device: usize, cache: &mut [Option<Vector>]) -> Result<Vector> {
        let subsets = &self.devices[device].subsets;
        for &k in subsets {
            if cache[k].is_none() {
                cache[k] = Some(self.task.subset_gradient(k, &self.theta)?);
            }
        }
        let grads: Vec<(usize, &[f64])> = subsets
            .iter()
            .map(|&k| (k, cache[k].as_deref().unwrap_or_default()))
            .collect();
        encode_local(self.task.dim(), &grads, self.allocation.replication(), self.p)
    }

    /// Run one round with learning rate `gamma`.
    pub fn step(&mut self, gamma: f64) -> Result<StepReport> {
        let dim = self.task.dim();
        let t = self.iteration;
        let kind = self.method.kind();
        let compressor: CompressorSpec = self.method.compressor().clone();
        let draw = sample_stragglers(
            self.devices.len(),
            self.p,
            &mut RandomStream::derive(self.seed, &[domain::STRAGGLERS, self.trial, t]),
        );

        let mut cache: Vec<Option<Vector>> = vec![None; self.task.samples()];
        let virtual_before = (kind == MethodKind::CocoEf).then(|| virtual_iterate(&self.theta, &self.errors())).transpose()?;
        let mut coded_sum = vec![0.0; dim];
        let mut inputs = Vec::new();
        let mut messages = Vec::new();
        let mut reconstructed = Vec::new();

        for i in 0..self.devices.len() {
            if !draw.indicators[i] {
                continue;
            }
            let g = self.encode(i, &mut cache)?;
            linalg::add_assign(&mut coded_sum, &g);
            let mut rng = RandomStream::derive(self.seed, &[domain::COMPRESSOR, self.trial, i as u64, t]);
            let state = &mut self.devices[i];
            match kind {
                MethodKind::CocoEf => {
                    let input: Vector = g.iter().zip(&state.error).map(|(gj, ej)| gamma * gj + ej).collect();
                    let (msg, new_error) = device_step_cocoef(&g, &state.error, gamma, &compressor, &mut rng)?;
                    state.error = new_error;
                    inputs.push(input);
                    messages.push(msg);
                }
                MethodKind::Coco => {
                    let input = linalg::scale(gamma, &g);
                    let msg = compressor.compress(&input, &mut rng)?;
                    inputs.push(input);
                    messages.push(msg);
                }
                MethodKind::Unbiased => {
                    let msg = device_step_unbiased(&g, &compressor, &mut rng)?;
                    inputs.push(g);
                    messages.push(msg);
                }
                MethodKind::UnbiasedDiff => {
                    let input = linalg::sub(&g, &state.reference);
                    let (msg, new_reference) = device_step_unbiased_diff(&g, &state.reference, &compressor, &mut rng)?;
                    state.reference = new_reference;
                    let server_ref = &mut self.server_references[i];
                    let mut estimate = server_ref.clone();
                    linalg::add_assign(&mut estimate, &msg);
                    *server_ref = advance_reference(server_ref, &msg, &compressor)?;
                    reconstructed.push(estimate);
                    inputs.push(input);
                    messages.push(msg);
                }
                MethodKind::Uncompressed => {
                    messages.push(g);
                }
            }
        }

        let encoding_residual = if self.check_encoding {
            let mut total = vec![0.0; dim];
            for i in 0..self.devices.len() {
                linalg::add_assign(&mut total, &self.encode(i, &mut cache)?);
            }
            let lhs = linalg::scale(1.0 - self.p, &total);
            let full = full_gradient_from_cache(self.task, &mut cache, &self.theta, dim)?;
            Some(linalg::relative_diff(&lhs, &full))
        } else {
            None
        };

        let qa = if kind == MethodKind::Uncompressed || inputs.is_empty() {
            None
        } else {
            compression::qa_ratio(&inputs, &messages).ok()
        };

        let aggregate = if kind == MethodKind::UnbiasedDiff {
            server_aggregate(dim, &reconstructed)?
        } else {
            server_aggregate(dim, &messages)?
        };
        self.theta = server_update(&self.theta, &aggregate, kind, gamma)?;

        let errors = self.errors();
        let error_sum = linalg::sum_all(dim, errors.iter().map(Vec::as_slice));
        let virtual_residual = match virtual_before {
            Some(before) => {
                let after = virtual_iterate(&self.theta, &errors)?;
                let mut expected = before;
                linalg::axpy(-gamma, &coded_sum, &mut expected);
                Some(linalg::relative_diff(&after, &expected))
            }
            None => None,
        };

        self.iteration += 1;
        Ok(StepReport {
            responders: draw.responders(),
            qa,
            virtual_residual,
            encoding_residual,
            error_sum_norm_sq: linalg::norm_sq(&error_sum),
        })
    }
}

fn full_gradient_from_cache(
    task: &LinearRegressionTask,
    cache: &mut [Option<Vector>],
    theta: &[f64],
    dim: usize,
) -> Result<Vector> {
    let mut g = vec![0.0; dim];
    for (k, slot) in cache.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = Some(task.subset_gradient(k, theta)?);
        }
        linalg::add_assign(&mut g, slot.as_deref().unwrap_or_default());
    }
    Ok(g)
}
