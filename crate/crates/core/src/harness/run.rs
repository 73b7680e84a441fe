use rayon::prelude::*;

use super::config::{ExperimentConfig, LrSchedule};
use super::metrics::{IterationRecord, RunMetrics, TrialMetrics, TrialTheory};
use crate::allocation::AllocationMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::protocol::{MethodKind, Simulation};
use crate::rng::{domain, RandomStream};
use crate::task::LinearRegressionTask;
use crate::theory::{self, TheoryInputs};

/// Relative tolerance for the virtual-iterate and encoding identities.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Safety factor applied to the trajectory estimate of `β`.
pub const BETA_SAFETY: f64 = 2.0;

/// Trajectory points kept for the `β` estimate.
const BETA_PROBES: usize = 64;

/// Everything a trial is built from, derived from `(seed, trial)` only.
pub struct TrialSetup {
    pub task: LinearRegressionTask,
    pub allocation: AllocationMatrix,
    pub theta0: Vector,
}

impl TrialSetup {
    pub fn new(cfg: &ExperimentConfig, trial: usize) -> Result<Self> {
        let t = trial as u64;
        let task = LinearRegressionTask::generate(
            cfg.subsets,
            cfg.dim,
            &mut RandomStream::derive(cfg.seed, &[domain::TASK, t]),
        )?;
        let allocation = AllocationMatrix::uniform_random_heterogeneous(
            cfg.devices,
            &cfg.replication.counts(cfg.subsets),
            &mut RandomStream::derive(cfg.seed, &[domain::ALLOCATION, t]),
        )?;
        let theta0 = RandomStream::derive(cfg.seed, &[domain::THETA0, t]).normal_vector(cfg.dim, 0.0, 1.0);
        Ok(Self {
            task,
            allocation,
            theta0,
        })
    }
}

/// Run all trials of `cfg`. Trials execute in parallel; the result is
/// independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunMetrics> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, trial))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunMetrics {
        label: cfg.method.label(),
        trials,
    })
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialMetrics> {
    let setup = TrialSetup::new(cfg, trial)?;
    let TrialSetup {
        task,
        allocation,
        theta0,
    } = &setup;
    let mut sim = Simulation::new(
        task,
        allocation,
        cfg.method.clone(),
        cfg.p,
        theta0.clone(),
        cfg.seed,
        trial as u64,
    )?
    .with_encoding_check(cfg.debug_invariants);

    let stride = (cfg.iterations / BETA_PROBES).max(1);
    let mut probes = Vec::new();
    let mut records = Vec::with_capacity(cfg.iterations + 1);
    for t in 0..=cfg.iterations {
        let theta = sim.theta();
        let loss = task.loss(theta);
        if !loss.is_finite() {
            return Err(Error::InvariantViolation {
                trial,
                iteration: t,
                what: "non-finite loss",
                residual: loss,
            });
        }
        let grad_norm_sq = linalg::norm_sq(&task.full_gradient(theta));
        if cfg.emit_theory && (t % stride == 0 || t == cfg.iterations) {
            probes.push(theta.to_vec());
        }
        let mut rec = IterationRecord {
            trial,
            iter: t,
            loss,
            grad_norm_sq,
            responders: None,
            qa: None,
            residual: None,
            encoding_residual: None,
            error_sum_norm_sq: None,
            bound: None,
        };
        if t < cfg.iterations {
            let report = sim.step(cfg.lr_schedule.rate(cfg.gamma0, t))?;
            if cfg.debug_invariants {
                for (what, value) in [
                    ("virtual-iterate", report.virtual_residual),
                    ("encoding", report.encoding_residual),
                ] {
                    if let Some(r) = value.filter(|r| r.is_nan() || *r > INVARIANT_TOL) {
                        return Err(Error::InvariantViolation {
                            trial,
                            iteration: t,
                            what,
                            residual: r,
                        });
                    }
                }
            }
            rec.responders = Some(report.responders);
            rec.qa = report.qa;
            rec.residual = report.virtual_residual;
            rec.encoding_residual = report.encoding_residual;
            rec.error_sum_norm_sq = Some(report.error_sum_norm_sq);
        }
        records.push(rec);
    }

    let mut metrics = TrialMetrics {
        trial,
        records,
        theory: None,
    };
    if cfg.emit_theory {
        attach_theory(cfg, &setup, &probes, &mut metrics)?;
    }
    Ok(metrics)
}

/// Theory inputs for a finished trial: `L` by power iteration, `β` from the
/// trajectory times [`BETA_SAFETY`], `q_A` as the running maximum, `F* = 0`
/// and `φ = γ₀√T`, so that a run of `T` rounds (`t = 0..T−1`) is the
/// bound's horizon `T − 1`.
pub fn trial_theory(
    cfg: &ExperimentConfig,
    setup: &TrialSetup,
    probes: &[Vector],
    metrics: &TrialMetrics,
) -> Result<TrialTheory> {
    let beta_trajectory = theory::estimate_beta(&setup.task, probes)?;
    let delta = cfg.method.compressor().delta().unwrap_or(f64::NAN);
    let inputs = TheoryInputs {
        p: cfg.p,
        delta,
        q_a: metrics.max_qa().unwrap_or(0.0),
        devices: cfg.devices,
        subsets: cfg.subsets,
        vartheta: setup.allocation.vartheta(),
        smoothness: theory::estimate_smoothness(&setup.task)?,
        beta: BETA_SAFETY * beta_trajectory,
        f0: setup.task.loss(&setup.theta0),
        f_star: 0.0,
        phi: cfg.gamma0 * (cfg.iterations as f64).sqrt(),
    };
    let constants = match cfg.method.kind() {
        MethodKind::CocoEf => theory::constants(&inputs).ok(),
        _ => None,
    };
    Ok(TrialTheory {
        inputs,
        constants,
        beta_trajectory,
    })
}

fn attach_theory(
    cfg: &ExperimentConfig,
    setup: &TrialSetup,
    probes: &[Vector],
    metrics: &mut TrialMetrics,
) -> Result<()> {
    let th = trial_theory(cfg, setup, probes, metrics)?;
    // row t averages rounds 0..=t, i.e. horizon t at φ = γ√(t+1)
    if let (Some(c), LrSchedule::Constant) = (&th.constants, cfg.lr_schedule) {
        for rec in &mut metrics.records {
            let inputs = TheoryInputs {
                phi: cfg.gamma0 * ((rec.iter + 1) as f64).sqrt(),
                ..th.inputs
            };
            rec.bound = theory::convergence_bound(rec.iter as u64, &inputs, c).ok();
        }
    }
    metrics.theory = Some(th);
    Ok(())
}
