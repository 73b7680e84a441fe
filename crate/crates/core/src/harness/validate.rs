//! Invariant suite behind the `validate` subcommand: exact identities,
//! Monte Carlo checks of the unbiasedness and second-moment claims, and the
//! convergence-bound check on a configuration that meets its conditions.

use std::fmt;

use super::config::{ExperimentConfig, Replication};
use super::presets::{preset_runs, Preset, PresetOptions};
use super::run::{run_experiment, INVARIANT_TOL};
use crate::allocation::AllocationMatrix;
use crate::compression::CompressorSpec;
use crate::error::Result;
use crate::linalg;
use crate::protocol::{encode_local, sample_stragglers, MethodKind, MethodSpec};
use crate::rng::{domain, RandomStream};
use crate::task::LinearRegressionTask;
use crate::theory::{self, TheoryInputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, ok: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Sizes for the suite; `quick` shrinks every loop for smoke testing.
#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub seed: u64,
    pub quick: bool,
}

pub fn run_all(opts: &ValidateOptions) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        contraction(opts),
        unbiasedness(opts)?,
        encoding_identity(opts)?,
        virtual_sequence(opts)?,
        second_moment_monte_carlo(opts)?,
        theory_units()?,
        convergence_bound_check(opts)?,
    ])
}

/// `‖C(x) − x‖² ≤ δ‖x‖²` for grouped sign (group sizes 1, 4, D) and top-K
/// (K = 1, D/2, D).
pub fn contraction(opts: &ValidateOptions) -> CheckOutcome {
    let d = 100;
    let n = if opts.quick { 100 } else { 1000 };
    let specs = [
        CompressorSpec::grouped_sign(d, 1),
        CompressorSpec::grouped_sign(d, 4),
        CompressorSpec::grouped_sign(d, d),
        CompressorSpec::top_k(1, d),
        CompressorSpec::top_k(d / 2, d),
        CompressorSpec::top_k(d, d),
    ];
    let mut rng = RandomStream::derive(opts.seed, &[domain::PROBE, 1]);
    let mut violations = 0;
    for spec in specs.iter().flatten() {
        let delta = spec.delta().unwrap_or(f64::NAN);
        for _ in 0..n {
            let x = rng.normal_vector(d, 0.0, 1.0);
            let c = spec.compress(&x, &mut rng).unwrap_or_default();
            let lhs = linalg::norm_sq(&linalg::sub(&c, &x));
            if lhs > delta * linalg::norm_sq(&x) * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    outcome("contraction", violations == 0, format!("{violations} violations over {} vectors", 6 * n))
}

/// Per-coordinate sample mean within 4 standard errors for the unbiased
/// compressors; at least 99% of coordinates must pass.
pub fn unbiasedness(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let d = 50;
    let draws = if opts.quick { 10_000 } else { 100_000 };
    let mut rng = RandomStream::derive(opts.seed, &[domain::PROBE, 2]);
    let x = rng.normal_vector(d, 0.0, 1.0);
    let mut worst: f64 = 1.0;
    for spec in [CompressorSpec::StochasticSignBit, CompressorSpec::rand_k(5, d)?] {
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        for _ in 0..draws {
            let c = spec.compress(&x, &mut rng)?;
            for j in 0..d {
                sum[j] += c[j];
                sum_sq[j] += c[j] * c[j];
            }
        }
        let n = draws as f64;
        let pass = (0..d)
            .filter(|&j| {
                let mean = sum[j] / n;
                let var = (sum_sq[j] / n - mean * mean).max(0.0);
                let se = (var / n).sqrt();
                (mean - x[j]).abs() <= 4.0 * se + 1e-12
            })
            .count();
        worst = worst.min(pass as f64 / d as f64);
    }
    Ok(outcome(
        "unbiasedness",
        worst >= 0.99,
        format!("worst pass fraction {worst:.3}"),
    ))
}

/// `(1 − p) Σᵢ gᵢ = ∇F(θ)` for random allocations, tasks and `θ`.
pub fn encoding_identity(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let cases = if opts.quick { 10 } else { 100 };
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let mut rng = RandomStream::derive(opts.seed, &[domain::PROBE, 3, case]);
        let n = 2 + (rng.uniform() * 30.0) as usize;
        let m = 1 + (rng.uniform() * 30.0) as usize;
        let dim = 1 + (rng.uniform() * 20.0) as usize;
        let p = rng.uniform() * 0.95;
        let reps: Vec<usize> = (0..m).map(|_| 1 + (rng.uniform() * n as f64) as usize).collect();
        let alloc = AllocationMatrix::uniform_random_heterogeneous(n, &reps, &mut rng)?;
        let task = LinearRegressionTask::generate(m, dim, &mut rng)?;
        let theta = rng.normal_vector(dim, 0.0, 1.0);
        let grads: Vec<_> = (0..m).map(|k| task.subset_gradient(k, &theta)).collect::<Result<_>>()?;
        let mut total = vec![0.0; dim];
        for i in 0..n {
            let local: Vec<(usize, &[f64])> = alloc.subsets_of(i).into_iter().map(|k| (k, grads[k].as_slice())).collect();
            linalg::add_assign(&mut total, &encode_local(dim, &local, alloc.replication(), p)?);
        }
        let lhs = linalg::scale(1.0 - p, &total);
        worst = worst.max(linalg::relative_diff(&lhs, &task.full_gradient(&theta)));
    }
    Ok(outcome(
        "encoding identity",
        worst <= INVARIANT_TOL,
        format!("max relative residual {worst:e} over {cases} cases"),
    ))
}

/// Virtual-iterate recursion over the error-feedback sign run of `fig2`.
pub fn virtual_sequence(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let popts = PresetOptions {
        iterations: opts.quick.then_some(100),
        seed: opts.seed,
        debug_invariants: true,
        ..PresetOptions::default()
    };
    let cfg = preset_runs(Preset::Fig2, &popts)
        .into_iter()
        .next()
        .map(|r| r.config)
        .unwrap_or_default();
    let metrics = run_experiment(&cfg)?;
    let worst = metrics.max_residual().unwrap_or(f64::NAN);
    Ok(outcome(
        "virtual sequence",
        worst <= INVARIANT_TOL,
        format!("max relative residual {worst:e}"),
    ))
}

/// Result of the second-moment Monte Carlo at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub mean: f64,
    pub std_err: f64,
    pub rhs: f64,
}

impl MomentCheck {
    pub fn holds(&self, std_errs: f64) -> bool {
        self.mean <= self.rhs + std_errs * self.std_err
    }
}

/// Monte Carlo estimate of `E‖Σᵢ Iᵢ gᵢ‖²` over straggler draws at a fixed
/// `θ`, with the bound evaluated at `β` estimated at that point.
pub fn second_moment_at(
    task: &LinearRegressionTask,
    alloc: &AllocationMatrix,
    p: f64,
    theta: &[f64],
    draws: usize,
    rng: &mut RandomStream,
) -> Result<MomentCheck> {
    let dim = task.dim();
    let grads: Vec<_> = (0..task.samples()).map(|k| task.subset_gradient(k, theta)).collect::<Result<_>>()?;
    let coded = (0..alloc.devices())
        .map(|i| {
            let local: Vec<(usize, &[f64])> = alloc.subsets_of(i).into_iter().map(|k| (k, grads[k].as_slice())).collect();
            encode_local(dim, &local, alloc.replication(), p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let draw = sample_stragglers(alloc.devices(), p, rng);
        let mut agg = vec![0.0; dim];
        for (g, &on) in coded.iter().zip(&draw.indicators) {
            if on {
                linalg::add_assign(&mut agg, g);
            }
        }
        let v = linalg::norm_sq(&agg);
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let std_err = ((sum_sq / n - mean * mean).max(0.0) / n).sqrt();
    let inputs = TheoryInputs {
        p,
        delta: 0.0,
        q_a: 0.0,
        devices: alloc.devices(),
        subsets: alloc.subsets(),
        vartheta: alloc.vartheta(),
        smoothness: 0.0,
        beta: theory::estimate_beta(task, &[theta.to_vec()])?,
        f0: 0.0,
        f_star: 0.0,
        phi: 1.0,
    };
    let rhs = theory::second_moment_bound(&inputs, linalg::norm_sq(&task.full_gradient(theta)));
    Ok(MomentCheck { mean, std_err, rhs })
}

pub fn second_moment_monte_carlo(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let points = if opts.quick { 3 } else { 10 };
    let draws = if opts.quick { 1000 } else { 10_000 };
    let mut rng = RandomStream::derive(opts.seed, &[domain::PROBE, 4]);
    let task = LinearRegressionTask::generate(100, 100, &mut rng)?;
    let alloc = AllocationMatrix::uniform_random(100, 100, 5, &mut rng)?;
    let mut failures = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..points {
        let theta = rng.normal_vector(100, 0.0, 1.0);
        let c = second_moment_at(&task, &alloc, 0.2, &theta, draws, &mut rng)?;
        worst_ratio = worst_ratio.max(c.mean / c.rhs);
        if !c.holds(3.0) {
            failures += 1;
        }
    }
    Ok(outcome(
        "second-moment bound",
        failures == 0,
        format!("{failures}/{points} points above bound; max mean/rhs = {worst_ratio:.4}"),
    ))
}

/// Exact properties of the closed-form constants.
pub fn theory_units() -> Result<CheckOutcome> {
    let base = TheoryInputs {
        p: 0.2,
        delta: 0.4,
        q_a: 0.3,
        devices: 100,
        subsets: 100,
        vartheta: 19.0,
        smoothness: 4e4,
        beta: 1e3,
        f0: 1e6,
        f_star: 0.0,
        phi: 1e-6,
    };
    let xi1_p0 = theory::xi1(&TheoryInputs { p: 0.0, ..base })?;
    let xi1_d0 = theory::xi1(&TheoryInputs { delta: 0.0, ..base })?;
    let eps1_v0 = theory::constants(&TheoryInputs { vartheta: 0.0, ..base })?.eps1;
    let c = theory::constants(&base)?;
    let horizons = [1_000u64, 4_000, 16_000, 64_000];
    let bounds = horizons
        .iter()
        .map(|&t| theory::convergence_bound(t, &base, &c))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = bounds.windows(2).all(|w| w[1] < w[0]);
    let ok = xi1_p0 == 0.0 && xi1_d0 == 0.0 && eps1_v0 == 0.0 && decreasing;
    Ok(outcome(
        "theory units",
        ok,
        format!("xi1(p=0)={xi1_p0}, xi1(delta=0)={xi1_d0}, eps1(vartheta=0)={eps1_v0}, bound decreasing={decreasing}"),
    ))
}

/// One `(horizon, trial)` of the convergence-bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub horizon: usize,
    pub trial: usize,
    /// `(1/(T+1)) Σ_{t≤T} ‖∇F(θ^t)‖²`
    pub average: f64,
    pub bound: Option<f64>,
    pub delta: f64,
    pub q_a: f64,
    pub phi: f64,
}

/// The top-K configuration used for the bound check: `K = 0.6 D` so that
/// `δ = 0.4 < 1/2`, otherwise the `fig2` system.
pub fn bound_check_config(seed: u64, trials: usize) -> ExperimentConfig {
    let dim = 100;
    ExperimentConfig {
        devices: 100,
        subsets: 100,
        dim,
        replication: Replication::Uniform(5),
        p: 0.2,
        method: MethodSpec::new(MethodKind::CocoEf, CompressorSpec::top_k(3 * dim / 5, dim).expect("k <= dim"))
            .expect("top-k is biased"),
        trials,
        seed,
        emit_theory: true,
        ..ExperimentConfig::default()
    }
}

/// For each horizon `T`, run `T + 1` rounds with `γ = φ/√(T+1)` and compare
/// each trial's average squared gradient norm to that trial's bound. `φ` is
/// half the largest value the shortest horizon allows, using the largest `ε₀`
/// seen in pilot runs of every trial.
pub fn convergence_bound_checks(horizons: &[usize], seed: u64, trials: usize) -> Result<Vec<BoundCheck>> {
    let shortest = horizons.iter().copied().min().unwrap_or(100);
    let base = bound_check_config(seed, trials);
    let pilot = run_experiment(&ExperimentConfig {
        iterations: shortest + 1,
        ..base.clone()
    })?;
    let eps0 = pilot
        .trials
        .iter()
        .map(|t| t.theory.as_ref().and_then(|th| th.constants).map_or(f64::NAN, |c| c.eps0))
        .fold(0.0, f64::max);
    let phi = 0.5 * ((shortest + 1) as f64).sqrt() / eps0;

    let mut out = Vec::new();
    for &horizon in horizons {
        let rounds = horizon + 1;
        let cfg = ExperimentConfig {
            iterations: rounds,
            gamma0: phi / (rounds as f64).sqrt(),
            ..base.clone()
        };
        for t in run_experiment(&cfg)?.trials {
            let th = t.theory.as_ref();
            out.push(BoundCheck {
                horizon,
                trial: t.trial,
                average: t.mean_grad_norm_sq(),
                bound: th.and_then(|th| {
                    th.constants
                        .and_then(|c| theory::convergence_bound(horizon as u64, &th.inputs, &c).ok())
                }),
                delta: th.map_or(f64::NAN, |th| th.inputs.delta),
                q_a: th.map_or(f64::NAN, |th| th.inputs.q_a),
                phi,
            });
        }
    }
    Ok(out)
}

pub fn convergence_bound_check(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let horizons: &[usize] = if opts.quick { &[100, 1000] } else { &[100, 1000, 10_000] };
    let checks = convergence_bound_checks(horizons, opts.seed, if opts.quick { 1 } else { 3 })?;
    let mut status = Status::Pass;
    let mut parts = Vec::new();
    for c in &checks {
        match c.bound {
            Some(b) if c.average <= b => {
                parts.push(format!("T={} trial {}: {:.4e} <= {:.4e}", c.horizon, c.trial, c.average, b))
            }
            Some(b) => {
                // β is only a trajectory estimate, so an exceedance is a warning
                status = Status::Warn;
                parts.push(format!("T={} trial {}: {:.4e} > {:.4e}", c.horizon, c.trial, c.average, b));
            }
            None => {
                status = Status::Fail;
                parts.push(format!(
                    "T={} trial {}: bound unavailable (delta={}, q_A={})",
                    c.horizon, c.trial, c.delta, c.q_a
                ));
            }
        }
    }
    Ok(CheckOutcome {
        name: "convergence bound",
        status,
        detail: parts.join("; "),
    })
}
