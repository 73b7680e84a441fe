//! Parameter grids of the linear-regression figures. Each preset expands to a
//! list of labelled configurations sharing one seed, so every method sees the
//! same tasks, allocations, initial models and straggler draws per trial.

use std::str::FromStr;

use super::config::{ExperimentConfig, LrSchedule, Replication};
use super::metrics::RunMetrics;
use super::run::run_experiment;
use crate::compression::CompressorSpec;
use crate::error::{Error, Result};
use crate::protocol::{MethodKind, MethodSpec};

const DIM: usize = 100;
const K: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Error feedback against the unbiased baselines, sign and sparse messages.
    Fig2,
    /// Straggler probability sweep at `d = 2`.
    Fig3,
    /// Replication sweep at `p = 0.9`.
    Fig4,
    /// With and without error feedback.
    Fig5,
    /// Constant against `1/√(t+1)` learning rate.
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    /// Rounds per run unless overridden.
    pub fn default_iterations(self) -> usize {
        3000
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown preset {s:?} (expected fig2..fig6)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetOptions {
    pub iterations: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub debug_invariants: bool,
    pub emit_theory: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            iterations: None,
            trials: 5,
            seed: 1,
            debug_invariants: false,
            emit_theory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    /// file-name friendly, e.g. `coco_ef_sign` or `p0.5`
    pub label: String,
    pub config: ExperimentConfig,
}

fn sign() -> CompressorSpec {
    CompressorSpec::sign(DIM).expect("DIM > 0")
}

fn method(kind: MethodKind, c: CompressorSpec) -> MethodSpec {
    MethodSpec::new(kind, c).expect("preset methods are compatible")
}

pub fn preset_runs(preset: Preset, opts: &PresetOptions) -> Vec<PresetRun> {
    let base = ExperimentConfig {
        devices: 100,
        subsets: 100,
        dim: DIM,
        replication: Replication::Uniform(5),
        p: 0.2,
        method: method(MethodKind::CocoEf, sign()),
        iterations: opts.iterations.unwrap_or(preset.default_iterations()),
        gamma0: 1e-5,
        lr_schedule: LrSchedule::Constant,
        trials: opts.trials,
        seed: opts.seed,
        emit_theory: opts.emit_theory,
        debug_invariants: opts.debug_invariants,
    };
    let top_k = CompressorSpec::top_k(K, DIM).expect("K <= DIM");
    let rand_k = CompressorSpec::rand_k(K, DIM).expect("K <= DIM");
    let run = |label: String, config: ExperimentConfig| PresetRun { label, config };

    match preset {
        Preset::Fig2 => [
            ("coco_ef_sign", MethodKind::CocoEf, sign(), 1e-5),
            ("coco_ef_topk", MethodKind::CocoEf, top_k, 1e-5),
            ("unbiased_sign", MethodKind::Unbiased, CompressorSpec::StochasticSignBit, 2e-6),
            ("unbiased_randk", MethodKind::Unbiased, rand_k.clone(), 1e-5),
            ("unbiased_diff_sign", MethodKind::UnbiasedDiff, CompressorSpec::StochasticSignBit, 2e-6),
            ("unbiased_diff_randk", MethodKind::UnbiasedDiff, rand_k, 6e-6),
        ]
        .into_iter()
        .map(|(label, kind, c, gamma0)| {
            run(
                label.into(),
                ExperimentConfig {
                    method: method(kind, c),
                    gamma0,
                    ..base.clone()
                },
            )
        })
        .collect(),
        Preset::Fig3 => [0.1, 0.3, 0.5, 0.7, 0.9]
            .into_iter()
            .map(|p| {
                run(
                    format!("p{p}"),
                    ExperimentConfig {
                        p,
                        replication: Replication::Uniform(2),
                        ..base.clone()
                    },
                )
            })
            .collect(),
        Preset::Fig4 => [1, 5, 10, 20, 50]
            .into_iter()
            .map(|d| {
                run(
                    format!("d{d}"),
                    ExperimentConfig {
                        p: 0.9,
                        replication: Replication::Uniform(d),
                        ..base.clone()
                    },
                )
            })
            .collect(),
        Preset::Fig5 => [
            ("coco_ef_sign", MethodKind::CocoEf, sign()),
            ("coco_sign", MethodKind::Coco, sign()),
            ("coco_ef_topk", MethodKind::CocoEf, top_k.clone()),
            ("coco_topk", MethodKind::Coco, top_k),
        ]
        .into_iter()
        .map(|(label, kind, c)| {
            run(
                label.into(),
                ExperimentConfig {
                    method: method(kind, c),
                    ..base.clone()
                },
            )
        })
        .collect(),
        Preset::Fig6 => [LrSchedule::Constant, LrSchedule::InvSqrt]
            .into_iter()
            .map(|lr_schedule| {
                run(
                    lr_schedule.name().into(),
                    ExperimentConfig {
                        p: 0.5,
                        replication: Replication::Uniform(2),
                        gamma0: 2e-5,
                        lr_schedule,
                        ..base.clone()
                    },
                )
            })
            .collect(),
    }
}

/// Run every configuration of `preset`, in grid order.
pub fn run_figure_preset(preset: Preset, opts: &PresetOptions) -> Result<Vec<(PresetRun, RunMetrics)>> {
    preset_runs(preset, opts)
        .into_iter()
        .map(|r| {
            let mut m = run_experiment(&r.config)?;
            m.label = r.label.clone();
            Ok((r, m))
        })
        .collect()
}
