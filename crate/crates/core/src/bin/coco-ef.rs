use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coco_ef::allocation;
use coco_ef::harness::validate::{self, Status, ValidateOptions};
use coco_ef::harness::{emit_csv, run_experiment, run_figure_preset, Preset, PresetOptions};
use coco_ef::theory::{self, TheoryInputs};
use coco_ef::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "coco-ef", about = "Compressed gradient coding with error feedback under stragglers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output CSV path (a `.summary` file is written alongside).
        #[arg(short, long, default_value = "run.csv")]
        out: PathBuf,
    },
    /// Run a figure preset (fig2..fig6), one CSV per configuration.
    Preset {
        name: Preset,
        #[arg(short, long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        debug_invariants: bool,
    },
    /// Print the allocation constant, the convergence constants and the bound curve.
    Theory {
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        #[arg(long, default_value_t = 0.4)]
        delta: f64,
        #[arg(long, default_value_t = 0.3)]
        qa: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        m: usize,
        /// Replication per subset, used for ϑ.
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        f0: f64,
        #[arg(long, default_value_t = 0.0)]
        f_star: f64,
        #[arg(long, default_value_t = 0.01)]
        phi: f64,
        /// Horizons at which to evaluate the bound.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        horizons: Vec<u64>,
    },
    /// Run the invariant suite.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

fn write_run(metrics: &coco_ef::RunMetrics, path: &Path) -> Result<()> {
    emit_csv(metrics, path)?;
    println!("{}: final mean loss {:.6e} -> {}", metrics.label, metrics.final_loss_mean(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let metrics = run_experiment(&cfg)?;
            write_run(&metrics, &out)?;
        }
        Command::Preset {
            name,
            out_dir,
            iterations,
            trials,
            seed,
            debug_invariants,
        } => {
            std::fs::create_dir_all(&out_dir).map_err(|e| coco_ef::Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            let opts = PresetOptions {
                iterations,
                trials,
                seed,
                debug_invariants,
                emit_theory: false,
            };
            for (run, metrics) in run_figure_preset(name, &opts)? {
                let path = out_dir.join(format!("{}_{}.csv", name.name(), run.label));
                write_run(&metrics, &path)?;
            }
        }
        Command::Theory {
            p,
            delta,
            qa,
            n,
            m,
            d,
            smoothness,
            beta,
            f0,
            f_star,
            phi,
            horizons,
        } => {
            let vartheta = allocation::vartheta(&vec![d; m], n);
            let inputs = TheoryInputs {
                p,
                delta,
                q_a: qa,
                devices: n,
                subsets: m,
                vartheta,
                smoothness,
                beta,
                f0,
                f_star,
                phi,
            };
            let c = theory::constants(&inputs)?;
            println!("vartheta = {vartheta}");
            println!("xi1 = {}", c.xi1);
            println!("xi2 = {}", c.xi2);
            println!("eps0 = {}", c.eps0);
            println!("eps1 = {}", c.eps1);
            println!("rho0 = {}", c.rho0);
            println!("min_horizon = {}", theory::min_horizon(&inputs, &c));
            println!("T,bound");
            for t in horizons {
                match theory::convergence_bound(t, &inputs, &c) {
                    Ok(b) => println!("{t},{b}"),
                    Err(e) => println!("{t}, # {e}"),
                }
            }
        }
        Command::Validate { seed, quick } => {
            let results = validate::run_all(&ValidateOptions { seed, quick })?;
            let mut failed = false;
            for r in &results {
                println!("{r}");
                failed |= r.status == Status::Fail;
            }
            if failed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
