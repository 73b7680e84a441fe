//! Train the default linear-regression experiment with error feedback and
//! sign compression, printing the mean loss every 100 rounds.
//!
//! `cargo run --release --example train_linear_regression -- [config file]`

use coco_ef::harness::run_experiment;
use coco_ef::ExperimentConfig;

fn main() -> coco_ef::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            iterations: 1000,
            trials: 3,
            ..ExperimentConfig::default()
        },
    };
    print!("{}", cfg.to_config_string());
    let metrics = run_experiment(&cfg)?;
    println!("{:>6} {:>14} {:>14}", "iter", "loss_mean", "loss_std");
    for row in metrics.summary().iter().step_by(100) {
        println!("{:>6} {:>14.6e} {:>14.6e}", row.iter, row.loss_mean, row.loss_std);
    }
    println!("final mean loss {:.6e}", metrics.final_loss_mean());
    Ok(())
}
