//! Run a figure preset at a reduced budget and print each configuration's
//! final mean loss.
//!
//! `cargo run --release --example figure_preset -- fig5 500`

use coco_ef::harness::{run_figure_preset, Preset, PresetOptions};

fn main() -> coco_ef::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("fig2").parse()?;
    let iterations = args.next().map(|s| s.parse().expect("iteration count"));
    let opts = PresetOptions {
        iterations: iterations.or(Some(500)),
        trials: 3,
        ..PresetOptions::default()
    };
    for (run, metrics) in run_figure_preset(preset, &opts)? {
        println!("{:<22} final mean loss {:.6e}", run.label, metrics.final_loss_mean());
    }
    Ok(())
}
