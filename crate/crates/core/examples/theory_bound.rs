//! Evaluate the convergence constants and bound for a run that meets the
//! error-bound conditions, and compare with the realised average squared
//! gradient norm.

use coco_ef::harness::{run_experiment, validate};
use coco_ef::theory;

fn main() -> coco_ef::Result<()> {
    let mut cfg = validate::bound_check_config(1, 1);
    cfg.iterations = 2000;
    // the bound needs γ·ε₀ < 1
    cfg.gamma0 = 1e-6;
    let metrics = run_experiment(&cfg)?;
    let trial = &metrics.trials[0];
    let th = trial.theory.as_ref().expect("theory requested");
    let inputs = th.inputs;
    println!(
        "p={} delta={} q_A={:.4} vartheta={:.3} L={:.4e} beta={:.4e} (trajectory {:.4e}) phi={:.4e}",
        inputs.p,
        inputs.delta,
        inputs.q_a,
        inputs.vartheta,
        inputs.smoothness,
        inputs.beta,
        th.beta_trajectory,
        inputs.phi
    );
    let c = th.constants.expect("conditions hold for top-k with k = 0.6 D");
    println!("xi1={:.4e} xi2={:.4e} eps0={:.4e} eps1={:.4e}", c.xi1, c.xi2, c.eps0, c.eps1);
    println!("minimum horizon {:.1}", theory::min_horizon(&inputs, &c));

    let mut running = 0.0;
    for r in &trial.records {
        running += r.grad_norm_sq;
        let avg = running / (r.iter + 1) as f64;
        if r.iter % 400 == 0 {
            let bound = r.bound.map_or("-".to_string(), |b| format!("{b:.4e}"));
            println!("t={:>5} running mean |grad|^2 = {avg:.4e}  bound = {bound}", r.iter);
        }
    }
    Ok(())
}
