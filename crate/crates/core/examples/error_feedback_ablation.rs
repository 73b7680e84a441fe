//! Same task, stragglers and compressor with and without error feedback,
//! stepping the simulation directly and watching the accumulated error.

use coco_ef::harness::{ExperimentConfig, TrialSetup};
use coco_ef::protocol::{MethodKind, Simulation};
use coco_ef::{linalg, CompressorSpec, MethodSpec};

fn main() -> coco_ef::Result<()> {
    let cfg = ExperimentConfig::default();
    let setup = TrialSetup::new(&cfg, 0)?;
    let top_k = CompressorSpec::top_k(2, cfg.dim)?;
    for kind in [MethodKind::CocoEf, MethodKind::Coco] {
        let method = MethodSpec::new(kind, top_k.clone())?;
        let mut sim = Simulation::new(
            &setup.task,
            &setup.allocation,
            method.clone(),
            cfg.p,
            setup.theta0.clone(),
            cfg.seed,
            0,
        )?;
        println!("{}", method.label());
        for t in 0..=1000 {
            if t % 200 == 0 {
                let theta = sim.theta();
                println!(
                    "  t={t:>5} loss={:.4e} |grad|^2={:.4e}",
                    setup.task.loss(theta),
                    linalg::norm_sq(&setup.task.full_gradient(theta))
                );
            }
            if t < 1000 {
                let r = sim.step(cfg.gamma0)?;
                if t % 200 == 0 {
                    println!(
                        "           responders={} |sum e|^2={:.3e} qa={:.3}",
                        r.responders,
                        r.error_sum_norm_sq,
                        r.qa.unwrap_or(f64::NAN)
                    );
                }
            }
        }
    }
    Ok(())
}
