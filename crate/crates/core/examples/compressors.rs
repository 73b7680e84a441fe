//! Apply each compressor to one vector and print its output, its contraction
//! constant or variance factor, and the compression-error ratio.

use coco_ef::compression::{qa_ratio, CompressorSpec};
use coco_ef::{linalg, RandomStream};

fn main() -> coco_ef::Result<()> {
    let x = vec![3.0, -1.0, 0.0, 0.5, -2.0, 4.0];
    let d = x.len();
    let mut rng = RandomStream::new(7);
    let specs = [
        CompressorSpec::sign(d)?,
        CompressorSpec::grouped_sign(d, 2)?,
        CompressorSpec::top_k(2, d)?,
        CompressorSpec::StochasticSignBit,
        CompressorSpec::rand_k(2, d)?,
        CompressorSpec::Identity,
    ];
    println!("x = {x:?}");
    for spec in &specs {
        let c = spec.compress(&x, &mut rng)?;
        let err = linalg::norm_sq(&linalg::sub(&c, &x)) / linalg::norm_sq(&x);
        let constant = match spec.delta() {
            Ok(delta) => format!("delta = {delta:.3}"),
            Err(_) => format!("omega = {:.3}", spec.variance_factor(d)?),
        };
        println!("{:<16} {constant:<14} |C(x)-x|^2/|x|^2 = {err:.3}  C(x) = {c:?}", spec.name());
    }

    // error ratio of an aggregate: compression errors partly cancel across devices
    let xs: Vec<Vec<f64>> = (0..10).map(|_| rng.normal_vector(d, 0.0, 1.0)).collect();
    let top2 = CompressorSpec::top_k(2, d)?;
    let outs: Vec<Vec<f64>> = xs.iter().map(|x| top2.compress(x, &mut rng)).collect::<Result<_, _>>()?;
    println!("aggregate error ratio for top_k over 10 vectors: {:.3}", qa_ratio(&xs, &outs)?);
    Ok(())
}
