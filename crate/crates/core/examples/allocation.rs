//! Draw a random redundant allocation, inspect its balance statistics and
//! round-trip it through the text format.

use coco_ef::{AllocationMatrix, RandomStream};

fn main() -> coco_ef::Result<()> {
    let (devices, subsets, d) = (8, 6, 3);
    let alloc = AllocationMatrix::uniform_random(devices, subsets, d, &mut RandomStream::new(11))?;
    print!("{}", alloc.to_text());

    let stats = alloc.pairwise_balance_stats();
    println!("replication per subset: {:?}", stats.counts);
    println!(
        "pairwise overlap target d^2/N = {:.3}, worst deviation {:.3}",
        (d * d) as f64 / devices as f64,
        stats.max_deviation
    );
    println!("vartheta = {:.4}", alloc.vartheta());
    for i in 0..devices {
        println!("device {i}: subsets {:?}", alloc.subsets_of(i));
    }

    let back = AllocationMatrix::from_text(&alloc.to_text())?;
    assert_eq!(back, alloc);
    Ok(())
}
