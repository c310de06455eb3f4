//! Bowen dimension of a finite Moran set and of every builtin system.
//!
//!     cargo run --release --example bowen_dimension

use birkhoff::pressure::bowen_dimension;
use birkhoff::systems::BUILTIN_NAMES;
use birkhoff::{SystemSpec, System};

fn main() -> birkhoff::Result<()> {
    // two contractions 1/2 and 1/4: 2^{-b} + 4^{-b} = 1
    let moran = System::finite_linear("moran", vec![0.5, 0.25], vec![1.0, 2.0])?;
    let root = bowen_dimension(&moran, 1e-14)?;
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    println!(
        "moran      b* = {:.15}  log2(phi) = {:.15}  iterations = {}",
        root.b_star,
        golden.log2(),
        root.iterations
    );

    for name in BUILTIN_NAMES {
        let system = SystemSpec::new(name).build()?;
        let r = bowen_dimension(&system, 1e-14)?;
        println!("{name:<12} b* = {:.15}  |p(0,b*)| = {:.1e}", r.b_star, r.residual.abs());
    }
    Ok(())
}
