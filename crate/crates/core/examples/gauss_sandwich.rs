//! Rigorous-style bounds on the pressure and on the Bowen dimension of the
//! Gauss map, which is not locally constant on cylinders.
//!
//!     cargo run --release --example gauss_sandwich

use std::time::Instant;

use birkhoff::pressure::{bowen_sandwich, pressure_sandwich_with, SandwichConfig, SandwichMethod};
use birkhoff::{Potential, SystemSpec};

fn main() -> birkhoff::Result<()> {
    let gauss = SystemSpec::new("gauss").build()?;
    let pot = Potential::new(0.0, 1.0);
    for method in [SandwichMethod::Cylinder, SandwichMethod::Ratio] {
        let e = pressure_sandwich_with(&gauss, &pot, &SandwichConfig::new(2, 100).method(method))?;
        println!("P(-log|F'|) via {method:?}: [{:+.6}, {:+.6}]", e.lower, e.upper);
    }

    println!("\nb* sandwich at depth 2");
    for n in [25, 50, 100, 200] {
        let t = Instant::now();
        let d = bowen_sandwich(&gauss, &SandwichConfig::new(2, n))?;
        println!(
            "  N={n:<4} [{:.6}, {:.6}]  width {:.4}  ({:.2?})",
            d.lower,
            d.upper,
            d.width(),
            t.elapsed()
        );
    }
    Ok(())
}
