//! The Birkhoff spectrum `alpha -> b(alpha)` of the Lüroth system with
//! `tau = n^2`, solved by Newton continuation on a geometric grid.
//!
//!     cargo run --release --example spectrum_curve

use birkhoff::spectrum::{check_derivative_identity, geometric_grid, solve_curve};
use birkhoff::SystemSpec;

fn main() -> birkhoff::Result<()> {
    let system = SystemSpec::new("lueroth").with("r", 2.0).build()?;
    let grid = geometric_grid(10.0, 1e6, 21)?;
    let curve = solve_curve(&system, &grid, 1e-10)?;
    println!("b* = {}", curve.b_star);
    println!("{:>12} {:>14} {:>18} {:>10} {:>6}", "alpha", "q", "b", "lambda", "iters");
    for p in &curve.points {
        println!(
            "{:>12.4e} {:>14.6e} {:>18.15} {:>10.6} {:>6}",
            p.alpha, p.q, p.b, p.lyapunov, p.newton_iters
        );
    }
    for (alpha, why) in &curve.failures {
        println!("failed at {alpha}: {why}");
    }

    // b'(alpha) = q(alpha) / lambda(alpha) on a fine local grid
    let local = solve_curve(&system, &geometric_grid(95.0, 105.0, 9)?, 1e-11)?;
    println!("\nmax relative error of b' against q/lambda near 100: {:.2e}", check_derivative_identity(&local)?);
    Ok(())
}
