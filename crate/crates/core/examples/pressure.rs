//! Pressure of `-q tau - b log|F'|` on locally constant systems, the Gibbs
//! weights of the first letters and the pressure gradient.
//!
//!     cargo run --release --example pressure

use birkhoff::pressure::{finiteness_abscissa, gibbs_weights, pressure_gradient, pressure_locally_constant};
use birkhoff::{Potential, SystemSpec};

fn main() -> birkhoff::Result<()> {
    let system = SystemSpec::new("lueroth").with("r", 2.0).build()?;
    println!("finite for q = 0 and b > {}", finiteness_abscissa(&system));

    for (q, b) in [(0.0, 1.0), (0.0, 0.8), (0.01, 0.9), (0.1, 0.5)] {
        let pot = Potential::new(q, b);
        let est = pressure_locally_constant(&system, &pot, 1e-12)?;
        let g = pressure_gradient(&system, &pot)?;
        println!(
            "q={q:<5} b={b:<4} P={:+.12}  [{:+.3e}, {:+.3e}]  dP/dq={:+.6}  dP/db={:+.6}",
            est.value,
            est.lower - est.value,
            est.upper - est.value,
            g.d_q,
            g.d_b
        );
    }

    let gibbs = gibbs_weights(&system, &Potential::new(0.05, 0.9), 6)?;
    println!("\nGibbs state at q=0.05, b=0.9");
    for (a, w) in gibbs.letter_weights.iter().enumerate() {
        println!("  mu([{}]) = {w:.10}", a + 1);
    }
    println!(
        "  h = {:.10}  lambda = {:.10}  E tau = {:.10}  Var tau = {:.6}",
        gibbs.entropy, gibbs.lyapunov, gibbs.mean_tau, gibbs.var_tau
    );
    Ok(())
}
