//! Shell census and the ratio of the geometric measure to the equilibrium
//! state on each omega-shell, with the fitted sandwich constants.
//!
//!     cargo run --release --example h3_probe

use birkhoff::pressure::bowen_dimension;
use birkhoff::tail::{count_bounds, h3_ratio_probe, k_scaling, shell_census};
use birkhoff::SystemSpec;

fn main() -> birkhoff::Result<()> {
    let system = SystemSpec::new("mp_induced").with("lambda", 2.0).build()?;
    let b_star = bowen_dimension(&system, 1e-14)?.b_star;

    let census = shell_census(&system, 60, &[0.05, 0.1])?;
    println!("total measure {:.12}", census.total_measure);
    for (eps, c) in &census.growth_constants {
        println!("count(n) <= {c:.4} e^(eps omega(n)) for eps = {eps}");
    }
    let cb = count_bounds(&system, &census)?;
    println!(
        "branch counts between {:.3} and {:.3} times omega' omega^(c-1), c in [{:.3}, {:.3}]",
        cb.lower_constant, cb.upper_constant, cb.c1, cb.c2
    );
    println!("K-scaling constant {:.4}", k_scaling(&system, 60)?);

    for (q, b) in [(0.0, b_star), (0.01, 0.98 * b_star)] {
        let r = h3_ratio_probe(&system, q, b, 60)?;
        println!("\nq={q} b={b:.4}: c1={:.4} c2={:.4}", r.c1, r.c2);
        for row in r.rows.iter().step_by(10) {
            println!(
                "  shell {:>3}  measure {:.3e}  ratio {:.4e}  in [{:.3e}, {:.3e}]",
                row.stats.n, row.stats.measure, row.ratio, row.lower_bound, row.upper_bound
            );
        }
    }
    Ok(())
}
