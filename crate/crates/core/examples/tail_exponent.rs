//! Estimate `beta` in `mu(tau > t) ~ t^{-beta}` by regression on `t = 2^k`.
//!
//!     cargo run --release --example tail_exponent

use birkhoff::tail::{estimate_tail_exponent, DEFAULT_FIT_SHELLS};
use birkhoff::SystemSpec;

fn main() -> birkhoff::Result<()> {
    let cases = [
        SystemSpec::new("lueroth").with("r", 2.0),
        SystemSpec::new("lueroth").with("r", 3.0),
        SystemSpec::new("gauss").with("r", 2.0),
        SystemSpec::new("gauss").with("r", 3.0),
        SystemSpec::new("linear_poly").with("r", 2.0).with("s", 1.0),
        SystemSpec::new("linear_poly").with("r", 3.0).with("s", 1.0),
        SystemSpec::new("linear_exp"),
        SystemSpec::new("mp_induced").with("lambda", 2.0),
        SystemSpec::new("mp_induced").with("lambda", 3.0),
    ];
    println!("{:<28} {:>8} {:>10} {:>10}", "system", "beta", "beta_hat", "stderr");
    for spec in cases {
        let system = spec.build()?;
        let beta = system.tail_model().map_or(f64::NAN, |m| m.beta);
        let fit = estimate_tail_exponent(&system, DEFAULT_FIT_SHELLS)?;
        let label = format!("{} {:?}", spec.name, spec.params);
        println!("{label:<28} {beta:>8.4} {:>10.5} {:>10.1e}", fit.beta_hat, fit.stderr);
    }
    Ok(())
}
