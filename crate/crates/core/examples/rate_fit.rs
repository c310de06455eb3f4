//! How fast `b(alpha)` approaches `b*`: fitted exponents against
//! `beta/(1-beta)`, the comparison with `int_alpha^inf q`, and the trend of
//! `(b* - b(alpha)) alpha^x`.
//!
//!     cargo run --release --example rate_fit

use birkhoff::rate::{fit_rate_exponent, q_integral_check, scaled_limit_probe};
use birkhoff::spectrum::{geometric_grid, solve_curve};
use birkhoff::SystemSpec;

fn main() -> birkhoff::Result<()> {
    let grid = geometric_grid(1e2, 1e6, 33)?;
    for spec in [
        SystemSpec::new("lueroth").with("r", 2.0),
        SystemSpec::new("linear_poly").with("r", 2.0).with("s", 1.0),
        SystemSpec::new("mp_induced").with("lambda", 2.0),
        SystemSpec::new("lueroth").with("r", 3.0),
    ] {
        let system = spec.build()?;
        let beta = system.tail_model().map(|m| m.beta);
        let curve = solve_curve(&system, &grid, 1e-9)?;
        let fit = fit_rate_exponent(&curve, curve.b_star, Some((1e2, 1e6)), beta)?;
        let table = q_integral_check(&curve, curve.b_star)?;
        println!("{} {:?}", spec.name, spec.params);
        println!(
            "  gap exponent {:.4} +- {:.1e} (theory {:.4}), q exponent {:.4} (theory {:.4})",
            fit.fitted_exponent, fit.stderr, fit.theoretical, fit.q_exponent_fit, fit.q_theoretical
        );
        println!("  (b* - b) / int q within [{:.4}, {:.4}]", table.r_min, table.r_max);
        let th = fit.theoretical;
        for probe in scaled_limit_probe(&curve, curve.b_star, &[0.0, 0.5 * th, th, 1.5 * th], Some((1e2, 1e6)))? {
            println!(
                "  x = {:.3}: {} (last/first third {:.3})",
                probe.x,
                probe.trend.as_str(),
                probe.trend_ratio
            );
        }
    }
    Ok(())
}
