//! The invariant suite behind `birkhoff verify`: one named pass/fail line per
//! property of the system, its pressure, its spectrum and the rate fits.

use std::fmt::Write as _;

use log::info;

use super::run::{fmt, solve, spectrum_csv};
use super::{Outcome, RunConfig};
use crate::error::{Error, Result};
use crate::pressure::{
    bowen_dimension, cylinder_derivative_bounds, finiteness_abscissa, finiteness_check, gibbs_weights,
    letter_moments, pressure_gradient, pressure_sandwich_with, Potential, SandwichConfig,
};
use crate::rate::{fit_rate_exponent, q_integral_check, scaled_limit_probe, Trend};
use crate::spectrum::{
    check_derivative_identity, dp_tolerance, geometric_grid, q_scan_minimum, solve_curve, solve_curve_with, SolverConfig,
    SpectrumCurve,
};
use crate::systems::descriptor::SystemSpec;
use crate::systems::System;
use crate::tail::{
    count_bounds, ell_profile, DEFAULT_FIT_SHELLS, estimate_tail_exponent, h3_ratio_probe, k_scaling, shell_census,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this system.
    Skip,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skip => "skip",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

/// Letters checked for the partition and expansion properties.
const PARTITION_LETTERS: u64 = 2000;
/// Shells for the census-based checks.
const CENSUS_SHELLS: u64 = 200;

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn run(&mut self, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (status, detail) = match f() {
            Ok((true, d)) => (Status::Pass, d),
            Ok((false, d)) => (Status::Fail, d),
            Err(e) => (Status::Fail, format!("error=\"{e}\"")),
        };
        info!("check={name} status={}", status.as_str());
        self.checks.push(Check { name, status, detail });
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.checks.push(Check {
            name,
            status: Status::Skip,
            detail: why.to_string(),
        });
    }
}

fn log_z(system: &System, q: f64, b: f64) -> Result<f64> {
    Ok(letter_moments(system, q, b)?.log_z)
}

fn second_differences(v: &[f64]) -> f64 {
    v.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Run every check on `system`. Curves use the grid and tolerance of `cfg`.
pub fn verify_system(system: &System, cfg: &RunConfig) -> Vec<Check> {
    let mut s = Suite { checks: Vec::new() };
    system_checks(&mut s, system);
    let b_star = match bowen_dimension(system, 1e-14) {
        Ok(r) => r.b_star,
        Err(e) => {
            s.run("bowen_root", || Err(e));
            return s.checks;
        }
    };
    pressure_checks(&mut s, system, b_star);
    tail_checks(&mut s, system, b_star);
    match solve(cfg, system) {
        Ok(curve) => {
            spectrum_checks(&mut s, system, cfg, &curve);
            rate_checks(&mut s, system, &curve);
        }
        Err(e) => s.run("curve_converged", || Err(e)),
    }
    determinism_check(&mut s, system, cfg);
    s.checks
}

fn system_checks(s: &mut Suite, system: &System) {
    s.run("descriptor_roundtrip", || {
        let spec = SystemSpec {
            name: system.name.clone(),
            params: system.params.clone(),
        };
        let back: SystemSpec = spec.to_string().parse()?;
        let rebuilt = back.build()?;
        Ok((back == spec && rebuilt.params == system.params, format!("descriptor={:?}", spec.to_string())))
    });

    let letters = system
        .shell_limit()
        .map_or(PARTITION_LETTERS, |l| system.letters_through_shell(l).min(PARTITION_LETTERS));
    s.run("partition", || {
        let (i0, i1) = system.map.image;
        let mut iv: Vec<(f64, f64)> = (1..=letters)
            .map(|a| system.branch(a).map(|b| b.interval))
            .collect::<Result<_>>()?;
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let overlap = iv.windows(2).map(|w| w[0].1 - w[1].0).fold(f64::NEG_INFINITY, f64::max);
        let inside = iv.iter().all(|&(a, b)| a >= i0 - 1e-15 && b <= i1 + 1e-15 && a < b);
        let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
        Ok((
            overlap <= 1e-15 && inside && total <= (i1 - i0) * (1.0 + 1e-12),
            format!("letters={letters} max_overlap={overlap:e} total_length={}", fmt(total)),
        ))
    });

    s.run("expansion", || {
        let e = system.map.expansion;
        let depth = e.iterate.max(1) as usize;
        let top = letters.min(40);
        let mut worst = f64::INFINITY;
        let mut word = vec![1u64; depth];
        let (i0, i1) = system.map.image;
        loop {
            // |(F^n)'| sampled along the cylinder, endpoints included
            for j in 0..=32 {
                let mut y = i0 + (i1 - i0) * j as f64 / 32.0;
                let mut acc = 0.0;
                for &a in word.iter().rev() {
                    let (x, l) = system.map.inverse_branch(a, y)?;
                    acc += l;
                    y = x;
                }
                worst = worst.min(acc);
            }
            // odometer over {1..top}^depth
            let mut i = 0;
            while i < depth && word[i] == top {
                word[i] = 1;
                i += 1;
            }
            if i == depth {
                break;
            }
            word[i] += 1;
        }
        let bound = e.constant.ln();
        Ok((
            worst > 0.0 && worst >= bound - 1e-12,
            format!("iterate={depth} min_log_derivative={} declared_log_A={}", fmt(worst), fmt(bound)),
        ))
    });

    s.run("coding_consistency", || {
        let top = letters.min(12);
        let mut worst = 0.0f64;
        for a in 1..=top {
            for b in 1..=top {
                for word in [vec![a, b], vec![a, b, 1 + (a * b) % top]] {
                    let (lo, hi) = cylinder_derivative_bounds(&system.map, &word)?;
                    let mut slo = 0.0;
                    let mut shi = 0.0;
                    for &l in &word {
                        let (x, y) = system.branch(l)?.derivative.log_bounds();
                        slo += x;
                        shi += y;
                    }
                    worst = worst.max(slo - lo).max(hi - shi);
                }
            }
        }
        Ok((worst <= 1e-10, format!("max_excess={worst:e}")))
    });

    s.run("non_integrability", || {
        if system.shell_limit().is_some() {
            return Ok((true, "finite alphabet".into()));
        }
        let mut partial = Vec::new();
        let mut acc = 0.0;
        // tau grows exponentially on exponential scales; stay in range
        let marks = match system.scale().map(|s| s.kind) {
            Some(crate::systems::ScaleKind::Exponential(_)) => [25u64, 50, 100],
            _ => [100u64, 1000, 10000],
        };
        for n in 1..=marks[2] {
            acc += system.observable.shell_value(n) * system.shell_measure(n)?;
            if marks.contains(&n) {
                partial.push(acc);
            }
        }
        let ratio = (partial[2] - partial[1]) / (partial[1] - partial[0]);
        Ok((
            partial[0] < partial[1] && partial[1] < partial[2] && ratio >= 0.5,
            format!(
                "S({})={} S({})={} S({})={} increment_ratio={}",
                marks[0],
                fmt(partial[0]),
                marks[1],
                fmt(partial[1]),
                marks[2],
                fmt(partial[2]),
                fmt(ratio)
            ),
        ))
    });
}

fn pressure_checks(s: &mut Suite, system: &System, b_star: f64) {
    s.run("bowen_root", || {
        let p = log_z(system, 0.0, b_star)?;
        let known = system.known_b_star().map_or(0.0, |k| (k - b_star).abs());
        Ok((
            p.abs() <= 1e-10 && b_star > 0.0 && b_star <= 1.0 + 1e-12 && known <= 1e-10,
            format!("b_star={} p={p:e} known_gap={known:e}", fmt(b_star)),
        ))
    });

    s.run("zero_pressure_at_dimension_one", || {
        let pot = Potential::new(0.0, 1.0);
        if system.is_constant_slope() {
            let p = log_z(system, 0.0, 1.0)?;
            Ok((p.abs() <= 1e-12, format!("p={p:e}")))
        } else {
            let e = pressure_sandwich_with(system, &pot, &SandwichConfig::new(1, 50))?;
            Ok((e.contains(0.0), format!("sandwich=[{}, {}]", fmt(e.lower), fmt(e.upper))))
        }
    });

    s.run("convexity", || {
        let bs: Vec<f64> = (0..9).map(|i| b_star * (0.8 + 0.05 * i as f64)).collect();
        let pb: Vec<f64> = bs.iter().map(|&b| log_z(system, 0.05, b)).collect::<Result<_>>()?;
        let qs: Vec<f64> = (0..9).map(|i| 0.01 + 0.02 * i as f64).collect();
        let pq: Vec<f64> = qs.iter().map(|&q| log_z(system, q, b_star)).collect::<Result<_>>()?;
        let (db, dq) = (second_differences(&pb), second_differences(&pq));
        Ok((db >= -1e-9 && dq >= -1e-9, format!("min_d2_b={db:e} min_d2_q={dq:e}")))
    });

    s.run("truncation_monotone", || {
        let ps: Vec<f64> = [16u64, 32, 64, 128, 256]
            .iter()
            .map(|&n| log_z(&system.truncated(n), 0.0, b_star))
            .collect::<Result<_>>()?;
        let ok = ps.windows(2).all(|w| w[1] >= w[0] - 1e-15);
        let mut detail = String::from("p_N=");
        for p in &ps {
            write!(detail, "{},", fmt(*p)).unwrap();
        }
        if !system.is_constant_slope() {
            let pot = Potential::new(0.0, b_star);
            let lows: Vec<f64> = [(1, 16), (1, 32), (1, 64), (2, 16)]
                .iter()
                .map(|&(d, n)| pressure_sandwich_with(system, &pot, &SandwichConfig::new(d, n)).map(|e| e.lower))
                .collect::<Result<_>>()?;
            let mono = lows[0] <= lows[1] && lows[1] <= lows[2] && lows[0] <= lows[3];
            write!(detail, " sandwich_lower={},{},{} depth2={}", fmt(lows[0]), fmt(lows[1]), fmt(lows[2]), fmt(lows[3]))
                .unwrap();
            return Ok((ok && mono, detail));
        }
        Ok((ok, detail))
    });

    s.run("equilibrium_identity", || {
        let pot = Potential::new(0.05, b_star);
        let g = gibbs_weights(system, &pot, 64)?;
        let lhs = g.entropy - pot.q * g.mean_tau - pot.b * g.lyapunov;
        let err = (lhs - g.pressure).abs();
        Ok((err <= 1e-8, format!("h+int_psi-P={err:e}")))
    });

    s.run("gradient_fd", || {
        let mut worst = 0.0f64;
        for &(q, b) in &[(0.05, b_star), (0.2, 0.9 * b_star), (0.01, 1.1 * b_star)] {
            let g = pressure_gradient(system, &Potential::new(q, b))?;
            let h = 1e-5;
            let fq = (log_z(system, q + h * q, b)? - log_z(system, q - h * q, b)?) / (2.0 * h * q);
            let fb = (log_z(system, q, b + h)? - log_z(system, q, b - h)?) / (2.0 * h);
            worst = worst.max(rel(fq, g.d_q)).max(rel(fb, g.d_b));
        }
        Ok((worst < 1e-5, format!("max_rel_err={worst:e}")))
    });

    s.run("domain_boundary", || {
        let a0 = finiteness_abscissa(system);
        let fin = |q: f64, b: f64| finiteness_check(system, &Potential::new(q, b)).finite;
        if !a0.is_finite() {
            return Ok((fin(0.0, 0.0) && fin(-1.0, b_star), "finite alphabet: finite everywhere".into()));
        }
        let ok = fin(0.0, a0 + 1e-3) && !fin(0.0, a0 - 1e-3) && fin(1e-3, 0.5 * b_star) && !fin(-1e-3, b_star);
        Ok((ok, format!("abscissa={} b_star={}", fmt(a0), fmt(b_star))))
    });
}

fn tail_checks(s: &mut Suite, system: &System, b_star: f64) {
    let Some(model) = system.tail_model() else {
        for name in [
            "shell_measure_sum",
            "k_scaling",
            "count_bounds",
            "ell_bounded",
            "tail_exponent",
            "h3_sandwich",
        ] {
            s.skip(name, "no tail model");
        }
        return;
    };
    let census = shell_census(system, CENSUS_SHELLS, &[0.1]);
    s.run("shell_measure_sum", || {
        let c = census.as_ref().map_err(clone_err)?;
        let d = (c.total_measure - 1.0).abs();
        Ok((d <= 1e-8, format!("shells={} |total-1|={d:e}", c.shells.len())))
    });
    s.run("k_scaling", || {
        let k = k_scaling(system, 50)?;
        let ok = if system.is_constant_slope() { k == 1.0 } else { k.is_finite() && k >= 1.0 };
        Ok((ok, format!("K={}", fmt(k))))
    });
    if matches!(system.scale().map(|s| s.kind), Some(crate::systems::ScaleKind::Polynomial(_))) {
        s.run("count_bounds", || {
            let cb = count_bounds(system, census.as_ref().map_err(clone_err)?)?;
            let ok = cb.lower_constant > 0.0 && cb.upper_constant.is_finite() && cb.lower_constant <= cb.upper_constant;
            Ok((
                ok,
                format!(
                    "c1={} c2={} constants=[{}, {}] drift={}",
                    fmt(cb.c1),
                    fmt(cb.c2),
                    fmt(cb.lower_constant),
                    fmt(cb.upper_constant),
                    fmt(cb.drift)
                ),
            ))
        });
    } else {
        s.skip("count_bounds", "scale function is not polynomial");
    }
    s.run("ell_bounded", || {
        let prof = ell_profile(system, census.as_ref().map_err(clone_err)?)?;
        let (lo, hi) = model.ell_bound;
        let bad = prof
            .iter()
            .find(|(_, l)| !(*l >= lo * (1.0 - 1e-12) && *l <= hi * (1.0 + 1e-12)));
        Ok(match bad {
            None => (true, format!("bounds=[{}, {}]", fmt(lo), fmt(hi))),
            Some((n, l)) => (false, format!("shell={n} ell={}", fmt(*l))),
        })
    });
    s.run("tail_exponent", || {
        let f = estimate_tail_exponent(system, DEFAULT_FIT_SHELLS)?;
        let d = (f.beta_hat - model.beta).abs();
        Ok((d <= 0.05, format!("beta_hat={} beta={}", fmt(f.beta_hat), fmt(model.beta))))
    });
    s.run("h3_sandwich", || {
        let r = h3_ratio_probe(system, 0.0, b_star, CENSUS_SHELLS)?;
        Ok((true, format!("c1={} c2={}", fmt(r.c1), fmt(r.c2))))
    });
}

// census errors are reused by several checks
fn clone_err(e: &Error) -> Error {
    Error::Regression(e.to_string())
}

fn spectrum_checks(s: &mut Suite, system: &System, cfg: &RunConfig, curve: &SpectrumCurve) {
    let tol = cfg.tolerance;
    let pts = &curve.points;
    s.run("curve_converged", || {
        Ok((
            curve.failures.is_empty() && pts.len() == curve.grid.len(),
            format!("solved={} failed={}", pts.len(), curve.failures.len()),
        ))
    });
    s.run("stationarity", || {
        let wp = pts.iter().map(|p| p.residual_p).fold(0.0, f64::max);
        let wd = pts.iter().map(|p| p.residual_dp).fold(0.0, f64::max);
        let ok = pts
            .iter()
            .all(|p| p.residual_p <= tol && p.residual_dp <= dp_tolerance(tol, p.alpha));
        Ok((ok, format!("max_p={wp:e} max_dpdq={wd:e}")))
    });
    s.run("q_scan_minimum", || {
        let mut worst = f64::INFINITY;
        for p in pts.iter().step_by((pts.len() / 6).max(1)) {
            let (m, _) = q_scan_minimum(system, p, &[0.5, 0.8, 0.9, 0.99, 1.01, 1.1, 1.25, 2.0])?;
            worst = worst.min(m);
        }
        Ok((worst >= -tol, format!("min_p={worst:e}")))
    });
    s.run("b_increasing_below_b_star", || {
        let inc = pts.windows(2).all(|w| w[1].b > w[0].b);
        let below = pts.iter().all(|p| p.b > 0.0 && p.b < curve.b_star && p.q > 0.0);
        let q_dec = pts.windows(2).all(|w| w[1].q < w[0].q);
        let last_gap = curve.b_star - pts.last().map_or(0.0, |p| p.b);
        let first_gap = curve.b_star - pts.first().map_or(0.0, |p| p.b);
        Ok((
            inc && below && q_dec && last_gap < first_gap,
            format!("first_gap={} last_gap={}", fmt(first_gap), fmt(last_gap)),
        ))
    });
    s.run("entropy_identity", || {
        let w = pts
            .iter()
            .map(|p| (p.entropy - p.b * p.lyapunov).abs())
            .fold(0.0, f64::max);
        Ok((w <= 1e-8, format!("max|h-b*lambda|={w:e}")))
    });
    s.run("lyapunov_bounded", || {
        let hi = cfg.alpha_grid.hi;
        let in_decade = |c: &SpectrumCurve| {
            c.points
                .iter()
                .filter(|p| p.alpha >= hi / 10.0 * (1.0 - 1e-12))
                .map(|p| p.lyapunov)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let coarse = in_decade(curve);
        let count = pts.iter().filter(|p| p.alpha >= hi / 10.0 * (1.0 - 1e-12)).count().max(2);
        let fine_grid = geometric_grid(hi / 10.0, hi, 2 * count - 1)?;
        let fine = in_decade(&solve_curve(system, &fine_grid, tol)?);
        Ok((
            coarse.is_finite() && rel(coarse, fine) < 1e-2,
            format!("max_lambda={} refined={}", fmt(coarse), fmt(fine)),
        ))
    });
    s.run("derivative_identity", || {
        let c = cfg.alpha_grid.lo;
        let local = solve_curve(system, &geometric_grid(0.95 * c, 1.05 * c, 9)?, tol.min(1e-10))?;
        let e = check_derivative_identity(&local)?;
        Ok((e < 1e-3, format!("alpha~{} max_rel_err={e:e}", fmt(c))))
    });
}

fn rate_checks(s: &mut Suite, system: &System, curve: &SpectrumCurve) {
    let b_star = curve.b_star;
    let beta = system.tail_model().map(|m| m.beta);
    let fit = fit_rate_exponent(curve, b_star, None, beta);
    let fit = match fit {
        Ok(f) => f,
        Err(e) => {
            s.run("rate_fit", || Err(e));
            return;
        }
    };
    if let Some(beta) = beta {
        s.run("rate_exponent", || {
            Ok((
                (fit.fitted_exponent - fit.theoretical).abs() <= 0.15,
                format!("fitted={} theory={}", fmt(fit.fitted_exponent), fmt(fit.theoretical)),
            ))
        });
        s.run("q_exponent", || {
            Ok((
                (fit.q_exponent_fit - fit.q_theoretical).abs() <= 0.15,
                format!("fitted={} theory={}", fmt(fit.q_exponent_fit), fmt(fit.q_theoretical)),
            ))
        });
        s.run("tail_rate_coherence", || {
            let t = estimate_tail_exponent(system, DEFAULT_FIT_SHELLS)?;
            let d = (t.beta_hat - fit.beta_rate).abs();
            Ok((
                d <= 0.1,
                format!("beta_tail={} beta_rate={} beta={}", fmt(t.beta_hat), fmt(fit.beta_rate), fmt(beta)),
            ))
        });
    } else {
        for n in ["rate_exponent", "q_exponent", "tail_rate_coherence"] {
            s.skip(n, "no tail model");
        }
    }
    s.run("fit_consistency", || {
        let predicted = -(1.0 + fit.fitted_exponent);
        let sigma = fit.stderr.hypot(fit.q_stderr);
        let d = (fit.q_exponent_fit - predicted).abs();
        Ok((
            d <= 3.0 * sigma + 0.02,
            format!("q_fit={} predicted={} sigma={sigma:e}", fmt(fit.q_exponent_fit), fmt(predicted)),
        ))
    });
    s.run("q_integral_band", || {
        let t = q_integral_check(curve, b_star)?;
        let lo = fit.window.0 * (1.0 - 1e-12);
        let tail: Vec<f64> = t.rows.iter().filter(|r| r.alpha >= lo).map(|r| r.ratio).collect();
        let positive = t.rows.iter().all(|r| r.ratio > 0.0);
        let mn = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((positive && mx / mn <= 3.0, format!("band=[{}, {}]", fmt(mn), fmt(mx))))
    });
    let threshold = if fit.theoretical.is_finite() { fit.theoretical } else { fit.fitted_exponent };
    s.run("probe_x0_decreasing", || {
        let r = scaled_limit_probe(curve, b_star, &[0.0], None)?;
        let dec = r[0].products.windows(2).all(|w| w[1].1 < w[0].1);
        Ok((dec && r[0].trend == Trend::Decaying, format!("trend={}", r[0].trend.as_str())))
    });
    s.run("probe_orientation", || {
        let xs = [0.5 * threshold, 1.5 * threshold];
        let r = scaled_limit_probe(curve, b_star, &xs, None)?;
        Ok((
            r[0].trend == Trend::Decaying && r[1].trend == Trend::Growing,
            format!(
                "x={}:{} x={}:{}",
                fmt(xs[0]),
                r[0].trend.as_str(),
                fmt(xs[1]),
                r[1].trend.as_str()
            ),
        ))
    });
}

fn determinism_check(s: &mut Suite, system: &System, cfg: &RunConfig) {
    s.run("csv_determinism", || {
        let g = cfg.alpha_grid;
        let grid = geometric_grid(g.lo, g.lo * 10.0, 6)?;
        let solver = SolverConfig::new(cfg.tolerance);
        let mut out = Vec::new();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::config("workers", e.to_string()))?;
            let c = pool.install(|| solve_curve_with(system, &grid, &solver))?;
            out.push(spectrum_csv(&c)?);
        }
        Ok((out[0] == out[1], format!("bytes={}", out[0].len())))
    });
}

pub(crate) fn run(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let checks = verify_system(system, cfg);
    let mut text = String::new();
    for c in &checks {
        writeln!(text, "{} {} {}", c.status.as_str(), c.name, c.detail).unwrap();
    }
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    writeln!(text, "# checks={} failed={failed}", checks.len()).unwrap();
    match &cfg.output_path {
        Some(p) => super::run::write_file(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(if failed == 0 { Outcome::Ok } else { Outcome::Partial })
}
