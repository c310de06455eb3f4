//! Command implementations. Every float goes out as `{:.16e}` so that files
//! round-trip and compare byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::{info, warn};

use super::{plot, verify, CommandKind, Outcome, RunConfig, DEFAULT_SANDWICH_TRUNCATION};
use crate::error::{Error, Result};
use crate::pressure::{
    bowen_dimension, bowen_sandwich, pressure_locally_constant, pressure_sandwich_with, Potential,
    SandwichConfig,
};
use crate::rate::{fit_rate_exponent, q_integral_check, scaled_limit_probe};
use crate::spectrum::{geometric_grid, solve_curve_with, SolverConfig, SpectrumCurve};
use crate::systems::System;
use crate::tail::{estimate_tail_exponent, h3_ratio_probe, DEFAULT_FIT_SHELLS};

pub const SPECTRUM_HEADER: [&str; 9] = [
    "alpha",
    "q",
    "b",
    "lyapunov",
    "entropy",
    "residual_p",
    "residual_dpdq",
    "truncation_N",
    "iters",
];

pub const TAIL_HEADER: [&str; 8] = [
    "shell_n",
    "omega_lo",
    "omega_hi",
    "count",
    "measure",
    "ratio",
    "lower_bound",
    "upper_bound",
];

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    let system = cfg.system.build()?;
    info!(
        "command={} system={} params={:?} workers={}",
        cfg.command.as_str(),
        system.name,
        system.params,
        cfg.workers
    );
    if cfg.plot_path.is_some() && !matches!(cfg.command, CommandKind::Spectrum | CommandKind::Rate) {
        warn!("plot=skipped reason=\"nothing to draw for {}\"", cfg.command.as_str());
    }
    match cfg.command {
        CommandKind::Pressure => pressure(cfg, &system),
        CommandKind::Dimension => dimension(cfg, &system),
        CommandKind::Tail => tail(cfg, &system),
        CommandKind::Spectrum => spectrum(cfg, &system),
        CommandKind::Rate => rate(cfg, &system),
        CommandKind::Verify => verify::run(cfg, &system),
    }
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<()> {
    match &cfg.output_path {
        Some(path) => {
            write_file(path, bytes)?;
            info!("wrote={}", path.display());
            Ok(())
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Output {
        path: "<csv>".into(),
        detail: e.to_string(),
    };
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Output {
        path: "<csv>".into(),
        detail: e.to_string(),
    })
}

fn print_summary(lines: &[(String, String)]) {
    let mut out = std::io::stdout().lock();
    for (k, v) in lines {
        let _ = writeln!(out, "{k}={v}");
    }
}

fn pressure(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let q = cfg.q.unwrap_or(0.0);
    let b = cfg.b.unwrap_or(1.0);
    let pot = Potential::new(q, b);
    let est = if system.is_constant_slope() {
        pressure_locally_constant(system, &pot, cfg.tolerance)?
    } else {
        let n = cfg.truncation.unwrap_or(DEFAULT_SANDWICH_TRUNCATION);
        pressure_sandwich_with(system, &pot, &SandwichConfig::new(cfg.depth, n))?
    };
    let row = vec![
        fmt(q),
        fmt(b),
        fmt(est.lower),
        fmt(est.upper),
        fmt(est.value),
        est.truncation_n.to_string(),
        est.depth_n.to_string(),
    ];
    if cfg.output_path.is_some() {
        emit(cfg, &csv_bytes(&["q", "b", "lower", "upper", "value", "truncation_N", "depth"], &[row])?)?;
    }
    print_summary(&[
        ("pressure".into(), fmt(est.value)),
        ("lower".into(), fmt(est.lower)),
        ("upper".into(), fmt(est.upper)),
        ("truncation_N".into(), est.truncation_n.to_string()),
        ("depth".into(), est.depth_n.to_string()),
    ]);
    Ok(Outcome::Ok)
}

fn dimension(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let n = cfg.truncation.unwrap_or(DEFAULT_SANDWICH_TRUNCATION);
    let d = bowen_sandwich(system, &SandwichConfig::new(cfg.depth, n))?;
    if cfg.output_path.is_some() {
        let row = vec![
            fmt(d.lower),
            fmt(d.upper),
            fmt(d.value),
            d.depth.to_string(),
            d.truncation.to_string(),
        ];
        emit(cfg, &csv_bytes(&["lower", "upper", "value", "depth", "truncation_N"], &[row])?)?;
    }
    print_summary(&[
        ("b_star".into(), fmt(d.value)),
        ("lower".into(), fmt(d.lower)),
        ("upper".into(), fmt(d.upper)),
        ("width".into(), fmt(d.width())),
        ("depth".into(), d.depth.to_string()),
        ("truncation_N".into(), d.truncation.to_string()),
    ]);
    Ok(Outcome::Ok)
}

fn tail(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let model = system
        .tail_model()
        .ok_or_else(|| Error::range(format!("{} has no tail model", system.name)))?;
    let q = cfg.q.unwrap_or(0.0);
    let b = match cfg.b {
        Some(b) => b,
        None => bowen_dimension(system, 1e-13)?.b_star,
    };
    let fit = estimate_tail_exponent(system, DEFAULT_FIT_SHELLS)?;
    let report = h3_ratio_probe(system, q, b, cfg.shells)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.stats.n.to_string(),
                fmt(r.stats.omega_lo),
                fmt(r.stats.omega_hi),
                r.stats.count.to_string(),
                fmt(r.stats.measure),
                fmt(r.ratio),
                fmt(r.lower_bound),
                fmt(r.upper_bound),
            ]
        })
        .collect();
    let mut bytes = csv_bytes(&TAIL_HEADER, &rows)?;
    for (k, v) in [
        ("beta", fmt(model.beta)),
        ("beta_hat", fmt(fit.beta_hat)),
        ("beta_hat_stderr", fmt(fit.stderr)),
        ("c1", fmt(report.c1)),
        ("c2", fmt(report.c2)),
        ("q", fmt(report.q)),
        ("b", fmt(report.b)),
        ("b_star", fmt(report.b_star)),
    ] {
        writeln!(bytes, "# {k}={v}").unwrap();
    }
    emit(cfg, &bytes)?;
    Ok(Outcome::Ok)
}

pub(crate) fn solve(cfg: &RunConfig, system: &System) -> Result<SpectrumCurve> {
    let g = cfg.alpha_grid;
    let grid = geometric_grid(g.lo, g.hi, g.count)?;
    let mut solver = SolverConfig::new(cfg.tolerance);
    if let Some(cap) = cfg.truncation {
        solver.truncation_cap = cap;
    }
    let curve = solve_curve_with(system, &grid, &solver)?;
    info!(
        "solved={} failed={} b_star={}",
        curve.points.len(),
        curve.failures.len(),
        fmt(curve.b_star)
    );
    Ok(curve)
}

fn failure_lines(bytes: &mut Vec<u8>, curve: &SpectrumCurve) {
    for (alpha, reason) in &curve.failures {
        writeln!(bytes, "# failure alpha={} reason=\"{}\"", fmt(*alpha), reason.replace('"', "'")).unwrap();
    }
}

/// Spectrum CSV: one row per solved point, then a `# failure` line per point
/// that did not converge.
pub fn spectrum_csv(curve: &SpectrumCurve) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            vec![
                fmt(p.alpha),
                fmt(p.q),
                fmt(p.b),
                fmt(p.lyapunov),
                fmt(p.entropy),
                fmt(p.residual_p),
                fmt(p.residual_dp),
                p.truncation_n.to_string(),
                p.newton_iters.to_string(),
            ]
        })
        .collect();
    let mut bytes = csv_bytes(&SPECTRUM_HEADER, &rows)?;
    failure_lines(&mut bytes, curve);
    Ok(bytes)
}

fn curve_outcome(curve: &SpectrumCurve) -> Outcome {
    if curve.failures.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Partial
    }
}

fn spectrum(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let curve = solve(cfg, system)?;
    emit(cfg, &spectrum_csv(&curve)?)?;
    if let Some(dir) = &cfg.plot_path {
        let beta = system.tail_model().map(|m| m.beta);
        let fit = fit_rate_exponent(&curve, curve.b_star, None, beta).ok();
        plot::emit_plots(&curve, fit.as_ref(), dir)?;
    }
    Ok(curve_outcome(&curve))
}

fn rate(cfg: &RunConfig, system: &System) -> Result<Outcome> {
    let curve = solve(cfg, system)?;
    let b_star = curve.b_star;
    let beta = system.tail_model().map(|m| m.beta);
    let mut header = vec!["alpha".to_string(), "gap".into(), "q".into()];
    header.extend(cfg.exponents.iter().map(|x| format!("product_{x}")));
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            let gap = b_star - p.b;
            let mut r = vec![fmt(p.alpha), fmt(gap), fmt(p.q)];
            r.extend(cfg.exponents.iter().map(|&x| fmt(gap * p.alpha.powf(x))));
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut bytes = csv_bytes(&header_refs, &rows)?;
    let mut outcome = curve_outcome(&curve);
    let mut summary = vec![("b_star".to_string(), fmt(b_star))];
    let fit = fit_rate_exponent(&curve, b_star, None, beta);
    match &fit {
        Ok(f) => {
            summary.extend([
                ("fitted_exponent".into(), fmt(f.fitted_exponent)),
                ("theoretical".into(), fmt(f.theoretical)),
                ("stderr".into(), fmt(f.stderr)),
                ("window_lo".into(), fmt(f.window.0)),
                ("window_hi".into(), fmt(f.window.1)),
                ("q_exponent_fit".into(), fmt(f.q_exponent_fit)),
                ("q_theoretical".into(), fmt(f.q_theoretical)),
                ("q_stderr".into(), fmt(f.q_stderr)),
                ("beta_rate".into(), fmt(f.beta_rate)),
            ]);
        }
        Err(e) => {
            summary.push(("fit_error".into(), format!("\"{e}\"")));
            outcome = Outcome::Partial;
        }
    }
    match q_integral_check(&curve, b_star) {
        Ok(t) => summary.extend([
            ("ratio_min".into(), fmt(t.r_min)),
            ("ratio_max".into(), fmt(t.r_max)),
            ("q_law_exponent".into(), fmt(t.q_law.1)),
        ]),
        Err(e) => {
            summary.push(("q_integral_error".into(), format!("\"{e}\"")));
            outcome = Outcome::Partial;
        }
    }
    if let Ok(probes) = scaled_limit_probe(&curve, b_star, &cfg.exponents, None) {
        for p in probes {
            summary.push((format!("trend_{}", p.x), p.trend.as_str().into()));
        }
        summary.push((
            "trend_orientation".into(),
            "\"products decay for x below the rate exponent and grow above it\"".into(),
        ));
    }
    for (k, v) in &summary {
        writeln!(bytes, "# {k}={v}").unwrap();
    }
    failure_lines(&mut bytes, &curve);
    emit(cfg, &bytes)?;
    if let Some(dir) = &cfg.plot_path {
        plot::emit_plots(&curve, fit.as_ref().ok(), dir)?;
    }
    Ok(outcome)
}
