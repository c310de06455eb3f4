//! Acceptance run: one PASS/FAIL line per criterion with the measured values.
//! Tolerances and time limits are fixed here.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use birkhoff::pressure::{
    bowen_dimension, bowen_sandwich, finiteness_abscissa, letter_moments, pressure_gradient,
    pressure_locally_constant, SandwichConfig,
};
use birkhoff::rate::{fit_rate_exponent, q_integral_check, scaled_limit_probe, Trend};
use birkhoff::spectrum::{check_derivative_identity, geometric_grid, solve_curve, SpectrumCurve};
use birkhoff::tail::{estimate_tail_exponent, DEFAULT_FIT_SHELLS};
use birkhoff::{Potential, System, SystemSpec};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Run {
    failed: Vec<u32>,
}

impl Run {
    fn criterion(&mut self, n: u32, name: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failed.push(n);
        }
        println!(
            "{} criterion {n:>2} {name}: {detail} [{:.1?}]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed()
        );
    }
}

fn spec(name: &str, kv: &[(&str, f64)]) -> SystemSpec {
    kv.iter().fold(SystemSpec::new(name), |s, &(k, v)| s.with(k, v))
}

fn build(name: &str, kv: &[(&str, f64)]) -> System {
    spec(name, kv).build().unwrap()
}

// ---------------------------------------------------------------------------
// brute-force oracle for finite linear systems: p(alpha, q, b) is a finite
// log-sum-exp; b(alpha) is found by zooming grid searches, no Newton steps

fn oracle_p(lengths: &[f64], taus: &[f64], alpha: f64, q: f64, b: f64) -> f64 {
    let terms: Vec<f64> = lengths
        .iter()
        .zip(taus)
        .map(|(l, t)| b * l.ln() - q * (t - alpha))
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Zooming grid search for the minimum of a convex function on [lo, hi].
fn grid_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const K: usize = 100;
    let mut best = (lo, f(lo));
    for _ in 0..14 {
        let h = (hi - lo) / K as f64;
        let mut i_best = 0;
        for i in 0..=K {
            let x = lo + h * i as f64;
            let v = f(x);
            if v < best.1 || i == 0 {
                if i == 0 && v >= best.1 && best.0 != x {
                    continue;
                }
                best = (x, v);
                i_best = i;
            }
        }
        let c = lo + h * i_best as f64;
        lo = (c - 2.0 * h).max(lo);
        hi = (c + 2.0 * h).min(hi);
    }
    best
}

/// `(q, b)` with `min_q p = 0`, by a zooming grid search on `b` for the
/// sign change of the decreasing function `b -> min_q p`.
fn oracle_point(lengths: &[f64], taus: &[f64], alpha: f64) -> (f64, f64) {
    let m = |b: f64| grid_min(|q| oracle_p(lengths, taus, alpha, q, b), 0.0, 30.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..12 {
        let h = (hi - lo) / 50.0;
        let mut i = 1;
        while i < 50 && m(lo + h * i as f64).1 > 0.0 {
            i += 1;
        }
        let (nlo, nhi) = (lo + h * (i - 1) as f64, lo + h * i as f64);
        lo = nlo;
        hi = nhi;
    }
    let b = 0.5 * (lo + hi);
    (m(b).0, b)
}

fn main() -> ExitCode {
    let mut run = Run { failed: Vec::new() };

    run.criterion(1, "Moran {1/2, 1/4} dimension", || {
        let t = Instant::now();
        let moran = System::finite_linear("moran", vec![0.5, 0.25], vec![1.0, 2.0])?;
        let b = bowen_dimension(&moran, 1e-14)?.b_star;
        let el = t.elapsed();
        let target = ((1.0 + 5f64.sqrt()) / 2.0).log2();
        let err = (b - target).abs();
        Ok((
            err <= 1e-10 && el < Duration::from_secs(1),
            format!("b*={b:.15} |b*-log2(phi)|={err:.1e} in {el:.1?}"),
        ))
    });

    run.criterion(2, "zero pressure at (q,b)=(0,1)", || {
        let mut worst = 0.0f64;
        let cases = [
            spec("lueroth", &[("r", 2.0)]),
            spec("lueroth", &[("r", 3.0)]),
            spec("linear_poly", &[("r", 2.0), ("s", 1.0)]),
            spec("linear_poly", &[("r", 3.0), ("s", 2.0)]),
            spec("linear_count", &[]),
            spec("linear_exp", &[]),
        ];
        for s in &cases {
            let e = pressure_locally_constant(&s.build()?, &Potential::new(0.0, 1.0), 1e-12)?;
            worst = worst.max(e.value.abs()).max(e.lower.abs()).max(e.upper.abs());
        }
        Ok((worst <= 1e-12, format!("{} systems, max |P| and bracket {worst:.1e}", cases.len())))
    });

    run.criterion(3, "Gauss b* sandwich depth 2", || {
        let t = Instant::now();
        let gauss = build("gauss", &[]);
        let mut lows = Vec::new();
        let mut last = None;
        for n in [50u64, 100, 200] {
            let d = bowen_sandwich(&gauss, &SandwichConfig::new(2, n))?;
            lows.push(d.lower);
            last = Some(d);
        }
        let d = last.unwrap();
        let el = t.elapsed();
        let mono = lows.windows(2).all(|w| w[1] > w[0]);
        Ok((
            d.width() < 0.02 && d.upper >= 0.99 && mono && el < Duration::from_secs(120),
            format!(
                "N=200 [{:.5}, {:.5}] width {:.4}; lower at N=50,100,200: {:.5} {:.5} {:.5}; {el:.1?}",
                d.lower, d.upper, d.width(), lows[0], lows[1], lows[2]
            ),
        ))
    });

    run.criterion(4, "tail exponent estimates", || {
        let cases: [(&str, Vec<(&str, f64)>, f64, f64); 6] = [
            ("lueroth", vec![("r", 2.0)], 0.5, 0.05),
            ("lueroth", vec![("r", 3.0)], 1.0 / 3.0, 0.05),
            ("gauss", vec![("r", 2.0)], 0.5, 0.05),
            ("gauss", vec![("r", 3.0)], 1.0 / 3.0, 0.05),
            ("linear_poly", vec![("r", 2.0), ("s", 1.0)], 0.5, 0.03),
            ("linear_poly", vec![("r", 3.0), ("s", 1.0)], 1.0 / 3.0, 0.03),
        ];
        let mut ok = true;
        let mut detail = String::new();
        for (name, kv, beta, tol) in cases {
            let t = Instant::now();
            let f = estimate_tail_exponent(&build(name, &kv), DEFAULT_FIT_SHELLS)?;
            let el = t.elapsed();
            ok &= (f.beta_hat - beta).abs() <= tol && el < Duration::from_secs(30);
            detail += &format!("{name}{:?}={:.4} ", kv.iter().map(|p| p.1).collect::<Vec<_>>(), f.beta_hat);
        }
        Ok((ok, detail))
    });

    run.criterion(5, "Newton vs brute-force oracle", || {
        let mut worst = 0.0f64;
        let two = System::two_branch(1.0, 2.0)?;
        let two_l = [0.5, 0.5];
        let two_t = [1.0, 2.0];
        let lue = build("lueroth", &[("r", 2.0)]).truncated(50);
        let lue_l: Vec<f64> = (1..=50).map(|a: u32| 1.0 / (a as f64 * (a as f64 + 1.0))).collect();
        let lue_t: Vec<f64> = (1..=50).map(|a: u32| (a * a) as f64).collect();
        for (sys, l, t, alphas) in [
            (&two, &two_l[..], &two_t[..], vec![1.1, 1.2, 1.3, 1.4, 1.45]),
            (&lue, &lue_l[..], &lue_t[..], vec![1.5, 2.0, 3.0, 5.0, 8.0]),
        ] {
            let curve = solve_curve(sys, &alphas, 1e-12)?;
            if !curve.failures.is_empty() {
                return Ok((false, format!("failures {:?}", curve.failures)));
            }
            for p in &curve.points {
                let (q, b) = oracle_point(l, t, p.alpha);
                worst = worst.max((q - p.q).abs()).max((b - p.b).abs());
            }
        }
        Ok((worst <= 1e-6, format!("10 points, max |dq|,|db| = {worst:.1e}")))
    });

    // one curve per builtin on 1e2..1e6, shared by criteria 6, 8 and 9
    let t9 = Instant::now();
    let grid = geometric_grid(1e2, 1e6, 33).unwrap();
    let curves: Vec<(String, System, Result<SpectrumCurve, String>)> = [
        spec("lueroth", &[("r", 2.0)]),
        spec("linear_poly", &[("r", 2.0), ("s", 1.0)]),
        spec("mp_induced", &[("lambda", 2.0)]),
        spec("gauss", &[("r", 2.0)]),
        spec("linear_count", &[]),
        spec("linear_exp", &[]),
    ]
    .into_iter()
    .map(|s| {
        let sys = s.build().unwrap();
        let c = solve_curve(&sys, &grid, 1e-9).map_err(|e| e.to_string());
        (s.name.clone(), sys, c)
    })
    .collect();
    let curve_time = t9.elapsed();

    run.criterion(6, "stationarity and identities at solved points", || {
        let (mut wp, mut wd, mut wm, mut wh, mut n) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0);
        for (name, _, c) in &curves {
            let c = c.as_ref().map_err(|e| format!("{name}: {e}"))?;
            if !c.failures.is_empty() {
                return Ok((false, format!("{name}: {} failed points", c.failures.len())));
            }
            for p in &c.points {
                wp = wp.max(p.residual_p);
                wd = wd.max(p.residual_dp);
                wm = wm.max((p.mean_tau - p.alpha).abs() / p.alpha);
                wh = wh.max((p.entropy - p.b * p.lyapunov).abs());
                n += 1;
            }
        }
        Ok((
            wp <= 1e-8 && wd <= 1e-8 && wm <= 1e-8 && wh <= 1e-8,
            format!("{n} points: |p|<={wp:.1e} |dp/dq|<={wd:.1e} rel|Etau-a|<={wm:.1e} |h-b*lam|<={wh:.1e}"),
        ))
    });

    run.criterion(7, "b'(alpha) = q/lambda by finite differences", || {
        let mut worst = 0.0f64;
        for (sys, lo, hi) in [
            (build("lueroth", &[("r", 2.0)]), 95.0, 105.0),
            (build("gauss", &[("r", 2.0)]), 95.0, 105.0),
            (build("mp_induced", &[("lambda", 2.0)]), 95.0, 105.0),
            (build("linear_poly", &[("r", 2.0), ("s", 1.0)]), 950.0, 1050.0),
            (System::two_branch(1.0, 2.0)?, 1.2, 1.21),
        ] {
            let c = solve_curve(&sys, &geometric_grid(lo, hi, 9)?, 1e-12)?;
            worst = worst.max(check_derivative_identity(&c)?);
        }
        Ok((worst < 1e-3, format!("max relative error {worst:.2e}")))
    });

    run.criterion(8, "final-decade monotonicity and q-integral band", || {
        let fine_grid = geometric_grid(1e2, 1e6, 65)?;
        let mut detail = String::new();
        let mut ok = true;
        for (name, sys, c) in curves.iter().take(4) {
            let c = c.as_ref().map_err(|e| format!("{name}: {e}"))?;
            let dec: Vec<_> = c.points.iter().filter(|p| p.alpha >= 1e5 * (1.0 - 1e-12)).collect();
            let b_inc = dec.windows(2).all(|w| w[1].b > w[0].b);
            let q_dec = dec.windows(2).all(|w| w[1].q < w[0].q);
            let aq_dec = dec.windows(2).all(|w| w[1].alpha * w[1].q < w[0].alpha * w[0].q);
            let coarse = q_integral_check(c, c.b_star)?;
            let fine_curve = solve_curve(sys, &fine_grid, 1e-9)?;
            let fine = q_integral_check(&fine_curve, fine_curve.b_star)?;
            let mut change = 0.0f64;
            let (mut band_c, mut band_f) = ((f64::INFINITY, 0.0f64), (f64::INFINITY, 0.0f64));
            for r in coarse.rows.iter().filter(|r| r.alpha >= 1e5 * (1.0 - 1e-12)) {
                let g = fine.rows.iter().find(|f| (f.alpha / r.alpha - 1.0).abs() < 1e-9).ok_or("grid mismatch")?;
                change = change.max((g.ratio / r.ratio - 1.0).abs());
                band_c = (band_c.0.min(r.ratio), band_c.1.max(r.ratio));
            }
            for f in fine.rows.iter().filter(|r| r.alpha >= 1e5 * (1.0 - 1e-12)) {
                band_f = (band_f.0.min(f.ratio), band_f.1.max(f.ratio));
            }
            let band_change = (band_f.0 / band_c.0 - 1.0).abs().max((band_f.1 / band_c.1 - 1.0).abs());
            ok &= b_inc && q_dec && aq_dec && change < 0.05 && band_change < 0.05;
            detail += &format!(
                "{name}: band [{:.4},{:.4}] refined change {:.1e}; ",
                band_c.0, band_c.1, change.max(band_change)
            );
        }
        Ok((ok, detail))
    });

    run.criterion(9, "rate exponents and scaled-limit probe", || {
        let t = Instant::now();
        let mut ok = true;
        let mut detail = String::new();
        for (name, sys, c) in curves.iter().take(3) {
            let c = c.as_ref().map_err(|e| format!("{name}: {e}"))?;
            let beta = sys.tail_model().map(|m| m.beta);
            let f = fit_rate_exponent(c, c.b_star, Some((1e2, 1e6)), beta)?;
            let pr = scaled_limit_probe(c, c.b_star, &[0.5, 1.5], Some((1e2, 1e6)))?;
            ok &= (f.fitted_exponent - 1.0).abs() <= 0.15
                && (f.q_exponent_fit + 2.0).abs() <= 0.15
                && pr[0].trend == Trend::Decaying
                && pr[1].trend == Trend::Growing;
            detail += &format!(
                "{name}: gap {:.4} q {:.4} x=0.5 {} x=1.5 {}; ",
                f.fitted_exponent,
                f.q_exponent_fit,
                pr[0].trend.as_str(),
                pr[1].trend.as_str()
            );
        }
        let total = curve_time + t.elapsed();
        ok &= total < Duration::from_secs(20 * 60);
        Ok((ok, format!("{detail}total {total:.1?}")))
    });

    run.criterion(10, "convexity and gradient agreement", || {
        let (mut d2, mut grad) = (f64::INFINITY, 0.0f64);
        for name in birkhoff::systems::BUILTIN_NAMES {
            let sys = build(name, &[]);
            let p = |q: f64, b: f64| letter_moments(&sys, q, b).map(|s| s.log_z);
            let a0 = finiteness_abscissa(&sys);
            let lines: [Vec<(f64, f64)>; 3] = [
                (0..21).map(|i| (0.01 + 0.02 * i as f64, 1.0)).collect(),
                (0..21).map(|i| (0.05, a0.max(0.55) + 0.05 + 0.04 * i as f64)).collect(),
                (0..21).map(|i| (0.0, a0 + 0.05 + 0.05 * i as f64)).collect(),
            ];
            for line in &lines {
                let v: Vec<f64> = line.iter().map(|&(q, b)| p(q, b)).collect::<Result<_, _>>()?;
                for w in v.windows(3) {
                    d2 = d2.min(w[0] - 2.0 * w[1] + w[2]);
                }
            }
            for &(q, b) in &[(0.02, 1.0), (0.1, a0.max(0.7) + 0.1), (0.5, 1.2)] {
                let g = pressure_gradient(&sys, &Potential::new(q, b))?;
                let h = 1e-5;
                let fq = (p(q * (1.0 + h), b)? - p(q * (1.0 - h), b)?) / (2.0 * h * q);
                let fb = (p(q, b + h)? - p(q, b - h)?) / (2.0 * h);
                grad = grad.max((fq - g.d_q).abs() / g.d_q.abs()).max((fb - g.d_b).abs() / g.d_b.abs());
            }
        }
        Ok((d2 >= -1e-9 && grad <= 1e-5, format!("min second difference {d2:.2e}, max gradient rel err {grad:.1e}")))
    });

    run.criterion(11, "CSV byte-identical for workers 1 and 8", || {
        let exe = env!("CARGO_BIN_EXE_birkhoff");
        let dir = std::env::temp_dir().join(format!("birkhoff-acceptance-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let mut files = Vec::new();
        for (sys, w) in [("gauss", 1), ("gauss", 8), ("lueroth", 1), ("lueroth", 8)] {
            let out = dir.join(format!("{sys}-{w}.csv"));
            let status = Command::new(exe)
                .args(["spectrum", "--system", sys, "--alpha", "1e2:1e5:16", "--tol", "1e-9", "--workers"])
                .arg(w.to_string())
                .arg("--out")
                .arg(&out)
                .env("RUST_LOG", "warn")
                .status()?;
            if !status.success() {
                return Ok((false, format!("{sys} workers={w} exited with {status}")));
            }
            files.push(std::fs::read(&out)?);
        }
        std::fs::remove_dir_all(&dir).ok();
        let same = files[0] == files[1] && files[2] == files[3];
        Ok((same, format!("gauss {} bytes, lueroth {} bytes", files[0].len(), files[2].len())))
    });

    if run.failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", run.failed);
        ExitCode::FAILURE
    }
}
