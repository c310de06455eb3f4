//! Numerical checks of the shell conditions on the observable and
//! estimation of the tail exponent of `tau` under the measure of maximal
//! dimension.
//!
//! The `omega`-shell `k` collects the letters with `tau in [omega(k), omega(k+1))`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::linear_fit;
use crate::pressure::{bowen_dimension, letter_moments};
use crate::series::ShellSource;
use crate::systems::{ScaleFunction, ScaleKind, System, TailModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellStats {
    pub n: u64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub count: u64,
    pub measure: f64,
    /// `ln measure`, finite where `measure` underflows.
    pub log_measure: f64,
}

#[derive(Clone, Debug)]
pub struct ShellCensus {
    pub shells: Vec<ShellStats>,
    /// `(epsilon, C)` with `C = max_n count(n) e^{-epsilon omega(n)}`, the
    /// smallest admissible constant over the computed range.
    pub growth_constants: Vec<(f64, f64)>,
    /// Measure of the computed shells plus the exact measure of the rest.
    pub total_measure: f64,
}

fn scale_of(system: &System) -> Result<ScaleFunction> {
    system
        .scale()
        .ok_or_else(|| Error::range(format!("{} has no scale function", system.name)))
}

fn tail_of(system: &System) -> Result<TailModel> {
    system
        .tail_model()
        .ok_or_else(|| Error::range(format!("{} has no tail model", system.name)))
}

/// `(map shells, omega-shell)` pairs: map shells grouped by the omega-shell of
/// their tau value, up to omega-shell `n_shells`.
fn group_shells(system: &System, scale: &ScaleFunction, n_shells: u64) -> Result<Vec<Vec<u64>>> {
    let mut groups = vec![Vec::new(); n_shells as usize];
    let top = scale.eval((n_shells + 1) as f64);
    let mut m = 1u64;
    loop {
        if system.shell_limit().is_some_and(|l| m > l) {
            break;
        }
        let t = system.observable.shell_value(m);
        if t >= top {
            break;
        }
        if t >= scale.eval(1.0) {
            let k = scale.shell_of(t);
            groups[k as usize - 1].push(m);
        }
        m += 1;
    }
    Ok(groups)
}

/// Counts and geometric measures of the omega-shells `1..=n_shells`.
pub fn shell_census(system: &System, n_shells: u64, epsilons: &[f64]) -> Result<ShellCensus> {
    if n_shells == 0 {
        return Err(Error::range("shell census needs at least one shell"));
    }
    let scale = scale_of(system)?;
    let groups = group_shells(system, &scale, n_shells)?;
    let b_star = system.map.known_b_star.unwrap_or(1.0);
    let shells: Vec<ShellStats> = groups
        .par_iter()
        .enumerate()
        .map(|(i, members)| {
            let n = i as u64 + 1;
            if members.is_empty() {
                return Err(Error::EmptyShell { shell: n });
            }
            let mut count = 0u64;
            let mut log_measure = f64::NEG_INFINITY;
            for &m in members {
                let t = system.shell_term(m)?;
                count += t.log_count.exp().round() as u64;
                let lm = t.log_count - b_star * t.log_slope;
                log_measure = log_add(log_measure, lm);
            }
            Ok(ShellStats {
                n,
                omega_lo: scale.eval(n as f64),
                omega_hi: scale.eval((n + 1) as f64),
                count,
                measure: log_measure.exp(),
                log_measure,
            })
        })
        .collect::<Result<_>>()?;
    let growth_constants = epsilons
        .iter()
        .map(|&eps| {
            let c = shells
                .iter()
                .map(|s| (s.count as f64).ln() - eps * s.omega_lo)
                .fold(f64::NEG_INFINITY, f64::max)
                .exp();
            (eps, c)
        })
        .collect();
    let last = groups.iter().flatten().copied().max().unwrap_or(0);
    let rest = if system.shell_limit().is_some_and(|l| last >= l) {
        0.0
    } else {
        system.tail_measure(last + 1)?
    };
    let mut total = crate::numeric::NeumaierSum::new();
    for s in &shells {
        total.add(s.measure);
    }
    total.add(rest);
    Ok(ShellCensus {
        shells,
        growth_constants,
        total_measure: total.value(),
    })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Clone, Debug)]
pub struct TailFit {
    pub beta_hat: f64,
    pub stderr: f64,
    pub residual_rms: f64,
    /// `(t, mu(tau > t))` samples on the grid `t = 2^k`.
    pub samples: Vec<(f64, f64)>,
}

/// Shell bound used for the tail regression when none is given.
pub const DEFAULT_FIT_SHELLS: u64 = 1_000_000_000;

/// Least-squares slope of `ln mu(tau > t)` against `ln t` on `t = 2^k`,
/// `16 <= t <= omega(n_max)`.
pub fn estimate_tail_exponent(system: &System, n_max: u64) -> Result<TailFit> {
    let scale = scale_of(system)?;
    let t_max = scale.eval(n_max as f64).min(2f64.powi(1000));
    let ks: Vec<i32> = (4..).take_while(|&k| 2f64.powi(k) <= t_max).collect();
    let samples: Vec<(f64, f64)> = ks
        .par_iter()
        .map(|&k| {
            let t = 2f64.powi(k);
            // first shell with omega(m) > t
            let m = if t < scale.eval(1.0) { 1 } else { scale.shell_of(t) + 1 };
            let mu = system.tail_measure(m)?;
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::NonFiniteMeasure { t });
            }
            Ok((t, mu))
        })
        .collect::<Result<_>>()?;
    if samples.len() < 20 {
        return Err(Error::InsufficientPoints {
            needed: 20,
            have: samples.len(),
        });
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(TailFit {
        beta_hat: -fit.slope,
        stderr: fit.slope_stderr,
        residual_rms: fit.residual_rms,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H3Row {
    pub stats: ShellStats,
    /// `mu(shell) / mu_{q,b}(shell)`
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Clone, Debug)]
pub struct H3Report {
    pub rows: Vec<H3Row>,
    pub c1: f64,
    pub c2: f64,
    pub b_star: f64,
    pub q: f64,
    pub b: f64,
}

/// First shell used to fit the sandwich constants.
pub const H3_FIRST_FIT_SHELL: u64 = 5;

/// Ratio of the geometric measure to the equilibrium state of
/// `-q tau - b log|F'|` on each omega-shell, against
/// `c1 e^{q omega(n)} omega(n+1)^{-beta2 (b*-b)}` and
/// `c2 e^{q omega(n+1)} omega(n)^{-beta1 (b*-b)}`.
///
/// `c1`, `c2` are fitted on the first half of shells `5..=n_shells`; the
/// second half must then satisfy the sandwich with the constants relaxed by
/// a factor 2, otherwise the first offending shell is reported.
pub fn h3_ratio_probe(system: &System, q: f64, b: f64, n_shells: u64) -> Result<H3Report> {
    if n_shells < H3_FIRST_FIT_SHELL + 3 {
        return Err(Error::InsufficientPoints {
            needed: (H3_FIRST_FIT_SHELL + 3) as usize,
            have: n_shells as usize,
        });
    }
    let tail = tail_of(system)?;
    let scale = scale_of(system)?;
    let b_star = match system.known_b_star() {
        Some(v) => v,
        None => bowen_dimension(system, 1e-14)?.b_star,
    };
    let sums = letter_moments(system, q, b)?;
    let groups = group_shells(system, &scale, n_shells)?;
    let census = shell_census(system, n_shells, &[])?;
    let d = b_star - b;
    // logs of ratio, lower shape and upper shape
    let logs: Vec<(f64, f64, f64)> = census
        .shells
        .iter()
        .zip(&groups)
        .map(|(s, members)| {
            let mut lq = f64::NEG_INFINITY;
            for &m in members {
                let t = system.shell_term(m)?;
                lq = log_add(lq, t.log_count - q * t.tau - b * t.log_slope - sums.log_z);
            }
            let lower = q * s.omega_lo - tail.beta2 * d * s.omega_hi.ln();
            let upper = q * s.omega_hi - tail.beta1 * d * s.omega_lo.ln();
            Ok((s.log_measure - lq, lower, upper))
        })
        .collect::<Result<_>>()?;

    let first = H3_FIRST_FIT_SHELL as usize - 1;
    let split = first + (logs.len() - first) / 2;
    let mut lc1 = f64::INFINITY;
    let mut lc2 = f64::NEG_INFINITY;
    for &(r, lo, hi) in &logs[first..split] {
        lc1 = lc1.min(r - lo);
        lc2 = lc2.max(r - hi);
    }
    let slack = 2f64.ln();
    for (i, &(r, lo, hi)) in logs.iter().enumerate().skip(split) {
        if r - lo < lc1 - slack || r - hi > lc2 + slack {
            return Err(Error::SandwichViolation {
                shell: i as u64 + 1,
                ratio: r.exp(),
                lower: (lc1 + lo).exp(),
                upper: (lc2 + hi).exp(),
            });
        }
    }
    // report constants over the whole fitted range
    for &(r, lo, hi) in &logs[first..] {
        lc1 = lc1.min(r - lo);
        lc2 = lc2.max(r - hi);
    }
    let rows = census
        .shells
        .iter()
        .zip(&logs)
        .map(|(s, &(r, lo, hi))| H3Row {
            stats: *s,
            ratio: r.exp(),
            lower_bound: (lc1 + lo).exp(),
            upper_bound: (lc2 + hi).exp(),
        })
        .collect();
    Ok(H3Report {
        rows,
        c1: lc1.exp(),
        c2: lc2.exp(),
        b_star,
        q,
        b,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountBounds {
    /// `min count / (omega' omega^{c1-1})` over the fitted shells.
    pub lower_constant: f64,
    /// `max count / (omega' omega^{c2-1})` over the fitted shells.
    pub upper_constant: f64,
    pub c1: f64,
    pub c2: f64,
    /// Slope of `ln(count / (omega' omega^{c1-1}))` against `ln n`; zero when
    /// the count follows the predicted power.
    pub drift: f64,
}

/// Branch counts against `omega'(n) omega(n)^{c-1}` with
/// `c_{1,2} = beta_{1,2} b* - beta`, for polynomial `omega`.
pub fn count_bounds(system: &System, census: &ShellCensus) -> Result<CountBounds> {
    let scale = scale_of(system)?;
    if !matches!(scale.kind, ScaleKind::Polynomial(_)) {
        return Err(Error::range("branch-count bounds need a polynomial scale function"));
    }
    let tail = tail_of(system)?;
    let b_star = system.known_b_star().unwrap_or(1.0);
    let c1 = tail.beta1 * b_star - tail.beta;
    let c2 = tail.beta2 * b_star - tail.beta;
    let fitted: Vec<&ShellStats> = census.shells.iter().filter(|s| s.n >= H3_FIRST_FIT_SHELL).collect();
    if fitted.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: (H3_FIRST_FIT_SHELL + 2) as usize,
            have: census.shells.len(),
        });
    }
    let shape = |s: &ShellStats, c: f64| {
        let x = s.n as f64;
        scale.derivative(x).ln() + (c - 1.0) * s.omega_lo.ln()
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &fitted {
        let lc = (s.count as f64).ln();
        lo = lo.min(lc - shape(s, c1));
        hi = hi.max(lc - shape(s, c2));
        xs.push((s.n as f64).ln());
        ys.push(lc - shape(s, c1));
    }
    let drift = linear_fit(&xs, &ys)?.slope;
    Ok(CountBounds {
        lower_constant: lo.exp(),
        upper_constant: hi.exp(),
        c1,
        c2,
        drift,
    })
}

/// Largest ratio of branch slopes inside one omega-shell, using the
/// distortion bound of each branch for non-linear maps.
pub fn k_scaling(system: &System, n_shells: u64) -> Result<f64> {
    let scale = scale_of(system)?;
    let groups = group_shells(system, &scale, n_shells)?;
    let mut k = 1.0f64;
    for members in &groups {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &m in members {
            if system.is_constant_slope() {
                // letter indices of late shells overflow; the slope is per shell
                let l = system.map.shell_log_slope(m)?;
                lo = lo.min(l);
                hi = hi.max(l);
                continue;
            }
            let first = system.map.shell_first_letter(m);
            let count = system.map.shell_count(m).round() as u64;
            // every branch in a builtin shell has the same geometry up to
            // translation; the first and last stand for the shell
            for a in [first, first + count.max(1) - 1] {
                let (_, d) = system.map.branch_geometry(a)?;
                let (l, h) = d.log_bounds();
                lo = lo.min(l);
                hi = hi.max(h);
            }
        }
        if lo.is_finite() {
            k = k.max((hi - lo).exp());
        }
    }
    Ok(k)
}

/// `ell(n) = mu(shell n) / (omega'(n) omega(n)^{-beta-1})` on shells `1..=n_shells`.
pub fn ell_profile(system: &System, census: &ShellCensus) -> Result<Vec<(u64, f64)>> {
    let scale = scale_of(system)?;
    let tail = tail_of(system)?;
    Ok(census
        .shells
        .iter()
        .map(|s| {
            let x = s.n as f64;
            let shape = scale.derivative(x).ln() - (tail.beta + 1.0) * s.omega_lo.ln();
            (s.n, (s.log_measure - shape).exp())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::descriptor::SystemSpec;

    fn sys(name: &str, kv: &[(&str, f64)]) -> System {
        let mut s = SystemSpec::new(name);
        for (k, v) in kv {
            s = s.with(k, *v);
        }
        s.build().unwrap()
    }

    #[test]
    fn lueroth_census() {
        let c = shell_census(&sys("lueroth", &[]), 10, &[0.1]).unwrap();
        assert!(c.shells.iter().all(|s| s.count == 1));
        for s in &c.shells {
            let n = s.n as f64;
            assert!((s.measure - 1.0 / (n * (n + 1.0))).abs() < 1e-16);
        }
        assert!((c.total_measure - 1.0).abs() < 1e-14);
        assert!((c.growth_constants[0].1 - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn linear_count_census_counts_floor_powers() {
        let s = sys("linear_count", &[("a", 3.5), ("b", 2.0), ("c", 1.5)]);
        let c = shell_census(&s, 30, &[]).unwrap();
        for st in &c.shells {
            assert_eq!(st.count, crate::systems::floor_power(st.n, 1.5));
        }
        assert!((c.total_measure - 1.0).abs() < 1e-8);
    }

    #[test]
    fn census_measures_sum_to_one() {
        for (name, kv) in [
            ("gauss", vec![]),
            ("linear_poly", vec![]),
            ("linear_exp", vec![]),
            ("mp_induced", vec![]),
        ] {
            let c = shell_census(&sys(name, &kv), 25, &[]).unwrap();
            assert!((c.total_measure - 1.0).abs() < 1e-8, "{name}: {}", c.total_measure);
        }
    }

    #[test]
    fn lueroth_tail_exponent() {
        let f = estimate_tail_exponent(&sys("lueroth", &[]), 1_000_000_000).unwrap();
        assert!((f.beta_hat - 0.5).abs() < 0.02, "{}", f.beta_hat);
    }

    #[test]
    fn linear_poly_tail_exponent() {
        let f = estimate_tail_exponent(&sys("linear_poly", &[("r", 3.0), ("s", 1.0)]), 1_000_000_000).unwrap();
        assert!((f.beta_hat - 1.0 / 3.0).abs() < 0.03, "{}", f.beta_hat);
    }

    #[test]
    fn h3_is_trivial_at_the_measure_of_maximal_dimension() {
        let r = h3_ratio_probe(&sys("lueroth", &[]), 0.0, 1.0, 40).unwrap();
        for row in &r.rows {
            assert!((row.ratio - 1.0).abs() < 1e-12);
        }
        assert!((r.c1 - 1.0).abs() < 1e-12 && (r.c2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h3_sandwich_holds_for_the_examples() {
        let r = h3_ratio_probe(&sys("lueroth", &[]), 0.01, 0.98, 60).unwrap();
        assert!(r.c1 > 0.0 && r.c1 <= r.c2 * 1e12);
        for row in r.rows.iter().skip(4) {
            assert!(row.lower_bound <= row.ratio * (1.0 + 1e-12));
            assert!(row.ratio <= row.upper_bound * (1.0 + 1e-12));
        }
        assert!(h3_ratio_probe(&sys("linear_exp", &[]), 0.05, 0.95, 20).is_ok());
    }

    #[test]
    fn h3_rejects_wrong_exponents() {
        // bogus beta1 = beta2 = 3: the upper bound falls like n^{-2.4}, the ratio like n^{-0.8}
        let mut s = sys("lueroth", &[]);
        let mut obs = (*s.observable).clone();
        obs.tail = Some(TailModel::new(0.5, 3.0, 3.0, (0.25, 0.5)).unwrap());
        s.observable = std::sync::Arc::new(obs);
        let err = h3_ratio_probe(&s, 0.0, 0.6, 200).unwrap_err();
        assert!(matches!(err, Error::SandwichViolation { .. }));
    }

    #[test]
    fn count_bounds_follow_the_lemma() {
        let s = sys("linear_count", &[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let c = shell_census(&s, 200, &[]).unwrap();
        let cb = count_bounds(&s, &c).unwrap();
        assert!(cb.drift.abs() < 1e-9, "{}", cb.drift);
        let l = sys("lueroth", &[]);
        let cb = count_bounds(&l, &shell_census(&l, 200, &[]).unwrap()).unwrap();
        assert!((cb.lower_constant - 0.5).abs() < 1e-12 && cb.drift.abs() < 1e-9);
    }

    #[test]
    fn constant_slope_shells_have_unit_scaling() {
        for name in ["lueroth", "linear_poly", "linear_count", "linear_exp"] {
            assert_eq!(k_scaling(&sys(name, &[]), 200).unwrap(), 1.0, "{name}");
        }
        assert!((k_scaling(&sys("gauss", &[]), 20).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ell_stays_inside_its_bounds() {
        for name in crate::systems::BUILTIN_NAMES {
            let s = sys(name, &[]);
            let c = shell_census(&s, 40, &[]).unwrap();
            let (lo, hi) = s.tail_model().unwrap().ell_bound;
            for (n, ell) in ell_profile(&s, &c).unwrap() {
                assert!(ell >= lo * (1.0 - 1e-12) && ell <= hi * (1.0 + 1e-12), "{name} n={n} ell={ell}");
            }
        }
    }
}
