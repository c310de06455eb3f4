//! The Birkhoff spectrum `alpha -> b(alpha)` for `alpha` above the minimum of
//! `tau`, as the solution of `p(alpha, q, b) = 0`, `dp/dq = 0` with
//! `p(alpha, q, b) = P(q (alpha - tau) - b log|F'|)`.

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::pressure::{bowen_dimension, finiteness_abscissa};
use crate::series::{letter_sums, LetterSums, ShellTerm};
use crate::systems::System;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub alpha: f64,
    pub q: f64,
    pub b: f64,
    pub lyapunov: f64,
    pub entropy: f64,
    /// `|p(alpha, q, b)|`
    pub residual_p: f64,
    /// `|dp/dq| = |alpha - int tau|`
    pub residual_dp: f64,
    pub mean_tau: f64,
    pub truncation_n: u64,
    pub newton_iters: usize,
}

#[derive(Clone, Debug)]
pub struct SpectrumCurve {
    pub grid: Vec<f64>,
    pub points: Vec<SpectrumPoint>,
    pub b_star: f64,
    pub failures: Vec<(f64, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    /// Explicit shells to start from; the system default when `None`.
    pub initial_truncation: Option<u64>,
    pub truncation_cap: u64,
}

impl SolverConfig {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            max_iters: 60,
            initial_truncation: None,
            truncation_cap: 1 << 20,
        }
    }
}

/// `p` and its first and second derivatives at one `(alpha, q, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEval {
    pub p: f64,
    /// `alpha - int tau`
    pub dp_dq: f64,
    /// `-lambda`
    pub dp_db: f64,
    pub d2p_dq2: f64,
    pub d2p_dqdb: f64,
    pub d2p_db2: f64,
    pub sums: LetterSums,
}

impl PotentialEval {
    fn from_sums(alpha: f64, q: f64, s: LetterSums) -> Self {
        Self {
            p: s.log_z + q * alpha,
            dp_dq: alpha - s.mean_tau,
            dp_db: -s.mean_log_slope,
            d2p_dq2: s.var_tau,
            d2p_dqdb: s.cov_tau_log_slope,
            d2p_db2: s.var_log_slope,
            sums: s,
        }
    }
}

/// Evaluator holding the explicit shell table, grown on demand.
struct Evaluator<'a> {
    system: &'a System,
    table: Vec<ShellTerm>,
    cap: u64,
}

impl<'a> Evaluator<'a> {
    fn new(system: &'a System, explicit: u64, cap: u64) -> Result<Self> {
        Ok(Self {
            system,
            table: system.shell_table(explicit)?,
            cap,
        })
    }

    fn finite_alphabet(&self) -> bool {
        self.system
            .shell_limit()
            .is_some_and(|l| self.table.len() as u64 >= l)
    }

    /// Evaluate, doubling the explicit range until the tail error is below
    /// `target` (relative to `Z`).
    fn eval(&mut self, alpha: f64, q: f64, b: f64, target: f64) -> Result<PotentialEval> {
        loop {
            let s = letter_sums(self.system, &self.table, q, b)?;
            if s.tail_error <= target || self.finite_alphabet() {
                return Ok(PotentialEval::from_sums(alpha, q, s));
            }
            let n = self.table.len() as u64;
            if 2 * n > self.cap {
                debug!("truncation cap reached n={n} tail_error={:e}", s.tail_error);
                return Ok(PotentialEval::from_sums(alpha, q, s));
            }
            self.table = self.system.shell_table(2 * n)?;
        }
    }

    fn truncation(&self) -> u64 {
        self.table.len() as u64
    }
}

/// `p(alpha, q, b)` and derivatives with the default explicit range.
pub fn evaluate(system: &System, alpha: f64, q: f64, b: f64) -> Result<PotentialEval> {
    let table = system.shell_table(system.default_explicit())?;
    Ok(PotentialEval::from_sums(alpha, q, letter_sums(system, &table, q, b)?))
}

/// `min_a tau_a`.
pub fn alpha_min(system: &System) -> f64 {
    system.alpha_min()
}

/// Geometric grid of `count` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::range(format!(
            "grid needs 0 < lo < hi and count >= 2, got {lo}:{hi}:{count}"
        )));
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|i| lo * (r * i as f64).exp()).collect();
    g[count - 1] = hi;
    Ok(g)
}

/// Solve `int tau d mu_{q,b} = alpha` for `q > 0` at fixed `b` by bisection in
/// `ln q`.
fn q_for_mean(ev: &mut Evaluator, alpha: f64, b: f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-30f64.ln(), 10f64.ln());
    let mean = |ev: &mut Evaluator, lq: f64| -> Result<f64> { Ok(ev.eval(alpha, lq.exp(), b, target)?.sums.mean_tau) };
    if mean(ev, lo)? <= alpha {
        return Err(Error::NoInitialGuess {
            alpha,
            detail: format!("mean of tau at q=1e-30, b={b} is already below alpha"),
        });
    }
    while mean(ev, hi)? >= alpha {
        lo = hi;
        hi += 3.0;
        if hi > 1e3f64.ln() * 3.0 {
            return Err(Error::NoInitialGuess {
                alpha,
                detail: "mean of tau stays above alpha for all scanned q".into(),
            });
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mean(ev, mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Starting point `b0 = 0.9 b*` with `q0` matching the mean of tau.
pub fn initial_guess(system: &System, alpha: f64, b_star: f64) -> Result<(f64, f64)> {
    let mut ev = Evaluator::new(system, system.default_explicit(), 1 << 20)?;
    let b0 = 0.9 * b_star;
    Ok((q_for_mean(&mut ev, alpha, b0, f64::INFINITY)?, b0))
}

/// Slower, more robust start: bisection on `b` of `min_q p(alpha, q, b)`.
fn nested_guess(ev: &mut Evaluator, alpha: f64, b_star: f64) -> Result<(f64, f64)> {
    let abscissa = finiteness_abscissa(ev.system);
    let mut lo = if abscissa.is_finite() { abscissa.max(0.0) } else { 0.0 };
    let mut hi = b_star;
    let mut q = 1.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        q = q_for_mean(ev, alpha, mid, f64::INFINITY)?;
        let p = ev.eval(alpha, q, mid, f64::INFINITY)?.p;
        if p > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok((q, 0.5 * (lo + hi)))
}

pub fn solve_point(system: &System, alpha: f64, guess: (f64, f64), tolerance: f64) -> Result<SpectrumPoint> {
    solve_point_with(system, alpha, guess, &SolverConfig::new(tolerance))
}

/// Damped Newton on `(p, dp/dq)` in the variables `(ln q, b)`.
pub fn solve_point_with(system: &System, alpha: f64, guess: (f64, f64), cfg: &SolverConfig) -> Result<SpectrumPoint> {
    let amin = alpha_min(system);
    if alpha <= amin {
        return Err(Error::AlphaBelowMinimum { alpha, alpha_min: amin });
    }
    if !(guess.0 > 0.0) {
        return Err(Error::range(format!("initial q must be positive, got {}", guess.0)));
    }
    let explicit = cfg.initial_truncation.unwrap_or(system.default_explicit());
    let mut ev = Evaluator::new(system, explicit, cfg.truncation_cap)?;
    newton(&mut ev, alpha, guess, cfg)
}

/// Acceptance threshold for `|dp/dq|`: `dp/dq = alpha - E tau` cancels terms
/// of size `alpha`, so the tolerance is floored at a few ulps of `alpha`.
pub fn dp_tolerance(tolerance: f64, alpha: f64) -> f64 {
    tolerance.max(16.0 * f64::EPSILON * alpha)
}

fn newton(ev: &mut Evaluator, alpha: f64, guess: (f64, f64), cfg: &SolverConfig) -> Result<SpectrumPoint> {
    let tol = cfg.tolerance;
    let tol_dp = dp_tolerance(tol, alpha);
    let target = 1e-2 * tol;
    let (mut lq, mut b) = (guess.0.ln(), guess.1);
    let mut cur = ev.eval(alpha, lq.exp(), b, target)?;
    let merit = |e: &PotentialEval| e.p * e.p + e.dp_dq * e.dp_dq;
    let mut polish = 0;
    for it in 1..=cfg.max_iters {
        if cur.d2p_dq2 < 1e-12 {
            return Err(Error::Degenerate { variance: cur.d2p_dq2 });
        }
        let q = lq.exp();
        let converged = cur.p.abs() <= tol && cur.dp_dq.abs() <= tol_dp;
        if converged && polish >= 2 {
            return Ok(point(alpha, q, b, &cur, ev.truncation(), it - 1));
        }
        // J = [[q dp/dq, dp/db], [q Var, Cov]] in (ln q, b)
        let (j11, j12) = (q * cur.dp_dq, cur.dp_db);
        let (j21, j22) = (q * cur.d2p_dq2, cur.d2p_dqdb);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NewtonFailed {
                alpha,
                iters: it,
                q,
                b,
                residual_p: cur.p.abs(),
                residual_dp: cur.dp_dq.abs(),
            });
        }
        let (g1, g2) = (cur.p, cur.dp_dq);
        let d_lq = -(j22 * g1 - j12 * g2) / det;
        let d_b = -(-j21 * g1 + j11 * g2) / det;
        let m0 = merit(&cur);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let (nlq, nb) = (lq + step * d_lq, b + step * d_b);
            if let Ok(e) = ev.eval(alpha, nlq.exp(), nb, target) {
                if e.sums.mean_tau.is_finite() && merit(&e) < m0 {
                    accepted = Some((nlq, nb, e));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((nlq, nb, e)) => {
                lq = nlq;
                b = nb;
                cur = e;
                if converged {
                    polish += 1;
                }
            }
            None if converged => return Ok(point(alpha, lq.exp(), b, &cur, ev.truncation(), it)),
            None => {
                return Err(Error::NewtonFailed {
                    alpha,
                    iters: it,
                    q,
                    b,
                    residual_p: cur.p.abs(),
                    residual_dp: cur.dp_dq.abs(),
                })
            }
        }
    }
    let q = lq.exp();
    if cur.p.abs() <= tol && cur.dp_dq.abs() <= tol_dp {
        return Ok(point(alpha, q, b, &cur, ev.truncation(), cfg.max_iters));
    }
    Err(Error::NewtonFailed {
        alpha,
        iters: cfg.max_iters,
        q,
        b,
        residual_p: cur.p.abs(),
        residual_dp: cur.dp_dq.abs(),
    })
}

fn point(alpha: f64, q: f64, b: f64, e: &PotentialEval, truncation: u64, iters: usize) -> SpectrumPoint {
    SpectrumPoint {
        alpha,
        q,
        b,
        lyapunov: e.sums.mean_log_slope,
        entropy: e.sums.entropy,
        residual_p: e.p.abs(),
        residual_dp: e.dp_dq.abs(),
        mean_tau: e.sums.mean_tau,
        truncation_n: truncation,
        newton_iters: iters,
    }
}

/// `(d ln q / d ln alpha, d b / d ln alpha)` at a solved point.
fn tangent(system: &System, pt: &SpectrumPoint) -> Result<(f64, f64)> {
    let e = evaluate(system, pt.alpha, pt.q, pt.b)?;
    let lambda = e.sums.mean_log_slope;
    let dq = -(1.0 + e.d2p_dqdb * pt.q / lambda) / e.d2p_dq2;
    Ok((pt.alpha * dq / pt.q, pt.alpha * pt.q / lambda))
}

/// Continuation along an increasing grid; failed points are recorded and
/// skipped.
pub fn solve_curve(system: &System, grid: &[f64], tolerance: f64) -> Result<SpectrumCurve> {
    solve_curve_with(system, grid, &SolverConfig::new(tolerance))
}

pub fn solve_curve_with(system: &System, grid: &[f64], cfg: &SolverConfig) -> Result<SpectrumCurve> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::range("alpha grid must have at least two strictly increasing values"));
    }
    let amin = alpha_min(system);
    if grid[0] <= amin {
        return Err(Error::AlphaBelowMinimum {
            alpha: grid[0],
            alpha_min: amin,
        });
    }
    let b_star = bowen_dimension(system, 1e-15)?.b_star;
    info!("system={} b_star={:.17e} points={}", system.name, b_star, grid.len());
    let mut points: Vec<SpectrumPoint> = Vec::new();
    let mut failures = Vec::new();
    for &alpha in grid {
        let guess = match points.last() {
            Some(prev) => {
                let (dlq, db) = tangent(system, prev)?;
                let h = (alpha / prev.alpha).ln();
                Some(((prev.q.ln() + h * dlq).exp(), prev.b + h * db))
            }
            None => None,
        };
        let result = solve_from(system, alpha, guess, b_star, cfg);
        match result {
            Ok(pt) => {
                debug!(
                    "alpha={:e} q={:e} b={:.17e} iters={} N={}",
                    pt.alpha, pt.q, pt.b, pt.newton_iters, pt.truncation_n
                );
                points.push(pt);
            }
            Err(e) => {
                warn!("alpha={alpha:e} failure={e}");
                failures.push((alpha, e.to_string()));
            }
        }
    }
    Ok(SpectrumCurve {
        grid: grid.to_vec(),
        points,
        b_star,
        failures,
    })
}

fn solve_from(
    system: &System,
    alpha: f64,
    predicted: Option<(f64, f64)>,
    b_star: f64,
    cfg: &SolverConfig,
) -> Result<SpectrumPoint> {
    let explicit = cfg.initial_truncation.unwrap_or(system.default_explicit());
    let mut ev = Evaluator::new(system, explicit, cfg.truncation_cap)?;
    if let Some(g) = predicted {
        match newton(&mut ev, alpha, g, cfg) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Degenerate { .. }) => return Err(e),
            Err(e) => debug!("alpha={alpha:e} predictor failed: {e}"),
        }
    } else {
        let g = (q_for_mean(&mut ev, alpha, 0.9 * b_star, f64::INFINITY)?, 0.9 * b_star);
        match newton(&mut ev, alpha, g, cfg) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Degenerate { .. }) => return Err(e),
            Err(e) => debug!("alpha={alpha:e} scan start failed: {e}"),
        }
    }
    let g = nested_guess(&mut ev, alpha, b_star)?;
    newton(&mut ev, alpha, g, cfg)
}

/// Largest relative gap between the central difference of `b` along the
/// curve and `q / lambda`.
pub fn check_derivative_identity(curve: &SpectrumCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            have: pts.len(),
        });
    }
    let mut worst = 0.0f64;
    for w in pts.windows(3) {
        let (a, m, c) = (&w[0], &w[1], &w[2]);
        let (hm, hp) = (m.alpha - a.alpha, c.alpha - m.alpha);
        // second-order difference on a non-uniform grid
        let fd = ((m.b - a.b) / hm * hp + (c.b - m.b) / hp * hm) / (hm + hp);
        let exact = m.q / m.lyapunov;
        worst = worst.max((fd / exact - 1.0).abs());
    }
    Ok(worst)
}

/// `min p(alpha, q, b)` over `q = q(alpha) * factor` for the given factors,
/// with the minimising factor.
pub fn q_scan_minimum(system: &System, pt: &SpectrumPoint, factors: &[f64]) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 1.0);
    for &f in factors {
        let p = evaluate(system, pt.alpha, pt.q * f, pt.b)?.p;
        if p < best.0 {
            best = (p, f);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::descriptor::SystemSpec;

    #[test]
    fn two_branch_point_is_closed_form() {
        // tau = (1, 2), equal slopes 2: with w = e^{-q}, alpha = (1 + 2w)/(1 + w)
        // and b = h / ln 2 where h is the entropy of (1/(1+w), w/(1+w))
        let s = System::two_branch(1.0, 2.0).unwrap();
        let alpha = 1.3;
        let w: f64 = (alpha - 1.0) / (2.0 - alpha);
        let (p1, p2): (f64, f64) = (1.0 / (1.0 + w), w / (1.0 + w));
        let h = -(p1 * p1.ln() + p2 * p2.ln());
        let (q0, b0) = initial_guess(&s, alpha, 1.0).unwrap();
        let pt = solve_point(&s, alpha, (q0, b0), 1e-12).unwrap();
        assert!((pt.q + w.ln()).abs() < 1e-10);
        assert!((pt.b - h / 2f64.ln()).abs() < 1e-10);
        assert!((pt.entropy - pt.b * pt.lyapunov).abs() < 1e-12);
    }

    #[test]
    fn rejects_alpha_at_minimum_and_constant_tau() {
        let s = SystemSpec::new("lueroth").build().unwrap();
        assert!(matches!(
            solve_point(&s, 1.0, (0.1, 0.5), 1e-10),
            Err(Error::AlphaBelowMinimum { .. })
        ));
        let flat = System::finite_linear("flat", vec![0.5, 0.25], vec![1.0, 1.0]).unwrap();
        let flat_alpha = System::finite_linear("flat", vec![0.5, 0.25], vec![1.0, 1.0 + 1e-9]).unwrap();
        assert!(solve_point(&flat, 1.5, (0.1, 0.5), 1e-10).is_err());
        assert!(matches!(
            solve_point(&flat_alpha, 1.0 + 5e-10, (0.1, 0.5), 1e-10),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn lueroth_curve_is_increasing_with_small_residuals() {
        let s = SystemSpec::new("lueroth").build().unwrap();
        let grid = geometric_grid(10.0, 1e4, 20).unwrap();
        let c = solve_curve(&s, &grid, 1e-10).unwrap();
        assert!(c.failures.is_empty(), "{:?}", c.failures);
        assert!(c.points.windows(2).all(|w| w[1].b > w[0].b));
        for p in &c.points {
            assert!(p.residual_p <= 1e-10 && p.residual_dp <= 1e-10);
            assert!(p.q > 0.0 && p.b < c.b_star);
            assert!((p.entropy - p.b * p.lyapunov).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_identity_on_a_dense_grid() {
        let s = SystemSpec::new("lueroth").build().unwrap();
        let grid = geometric_grid(90.0, 110.0, 9).unwrap();
        let c = solve_curve(&s, &grid, 1e-12).unwrap();
        assert!(check_derivative_identity(&c).unwrap() < 1e-3);
        let t = System::two_branch(1.0, 2.0).unwrap();
        let c = solve_curve(&t, &geometric_grid(1.2, 1.21, 9).unwrap(), 1e-13).unwrap();
        assert!(check_derivative_identity(&c).unwrap() < 1e-4);
    }

    #[test]
    fn grid_is_geometric() {
        let g = geometric_grid(1.0, 100.0, 3).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && g[2] == 100.0);
        assert!(geometric_grid(2.0, 1.0, 3).is_err());
    }
}
