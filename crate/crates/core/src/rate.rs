//! How fast `b(alpha)` approaches `b*`: power-law fits of the gap and of
//! `q(alpha)`, the comparison of the gap with `int_alpha^inf q`, and the
//! scaled products `(b* - b(alpha)) alpha^x`.

use crate::error::{Error, Result};
use crate::numeric::linear_fit;
use crate::spectrum::{SpectrumCurve, SpectrumPoint};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Negative slope of `ln(b* - b)` against `ln alpha`.
    pub fitted_exponent: f64,
    /// `beta / (1 - beta)`, NaN when no tail exponent is known.
    pub theoretical: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    /// Slope of `ln q` against `ln alpha`.
    pub q_exponent_fit: f64,
    pub q_stderr: f64,
    /// `-1 / (1 - beta)`
    pub q_theoretical: f64,
    /// `beta` recovered from the fitted exponent `e` as `e / (1 + e)`.
    pub beta_rate: f64,
    pub points: usize,
}

/// Minimum number of curve points inside a fit window.
pub const MIN_FIT_POINTS: usize = 8;

/// The last two decades of the solved range.
pub fn default_window(curve: &SpectrumCurve) -> Option<(f64, f64)> {
    let hi = curve.points.last()?.alpha;
    let lo = curve.points.first()?.alpha.max(hi / 100.0);
    Some((lo, hi))
}

fn in_window(curve: &SpectrumCurve, window: (f64, f64)) -> Vec<&SpectrumPoint> {
    // relative slack so grid endpoints computed by exp/ln stay inside
    let (lo, hi) = (window.0 * (1.0 - 1e-12), window.1 * (1.0 + 1e-12));
    curve.points.iter().filter(|p| p.alpha >= lo && p.alpha <= hi).collect()
}

/// Error in `b` induced by the solver residuals at a point.
pub fn solver_noise(p: &SpectrumPoint) -> f64 {
    (p.residual_p + p.q * p.residual_dp) / p.lyapunov
}

pub fn fit_rate_exponent(
    curve: &SpectrumCurve,
    b_star: f64,
    window: Option<(f64, f64)>,
    beta: Option<f64>,
) -> Result<RateFit> {
    let window = window
        .or_else(|| default_window(curve))
        .ok_or(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            have: 0,
        })?;
    let pts = in_window(curve, window);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            have: pts.len(),
        });
    }
    let mut x = Vec::with_capacity(pts.len());
    let mut gap = Vec::with_capacity(pts.len());
    let mut lq = Vec::with_capacity(pts.len());
    for p in &pts {
        let g = b_star - p.b;
        let noise = solver_noise(p);
        if !(g > 0.0 && 100.0 * noise <= g) {
            return Err(Error::GapBelowNoise {
                alpha: p.alpha,
                gap: g,
                residual: noise,
            });
        }
        x.push(p.alpha.ln());
        gap.push(g.ln());
        lq.push(p.q.ln());
    }
    let fg = linear_fit(&x, &gap)?;
    let fq = linear_fit(&x, &lq)?;
    let e = -fg.slope;
    let (theoretical, q_theoretical) = match beta {
        Some(b) => (b / (1.0 - b), -1.0 / (1.0 - b)),
        None => (f64::NAN, f64::NAN),
    };
    Ok(RateFit {
        fitted_exponent: e,
        theoretical,
        stderr: fg.slope_stderr,
        window,
        q_exponent_fit: fq.slope,
        q_stderr: fq.slope_stderr,
        q_theoretical,
        beta_rate: e / (1.0 + e),
        points: pts.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QIntegralRow {
    pub alpha: f64,
    pub gap: f64,
    pub integral: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct QIntegralTable {
    pub rows: Vec<QIntegralRow>,
    pub r_min: f64,
    pub r_max: f64,
    /// `q(t) ~ coefficient t^exponent` beyond the grid.
    pub q_law: (f64, f64),
}

/// `(b* - b(alpha)) / int_alpha^inf q(t) dt` along the curve. The integral is
/// the trapezoid rule for `q(t) t` in `ln t` over the solved points plus the
/// power law fitted to the last two decades beyond them.
pub fn q_integral_check(curve: &SpectrumCurve, b_star: f64) -> Result<QIntegralTable> {
    let pts = &curve.points;
    let window = default_window(curve).ok_or(Error::InsufficientPoints { needed: 3, have: 0 })?;
    let tail: Vec<&SpectrumPoint> = in_window(curve, window);
    if tail.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            have: tail.len(),
        });
    }
    let x: Vec<f64> = tail.iter().map(|p| p.alpha.ln()).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.q.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let gamma = fit.slope;
    if gamma >= -1.0 {
        return Err(Error::DivergentQTail { exponent: gamma });
    }
    let last = pts.last().unwrap();
    // anchor the law at the last point
    let coeff = last.q / last.alpha.powf(gamma);
    let beyond = coeff * last.alpha.powf(1.0 + gamma) / (-1.0 - gamma);
    let mut rows = vec![QIntegralRow {
        alpha: 0.0,
        gap: 0.0,
        integral: 0.0,
        ratio: 0.0,
    }; pts.len()];
    let mut acc = beyond;
    for i in (0..pts.len()).rev() {
        if i + 1 < pts.len() {
            let (a, c) = (&pts[i], &pts[i + 1]);
            let h = c.alpha.ln() - a.alpha.ln();
            acc += 0.5 * h * (a.q * a.alpha + c.q * c.alpha);
        }
        let gap = b_star - pts[i].b;
        rows[i] = QIntegralRow {
            alpha: pts[i].alpha,
            gap,
            integral: acc,
            ratio: gap / acc,
        };
    }
    let r_min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let r_max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(QIntegralTable {
        rows,
        r_min,
        r_max,
        q_law: (coeff, gamma),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Decaying,
    Growing,
    Indeterminate,
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Decaying => "decaying",
            Trend::Growing => "growing",
            Trend::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub x: f64,
    /// `(alpha, (b* - b(alpha)) alpha^x)`
    pub products: Vec<(f64, f64)>,
    /// Mean over the last third divided by the mean over the first third.
    pub trend_ratio: f64,
    pub trend: Trend,
}

/// Factor between the first- and last-third means that counts as a trend.
pub const TREND_FACTOR: f64 = 3.0;

/// `(b* - b(alpha)) alpha^x` over the window, classified by comparing the
/// means of its first and last thirds.
pub fn scaled_limit_probe(
    curve: &SpectrumCurve,
    b_star: f64,
    exponents: &[f64],
    window: Option<(f64, f64)>,
) -> Result<Vec<ProbeResult>> {
    let window = window
        .or_else(|| default_window(curve))
        .ok_or(Error::InsufficientPoints { needed: 3, have: 0 })?;
    let pts = in_window(curve, window);
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            have: pts.len(),
        });
    }
    let third = pts.len() / 3;
    Ok(exponents
        .iter()
        .map(|&x| {
            let products: Vec<(f64, f64)> = pts.iter().map(|p| (p.alpha, (b_star - p.b) * p.alpha.powf(x))).collect();
            let mean = |s: &[(f64, f64)]| s.iter().map(|v| v.1).sum::<f64>() / s.len() as f64;
            let ratio = mean(&products[products.len() - third..]) / mean(&products[..third]);
            let trend = if ratio >= TREND_FACTOR {
                Trend::Growing
            } else if ratio <= 1.0 / TREND_FACTOR {
                Trend::Decaying
            } else {
                Trend::Indeterminate
            };
            ProbeResult {
                x,
                products,
                trend_ratio: ratio,
                trend,
            }
        })
        .collect())
}

/// Trend of `(b* - b(alpha)) alpha^x` predicted from `b* - b(alpha) ~
/// alpha^{-threshold}`: decay below the threshold, growth above it.
pub fn expected_trend(x: f64, threshold: f64) -> Trend {
    if x < threshold {
        Trend::Decaying
    } else if x > threshold {
        Trend::Growing
    } else {
        Trend::Indeterminate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{geometric_grid, solve_curve};
    use crate::systems::descriptor::SystemSpec;

    fn synthetic(exponent: f64) -> SpectrumCurve {
        // gap = alpha^{-e}, q = e alpha^{-e-1} (so that gap = int q), lambda = 1
        let grid = geometric_grid(1e2, 1e6, 41).unwrap();
        let points = grid
            .iter()
            .map(|&a| SpectrumPoint {
                alpha: a,
                q: exponent * a.powf(-exponent - 1.0),
                b: 1.0 - a.powf(-exponent),
                lyapunov: 1.0,
                entropy: 1.0,
                residual_p: 0.0,
                residual_dp: 0.0,
                mean_tau: a,
                truncation_n: 0,
                newton_iters: 0,
            })
            .collect();
        SpectrumCurve {
            grid,
            points,
            b_star: 1.0,
            failures: vec![],
        }
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let c = synthetic(1.0);
        let f = fit_rate_exponent(&c, 1.0, None, Some(0.5)).unwrap();
        assert!((f.fitted_exponent - 1.0).abs() < 1e-8);
        assert!((f.q_exponent_fit + 2.0).abs() < 1e-12);
        assert!((f.beta_rate - 0.5).abs() < 1e-8);
        assert_eq!(f.theoretical, 1.0);
        let t = q_integral_check(&c, 1.0).unwrap();
        assert!(t.r_min > 0.99 && t.r_max < 1.01, "{} {}", t.r_min, t.r_max);
    }

    #[test]
    fn probe_classification() {
        let c = synthetic(1.0);
        let r = scaled_limit_probe(&c, 1.0, &[0.0, 0.5, 1.0, 1.5], None).unwrap();
        assert_eq!(r[0].trend, Trend::Decaying);
        assert_eq!(r[1].trend, Trend::Decaying);
        assert_eq!(r[2].trend, Trend::Indeterminate);
        assert_eq!(r[3].trend, Trend::Growing);
        assert_eq!(expected_trend(0.5, 1.0), Trend::Decaying);
    }

    #[test]
    fn noise_guard_names_the_point() {
        let mut c = synthetic(1.0);
        let k = c.points.len() - 3;
        c.points[k].residual_p = 1e-3;
        match fit_rate_exponent(&c, 1.0, None, None) {
            Err(Error::GapBelowNoise { alpha, .. }) => assert_eq!(alpha, c.points[k].alpha),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn divergent_q_law_is_reported() {
        let mut c = synthetic(1.0);
        for p in &mut c.points {
            p.q = 1.0 / p.alpha;
        }
        assert!(matches!(q_integral_check(&c, 1.0), Err(Error::DivergentQTail { .. })));
    }

    #[test]
    fn lueroth_rate() {
        let s = SystemSpec::new("lueroth").build().unwrap();
        let c = solve_curve(&s, &geometric_grid(1e2, 1e5, 16).unwrap(), 1e-10).unwrap();
        let f = fit_rate_exponent(&c, c.b_star, Some((1e2, 1e5)), Some(0.5)).unwrap();
        assert!((f.fitted_exponent - 1.0).abs() < 0.15);
        let t = q_integral_check(&c, c.b_star).unwrap();
        assert!(t.r_max / t.r_min < 3.0);
    }
}
