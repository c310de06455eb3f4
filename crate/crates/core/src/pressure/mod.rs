//! Topological pressure of `q(alpha - tau) - b log|F'|`, its equilibrium
//! weights and the Bowen dimension.
//!
//! For constant-slope systems the potential is constant on 1-cylinders and
//! the pressure is `log sum_a exp(psi_a)`. For the Gauss and MP systems the
//! letter-sum routines use the depth-1 representative slope `-log mu([a])`
//! (a locally constant potential with the same Bowen root and the same
//! 1-cylinder marginals of the measure of maximal dimension); the true map
//! is handled by the sandwiches in [`sandwich`].

mod sandwich;

use log::debug;

use crate::error::{Error, Result};
use crate::series::{letter_sums, LetterSums, ShellSource};
use crate::systems::{Decay, System};

pub use sandwich::{
    bowen_sandwich, cylinder_derivative_bounds, pressure_cylinder_sandwich, pressure_sandwich_with,
    sandwich_by_depth, DimensionSandwich, SandwichConfig, SandwichMethod,
};

/// The potential `q (alpha - tau) - b log|F'|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    pub alpha: f64,
    pub q: f64,
    pub b: f64,
}

impl Potential {
    pub fn new(q: f64, b: f64) -> Self {
        Self { alpha: 0.0, q, b }
    }

    pub fn with_alpha(alpha: f64, q: f64, b: f64) -> Self {
        Self { alpha, q, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureEstimate {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub truncation_n: u64,
    pub depth_n: u32,
    /// Sum of `exp(sup psi_a)` over the omitted letters.
    pub tail_bound: f64,
}

impl PressureEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// How the summability of `sum_a exp(sup_[a] psi)` was decided.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Comparison {
    FiniteAlphabet,
    /// `q < 0` with unbounded tau: terms do not tend to zero.
    NegativeQ,
    /// `q > 0`: shell terms are dominated by `count(n) e^{-q omega(n)}`,
    /// summable by (H1).
    ExponentialInTau { q: f64 },
    /// Shell terms decay like `n^{-exponent}`.
    Power { exponent: f64 },
    /// Shell terms decay like `e^{-rate n}`.
    Geometric { rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Finiteness {
    pub finite: bool,
    pub witness: Comparison,
}

/// Decide `P(psi) < inf` by the shell comparison series.
pub fn finiteness_check(system: &System, potential: &Potential) -> Finiteness {
    let (q, b) = (potential.q, potential.b);
    if system.shell_limit().is_some() {
        return Finiteness {
            finite: true,
            witness: Comparison::FiniteAlphabet,
        };
    }
    if q < 0.0 {
        return Finiteness {
            finite: false,
            witness: Comparison::NegativeQ,
        };
    }
    if q > 0.0 {
        return Finiteness {
            finite: true,
            witness: Comparison::ExponentialInTau { q },
        };
    }
    match system.map.q0_decay(b) {
        Decay::Power(p) => Finiteness {
            finite: p > 1.0,
            witness: Comparison::Power { exponent: p },
        },
        Decay::Geometric(r) => Finiteness {
            finite: r > 0.0,
            witness: Comparison::Geometric { rate: r },
        },
        Decay::Finite => Finiteness {
            finite: true,
            witness: Comparison::FiniteAlphabet,
        },
    }
}

/// Infimum of the `b` for which `P(-b log|F'|)` is finite.
pub fn finiteness_abscissa(system: &System) -> f64 {
    if system.shell_limit().is_some() {
        return f64::NEG_INFINITY;
    }
    let rate = |b: f64| match system.map.q0_decay(b) {
        Decay::Power(p) => p - 1.0,
        Decay::Geometric(r) => r,
        Decay::Finite => 1.0,
    };
    // the decay exponent is affine in b
    let (r0, r1) = (rate(0.0), rate(1.0));
    -r0 / (r1 - r0)
}

/// Moments of the depth-1 weights with the default explicit range.
pub fn letter_moments(system: &System, q: f64, b: f64) -> Result<LetterSums> {
    letter_moments_with(system, q, b, system.default_explicit())
}

pub fn letter_moments_with(system: &System, q: f64, b: f64, explicit: u64) -> Result<LetterSums> {
    let table = system.shell_table(explicit)?;
    letter_sums(system, &table, q, b)
}

/// `P(psi)` for a potential constant on 1-cylinders, with an
/// Euler-Maclaurin-corrected tail.
pub fn pressure_locally_constant(system: &System, potential: &Potential, tolerance: f64) -> Result<PressureEstimate> {
    if !system.is_constant_slope() {
        return Err(Error::NotLocallyConstant(system.name.clone()));
    }
    locally_constant_estimate(system, potential, tolerance)
}

pub(crate) fn locally_constant_estimate(
    system: &System,
    potential: &Potential,
    tolerance: f64,
) -> Result<PressureEstimate> {
    let fin = finiteness_check(system, potential);
    if !fin.finite {
        return Err(Error::InfinitePressure {
            q: potential.q,
            b: potential.b,
        });
    }
    const CAP: u64 = 1 << 20;
    let mut n = system.default_explicit();
    loop {
        let table = system.shell_table(n)?;
        let s = letter_sums(system, &table, potential.q, potential.b)?;
        let value = s.log_z + potential.q * potential.alpha;
        let half = s.tail_error;
        let est = PressureEstimate {
            lower: value - half,
            upper: value + half,
            value,
            truncation_n: s.explicit_shells,
            depth_n: 1,
            tail_bound: s.log_z.exp() * s.tail_mass,
        };
        debug!(
            "pressure q={} b={} alpha={} N={} value={:.17e} tail_mass={:e}",
            potential.q, potential.b, potential.alpha, s.explicit_shells, value, s.tail_mass
        );
        if est.width() <= tolerance {
            return Ok(est);
        }
        if n >= CAP || system.shell_limit().is_some_and(|l| l <= n) {
            return Err(Error::ToleranceUnreachable {
                tolerance,
                truncation: n,
                lower: est.lower,
                upper: est.upper,
            });
        }
        n *= 2;
    }
}

#[derive(Clone, Debug)]
pub struct GibbsMeasure {
    /// Weights of letters `1..=N`, normalised by the full partition sum.
    pub letter_weights: Vec<f64>,
    /// `1 - sum of letter_weights`: the mass of the letters beyond `N`.
    pub normalization_defect: f64,
    pub pressure: f64,
    pub entropy: f64,
    pub lyapunov: f64,
    /// `+inf` when the tau series diverges.
    pub mean_tau: f64,
    pub var_tau: f64,
    pub cov_tau_logf: f64,
    /// Constant `M` of the Gibbs inequality on 1-cylinders, from the
    /// distortion of the branches.
    pub gibbs_constant_estimate: f64,
}

/// Equilibrium weights of `-q tau - b log|F'|` on 1-cylinders.
pub fn gibbs_weights(system: &System, potential: &Potential, truncation: u64) -> Result<GibbsMeasure> {
    let fin = finiteness_check(system, potential);
    if !fin.finite {
        return Err(Error::InfinitePressure {
            q: potential.q,
            b: potential.b,
        });
    }
    let s = letter_moments(system, potential.q, potential.b)?;
    let letters = match system.shell_limit() {
        Some(l) => truncation.min(system.letters_through_shell(l)),
        None => truncation,
    };
    let mut weights = Vec::with_capacity(letters as usize);
    let mut total = crate::numeric::NeumaierSum::new();
    let mut log_m = 0.0f64;
    for a in 1..=letters {
        let (n, _) = system.shell_of_letter(a)?;
        let t = system.shell_term(n)?;
        let w = (-potential.q * t.tau - potential.b * t.log_slope - s.log_z).exp();
        total.add(w);
        weights.push(w);
        if !system.is_constant_slope() {
            let (_, d) = system.map.branch_geometry(a)?;
            let (lo, hi) = d.log_bounds();
            log_m = log_m.max(potential.b * (hi - lo));
        }
    }
    Ok(GibbsMeasure {
        letter_weights: weights,
        normalization_defect: 1.0 - total.value(),
        pressure: s.log_z + potential.q * potential.alpha,
        entropy: s.entropy,
        lyapunov: s.mean_log_slope,
        mean_tau: s.mean_tau,
        var_tau: s.var_tau,
        cov_tau_logf: s.cov_tau_log_slope,
        gibbs_constant_estimate: log_m.exp(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gradient {
    /// `dP/dq = -int tau`
    pub d_q: f64,
    /// `dP/db = -lambda`
    pub d_b: f64,
}

/// Gradient of `(q, b) -> P(-q tau - b log|F'|)`.
pub fn pressure_gradient(system: &System, potential: &Potential) -> Result<Gradient> {
    let fin = finiteness_check(system, potential);
    if !fin.finite {
        return Err(Error::InfinitePressure {
            q: potential.q,
            b: potential.b,
        });
    }
    let s = letter_moments(system, potential.q, potential.b)?;
    Ok(Gradient {
        d_q: -s.mean_tau,
        d_b: -s.mean_log_slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BowenRoot {
    pub b_star: f64,
    /// `|P(-b* log|F'|)|`
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Root of `t -> P(-t log|F'|)` by bisection safeguarded Newton.
pub fn bowen_dimension(system: &System, tolerance: f64) -> Result<BowenRoot> {
    let table = system.shell_table(system.default_explicit())?;
    let p = |t: f64| letter_sums(system, &table, 0.0, t);
    let abscissa = finiteness_abscissa(system);
    let mut lo = if abscissa.is_finite() { abscissa + 1e-6 } else { 0.0 };
    let mut hi = lo.max(0.0) + 1.0;
    let p_lo = p(lo)?.log_z;
    if p_lo <= 0.0 {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut p_hi = p(hi)?.log_z;
    while p_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoSignChange { lo, hi });
        }
        p_hi = p(hi)?.log_z;
    }
    let mut t = 0.5 * (lo + hi);
    for it in 1..=200 {
        let s = p(t)?;
        let val = s.log_z;
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if val.abs() <= tolerance || hi - lo <= 4.0 * f64::EPSILON * t {
            return Ok(BowenRoot {
                b_star: t,
                residual: val.abs(),
                bracket: (lo, hi),
                iterations: it,
            });
        }
        // dP/dt = -lambda < 0
        let newton = t + val / s.mean_log_slope;
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let val = p(t)?.log_z;
    Ok(BowenRoot {
        b_star: t,
        residual: val.abs(),
        bracket: (lo, hi),
        iterations: 200,
    })
}
