//! Weighted letter sums `Z(q, b) = sum_a exp(-q tau_a - b L_a)` and their
//! first and second moments, for alphabets grouped into shells of equal
//! branches.
//!
//! Shells `1..=N` are summed explicitly. Shells beyond `N` are either absent,
//! continued by a smooth model (integral in `u = ln x` with Gauss-Legendre
//! panels, the midpoint Euler-Maclaurin correction and an exponential-affine
//! remainder), or continued geometrically.

use crate::error::{Error, Result};
use crate::numeric::{gl20, ordered_chunk_reduce, NeumaierSum};

/// One shell: `exp(log_count)` branches sharing the value `tau` and the
/// log-derivative `log_slope`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellTerm {
    pub log_count: f64,
    pub tau: f64,
    pub log_slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailKind {
    /// The alphabet ends with the explicit table.
    None,
    /// Shells continue with a smooth real-index model.
    Smooth,
    /// Log-count, log-tau and log-slope grow affinely in the shell index.
    Geometric,
}

pub trait ShellSource: Sync {
    fn shell_term(&self, n: u64) -> Result<ShellTerm>;
    fn smooth_term(&self, x: f64) -> Result<ShellTerm>;
    fn tail_kind(&self) -> TailKind;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LetterSums {
    pub log_z: f64,
    /// `+inf` when the tau series diverges.
    pub mean_tau: f64,
    pub mean_log_slope: f64,
    pub var_tau: f64,
    pub cov_tau_log_slope: f64,
    pub var_log_slope: f64,
    pub entropy: f64,
    /// Share of `Z` carried by shells beyond the explicit table.
    pub tail_mass: f64,
    /// Estimated relative error of `Z` from the tail treatment.
    pub tail_error: f64,
    pub explicit_shells: u64,
}

impl LetterSums {
    pub fn tau_moments_finite(&self) -> bool {
        self.mean_tau.is_finite()
    }
}

const NACC: usize = 7;
const NEGLIGIBLE: f64 = 1e-18;
const SMOOTH_PANEL: f64 = 0.125;
const SMOOTH_X_MAX: f64 = 1e40;
const GEOMETRIC_CAP: u64 = 690;

#[derive(Clone, Copy, Default)]
struct Acc([NeumaierSum; NACC]);

impl Acc {
    fn add(&mut self, v: &[f64; NACC]) {
        for (s, x) in self.0.iter_mut().zip(v) {
            s.add(*x);
        }
    }
    fn merge(mut self, other: Acc) -> Acc {
        for (s, o) in self.0.iter_mut().zip(other.0.iter()) {
            s.merge(o);
        }
        self
    }
    fn values(&self) -> [f64; NACC] {
        std::array::from_fn(|k| self.0[k].value())
    }
}

struct Frame {
    q: f64,
    b: f64,
    m: f64,
    c_tau: f64,
    c_l: f64,
}

impl Frame {
    /// Accumulator contributions of a shell, as values of the integrand in
    /// the shell index.
    fn terms(&self, t: &ShellTerm) -> [f64; NACC] {
        let lg = -self.q * t.tau - self.b * t.log_slope;
        let w = (t.log_count + lg - self.m).exp();
        if w == 0.0 {
            return [0.0; NACC];
        }
        let dt = t.tau - self.c_tau;
        let dl = t.log_slope - self.c_l;
        [
            w,
            w * dt,
            w * dl,
            w * dt * dt,
            w * dt * dl,
            w * dl * dl,
            w * (lg - self.m),
        ]
    }
}

/// Moments of the weights over explicit shells `1..=explicit.len()` plus the
/// tail described by `src`.
pub fn letter_sums(src: &dyn ShellSource, explicit: &[ShellTerm], q: f64, b: f64) -> Result<LetterSums> {
    if explicit.is_empty() {
        return Err(Error::range("at least one explicit shell is required"));
    }
    let mut imax = 0;
    let mut m = f64::NEG_INFINITY;
    for (i, t) in explicit.iter().enumerate() {
        let lw = t.log_count - q * t.tau - b * t.log_slope;
        if lw > m {
            m = lw;
            imax = i;
        }
    }
    if !m.is_finite() {
        return Err(Error::InfinitePressure { q, b });
    }
    let frame = Frame {
        q,
        b,
        m,
        c_tau: explicit[imax].tau,
        c_l: explicit[imax].log_slope,
    };
    let head = ordered_chunk_reduce(
        explicit.len(),
        |r| {
            let mut a = Acc::default();
            for t in &explicit[r] {
                a.add(&frame.terms(t));
            }
            a
        },
        Acc::merge,
        Acc::default(),
    );
    let head_vals = head.values();
    let n = explicit.len() as u64;

    let (tail, tail_error) = match src.tail_kind() {
        TailKind::None => ([0.0; NACC], 0.0),
        TailKind::Smooth => smooth_tail(src, &frame, n, &head_vals)?,
        TailKind::Geometric => (geometric_tail(src, &frame, n, &head_vals)?, 0.0),
    };

    let s: [f64; NACC] = std::array::from_fn(|k| head_vals[k] + tail[k]);
    if !(s[0].is_finite() && s[0] > 0.0) {
        return Err(Error::InfinitePressure { q, b });
    }
    let e1 = s[1] / s[0];
    let e2 = s[2] / s[0];
    let tau_finite = tail[1].is_finite() && tail[3].is_finite();
    let (mean_tau, var_tau, cov) = if tau_finite {
        (
            frame.c_tau + e1,
            s[3] / s[0] - e1 * e1,
            s[4] / s[0] - e1 * e2,
        )
    } else {
        let mean = if tail[1].is_finite() { frame.c_tau + e1 } else { f64::INFINITY };
        (mean, f64::INFINITY, f64::INFINITY)
    };
    Ok(LetterSums {
        log_z: m + s[0].ln(),
        mean_tau,
        mean_log_slope: frame.c_l + e2,
        var_tau,
        cov_tau_log_slope: cov,
        var_log_slope: s[5] / s[0] - e2 * e2,
        entropy: s[0].ln() - s[6] / s[0],
        tail_mass: tail[0] / s[0],
        tail_error: tail_error / s[0],
        explicit_shells: n,
    })
}

fn negligible(panel: &[f64; NACC], head: &[f64; NACC], tail: &Acc) -> bool {
    let tv = tail.values();
    (0..NACC).all(|k| {
        let scale = head[k].abs() + tv[k].abs();
        panel[k].abs() <= NEGLIGIBLE * scale || panel[k].abs() < 1e-300
    })
}

/// Integral of the shell model over `[N + 1/2, inf)` plus the midpoint
/// Euler-Maclaurin correction. Returns the accumulator values and an
/// absolute error estimate for the zeroth moment.
fn smooth_tail(
    src: &dyn ShellSource,
    fr: &Frame,
    n: u64,
    head: &[f64; NACC],
) -> Result<([f64; NACC], f64)> {
    if n < 16 {
        return Err(Error::range("smooth tails need at least 16 explicit shells"));
    }
    let x0 = n as f64 + 0.5;
    let at = |x: f64| -> Result<[f64; NACC]> { Ok(fr.terms(&src.smooth_term(x)?)) };

    // f'(x0)/24 - 7 f'''(x0)/5760 by central differences with step 1/4
    const H: f64 = 0.25;
    let fp1 = at(x0 + H)?;
    let fm1 = at(x0 - H)?;
    let fp2 = at(x0 + 2.0 * H)?;
    let fm2 = at(x0 - 2.0 * H)?;
    let mut tail = Acc::default();
    let d3 = |k: usize| (fp2[k] - 2.0 * fp1[k] + 2.0 * fm1[k] - fm2[k]) / (2.0 * H * H * H);
    let correction: [f64; NACC] = std::array::from_fn(|k| {
        let d1 = (8.0 * (fp1[k] - fm1[k]) - (fp2[k] - fm2[k])) / (12.0 * H);
        d1 / 24.0 - 7.0 * d3(k) / 5760.0
    });
    tail.add(&correction);
    let err = 2e-4 * d3(0).abs();

    let (nodes, weights) = gl20();
    let u_cap = SMOOTH_X_MAX.ln().max(x0.ln() + 20.0);
    let mut u = x0.ln();
    let mut quiet = 0;
    loop {
        let x_end = (u + SMOOTH_PANEL).exp();
        let t_end = src.smooth_term(x_end)?;
        if u + SMOOTH_PANEL > u_cap || t_end.tau > 1e150 {
            let rem = exp_affine_remainder(src, fr, u)?;
            tail.add(&rem);
            break;
        }
        let mut panel = [0.0; NACC];
        for (z, w) in nodes.iter().zip(weights) {
            let uu = u + 0.5 * SMOOTH_PANEL * (z + 1.0);
            let x = uu.exp();
            let f = at(x)?;
            let jac = 0.5 * SMOOTH_PANEL * w * x;
            for k in 0..NACC {
                panel[k] += jac * f[k];
            }
        }
        let quiet_now = negligible(&panel, head, &tail);
        tail.add(&panel);
        if quiet_now {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        u += SMOOTH_PANEL;
    }
    let vals = tail.values();
    if !vals[0].is_finite() {
        return Err(Error::InfinitePressure { q: fr.q, b: fr.b });
    }
    Ok((vals, err))
}

/// `int_u^inf` of the integrand assuming `ln(weight * x)`, `ln tau` and
/// `log_slope` are affine in `u` beyond the cut.
fn exp_affine_remainder(src: &dyn ShellSource, fr: &Frame, u: f64) -> Result<[f64; NACC]> {
    let h = 0.5;
    let t1 = src.smooth_term(u.exp())?;
    let t0 = src.smooth_term((u - h).exp())?;
    let lg = |t: &ShellTerm| t.log_count - fr.q * t.tau - fr.b * t.log_slope - fr.m;
    let lg1 = lg(&t1) + u;
    let lg0 = lg(&t0) + (u - h);
    let k0 = -(lg1 - lg0) / h;
    let r_tau = (t1.tau.ln() - t0.tau.ln()) / h;
    let kappa = (t1.log_slope - t0.log_slope) / h;
    let g0 = lg1.exp();
    let l0 = t1.log_slope - fr.c_l;
    let dt = t1.tau - fr.c_tau;
    let r = |i: i32, j: i32| -> f64 {
        let k = k0 - i as f64 * r_tau;
        if k <= 1e-9 {
            return f64::INFINITY;
        }
        let base = if g0 == 0.0 { return 0.0 } else { g0 * dt.powi(i) };
        let poly = match j {
            0 => 1.0 / k,
            1 => l0 / k + kappa / (k * k),
            _ => l0 * l0 / k + 2.0 * l0 * kappa / (k * k) + 2.0 * kappa * kappa / k.powi(3),
        };
        base * poly
    };
    let r0 = r(0, 0);
    if !r0.is_finite() {
        return Err(Error::InfinitePressure { q: fr.q, b: fr.b });
    }
    let r1 = r(1, 0);
    let r2 = r(0, 1);
    let ent = -fr.q * (r1 + fr.c_tau * r0) - fr.b * (r2 + fr.c_l * r0) - fr.m * r0;
    Ok([r0, r1, r2, r(2, 0), r(1, 1), r(0, 2), ent])
}

fn geometric_tail(src: &dyn ShellSource, fr: &Frame, n: u64, head: &[f64; NACC]) -> Result<[f64; NACC]> {
    let mut tail = Acc::default();
    let mut last = n;
    if fr.q > 0.0 {
        let mut quiet = 0;
        let mut k = n + 1;
        loop {
            if k > GEOMETRIC_CAP {
                break;
            }
            let f = fr.terms(&src.shell_term(k)?);
            let q_now = negligible(&f, head, &tail);
            tail.add(&f);
            last = k;
            if q_now {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(tail.values());
                }
            } else {
                quiet = 0;
            }
            k += 1;
        }
    }
    // closed-form remainder over shells last+1, last+2, ...
    let t0 = src.shell_term(last)?;
    let t1 = src.shell_term(last + 1)?;
    let gamma = t1.log_count - t0.log_count;
    let kappa = t1.log_slope - t0.log_slope;
    let rho_tau = t1.tau / t0.tau;
    let rho = (gamma - fr.b * kappa).exp();
    let w0 = (t0.log_count - fr.q * t0.tau - fr.b * t0.log_slope - fr.m).exp();
    let l0 = t0.log_slope - fr.c_l;
    let dt = t0.tau - fr.c_tau;
    let r = |i: i32, j: i32| -> f64 {
        let p = rho * rho_tau.powi(i);
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if w0 == 0.0 {
            return 0.0;
        }
        let s0 = p / (1.0 - p);
        let s1 = p / (1.0 - p).powi(2);
        let s2 = p * (1.0 + p) / (1.0 - p).powi(3);
        let poly = match j {
            0 => s0,
            1 => l0 * s0 + kappa * s1,
            _ => l0 * l0 * s0 + 2.0 * l0 * kappa * s1 + kappa * kappa * s2,
        };
        w0 * dt.powi(i) * poly
    };
    let r0 = r(0, 0);
    if !r0.is_finite() {
        return Err(Error::InfinitePressure { q: fr.q, b: fr.b });
    }
    let r1 = r(1, 0);
    let r2 = r(0, 1);
    let ent = -fr.q * (r1 + fr.c_tau * r0) - fr.b * (r2 + fr.c_l * r0) - fr.m * r0;
    tail.add(&[r0, r1, r2, r(2, 0), r(1, 1), r(0, 2), ent]);
    Ok(tail.values())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// tau = n^2, one branch of slope n(n+1) per shell.
    struct Lueroth;
    impl ShellSource for Lueroth {
        fn shell_term(&self, n: u64) -> Result<ShellTerm> {
            self.smooth_term(n as f64)
        }
        fn smooth_term(&self, x: f64) -> Result<ShellTerm> {
            Ok(ShellTerm {
                log_count: 0.0,
                tau: x * x,
                log_slope: (x * (x + 1.0)).ln(),
            })
        }
        fn tail_kind(&self) -> TailKind {
            TailKind::Smooth
        }
    }

    fn table(src: &dyn ShellSource, n: u64) -> Vec<ShellTerm> {
        (1..=n).map(|k| src.shell_term(k).unwrap()).collect()
    }

    #[test]
    fn telescoping_series_has_zero_log_sum() {
        let t = table(&Lueroth, 256);
        let s = letter_sums(&Lueroth, &t, 0.0, 1.0).unwrap();
        assert!(s.log_z.abs() < 1e-13, "{}", s.log_z);
        assert!(s.mean_tau.is_infinite());
    }

    #[test]
    fn tail_matches_long_explicit_sum() {
        let short = table(&Lueroth, 64);
        let long = table(&Lueroth, 200_000);
        for (q, b) in [(1e-3, 0.7), (1e-6, 0.9), (0.05, 0.2)] {
            let a = letter_sums(&Lueroth, &short, q, b).unwrap();
            let c = letter_sums(&Lueroth, &long, q, b).unwrap();
            assert!((a.log_z - c.log_z).abs() < 1e-12, "q={q} b={b}");
            assert!((a.mean_tau / c.mean_tau - 1.0).abs() < 1e-11, "q={q} b={b}");
            assert!((a.var_tau / c.var_tau - 1.0).abs() < 1e-9, "q={q} b={b}");
            assert!((a.entropy - c.entropy).abs() < 1e-11);
        }
    }

    #[test]
    fn divergent_zero_moment_is_reported() {
        let t = table(&Lueroth, 64);
        assert!(matches!(
            letter_sums(&Lueroth, &t, 0.0, 0.5),
            Err(Error::InfinitePressure { .. })
        ));
        assert!(letter_sums(&Lueroth, &t, 0.0, 0.55).is_ok());
    }

    #[test]
    fn near_threshold_remainder_is_accurate() {
        // sum (n(n+1))^{-b} for b = 0.6 against a zeta-based evaluation
        let t = table(&Lueroth, 64);
        let s = letter_sums(&Lueroth, &t, 0.0, 0.6).unwrap();
        let mut exact = NeumaierSum::new();
        let cut = 100_000u64;
        for k in 1..cut {
            exact.add((k as f64 * (k as f64 + 1.0)).powf(-0.6));
        }
        // beyond the cut: n^{-1.2}(1+1/n)^{-0.6} = n^{-1.2} - 0.6 n^{-2.2} + 0.48 n^{-3.2}
        exact.add(crate::numeric::hurwitz_tail(1.2, cut));
        exact.add(-0.6 * crate::numeric::hurwitz_tail(2.2, cut));
        exact.add(0.48 * crate::numeric::hurwitz_tail(3.2, cut));
        assert!((s.log_z - exact.value().ln()).abs() < 1e-10, "{} vs {}", s.log_z, exact.value().ln());
    }
}
