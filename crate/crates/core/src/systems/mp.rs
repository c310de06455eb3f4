//! First-return map of the Manneville-Pomeau map to (1/2, 1].
//!
//! The left branch is `f_L(x) = x + c x^{1+lambda}` with `c = 2^lambda`, so
//! `f_L(1/2) = 1`. The backward orbit `x_0 = 1/2`, `f_L(x_k) = x_{k-1}` cuts
//! (1/2, 1] into the branches of the induced map: return time 1 on (3/4, 1],
//! return time `n >= 2` on `[(1 + x_{n-1})/2, (1 + x_{n-2})/2)`.

use std::sync::{OnceLock, RwLock};

use crate::error::{Error, Result};

/// Depth at which the Fatou coordinate constant is fitted to the exact orbit.
const FATOU_FIT_DEPTH: usize = 1 << 16;

#[derive(Debug)]
pub struct MpMap {
    lambda: f64,
    c: f64,
    // orbit[k] = x_k, log_deriv_prefix[k] = sum_{j<k} ln f_L'(x_j)
    orbit: RwLock<(Vec<f64>, Vec<f64>)>,
    fatou: OnceLock<Fatou>,
}

impl MpMap {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(Error::range(format!("mp_induced needs lambda > 1, got {lambda}")));
        }
        Ok(Self {
            lambda,
            c: 2f64.powf(lambda),
            orbit: RwLock::new((vec![0.5], vec![0.0])),
            fatou: OnceLock::new(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficient(&self) -> f64 {
        self.c
    }

    pub fn left(&self, x: f64) -> f64 {
        x + self.c * x.powf(1.0 + self.lambda)
    }

    pub fn left_derivative(&self, x: f64) -> f64 {
        1.0 + (1.0 + self.lambda) * self.c * x.powf(self.lambda)
    }

    /// Solve `f_L(y) = target` for `y` in `[0, target]`.
    pub fn left_preimage(&self, target: f64, depth: u64) -> Result<f64> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::RootFinder {
                depth,
                detail: format!("target {target} outside (0, 1]"),
            });
        }
        let (mut lo, mut hi) = (0.0f64, target);
        // A few bisection steps give a bracket on which Newton is monotone.
        for _ in 0..4 {
            let mid = 0.5 * (lo + hi);
            if self.left(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = target / (1.0 + self.c * target.powf(self.lambda));
        if !(y > lo && y < hi) {
            y = 0.5 * (lo + hi);
        }
        for _ in 0..100 {
            let g = self.left(y) - target;
            if g < 0.0 {
                lo = lo.max(y);
            } else {
                hi = hi.min(y);
            }
            let mut next = y - g / self.left_derivative(y);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - y).abs();
            y = next;
            if step <= 1e-15 * y || hi - lo <= 1e-14 * y.max(1e-300) {
                // one polishing Newton step
                let g = self.left(y) - target;
                y -= g / self.left_derivative(y);
                let resid = (self.left(y) - target).abs();
                if resid <= 8.0 * f64::EPSILON * target {
                    return Ok(y);
                }
                return Err(Error::RootFinder {
                    depth,
                    detail: format!("residual {resid:e} after convergence"),
                });
            }
        }
        Err(Error::RootFinder {
            depth,
            detail: "iteration cap reached".into(),
        })
    }

    fn ensure_orbit(&self, k: usize) -> Result<()> {
        if self.orbit.read().expect("orbit lock").0.len() > k {
            return Ok(());
        }
        let mut guard = self.orbit.write().expect("orbit lock");
        let (xs, prefix) = &mut *guard;
        while xs.len() <= k {
            let last = *xs.last().unwrap();
            let next = self.left_preimage(last, xs.len() as u64)?;
            prefix.push(prefix.last().unwrap() + self.left_derivative(last).ln());
            xs.push(next);
        }
        Ok(())
    }

    /// `x_k` of the backward orbit of 1/2.
    pub fn orbit_point(&self, k: usize) -> Result<f64> {
        self.ensure_orbit(k)?;
        Ok(self.orbit.read().expect("orbit lock").0[k])
    }

    /// `sum_{j<k} ln f_L'(x_j)`.
    fn log_derivative_prefix(&self, k: usize) -> Result<f64> {
        self.ensure_orbit(k)?;
        Ok(self.orbit.read().expect("orbit lock").1[k])
    }

    /// `x_k` for real `k >= 1`: exact orbit at integers inside the table,
    /// Fatou-coordinate interpolation elsewhere.
    pub fn orbit_point_real(&self, k: f64) -> Result<f64> {
        if k.fract() == 0.0 && k >= 0.0 && k < FATOU_FIT_DEPTH as f64 {
            return self.orbit_point(k as usize);
        }
        let y = self.fatou()?.inverse(k);
        Ok(y.powf(-1.0 / self.lambda))
    }

    /// `ln x_k` for real `k`, without underflow for huge `k`.
    pub fn log_orbit_point_real(&self, k: f64) -> Result<f64> {
        if k.fract() == 0.0 && k >= 0.0 && k < FATOU_FIT_DEPTH as f64 {
            return Ok(self.orbit_point(k as usize)?.ln());
        }
        Ok(-self.fatou()?.inverse(k).ln() / self.lambda)
    }

    pub fn fatou(&self) -> Result<&Fatou> {
        if let Some(f) = self.fatou.get() {
            return Ok(f);
        }
        let x = self.orbit_point(FATOU_FIT_DEPTH)?;
        let mut f = Fatou::new(self.lambda, self.c);
        f.shift = f.phi(x.powf(-self.lambda)) - FATOU_FIT_DEPTH as f64;
        Ok(self.fatou.get_or_init(|| f))
    }

    /// Interval of the branch with return time `n`.
    pub fn branch_interval(&self, n: u64) -> Result<(f64, f64)> {
        if n == 1 {
            return Ok((0.75, 1.0));
        }
        let n = n as usize;
        Ok((
            0.5 * (1.0 + self.orbit_point(n - 1)?),
            0.5 * (1.0 + self.orbit_point(n - 2)?),
        ))
    }

    /// Length of branch `n`, `c x_{n-1}^{1+lambda} / 2`, free of cancellation.
    pub fn branch_length(&self, n: u64) -> Result<f64> {
        let x = self.orbit_point(n as usize - 1)?;
        Ok(0.5 * self.c * x.powf(1.0 + self.lambda))
    }

    /// `ln(2 |I_n|)` for real `n >= 1`.
    pub fn log_normalized_length(&self, n: f64) -> Result<f64> {
        Ok(self.c.ln() + (1.0 + self.lambda) * self.log_orbit_point_real(n - 1.0)?)
    }

    /// Bounds of `ln|F'|` over branch `n`. `F'` is monotone on each branch,
    /// so the extremes sit at the endpoints.
    pub fn log_slope_bounds(&self, n: u64) -> Result<(f64, f64)> {
        let n = n as usize;
        let ln2 = std::f64::consts::LN_2;
        if n == 1 {
            return Ok((ln2, ln2));
        }
        let hi = ln2 + self.log_derivative_prefix(n - 1)?;
        let lo = ln2 + self.log_derivative_prefix(n)? - self.log_derivative_prefix(1)?;
        Ok((lo, hi))
    }

    /// Inverse branches `1..=n` evaluated at `t` in [1/2, 1]: pairs
    /// `(psi_a(t), ln|F'(psi_a(t))|)`.
    pub fn inverse_branches(&self, t: f64, n: u64) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(n as usize);
        let ln2 = std::f64::consts::LN_2;
        let mut z = t;
        let mut acc = 0.0;
        out.push((0.5 * (1.0 + t), ln2));
        for a in 2..=n {
            z = self.left_preimage(z, a - 1)?;
            acc += self.left_derivative(z).ln();
            out.push((0.5 * (1.0 + z), ln2 + acc));
        }
        Ok(out)
    }

    /// Log-derivative of `F` at `y` in branch `n`.
    pub fn log_derivative_at(&self, n: u64, y: f64) -> f64 {
        let mut z = 2.0 * y - 1.0;
        let mut acc = std::f64::consts::LN_2;
        for _ in 1..n {
            acc += self.left_derivative(z).ln();
            z = self.left(z);
        }
        acc
    }
}

/// Asymptotic Fatou coordinate in `y = x^{-lambda}`:
/// `Phi(y) = y/(lambda c) + B ln y + d1/y + d2/y^2`, with `Phi(y_k) - k`
/// constant along the backward orbit up to `O(y^{-3})`.
#[derive(Clone, Debug)]
pub struct Fatou {
    lc: f64,
    b: f64,
    d1: f64,
    d2: f64,
    pub shift: f64,
}

impl Fatou {
    fn new(lambda: f64, c: f64) -> Self {
        let l = lambda;
        let d0 = l * c;
        let dd1 = -l * (l + 1.0) * c * c / 2.0;
        let dd2 = l * (l + 1.0) * (l + 2.0) * c.powi(3) / 6.0;
        let dd3 = -l * (l + 1.0) * (l + 2.0) * (l + 3.0) * c.powi(4) / 24.0;
        let b = (l + 1.0) / (2.0 * l);
        let lc = l * c;
        let d1 = (dd2 / lc + b * dd1 + b * d0 * d0 / 2.0) / d0;
        let d2 = (dd3 / lc + b * dd2 - d1 * dd1 + b * d0 * dd1 - d1 * d0 * d0 + b * d0.powi(3) / 3.0)
            / (2.0 * d0);
        Self {
            lc,
            b,
            d1,
            d2,
            shift: 0.0,
        }
    }

    pub fn phi(&self, y: f64) -> f64 {
        y / self.lc + self.b * y.ln() + self.d1 / y + self.d2 / (y * y)
    }

    fn phi_prime(&self, y: f64) -> f64 {
        1.0 / self.lc + self.b / y - self.d1 / (y * y) - 2.0 * self.d2 / (y * y * y)
    }

    /// `y` with `Phi(y) = k + shift`.
    pub fn inverse(&self, k: f64) -> f64 {
        let target = k + self.shift;
        let mut y = (self.lc * (target - self.b * (self.lc * target.max(1.0)).ln())).max(self.lc);
        for _ in 0..60 {
            let step = (self.phi(y) - target) / self.phi_prime(y);
            y -= step;
            if step.abs() <= 1e-16 * y {
                break;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_branch_matches_cubic_root() {
        let m = MpMap::new(2.0).unwrap();
        let w = m.orbit_point(1).unwrap();
        assert!((4.0 * w.powi(3) + w - 0.5).abs() < 1e-15);
        assert!((w - 0.34115).abs() < 1e-4);
        let (lo, hi) = m.branch_interval(2).unwrap();
        assert!((lo - 0.5 * (1.0 + w)).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
        assert_eq!(m.branch_interval(1).unwrap(), (0.75, 1.0));
    }

    #[test]
    fn branch_lengths_tile_half_interval() {
        for lambda in [1.5, 2.0, 3.0] {
            let m = MpMap::new(lambda).unwrap();
            let n = 5000u64;
            let total: f64 = (1..=n).map(|k| m.branch_length(k).unwrap()).sum();
            let rest = 0.5 * m.orbit_point(n as usize - 1).unwrap();
            assert!((total + rest - 0.5).abs() < 1e-13, "lambda={lambda}");
        }
    }

    #[test]
    fn fatou_residual_scales_like_y_to_minus_four() {
        let m = MpMap::new(2.0).unwrap();
        let f = m.fatou().unwrap();
        let c = m.coefficient();
        let l = m.lambda();
        let resid = |y: f64| {
            let d = y - y * (1.0 + c / y).powf(-l);
            f.phi(y) - f.phi(y - d) - 1.0
        };
        let r1 = resid(200.0);
        let r2 = resid(400.0);
        let ratio = r1 / r2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}, r1 {r1:e}");
    }

    #[test]
    fn fatou_coordinate_tracks_exact_orbit() {
        let m = MpMap::new(2.0).unwrap();
        let f = m.fatou().unwrap();
        for k in [2000usize, 10_000, 40_000] {
            let x = m.orbit_point(k).unwrap();
            let from_fatou = m.orbit_point_real(k as f64 + 0.5).unwrap();
            assert!(from_fatou < x);
            let y = x.powf(-2.0);
            assert!((f.phi(y) - f.shift - k as f64).abs() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn slope_bounds_contain_mean_slope() {
        let m = MpMap::new(2.0).unwrap();
        for n in 1..200u64 {
            let (lo, hi) = m.log_slope_bounds(n).unwrap();
            let mean = -(2.0 * m.branch_length(n).unwrap()).ln();
            assert!(lo <= mean + 1e-12 && mean <= hi + 1e-12, "n={n}");
            let (a, b) = m.branch_interval(n).unwrap();
            let at_a = m.log_derivative_at(n, a);
            let at_b = m.log_derivative_at(n, b);
            assert!((at_a - lo).abs() < 1e-9 && (at_b - hi).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn inverse_branches_land_in_their_branch() {
        let m = MpMap::new(2.0).unwrap();
        let inv = m.inverse_branches(0.8, 50).unwrap();
        for (a, (y, ld)) in inv.iter().enumerate() {
            let n = a as u64 + 1;
            let (lo, hi) = m.branch_interval(n).unwrap();
            assert!(*y >= lo && *y <= hi, "letter {n}");
            assert!((m.log_derivative_at(n, *y) - ld).abs() < 1e-10);
        }
    }
}
