//! Two-sided pressure bounds for maps whose potential is not locally
//! constant, using truncation to letters `1..=N` and a bounded tail.

use rayon::prelude::*;

use super::{finiteness_abscissa, finiteness_check, locally_constant_estimate, Potential, PressureEstimate};
use crate::error::{Error, Result};
use crate::numeric::{chebyshev_lobatto, NeumaierSum};
use crate::series::letter_sums;
use crate::systems::{FullBranchMap, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SandwichMethod {
    /// Collatz-Wielandt bounds `inf Lh/h <= e^P <= sup Lh/h` for
    /// `h = L_N^{n-1} h0`, evaluated on a Chebyshev grid.
    Ratio,
    /// `(1/n) ln` of the sums of inf and sup of `exp(S_n psi)` over
    /// n-cylinders.
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichConfig {
    pub depth: u32,
    pub truncation: u64,
    pub method: SandwichMethod,
    /// Grid size for the ratio method.
    pub grid_points: usize,
    /// Refuse to enumerate more than this many words.
    pub word_cap: u64,
}

impl SandwichConfig {
    pub fn new(depth: u32, truncation: u64) -> Self {
        Self {
            depth,
            truncation,
            method: SandwichMethod::Ratio,
            grid_points: 17,
            word_cap: 100_000_000,
        }
    }

    pub fn method(mut self, method: SandwichMethod) -> Self {
        self.method = method;
        self
    }
}

/// Pressure sandwich with the ratio method.
pub fn pressure_cylinder_sandwich(
    system: &System,
    potential: &Potential,
    depth: u32,
    truncation: u64,
) -> Result<PressureEstimate> {
    pressure_sandwich_with(system, potential, &SandwichConfig::new(depth, truncation))
}

/// Estimates for depths `1..=max_depth`.
pub fn sandwich_by_depth(
    system: &System,
    potential: &Potential,
    max_depth: u32,
    truncation: u64,
    method: SandwichMethod,
) -> Result<Vec<PressureEstimate>> {
    (1..=max_depth)
        .map(|d| pressure_sandwich_with(system, potential, &SandwichConfig::new(d, truncation).method(method)))
        .collect()
}

pub fn pressure_sandwich_with(system: &System, potential: &Potential, cfg: &SandwichConfig) -> Result<PressureEstimate> {
    if cfg.depth == 0 || cfg.truncation == 0 {
        return Err(Error::range("sandwich depth and truncation must be positive"));
    }
    if !finiteness_check(system, potential).finite {
        return Err(Error::InfinitePressure {
            q: potential.q,
            b: potential.b,
        });
    }
    if system.is_constant_slope() {
        let mut e = locally_constant_estimate(system, potential, f64::INFINITY)?;
        e.depth_n = cfg.depth;
        return Ok(e);
    }
    let n = match system.shell_limit() {
        Some(l) => cfg.truncation.min(system.letters_through_shell(l)),
        None => cfg.truncation,
    };
    let words = (n as f64).powi(cfg.depth as i32);
    if words > cfg.word_cap as f64 {
        return Err(Error::WordCountOverflow {
            words,
            cap: cfg.word_cap as f64,
        });
    }
    let taus: Vec<f64> = (1..=n).map(|a| system.tau(a)).collect::<Result<_>>()?;
    let tail = tail_sum(system, potential, n)?;
    let (lo, hi) = match cfg.method {
        SandwichMethod::Ratio => ratio_bounds(system, potential, cfg, &taus, tail)?,
        SandwichMethod::Cylinder => cylinder_bounds(system, potential, cfg.depth, &taus, tail)?,
    };
    let shift = potential.q * potential.alpha;
    let (lower, upper) = (lo + shift, hi + shift);
    Ok(PressureEstimate {
        lower,
        upper,
        value: 0.5 * (lower + upper),
        truncation_n: n,
        depth_n: cfg.depth,
        tail_bound: tail,
    })
}

/// Upper bound for `sum_{a>N} sup_[a] exp(psi)`.
fn tail_sum(system: &System, potential: &Potential, n: u64) -> Result<f64> {
    if system.shell_limit().is_some_and(|l| system.letters_through_shell(l) <= n) {
        return Ok(0.0);
    }
    let table = system.shell_table(n)?;
    let s = letter_sums(system, &table, potential.q, potential.b)?;
    let d = system.map.tail_distortion(n)?;
    Ok(d.powf(potential.b.abs()) * s.log_z.exp() * (s.tail_mass + s.tail_error))
}

/// `h_k(y)` for the truncated transfer operator applied `k` times to the seed.
fn iterate(
    map: &FullBranchMap,
    k: u32,
    y: f64,
    taus: &[f64],
    potential: &Potential,
) -> Result<f64> {
    if k == 0 {
        return Ok(map.ratio_seed(y, potential.b));
    }
    let branches = map.inverse_branches(y, taus.len() as u64)?;
    let mut acc = NeumaierSum::new();
    for ((x, ld), tau) in branches.iter().zip(taus) {
        let w = (-potential.q * tau - potential.b * ld).exp();
        if w > 0.0 {
            acc.add(w * iterate(map, k - 1, *x, taus, potential)?);
        }
    }
    Ok(acc.value())
}

fn ratio_bounds(
    system: &System,
    potential: &Potential,
    cfg: &SandwichConfig,
    taus: &[f64],
    tail: f64,
) -> Result<(f64, f64)> {
    let map = &*system.map;
    let (a, b) = map.image;
    let grid = chebyshev_lobatto(a, b, cfg.grid_points.max(2));
    let k = cfg.depth;
    let vals: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| Ok((iterate(map, k, x, taus, potential)?, iterate(map, k - 1, x, taus, potential)?)))
        .collect::<Result<_>>()?;
    let h_sup_tail = if tail > 0.0 {
        let (lo, hi) = map.tail_region(taus.len() as u64)?;
        let mut m = 0.0f64;
        for i in 0..=8 {
            let y = lo + (hi - lo) * i as f64 / 8.0;
            m = m.max(iterate(map, k - 1, y, taus, potential)?);
        }
        // h_{k-1} is sampled, not bounded; k = 1 uses the monotone seed exactly
        if k > 1 {
            m *= 1.05;
        }
        m
    } else {
        0.0
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (hk, hk1) in vals {
        lo = lo.min(hk / hk1);
        hi = hi.max((hk + tail * h_sup_tail) / hk1);
    }
    Ok((lo.ln(), hi.ln()))
}

/// Inf and sup of `ln|(F^n)'|` on the cylinder of `word`, from the images of
/// the endpoints of the image interval; every builtin has monotone `ln|F'|`
/// on each branch, so per-step extremes sit at the endpoints.
pub fn cylinder_derivative_bounds(map: &FullBranchMap, word: &[u64]) -> Result<(f64, f64)> {
    let (mut y1, mut y2) = map.image;
    let (mut lo, mut hi) = (0.0, 0.0);
    for &a in word.iter().rev() {
        let (p1, l1) = map.inverse_branch(a, y1)?;
        let (p2, l2) = map.inverse_branch(a, y2)?;
        lo += l1.min(l2);
        hi += l1.max(l2);
        y1 = p1;
        y2 = p2;
    }
    Ok((lo, hi))
}

struct WordSums {
    inf: NeumaierSum,
    sup: NeumaierSum,
}

#[allow(clippy::too_many_arguments)]
fn descend(
    map: &FullBranchMap,
    level: u32,
    ends: (f64, f64),
    acc: (f64, f64, f64),
    taus: &[f64],
    potential: &Potential,
    out: &mut WordSums,
) -> Result<()> {
    let n = taus.len() as u64;
    let b1 = map.inverse_branches(ends.0, n)?;
    let b2 = map.inverse_branches(ends.1, n)?;
    for (i, tau) in taus.iter().enumerate() {
        let ((p1, l1), (p2, l2)) = (b1[i], b2[i]);
        let next = (acc.0 + tau, acc.1 + l1.min(l2), acc.2 + l1.max(l2));
        if level == 1 {
            let base = -potential.q * next.0;
            let (x, y) = (potential.b * next.1, potential.b * next.2);
            out.inf.add((base - x.max(y)).exp());
            out.sup.add((base - x.min(y)).exp());
        } else {
            descend(map, level - 1, (p1, p2), next, taus, potential, out)?;
        }
    }
    Ok(())
}

fn cylinder_bounds(system: &System, potential: &Potential, depth: u32, taus: &[f64], tail: f64) -> Result<(f64, f64)> {
    let map = &*system.map;
    let n = taus.len();
    let (e1, e2) = map.image;
    let b1 = map.inverse_branches(e1, n as u64)?;
    let b2 = map.inverse_branches(e2, n as u64)?;
    // split on the innermost letter; merge in letter order
    let parts: Vec<(NeumaierSum, NeumaierSum)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ((p1, l1), (p2, l2)) = (b1[i], b2[i]);
            let start = (taus[i], l1.min(l2), l1.max(l2));
            let mut out = WordSums {
                inf: NeumaierSum::new(),
                sup: NeumaierSum::new(),
            };
            if depth == 1 {
                let base = -potential.q * start.0;
                let (x, y) = (potential.b * start.1, potential.b * start.2);
                out.inf.add((base - x.max(y)).exp());
                out.sup.add((base - x.min(y)).exp());
            } else {
                descend(map, depth - 1, (p1, p2), start, taus, potential, &mut out)?;
            }
            Ok((out.inf, out.sup))
        })
        .collect::<Result<_>>()?;
    let mut inf = NeumaierSum::new();
    let mut sup = NeumaierSum::new();
    for (i, s) in &parts {
        inf.merge(i);
        sup.merge(s);
    }
    let mut upper = sup.value();
    if tail > 0.0 {
        // words with at least one letter beyond N
        let mut z1 = NeumaierSum::new();
        for (a, tau) in (1..=n as u64).zip(taus) {
            let (_, d) = map.branch_geometry(a)?;
            let (lo, hi) = d.log_bounds();
            let (x, y) = (potential.b * lo, potential.b * hi);
            z1.add((-potential.q * tau - x.min(y)).exp());
        }
        let z1 = z1.value();
        let k = depth as i32;
        upper += (z1 + tail).powi(k) - z1.powi(k);
    }
    let k = depth as f64;
    Ok((inf.value().ln() / k, upper.ln() / k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionSandwich {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub depth: u32,
    pub truncation: u64,
}

impl DimensionSandwich {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Enclosure of the Bowen root from the roots of the lower and upper
/// pressure bounds.
pub fn bowen_sandwich(system: &System, cfg: &SandwichConfig) -> Result<DimensionSandwich> {
    if system.is_constant_slope() {
        let r = super::bowen_dimension(system, 1e-14)?;
        return Ok(DimensionSandwich {
            lower: r.bracket.0.min(r.b_star),
            upper: r.bracket.1.max(r.b_star),
            value: r.b_star,
            depth: cfg.depth,
            truncation: cfg.truncation,
        });
    }
    let abscissa = finiteness_abscissa(system);
    let t0 = if abscissa.is_finite() { abscissa.max(0.0) + 0.05 } else { 0.0 };
    let bound = |t: f64, upper: bool| -> Result<f64> {
        let e = pressure_sandwich_with(system, &Potential::new(0.0, t), cfg)?;
        Ok(if upper { e.upper } else { e.lower })
    };
    let root = |upper: bool| -> Result<f64> {
        let mut lo = t0;
        if bound(lo, upper)? <= 0.0 {
            return Err(Error::NoSignChange { lo, hi: lo });
        }
        let mut hi = lo + 1.0;
        while bound(hi, upper)? > 0.0 {
            lo = hi;
            hi += 1.0;
            if hi > 64.0 {
                return Err(Error::NoSignChange { lo: t0, hi });
            }
        }
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if bound(mid, upper)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if upper { hi } else { lo })
    };
    let lower = root(false)?;
    let upper = root(true)?;
    Ok(DimensionSandwich {
        lower,
        upper,
        value: 0.5 * (lower + upper),
        depth: cfg.depth,
        truncation: cfg.truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::descriptor::SystemSpec;

    #[test]
    fn gauss_sandwich_contains_zero_at_b1() {
        let g = SystemSpec::new("gauss").build().unwrap();
        for method in [SandwichMethod::Ratio, SandwichMethod::Cylinder] {
            let e = pressure_sandwich_with(&g, &Potential::new(0.0, 1.0), &SandwichConfig::new(2, 60).method(method))
                .unwrap();
            assert!(e.lower <= 0.0 && e.upper >= 0.0, "{method:?} {e:?}");
        }
    }

    #[test]
    fn ratio_is_tighter_than_cylinder() {
        let g = SystemSpec::new("gauss").build().unwrap();
        let p = Potential::new(0.0, 1.2);
        let r = pressure_sandwich_with(&g, &p, &SandwichConfig::new(2, 60)).unwrap();
        let c = pressure_sandwich_with(&g, &p, &SandwichConfig::new(2, 60).method(SandwichMethod::Cylinder)).unwrap();
        assert!(r.width() < c.width());
        assert!(r.upper > c.lower && c.upper > r.lower);
    }

    #[test]
    fn mp_sandwich_contains_zero_at_b1() {
        let m = SystemSpec::new("mp_induced").build().unwrap();
        let e = pressure_cylinder_sandwich(&m, &Potential::new(0.0, 1.0), 2, 40).unwrap();
        assert!(e.lower <= 0.0 && e.upper >= 0.0, "{e:?}");
    }

    #[test]
    fn gauss_word_derivative_bounds() {
        let g = SystemSpec::new("gauss").build().unwrap();
        let (lo, hi) = cylinder_derivative_bounds(&g.map, &[2]).unwrap();
        assert!((lo - 2.0 * 2f64.ln()).abs() < 1e-15 && (hi - 2.0 * 3f64.ln()).abs() < 1e-15);
        let (lo2, hi2) = cylinder_derivative_bounds(&g.map, &[1, 1]).unwrap();
        assert!(lo2 < hi2 && lo2 > 0.0);
    }

    #[test]
    fn word_cap_is_enforced() {
        let g = SystemSpec::new("gauss").build().unwrap();
        let mut cfg = SandwichConfig::new(4, 1000);
        cfg.word_cap = 1000;
        let err = pressure_sandwich_with(&g, &Potential::new(0.0, 1.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::WordCountOverflow { .. }));
    }
}
