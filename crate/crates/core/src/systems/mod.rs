//! Countably-full-branched expanding maps of the interval and locally
//! constant observables on them.
//!
//! Branches are grouped into *shells*: all branches of a shell share the
//! observable value and the (representative) derivative. For the Lüroth,
//! Gauss, polynomial and MP systems every shell holds a single branch, so
//! shell `n` is letter `n`.

mod builtin;
pub mod descriptor;
pub mod mp;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::numeric::hurwitz_tail;
use crate::series::{ShellSource, ShellTerm, TailKind};

pub use builtin::{build_builtin, BUILTIN_NAMES};
pub use mp::MpMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeModel {
    /// `|F'|` is constant on the branch.
    ConstantSlope(f64),
    /// `ln|F'|` ranges over `[log_inf, log_sup]` on the branch; the
    /// distortion bound is `exp(log_sup - log_inf)`.
    Analytic { log_inf: f64, log_sup: f64 },
}

impl DerivativeModel {
    pub fn log_bounds(&self) -> (f64, f64) {
        match *self {
            DerivativeModel::ConstantSlope(s) => (s.ln(), s.ln()),
            DerivativeModel::Analytic { log_inf, log_sup } => (log_inf, log_sup),
        }
    }

    pub fn distortion(&self) -> f64 {
        let (lo, hi) = self.log_bounds();
        (hi - lo).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub index: u64,
    pub interval: (f64, f64),
    pub derivative: DerivativeModel,
    pub tau_value: f64,
}

/// `|(F^iterate)'| >= constant` everywhere on the repeller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expansion {
    pub constant: f64,
    pub iterate: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleKind {
    /// `omega(x) = x^kappa`
    Polynomial(f64),
    /// `omega(x) = e^{r x}`
    Exponential(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFunction {
    pub kind: ScaleKind,
    /// `sup_n omega(n+1)/omega(n)`
    pub ratio_bound: f64,
}

impl ScaleFunction {
    pub fn polynomial(kappa: f64) -> Self {
        Self {
            kind: ScaleKind::Polynomial(kappa),
            ratio_bound: 2f64.powf(kappa),
        }
    }

    pub fn exponential(r: f64) -> Self {
        Self {
            kind: ScaleKind::Exponential(r),
            ratio_bound: r.exp(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ScaleKind::Polynomial(k) => x.powf(k),
            ScaleKind::Exponential(r) => (r * x).exp(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ScaleKind::Polynomial(k) => k * x.powf(k - 1.0),
            ScaleKind::Exponential(r) => r * (r * x).exp(),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match self.kind {
            ScaleKind::Polynomial(k) => y.powf(1.0 / k),
            ScaleKind::Exponential(r) => y.ln() / r,
        }
    }

    /// Index `n` of the shell `[omega(n), omega(n+1))` containing `y >= omega(1)`.
    pub fn shell_of(&self, y: f64) -> u64 {
        let mut n = self.inverse(y).floor().max(1.0) as u64;
        while n > 1 && self.eval(n as f64) > y {
            n -= 1;
        }
        while self.eval((n + 1) as f64) <= y {
            n += 1;
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailModel {
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Bounds on the slowly varying factor in the shell measures.
    pub ell_bound: (f64, f64),
}

impl TailModel {
    pub fn new(beta: f64, beta1: f64, beta2: f64, ell_bound: (f64, f64)) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::range(format!("beta must lie in (0,1), got {beta}")));
        }
        if beta1 < beta || beta2 < beta {
            return Err(Error::range(format!(
                "beta1, beta2 must be >= beta={beta}, got {beta1}, {beta2}"
            )));
        }
        Ok(Self {
            beta,
            beta1,
            beta2,
            ell_bound,
        })
    }

    /// Exponent `beta / (1 - beta)` of the spectrum gap.
    pub fn rate_exponent(&self) -> f64 {
        self.beta / (1.0 - self.beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TauRule {
    /// `tau = n^r` on shell `n`.
    ShellPower(f64),
    /// `tau = e^n` on shell `n`.
    ShellExp,
    /// Explicit values per shell.
    Table(Vec<f64>),
}

impl TauRule {
    fn at(&self, x: f64) -> f64 {
        match self {
            TauRule::ShellPower(r) => x.powf(*r),
            TauRule::ShellExp => x.exp(),
            TauRule::Table(v) => v[x as usize - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub rule: TauRule,
    pub scale: Option<ScaleFunction>,
    pub tail: Option<TailModel>,
}

impl Observable {
    /// Value on shell `n`.
    pub fn shell_value(&self, n: u64) -> f64 {
        self.rule.at(n as f64)
    }
}

#[derive(Debug)]
pub(crate) enum Family {
    Lueroth,
    Gauss,
    LinearPoly {
        s: f64,
        c_s: f64,
    },
    LinearCount {
        a: f64,
        c: f64,
        norm: f64,
        /// `starts[n-1]` = (first letter of shell n, left end of shell n)
        starts: RwLock<Vec<(u64, f64)>>,
    },
    LinearExp {
        beta: f64,
        k: f64,
    },
    Mp(MpMap),
    Finite {
        lengths: Vec<f64>,
        lefts: Vec<f64>,
    },
}

/// Asymptotic behaviour of `count(n) sup |F'|^{-b}` on shell `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    /// `~ n^{-exponent}` up to bounded factors.
    Power(f64),
    /// `~ e^{-rate n}`.
    Geometric(f64),
    /// Finitely many shells.
    Finite,
}

#[derive(Debug)]
pub struct FullBranchMap {
    pub(crate) family: Family,
    pub expansion: Expansion,
    pub image: (f64, f64),
    pub known_b_star: Option<f64>,
}

impl FullBranchMap {
    pub(crate) fn new(family: Family, expansion: Expansion, image: (f64, f64), known_b_star: Option<f64>) -> Self {
        Self {
            family,
            expansion,
            image,
            known_b_star,
        }
    }

    pub fn mp(&self) -> Option<&MpMap> {
        match &self.family {
            Family::Mp(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_constant_slope(&self) -> bool {
        !matches!(self.family, Family::Gauss | Family::Mp(_))
    }

    pub fn shell_limit(&self) -> Option<u64> {
        match &self.family {
            Family::Finite { lengths, .. } => Some(lengths.len() as u64),
            _ => None,
        }
    }

    /// `ln` of the number of branches in shell `x` (real `x` for the smooth
    /// continuation).
    fn log_count(&self, x: f64, smooth: bool) -> f64 {
        match &self.family {
            Family::LinearCount { c, .. } => {
                if smooth {
                    let p = x.powf(*c);
                    if c.fract() == 0.0 {
                        p.ln()
                    } else {
                        (p - 0.5).ln()
                    }
                } else {
                    (floor_power(x as u64, *c) as f64).ln()
                }
            }
            Family::LinearExp { .. } => x * std::f64::consts::LN_2,
            _ => 0.0,
        }
    }

    pub fn shell_count(&self, n: u64) -> f64 {
        self.log_count(n as f64, false).exp()
    }

    /// Representative `ln|F'|` on shell `x`: the slope for constant-slope
    /// families, and `-ln mu([x])` for Gauss and MP.
    fn log_slope(&self, x: f64) -> Result<f64> {
        Ok(match &self.family {
            Family::Lueroth => (x * (x + 1.0)).ln(),
            Family::Gauss => -gauss_measure(x).ln(),
            Family::LinearPoly { s, c_s } => -c_s.ln() + (1.0 + s) * x.ln(),
            Family::LinearCount { a, norm, .. } => -norm.ln() + a * x.ln(),
            Family::LinearExp { beta, k } => -k.ln() + x * (beta + std::f64::consts::LN_2),
            Family::Mp(m) => -m.log_normalized_length(x)?,
            Family::Finite { lengths, .. } => -lengths[x as usize - 1].ln(),
        })
    }

    /// Representative `ln|F'|` on shell `n`.
    pub fn shell_log_slope(&self, n: u64) -> Result<f64> {
        self.log_slope(n as f64)
    }

    fn linear_count_starts(&self, n: u64) -> (u64, f64) {
        let Family::LinearCount { a, c, norm, starts } = &self.family else {
            unreachable!()
        };
        let idx = n as usize - 1;
        if let Some(v) = starts.read().expect("shell lock").get(idx) {
            return *v;
        }
        let mut g = starts.write().expect("shell lock");
        while g.len() <= idx {
            let k = g.len() as u64;
            let (first, left) = *g.last().unwrap();
            let count = floor_power(k, *c);
            let len = norm * (k as f64).powf(-a);
            g.push((first + count, left + count as f64 * len));
        }
        g[idx]
    }

    /// First letter of shell `n`.
    pub fn shell_first_letter(&self, n: u64) -> u64 {
        match &self.family {
            Family::LinearCount { .. } => self.linear_count_starts(n).0,
            Family::LinearExp { .. } => (1u64 << n) - 1,
            _ => n,
        }
    }

    /// Shell containing letter `a` and the offset of `a` inside it.
    pub fn shell_of_letter(&self, a: u64) -> Result<(u64, u64)> {
        if a == 0 {
            return Err(Error::NoSuchLetter { letter: a });
        }
        if let Some(lim) = self.shell_limit() {
            if a > lim {
                return Err(Error::NoSuchLetter { letter: a });
            }
        }
        Ok(match &self.family {
            Family::LinearCount { .. } => {
                let mut hi = 2u64;
                while self.shell_first_letter(hi) <= a {
                    hi *= 2;
                }
                let mut lo = 1u64;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if self.shell_first_letter(mid) <= a {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo, a - self.shell_first_letter(lo))
            }
            Family::LinearExp { .. } => {
                let n = 63 - (a + 1).leading_zeros() as u64;
                (n, a - ((1u64 << n) - 1))
            }
            _ => (a, 0),
        })
    }

    /// Interval and derivative model of letter `a`.
    pub fn branch_geometry(&self, a: u64) -> Result<((f64, f64), DerivativeModel)> {
        let (n, j) = self.shell_of_letter(a)?;
        let nf = n as f64;
        let linear = |left: f64, len: f64| ((left, left + len), DerivativeModel::ConstantSlope(1.0 / len));
        Ok(match &self.family {
            Family::Lueroth => (
                (1.0 / (nf + 1.0), 1.0 / nf),
                DerivativeModel::ConstantSlope(nf * (nf + 1.0)),
            ),
            Family::Gauss => (
                (1.0 / (nf + 1.0), 1.0 / nf),
                DerivativeModel::Analytic {
                    log_inf: 2.0 * nf.ln(),
                    log_sup: 2.0 * (nf + 1.0).ln(),
                },
            ),
            Family::LinearPoly { s, c_s } => {
                let left = 1.0 - c_s * hurwitz_tail(1.0 + s, n);
                linear(left, c_s * nf.powf(-1.0 - s))
            }
            Family::LinearCount { a, norm, .. } => {
                let len = norm * nf.powf(-a);
                let left = self.linear_count_starts(n).1;
                linear(left + j as f64 * len, len)
            }
            Family::LinearExp { beta, k } => {
                let len = k * (-(beta + std::f64::consts::LN_2) * nf).exp();
                let r = (-beta).exp();
                let left = k * (r - r.powf(nf)) / (1.0 - r);
                linear(left + j as f64 * len, len)
            }
            Family::Mp(m) => {
                let (lo, hi) = m.log_slope_bounds(n)?;
                let model = if n == 1 {
                    DerivativeModel::ConstantSlope(2.0)
                } else {
                    DerivativeModel::Analytic { log_inf: lo, log_sup: hi }
                };
                (m.branch_interval(n)?, model)
            }
            Family::Finite { lengths, lefts } => {
                let i = n as usize - 1;
                linear(lefts[i], lengths[i])
            }
        })
    }

    /// `psi_a(t)` and `ln|F'(psi_a(t))|` for the inverse branch of letter `a`
    /// at a point `t` of the image interval.
    pub fn inverse_branch(&self, a: u64, t: f64) -> Result<(f64, f64)> {
        match &self.family {
            Family::Gauss => {
                let y = 1.0 / (a as f64 + t);
                Ok((y, -2.0 * y.ln()))
            }
            Family::Mp(m) => {
                let mut z = t;
                let mut acc = std::f64::consts::LN_2;
                for d in 1..a {
                    z = m.left_preimage(z, d)?;
                    acc += m.left_derivative(z).ln();
                }
                Ok((0.5 * (1.0 + z), acc))
            }
            _ => {
                let ((lo, hi), d) = self.branch_geometry(a)?;
                let (l, _) = d.log_bounds();
                // Lüroth branches are increasing onto [0,1), linear ones too.
                Ok((lo + (hi - lo) * (t - self.image.0) / (self.image.1 - self.image.0), l))
            }
        }
    }

    /// Inverse branches `1..=n` at `t`, in letter order.
    pub fn inverse_branches(&self, t: f64, n: u64) -> Result<Vec<(f64, f64)>> {
        match &self.family {
            Family::Mp(m) => m.inverse_branches(t, n),
            _ => (1..=n).map(|a| self.inverse_branch(a, t)).collect(),
        }
    }

    /// Factor `D > 0` with `exp(-inf_[a] ln|F'|) <= D exp(-L_a)` for every letter
    /// `a > n`, where `L_a` is the representative log-slope.
    pub fn tail_distortion(&self, n: u64) -> Result<f64> {
        Ok(match &self.family {
            // L_a = -ln mu_a and inf|F'| = a^2; L_a - 2 ln a decreases in a
            Family::Gauss => {
                let a = (n + 1) as f64;
                (self.log_slope(a)? - 2.0 * a.ln()).exp() * (1.0 + 1e-12)
            }
            // mean-value slope against the branch infimum, <= f_L'(1/2)
            Family::Mp(m) => 2.0 + m.lambda(),
            _ => 1.0,
        })
    }

    /// Seed for the ratio pressure bound; exact eigenfunction of the Gauss
    /// transfer operator at `t = 1`.
    pub fn ratio_seed(&self, x: f64, b: f64) -> f64 {
        match &self.family {
            Family::Gauss => (1.0 + x).powf(1.0 - 2.0 * b),
            _ => 1.0,
        }
    }

    /// Interval containing the images of all inverse branches `a > n`.
    pub fn tail_region(&self, n: u64) -> Result<(f64, f64)> {
        Ok(match &self.family {
            Family::Gauss => (0.0, 1.0 / (n as f64 + 1.0)),
            Family::Mp(m) => (0.5, 0.5 * (1.0 + m.orbit_point(n as usize - 1)?)),
            Family::Lueroth => (0.0, 1.0 / (n as f64 + 1.0)),
            _ => {
                let ((lo, _), _) = self.branch_geometry(n + 1)?;
                (lo, 1.0)
            }
        })
    }

    /// `ln(count) - b * inf ln|F'|` decay on shells at `q = 0`.
    pub fn q0_decay(&self, b: f64) -> Decay {
        match &self.family {
            Family::Lueroth | Family::Gauss => Decay::Power(2.0 * b),
            Family::LinearPoly { s, .. } => Decay::Power((1.0 + s) * b),
            Family::LinearCount { a, c, .. } => Decay::Power(a * b - c),
            Family::LinearExp { beta, .. } => {
                Decay::Geometric(b * (beta + std::f64::consts::LN_2) - std::f64::consts::LN_2)
            }
            Family::Mp(m) => Decay::Power(b * (1.0 + 1.0 / m.lambda())),
            Family::Finite { .. } => Decay::Finite,
        }
    }
}

/// Gauss measure of `(1/(x+1), 1/x]`.
pub fn gauss_measure(x: f64) -> f64 {
    (1.0 / (x * (x + 2.0))).ln_1p() / std::f64::consts::LN_2
}

/// `floor(n^c)` computed without trusting `powf` at integer boundaries.
pub fn floor_power(n: u64, c: f64) -> u64 {
    let mut k = (n as f64).powf(c).floor() as u64;
    while k > 0 && (k as f64).powf(1.0 / c) > n as f64 + 1e-9 * n as f64 {
        k -= 1;
    }
    while ((k + 1) as f64).powf(1.0 / c) <= n as f64 * (1.0 + 1e-12) {
        k += 1;
    }
    k
}

/// A map together with an observable. Cheap to clone.
#[derive(Clone, Debug)]
pub struct System {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub map: Arc<FullBranchMap>,
    pub observable: Arc<Observable>,
    truncation: Option<u64>,
}

/// Explicit shells used by default for systems with a smooth tail.
pub const DEFAULT_EXPLICIT_SHELLS: u64 = 4096;

impl System {
    pub(crate) fn from_parts(
        name: &str,
        params: BTreeMap<String, f64>,
        map: FullBranchMap,
        observable: Observable,
    ) -> Self {
        Self {
            name: name.to_string(),
            params,
            map: Arc::new(map),
            observable: Arc::new(observable),
            truncation: None,
        }
    }

    /// Piecewise linear full-branch map on consecutive intervals of the given
    /// lengths starting at 0, with `tau` constant on each branch.
    pub fn finite_linear(name: &str, lengths: Vec<f64>, taus: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() != taus.len() {
            return Err(Error::range("need one tau value per branch and at least one branch"));
        }
        if lengths.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::range("branch lengths must lie in (0,1)"));
        }
        if lengths.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::range("branch lengths sum above 1"));
        }
        if taus.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::range("tau values must be finite and nonnegative"));
        }
        let mut lefts = Vec::with_capacity(lengths.len());
        let mut acc = 0.0;
        for l in &lengths {
            lefts.push(acc);
            acc += l;
        }
        let min_slope = lengths.iter().map(|l| 1.0 / l).fold(f64::INFINITY, f64::min);
        let map = FullBranchMap::new(
            Family::Finite { lengths, lefts },
            Expansion {
                constant: min_slope,
                iterate: 1,
            },
            (0.0, 1.0),
            None,
        );
        let obs = Observable {
            rule: TauRule::Table(taus),
            scale: None,
            tail: None,
        };
        Ok(Self::from_parts(name, BTreeMap::new(), map, obs))
    }

    /// Two branches of slope 2 carrying `tau = (t1, t2)`.
    pub fn two_branch(t1: f64, t2: f64) -> Result<Self> {
        Self::finite_linear("two_branch", vec![0.5, 0.5], vec![t1, t2])
    }

    /// The same system restricted to shells `1..=shells`.
    pub fn truncated(&self, shells: u64) -> Self {
        let mut s = self.clone();
        let lim = self.map.shell_limit().map_or(shells, |l| l.min(shells));
        s.truncation = Some(lim.max(1));
        s
    }

    pub fn truncation(&self) -> Option<u64> {
        self.truncation
    }

    /// Number of shells, if finite.
    pub fn shell_limit(&self) -> Option<u64> {
        match (self.truncation, self.map.shell_limit()) {
            (Some(t), Some(l)) => Some(t.min(l)),
            (Some(t), None) => Some(t),
            (None, l) => l,
        }
    }

    pub fn is_constant_slope(&self) -> bool {
        self.map.is_constant_slope()
    }

    pub fn known_b_star(&self) -> Option<f64> {
        if self.truncation.is_some() {
            None
        } else {
            self.map.known_b_star
        }
    }

    pub fn tail_model(&self) -> Option<TailModel> {
        self.observable.tail
    }

    pub fn scale(&self) -> Option<ScaleFunction> {
        self.observable.scale
    }

    /// Explicit shells used by the letter-sum engine by default.
    pub fn default_explicit(&self) -> u64 {
        if let Some(l) = self.shell_limit() {
            return l;
        }
        match self.map.family {
            Family::LinearExp { .. } => 48,
            _ => DEFAULT_EXPLICIT_SHELLS,
        }
    }

    pub fn shell_table(&self, n: u64) -> Result<Vec<ShellTerm>> {
        let n = self.shell_limit().map_or(n, |l| l.min(n));
        (1..=n).map(|k| self.shell_term(k)).collect()
    }

    /// Value of tau on letter `a`.
    pub fn tau(&self, a: u64) -> Result<f64> {
        let (n, _) = self.shell_of_letter(a)?;
        Ok(self.observable.shell_value(n))
    }

    pub fn shell_of_letter(&self, a: u64) -> Result<(u64, u64)> {
        if let Some(l) = self.shell_limit() {
            let (n, j) = self.map.shell_of_letter(a)?;
            if n > l {
                return Err(Error::NoSuchLetter { letter: a });
            }
            return Ok((n, j));
        }
        self.map.shell_of_letter(a)
    }

    /// Number of letters in shells `1..=n`.
    pub fn letters_through_shell(&self, n: u64) -> u64 {
        self.map.shell_first_letter(n + 1) - 1
    }

    pub fn branch(&self, a: u64) -> Result<Branch> {
        let (interval, derivative) = {
            self.shell_of_letter(a)?;
            self.map.branch_geometry(a)?
        };
        Ok(Branch {
            index: a,
            interval,
            derivative,
            tau_value: self.tau(a)?,
        })
    }

    /// `min_a tau_a`; tau is nondecreasing in the shell index for every
    /// builtin, finite tables are scanned.
    pub fn alpha_min(&self) -> f64 {
        match &self.observable.rule {
            TauRule::Table(v) => {
                let lim = self.shell_limit().unwrap_or(v.len() as u64) as usize;
                v[..lim].iter().copied().fold(f64::INFINITY, f64::min)
            }
            r => r.at(1.0),
        }
    }

    /// Geometric measure of shell `n` (the measure of maximal dimension).
    pub fn shell_measure(&self, n: u64) -> Result<f64> {
        let b = self.map.known_b_star.unwrap_or(1.0);
        Ok((self.map.log_count(n as f64, false) - b * self.map.shell_log_slope(n)?).exp())
    }

    /// Geometric measure of all shells `>= m`, i.e. of `{tau >= tau_m}`.
    pub fn tail_measure(&self, m: u64) -> Result<f64> {
        if m <= 1 {
            return Ok(1.0);
        }
        let mf = m as f64;
        Ok(match &self.map.family {
            Family::Lueroth => 1.0 / mf,
            Family::Gauss => (1.0 / mf).ln_1p() / std::f64::consts::LN_2,
            Family::LinearPoly { s, c_s } => c_s * hurwitz_tail(1.0 + s, m),
            Family::LinearExp { beta, .. } => (beta * (1.0 - mf)).exp(),
            // shells >= m cover (1/2, (1 + x_{m-2})/2]
            Family::Mp(mp) => mp.orbit_point_real(mf - 2.0)?,
            Family::LinearCount { a, c, norm, .. } => {
                // explicit head of the tail, then the integral of the mean count
                const HEAD: u64 = 4096;
                let mut acc = crate::numeric::NeumaierSum::new();
                for k in m..m + HEAD {
                    acc.add(floor_power(k, *c) as f64 * norm * (k as f64).powf(-a));
                }
                let x0 = (m + HEAD) as f64 - 0.5;
                acc.add(norm * x0.powf(c + 1.0 - a) / (a - c - 1.0));
                if c.fract() != 0.0 {
                    acc.add(-0.5 * norm * x0.powf(1.0 - a) / (a - 1.0));
                }
                acc.value()
            }
            Family::Finite { lengths, .. } => {
                let lim = self.shell_limit().unwrap() as usize;
                lengths[(m as usize - 1).min(lim)..lim].iter().sum()
            }
        })
    }
}

impl ShellSource for System {
    fn shell_term(&self, n: u64) -> Result<ShellTerm> {
        Ok(ShellTerm {
            log_count: self.map.log_count(n as f64, false),
            tau: self.observable.shell_value(n),
            log_slope: self.map.shell_log_slope(n)?,
        })
    }

    fn smooth_term(&self, x: f64) -> Result<ShellTerm> {
        Ok(ShellTerm {
            log_count: self.map.log_count(x, true),
            tau: self.observable.rule.at(x),
            log_slope: self.map.log_slope(x)?,
        })
    }

    fn tail_kind(&self) -> TailKind {
        if self.shell_limit().is_some() {
            return TailKind::None;
        }
        match self.map.family {
            Family::LinearExp { .. } => TailKind::Geometric,
            _ => TailKind::Smooth,
        }
    }
}
