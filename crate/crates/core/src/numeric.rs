//! Small numerical kernels shared by the modules: compensated summation,
//! Gauss-Legendre nodes, least squares and the Hurwitz zeta tail.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fixed chunk length for parallel reductions. Chunk boundaries do not depend
/// on the thread count, so merged results are bit-identical for any pool size.
pub const REDUCTION_CHUNK: usize = 512;

/// Map `f` over chunks of `0..len` in parallel and fold the per-chunk results
/// in ascending chunk order.
pub fn ordered_chunk_reduce<T, F, M>(len: usize, f: F, mut merge: M, init: T) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
    M: FnMut(T, T) -> T,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCTION_CHUNK;
            f(lo..(lo + REDUCTION_CHUNK).min(len))
        })
        .collect();
    let mut acc = init;
    for p in parts {
        acc = merge(acc, p);
    }
    acc
}

/// Gauss-Legendre rule on [-1, 1] with `n` nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Cached 20-node rule.
pub fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Chebyshev-Lobatto points on [lo, hi], endpoints included.
pub fn chebyshev_lobatto(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| {
            let c = (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            0.5 * (lo + hi) - 0.5 * (hi - lo) * c
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residual_rms: f64,
    pub points: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Regression(format!("{} abscissae, {} ordinates", n, y.len())));
    }
    if n < 3 {
        return Err(Error::Regression(format!("{n} points, need at least 3")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite sample".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Regression("abscissae have zero spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (sse / (nf - 2.0) / sxx).sqrt(),
        residual_rms: (sse / nf).sqrt(),
        points: n,
    })
}

/// `sum_{k >= n} k^{-s}` for `s > 1`, `n >= 1`, via Euler-Maclaurin after a
/// short explicit head.
pub fn hurwitz_tail(s: f64, n: u64) -> f64 {
    assert!(s > 1.0 && n >= 1);
    const HEAD: u64 = 16;
    // B_{2j} / (2j)!
    const BERN: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut acc = NeumaierSum::new();
    for k in n..n + HEAD {
        acc.add((k as f64).powf(-s));
    }
    let a = (n + HEAD) as f64;
    acc.add(a.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * a.powf(-s));
    // f^{(2j-1)}(a) = -s(s+1)...(s+2j-2) a^{-s-2j+1}
    let mut rising = s;
    let mut order = 1.0;
    for (j, bj) in BERN.iter().enumerate() {
        if j > 0 {
            rising *= (s + order) * (s + order + 1.0);
            order += 2.0;
        }
        let deriv = -rising * a.powf(-s - order);
        acc.add(-bj * deriv);
    }
    acc.value()
}

/// Riemann zeta for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_tail(s, 1)
}
