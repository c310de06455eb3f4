use std::collections::BTreeMap;
use std::sync::RwLock;

use log::debug;

use super::{
    Expansion, Family, FullBranchMap, MpMap, Observable, ScaleFunction, System, TailModel, TauRule,
};
use crate::error::{Error, Result};
use crate::numeric::zeta;
use crate::series::{letter_sums, ShellSource};

pub const BUILTIN_NAMES: [&str; 6] = [
    "lueroth",
    "gauss",
    "linear_poly",
    "linear_count",
    "linear_exp",
    "mp_induced",
];

struct Params<'a> {
    system: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &str, default: f64) -> f64 {
        let v = self.given.get(key).copied().unwrap_or_else(|| {
            debug!("system={} param={} default={}", self.system, key, default);
            default
        });
        self.used.insert(key.to_string(), v);
        v
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(Error::range(format!("{} has no parameter `{k}`", self.system)));
        }
        Ok(self.used)
    }
}

fn integer_r(system: &str, r: f64) -> Result<f64> {
    if r.fract() != 0.0 || r <= 1.0 {
        return Err(Error::range(format!("{system} needs an integer r > 1, got {r}")));
    }
    Ok(r)
}

/// Build one of the builtin systems. Missing parameters take the defaults
/// lueroth/gauss `r=2`, linear_poly `r=2, s=1`, linear_count `a=3, b=2, c=1`,
/// linear_exp `beta=0.5`, mp_induced `lambda=2`.
pub fn build_builtin(name: &str, given: &BTreeMap<String, f64>) -> Result<System> {
    let mut p = Params {
        system: name,
        given,
        used: BTreeMap::new(),
    };
    let one = Some(1.0);
    let (map, obs) = match name {
        "lueroth" => {
            let r = integer_r(name, p.get("r", 2.0))?;
            let map = FullBranchMap::new(
                Family::Lueroth,
                Expansion {
                    constant: 2.0,
                    iterate: 1,
                },
                (0.0, 1.0),
                one,
            );
            let tail = TailModel::new(1.0 / r, 2.0 / r, 2.0 / r, (0.5 / r, 1.0 / r))?;
            (map, power_obs(r, ScaleFunction::polynomial(r), tail))
        }
        "gauss" => {
            let r = integer_r(name, p.get("r", 2.0))?;
            // |F'| = 1 at x = 1, so expansion holds for the second iterate
            let map = FullBranchMap::new(
                Family::Gauss,
                Expansion {
                    constant: 4.0,
                    iterate: 2,
                },
                (0.0, 1.0),
                one,
            );
            let lo = (4.0f64 / 3.0).log2();
            let tail = TailModel::new(1.0 / r, 2.0 / r, 2.0 / r, (lo / r, 1.0 / (std::f64::consts::LN_2 * r)))?;
            (map, power_obs(r, ScaleFunction::polynomial(r), tail))
        }
        "linear_poly" => {
            let r = p.get("r", 2.0);
            let s = p.get("s", 1.0);
            if !(r > 0.0 && s > 0.0 && s < r) {
                return Err(Error::range(format!("linear_poly needs r > 0 and 0 < s < r, got r={r}, s={s}")));
            }
            let c_s = 1.0 / zeta(1.0 + s);
            let map = FullBranchMap::new(
                Family::LinearPoly { s, c_s },
                Expansion {
                    constant: 1.0 / c_s,
                    iterate: 1,
                },
                (0.0, 1.0),
                one,
            );
            let beta = s / r;
            let ell = c_s / r;
            let tail = TailModel::new(beta, beta + 1.0 / r, beta + 1.0 / r, (ell * (1.0 - 1e-9), ell * (1.0 + 1e-9)))?;
            (map, power_obs(r, ScaleFunction::polynomial(r), tail))
        }
        "linear_count" => {
            let a = p.get("a", 3.0);
            let b = p.get("b", 2.0);
            let c = p.get("c", 1.0);
            if !(c > 0.0 && c < a) {
                return Err(Error::range(format!("linear_count needs 0 < c < a, got a={a}, c={c}")));
            }
            if b <= 0.0 {
                return Err(Error::range(format!("linear_count needs b > 0, got b={b}")));
            }
            let beta = (a - c - 1.0) / b;
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::range(format!(
                    "linear_count needs (a-c-1)/b in (0,1), got {beta}"
                )));
            }
            let norm = linear_count_norm(a, c)?;
            let map = FullBranchMap::new(
                Family::LinearCount {
                    a,
                    c,
                    norm,
                    starts: RwLock::new(vec![(1, 0.0)]),
                },
                Expansion {
                    constant: 1.0 / norm,
                    iterate: 1,
                },
                (0.0, 1.0),
                one,
            );
            let tail = TailModel::new(beta, a / b, a / b, (norm / (2.0 * b), norm / b))?;
            (map, power_obs(b, ScaleFunction::polynomial(b), tail))
        }
        "linear_exp" => {
            let beta = p.get("beta", 0.5);
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::range(format!("linear_exp needs beta in (0,1), got {beta}")));
            }
            // normalisation (sum_{n>=1} e^{-beta n})^{-1}
            let k = beta.exp() - 1.0;
            let first = k * (-(beta + std::f64::consts::LN_2)).exp();
            let map = FullBranchMap::new(
                Family::LinearExp { beta, k },
                Expansion {
                    constant: 1.0 / first,
                    iterate: 1,
                },
                (0.0, 1.0),
                one,
            );
            let b12 = beta + std::f64::consts::LN_2;
            let tail = TailModel::new(beta, b12, b12, (k * (1.0 - 1e-9), k * (1.0 + 1e-9)))?;
            let obs = Observable {
                rule: TauRule::ShellExp,
                scale: Some(ScaleFunction::exponential(1.0)),
                tail: Some(tail),
            };
            (map, obs)
        }
        "mp_induced" => {
            let lambda = p.get("lambda", 2.0);
            let mp = MpMap::new(lambda)?;
            let ell = mp_ell_bounds(&mp)?;
            let map = FullBranchMap::new(
                Family::Mp(mp),
                Expansion {
                    constant: 2.0,
                    iterate: 1,
                },
                (0.5, 1.0),
                one,
            );
            let beta = 1.0 / lambda;
            let tail = TailModel::new(beta, beta + 1.0, beta + 1.0, ell)?;
            (map, power_obs(1.0, ScaleFunction::polynomial(1.0), tail))
        }
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    let params = p.finish()?;
    Ok(System::from_parts(name, params, map, obs))
}

fn power_obs(r: f64, scale: ScaleFunction, tail: TailModel) -> Observable {
    Observable {
        rule: TauRule::ShellPower(r),
        scale: Some(scale),
        tail: Some(tail),
    }
}

/// `(sum_n floor(n^c) n^{-a})^{-1}`.
fn linear_count_norm(a: f64, c: f64) -> Result<f64> {
    let unnormalised = System::from_parts(
        "linear_count",
        BTreeMap::new(),
        FullBranchMap::new(
            Family::LinearCount {
                a,
                c,
                norm: 1.0,
                starts: RwLock::new(vec![(1, 0.0)]),
            },
            Expansion {
                constant: 1.0,
                iterate: 1,
            },
            (0.0, 1.0),
            None,
        ),
        Observable {
            rule: TauRule::ShellPower(1.0),
            scale: None,
            tail: None,
        },
    );
    let table: Vec<_> = (1..=super::DEFAULT_EXPLICIT_SHELLS)
        .map(|n| unnormalised.shell_term(n))
        .collect::<Result<_>>()?;
    let s = letter_sums(&unnormalised, &table, 0.0, 1.0)?;
    Ok((-s.log_z).exp())
}

/// Range of `ell(n) = 2|I_n| n^{1+1/lambda}` over the explicit table and its
/// limit `c (lambda c)^{-1-1/lambda}`, widened by 1%.
fn mp_ell_bounds(mp: &MpMap) -> Result<(f64, f64)> {
    let l = mp.lambda();
    let c = mp.coefficient();
    let mut lo = c * (l * c).powf(-1.0 - 1.0 / l);
    let mut hi = lo;
    for n in 1..=super::DEFAULT_EXPLICIT_SHELLS {
        let v = 2.0 * mp.branch_length(n)? * (n as f64).powf(1.0 + 1.0 / l);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((0.99 * lo, 1.01 * hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn tail_models_follow_the_examples() {
        let t = |name: &str, kv: &[(&str, f64)]| build_builtin(name, &p(kv)).unwrap().tail_model().unwrap();
        assert_eq!(t("lueroth", &[("r", 3.0)]).beta1, 2.0 / 3.0);
        assert_eq!(t("linear_poly", &[("r", 2.0), ("s", 1.0)]).beta, 0.5);
        assert_eq!(t("linear_poly", &[("r", 2.0), ("s", 1.0)]).beta1, 1.0);
        let lc = t("linear_count", &[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        assert_eq!((lc.beta, lc.beta1), (0.5, 1.5));
        let le = t("linear_exp", &[("beta", 0.5)]);
        assert!((le.beta2 - 0.5 - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t("mp_induced", &[("lambda", 2.0)]).beta1, 1.5);
    }

    #[test]
    fn out_of_range_parameters_name_the_constraint() {
        let err = build_builtin("linear_exp", &p(&[("beta", 1.2)])).unwrap_err();
        assert!(err.to_string().contains("beta in (0,1)"));
        assert!(build_builtin("lueroth", &p(&[("r", 2.5)])).is_err());
        assert!(build_builtin("linear_poly", &p(&[("r", 1.0), ("s", 1.0)])).is_err());
        assert!(build_builtin("linear_count", &p(&[("a", 3.0), ("b", 0.5), ("c", 1.0)])).is_err());
        assert!(build_builtin("mp_induced", &p(&[("lambda", 0.5)])).is_err());
        assert!(build_builtin("lueroth", &p(&[("q", 2.0)])).is_err());
        assert!(matches!(build_builtin("tent", &p(&[])), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn linear_count_norm_matches_zeta_for_integer_c() {
        // a=3, c=1: sum n * n^{-3} = zeta(2)
        let n = linear_count_norm(3.0, 1.0).unwrap();
        assert!((n - 6.0 / std::f64::consts::PI.powi(2)).abs() < 1e-14);
    }
}
