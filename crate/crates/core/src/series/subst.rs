//! Substitution `t_i -> s_i` along a uniformizer system.
//!
//! Known coefficients are pushed through a Horner scheme. An unknown
//! remainder `O(t_l^Q)` becomes `s_l^Q * g(s_l, ..., s_n)` for an arbitrary
//! `g`, which is enclosed in the cone of monomials `t^m` whose transformed
//! exponents `y_j = m_j + sum_{i<j} mu[j][i] * y_i` are nonnegative for
//! `j <= l`. The weights `mu` are chosen so that every `s_i / t_i` lies in
//! that cone.

use std::collections::HashMap;
use std::sync::Arc;

use super::Series;
use crate::error::{precision, Error, Result};
use crate::scalars::ExtField;

/// Applies `t_i -> vals[i]` to `x`; `w` bounds the expansion of inverses and remainders.
pub fn substitute(x: &Series, vals: &[Series], w: i64) -> Result<Series> {
    let n = vals.len();
    if x.depth() != n {
        return Err(Error::Domain(format!("series of depth {} needs {} substitutions", x.depth(), x.depth())));
    }
    if n == 0 {
        return Ok(x.clone());
    }
    let m = vals[0].depth();
    if m != n {
        return Err(Error::Domain("substituted values must share the ambient depth".into()));
    }
    let mut units = Vec::with_capacity(n);
    for (i, s) in vals.iter().enumerate() {
        let mut e = vec![0i64; n];
        e[i] = 1;
        let v = s.valuation().map_err(|err| Error::NotUniformizers { level: i + 1, reason: err.to_string() })?;
        check_uniformizer_valuation(&v, i)?;
        let shift: Vec<i64> = e.iter().map(|x| -x).collect();
        units.push(s.shift(&shift));
    }
    let mut ctx = Ctx { field: x.field().clone(), n, vals, units, w, balls: HashMap::new(), powers: HashMap::new() };
    ctx.sub_rec(x, 1)
}

/// `v` must read `(0, ..., 0, 1, *, ..., *)` with the 1 in position `i` (0-based).
pub fn check_uniformizer_valuation(v: &[i64], i: usize) -> Result<()> {
    if v[..i].iter().all(|&x| x == 0) && v[i] == 1 {
        Ok(())
    } else {
        let mut e = vec!["0".to_string(); v.len()];
        e[i] = "1".into();
        for x in e.iter_mut().skip(i + 1) {
            *x = "*".into();
        }
        Err(Error::NotUniformizers {
            level: i + 1,
            reason: format!("valuation {v:?}, expected ({})", e.join(",")),
        })
    }
}

struct Ctx<'a> {
    field: Arc<ExtField>,
    n: usize,
    vals: &'a [Series],
    units: Vec<Series>,
    w: i64,
    balls: HashMap<usize, Series>,
    powers: HashMap<(usize, i64), Series>,
}

impl Ctx<'_> {
    fn power(&mut self, level: usize, k: i64) -> Result<Series> {
        if let Some(p) = self.powers.get(&(level, k)) {
            return Ok(p.clone());
        }
        let p = self.vals[level - 1].pow_with(k, self.w)?;
        self.powers.insert((level, k), p.clone());
        Ok(p)
    }

    fn sub_rec(&mut self, c: &Series, level: usize) -> Result<Series> {
        let l = match c {
            Series::Const(a) => return Ok(Series::constant(&self.field, self.n, a.clone())),
            Series::Laurent(l) => l.clone(),
        };
        let s = self.vals[level - 1].clone();
        let len = l.coeffs().len() as i64;
        let mut acc = match l.prec() {
            Some(p) => {
                let ball = self.ball(level)?;
                ball.mul(&self.power(level, p - l.order() - len)?)
            }
            None => Series::zero(&self.field, self.n),
        };
        for coeff in l.coeffs().iter().rev() {
            let inner = self.sub_rec(coeff, level + 1)?;
            acc = acc.mul(&s).add(&inner);
        }
        Ok(acc.mul(&self.power(level, l.order())?))
    }

    /// The cone enclosing `g(s_l, ..., s_n)` for `g` in `k'((t_{l+1},...))[[t_l]]`.
    fn ball(&mut self, l: usize) -> Result<Series> {
        if let Some(b) = self.balls.get(&l) {
            return Ok(b.clone());
        }
        let mu = self.weights(l)?;
        let cap1 = self.units[l - 1..]
            .iter()
            .filter_map(Series::prec)
            .min()
            .unwrap_or(self.w)
            .min(self.w);
        let b = self.ball_rec(1, l, &mu, cap1, &mut vec![]);
        self.balls.insert(l, b.clone());
        Ok(b)
    }

    fn ball_rec(&self, j: usize, l: usize, mu: &[Vec<i64>], cap1: i64, ys: &mut Vec<i64>) -> Series {
        let depth = self.n - j + 1;
        let lower: i64 = -(0..j - 1).map(|i| mu[j - 1][i] * ys[i]).sum::<i64>();
        if j == l {
            return Series::inexact_zero(&self.field, depth, lower);
        }
        let cap = if j == 1 { cap1 } else { lower + self.w };
        let coeffs = (lower..cap)
            .map(|m| {
                ys.push(m - lower);
                let c = self.ball_rec(j + 1, l, mu, cap1, ys);
                ys.pop();
                c
            })
            .collect();
        Series::build(&self.field, depth, lower, Some(cap), coeffs)
    }

    /// Lower-triangular weights `mu[j-1][i]` putting the units `s_i/t_i`, `i >= l`, in the level-`l` cone.
    fn weights(&self, l: usize) -> Result<Vec<Vec<i64>>> {
        let mut mu = vec![vec![0i64; self.n]; self.n];
        // constraint points: (exponent prefix, level it constrains)
        let mut points: Vec<Vec<i64>> = Vec::new();
        for u in &self.units[l - 1..] {
            for (m, _) in u.terms() {
                points.push(m);
            }
            for (prefix, r) in u.tails() {
                let level = prefix.len() + 1;
                if level == 1 {
                    continue;
                }
                if level < l {
                    return Err(precision(format!(
                        "remainder at level {l} cannot be transported through a uniformizer truncated at level {level}"
                    )));
                }
                let mut p = prefix;
                p.push(r);
                points.push(p);
            }
        }
        for j in 2..=l {
            for p in &points {
                if p.len() < j {
                    continue;
                }
                let ys = transformed(p, &mu, j - 1);
                if ys.iter().any(|&y| y < 0) {
                    return Err(precision("uniformizer leaves the substitution cone".to_string()));
                }
                let yj = p[j - 1] + (0..j - 1).map(|i| mu[j - 1][i] * ys[i]).sum::<i64>();
                if yj < 0 {
                    let Some(istar) = (0..j - 1).rev().find(|&i| ys[i] > 0) else {
                        return Err(precision("uniformizer leaves the substitution cone".to_string()));
                    };
                    let need = -yj;
                    mu[j - 1][istar] += (need + ys[istar] - 1) / ys[istar];
                }
            }
        }
        Ok(mu)
    }
}

fn transformed(m: &[i64], mu: &[Vec<i64>], k: usize) -> Vec<i64> {
    let mut ys: Vec<i64> = Vec::with_capacity(k);
    for j in 0..k {
        let y = m[j] + (0..j).map(|i| mu[j][i] * ys[i]).sum::<i64>();
        ys.push(y);
    }
    ys
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::{BaseKind, ExtScalar};

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    #[test]
    fn reciprocal_under_t_plus_t2() {
        // t -> t + t^2 applied to t^-1 gives t^-1 - 1 + t - t^2 + ...
        let f = q();
        let t = Series::gen(&f, 1, 1);
        let s = t.add(&t.mul(&t));
        let x = t.inv().unwrap();
        let y = substitute(&x, std::slice::from_ref(&s), 8).unwrap();
        assert!(y.coefficient_at(&[-1]).unwrap().is_one());
        assert_eq!(y.coefficient_at(&[0]).unwrap(), ExtScalar::from_i64(&f, -1));
        assert!(y.mul(&s).eq_within(&Series::one(&f, 1)));
    }

    #[test]
    fn identity_assignment() {
        let f = q();
        let vals = vec![Series::gen(&f, 2, 1), Series::gen(&f, 2, 2)];
        let x = Series::from_terms(
            &f,
            2,
            &[(vec![-1, 2], ExtScalar::from_i64(&f, 3)), (vec![1, -1], ExtScalar::one(&f))],
        );
        assert_eq!(substitute(&x, &vals, 8).unwrap(), x);
    }

    #[test]
    fn first_generator_image() {
        let f = q();
        let t1 = Series::gen(&f, 2, 1);
        let t2 = Series::gen(&f, 2, 2);
        let s1 = t1.mul(&Series::one(&f, 2).add(&t2));
        let y = substitute(&t1, &[s1.clone(), t2], 8).unwrap();
        assert_eq!(y, s1);
    }

    #[test]
    fn rejects_non_uniformizers() {
        let f = q();
        let t1 = Series::gen(&f, 2, 1);
        let t2 = Series::gen(&f, 2, 2);
        let err = substitute(&t1, &[t1.mul(&t1), t2.clone()], 8).unwrap_err();
        assert!(matches!(err, Error::NotUniformizers { level: 1, .. }));
        let err = substitute(&t1, &[t1.add(&t2), t2], 8).unwrap_err();
        assert!(matches!(err, Error::NotUniformizers { level: 1, .. }));
    }

    #[test]
    fn inexact_input_stays_sound() {
        // x = (1 - t2)^-1 truncated, substituted along t2 -> t2 + t1 t2^-3
        let f = q();
        let t1 = Series::gen(&f, 2, 1);
        let t2 = Series::gen(&f, 2, 2);
        let one = Series::one(&f, 2);
        let x = one.sub(&t2).inv_with(6).unwrap();
        let s2 = t2.add(&t1.mul(&t2.pow(-3).unwrap()));
        let y = substitute(&x, &[t1.clone(), s2.clone()], 6).unwrap();
        // exact reference: 1/(1 - s2) computed directly
        let reference = one.sub(&s2).inv_with(6).unwrap();
        assert!(y.eq_within(&reference));
        assert!(y.coefficient_at(&[0, 0]).unwrap().is_one());
        assert!(y.coefficient_at(&[1, -3]).unwrap().is_one());
        assert_eq!(y.coefficient_at(&[1, -2]).unwrap(), ExtScalar::from_i64(&f, 2));
    }

    #[test]
    fn first_uniformizer_may_carry_a_unit_in_t2() {
        let f = q();
        let t1 = Series::gen(&f, 2, 1);
        let t2 = Series::gen(&f, 2, 2);
        let s1 = t1.mul(&t2.pow(5).unwrap());
        let x = t1.inv().unwrap().add(&t2);
        let y = substitute(&x, &[s1.clone(), t2.clone()], 8).unwrap();
        assert_eq!(y, s1.inv().unwrap().add(&t2));
    }
}
