//! Dense univariate polynomials over a base field, with the brute-force
//! factor searches used for extension fields and closed points.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalars::{BaseKind, BaseScalar};

/// Coefficients from the constant term up; no trailing zeros (zero = empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    kind: BaseKind,
    coeffs: Vec<BaseScalar>,
}

impl Poly {
    pub fn new(kind: BaseKind, mut coeffs: Vec<BaseScalar>) -> Self {
        while coeffs.last().is_some_and(BaseScalar::is_zero) {
            coeffs.pop();
        }
        Poly { kind, coeffs }
    }

    pub fn from_i64s(kind: BaseKind, coeffs: &[i64]) -> Self {
        Self::new(kind, coeffs.iter().map(|&c| kind.from_i64(c)).collect())
    }

    pub fn zero(kind: BaseKind) -> Self {
        Poly { kind, coeffs: vec![] }
    }

    pub fn constant(c: BaseScalar) -> Self {
        Self::new(c.kind(), vec![c])
    }

    /// `x^k`
    pub fn monomial(kind: BaseKind, k: usize) -> Self {
        let mut coeffs = vec![kind.zero(); k + 1];
        coeffs[k] = kind.one();
        Poly { kind, coeffs }
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[BaseScalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BaseScalar {
        self.coeffs.get(i).cloned().unwrap_or_else(|| self.kind.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> BaseScalar {
        self.coeffs.last().cloned().unwrap_or_else(|| self.kind.zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(self.kind, (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(self.kind, (0..n).map(|i| self.coeff(i).sub(&other.coeff(i))).collect())
    }

    pub fn neg(&self) -> Self {
        Poly { kind: self.kind, coeffs: self.coeffs.iter().map(BaseScalar::neg).collect() }
    }

    pub fn scale(&self, c: &BaseScalar) -> Self {
        Self::new(self.kind, self.coeffs.iter().map(|a| a.mul(c)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.kind);
        }
        let mut out = vec![self.kind.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::new(self.kind, out)
    }

    pub fn div_rem(&self, d: &Self) -> Result<(Self, Self)> {
        let dd = d.degree().ok_or(Error::DivisionByZero)?;
        let lead_inv = d.leading().inv()?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Self::zero(self.kind), self.clone()));
        }
        let mut quot = vec![self.kind.zero(); rem.len() - dd];
        for top in (dd..rem.len()).rev() {
            let c = rem[top].mul(&lead_inv);
            if c.is_zero() {
                continue;
            }
            for k in 0..=dd {
                rem[top - dd + k] = rem[top - dd + k].sub(&c.mul(&d.coeffs[k]));
            }
            quot[top - dd] = c;
        }
        rem.truncate(dd);
        Ok((Self::new(self.kind, quot), Self::new(self.kind, rem)))
    }

    pub fn rem(&self, d: &Self) -> Self {
        self.div_rem(d).expect("nonzero divisor").1
    }

    pub fn divides(&self, f: &Self) -> bool {
        f.rem(self).is_zero()
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&self.leading().inv().expect("nonzero"))
    }

    pub fn eval(&self, x: &BaseScalar) -> BaseScalar {
        let mut acc = self.kind.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.kind,
            self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c.mul_int(i as i64)).collect(),
        )
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Returns `(g, s, t)` with `s*self + t*other = g`, `g` not normalized.
    pub fn ext_gcd(&self, other: &Self) -> (Self, Self, Self) {
        let k = self.kind;
        let (mut r0, mut r1) = (self.clone(), other.clone());
        let (mut s0, mut s1) = (Self::constant(k.one()), Self::zero(k));
        let (mut t0, mut t1) = (Self::zero(k), Self::constant(k.one()));
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1).expect("nonzero");
            r0 = std::mem::replace(&mut r1, r);
            let s = s0.sub(&q.mul(&s1));
            s0 = std::mem::replace(&mut s1, s);
            let t = t0.sub(&q.mul(&t1));
            t0 = std::mem::replace(&mut t1, t);
        }
        (r0, s0, t0)
    }

    /// `self^e mod m`
    pub fn pow_mod(&self, mut e: u64, m: &Self) -> Self {
        let mut acc = Self::constant(self.kind.one()).rem(m);
        let mut base = self.rem(m);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).rem(m);
            }
            base = base.mul(&base).rem(m);
            e >>= 1;
        }
        acc
    }

    /// Some nontrivial factor, or `None` when irreducible.
    pub fn find_factor(&self) -> Result<Option<Poly>> {
        let d = self.degree().ok_or(Error::DivisionByZero)?;
        if d <= 1 {
            return Ok(None);
        }
        match self.kind {
            BaseKind::Prime(p) => Ok(self.ddf_first(p)),
            BaseKind::Rational => rational_factor(self),
        }
    }

    /// `gcd(self, x^{p^k} - x)` for the least `k <= deg/2` where it is nontrivial.
    fn ddf_first(&self, p: u32) -> Option<Poly> {
        let f = self.monic();
        let d = f.degree()?;
        let x = Self::monomial(self.kind, 1);
        let mut xp = x.clone();
        for _ in 1..=d / 2 {
            xp = xp.pow_mod(p as u64, &f);
            let g = f.gcd(&xp.sub(&x));
            if g.degree().unwrap_or(0) > 0 {
                return Some(g);
            }
        }
        None
    }

    pub fn is_irreducible(&self) -> Result<bool> {
        Ok(self.find_factor()?.is_none())
    }

    /// Monic irreducible factors with multiplicity, each of degree at most `max_deg`.
    pub fn factor(&self, max_deg: usize) -> Result<Vec<(Poly, usize)>> {
        let mut rest = self.monic();
        if rest.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut out: Vec<(Poly, usize)> = Vec::new();
        while rest.degree().unwrap() > 0 {
            let factor = smallest_irreducible_factor(&rest, max_deg)?;
            let mut mult = 0;
            while factor.divides(&rest) {
                rest = rest.div_rem(&factor)?.0;
                mult += 1;
            }
            out.push((factor, mult));
        }
        out.sort_by_key(|a| a.0.sort_key());
        Ok(out)
    }

    fn sort_key(&self) -> (usize, Vec<String>) {
        (
            self.coeffs.len(),
            self.coeffs.iter().rev().map(|c| c.to_canonical_string()).collect(),
        )
    }

    /// Pretty form in the variable `var`.
    pub fn display_in(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative_display();
            let a = if neg { c.neg() } else { c.clone() };
            let mono = match i {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{i}"),
            };
            let cs = a.to_canonical_string();
            let term = if mono.is_empty() {
                cs
            } else if a.is_one() {
                mono
            } else {
                format!("{cs}*{mono}")
            };
            match (out.is_empty(), neg) {
                (true, true) => out.push('-'),
                (true, false) => {}
                (false, true) => out.push_str(" - "),
                (false, false) => out.push_str(" + "),
            }
            out.push_str(&term);
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_in("x"))
    }
}

fn smallest_irreducible_factor(f: &Poly, max_deg: usize) -> Result<Poly> {
    let d = f.degree().unwrap();
    match f.kind {
        BaseKind::Prime(p) => {
            let Some(g) = f.ddf_first(p) else {
                if d > max_deg {
                    return Err(Error::FactorizationOutOfScope(format!(
                        "irreducible factor of degree {d} exceeds {max_deg}"
                    )));
                }
                return Ok(f.monic());
            };
            // g is the product of all distinct irreducible factors of the least degree k
            let k = least_factor_degree(&g, p);
            if g.degree() == Some(k) {
                return Ok(g);
            }
            if k > max_deg {
                return Err(Error::FactorizationOutOfScope(format!("factor degree {k} exceeds {max_deg}")));
            }
            Ok(enumerate_monic(f.kind, k)
                .find(|h| h.divides(&g))
                .expect("equal-degree part has a factor of degree k"))
        }
        BaseKind::Rational => {
            let mut cur = f.monic();
            while let Some(g) = rational_factor(&cur)? {
                cur = if g.degree() <= cur.degree().map(|c| c / 2) {
                    g.monic()
                } else {
                    cur.div_rem(&g)?.0.monic()
                };
            }
            let k = cur.degree().unwrap();
            if k > max_deg {
                return Err(Error::FactorizationOutOfScope(format!("factor degree {k} exceeds {max_deg}")));
            }
            Ok(cur)
        }
    }
}

fn least_factor_degree(g: &Poly, p: u32) -> usize {
    let x = Poly::monomial(g.kind, 1);
    let mut xp = x.clone();
    for k in 1.. {
        xp = xp.pow_mod(p as u64, g);
        if xp == x.rem(g) || g.gcd(&xp.sub(&x)).degree().unwrap_or(0) > 0 {
            return k;
        }
    }
    unreachable!()
}

/// All monic polynomials of degree `k` over a prime field.
pub fn enumerate_monic(kind: BaseKind, k: usize) -> impl Iterator<Item = Poly> {
    let p = kind.characteristic() as u64;
    let total = p.pow(k as u32);
    (0..total).map(move |mut idx| {
        let mut coeffs = Vec::with_capacity(k + 1);
        for _ in 0..k {
            coeffs.push(kind.from_i64((idx % p) as i64));
            idx /= p;
        }
        coeffs.push(kind.one());
        Poly::new(kind, coeffs)
    })
}

/// Primitive integer polynomial proportional to `f` (rational base only).
fn to_integer_poly(f: &Poly) -> Vec<BigInt> {
    let rats: Vec<BigRational> = f
        .coeffs
        .iter()
        .map(|c| match c {
            BaseScalar::Rational(r) => r.clone(),
            _ => unreachable!(),
        })
        .collect();
    let lcm = rats.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let ints: Vec<BigInt> = rats.iter().map(|r| (r * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
    ints.into_iter().map(|c| c / &g).collect()
}

fn from_integer_poly(c: &[BigInt]) -> Poly {
    Poly::new(
        BaseKind::Rational,
        c.iter().map(|v| BaseScalar::Rational(BigRational::from_integer(v.clone()))).collect(),
    )
}

fn rational_factor(f: &Poly) -> Result<Option<Poly>> {
    let d = f.degree().unwrap();
    if d <= 1 {
        return Ok(None);
    }
    let ints = to_integer_poly(f);
    // irreducible modulo a good prime => irreducible over Q
    for p in [3u32, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43] {
        let kind = BaseKind::Prime(p);
        let lead = ints.last().unwrap().mod_floor(&BigInt::from(p));
        if lead.is_zero() {
            continue;
        }
        let fp = Poly::new(
            kind,
            ints.iter().map(|c| kind.from_i64(c.mod_floor(&BigInt::from(p)).to_i64().unwrap())).collect(),
        );
        if fp.gcd(&fp.derivative()).degree() != Some(0) {
            continue;
        }
        if fp.ddf_first(p).is_none() {
            return Ok(None);
        }
    }
    for k in 1..=d / 2 {
        if let Some(g) = kronecker_factor(&ints, k) {
            return Ok(Some(from_integer_poly(&g)));
        }
    }
    Ok(None)
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let mut out = Vec::new();
    let Some(m) = n.to_u64() else { return out };
    let mut i = 1u64;
    while i * i <= m {
        if m % i == 0 {
            out.push(BigInt::from(i));
            if i * i != m {
                out.push(BigInt::from(m / i));
            }
        }
        i += 1;
    }
    out
}

fn eval_int(f: &[BigInt], x: i64) -> BigInt {
    let x = BigInt::from(x);
    f.iter().rev().fold(BigInt::zero(), |acc, c| acc * &x + c)
}

/// Kronecker's method: an integer factor of degree exactly `k`, if one exists.
fn kronecker_factor(f: &[BigInt], k: usize) -> Option<Vec<BigInt>> {
    let mut points = Vec::new();
    let mut cand = 0i64;
    while points.len() <= k {
        let v = eval_int(f, cand);
        if v.is_zero() {
            // rational root at an integer point
            if k == 1 {
                return Some(vec![BigInt::from(-cand), BigInt::one()]);
            }
        } else {
            points.push((cand, v));
        }
        cand = if cand <= 0 { 1 - cand } else { -cand };
    }
    let choices: Vec<Vec<BigInt>> = points
        .iter()
        .enumerate()
        .map(|(i, (_, v))| {
            let ds = divisors(v);
            if i == 0 {
                ds
            } else {
                ds.iter().flat_map(|d| [d.clone(), -d.clone()]).collect()
            }
        })
        .collect();
    if choices.iter().any(Vec::is_empty) {
        return None;
    }
    let fq = from_integer_poly(f);
    let mut idx = vec![0usize; choices.len()];
    loop {
        let vals: Vec<BigRational> = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| BigRational::from_integer(choices[i][j].clone()))
            .collect();
        let xs: Vec<i64> = points.iter().map(|(x, _)| *x).collect();
        let g = interpolate(&xs, &vals);
        if g.degree() == Some(k) && g.divides(&fq) {
            return Some(to_integer_poly(&g));
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return None;
            }
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn interpolate(xs: &[i64], ys: &[BigRational]) -> Poly {
    let kind = BaseKind::Rational;
    let mut acc = Poly::zero(kind);
    for (i, &xi) in xs.iter().enumerate() {
        let mut basis = Poly::constant(BaseScalar::Rational(ys[i].clone()));
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                let lin = Poly::from_i64s(kind, &[-xj, 1]);
                let inv = kind.from_i64(xi - xj).inv().unwrap();
                basis = basis.mul(&lin).scale(&inv);
            }
        }
        acc = acc.add(&basis);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_and_gcd() {
        let q = BaseKind::Rational;
        let a = Poly::from_i64s(q, &[-1, 0, 1]);
        let b = Poly::from_i64s(q, &[1, 1]);
        let (quot, rem) = a.div_rem(&b).unwrap();
        assert_eq!(quot, Poly::from_i64s(q, &[-1, 1]));
        assert!(rem.is_zero());
        assert_eq!(a.gcd(&Poly::from_i64s(q, &[-1, 1])), Poly::from_i64s(q, &[-1, 1]));
    }

    #[test]
    fn irreducibility_small_primes() {
        let f2 = BaseKind::Prime(2);
        let irr: Vec<Poly> = (1..=2).flat_map(|k| enumerate_monic(f2, k)).filter(|p| p.is_irreducible().unwrap()).collect();
        let shown: Vec<String> = irr.iter().map(|p| p.display_in("t")).collect();
        assert_eq!(shown, vec!["t", "t + 1", "t^2 + t + 1"]);
        assert!(Poly::from_i64s(BaseKind::Prime(3), &[1, 0, 1]).is_irreducible().unwrap());
        // x^4 + x + 1 irreducible over F_2, x^4 + x^2 + 1 = (x^2+x+1)^2 is not
        assert!(Poly::from_i64s(f2, &[1, 1, 0, 0, 1]).is_irreducible().unwrap());
        assert!(!Poly::from_i64s(f2, &[1, 0, 1, 0, 1]).is_irreducible().unwrap());
    }

    #[test]
    fn factoring() {
        let q = BaseKind::Rational;
        // t(t-1)(t^2+1)
        let f = Poly::from_i64s(q, &[0, 1])
            .mul(&Poly::from_i64s(q, &[-1, 1]))
            .mul(&Poly::from_i64s(q, &[1, 0, 1]));
        let fac = f.factor(2).unwrap();
        assert_eq!(fac.len(), 3);
        let f5 = BaseKind::Prime(5);
        // (t^2+2)^2 (t+1) over F_5
        let g = Poly::from_i64s(f5, &[2, 0, 1]);
        let h = g.mul(&g).mul(&Poly::from_i64s(f5, &[1, 1]));
        let fac = h.factor(6).unwrap();
        assert_eq!(fac, vec![(Poly::from_i64s(f5, &[1, 1]), 1), (g, 2)]);
        // x^4+1 = (x^2+x+2)(x^2-x+2)... over F_3; irreducible over Q
        assert!(Poly::from_i64s(q, &[1, 0, 0, 0, 1]).is_irreducible().unwrap());
        let cubic = Poly::from_i64s(q, &[-2, 0, 0, 1]);
        assert!(matches!(cubic.factor(2), Err(Error::FactorizationOutOfScope(_))));
    }
}
