//! Residues of rational differentials on the projective line: closed points,
//! local expansions and the global sum.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::forms::SeparatedForm;
use crate::poly::{enumerate_monic, Poly};
use crate::residue::res_tlf;
use crate::scalars::{BaseKind, BaseScalar, ExtField, ExtScalar};
use crate::series::Series;

pub const MAX_POINT_DEGREE_FP: usize = 6;
pub const MAX_POINT_DEGREE_Q: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClosedPoint {
    /// The zero locus of a monic irreducible polynomial.
    Finite(Poly),
    Infinity,
}

impl ClosedPoint {
    pub fn degree(&self) -> usize {
        match self {
            ClosedPoint::Finite(m) => m.degree().unwrap_or(0),
            ClosedPoint::Infinity => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ClosedPoint::Finite(m) => m.display_in("t"),
            ClosedPoint::Infinity => "inf".into(),
        }
    }

    /// `k(x)`; the trivial extension for rational points.
    pub fn residue_field(&self, kind: BaseKind) -> Result<Arc<ExtField>> {
        match self {
            ClosedPoint::Finite(m) if m.degree().unwrap_or(0) > 1 => ExtField::new(kind, m.coeffs().to_vec()),
            _ => Ok(ExtField::trivial(kind)),
        }
    }
}

impl fmt::Display for ClosedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `(p(t) / q(t)) dt` in lowest terms with `q` monic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalForm {
    num: Poly,
    den: Poly,
}

impl RationalForm {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(RationalForm { num, den: Poly::constant(den.kind().one()) });
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = (num.div_rem(&g)?.0, den.div_rem(&g)?.0);
        let lc = den.leading().inv()?;
        num = num.scale(&lc);
        den = den.scale(&lc);
        Ok(RationalForm { num, den })
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn kind(&self) -> BaseKind {
        self.den.kind()
    }
}

impl fmt::Display for RationalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == Some(0) {
            write!(f, "({}) dt", self.num.display_in("t"))
        } else {
            write!(f, "({})/({}) dt", self.num.display_in("t"), self.den.display_in("t"))
        }
    }
}

fn max_degree(kind: BaseKind) -> usize {
    match kind {
        BaseKind::Rational => MAX_POINT_DEGREE_Q,
        BaseKind::Prime(_) => MAX_POINT_DEGREE_FP,
    }
}

/// The points where `q` vanishes, optionally followed by infinity.
pub fn enumerate_closed_points(q: &Poly, include_infinity: bool) -> Result<Vec<ClosedPoint>> {
    let mut out: Vec<ClosedPoint> = if q.degree().unwrap_or(0) == 0 {
        vec![]
    } else {
        q.factor(max_degree(q.kind()))?.into_iter().map(|(m, _)| ClosedPoint::Finite(m)).collect()
    };
    if include_infinity {
        out.push(ClosedPoint::Infinity);
    }
    Ok(out)
}

/// All monic irreducibles of degree `<= d` over a prime field.
pub fn irreducibles_up_to(kind: BaseKind, d: usize) -> Result<Vec<Poly>> {
    if kind == BaseKind::Rational {
        return Err(Error::Domain("irreducibles are enumerated over prime fields only".into()));
    }
    let mut out = Vec::new();
    for k in 1..=d {
        for m in enumerate_monic(kind, k) {
            if m.is_irreducible()? {
                out.push(m);
            }
        }
    }
    Ok(out)
}

fn poly_series(p: &Poly, field: &Arc<ExtField>, x: &Series) -> Series {
    let mut acc = Series::zero(field, 1);
    for c in p.coeffs().iter().rev() {
        acc = acc.mul(x).add(&Series::constant(field, 1, ExtScalar::from_base(field, c.clone())));
    }
    acc
}

/// `T(u)` with `m(T(u)) = u` and `T(0)` the class of `t`, to precision `w`.
fn hensel_parameter(m: &Poly, field: &Arc<ExtField>, w: i64) -> Result<Series> {
    let theta = if m.degree() == Some(1) {
        ExtScalar::from_base(field, m.coeff(0).neg())
    } else {
        ExtScalar::generator_power(field, 1)
    };
    let u = Series::gen(field, 1, 1);
    let dm = m.derivative();
    let mut t = Series::constant(field, 1, theta).truncate(w);
    let mut good = 1;
    while good < w {
        let resid = poly_series(m, field, &t).sub(&u);
        let step = resid.mul(&poly_series(&dm, field, &t).inv_with(w)?);
        t = t.sub(&step).truncate(w);
        good *= 2;
    }
    if !poly_series(m, field, &t).sub(&u).is_zero_within_precision() {
        return Err(Error::InsufficientPrecision("Hensel lift did not converge".into()));
    }
    Ok(t)
}

/// `ω` in the local parameter at `x` as a top-degree form over `k(x)((u))`.
pub fn local_expansion(w: &RationalForm, x: &ClosedPoint) -> Result<SeparatedForm> {
    let kind = w.kind();
    let field = x.residue_field(kind)?;
    match x {
        ClosedPoint::Finite(m) => {
            let mut rest = w.den.clone();
            let mut e: i64 = 0;
            while m.divides(&rest) {
                rest = rest.div_rem(m)?.0;
                e += 1;
            }
            let prec = e + 2;
            let t = hensel_parameter(m, &field, prec)?;
            let dt = t.derivative(1);
            let g = poly_series(&w.num, &field, &t)
                .mul(&poly_series(&rest, &field, &t).inv_with(prec)?)
                .mul(&dt)
                .truncate(prec)
                .shift(&[-e]);
            Ok(SeparatedForm::top(g))
        }
        ClosedPoint::Infinity => {
            // t = 1/u, dt = -u^-2 du
            let dp = w.num.degree().map_or(0, |d| d as i64);
            let dq = w.den.degree().unwrap_or(0) as i64;
            let rev = |p: &Poly| Poly::new(kind, p.coeffs().iter().rev().cloned().collect());
            let s = dq - dp - 2;
            let prec = (-s).max(0) + 2;
            let u = Series::gen(&field, 1, 1);
            let g = poly_series(&rev(&w.num), &field, &u)
                .mul(&poly_series(&rev(&w.den), &field, &u).inv_with(prec)?)
                .truncate(prec)
                .shift(&[s])
                .neg();
            Ok(SeparatedForm::top(g))
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalSum {
    pub sum: BaseScalar,
    pub locals: Vec<(ClosedPoint, BaseScalar)>,
}

impl GlobalSum {
    pub fn to_json(&self) -> Value {
        let mut locals = Map::new();
        for (x, r) in &self.locals {
            locals.insert(x.label(), Value::String(r.to_canonical_string()));
        }
        json!({ "sum": self.sum.to_canonical_string(), "locals": locals })
    }
}

pub fn global_residue_sum(w: &RationalForm) -> Result<GlobalSum> {
    let kind = w.kind();
    let mut sum = kind.zero();
    let mut locals = Vec::new();
    for x in enumerate_closed_points(&w.den, true)? {
        let r = res_tlf(&local_expansion(w, &x)?)?;
        sum = sum.add(&r);
        locals.push((x, r));
    }
    Ok(GlobalSum { sum, locals })
}

/// Residue at the rational point `t = a` read off the Taylor expansion of `p/r` where `q = (t-a)^e r`.
pub fn partial_fraction_residue(w: &RationalForm, a: &BaseScalar) -> Result<BaseScalar> {
    let kind = w.kind();
    // shift t = a + s
    let shift = |p: &Poly| -> Poly {
        let lin = Poly::new(kind, vec![a.clone(), kind.one()]);
        let mut acc = Poly::zero(kind);
        for c in p.coeffs().iter().rev() {
            acc = acc.mul(&lin).add(&Poly::constant(c.clone()));
        }
        acc
    };
    let (p, q) = (shift(&w.num), shift(&w.den));
    let e = q.coeffs().iter().take_while(|c| c.is_zero()).count();
    if e == 0 {
        return Ok(kind.zero());
    }
    let r: Vec<BaseScalar> = q.coeffs()[e..].to_vec();
    // power series p / r up to s^{e-1}
    let r0inv = r[0].inv()?;
    let mut quo: Vec<BaseScalar> = Vec::with_capacity(e);
    for i in 0..e {
        let mut acc = p.coeff(i);
        for (j, qj) in quo.iter().enumerate() {
            if let Some(rk) = r.get(i - j) {
                acc = acc.sub(&qj.mul(rk));
            }
        }
        quo.push(acc.mul(&r0inv));
    }
    Ok(quo[e - 1].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(kind: BaseKind, p: &[i64], q: &[i64]) -> RationalForm {
        RationalForm::new(Poly::from_i64s(kind, p), Poly::from_i64s(kind, q)).unwrap()
    }

    #[test]
    fn points() {
        let q = BaseKind::Rational;
        let pts = enumerate_closed_points(&Poly::from_i64s(q, &[0, -1, 1]), true).unwrap();
        let labels: Vec<String> = pts.iter().map(ClosedPoint::label).collect();
        assert_eq!(labels.len(), 3);
        assert!(labels.contains(&"t".to_string()) && labels.contains(&"inf".to_string()));
        let f3 = BaseKind::Prime(3);
        let pts = enumerate_closed_points(&Poly::from_i64s(f3, &[1, 0, 1]), false).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].degree(), 2);
        let irr = irreducibles_up_to(BaseKind::Prime(2), 2).unwrap();
        assert_eq!(irr, vec![
            Poly::from_i64s(BaseKind::Prime(2), &[0, 1]),
            Poly::from_i64s(BaseKind::Prime(2), &[1, 1]),
            Poly::from_i64s(BaseKind::Prime(2), &[1, 1, 1]),
        ]);
    }

    #[test]
    fn local_examples() {
        let q = BaseKind::Rational;
        let w = form(q, &[1], &[-1, 1]);
        let x = ClosedPoint::Finite(Poly::from_i64s(q, &[-1, 1]));
        let l = local_expansion(&w, &x).unwrap();
        let f = ExtField::trivial(q);
        assert!(l.coeff(&[1]).eq_within(&Series::gen(&f, 1, 1).pow(-1).unwrap()));
        let dt = form(q, &[1], &[1]);
        let l = local_expansion(&dt, &ClosedPoint::Infinity).unwrap();
        assert!(l.coeff(&[1]).eq_within(&Series::gen(&f, 1, 1).pow(-2).unwrap().neg()));
        assert!(res_tlf(&l).unwrap().is_zero());
    }

    #[test]
    fn global_examples() {
        let q = BaseKind::Rational;
        let g = global_residue_sum(&form(q, &[1], &[0, -1, 1])).unwrap();
        assert!(g.sum.is_zero());
        let j = g.to_json();
        assert_eq!(j["locals"], serde_json::json!({ "t": "-1", "t - 1": "1", "inf": "0" }));
        let f3 = BaseKind::Prime(3);
        let g = global_residue_sum(&form(f3, &[0, 1], &[1, 0, 1])).unwrap();
        assert!(g.sum.is_zero());
        assert_eq!(g.locals[0].1, f3.from_i64(1));
        assert_eq!(g.locals[1].1, f3.from_i64(2));
        assert!(global_residue_sum(&form(q, &[1], &[1])).unwrap().sum.is_zero());
    }

    #[test]
    fn oracle_agrees_with_expansion() {
        let f5 = BaseKind::Prime(5);
        // (t^2 + 1) / ((t - 1)^3 (t + 2))
        let den = Poly::from_i64s(f5, &[-1, 3, -3, 1]).mul(&Poly::from_i64s(f5, &[2, 1]));
        let w = RationalForm::new(Poly::from_i64s(f5, &[1, 0, 1]), den).unwrap();
        for a in [1, -2] {
            let x = ClosedPoint::Finite(Poly::from_i64s(f5, &[-a, 1]));
            let r = res_tlf(&local_expansion(&w, &x).unwrap()).unwrap();
            assert_eq!(r, partial_fraction_residue(&w, &f5.from_i64(a)).unwrap());
        }
        assert!(global_residue_sum(&w).unwrap().sum.is_zero());
    }
}
