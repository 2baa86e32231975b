//! Truncated iterated Laurent series `k'((t_1,...,t_n))`.
//!
//! A depth-`n` series is a Laurent series in `t_1` whose coefficients are
//! depth-`(n-1)` series in `t_2,...,t_n`; depth 0 is a scalar of `k'`.
//! Every level carries an absolute precision: `prec = Some(P)` means all
//! `t_1`-exponents `>= P` are unknown, `None` means the series is exact.
//! Stored coefficients start at `order`; implicit entries between the last
//! stored coefficient and `prec` are exact zeros.

mod subst;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{precision, Error, Result};
use crate::scalars::{ExtField, ExtScalar};

pub use subst::{check_uniformizer_valuation, substitute};

/// Default number of `t_1`-coefficients produced by inverses of exact series.
pub const DEFAULT_WINDOW: i64 = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Series {
    Const(ExtScalar),
    Laurent(Arc<Laurent>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Laurent {
    field: Arc<ExtField>,
    depth: usize,
    order: i64,
    prec: Option<i64>,
    coeffs: Vec<Series>,
}

fn min_prec(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Laurent {
    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn prec(&self) -> Option<i64> {
        self.prec
    }

    pub fn coeffs(&self) -> &[Series] {
        &self.coeffs
    }

    /// Coefficient of `t_1^e`, assuming `e` is below the precision.
    fn coeff_or_zero(&self, e: i64) -> Series {
        let i = e - self.order;
        if i >= 0 && (i as usize) < self.coeffs.len() {
            self.coeffs[i as usize].clone()
        } else {
            Series::zero(&self.field, self.depth - 1)
        }
    }
}

impl Series {
    /// Builds a normalized series of positive depth.
    pub fn build(field: &Arc<ExtField>, depth: usize, order: i64, prec: Option<i64>, mut coeffs: Vec<Series>) -> Series {
        assert!(depth >= 1);
        let mut order = order;
        if let Some(p) = prec {
            let keep = (p - order).max(0) as usize;
            if coeffs.len() > keep {
                coeffs.truncate(keep);
            }
        }
        while coeffs.last().is_some_and(Series::is_exact_zero) {
            coeffs.pop();
        }
        let lead = coeffs.iter().take_while(|c| c.is_exact_zero()).count();
        if lead > 0 {
            coeffs.drain(..lead);
            order += lead as i64;
        }
        if coeffs.is_empty() {
            order = prec.unwrap_or(0);
        }
        Series::Laurent(Arc::new(Laurent { field: field.clone(), depth, order, prec, coeffs }))
    }

    pub fn zero(field: &Arc<ExtField>, depth: usize) -> Series {
        if depth == 0 {
            Series::Const(ExtScalar::zero(field))
        } else {
            Series::build(field, depth, 0, None, vec![])
        }
    }

    /// `O(t_1^prec)`
    pub fn inexact_zero(field: &Arc<ExtField>, depth: usize, prec: i64) -> Series {
        assert!(depth >= 1);
        Series::build(field, depth, prec, Some(prec), vec![])
    }

    pub fn constant(field: &Arc<ExtField>, depth: usize, c: ExtScalar) -> Series {
        if depth == 0 {
            Series::Const(c)
        } else {
            Series::build(field, depth, 0, None, vec![Series::constant(field, depth - 1, c)])
        }
    }

    pub fn from_i64(field: &Arc<ExtField>, depth: usize, v: i64) -> Series {
        Series::constant(field, depth, ExtScalar::from_i64(field, v))
    }

    pub fn one(field: &Arc<ExtField>, depth: usize) -> Series {
        Series::from_i64(field, depth, 1)
    }

    /// `c * t^exps`
    pub fn monomial(field: &Arc<ExtField>, exps: &[i64], c: ExtScalar) -> Series {
        match exps.split_first() {
            None => Series::Const(c),
            Some((&e, rest)) => {
                let inner = Series::monomial(field, rest, c);
                Series::build(field, exps.len(), e, None, vec![inner])
            }
        }
    }

    /// The generator `t_i` (1-based) at the given depth.
    pub fn gen(field: &Arc<ExtField>, depth: usize, i: usize) -> Series {
        let mut exps = vec![0; depth];
        exps[i - 1] = 1;
        Series::monomial(field, &exps, ExtScalar::one(field))
    }

    /// Exact finite sum of monomials.
    pub fn from_terms(field: &Arc<ExtField>, depth: usize, terms: &[(Vec<i64>, ExtScalar)]) -> Series {
        terms
            .iter()
            .fold(Series::zero(field, depth), |acc, (e, c)| acc.add(&Series::monomial(field, e, c.clone())))
    }

    pub fn field(&self) -> &Arc<ExtField> {
        match self {
            Series::Const(c) => c.field(),
            Series::Laurent(l) => &l.field,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Series::Const(_) => 0,
            Series::Laurent(l) => l.depth,
        }
    }

    pub fn as_laurent(&self) -> Option<&Laurent> {
        match self {
            Series::Const(_) => None,
            Series::Laurent(l) => Some(l),
        }
    }

    pub fn as_const(&self) -> Option<&ExtScalar> {
        match self {
            Series::Const(c) => Some(c),
            Series::Laurent(_) => None,
        }
    }

    /// Lowest stored `t_1`-exponent (0 for the exact zero, `prec` for an inexact zero).
    pub fn order(&self) -> i64 {
        self.as_laurent().map_or(0, |l| l.order)
    }

    pub fn prec(&self) -> Option<i64> {
        self.as_laurent().and_then(|l| l.prec)
    }

    /// Number of guaranteed `t_1`-coefficients from `order`; `None` when exact.
    pub fn window(&self) -> Option<i64> {
        self.as_laurent().and_then(|l| l.prec.map(|p| p - l.order))
    }

    /// True if no level carries a precision bound.
    pub fn is_exact(&self) -> bool {
        match self {
            Series::Const(_) => true,
            Series::Laurent(l) => l.prec.is_none() && l.coeffs.iter().all(Series::is_exact),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        match self {
            Series::Const(c) => c.is_zero(),
            Series::Laurent(l) => l.prec.is_none() && l.coeffs.is_empty(),
        }
    }

    /// Every known coefficient vanishes.
    pub fn is_zero_within_precision(&self) -> bool {
        match self {
            Series::Const(c) => c.is_zero(),
            Series::Laurent(l) => l.coeffs.iter().all(Series::is_zero_within_precision),
        }
    }

    pub fn eq_within(&self, other: &Series) -> bool {
        self.sub(other).is_zero_within_precision()
    }

    /// True if the value lies in `k'` (all levels at exponent 0, exact).
    pub fn as_scalar(&self) -> Option<ExtScalar> {
        match self {
            Series::Const(c) => Some(c.clone()),
            Series::Laurent(l) => {
                if l.prec.is_some() {
                    return None;
                }
                match l.coeffs.len() {
                    0 => Some(ExtScalar::zero(&l.field)),
                    1 if l.order == 0 => l.coeffs[0].as_scalar(),
                    _ => None,
                }
            }
        }
    }

    fn check_compatible(&self, other: &Series) {
        debug_assert_eq!(self.depth(), other.depth(), "depth mismatch");
    }

    pub fn add(&self, other: &Series) -> Series {
        self.check_compatible(other);
        match (self, other) {
            (Series::Const(a), Series::Const(b)) => Series::Const(a.add(b)),
            (Series::Laurent(a), Series::Laurent(b)) => {
                if b.prec.is_none() && b.coeffs.is_empty() {
                    return self.clone();
                }
                if a.prec.is_none() && a.coeffs.is_empty() {
                    return other.clone();
                }
                let prec = min_prec(a.prec, b.prec);
                let lo = a.order.min(b.order);
                let mut hi = (a.order + a.coeffs.len() as i64).max(b.order + b.coeffs.len() as i64);
                if let Some(p) = prec {
                    hi = hi.min(p);
                }
                let coeffs = (lo..hi)
                    .map(|e| {
                        let ca = a.coeff_or_zero(e);
                        let cb = b.coeff_or_zero(e);
                        ca.add(&cb)
                    })
                    .collect();
                Series::build(&a.field, a.depth, lo, prec, coeffs)
            }
            _ => panic!("depth mismatch"),
        }
    }

    pub fn neg(&self) -> Series {
        self.map_scalars(&|c| c.neg())
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &ExtScalar) -> Series {
        if s.is_zero() {
            // zero times an unknown remainder is still zero
            return match self {
                Series::Const(_) => Series::Const(s.clone()),
                Series::Laurent(l) => Series::zero(&l.field, l.depth),
            };
        }
        self.map_scalars(&|c| c.mul(s))
    }

    pub fn mul_int(&self, k: i64) -> Series {
        self.scale(&ExtScalar::from_i64(self.field(), k))
    }

    fn map_scalars(&self, f: &dyn Fn(&ExtScalar) -> ExtScalar) -> Series {
        match self {
            Series::Const(c) => Series::Const(f(c)),
            Series::Laurent(l) => Series::build(
                &l.field,
                l.depth,
                l.order,
                l.prec,
                l.coeffs.iter().map(|c| c.map_scalars(f)).collect(),
            ),
        }
    }

    /// Multiplies by the monomial `t^exps`.
    pub fn shift(&self, exps: &[i64]) -> Series {
        match self {
            Series::Const(_) => self.clone(),
            Series::Laurent(l) => {
                let (e, rest) = exps.split_first().expect("exponent vector too short");
                Series::build(
                    &l.field,
                    l.depth,
                    l.order + e,
                    l.prec.map(|p| p + e),
                    l.coeffs.iter().map(|c| c.shift(rest)).collect(),
                )
            }
        }
    }

    pub fn mul(&self, other: &Series) -> Series {
        self.check_compatible(other);
        match (self, other) {
            (Series::Const(a), Series::Const(b)) => Series::Const(a.mul(b)),
            (Series::Laurent(a), Series::Laurent(b)) => {
                if self.is_exact_zero() || other.is_exact_zero() {
                    return Series::zero(&a.field, a.depth);
                }
                if let Some(c) = self.as_scalar() {
                    return other.scale(&c);
                }
                if let Some(c) = other.as_scalar() {
                    return self.scale(&c);
                }
                let prec = min_prec(a.prec.map(|p| p + b.order), b.prec.map(|p| p + a.order));
                let lo = a.order + b.order;
                let mut len = (a.coeffs.len() + b.coeffs.len()).saturating_sub(1) as i64;
                if let Some(p) = prec {
                    len = len.min((p - lo).max(0));
                }
                let zero = Series::zero(&a.field, a.depth - 1);
                let mut out = vec![zero; len as usize];
                for (i, x) in a.coeffs.iter().enumerate() {
                    if x.is_exact_zero() || i as i64 >= len {
                        continue;
                    }
                    for (j, y) in b.coeffs.iter().enumerate() {
                        let k = i + j;
                        if k as i64 >= len {
                            break;
                        }
                        if y.is_exact_zero() {
                            continue;
                        }
                        out[k] = out[k].add(&x.mul(y));
                    }
                }
                Series::build(&a.field, a.depth, lo, prec, out)
            }
            _ => panic!("depth mismatch"),
        }
    }

    pub fn inv(&self) -> Result<Series> {
        self.inv_with(DEFAULT_WINDOW)
    }

    /// Inverse; exact non-monomial inputs are expanded to `w` coefficients per level.
    pub fn inv_with(&self, w: i64) -> Result<Series> {
        match self {
            Series::Const(c) => Ok(Series::Const(c.inv()?)),
            Series::Laurent(a) => {
                if self.is_exact_zero() {
                    return Err(Error::DivisionByZero);
                }
                if a.coeffs.is_empty() {
                    return Err(precision("inverse of a series with no known coefficients"));
                }
                let lead_inv = a.coeffs[0].inv_with(w)?;
                let alpha = a.order;
                let (prec, n) = match a.prec {
                    Some(p) => (Some(p - 2 * alpha), p - alpha),
                    None if a.coeffs.len() == 1 => (None, 1),
                    None => (Some(w - alpha), w),
                };
                let mut ys: Vec<Series> = Vec::with_capacity(n as usize);
                ys.push(lead_inv.clone());
                let neg_lead_inv = lead_inv.neg();
                for j in 1..n as usize {
                    let mut acc = Series::zero(&a.field, a.depth - 1);
                    for i in 1..=j.min(a.coeffs.len() - 1) {
                        let ai = &a.coeffs[i];
                        if ai.is_exact_zero() {
                            continue;
                        }
                        acc = acc.add(&ai.mul(&ys[j - i]));
                    }
                    ys.push(neg_lead_inv.mul(&acc));
                }
                Ok(Series::build(&a.field, a.depth, -alpha, prec, ys))
            }
        }
    }

    pub fn div(&self, other: &Series) -> Result<Series> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn div_with(&self, other: &Series, w: i64) -> Result<Series> {
        Ok(self.mul(&other.inv_with(w)?))
    }

    pub fn pow(&self, k: i64) -> Result<Series> {
        self.pow_with(k, DEFAULT_WINDOW)
    }

    pub fn pow_with(&self, k: i64, w: i64) -> Result<Series> {
        let base = if k < 0 { self.inv_with(w)? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Series::one(self.field(), self.depth());
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b);
            }
        }
        Ok(acc)
    }

    /// Lexicographic valuation, `t_1` dominant.
    pub fn valuation(&self) -> Result<Vec<i64>> {
        match self {
            Series::Const(c) => {
                if c.is_zero() {
                    Err(Error::IndeterminateValuation("the zero element has no valuation".into()))
                } else {
                    Ok(vec![])
                }
            }
            Series::Laurent(l) => {
                let Some(lead) = l.coeffs.first() else {
                    return Err(Error::IndeterminateValuation(match l.prec {
                        None => "the zero element has no valuation".into(),
                        Some(p) => format!("no nonzero coefficient below t1^{p}"),
                    }));
                };
                let mut v = vec![l.order];
                v.extend(lead.valuation()?);
                Ok(v)
            }
        }
    }

    pub fn coefficient_at(&self, idx: &[i64]) -> Result<ExtScalar> {
        match self {
            Series::Const(c) => Ok(c.clone()),
            Series::Laurent(l) => {
                let (&e, rest) = idx
                    .split_first()
                    .ok_or_else(|| Error::Domain("multi-index shorter than depth".into()))?;
                if let Some(p) = l.prec {
                    if e >= p {
                        return Err(precision(format!(
                            "coefficient of t^{e} requested at level {} but precision ends at {p}",
                            idx.len()
                        )));
                    }
                }
                let i = e - l.order;
                if i < 0 || i as usize >= l.coeffs.len() {
                    return Ok(ExtScalar::zero(&l.field));
                }
                l.coeffs[i as usize].coefficient_at(rest)
            }
        }
    }

    /// Coefficient of `t_1^e` as a depth-`(n-1)` series.
    pub fn coeff_series(&self, e: i64) -> Result<Series> {
        let l = self.as_laurent().ok_or_else(|| Error::Domain("scalar has no t1-coefficients".into()))?;
        if l.prec.is_some_and(|p| e >= p) {
            return Err(precision(format!("t1^{e} lies beyond precision")));
        }
        Ok(l.coeff_or_zero(e))
    }

    /// Partial derivative along `t_axis` (1-based).
    pub fn derivative(&self, axis: usize) -> Series {
        match self {
            Series::Const(c) => Series::Const(ExtScalar::zero(c.field())),
            Series::Laurent(l) => {
                if axis == 1 {
                    let coeffs = l
                        .coeffs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c.mul_int(l.order + i as i64))
                        .collect();
                    Series::build(&l.field, l.depth, l.order - 1, l.prec.map(|p| p - 1), coeffs)
                } else {
                    let coeffs = l.coeffs.iter().map(|c| c.derivative(axis - 1)).collect();
                    Series::build(&l.field, l.depth, l.order, l.prec, coeffs)
                }
            }
        }
    }

    /// Caps the `t_1`-precision at `p`.
    pub fn truncate(&self, p: i64) -> Series {
        match self {
            Series::Const(_) => self.clone(),
            Series::Laurent(l) => {
                let prec = min_prec(l.prec, Some(p));
                Series::build(&l.field, l.depth, l.order, prec, l.coeffs.clone())
            }
        }
    }

    /// Caps the `t_1`-precision at `order + w`.
    pub fn truncate_window(&self, w: i64) -> Series {
        self.truncate(self.order() + w)
    }

    /// Caps precision at every level: `t_1` at `order + w`, and each coefficient recursively.
    pub fn truncate_all(&self, w: i64) -> Series {
        match self {
            Series::Const(_) => self.clone(),
            Series::Laurent(l) => {
                let prec = min_prec(l.prec, Some(l.order + w));
                let coeffs = l.coeffs.iter().map(|c| c.truncate_all(w)).collect();
                Series::build(&l.field, l.depth, l.order, prec, coeffs)
            }
        }
    }

    /// Applies `f` to every scalar coefficient, landing in `target`.
    pub fn map_into(&self, target: &Arc<ExtField>, f: &dyn Fn(&ExtScalar) -> ExtScalar) -> Series {
        match self {
            Series::Const(c) => Series::Const(f(c)),
            Series::Laurent(l) => {
                let coeffs = l.coeffs.iter().map(|c| c.map_into(target, f)).collect();
                Series::build(target, l.depth, l.order, l.prec, coeffs)
            }
        }
    }

    /// Nonzero known monomials in lexicographic order.
    pub fn terms(&self) -> Vec<(Vec<i64>, ExtScalar)> {
        let mut out = Vec::new();
        self.collect_terms(&mut vec![], &mut out);
        out
    }

    fn collect_terms(&self, prefix: &mut Vec<i64>, out: &mut Vec<(Vec<i64>, ExtScalar)>) {
        match self {
            Series::Const(c) => {
                if !c.is_zero() {
                    out.push((prefix.clone(), c.clone()));
                }
            }
            Series::Laurent(l) => {
                for (i, c) in l.coeffs.iter().enumerate() {
                    prefix.push(l.order + i as i64);
                    c.collect_terms(prefix, out);
                    prefix.pop();
                }
            }
        }
    }

    /// Unknown remainders: `(prefix, prec)` meaning `t^prefix * O(t_{len+1}^prec)`.
    pub fn tails(&self) -> Vec<(Vec<i64>, i64)> {
        let mut out = Vec::new();
        self.collect_tails(&mut vec![], &mut out);
        out
    }

    fn collect_tails(&self, prefix: &mut Vec<i64>, out: &mut Vec<(Vec<i64>, i64)>) {
        if let Series::Laurent(l) = self {
            if let Some(p) = l.prec {
                out.push((prefix.clone(), p));
            }
            for (i, c) in l.coeffs.iter().enumerate() {
                prefix.push(l.order + i as i64);
                c.collect_tails(prefix, out);
                prefix.pop();
            }
        }
    }

    /// Random exact series with exponents in `[lo, hi]` at every level.
    pub fn random<R: Rng + ?Sized>(field: &Arc<ExtField>, depth: usize, lo: i64, hi: i64, density: f64, rng: &mut R) -> Series {
        if depth == 0 {
            return Series::Const(ExtScalar::random(field, rng));
        }
        let coeffs = (lo..=hi)
            .map(|_| {
                if rng.gen_bool(density) {
                    Series::random(field, depth - 1, lo, hi, density, rng)
                } else {
                    Series::zero(field, depth - 1)
                }
            })
            .collect();
        Series::build(field, depth, lo, None, coeffs)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Series::Const(c) => c.to_json(),
            Series::Laurent(l) => json!({
                "order": l.order,
                "window": l.prec.map(|p| p - l.order),
                "coeffs": l.coeffs.iter().map(Series::to_json).collect::<Vec<_>>(),
            }),
        }
    }

    pub fn from_json(field: &Arc<ExtField>, depth: usize, v: &Value) -> Result<Series> {
        let bad = || Error::Domain("series JSON must be {\"order\", \"window\", \"coeffs\"}".into());
        if depth == 0 {
            let s = v.as_str().ok_or_else(bad)?;
            return parse_ext_scalar(field, s).map(Series::Const);
        }
        let order = v.get("order").and_then(Value::as_i64).ok_or_else(bad)?;
        let prec = match v.get("window") {
            None | Some(Value::Null) => None,
            Some(w) => Some(order + w.as_i64().ok_or_else(bad)?),
        };
        let coeffs = v
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|c| Series::from_json(field, depth - 1, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Series::build(field, depth, order, prec, coeffs))
    }

    /// Human-readable form with variables `t{first}, t{first+1}, ...`.
    pub fn display_from(&self, first: usize) -> String {
        match self {
            Series::Const(c) => c.to_canonical_string(),
            Series::Laurent(l) => {
                let var = format!("t{first}");
                let mut parts = Vec::new();
                for (i, c) in l.coeffs.iter().enumerate() {
                    if c.is_exact_zero() {
                        continue;
                    }
                    let e = l.order + i as i64;
                    let mono = match e {
                        0 => String::new(),
                        1 => var.clone(),
                        _ => format!("{var}^{e}"),
                    };
                    let cs = c.display_from(first + 1);
                    let simple = c.as_scalar().is_some() || !cs.contains(' ');
                    parts.push(match (mono.is_empty(), simple) {
                        (true, _) => cs,
                        (false, _) if c.as_scalar().is_some_and(|s| s.is_one()) => mono,
                        (false, true) => format!("{cs}*{mono}"),
                        (false, false) => format!("({cs})*{mono}"),
                    });
                }
                if let Some(p) = l.prec {
                    parts.push(format!("O({var}^{p})"));
                }
                if parts.is_empty() {
                    "0".into()
                } else {
                    parts.join(" + ")
                }
            }
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_from(1))
    }
}

/// Parses `a`, `a/b`, or `[c0,c1,...]` (power-basis coordinates) into `k'`.
pub fn parse_ext_scalar(field: &Arc<ExtField>, s: &str) -> Result<ExtScalar> {
    use crate::scalars::BaseScalar;
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        let coords = inner
            .split(',')
            .map(|c| BaseScalar::parse(field.base(), c))
            .collect::<Result<Vec<_>>>()?;
        return ExtScalar::new(field, coords);
    }
    Ok(ExtScalar::from_base(field, BaseScalar::parse(field.base(), s)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::BaseKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    fn t(f: &Arc<ExtField>, n: usize, i: usize) -> Series {
        Series::gen(f, n, i)
    }

    fn c(f: &Arc<ExtField>, n: usize, v: i64) -> Series {
        Series::from_i64(f, n, v)
    }

    #[test]
    fn one_plus_t_times_one_minus_t() {
        let f = q();
        let x = c(&f, 1, 1).add(&t(&f, 1, 1));
        let y = c(&f, 1, 1).sub(&t(&f, 1, 1));
        let expect = c(&f, 1, 1).sub(&t(&f, 1, 1).mul(&t(&f, 1, 1)));
        assert_eq!(x.mul(&y), expect);
        assert!(x.mul(&y).is_exact());
    }

    #[test]
    fn geometric_inverse() {
        let f = q();
        let x = c(&f, 1, 1).sub(&t(&f, 1, 1));
        let y = x.inv().unwrap();
        assert_eq!(y.order(), 0);
        assert_eq!(y.window(), Some(DEFAULT_WINDOW));
        for k in 0..DEFAULT_WINDOW {
            assert!(y.coefficient_at(&[k]).unwrap().is_one());
        }
        assert!(matches!(y.coefficient_at(&[DEFAULT_WINDOW]), Err(Error::InsufficientPrecision(_))));
        let y = x.inv_with(10).unwrap();
        assert!(y.coefficient_at(&[5]).unwrap().is_one());
    }

    #[test]
    fn inverse_of_shifted_unit() {
        // (t^-1 (1 + t))^-1 = t - t^2 + t^3 - ...
        let f = q();
        let x = t(&f, 1, 1).inv().unwrap().mul(&c(&f, 1, 1).add(&t(&f, 1, 1)));
        let y = x.inv().unwrap();
        assert_eq!(y.valuation().unwrap(), vec![1]);
        assert!(y.coefficient_at(&[2]).unwrap() == ExtScalar::from_i64(&f, -1));
        assert!(x.mul(&y).eq_within(&c(&f, 1, 1)));
    }

    #[test]
    fn monomial_inverse_is_exact() {
        let f = q();
        let x = Series::monomial(&f, &[2, -3], ExtScalar::from_i64(&f, 2));
        let y = x.inv().unwrap();
        assert!(y.is_exact());
        assert_eq!(y.valuation().unwrap(), vec![-2, 3]);
        assert_eq!(x.mul(&y), c(&f, 2, 1));
    }

    #[test]
    fn valuations() {
        let f = q();
        let x = Series::monomial(&f, &[2, -3], ExtScalar::one(&f));
        assert_eq!(x.valuation().unwrap(), vec![2, -3]);
        assert_eq!(c(&f, 2, 1).valuation().unwrap(), vec![0, 0]);
        let y = t(&f, 2, 1).add(&t(&f, 2, 2));
        assert_eq!(y.valuation().unwrap(), vec![0, 1]);
        let z = Series::inexact_zero(&f, 1, 4);
        assert!(matches!(z.valuation(), Err(Error::IndeterminateValuation(_))));
    }

    #[test]
    fn coefficients() {
        let f = q();
        let x = Series::monomial(&f, &[-1, -1], ExtScalar::one(&f));
        assert!(x.coefficient_at(&[-1, -1]).unwrap().is_one());
        let g = c(&f, 1, 1).sub(&t(&f, 1, 1)).inv().unwrap();
        assert!(g.coefficient_at(&[5]).unwrap().is_one());
    }

    #[test]
    fn derivatives() {
        let f = q();
        let x = Series::monomial(&f, &[2, 1], ExtScalar::one(&f));
        assert_eq!(x.derivative(1), Series::monomial(&f, &[1, 1], ExtScalar::from_i64(&f, 2)));
        let fp = ExtField::trivial(BaseKind::Prime(5));
        let tp = Series::monomial(&fp, &[5], ExtScalar::one(&fp));
        assert!(tp.derivative(1).is_exact_zero());
        // b = t2/(1 - t2) = sum_{j>=1} t2^j
        let b = t(&f, 2, 2).mul(&c(&f, 2, 1).sub(&t(&f, 2, 2)).inv().unwrap());
        let db = b.derivative(2);
        for j in 1..7 {
            assert_eq!(db.coefficient_at(&[0, j - 1]).unwrap(), ExtScalar::from_i64(&f, j));
        }
    }

    #[test]
    fn precision_propagation() {
        let f = q();
        let x = c(&f, 1, 1).add(&t(&f, 1, 1)).truncate(3);
        let y = Series::monomial(&f, &[-2], ExtScalar::one(&f));
        let p = x.mul(&y);
        assert_eq!(p.prec(), Some(1));
        let s = x.add(&y);
        assert_eq!(s.prec(), Some(3));
        assert_eq!(s.order(), -2);
    }

    #[test]
    fn json_roundtrip() {
        let f = ExtField::from_i64s(BaseKind::Prime(2), &[1, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = Series::random(&f, 2, -2, 2, 0.5, &mut rng).truncate_all(4);
            let v = x.to_json();
            assert_eq!(Series::from_json(&f, 2, &v).unwrap(), x);
        }
    }

    #[test]
    fn display() {
        let f = q();
        let x = c(&f, 1, 1).sub(&t(&f, 1, 1)).inv_with(3).unwrap();
        assert_eq!(x.to_string(), "1 + t1 + t1^2 + O(t1^3)");
        let y = t(&f, 2, 1).inv().unwrap().mul(&c(&f, 2, 1).add(&t(&f, 2, 2)));
        assert_eq!(y.to_string(), "(1 + t2)*t1^-1");
    }
}
