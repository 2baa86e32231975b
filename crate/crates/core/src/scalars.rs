//! Exact base-field arithmetic: the rationals, prime fields, and finite
//! extensions `k[x]/(m(x))` in the power basis.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::poly::Poly;

pub const MAX_PRIME: u32 = 97;
pub const MAX_EXT_DEGREE: usize = 6;

/// The base field `k`: either `Q` or `F_p` for a small prime `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Rational,
    Prime(u32),
}

impl BaseKind {
    /// Builds the base field of characteristic `c` (0 for the rationals).
    pub fn from_char(c: u32) -> Result<Self> {
        if c == 0 {
            return Ok(BaseKind::Rational);
        }
        if c > MAX_PRIME || !is_prime(c) {
            return Err(Error::Domain(format!(
                "characteristic must be 0 or a prime <= {MAX_PRIME}, got {c}"
            )));
        }
        Ok(BaseKind::Prime(c))
    }

    pub fn characteristic(self) -> u32 {
        match self {
            BaseKind::Rational => 0,
            BaseKind::Prime(p) => p,
        }
    }

    pub fn zero(self) -> BaseScalar {
        self.from_i64(0)
    }

    pub fn one(self) -> BaseScalar {
        self.from_i64(1)
    }

    pub fn from_i64(self, v: i64) -> BaseScalar {
        match self {
            BaseKind::Rational => BaseScalar::Rational(BigRational::from_integer(BigInt::from(v))),
            BaseKind::Prime(p) => BaseScalar::Prime {
                value: v.rem_euclid(p as i64) as u32,
                modulus: p,
            },
        }
    }

    /// `num/den` reduced into the field; fails if `den` vanishes in `k`.
    pub fn from_ratio(self, num: i64, den: i64) -> Result<BaseScalar> {
        let d = self.from_i64(den);
        Ok(self.from_i64(num).mul(&d.inv()?))
    }

    pub fn from_bigrational(self, r: &BigRational) -> Result<BaseScalar> {
        match self {
            BaseKind::Rational => Ok(BaseScalar::Rational(r.clone())),
            BaseKind::Prime(p) => {
                let m = BigInt::from(p);
                let n = r.numer().mod_floor(&m).to_i64().unwrap();
                let d = r.denom().mod_floor(&m).to_i64().unwrap();
                self.from_ratio(n, d)
            }
        }
    }

    /// Uniform-ish random element; rationals have small numerators and denominators.
    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> BaseScalar {
        match self {
            BaseKind::Rational => {
                let n: i64 = rng.gen_range(-5..=5);
                let d: i64 = rng.gen_range(1..=3);
                BaseScalar::Rational(BigRational::new(n.into(), d.into()))
            }
            BaseKind::Prime(p) => BaseScalar::Prime {
                value: rng.gen_range(0..p),
                modulus: p,
            },
        }
    }

    /// All elements of a prime field in order; `None` for the rationals.
    pub fn elements(self) -> Option<Vec<BaseScalar>> {
        match self {
            BaseKind::Rational => None,
            BaseKind::Prime(p) => Some((0..p as i64).map(|v| self.from_i64(v)).collect()),
        }
    }
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// An element of the base field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BaseScalar {
    /// Always in lowest terms with positive denominator (maintained by `BigRational`).
    Rational(BigRational),
    Prime { value: u32, modulus: u32 },
}

impl BaseScalar {
    pub fn kind(&self) -> BaseKind {
        match self {
            BaseScalar::Rational(_) => BaseKind::Rational,
            BaseScalar::Prime { modulus, .. } => BaseKind::Prime(*modulus),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseScalar::Rational(r) => r.is_zero(),
            BaseScalar::Prime { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            BaseScalar::Rational(r) => r.is_one(),
            BaseScalar::Prime { value, .. } => *value == 1,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (BaseScalar::Rational(a), BaseScalar::Rational(b)) => BaseScalar::Rational(a + b),
            (BaseScalar::Prime { value: a, modulus: p }, BaseScalar::Prime { value: b, modulus: q })
                if p == q =>
            {
                BaseScalar::Prime {
                    value: ((*a as u64 + *b as u64) % *p as u64) as u32,
                    modulus: *p,
                }
            }
            _ => panic!("mixed base fields: {self:?} + {other:?}"),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            BaseScalar::Rational(a) => BaseScalar::Rational(-a),
            BaseScalar::Prime { value, modulus } => BaseScalar::Prime {
                value: (modulus - value) % modulus,
                modulus: *modulus,
            },
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (BaseScalar::Rational(a), BaseScalar::Rational(b)) => BaseScalar::Rational(a * b),
            (BaseScalar::Prime { value: a, modulus: p }, BaseScalar::Prime { value: b, modulus: q })
                if p == q =>
            {
                BaseScalar::Prime {
                    value: ((*a as u64 * *b as u64) % *p as u64) as u32,
                    modulus: *p,
                }
            }
            _ => panic!("mixed base fields: {self:?} * {other:?}"),
        }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(match self {
            BaseScalar::Rational(a) => BaseScalar::Rational(a.recip()),
            BaseScalar::Prime { value, modulus } => {
                let p = *modulus as u64;
                // Fermat: a^(p-2)
                let mut acc = 1u64;
                let mut base = *value as u64;
                let mut e = p - 2;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = acc * base % p;
                    }
                    base = base * base % p;
                    e >>= 1;
                }
                BaseScalar::Prime { value: acc as u32, modulus: *modulus }
            }
        })
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self.mul(&self.kind().from_i64(k))
    }

    /// Canonical string form: `a/b` or `a` for rationals, the residue in `[0,p)` otherwise.
    pub fn to_canonical_string(&self) -> String {
        match self {
            BaseScalar::Rational(r) => {
                if r.denom().is_one() {
                    r.numer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            BaseScalar::Prime { value, .. } => value.to_string(),
        }
    }

    pub fn parse(kind: BaseKind, s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("not a scalar: {s:?}"));
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        kind.from_bigrational(&BigRational::new(n, d))
    }

    /// Signed small-integer view used in pretty printing of prime-field elements.
    pub fn is_negative_display(&self) -> bool {
        match self {
            BaseScalar::Rational(r) => r.is_negative(),
            BaseScalar::Prime { .. } => false,
        }
    }
}

impl fmt::Display for BaseScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// A finite extension `k' = k[x]/(m(x))` of degree at most six.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct ExtField {
    base: BaseKind,
    /// Monic, coefficients from the constant term up.
    min_poly: Vec<BaseScalar>,
}

impl ExtField {
    /// The trivial extension `k' = k`.
    pub fn trivial(base: BaseKind) -> Arc<Self> {
        Arc::new(ExtField { base, min_poly: vec![base.zero(), base.one()] })
    }

    /// Validates irreducibility by exhaustive factor search.
    pub fn new(base: BaseKind, min_poly: Vec<BaseScalar>) -> Result<Arc<Self>> {
        let poly = Poly::new(base, min_poly.clone());
        let d = poly.degree().ok_or_else(|| Error::Domain("zero minimal polynomial".into()))?;
        if d == 0 || d > MAX_EXT_DEGREE {
            return Err(Error::Domain(format!("extension degree must be 1..={MAX_EXT_DEGREE}, got {d}")));
        }
        if !poly.leading().is_one() {
            return Err(Error::Domain("minimal polynomial must be monic".into()));
        }
        if let Some(factor) = poly.find_factor()? {
            return Err(Error::ReduciblePolynomial(factor.to_string()));
        }
        Ok(Arc::new(ExtField { base, min_poly: poly.coeffs().to_vec() }))
    }

    pub fn from_i64s(base: BaseKind, coeffs: &[i64]) -> Result<Arc<Self>> {
        Self::new(base, coeffs.iter().map(|&c| base.from_i64(c)).collect())
    }

    pub fn base(&self) -> BaseKind {
        self.base
    }

    pub fn characteristic(&self) -> u32 {
        self.base.characteristic()
    }

    pub fn degree(&self) -> usize {
        self.min_poly.len() - 1
    }

    pub fn min_poly(&self) -> &[BaseScalar] {
        &self.min_poly
    }

    /// JSON descriptor `{"char": c, "ext_poly": [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let poly: Vec<serde_json::Value> = self
            .min_poly
            .iter()
            .map(|c| serde_json::Value::String(c.to_canonical_string()))
            .collect();
        serde_json::json!({ "char": self.characteristic(), "ext_poly": poly })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Arc<Self>> {
        let bad = || Error::Domain("field descriptor must be {\"char\": c, \"ext_poly\": [..]}".into());
        let c = v.get("char").and_then(|c| c.as_u64()).ok_or_else(bad)? as u32;
        let base = BaseKind::from_char(c)?;
        let poly = match v.get("ext_poly") {
            None => return Ok(Self::trivial(base)),
            Some(p) => p.as_array().ok_or_else(bad)?,
        };
        let coeffs = poly
            .iter()
            .map(|c| match c {
                serde_json::Value::String(s) => BaseScalar::parse(base, s),
                serde_json::Value::Number(n) => {
                    Ok(base.from_i64(n.as_i64().ok_or_else(bad)?))
                }
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, coeffs)
    }
}

/// An element of `k'` in the power basis `1, x, ..., x^{d-1}`.
#[derive(Clone, Debug)]
pub struct ExtScalar {
    field: Arc<ExtField>,
    coeffs: Vec<BaseScalar>,
}

impl PartialEq for ExtScalar {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Eq for ExtScalar {}

impl ExtScalar {
    pub fn new(field: &Arc<ExtField>, coeffs: Vec<BaseScalar>) -> Result<Self> {
        if coeffs.len() != field.degree() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                field.degree(),
                coeffs.len()
            )));
        }
        Ok(ExtScalar { field: field.clone(), coeffs })
    }

    pub fn zero(field: &Arc<ExtField>) -> Self {
        ExtScalar { field: field.clone(), coeffs: vec![field.base.zero(); field.degree()] }
    }

    pub fn one(field: &Arc<ExtField>) -> Self {
        Self::from_base(field, field.base.one())
    }

    pub fn from_base(field: &Arc<ExtField>, b: BaseScalar) -> Self {
        let mut coeffs = vec![field.base.zero(); field.degree()];
        coeffs[0] = b;
        ExtScalar { field: field.clone(), coeffs }
    }

    pub fn from_i64(field: &Arc<ExtField>, v: i64) -> Self {
        Self::from_base(field, field.base.from_i64(v))
    }

    /// The class of `x^k`.
    pub fn generator_power(field: &Arc<ExtField>, k: usize) -> Self {
        let mut acc = Self::one(field);
        let mut x = Self::zero(field);
        if field.degree() == 1 {
            x.coeffs[0] = field.min_poly[0].neg();
        } else {
            x.coeffs[1] = field.base.one();
        }
        for _ in 0..k {
            acc = acc.mul(&x);
        }
        acc
    }

    pub fn random<R: Rng + ?Sized>(field: &Arc<ExtField>, rng: &mut R) -> Self {
        ExtScalar {
            field: field.clone(),
            coeffs: (0..field.degree()).map(|_| field.base.random(rng)).collect(),
        }
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    pub fn coeffs(&self) -> &[BaseScalar] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(BaseScalar::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(BaseScalar::is_zero)
    }

    /// The base-field value if this element lies in `k`.
    pub fn as_base(&self) -> Option<&BaseScalar> {
        if self.coeffs[1..].iter().all(BaseScalar::is_zero) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        ExtScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        ExtScalar {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        ExtScalar { field: self.field.clone(), coeffs: self.coeffs.iter().map(|a| a.neg()).collect() }
    }

    pub fn scale(&self, b: &BaseScalar) -> Self {
        ExtScalar { field: self.field.clone(), coeffs: self.coeffs.iter().map(|a| a.mul(b)).collect() }
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self.scale(&self.field.base.from_i64(k))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.field.degree();
        if d == 1 {
            return ExtScalar { field: self.field.clone(), coeffs: vec![self.coeffs[0].mul(&other.coeffs[0])] };
        }
        let zero = self.field.base.zero();
        let mut prod = vec![zero; 2 * d - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] = prod[i + j].add(&a.mul(b));
                }
            }
        }
        // reduce modulo the monic minimal polynomial
        for top in (d..prod.len()).rev() {
            let c = prod[top].clone();
            if c.is_zero() {
                continue;
            }
            for k in 0..d {
                let idx = top - d + k;
                prod[idx] = prod[idx].sub(&c.mul(&self.field.min_poly[k]));
            }
        }
        prod.truncate(d);
        ExtScalar { field: self.field.clone(), coeffs: prod }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.field.degree() == 1 {
            return Ok(ExtScalar { field: self.field.clone(), coeffs: vec![self.coeffs[0].inv()?] });
        }
        let a = Poly::new(self.field.base, self.coeffs.clone());
        let m = Poly::new(self.field.base, self.field.min_poly.clone());
        let (g, s, _) = a.ext_gcd(&m);
        // g is a nonzero constant since m is irreducible
        let c = g.coeffs()[0].inv()?;
        let mut coeffs = s.scale(&c).coeffs().to_vec();
        coeffs.resize(self.field.degree(), self.field.base.zero());
        Ok(ExtScalar { field: self.field.clone(), coeffs })
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut acc = Self::one(&self.field);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Matrix of multiplication by `self` in the power basis, column `j` = `self * x^j`.
    pub fn mult_matrix(&self) -> Vec<Vec<BaseScalar>> {
        let d = self.field.degree();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let xj = Self::generator_power(&self.field, j);
            cols.push(self.mul(&xj).coeffs);
        }
        (0..d).map(|i| (0..d).map(|j| cols[j][i].clone()).collect()).collect()
    }

    pub fn to_canonical_string(&self) -> String {
        if self.field.degree() == 1 {
            return self.coeffs[0].to_canonical_string();
        }
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_canonical_string()).collect();
        format!("[{}]", parts.join(","))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_canonical_string())
    }
}

impl fmt::Display for ExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// `tr_{k'/k}(a)`: trace of the multiplication-by-`a` matrix.
pub fn ext_trace(a: &ExtScalar) -> BaseScalar {
    let m = a.mult_matrix();
    let mut acc = a.field.base.zero();
    for (i, row) in m.iter().enumerate() {
        acc = acc.add(&row[i]);
    }
    acc
}

/// `N_{k'/k}(a)`: determinant of the multiplication-by-`a` matrix.
pub fn ext_norm(a: &ExtScalar) -> BaseScalar {
    determinant(a.field.base, a.mult_matrix())
}

/// Determinant over the base field by Gaussian elimination.
pub fn determinant(kind: BaseKind, mut m: Vec<Vec<BaseScalar>>) -> BaseScalar {
    let n = m.len();
    let mut det = kind.one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return kind.zero();
        };
        if piv != col {
            m.swap(piv, col);
            det = det.neg();
        }
        let p = m[col][col].clone();
        det = det.mul(&p);
        let pinv = p.inv().expect("nonzero pivot");
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].mul(&pinv);
            for c in col..n {
                let v = m[col][c].mul(&f);
                m[r][c] = m[r][c].sub(&v);
            }
        }
    }
    det
}

/// Rank of a matrix over the base field.
pub fn rank(kind: BaseKind, mut m: Vec<Vec<BaseScalar>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(piv, r);
        let pinv = m[r][c].inv().expect("nonzero pivot");
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].mul(&pinv);
                for j in c..cols {
                    let v = m[r][j].mul(&f);
                    m[i][j] = m[i][j].sub(&v);
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    let _ = kind;
    r
}

/// Factorial in the base field; `None` when it vanishes (char `p <= n`).
pub fn factorial(kind: BaseKind, n: u32) -> Option<BaseScalar> {
    let mut acc = kind.one();
    for i in 1..=n {
        acc = acc.mul_int(i as i64);
    }
    if acc.is_zero() {
        None
    } else {
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f4() -> Arc<ExtField> {
        ExtField::from_i64s(BaseKind::Prime(2), &[1, 1, 1]).unwrap()
    }

    fn qi() -> Arc<ExtField> {
        ExtField::from_i64s(BaseKind::Rational, &[1, 0, 1]).unwrap()
    }

    fn f9() -> Arc<ExtField> {
        ExtField::from_i64s(BaseKind::Prime(3), &[1, 0, 1]).unwrap()
    }

    #[test]
    fn extension_construction() {
        assert_eq!(f4().degree(), 2);
        assert_eq!(qi().degree(), 2);
        assert_eq!(f9().degree(), 2);
        // x^2 + 1 = (x+1)^2 over F_2
        let err = ExtField::from_i64s(BaseKind::Prime(2), &[1, 0, 1]).unwrap_err();
        assert!(matches!(err, Error::ReduciblePolynomial(_)));
        // x^2 - 2 is irreducible over Q, x^2 - 4 is not
        assert!(ExtField::from_i64s(BaseKind::Rational, &[-2, 0, 1]).is_ok());
        assert!(ExtField::from_i64s(BaseKind::Rational, &[-4, 0, 1]).is_err());
        // x^4 + 1 has no linear factor over Q but is irreducible; (x^2+1)(x^2+2) is not
        assert!(ExtField::from_i64s(BaseKind::Rational, &[1, 0, 0, 0, 1]).is_ok());
        assert!(ExtField::from_i64s(BaseKind::Rational, &[2, 0, 3, 0, 1]).is_err());
        assert!(ExtField::from_i64s(BaseKind::Prime(2), &[1, 1]).is_ok());
        assert!(BaseKind::from_char(4).is_err());
        assert!(BaseKind::from_char(101).is_err());
    }

    #[test]
    fn f4_trace_of_generator_is_one() {
        let f = f4();
        let x = ExtScalar::generator_power(&f, 1);
        assert_eq!(ext_trace(&x), BaseKind::Prime(2).one());
        assert_eq!(ext_trace(&ExtScalar::zero(&f)), BaseKind::Prime(2).zero());
        // x^3 = 1 in F_4
        assert!(x.pow(3).is_one());
    }

    #[test]
    fn gaussian_trace_and_norm() {
        let f = qi();
        let i = ExtScalar::generator_power(&f, 1);
        assert!(ext_trace(&i).is_zero());
        let one_plus_i = i.add(&ExtScalar::one(&f));
        assert_eq!(ext_norm(&one_plus_i), BaseKind::Rational.from_i64(2));
        assert!(ext_norm(&ExtScalar::one(&f)).is_one());
        assert_eq!(i.mul(&i), ExtScalar::from_i64(&f, -1));
    }

    #[test]
    fn f9_norm_of_generator() {
        // det [[0,-1],[1,0]] = 1
        let f = f9();
        let x = ExtScalar::generator_power(&f, 1);
        assert!(ext_norm(&x).is_one());
    }

    #[test]
    fn degree_one_is_identity() {
        let f = ExtField::from_i64s(BaseKind::Prime(5), &[2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = ExtScalar::random(&f, &mut rng);
            assert_eq!(ext_trace(&a), a.coeffs()[0]);
            assert_eq!(ext_norm(&a), a.coeffs()[0]);
        }
    }

    #[test]
    fn trace_additive_norm_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in [f4(), qi(), f9(), ExtField::from_i64s(BaseKind::Prime(5), &[1, 1, 0, 1]).unwrap()] {
            for _ in 0..500 {
                let a = ExtScalar::random(&f, &mut rng);
                let b = ExtScalar::random(&f, &mut rng);
                assert_eq!(ext_trace(&a.add(&b)), ext_trace(&a).add(&ext_trace(&b)));
                assert_eq!(ext_norm(&a.mul(&b)), ext_norm(&a).mul(&ext_norm(&b)));
            }
        }
    }

    #[test]
    fn field_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in [f4(), qi(), f9()] {
            for _ in 0..200 {
                let a = ExtScalar::random(&f, &mut rng);
                let b = ExtScalar::random(&f, &mut rng);
                let c = ExtScalar::random(&f, &mut rng);
                assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
                assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
                assert_eq!(a.mul(&b), b.mul(&a));
                if !a.is_zero() {
                    assert!(a.mul(&a.inv().unwrap()).is_one());
                }
            }
        }
    }

    #[test]
    fn json_descriptor_roundtrip() {
        let f = f4();
        let v = f.to_json();
        assert_eq!(v, serde_json::json!({"char": 2, "ext_poly": ["1", "1", "1"]}));
        let g = ExtField::from_json(&v).unwrap();
        assert_eq!(*g, *f);
    }
}
