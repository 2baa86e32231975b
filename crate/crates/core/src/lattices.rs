//! `O_1`-lattices in `K^r` with `a = t_1`, quotient modules over `k_1`
//! and refinements for band-limited operators.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{precision, Error, Result};
use crate::residue::{project_ge, project_lt};
use crate::scalars::{ExtField, ExtScalar};
use crate::series::Series;
use crate::tlf::{sigma_expand, LiftingSpec};

pub type Matrix = Vec<Vec<Series>>;

/// The `t_1`-order of `x`, `None` for zero within precision.
pub fn t1_order(x: &Series) -> Result<Option<i64>> {
    let Some(l) = x.as_laurent() else {
        return Err(Error::Domain("lattice entries must have positive depth".into()));
    };
    for (i, c) in l.coeffs().iter().enumerate() {
        if !c.is_zero_within_precision() {
            if i > 0 {
                return Err(precision("leading t1-coefficient is indeterminate"));
            }
            return Ok(Some(l.order() + i as i64));
        }
    }
    Ok(None)
}

fn mono(field: &Arc<ExtField>, n: usize, e: i64) -> Series {
    let mut exps = vec![0; n];
    exps[0] = e;
    Series::monomial(field, &exps, ExtScalar::one(field))
}

/// A lattice as a lower-triangular column basis with diagonal `t_1^{h_i}`
/// and entries left of the diagonal reduced below `t_1^{h_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    field: Arc<ExtField>,
    n: usize,
    basis: Matrix,
    divisors: Vec<i64>,
}

impl Lattice {
    /// `t_1^i O_1^r`
    pub fn standard(field: &Arc<ExtField>, n: usize, r: usize, i: i64) -> Self {
        let basis = (0..r)
            .map(|row| (0..r).map(|c| if row == c { mono(field, n, i) } else { Series::zero(field, n) }).collect())
            .collect();
        Lattice { field: field.clone(), n, basis, divisors: vec![i; r] }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    /// Rows of the normalized basis matrix; columns generate.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn column(&self, j: usize) -> Vec<Series> {
        self.basis.iter().map(|row| row[j].clone()).collect()
    }

    /// Elementary divisors in increasing order.
    pub fn divisors(&self) -> &[i64] {
        &self.divisors
    }

    pub fn diagonal_exponents(&self) -> Vec<i64> {
        (0..self.rank()).map(|i| self.basis[i][i].order()).collect()
    }

    /// `t_1^m L`
    pub fn scaled(&self, m: i64) -> Self {
        let s = mono(&self.field, self.n, m);
        Lattice {
            basis: self.basis.iter().map(|row| row.iter().map(|x| x.mul(&s)).collect()).collect(),
            divisors: self.divisors.iter().map(|d| d + m).collect(),
            ..self.clone()
        }
    }

    /// Equality of normal forms up to precision.
    pub fn same_module(&self, o: &Self) -> bool {
        self.divisors == o.divisors
            && self.basis.iter().zip(&o.basis).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.eq_within(y)))
    }

    /// Solves `H x = v` by forward substitution.
    pub fn coordinates(&self, v: &[Series]) -> Result<Vec<Series>> {
        let r = self.rank();
        let mut x: Vec<Series> = Vec::with_capacity(r);
        for i in 0..r {
            let mut acc = v[i].clone();
            for (j, xj) in x.iter().enumerate() {
                if !self.basis[i][j].is_exact_zero() {
                    acc = acc.sub(&self.basis[i][j].mul(xj));
                }
            }
            let h = self.basis[i][i].order();
            x.push(acc.shift(&shift1(self.n, -h)));
        }
        Ok(x)
    }

    /// Whether `v` lies in the lattice, within precision.
    pub fn contains_vector(&self, v: &[Series]) -> Result<bool> {
        for x in self.coordinates(v)? {
            if let Some(o) = t1_order(&x)? {
                if o < 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rank": self.rank(),
            "divisors": self.divisors,
            "basis": self.basis.iter().map(|row| row.iter().map(Series::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

fn shift1(n: usize, e: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[0] = e;
    v
}

/// Normal form of the `O_1`-module generated by the columns of `g` (square, nonsingular).
pub fn lattice_normal_form(g: &Matrix, w: i64) -> Result<Lattice> {
    let r = g.len();
    if r == 0 || g.iter().any(|row| row.len() != r) {
        return Err(Error::Domain("generator matrix must be square and nonempty".into()));
    }
    let field = g[0][0].field().clone();
    let n = g[0][0].depth();
    let divisors = smith_divisors(g, w)?;
    let mut m = g.clone();
    for i in 0..r {
        let mut best: Option<(usize, i64)> = None;
        for j in i..r {
            if let Some(o) = t1_order(&m[i][j])? {
                if best.is_none_or(|(_, b)| o < b) {
                    best = Some((j, o));
                }
            }
        }
        let (j, v) = best.ok_or(Error::SingularMatrix)?;
        for row in m.iter_mut() {
            row.swap(i, j);
        }
        // make the pivot exactly t^v
        let unit = m[i][i].shift(&shift1(n, -v));
        let uinv = unit.inv_with(w)?;
        for row in m.iter_mut().skip(i + 1) {
            row[i] = row[i].mul(&uinv);
        }
        m[i][i] = mono(&field, n, v);
        for j in i + 1..r {
            if m[i][j].is_exact_zero() {
                continue;
            }
            let q = m[i][j].shift(&shift1(n, -v));
            for row in m.iter_mut().skip(i + 1) {
                let d = q.mul(&row[i]);
                row[j] = row[j].sub(&d);
            }
            m[i][j] = Series::zero(&field, n);
        }
    }
    for i in 1..r {
        let v = m[i][i].order();
        for j in 0..i {
            let q = project_ge(&m[i][j], v).shift(&shift1(n, -v));
            if q.is_exact_zero() {
                continue;
            }
            for row in m.iter_mut().skip(i) {
                let d = q.mul(&row[i]);
                row[j] = row[j].sub(&d);
            }
            m[i][j] = project_lt(&m[i][j], v);
        }
    }
    Ok(Lattice { field, n, basis: m, divisors })
}

/// Elementary divisors by pivoting on minimal `t_1`-order with row and column operations.
pub fn smith_divisors(g: &Matrix, w: i64) -> Result<Vec<i64>> {
    let r = g.len();
    let mut m = g.clone();
    let n = m[0][0].depth();
    let mut out = Vec::with_capacity(r);
    for k in 0..r {
        let mut best: Option<(usize, usize, i64)> = None;
        for (i, row) in m.iter().enumerate().skip(k) {
            for (j, x) in row.iter().enumerate().skip(k) {
                if let Some(o) = t1_order(x)? {
                    if best.is_none_or(|(_, _, b)| o < b) {
                        best = Some((i, j, o));
                    }
                }
            }
        }
        let (pi, pj, v) = best.ok_or(Error::SingularMatrix)?;
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        let pinv = m[k][k].inv_with(w)?;
        for i in k + 1..r {
            if m[i][k].is_exact_zero() {
                continue;
            }
            let q = m[i][k].mul(&pinv);
            for j in k..r {
                let d = q.mul(&m[k][j]);
                m[i][j] = m[i][j].sub(&d);
            }
        }
        for j in k + 1..r {
            m[k][j] = Series::zero(m[k][k].field(), n);
        }
        out.push(v);
    }
    Ok(out)
}

/// `L' ⊆ L`
pub fn contains(l: &Lattice, sub: &Lattice) -> Result<bool> {
    if l.rank() != sub.rank() {
        return Err(Error::Domain("lattices of different rank".into()));
    }
    for j in 0..sub.rank() {
        if !l.contains_vector(&sub.column(j))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `L / L'` as a `k_1`-space through a lifting `σ_1`.
#[derive(Clone, Debug)]
pub struct QuotientModule {
    pub outer: Lattice,
    pub inner: Lattice,
    /// Normal form of `L^{-1} L'` inside `O_1^r`.
    relative: Lattice,
    /// `(i, m)` labels: the representative `t_1^m` times column `i` of `L`.
    pub labels: Vec<(usize, i64)>,
    pub sigma: LiftingSpec,
}

impl QuotientModule {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// The representative vector for basis element `a`.
    pub fn representative(&self, a: usize) -> Vec<Series> {
        let (i, m) = self.labels[a];
        let s = mono(self.outer.field(), self.outer.depth(), m);
        self.outer.column(i).iter().map(|x| x.mul(&s)).collect()
    }

    /// `σ_1(b)` times representative `a`.
    pub fn lift(&self, a: usize, b: &Series) -> Result<Vec<Series>> {
        let sb = self.sigma.apply(1, b)?;
        Ok(self.representative(a).iter().map(|x| x.mul(&sb)).collect())
    }

    /// `k_1`-coordinates of `v ∈ L` modulo `L'`.
    pub fn coordinates(&self, v: &[Series]) -> Result<Vec<Series>> {
        let n = self.outer.depth();
        let f = self.outer.field().clone();
        let mut y = self.outer.coordinates(v)?;
        for x in &y {
            if t1_order(x)?.is_some_and(|o| o < 0) {
                return Err(Error::NotContained);
            }
        }
        let mut out = Vec::with_capacity(self.dim());
        let r = y.len();
        for i in 0..r {
            let e = self.relative.basis[i][i].order();
            let parts = if e > 0 { sigma_expand(&y[i].truncate(e), &self.sigma, 1, &mono(&f, n, 1))? } else { vec![] };
            let part_of = |m: i64| {
                parts.iter().find(|(_, q)| *q == m).map(|(b, _)| b.clone()).unwrap_or_else(|| Series::zero(&f, n - 1))
            };
            for m in 0..e {
                out.push(part_of(m));
            }
            let low = crate::tlf::reassemble(&parts, &self.sigma, 1, &mono(&f, n, 1))?;
            let rest = y[i].sub(&low);
            let q = rest.shift(&shift1(n, -e));
            for (row, yr) in y.iter_mut().enumerate().skip(i) {
                let rel = &self.relative.basis[row][i];
                if !rel.is_exact_zero() {
                    *yr = yr.sub(&q.mul(rel));
                }
            }
        }
        Ok(out)
    }
}

pub fn quotient_module(l: &Lattice, sub: &Lattice, sigma: &LiftingSpec, w: i64) -> Result<QuotientModule> {
    if !contains(l, sub)? {
        return Err(Error::NotContained);
    }
    let r = l.rank();
    let cols: Vec<Vec<Series>> = (0..r).map(|j| l.coordinates(&sub.column(j))).collect::<Result<_>>()?;
    let rel: Matrix = (0..r).map(|i| (0..r).map(|j| cols[j][i].clone()).collect()).collect();
    let relative = lattice_normal_form(&rel, w)?;
    let mut labels = Vec::new();
    for i in 0..r {
        for m in 0..relative.basis[i][i].order() {
            labels.push((i, m));
        }
    }
    Ok(QuotientModule { outer: l.clone(), inner: sub.clone(), relative, labels, sigma: sigma.clone() })
}

/// `(L_1', L_2')` with `L_1' ⊆ L_1`, `L_2 ⊆ L_2'`, `φ(L_1') ⊆ L_2`, `φ(L_1) ⊆ L_2'`.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub l1: Lattice,
    pub l2: Lattice,
    pub l1p: Lattice,
    pub l2p: Lattice,
    pub m: i64,
}

/// Refinement from a band bound `v(φx) >= v(x) - d`; without a bound none is attempted.
pub fn find_refinement(band: Option<i64>, l1: &Lattice, l2: &Lattice) -> Result<Refinement> {
    let d = band.ok_or_else(|| Error::NoCertificate("operator carries no band bound".into()))?;
    let lo = *l1.divisors().first().expect("positive rank");
    let hi = *l2.divisors().last().expect("positive rank");
    let m = (d + hi - lo).max(0);
    Ok(Refinement { l1: l1.clone(), l2: l2.clone(), l1p: l1.scaled(m), l2p: l2.scaled(-m), m })
}

impl Refinement {
    /// Checks the four inclusions, the operator ones on generators times probe multipliers.
    pub fn verify(&self, phi: &dyn Fn(&Series) -> Result<Series>, probes: &[Series]) -> Result<bool> {
        if !contains(&self.l1, &self.l1p)? || !contains(&self.l2p, &self.l2)? {
            return Ok(false);
        }
        let n = self.l1.depth();
        let f = self.l1.field().clone();
        for (src, dst) in [(&self.l1p, &self.l2), (&self.l1, &self.l2p)] {
            for j in 0..src.rank() {
                let col = src.column(j);
                for p in probes {
                    for s in 0..3 {
                        let mult = p.mul(&mono(&f, n, s));
                        let img: Vec<Series> =
                            col.iter().map(|x| phi(&x.mul(&mult))).collect::<Result<_>>()?;
                        if !dst.contains_vector(&img)? {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m,
            "l1": self.l1.divisors(), "l2": self.l2.divisors(),
            "l1_refined": self.l1p.divisors(), "l2_refined": self.l2p.divisors(),
        })
    }
}

/// Coordinates in `L_2'/L_2` of `φ(σ_1(b) e_a)` for `e_a` in `L_1/L_1'`.
pub fn induced_action(
    phi: &dyn Fn(&Series) -> Result<Series>,
    src: &QuotientModule,
    dst: &QuotientModule,
    a: usize,
    b: &Series,
) -> Result<Vec<Series>> {
    let v = src.lift(a, b)?;
    let img: Vec<Series> = v.iter().map(phi).collect::<Result<_>>()?;
    dst.coordinates(&img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::BaseKind;

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    fn t(f: &Arc<ExtField>, e: i64) -> Series {
        mono(f, 1, e)
    }

    #[test]
    fn normal_forms() {
        let f = q();
        let id = vec![vec![t(&f, 0), Series::zero(&f, 1)], vec![Series::zero(&f, 1), t(&f, 0)]];
        let l = lattice_normal_form(&id, 8).unwrap();
        assert_eq!(l.divisors(), &[0, 0]);
        assert_eq!(l, Lattice::standard(&f, 1, 2, 0));
        let d = vec![vec![t(&f, 1), Series::zero(&f, 1)], vec![Series::zero(&f, 1), t(&f, -1)]];
        assert_eq!(lattice_normal_form(&d, 8).unwrap().divisors(), &[-1, 1]);
        let g = vec![vec![t(&f, 0), t(&f, 1)], vec![Series::zero(&f, 1), t(&f, 2)]];
        assert_eq!(lattice_normal_form(&g, 8).unwrap().divisors(), &[0, 2]);
    }

    #[test]
    fn column_mixing_is_invisible() {
        let f = q();
        let one = Series::one(&f, 1);
        let g = vec![vec![t(&f, 1).add(&t(&f, 2)), t(&f, -1)], vec![one.add(&t(&f, 1)), t(&f, 3)]];
        // right-multiply by [[1, 1+t], [t, 1+t+t^2]] (determinant a unit)
        let v = [[one.clone(), one.add(&t(&f, 1))], [t(&f, 1), one.add(&t(&f, 1)).add(&t(&f, 2))]];
        let gv: Matrix =
            (0..2).map(|i| (0..2).map(|j| g[i][0].mul(&v[0][j]).add(&g[i][1].mul(&v[1][j]))).collect()).collect();
        let a = lattice_normal_form(&g, 10).unwrap();
        let b = lattice_normal_form(&gv, 10).unwrap();
        assert!(a.same_module(&b), "{:?}\n{:?}", a.basis(), b.basis());
    }

    #[test]
    fn containment_and_quotients() {
        let f = q();
        let l0 = Lattice::standard(&f, 1, 1, 0);
        let l2 = Lattice::standard(&f, 1, 1, 2);
        assert!(contains(&l0, &l2).unwrap());
        assert!(!contains(&l2, &l0).unwrap());
        let qm = quotient_module(&l0, &l2, &LiftingSpec::Standard, 8).unwrap();
        assert_eq!(qm.dim(), 2);
        assert_eq!(quotient_module(&l0, &l0, &LiftingSpec::Standard, 8).unwrap().dim(), 0);
        let r2 = quotient_module(&Lattice::standard(&f, 1, 2, 0), &Lattice::standard(&f, 1, 2, 3), &LiftingSpec::Standard, 8);
        assert_eq!(r2.unwrap().dim(), 6);
        assert!(matches!(quotient_module(&l2, &l0, &LiftingSpec::Standard, 8), Err(Error::NotContained)));
    }

    #[test]
    fn quotient_coordinates_roundtrip() {
        let f = q();
        let l0 = Lattice::standard(&f, 2, 1, 0);
        let l3 = Lattice::standard(&f, 2, 1, 3);
        let qm = quotient_module(&l0, &l3, &LiftingSpec::Standard, 8).unwrap();
        let t1 = Series::gen(&f, 2, 1);
        let t2 = Series::gen(&f, 2, 2);
        let v = t2.add(&t1.mul(&t2.pow(-1).unwrap())).add(&t1.pow(5).unwrap());
        let c = qm.coordinates(&[v]).unwrap();
        let k1t = Series::gen(&f, 1, 1);
        assert_eq!(c, vec![k1t.clone(), k1t.pow(-1).unwrap(), Series::zero(&f, 1)]);
    }

    #[test]
    fn refinements() {
        let f = q();
        let l0 = Lattice::standard(&f, 1, 1, 0);
        let r = find_refinement(Some(2), &l0, &l0).unwrap();
        assert_eq!((r.l1p.divisors()[0], r.l2p.divisors()[0]), (2, -2));
        let tinv2 = t(&f, -2);
        let probes = vec![Series::one(&f, 1)];
        assert!(r.verify(&|x: &Series| Ok(x.mul(&tinv2)), &probes).unwrap());
        let r = find_refinement(Some(1), &l0, &l0).unwrap();
        assert!(r.verify(&|x: &Series| Ok(x.derivative(1)), &probes).unwrap());
        let r = find_refinement(Some(0), &l0, &l0).unwrap();
        assert_eq!(r.m, 0);
        assert!(matches!(find_refinement(None, &l0, &l0), Err(Error::NoCertificate(_))));
    }
}
