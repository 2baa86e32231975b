//! The residue `Res: Ω^{n,sep} -> k`, traces of forms along finite
//! extensions, Tate's commutator residue at `n = 1`, and the
//! topology-dependence example.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::forms::{
    dlog_element, identity_map, pullback_automorphism, separate, AbstractForm, Expr, FormContext, SeparatedForm,
};
use crate::scalars::{ext_trace, BaseScalar, ExtField, ExtScalar};
use crate::series::Series;
use crate::tlf::TlfDescriptor;

/// A residue together with the `t_1`-window of the coefficient it was read from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueValue {
    pub value: BaseScalar,
    /// `None` when the coefficient was exact.
    pub window_used: Option<i64>,
}

impl ResidueValue {
    pub fn to_json(&self) -> Value {
        json!({ "value": self.value.to_canonical_string(), "window_used": self.window_used })
    }
}

/// `tr_{k'/k}` of the `t_1^{-1} ... t_n^{-1}` coefficient of a top form.
pub fn res_tlf(w: &SeparatedForm) -> Result<BaseScalar> {
    Ok(res_tlf_detailed(w)?.value)
}

pub fn res_tlf_detailed(w: &SeparatedForm) -> Result<ResidueValue> {
    let n = w.n();
    if w.deg() != n {
        return Err(Error::Domain(format!("residue needs a degree-{n} form, got degree {}", w.deg())));
    }
    let full: Vec<usize> = (1..=n).collect();
    let g = w.coeff(&full);
    let c = g.coefficient_at(&vec![-1; n])?;
    Ok(ResidueValue { value: ext_trace(&c), window_used: g.window() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtensionKind {
    /// `L = k''((t_1, ..., t_n))` with `k''` given over the base field.
    Unramified(Arc<ExtField>),
    /// `L = K(s)`, `s^e = t_1`; elements of `L` are series in `(s, t_2, ..., t_n)`.
    Kummer(u32),
}

#[derive(Clone, Debug)]
pub struct ExtensionSpec {
    pub kind: ExtensionKind,
    pub base: TlfDescriptor,
}

impl ExtensionSpec {
    pub fn unramified(base: TlfDescriptor, upper: Arc<ExtField>) -> Result<Self> {
        if base.field.degree() != 1 || upper.base() != base.field.base() {
            return Err(Error::UnsupportedExtension(
                "unramified extensions are taken over the prime or rational base field".into(),
            ));
        }
        Ok(ExtensionSpec { kind: ExtensionKind::Unramified(upper), base })
    }

    pub fn kummer(base: TlfDescriptor, e: u32) -> Result<Self> {
        let p = base.characteristic();
        if e == 0 || base.n == 0 {
            return Err(Error::UnsupportedExtension("Kummer extensions need e >= 1 and n >= 1".into()));
        }
        if p != 0 && e.is_multiple_of(p) {
            return Err(Error::WildRamification { e, p });
        }
        Ok(ExtensionSpec { kind: ExtensionKind::Kummer(e), base })
    }

    /// The descriptor of `L`.
    pub fn upper(&self) -> TlfDescriptor {
        match &self.kind {
            ExtensionKind::Unramified(f) => TlfDescriptor { n: self.base.n, field: f.clone(), window: self.base.window },
            ExtensionKind::Kummer(_) => self.base.clone(),
        }
    }

    pub fn degree(&self) -> usize {
        match &self.kind {
            ExtensionKind::Unramified(f) => f.degree(),
            ExtensionKind::Kummer(e) => *e as usize,
        }
    }

    /// Matrix over `K` of multiplication by `g` in the basis `1, x, ...` resp. `1, s, ...`.
    pub fn mult_matrix(&self, g: &Series) -> Vec<Vec<Series>> {
        let kf = &self.base.field;
        let n = self.base.n;
        match &self.kind {
            ExtensionKind::Unramified(f) => {
                let d = f.degree();
                let parts: Vec<Series> =
                    (0..d).map(|j| g.map_into(kf, &|c| ExtScalar::from_base(kf, c.coeffs()[j].clone()))).collect();
                let mut m = vec![vec![Series::zero(kf, n); d]; d];
                for (j, gj) in parts.iter().enumerate() {
                    if gj.is_exact_zero() {
                        continue;
                    }
                    let cj = ExtScalar::generator_power(f, j).mult_matrix();
                    for r in 0..d {
                        for c in 0..d {
                            if !cj[r][c].is_zero() {
                                m[r][c] = m[r][c].add(&gj.scale(&ExtScalar::from_base(kf, cj[r][c].clone())));
                            }
                        }
                    }
                }
                m
            }
            ExtensionKind::Kummer(e) => {
                let e = *e as i64;
                (0..e)
                    .map(|r| (0..e).map(|c| kummer_component(&g.shift(&shift_s(n, c)), r, e)).collect())
                    .collect()
            }
        }
    }

    pub fn trace_element(&self, g: &Series) -> Series {
        let m = self.mult_matrix(g);
        let mut acc = Series::zero(&self.base.field, self.base.n);
        for (i, row) in m.iter().enumerate() {
            acc = acc.add(&row[i]);
        }
        acc
    }

    pub fn norm_element(&self, g: &Series) -> Series {
        laplace_det(&self.mult_matrix(g))
    }
}

fn shift_s(n: usize, c: i64) -> Vec<i64> {
    let mut e = vec![0; n];
    e[0] = c;
    e
}

/// `h_r(t)` in `h = sum_r s^r h_r(s^e)`.
fn kummer_component(h: &Series, r: i64, e: i64) -> Series {
    let Some(l) = h.as_laurent() else { return h.clone() };
    let field = h.field();
    let depth = h.depth();
    let lo = (l.order() - r).div_euclid(e) + i64::from((l.order() - r).rem_euclid(e) != 0);
    let hi = l.order() + l.coeffs().len() as i64;
    let mut coeffs = Vec::new();
    let mut k = lo;
    while e * k + r < hi {
        coeffs.push(h.coeff_series(e * k + r).unwrap_or_else(|_| Series::zero(field, depth - 1)));
        k += 1;
    }
    let prec = l.prec().map(|p| (p - r).div_euclid(e) + i64::from((p - r).rem_euclid(e) != 0));
    Series::build(field, depth, lo, prec, coeffs)
}

fn laplace_det(m: &[Vec<Series>]) -> Series {
    let d = m.len();
    if d == 1 {
        return m[0][0].clone();
    }
    let mut acc = Series::zero(m[0][0].field(), m[0][0].depth());
    for c in 0..d {
        if m[0][c].is_exact_zero() {
            continue;
        }
        let minor: Vec<Vec<Series>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect())
            .collect();
        let term = m[0][c].mul(&laplace_det(&minor));
        acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// `Tr_{L/K}` on forms, coefficientwise on `dt_I` after rewriting `ds = s^{1-e}/e dt_1`.
pub fn trace_forms(w: &SeparatedForm, spec: &ExtensionSpec) -> Result<SeparatedForm> {
    let k = &spec.base;
    if w.n() != k.n {
        return Err(Error::Domain("form and extension live in different dimensions".into()));
    }
    let mut out = SeparatedForm::zero(&k.field, k.n, w.deg());
    for (i, g) in w.coeffs() {
        let g = match &spec.kind {
            ExtensionKind::Kummer(e) if i.first() == Some(&1) => {
                let inv_e = ExtScalar::from_i64(&k.field, *e as i64).inv()?;
                g.shift(&shift_s(k.n, 1 - *e as i64)).scale(&inv_e)
            }
            _ => g.clone(),
        };
        out.set_coeff(i, spec.trace_element(&g));
    }
    Ok(out)
}

/// `Tr(dlog u)` and `dlog n(u)` for a unit `u` of `L`.
pub fn trace_dlog_pair(u: &Series, spec: &ExtensionSpec) -> Result<(SeparatedForm, SeparatedForm)> {
    let w = spec.base.window;
    let lhs = trace_forms(&dlog_element(u, w)?, spec)?;
    let rhs = dlog_element(&spec.norm_element(u), w)?;
    Ok((lhs, rhs))
}

/// Trace of `[π_c ∘ f, g]` on `k'((t))`, `π_c` projecting onto `t^c O` along `t^{<c}`.
pub fn tate_residue_dim1_at(f: &Series, g: &Series, c: i64) -> Result<BaseScalar> {
    if f.depth() != 1 || g.depth() != 1 {
        return Err(Error::Domain("Tate's residue is one-dimensional".into()));
    }
    let field = f.field();
    let base = field.base();
    if f.is_exact_zero() || g.is_exact_zero() {
        return Ok(base.zero());
    }
    let (of, og) = (f.order(), g.order());
    let fg = f.mul(g);
    let mut acc = ExtScalar::zero(field);
    for m in c + og.min(0)..c + (-of).max(0) {
        let x = Series::monomial(field, &[m], ExtScalar::one(field));
        let lhs = project_ge(&fg.mul(&x), c);
        let rhs = g.mul(&project_ge(&f.mul(&x), c));
        let diag = lhs.sub(&rhs).coefficient_at(&[m])?;
        acc = acc.add(&diag);
    }
    Ok(ext_trace(&acc))
}

pub fn tate_residue_dim1(f: &Series, g: &Series) -> Result<BaseScalar> {
    tate_residue_dim1_at(f, g, 0)
}

/// Keeps the `t_1`-exponents `>= c`.
pub fn project_ge(x: &Series, c: i64) -> Series {
    let Some(l) = x.as_laurent() else { return x.clone() };
    let skip = (c - l.order()).max(0) as usize;
    let coeffs: Vec<Series> = l.coeffs().iter().skip(skip).cloned().collect();
    Series::build(x.field(), x.depth(), l.order().max(c), l.prec(), coeffs)
}

/// Keeps the `t_1`-exponents `< c`.
pub fn project_lt(x: &Series, c: i64) -> Series {
    let Some(l) = x.as_laurent() else { return x.clone() };
    let keep = (c - l.order()).max(0) as usize;
    let coeffs: Vec<Series> = l.coeffs().iter().take(keep).cloned().collect();
    let prec = match l.prec() {
        Some(p) if p < c => Some(p),
        _ => None,
    };
    Series::build(x.field(), x.depth(), l.order(), prec, coeffs)
}

/// `Res ∘ τ`.
pub fn res_st(w: &AbstractForm, ctx: &FormContext) -> Result<BaseScalar> {
    res_tlf(&separate(w, ctx)?)
}

/// `Res ∘ τ ∘ f^*` for an automorphism given on generators and symbols.
pub fn res_nt(w: &AbstractForm, ctx: &FormContext, map: &BTreeMap<String, Expr>) -> Result<BaseScalar> {
    res_st(&pullback_automorphism(w, map)?, ctx)
}

/// The data of the two-dimensional example over `Q`.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub ctx: FormContext,
    /// `t1^-1 db ∧ t2^-1 dt2`
    pub alpha: AbstractForm,
    /// `dlog(t1, t2)`
    pub gamma: AbstractForm,
    /// `t1 -> t1, t2 -> t2, b -> b + t1`
    pub automorphism: BTreeMap<String, Expr>,
}

/// `sum_{1 <= j <= w} t2^j + O(t2^{w+1})`
pub fn default_b(field: &Arc<ExtField>, w: i64) -> Series {
    let inner = Series::build(field, 1, 1, Some(w + 1), (1..=w).map(|_| Series::from_i64(field, 0, 1)).collect());
    Series::build(field, 2, 0, None, vec![inner])
}

pub fn counterexample_setup(b: Option<Series>) -> Counterexample {
    let field = ExtField::trivial(crate::scalars::BaseKind::Rational);
    let k = TlfDescriptor::new(2, field.clone());
    let b = b.unwrap_or_else(|| default_b(&field, k.window));
    let ctx = FormContext::new(k).bind("b", b);
    let (t1, t2, sb) = (Expr::gen(1), Expr::gen(2), Expr::sym("b"));
    let alpha = AbstractForm::function(t1.pow(-1))
        .wedge(&AbstractForm::d(sb.clone(), &field))
        .wedge(&AbstractForm::function(t2.pow(-1)))
        .wedge(&AbstractForm::d(t2.clone(), &field));
    let gamma = AbstractForm::dlog(&[t1.clone(), t2], &field);
    let mut automorphism = identity_map(2, &["b".to_string()].into_iter().collect());
    automorphism.insert("b".into(), sb.add(&t1));
    Counterexample { ctx, alpha, gamma, automorphism }
}

/// `(res_st(α), res_nt(α))`, expected `(0, 1)`.
pub fn counterexample_char0(b: Option<Series>) -> Result<(BaseScalar, BaseScalar)> {
    let cx = counterexample_setup(b);
    Ok((res_st(&cx.alpha, &cx.ctx)?, res_nt(&cx.alpha, &cx.ctx, &cx.automorphism)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::dlog;
    use crate::scalars::BaseKind;

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    #[test]
    fn dlog_residue_is_one() {
        for n in 1..=3 {
            let f = q();
            let t: Vec<Series> = (1..=n).map(|i| Series::gen(&f, n, i)).collect();
            assert!(res_tlf(&dlog(&t, 8).unwrap()).unwrap().is_one());
        }
    }

    #[test]
    fn laurent_polynomial_residue() {
        let f = q();
        let t = Series::gen(&f, 1, 1);
        let g = t.add(&Series::from_i64(&f, 1, 2)).add(&t.inv().unwrap());
        assert!(res_tlf(&SeparatedForm::top(g)).unwrap().is_one());
    }

    #[test]
    fn tate_examples() {
        let f = q();
        let t = Series::gen(&f, 1, 1);
        assert!(tate_residue_dim1(&t.inv().unwrap(), &t).unwrap().is_one());
        assert!(tate_residue_dim1(&Series::one(&f, 1), &t.pow(3).unwrap()).unwrap().is_zero());
        let two = tate_residue_dim1(&t.pow(-2).unwrap(), &t.pow(2).unwrap()).unwrap();
        assert_eq!(two, BaseKind::Rational.from_i64(2));
        let shifted = tate_residue_dim1_at(&t.pow(-2).unwrap(), &t.pow(2).unwrap(), 3).unwrap();
        assert_eq!(shifted, two);
    }

    #[test]
    fn counterexample_values() {
        let (st, nt) = counterexample_char0(None).unwrap();
        assert!(st.is_zero());
        assert!(nt.is_one());
        let f = q();
        let (st, nt) = counterexample_char0(Some(Series::from_i64(&f, 2, 5))).unwrap();
        assert!(st.is_zero() && nt.is_one());
        let cx = counterexample_setup(None);
        assert!(res_st(&cx.gamma, &cx.ctx).unwrap().is_one());
        assert!(res_nt(&cx.gamma, &cx.ctx, &cx.automorphism).unwrap().is_one());
    }

    #[test]
    fn kummer_traces() {
        let f = ExtField::trivial(BaseKind::from_char(5).unwrap());
        let k = TlfDescriptor::new(1, f.clone());
        let spec = ExtensionSpec::kummer(k, 2).unwrap();
        let s = Series::gen(&f, 1, 1);
        assert_eq!(spec.norm_element(&s), s.neg());
        let (lhs, rhs) = trace_dlog_pair(&s, &spec).unwrap();
        assert!(lhs.eq_within(&rhs));
        let ds = SeparatedForm::monomial(Series::one(&f, 1), &[1]);
        assert!(trace_forms(&ds, &spec).unwrap().is_zero_within_precision());
        assert!(matches!(
            ExtensionSpec::kummer(TlfDescriptor::new(1, f), 5),
            Err(Error::WildRamification { e: 5, p: 5 })
        ));
    }

    #[test]
    fn unramified_trace_of_generator() {
        let base = BaseKind::from_char(2).unwrap();
        let f4 = ExtField::from_i64s(base, &[1, 1, 1]).unwrap();
        let spec = ExtensionSpec::unramified(TlfDescriptor::new(1, ExtField::trivial(base)), f4.clone()).unwrap();
        let x = Series::constant(&f4, 1, ExtScalar::generator_power(&f4, 1));
        let w = SeparatedForm::monomial(x, &[1]);
        let tr = trace_forms(&w, &spec).unwrap();
        assert!(tr.coeff(&[1]).as_scalar().unwrap().is_one());
    }
}
