//! Differential forms: expressions over generators and bound symbols,
//! abstract Kähler forms `g dh_1 ∧ ... ∧ dh_q`, and separated forms on the
//! wedge basis `dt_I`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scalars::{ExtField, ExtScalar};
use crate::series::{substitute, Series};
use crate::tlf::TlfDescriptor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Const(ExtScalar),
    /// `t_i`, 1-based.
    Gen(usize),
    Sym(String),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Neg(Expr),
    Inv(Expr),
    Pow(Expr, i64),
    /// `O(t_i^k)`: unknown terms from `t_i^k` on, lower levels at exponent 0.
    BigO(usize, i64),
}

/// A shared expression node; cloning is cheap and subterms may be reused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn konst(c: ExtScalar) -> Self {
        Expr::new(Node::Const(c))
    }

    pub fn int(field: &Arc<ExtField>, v: i64) -> Self {
        Expr::konst(ExtScalar::from_i64(field, v))
    }

    pub fn gen(i: usize) -> Self {
        Expr::new(Node::Gen(i))
    }

    pub fn sym(name: &str) -> Self {
        Expr::new(Node::Sym(name.to_string()))
    }

    pub fn add(&self, o: &Expr) -> Self {
        Expr::new(Node::Add(self.clone(), o.clone()))
    }

    pub fn sub(&self, o: &Expr) -> Self {
        Expr::new(Node::Sub(self.clone(), o.clone()))
    }

    pub fn mul(&self, o: &Expr) -> Self {
        Expr::new(Node::Mul(self.clone(), o.clone()))
    }

    pub fn neg(&self) -> Self {
        Expr::new(Node::Neg(self.clone()))
    }

    pub fn inv(&self) -> Self {
        Expr::new(Node::Inv(self.clone()))
    }

    pub fn pow(&self, k: i64) -> Self {
        Expr::new(Node::Pow(self.clone(), k))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(c) if c.is_one())
    }

    /// Product that drops a unit factor.
    pub fn times(&self, o: &Expr) -> Self {
        if self.is_one() {
            o.clone()
        } else if o.is_one() {
            self.clone()
        } else {
            self.mul(o)
        }
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            if let Node::Sym(s) = n {
                out.insert(s.clone());
            }
        });
        out
    }

    pub fn generators(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            if let Node::Gen(i) = n {
                out.insert(*i);
            }
        });
        out
    }

    fn walk(&self, f: &mut dyn FnMut(&Node)) {
        f(self.node());
        match self.node() {
            Node::Const(_) | Node::Gen(_) | Node::Sym(_) | Node::BigO(..) => {}
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Node::Neg(a) | Node::Inv(a) | Node::Pow(a, _) => a.walk(f),
        }
    }

    /// Replaces generators (keys `t1`, `t2`, ...) and symbols by the mapped expressions.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Result<Expr> {
        Ok(match self.node() {
            Node::Const(_) | Node::BigO(..) => self.clone(),
            Node::Gen(i) => map.get(&format!("t{i}")).cloned().ok_or_else(|| Error::UnmappedSymbol(format!("t{i}")))?,
            Node::Sym(s) => map.get(s).cloned().ok_or_else(|| Error::UnmappedSymbol(s.clone()))?,
            Node::Add(a, b) => a.substitute(map)?.add(&b.substitute(map)?),
            Node::Sub(a, b) => a.substitute(map)?.sub(&b.substitute(map)?),
            Node::Mul(a, b) => a.substitute(map)?.mul(&b.substitute(map)?),
            Node::Neg(a) => a.substitute(map)?.neg(),
            Node::Inv(a) => a.substitute(map)?.inv(),
            Node::Pow(a, k) => a.substitute(map)?.pow(*k),
        })
    }

    fn prec(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            f.write_str("(")?;
        }
        match self.node() {
            Node::Const(c) => f.write_str(&const_literal(c))?,
            Node::Gen(i) => write!(f, "t{i}")?,
            Node::Sym(s) => f.write_str(s)?,
            Node::BigO(i, k) => write!(f, "O(t{i}^{k})")?,
            Node::Add(a, b) => {
                a.write(f, 1)?;
                f.write_str(" + ")?;
                b.write(f, 2)?;
            }
            Node::Sub(a, b) => {
                a.write(f, 1)?;
                f.write_str(" - ")?;
                b.write(f, 2)?;
            }
            Node::Mul(a, b) => {
                a.write(f, 2)?;
                if let Node::Inv(d) = b.node() {
                    f.write_str("/")?;
                    d.write(f, 4)?;
                } else {
                    f.write_str("*")?;
                    b.write(f, 3)?;
                }
            }
            Node::Neg(a) => {
                f.write_str("-")?;
                a.write(f, 4)?;
            }
            Node::Inv(a) => {
                f.write_str("inv(")?;
                a.write(f, 0)?;
                f.write_str(")")?;
            }
            Node::Pow(a, k) => {
                a.write(f, 5)?;
                write!(f, "^{k}")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn big_o(f: &Arc<ExtField>, depth: usize, level: usize, k: i64) -> Series {
    if level == 1 {
        Series::inexact_zero(f, depth, k)
    } else {
        Series::build(f, depth, 0, None, vec![big_o(f, depth - 1, level - 1, k)])
    }
}

/// Nonnegative integers print bare; everything else as `[c0,c1,...]`.
pub fn const_literal(c: &ExtScalar) -> String {
    if let Some(b) = c.as_base() {
        let s = b.to_canonical_string();
        if s.chars().all(|ch| ch.is_ascii_digit()) {
            return s;
        }
    }
    let parts: Vec<String> = c.coeffs().iter().map(|x| x.to_canonical_string()).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// A bound symbol: its value and its partial derivatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub value: Series,
    pub partials: Vec<Series>,
}

impl Binding {
    pub fn new(value: Series) -> Self {
        let partials = (1..=value.depth()).map(|i| value.derivative(i)).collect();
        Binding { value, partials }
    }

    /// Declared partials must agree with the derivatives of the value.
    pub fn with_partials(value: Series, partials: Vec<Series>) -> Result<Self> {
        if partials.len() != value.depth() {
            return Err(Error::Domain("one partial per generator is required".into()));
        }
        for (i, p) in partials.iter().enumerate() {
            if !value.derivative(i + 1).eq_within(p) {
                return Err(Error::Domain(format!("declared partial along t{} disagrees with the value", i + 1)));
            }
        }
        Ok(Binding { value, partials })
    }
}

/// Ambient field plus symbol bindings for evaluating expressions.
#[derive(Clone, Debug)]
pub struct FormContext {
    pub k: TlfDescriptor,
    pub bindings: BTreeMap<String, Binding>,
}

type Grad = (Series, Vec<Series>);

impl FormContext {
    pub fn new(k: TlfDescriptor) -> Self {
        FormContext { k, bindings: BTreeMap::new() }
    }

    pub fn bind(mut self, name: &str, value: Series) -> Self {
        self.bindings.insert(name.to_string(), Binding::new(value));
        self
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.k.field
    }

    pub fn eval(&self, e: &Expr) -> Result<Series> {
        Ok(self.eval_grad(e)?.0)
    }

    /// Value and gradient by forward-mode differentiation; shared subterms are evaluated once.
    pub fn eval_grad(&self, e: &Expr) -> Result<Grad> {
        let mut memo = HashMap::new();
        self.grad_rec(e, &mut memo)
    }

    fn grad_rec(&self, e: &Expr, memo: &mut HashMap<*const Node, Grad>) -> Result<Grad> {
        let key = Arc::as_ptr(&e.0);
        if let Some(g) = memo.get(&key) {
            return Ok(g.clone());
        }
        let n = self.k.n;
        let f = &self.k.field;
        let w = self.k.window;
        let zero = || Series::zero(f, n);
        let out: Grad = match e.node() {
            Node::Const(c) => (Series::constant(f, n, c.clone()), vec![zero(); n]),
            Node::Gen(i) => {
                if *i == 0 || *i > n {
                    return Err(Error::Domain(format!("generator t{i} outside 1..{n}")));
                }
                let mut g = vec![zero(); n];
                g[i - 1] = Series::one(f, n);
                (Series::gen(f, n, *i), g)
            }
            Node::Sym(s) => {
                let b = self.bindings.get(s).ok_or_else(|| Error::UnmappedSymbol(s.clone()))?;
                (b.value.clone(), b.partials.clone())
            }
            Node::BigO(i, k) => {
                if *i == 0 || *i > n {
                    return Err(Error::Domain(format!("generator t{i} outside 1..{n}")));
                }
                let v = big_o(f, n, *i, *k);
                let g = (1..=n).map(|a| v.derivative(a)).collect();
                (v, g)
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                let (va, ga) = self.grad_rec(a, memo)?;
                let (vb, gb) = self.grad_rec(b, memo)?;
                if matches!(e.node(), Node::Add(..)) {
                    (va.add(&vb), ga.iter().zip(&gb).map(|(x, y)| x.add(y)).collect())
                } else {
                    (va.sub(&vb), ga.iter().zip(&gb).map(|(x, y)| x.sub(y)).collect())
                }
            }
            Node::Mul(a, b) => {
                let (va, ga) = self.grad_rec(a, memo)?;
                let (vb, gb) = self.grad_rec(b, memo)?;
                let g = ga.iter().zip(&gb).map(|(x, y)| x.mul(&vb).add(&va.mul(y))).collect();
                (va.mul(&vb), g)
            }
            Node::Neg(a) => {
                let (va, ga) = self.grad_rec(a, memo)?;
                (va.neg(), ga.iter().map(Series::neg).collect())
            }
            Node::Inv(a) => {
                let (va, ga) = self.grad_rec(a, memo)?;
                let iv = va.inv_with(w)?;
                let minus_sq = iv.mul(&iv).neg();
                (iv, ga.iter().map(|x| x.mul(&minus_sq)).collect())
            }
            Node::Pow(a, k) => {
                let (va, ga) = self.grad_rec(a, memo)?;
                let v = va.pow_with(*k, w)?;
                if *k == 0 {
                    (v, vec![zero(); n])
                } else {
                    let dv = va.pow_with(k - 1, w)?.mul_int(*k);
                    (v, ga.iter().map(|x| x.mul(&dv)).collect())
                }
            }
        };
        memo.insert(key, out.clone());
        Ok(out)
    }
}

/// `sum_k g_k dh_{k,1} ∧ ... ∧ dh_{k,q}` over the expression layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractForm {
    pub deg: usize,
    pub terms: Vec<(Expr, Vec<Expr>)>,
}

impl AbstractForm {
    pub fn zero(deg: usize) -> Self {
        AbstractForm { deg, terms: vec![] }
    }

    pub fn function(g: Expr) -> Self {
        AbstractForm { deg: 0, terms: vec![(g, vec![])] }
    }

    pub fn d(h: Expr, field: &Arc<ExtField>) -> Self {
        AbstractForm { deg: 1, terms: vec![(Expr::konst(ExtScalar::one(field)), vec![h])] }
    }

    /// `a_1^{-1} da_1 ∧ ... ∧ a_q^{-1} da_q`
    pub fn dlog(a: &[Expr], field: &Arc<ExtField>) -> Self {
        let mut g = Expr::konst(ExtScalar::one(field));
        for x in a {
            g = g.times(&x.inv());
        }
        AbstractForm { deg: a.len(), terms: vec![(g, a.to_vec())] }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        if self.deg != o.deg {
            return Err(Error::Domain(format!("cannot add forms of degrees {} and {}", self.deg, o.deg)));
        }
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        Ok(AbstractForm { deg: self.deg, terms })
    }

    pub fn neg(&self) -> Self {
        AbstractForm { deg: self.deg, terms: self.terms.iter().map(|(g, h)| (g.neg(), h.clone())).collect() }
    }

    pub fn wedge(&self, o: &Self) -> Self {
        let mut terms = Vec::new();
        for (g1, h1) in &self.terms {
            for (g2, h2) in &o.terms {
                let mut h = h1.clone();
                h.extend(h2.iter().cloned());
                terms.push((g1.times(g2), h));
            }
        }
        AbstractForm { deg: self.deg + o.deg, terms }
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (g, hs) in &self.terms {
            out.extend(g.symbols());
            for h in hs {
                out.extend(h.symbols());
            }
        }
        out
    }

    pub fn generators(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (g, hs) in &self.terms {
            out.extend(g.generators());
            for h in hs {
                out.extend(h.generators());
            }
        }
        out
    }

    /// `d(g dh_1 ∧ ...) = dg ∧ dh_1 ∧ ...`
    pub fn exterior_d(&self, field: &Arc<ExtField>) -> Self {
        let one = Expr::konst(ExtScalar::one(field));
        let terms = self
            .terms
            .iter()
            .filter(|(g, _)| !matches!(g.node(), Node::Const(_)))
            .map(|(g, hs)| {
                let mut h = vec![g.clone()];
                h.extend(hs.iter().cloned());
                (one.clone(), h)
            })
            .collect();
        AbstractForm { deg: self.deg + 1, terms }
    }
}

impl fmt::Display for AbstractForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return if self.deg == 0 { f.write_str("0") } else { write!(f, "0*d(t1)") };
        }
        for (k, (g, hs)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            let mut wrote = false;
            if !g.is_one() || hs.is_empty() {
                g.write(f, 2)?;
                wrote = true;
            }
            for (j, h) in hs.iter().enumerate() {
                if j == 0 {
                    if wrote {
                        f.write_str(" * ")?;
                    }
                } else {
                    f.write_str(" ^ ")?;
                }
                f.write_str("d(")?;
                h.write(f, 0)?;
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

/// All `q`-subsets of `{1..n}` in lexicographic order.
pub fn subsets(n: usize, q: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(i + 1, n, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, q, &mut vec![], &mut out);
    out
}

/// Sign of `dt_I ∧ dt_J` relative to `dt_{I ∪ J}`, or `None` if they overlap.
fn merge_sign(i: &[usize], j: &[usize]) -> Option<(i64, Vec<usize>)> {
    let mut inversions = 0;
    for a in i {
        for b in j {
            if a == b {
                return None;
            }
            if a > b {
                inversions += 1;
            }
        }
    }
    let mut u: Vec<usize> = i.iter().chain(j).copied().collect();
    u.sort_unstable();
    Some((if inversions % 2 == 0 { 1 } else { -1 }, u))
}

/// `sum_I g_I dt_I` over all `q`-subsets `I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparatedForm {
    n: usize,
    deg: usize,
    field: Arc<ExtField>,
    coeffs: BTreeMap<Vec<usize>, Series>,
}

impl SeparatedForm {
    pub fn zero(field: &Arc<ExtField>, n: usize, deg: usize) -> Self {
        let coeffs = subsets(n, deg).into_iter().map(|i| (i, Series::zero(field, n))).collect();
        SeparatedForm { n, deg, field: field.clone(), coeffs }
    }

    pub fn function(g: Series) -> Self {
        let mut out = Self::zero(g.field(), g.depth(), 0);
        out.coeffs.insert(vec![], g);
        out
    }

    /// `g dt_I` for a sorted index set `I`.
    pub fn monomial(g: Series, i: &[usize]) -> Self {
        let mut out = Self::zero(g.field(), g.depth(), i.len());
        assert!(out.coeffs.contains_key(i), "index set must be increasing within 1..=n");
        out.coeffs.insert(i.to_vec(), g);
        out
    }

    /// Top-degree form `g dt_1 ∧ ... ∧ dt_n`.
    pub fn top(g: Series) -> Self {
        let n = g.depth();
        Self::monomial(g, &(1..=n).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<usize>, Series> {
        &self.coeffs
    }

    pub fn coeff(&self, i: &[usize]) -> &Series {
        &self.coeffs[i]
    }

    pub fn set_coeff(&mut self, i: &[usize], g: Series) {
        self.coeffs.insert(i.to_vec(), g);
    }

    fn zip(&self, o: &Self, f: impl Fn(&Series, &Series) -> Series) -> Result<Self> {
        if self.deg != o.deg || self.n != o.n {
            return Err(Error::Domain("forms differ in degree or ambient dimension".into()));
        }
        let coeffs = self.coeffs.iter().map(|(i, g)| (i.clone(), f(g, &o.coeffs[i]))).collect();
        Ok(SeparatedForm { coeffs, ..self.clone() })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.zip(o, Series::add)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.zip(o, Series::sub)
    }

    pub fn neg(&self) -> Self {
        self.map(|g| g.neg())
    }

    pub fn map(&self, f: impl Fn(&Series) -> Series) -> Self {
        SeparatedForm { coeffs: self.coeffs.iter().map(|(i, g)| (i.clone(), f(g))).collect(), ..self.clone() }
    }

    pub fn try_map(&self, f: impl Fn(&Series) -> Result<Series>) -> Result<Self> {
        let coeffs = self.coeffs.iter().map(|(i, g)| Ok((i.clone(), f(g)?))).collect::<Result<_>>()?;
        Ok(SeparatedForm { coeffs, ..self.clone() })
    }

    pub fn mul_function(&self, g: &Series) -> Self {
        self.map(|c| c.mul(g))
    }

    pub fn wedge(&self, o: &Self) -> Result<Self> {
        if self.n != o.n {
            return Err(Error::Domain("forms live on different fields".into()));
        }
        let mut out = Self::zero(&self.field, self.n, self.deg + o.deg);
        for (i, a) in &self.coeffs {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in &o.coeffs {
                if b.is_exact_zero() {
                    continue;
                }
                if let Some((sign, u)) = merge_sign(i, j) {
                    let prod = a.mul(b).mul_int(sign);
                    let cur = out.coeffs[&u].add(&prod);
                    out.coeffs.insert(u, cur);
                }
            }
        }
        Ok(out)
    }

    pub fn exterior_d(&self) -> Self {
        let mut out = Self::zero(&self.field, self.n, self.deg + 1);
        for (i, g) in &self.coeffs {
            for j in 1..=self.n {
                if let Some((sign, u)) = merge_sign(&[j], i) {
                    let dg = g.derivative(j).mul_int(sign);
                    if dg.is_exact_zero() {
                        continue;
                    }
                    let cur = out.coeffs[&u].add(&dg);
                    out.coeffs.insert(u, cur);
                }
            }
        }
        out
    }

    pub fn eq_within(&self, o: &Self) -> bool {
        self.deg == o.deg && self.n == o.n && self.coeffs.iter().all(|(i, g)| g.eq_within(&o.coeffs[i]))
    }

    pub fn is_zero_within_precision(&self) -> bool {
        self.coeffs.values().all(Series::is_zero_within_precision)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (i, g) in &self.coeffs {
            let key = format!("[{}]", i.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
            m.insert(key, g.to_json());
        }
        json!({ "deg": self.deg, "coeffs": Value::Object(m) })
    }

    pub fn from_json(field: &Arc<ExtField>, n: usize, v: &Value) -> Result<Self> {
        let bad = || Error::Domain("form JSON must be {\"deg\", \"coeffs\"}".into());
        let deg = v.get("deg").and_then(Value::as_u64).ok_or_else(bad)? as usize;
        let coeffs = v.get("coeffs").and_then(Value::as_object).ok_or_else(bad)?;
        let mut out = Self::zero(field, n, deg);
        for (key, g) in coeffs {
            let idx: Vec<usize> = serde_json::from_str(key).map_err(|_| bad())?;
            if !out.coeffs.contains_key(&idx) {
                return Err(Error::Domain(format!("{key} is not an increasing {deg}-subset of 1..{n}")));
            }
            out.coeffs.insert(idx, Series::from_json(field, n, g)?);
        }
        Ok(out)
    }
}

impl fmt::Display for SeparatedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .filter(|(_, g)| !g.is_exact_zero())
            .map(|(i, g)| {
                let basis: Vec<String> = i.iter().map(|x| format!("dt{x}")).collect();
                if basis.is_empty() {
                    g.to_string()
                } else {
                    format!("({g}) {}", basis.join("^"))
                }
            })
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// `dh = sum_i (d h / d t_i) dt_i` from a gradient.
fn differential(field: &Arc<ExtField>, n: usize, grad: &[Series]) -> SeparatedForm {
    let mut out = SeparatedForm::zero(field, n, 1);
    for (i, g) in grad.iter().enumerate() {
        out.coeffs.insert(vec![i + 1], g.clone());
    }
    out
}

/// The separation map `τ`: replaces each `dh` by its total differential.
pub fn separate(w: &AbstractForm, ctx: &FormContext) -> Result<SeparatedForm> {
    let n = ctx.k.n;
    let f = ctx.field();
    let mut out = SeparatedForm::zero(f, n, w.deg);
    if w.deg > n {
        return Ok(out);
    }
    for (g, hs) in &w.terms {
        let mut acc = SeparatedForm::function(ctx.eval(g)?);
        for h in hs {
            let (_, grad) = ctx.eval_grad(h)?;
            acc = acc.wedge(&differential(f, n, &grad))?;
        }
        out = out.add(&acc)?;
    }
    Ok(out)
}

/// `d` of a degree-0 series.
pub fn d_function(g: &Series) -> SeparatedForm {
    let n = g.depth();
    let grad: Vec<Series> = (1..=n).map(|i| g.derivative(i)).collect();
    differential(g.field(), n, &grad)
}

/// `u^{-1} du` for a unit `u`.
pub fn dlog_element(u: &Series, w: i64) -> Result<SeparatedForm> {
    Ok(d_function(u).mul_function(&u.inv_with(w)?))
}

/// `dlog(a_1) ∧ ... ∧ dlog(a_n)` for a uniformizer system.
pub fn dlog(a: &[Series], w: i64) -> Result<SeparatedForm> {
    let Some(first) = a.first() else {
        return Err(Error::Domain("dlog of an empty system needs an explicit field".into()));
    };
    let n = first.depth();
    let mut acc = SeparatedForm::function(Series::one(first.field(), n));
    for x in a {
        acc = acc.wedge(&dlog_element(x, w)?)?;
    }
    Ok(acc)
}

/// Substitutes inside every expression; the caller supplies bindings for new symbols.
pub fn pullback_automorphism(w: &AbstractForm, map: &BTreeMap<String, Expr>) -> Result<AbstractForm> {
    let terms = w
        .terms
        .iter()
        .map(|(g, hs)| Ok((g.substitute(map)?, hs.iter().map(|h| h.substitute(map)).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AbstractForm { deg: w.deg, terms })
}

/// The identity substitution on `t1..tn` and the given symbols.
pub fn identity_map(n: usize, symbols: &BTreeSet<String>) -> BTreeMap<String, Expr> {
    let mut m: BTreeMap<String, Expr> = (1..=n).map(|i| (format!("t{i}"), Expr::gen(i))).collect();
    for s in symbols {
        m.insert(s.clone(), Expr::sym(s));
    }
    m
}

/// Pullback of a separated form along `t_i -> vals[i]`.
pub fn pullback_separated(w: &SeparatedForm, vals: &[Series], window: i64) -> Result<SeparatedForm> {
    let n = w.n;
    let f = w.field.clone();
    let dv: Vec<SeparatedForm> = vals.iter().map(d_function).collect();
    let mut out = SeparatedForm::zero(&f, n, w.deg);
    for (i, g) in &w.coeffs {
        if g.is_exact_zero() {
            continue;
        }
        let mut acc = SeparatedForm::function(substitute(g, vals, window)?);
        for &j in i {
            acc = acc.wedge(&dv[j - 1])?;
        }
        out = out.add(&acc)?;
    }
    Ok(out)
}
