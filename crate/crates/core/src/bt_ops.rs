//! Operators on `K` built from multiplications, differential operators,
//! level projections, coefficientwise lifts and finite-rank maps, with
//! membership certificates for `E(K)` and the ideals `E(K)_{i,j}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::diffop::DiffOperator;
use crate::error::{Error, Result};
use crate::lattices::{find_refinement, induced_action, quotient_module, t1_order, Lattice, Refinement};
use crate::residue::{project_ge, project_lt};
use crate::scalars::{rank, BaseScalar, ExtField, ExtScalar};
use crate::series::{Series, DEFAULT_WINDOW};
use crate::tlf::{
    change_of_lifting_matrix, monomial_basis, reassemble, sigma_expand, ArtinianQuotient, LiftingSpec, LiftingSystem,
    TlfDescriptor,
};

pub const DEFAULT_LADDER: usize = 3;
pub const DEFAULT_RANDOM_PROBES: usize = 50;

/// Exponent predicate of a level projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cut {
    Ge(i64),
    Lt(i64),
}

impl Cut {
    pub fn keeps(&self, q: i64) -> bool {
        match *self {
            Cut::Ge(m) => q >= m,
            Cut::Lt(m) => q < m,
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Cut::Ge(m) => format!(">={m}"),
            Cut::Lt(m) => format!("<{m}"),
        }
    }

    pub fn parse(s: &str) -> Result<Cut> {
        let s = s.trim();
        let bad = || Error::Domain(format!("predicate must look like \">=m\" or \"<m\", got {s:?}"));
        if let Some(r) = s.strip_prefix(">=") {
            r.trim().parse().map(Cut::Ge).map_err(|_| bad())
        } else if let Some(r) = s.strip_prefix('<') {
            r.trim().parse().map(Cut::Lt).map_err(|_| bad())
        } else {
            Err(bad())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OperatorExpr {
    MulBy(Series),
    Diff(DiffOperator),
    Proj { field: Arc<ExtField>, n: usize, level: usize, cut: Cut, sigma: LiftingSystem },
    /// Applies a depth-`(n-1)` operator to the `σ_1`-expansion coefficients.
    CoeffLift { inner: Box<OperatorExpr>, sigma1: LiftingSpec },
    /// `x ↦ sum_rows coeff_m(x) * image`
    FiniteRank { field: Arc<ExtField>, n: usize, rows: Vec<(Vec<i64>, Series)> },
    /// `a ∘ b`
    Compose(Box<OperatorExpr>, Box<OperatorExpr>),
    Add(Box<OperatorExpr>, Box<OperatorExpr>),
}

use OperatorExpr as Op;

fn mono(field: &Arc<ExtField>, exps: &[i64]) -> Series {
    Series::monomial(field, exps, ExtScalar::one(field))
}

fn t1(field: &Arc<ExtField>, n: usize) -> Series {
    let mut e = vec![0; n];
    e[0] = 1;
    mono(field, &e)
}

fn not_certifiable(e: Error) -> Error {
    match e {
        Error::NotCertifiable(_) => e,
        other => Error::NotCertifiable(other.to_string()),
    }
}

impl OperatorExpr {
    pub fn mul_by(f: Series) -> Result<Self> {
        if f.depth() == 0 {
            return Err(Error::Domain("operators act on series of positive depth".into()));
        }
        if f.is_exact_zero() {
            return Ok(Op::zero(f.field(), f.depth()));
        }
        Ok(Op::MulBy(f))
    }

    pub fn identity(field: &Arc<ExtField>, n: usize) -> Self {
        Op::MulBy(Series::one(field, n))
    }

    pub fn zero(field: &Arc<ExtField>, n: usize) -> Self {
        Op::FiniteRank { field: field.clone(), n, rows: vec![] }
    }

    pub fn scalar(field: &Arc<ExtField>, n: usize, c: ExtScalar) -> Self {
        if c.is_zero() {
            return Op::zero(field, n);
        }
        Op::MulBy(Series::constant(field, n, c))
    }

    pub fn diff(d: DiffOperator) -> Result<Self> {
        if d.depth() == 0 {
            return Err(Error::Domain("operators act on series of positive depth".into()));
        }
        let p = d.field().characteristic();
        if p != 0 && d.order() > 0 {
            return Err(Error::CharacteristicObstruction(format!(
                "differential operators of positive order are not supported in characteristic {p}"
            )));
        }
        if d.terms().is_empty() {
            return Ok(Op::zero(d.field(), d.depth()));
        }
        Ok(Op::Diff(d))
    }

    /// `d/dt_axis`
    pub fn derivation(field: &Arc<ExtField>, n: usize, axis: usize) -> Result<Self> {
        if axis == 0 || axis > n {
            return Err(Error::Domain(format!("no variable t{axis} at depth {n}")));
        }
        Op::diff(DiffOperator::derivation(field, n, axis, Series::one(field, n)))
    }

    pub fn proj(field: &Arc<ExtField>, n: usize, level: usize, cut: Cut, sigma: LiftingSystem) -> Result<Self> {
        if level == 0 || level > n {
            return Err(Error::Domain(format!("projection level {level} outside 1..={n}")));
        }
        if sigma.levels.len() != n {
            return Err(Error::Domain(format!("lifting system has {} levels, expected {n}", sigma.levels.len())));
        }
        Ok(Op::Proj { field: field.clone(), n, level, cut, sigma })
    }

    pub fn coeff_lift(inner: OperatorExpr, sigma1: LiftingSpec) -> Self {
        if inner.is_trivially_zero() {
            return Op::zero(&inner.field(), inner.depth() + 1);
        }
        Op::CoeffLift { inner: Box::new(inner), sigma1 }
    }

    pub fn finite_rank(field: &Arc<ExtField>, n: usize, rows: Vec<(Vec<i64>, Series)>) -> Result<Self> {
        for (m, img) in &rows {
            if m.len() != n || img.depth() != n {
                return Err(Error::Domain(format!("finite-rank rows need depth-{n} exponents and images")));
            }
        }
        let rows = rows.into_iter().filter(|(_, img)| !img.is_exact_zero()).collect();
        Ok(Op::FiniteRank { field: field.clone(), n, rows })
    }

    /// `a ∘ b`
    pub fn compose(a: OperatorExpr, b: OperatorExpr) -> Result<Self> {
        a.check_compatible(&b)?;
        if a.is_trivially_zero() || b.is_trivially_zero() {
            return Ok(Op::zero(&a.field(), a.depth()));
        }
        if a.is_identity() {
            return Ok(b);
        }
        if b.is_identity() {
            return Ok(a);
        }
        Ok(Op::Compose(Box::new(a), Box::new(b)))
    }

    pub fn add(a: OperatorExpr, b: OperatorExpr) -> Result<Self> {
        a.check_compatible(&b)?;
        if a.is_trivially_zero() {
            return Ok(b);
        }
        if b.is_trivially_zero() {
            return Ok(a);
        }
        Ok(Op::Add(Box::new(a), Box::new(b)))
    }

    pub fn scale(self, c: ExtScalar) -> Result<Self> {
        let s = Op::scalar(&self.field(), self.depth(), c);
        Op::compose(s, self)
    }

    pub fn neg(self) -> Result<Self> {
        let f = self.field();
        self.scale(ExtScalar::from_i64(&f, -1))
    }

    fn check_compatible(&self, o: &Self) -> Result<()> {
        if self.depth() != o.depth() || self.field() != o.field() {
            return Err(Error::Domain("operators act on different fields".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        match self {
            Op::MulBy(f) => f.depth(),
            Op::Diff(d) => d.depth(),
            Op::Proj { n, .. } | Op::FiniteRank { n, .. } => *n,
            Op::CoeffLift { inner, .. } => inner.depth() + 1,
            Op::Compose(a, _) | Op::Add(a, _) => a.depth(),
        }
    }

    pub fn field(&self) -> Arc<ExtField> {
        match self {
            Op::MulBy(f) => f.field().clone(),
            Op::Diff(d) => d.field().clone(),
            Op::Proj { field, .. } | Op::FiniteRank { field, .. } => field.clone(),
            Op::CoeffLift { inner, .. } => inner.field(),
            Op::Compose(a, _) | Op::Add(a, _) => a.field(),
        }
    }

    pub fn is_trivially_zero(&self) -> bool {
        match self {
            Op::FiniteRank { rows, .. } => rows.is_empty(),
            Op::MulBy(f) => f.is_exact_zero(),
            Op::Diff(d) => d.terms().is_empty(),
            _ => false,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Op::MulBy(f) if f.as_scalar().is_some_and(|c| c.is_one()))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Op::CoeffLift { inner, .. } => 1 + inner.size(),
            Op::Compose(a, b) | Op::Add(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }

    /// The level projection one level down, acting on coefficients.
    fn level_inner(field: &Arc<ExtField>, n: usize, level: usize, cut: Cut, sigma: &LiftingSystem) -> Self {
        Op::Proj { field: field.clone(), n: n - 1, level: level - 1, cut, sigma: sigma.residual_reindexed() }
    }

    pub fn apply(&self, x: &Series) -> Result<Series> {
        if x.depth() != self.depth() {
            return Err(Error::Domain(format!(
                "operator acts at depth {}, argument has depth {}",
                self.depth(),
                x.depth()
            )));
        }
        match self {
            Op::MulBy(f) => Ok(f.mul(x)),
            Op::Diff(d) => Ok(d.apply(x)),
            Op::Proj { field, n, level, cut, sigma } => {
                if *level == 1 {
                    match (sigma.level(1), cut) {
                        (LiftingSpec::Standard, Cut::Ge(m)) => Ok(project_ge(x, *m)),
                        (LiftingSpec::Standard, Cut::Lt(m)) => Ok(project_lt(x, *m)),
                        (spec, _) => lift_map(x, spec, &|q, b| {
                            Ok(if cut.keeps(q) { b.clone() } else { Series::zero(b.field(), b.depth()) })
                        }),
                    }
                } else {
                    let inner = Op::level_inner(field, *n, *level, *cut, sigma);
                    lift_map(x, sigma.level(1), &|_, b| inner.apply(b))
                }
            }
            Op::CoeffLift { inner, sigma1 } => lift_map(x, sigma1, &|_, b| inner.apply(b)),
            Op::FiniteRank { field, n, rows } => {
                let mut acc = Series::zero(field, *n);
                for (m, img) in rows {
                    let c = x.coefficient_at(m)?;
                    if !c.is_zero() {
                        acc = acc.add(&img.scale(&c));
                    }
                }
                Ok(acc)
            }
            Op::Compose(a, b) => a.apply(&b.apply(x)?),
            Op::Add(a, b) => Ok(a.apply(x)?.add(&b.apply(x)?)),
        }
    }

    /// `d` with `v_1(φx) >= v_1(x) - d`.
    pub fn band(&self) -> Result<i64> {
        match self {
            Op::MulBy(f) => Ok(match t1_order(f)? {
                Some(o) => -o,
                None => f.prec().map_or(0, |p| -p),
            }),
            Op::Diff(d) => {
                let mut best: Option<i64> = None;
                for (a, c) in d.terms() {
                    if let Some(o) = t1_order(c)? {
                        let v = a[0] as i64 - o;
                        best = Some(best.map_or(v, |b| b.max(v)));
                    }
                }
                Ok(best.unwrap_or(0))
            }
            Op::Proj { .. } | Op::CoeffLift { .. } => Ok(0),
            Op::FiniteRank { rows, .. } => {
                let Some(hi) = rows.iter().map(|(m, _)| m[0]).max() else { return Ok(0) };
                let mut lo: Option<i64> = None;
                for (_, img) in rows {
                    if let Some(o) = t1_order(img)? {
                        lo = Some(lo.map_or(o, |l| l.min(o)));
                    }
                }
                Ok(lo.map_or(0, |l| hi - l))
            }
            Op::Compose(a, b) => Ok(a.band()? + b.band()?),
            Op::Add(a, b) => Ok(a.band()?.max(b.band()?)),
        }
    }

    /// `m` with `φ(K) ⊆ t_1^m O_1`, found structurally.
    pub fn image_witness(&self) -> Result<Option<i64>> {
        match self {
            Op::Proj { level: 1, cut: Cut::Ge(m), .. } => Ok(Some(*m)),
            Op::FiniteRank { rows, .. } => {
                let mut lo: Option<i64> = None;
                for (_, img) in rows {
                    if let Some(o) = t1_order(img)? {
                        lo = Some(lo.map_or(o, |l| l.min(o)));
                    }
                }
                Ok(Some(lo.unwrap_or(0)))
            }
            Op::Compose(a, b) => {
                if let Some(m) = a.image_witness()? {
                    return Ok(Some(m));
                }
                match b.image_witness()? {
                    Some(m) => Ok(Some(m - a.band()?)),
                    None => Ok(None),
                }
            }
            Op::Add(a, b) => Ok(match (a.image_witness()?, b.image_witness()?) {
                (Some(x), Some(y)) => Some(x.min(y)),
                _ => None,
            }),
            _ => Ok(None),
        }
    }

    /// `m` with `φ(t_1^m O_1) = 0`, found structurally.
    pub fn kill_witness(&self) -> Result<Option<i64>> {
        match self {
            Op::Proj { level: 1, cut: Cut::Lt(m), .. } => Ok(Some(*m)),
            Op::FiniteRank { rows, .. } => Ok(Some(rows.iter().map(|(m, _)| m[0] + 1).max().unwrap_or(0))),
            Op::Compose(a, b) => {
                if let Some(m) = b.kill_witness()? {
                    return Ok(Some(m));
                }
                match a.kill_witness()? {
                    Some(m) => Ok(Some(m + b.band()?)),
                    None => Ok(None),
                }
            }
            Op::Add(a, b) => Ok(match (a.kill_witness()?, b.kill_witness()?) {
                (Some(x), Some(y)) => Some(x.max(y)),
                _ => None,
            }),
            _ => Ok(None),
        }
    }

    /// The common first-level lifting of the projection and lift nodes.
    pub fn top_sigma(&self) -> Result<LiftingSpec> {
        let mut found: Vec<LiftingSpec> = Vec::new();
        self.collect_sigmas(&mut found);
        found.dedup();
        match found.len() {
            0 => Ok(LiftingSpec::Standard),
            1 => Ok(found.pop().expect("one element")),
            _ => Err(Error::NotCertifiable("operator mixes different first-level liftings".into())),
        }
    }

    fn collect_sigmas(&self, out: &mut Vec<LiftingSpec>) {
        let s = match self {
            Op::Proj { sigma, .. } => sigma.level(1).clone(),
            Op::CoeffLift { sigma1, .. } => sigma1.clone(),
            Op::Compose(a, b) | Op::Add(a, b) => {
                a.collect_sigmas(out);
                b.collect_sigmas(out);
                return;
            }
            _ => return,
        };
        if !out.contains(&s) {
            out.push(s);
        }
    }

    /// The depth-`(n-1)` operator `b ↦ [t_1^p] φ(σ_1(b) t_1^q)` in `s1`-coordinates.
    pub fn coeff(&self, p: i64, q: i64, s1: &LiftingSpec) -> Result<OperatorExpr> {
        let n = self.depth();
        if n < 2 {
            return Err(Error::Domain("coefficient operators need depth at least 2".into()));
        }
        let field = self.field();
        let zero = || Op::zero(&field, n - 1);
        let nonstructural = || {
            Error::NotCertifiable("coefficient operators of this node are only structural for the standard lifting".into())
        };
        match self {
            Op::MulBy(g) => {
                if let Some(c) = g.as_scalar() {
                    return Ok(if p == q { Op::scalar(&field, n - 1, c) } else { zero() });
                }
                if *s1 != LiftingSpec::Standard {
                    return Err(nonstructural());
                }
                Op::mul_by(g.coeff_series(p - q)?)
            }
            Op::Diff(d) => {
                if *s1 != LiftingSpec::Standard {
                    return Err(nonstructural());
                }
                let mut terms = Vec::new();
                for (a, c) in d.terms() {
                    let mut fall: i64 = 1;
                    for j in 0..a[0] as i64 {
                        fall *= q - j;
                    }
                    if fall == 0 {
                        continue;
                    }
                    let cc = c.coeff_series(p - q + a[0] as i64)?.mul_int(fall);
                    if !cc.is_exact_zero() {
                        terms.push((a[1..].to_vec(), cc));
                    }
                }
                Op::diff(DiffOperator::from_terms(&field, n - 1, terms))
            }
            Op::Proj { n, level, cut, sigma, .. } => {
                if sigma.level(1) != s1 {
                    return Err(nonstructural());
                }
                if p != q {
                    Ok(zero())
                } else if *level == 1 {
                    Ok(if cut.keeps(q) { Op::identity(&field, n - 1) } else { zero() })
                } else {
                    Ok(Op::level_inner(&field, *n, *level, *cut, sigma))
                }
            }
            Op::CoeffLift { inner, sigma1 } => {
                if sigma1 != s1 {
                    return Err(nonstructural());
                }
                Ok(if p == q { (**inner).clone() } else { zero() })
            }
            Op::FiniteRank { rows, .. } => {
                if *s1 != LiftingSpec::Standard {
                    return Err(nonstructural());
                }
                let mut out = Vec::new();
                for (m, img) in rows.iter().filter(|(m, _)| m[0] == q) {
                    out.push((m[1..].to_vec(), img.coeff_series(p)?));
                }
                Op::finite_rank(&field, n - 1, out)
            }
            Op::Compose(a, b) => {
                let (da, db) = (a.band()?, b.band()?);
                let mut acc = zero();
                for s in (q - db)..=(p + da) {
                    let x = a.coeff(p, s, s1)?;
                    if x.is_trivially_zero() {
                        continue;
                    }
                    let y = b.coeff(s, q, s1)?;
                    acc = Op::add(acc, Op::compose(x, y)?)?;
                }
                Ok(acc)
            }
            Op::Add(a, b) => Op::add(a.coeff(p, q, s1)?, b.coeff(p, q, s1)?),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Op::MulBy(f) => json!({ "op": "mulby", "f": f.to_json() }),
            Op::Diff(d) => {
                let terms: Vec<Value> =
                    d.terms().iter().map(|(a, c)| json!({ "d": a, "coeff": c.to_json() })).collect();
                json!({ "op": "diff", "terms": terms })
            }
            Op::Proj { level, cut, sigma, .. } => {
                json!({ "op": "proj", "level": level, "pred": cut.to_text(), "sigma": sigma.to_json() })
            }
            Op::CoeffLift { inner, sigma1 } => {
                json!({ "op": "coefflift", "inner": inner.to_json(), "sigma1": sigma1.to_json(1) })
            }
            Op::FiniteRank { rows, .. } => {
                let rows: Vec<Value> =
                    rows.iter().map(|(m, img)| json!({ "m": m, "image": img.to_json() })).collect();
                json!({ "op": "finrank", "rows": rows })
            }
            Op::Compose(a, b) => json!({ "op": "compose", "args": [a.to_json(), b.to_json()] }),
            Op::Add(a, b) => json!({ "op": "add", "args": [a.to_json(), b.to_json()] }),
        }
    }

    /// Reads the operator JSON schema on the field `k`.
    pub fn from_json(k: &TlfDescriptor, v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Domain(format!("operator JSON: {what}"));
        let field = &k.field;
        let n = k.n;
        let op = v.get("op").and_then(Value::as_str).ok_or_else(|| bad("missing \"op\""))?;
        match op {
            "mulby" => Op::mul_by(Series::from_json(field, n, v.get("f").ok_or_else(|| bad("mulby needs \"f\""))?)?),
            "diff" => {
                let mut terms = Vec::new();
                for t in v.get("terms").and_then(Value::as_array).ok_or_else(|| bad("diff needs \"terms\""))? {
                    let a: Vec<u32> = t
                        .get("d")
                        .and_then(Value::as_array)
                        .ok_or_else(|| bad("diff term needs \"d\""))?
                        .iter()
                        .map(|x| x.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad multi-index")))
                        .collect::<Result<_>>()?;
                    if a.len() != n {
                        return Err(bad("multi-index length differs from depth"));
                    }
                    let c = Series::from_json(field, n, t.get("coeff").ok_or_else(|| bad("diff term needs \"coeff\""))?)?;
                    terms.push((a, c));
                }
                Op::diff(DiffOperator::from_terms(field, n, terms))
            }
            "proj" => {
                let level = v.get("level").and_then(Value::as_u64).ok_or_else(|| bad("proj needs \"level\""))? as usize;
                let cut = Cut::parse(v.get("pred").and_then(Value::as_str).ok_or_else(|| bad("proj needs \"pred\""))?)?;
                let sigma = match v.get("sigma") {
                    None | Some(Value::Null) => LiftingSystem::standard(n),
                    Some(s) => lifting_system_from_json(k, s)?,
                };
                Op::proj(field, n, level, cut, sigma)
            }
            "coefflift" => {
                if n < 2 {
                    return Err(bad("coefflift needs depth at least 2"));
                }
                let inner_k = TlfDescriptor::new(n - 1, field.clone());
                let inner = Op::from_json(&inner_k, v.get("inner").ok_or_else(|| bad("coefflift needs \"inner\""))?)?;
                let sigma1 = match v.get("sigma1") {
                    None | Some(Value::Null) => LiftingSpec::Standard,
                    Some(s) => LiftingSpec::from_json(k, s)?.1,
                };
                Ok(Op::coeff_lift(inner, sigma1))
            }
            "finrank" => {
                let mut rows = Vec::new();
                for r in v.get("rows").and_then(Value::as_array).ok_or_else(|| bad("finrank needs \"rows\""))? {
                    let m: Vec<i64> = r
                        .get("m")
                        .and_then(Value::as_array)
                        .ok_or_else(|| bad("finrank row needs \"m\""))?
                        .iter()
                        .map(|x| x.as_i64().ok_or_else(|| bad("bad exponent")))
                        .collect::<Result<_>>()?;
                    let img = Series::from_json(field, n, r.get("image").ok_or_else(|| bad("finrank row needs \"image\""))?)?;
                    rows.push((m, img));
                }
                Op::finite_rank(field, n, rows)
            }
            "compose" | "add" => {
                let args = v.get("args").and_then(Value::as_array).ok_or_else(|| bad("needs \"args\""))?;
                let mut ops: Vec<Op> = args.iter().map(|a| Op::from_json(k, a)).collect::<Result<_>>()?;
                let mut acc = ops.pop().ok_or_else(|| bad("empty \"args\""))?;
                while let Some(prev) = ops.pop() {
                    acc = if op == "compose" { Op::compose(prev, acc)? } else { Op::add(prev, acc)? };
                }
                Ok(acc)
            }
            other => Err(bad(&format!("unknown op {other:?}"))),
        }
    }
}

pub fn lifting_system_from_json(k: &TlfDescriptor, v: &Value) -> Result<LiftingSystem> {
    let mut sys = LiftingSystem::standard(k.n);
    let arr = v.as_array().ok_or_else(|| Error::Domain("lifting system must be a JSON array".into()))?;
    for item in arr {
        let (level, spec) = LiftingSpec::from_json(k, item)?;
        if level == 0 || level > k.n {
            return Err(Error::Domain(format!("lifting level {level} outside 1..={}", k.n)));
        }
        sys = sys.with_level(level, spec);
    }
    Ok(sys)
}

/// Rebuilds `x = sum σ_1(b_q) t_1^q` with `b_q` replaced by `f(q, b_q)`.
fn lift_map(x: &Series, spec: &LiftingSpec, f: &dyn Fn(i64, &Series) -> Result<Series>) -> Result<Series> {
    let l = x.as_laurent().expect("positive depth");
    match spec {
        LiftingSpec::Standard => {
            let coeffs = l
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| f(l.order() + i as i64, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(Series::build(x.field(), x.depth(), l.order(), l.prec(), coeffs))
        }
        _ => {
            let a = t1(x.field(), x.depth());
            let parts = sigma_expand(x, spec, 1, &a)?;
            let mapped = parts.iter().map(|(b, q)| Ok((f(*q, b)?, *q))).collect::<Result<Vec<_>>>()?;
            let y = reassemble(&mapped, spec, 1, &a)?;
            Ok(match x.prec() {
                Some(p) => y.truncate(p),
                None => y,
            })
        }
    }
}

/// All monomials with exponents in a small box plus `random` random series.
pub fn probe_set(field: &Arc<ExtField>, n: usize, random: usize, seed: u64) -> Vec<Series> {
    let w: i64 = if n <= 2 { 2 } else { 1 };
    let mut exps: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n {
        exps = exps.into_iter().flat_map(|p| (-w..=w).map(move |e| [p.clone(), vec![e]].concat())).collect();
    }
    let mut out: Vec<Series> = exps.iter().map(|e| mono(field, e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = if n == 1 { 0.6 } else { 0.3 };
    while out.len() < exps.len() + random {
        let s = Series::random(field, n, -3, 3, density, &mut rng);
        if !s.is_exact_zero() {
            out.push(s);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    E,
    Ideal(usize, u8),
}

impl Target {
    /// `"E"`, `"1,2"` or `"(1,2)"`.
    pub fn parse(s: &str) -> Result<Target> {
        let s = s.trim();
        if s == "E" {
            return Ok(Target::E);
        }
        let inner = s.trim_start_matches('(').trim_end_matches(')');
        let bad = || Error::Domain(format!("target must be E or (i,j), got {s:?}"));
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let i: usize = a.trim().parse().map_err(|_| bad())?;
        let j: u8 = b.trim().parse().map_err(|_| bad())?;
        if i == 0 || !(j == 1 || j == 2) {
            return Err(bad());
        }
        Ok(Target::Ideal(i, j))
    }

    pub fn label(&self) -> String {
        match self {
            Target::E => "E".into(),
            Target::Ideal(i, j) => format!("({i},{j})"),
        }
    }

    /// `E` followed by all `(i,j)` for `i <= n`.
    pub fn all(n: usize) -> Vec<Target> {
        let mut v = vec![Target::E];
        for i in 1..=n {
            v.push(Target::Ideal(i, 1));
            v.push(Target::Ideal(i, 2));
        }
        v
    }
}

#[derive(Clone, Debug)]
pub enum Evidence {
    Band,
    /// `φ(K) ⊆ t_1^m O_1`
    Image(i64),
    /// `φ(t_1^m O_1) = 0`
    Kernel(i64),
    Ladder(Vec<LadderStep>),
}

/// One refinement of `(t_1^{-k} O_1, t_1^k O_1)` with the induced quotient map.
#[derive(Clone, Debug)]
pub struct LadderStep {
    pub k: i64,
    pub refinement: Refinement,
    pub src_base: i64,
    pub dst_base: i64,
    pub dim: usize,
    /// Nonzero matrix entries; the rest are zero.
    pub entries: Vec<EntryCert>,
}

#[derive(Clone, Debug)]
pub struct EntryCert {
    pub row: usize,
    pub col: usize,
    pub op: OperatorExpr,
    pub cert: Certificate,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub target: Target,
    pub n: usize,
    pub band: i64,
    /// The lifting giving `k_1`-coordinates on the quotients of the ladder.
    pub quotient_lifting: LiftingSpec,
    pub evidence: Evidence,
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub ladder: usize,
    /// Lifting system for quotient coordinates; defaults to the operator's own.
    pub quotient: Option<LiftingSystem>,
    pub window: i64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { ladder: DEFAULT_LADDER, quotient: None, window: DEFAULT_WINDOW }
    }
}

pub fn certify(phi: &OperatorExpr, target: Target) -> Result<Certificate> {
    certify_with(phi, target, &CertifyOptions::default())
}

pub fn certify_with(phi: &OperatorExpr, target: Target, opts: &CertifyOptions) -> Result<Certificate> {
    let n = phi.depth();
    let band = phi.band().map_err(|e| Error::NotCertifiable(format!("no band bound: {e}")))?;
    let quotient_lifting = match &opts.quotient {
        Some(s) => s.level(1).clone(),
        None => LiftingSpec::Standard,
    };
    let cert = |evidence, quotient_lifting| Certificate { target, n, band, quotient_lifting, evidence };
    match target {
        Target::E => Ok(cert(Evidence::Band, quotient_lifting)),
        Target::Ideal(i, j) => {
            if i == 0 || i > n || !(j == 1 || j == 2) {
                return Err(Error::Domain(format!("no ideal ({i},{j}) at depth {n}")));
            }
            if i == 1 {
                let (w, ev): (Option<i64>, fn(i64) -> Evidence) = if j == 1 {
                    (phi.image_witness().map_err(not_certifiable)?, Evidence::Image)
                } else {
                    (phi.kill_witness().map_err(not_certifiable)?, Evidence::Kernel)
                };
                return match w {
                    Some(m) => Ok(cert(ev(m), quotient_lifting)),
                    None => Err(Error::NotCertifiable(format!("no witness lattice for (1,{j}) found structurally"))),
                };
            }
            let s1 = phi.top_sigma()?;
            let q1 = opts.quotient.as_ref().map_or(s1.clone(), |s| s.level(1).clone());
            let sub = CertifyOptions { quotient: opts.quotient.as_ref().map(LiftingSystem::residual_reindexed), ..opts.clone() };
            let field = phi.field();
            let mut steps = Vec::new();
            for k in 1..=opts.ladder as i64 {
                let l1 = Lattice::standard(&field, n, 1, -k);
                let l2 = Lattice::standard(&field, n, 1, k);
                let refinement = find_refinement(Some(band), &l1, &l2)?;
                let dim = refinement.m as usize;
                let (src_base, dst_base) = (-k, k - refinement.m);
                let mut mat = vec![vec![Op::zero(&field, n - 1); dim]; dim];
                for (pi, row) in mat.iter_mut().enumerate() {
                    for (qi, e) in row.iter_mut().enumerate() {
                        *e = phi.coeff(dst_base + pi as i64, src_base + qi as i64, &s1).map_err(not_certifiable)?;
                    }
                }
                if q1 != s1 {
                    mat = conjugate(&mat, &field, n, &s1, &q1).map_err(not_certifiable)?;
                }
                let mut entries = Vec::new();
                for (pi, row) in mat.into_iter().enumerate() {
                    for (qi, op) in row.into_iter().enumerate() {
                        if op.is_trivially_zero() {
                            continue;
                        }
                        let c = certify_with(&op, Target::Ideal(i - 1, j), &sub).map_err(|e| {
                            Error::NotCertifiable(format!("ladder step {k}, entry ({pi},{qi}): {e}"))
                        })?;
                        entries.push(EntryCert { row: pi, col: qi, op, cert: c });
                    }
                }
                steps.push(LadderStep { k, refinement, src_base, dst_base, dim, entries });
            }
            Ok(cert(Evidence::Ladder(steps), q1))
        }
    }
}

/// `M' = Γ ⋆ M ⋆ Θ`: coordinates change from `from`-liftings to `to`-liftings on both sides.
fn conjugate(
    mat: &[Vec<OperatorExpr>],
    field: &Arc<ExtField>,
    n: usize,
    from: &LiftingSpec,
    to: &LiftingSpec,
) -> Result<Vec<Vec<OperatorExpr>>> {
    let r = mat.len();
    if r == 0 {
        return Ok(vec![]);
    }
    let k = TlfDescriptor::new(n, field.clone());
    let a = ArtinianQuotient { level: 1, l: (r - 1) as u32 };
    let basis = monomial_basis(&k, &a);
    let col = change_of_lifting_matrix(&k, &a, from, to, &basis)?;
    let d = |x: &DiffOperator| if x.terms().is_empty() { Op::zero(field, n - 1) } else { Op::Diff(x.clone()) };
    let mut out = vec![vec![Op::zero(field, n - 1); r]; r];
    for (pp, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let mut acc = Op::zero(field, n - 1);
            for (p, mrow) in mat.iter().enumerate() {
                let g = d(&col.entries[p][pp]);
                if g.is_trivially_zero() {
                    continue;
                }
                for (kk, m) in mrow.iter().enumerate() {
                    let th = d(&col.inverse[j][kk]);
                    if m.is_trivially_zero() || th.is_trivially_zero() {
                        continue;
                    }
                    acc = Op::add(acc, Op::compose(g.clone(), Op::compose(m.clone(), th)?)?)?;
                }
            }
            *e = acc;
        }
    }
    Ok(out)
}

fn replay_fail(msg: String) -> Error {
    Error::NotCertifiable(format!("replay failed: {msg}"))
}

/// `Ok(None)` when the order is hidden by precision.
fn order_or_skip(x: &Series) -> Result<Option<Option<i64>>> {
    match t1_order(x) {
        Ok(o) => Ok(Some(o)),
        Err(Error::InsufficientPrecision(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl Certificate {
    /// Re-validates the evidence on fresh probes; returns the number of checks made.
    pub fn replay(&self, phi: &OperatorExpr, random: usize, seed: u64) -> Result<usize> {
        if phi.depth() != self.n {
            return Err(replay_fail("operator depth differs from the certificate".into()));
        }
        let field = phi.field();
        let probes = probe_set(&field, self.n, random, seed);
        let mut checks = 0;
        match &self.evidence {
            Evidence::Band => {
                for x in &probes {
                    let ox = t1_order(x)?.expect("nonzero probe");
                    let y = phi.apply(x)?;
                    if let Some(Some(oy)) = order_or_skip(&y)? {
                        if oy < ox - self.band {
                            return Err(replay_fail(format!("valuation drops by {} > band {}", ox - oy, self.band)));
                        }
                    }
                    checks += 1;
                }
            }
            Evidence::Image(m) => {
                for x in &probes {
                    let y = phi.apply(x)?;
                    if let Some(Some(oy)) = order_or_skip(&y)? {
                        if oy < *m {
                            return Err(replay_fail(format!("image leaves t1^{m} O")));
                        }
                    }
                    checks += 1;
                }
            }
            Evidence::Kernel(m) => {
                for x in &probes {
                    let ox = t1_order(x)?.expect("nonzero probe");
                    let mut e = vec![0; self.n];
                    e[0] = m - ox;
                    let y = phi.apply(&x.shift(&e))?;
                    if !y.is_zero_within_precision() {
                        return Err(replay_fail(format!("t1^{m} O is not killed")));
                    }
                    checks += 1;
                }
            }
            Evidence::Ladder(steps) => {
                let apply = |x: &Series| phi.apply(x);
                let mult: Vec<Series> = probes
                    .iter()
                    .rev()
                    .take(4)
                    .map(|x| {
                        let mut e = vec![0; self.n];
                        e[0] = -x.order();
                        x.shift(&e)
                    })
                    .collect();
                let w = DEFAULT_WINDOW;
                let inner_probes = probe_set(&field, self.n - 1, 5, seed ^ 0x9e37);
                for st in steps {
                    let r = &st.refinement;
                    if !r.verify(&apply, &mult)? {
                        return Err(replay_fail(format!("refinement at ladder step {} does not hold", st.k)));
                    }
                    let src = quotient_module(&r.l1, &r.l1p, &self.quotient_lifting, w)?;
                    let dst = quotient_module(&r.l2p, &r.l2, &self.quotient_lifting, w)?;
                    let by_pos: BTreeMap<(usize, usize), &OperatorExpr> =
                        st.entries.iter().map(|e| ((e.row, e.col), &e.op)).collect();
                    for qi in 0..st.dim {
                        for b in &inner_probes {
                            let coords = induced_action(&apply, &src, &dst, qi, b)?;
                            for (pi, c) in coords.iter().enumerate() {
                                let expect = match by_pos.get(&(pi, qi)) {
                                    Some(op) => op.apply(b)?,
                                    None => Series::zero(&field, self.n - 1),
                                };
                                if !c.eq_within(&expect) {
                                    return Err(replay_fail(format!(
                                        "induced map entry ({pi},{qi}) at ladder step {} disagrees",
                                        st.k
                                    )));
                                }
                                checks += 1;
                            }
                        }
                    }
                    for e in &st.entries {
                        checks += e.cert.replay(&e.op, (random / 5).max(5), seed.wrapping_add(e.row as u64 * 31 + e.col as u64))?;
                    }
                }
            }
        }
        Ok(checks)
    }

    pub fn to_json(&self) -> Value {
        let evidence = match &self.evidence {
            Evidence::Band => json!({ "kind": "band" }),
            Evidence::Image(m) => json!({ "kind": "image", "lattice": format!("t1^{m} O"), "m": m }),
            Evidence::Kernel(m) => json!({ "kind": "kernel", "lattice": format!("t1^{m} O"), "m": m }),
            Evidence::Ladder(steps) => {
                let steps: Vec<Value> = steps
                    .iter()
                    .map(|s| {
                        json!({
                            "k": s.k,
                            "refinement": s.refinement.to_json(),
                            "src_base": s.src_base,
                            "dst_base": s.dst_base,
                            "dim": s.dim,
                            "entries": s.entries.iter().map(|e| json!({
                                "row": e.row, "col": e.col, "op": e.op.to_json(), "certificate": e.cert.to_json(),
                            })).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                json!({ "kind": "ladder", "steps": steps })
            }
        };
        json!({
            "target": self.target.label(),
            "n": self.n,
            "band": self.band,
            "quotient_lifting": self.quotient_lifting.to_json(1),
            "evidence": evidence,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub level: usize,
    pub phi1: OperatorExpr,
    pub phi2: OperatorExpr,
    pub cert1: Certificate,
    pub cert2: Certificate,
}

/// The two operators of the identity decomposition at level `i`.
pub fn decomposition_ops(field: &Arc<ExtField>, n: usize, i: usize, sigma: &LiftingSystem) -> Result<(Op, Op)> {
    if i == 0 || i > n {
        return Err(Error::Domain(format!("level {i} outside 1..={n}")));
    }
    if sigma.levels.len() != n {
        return Err(Error::Domain(format!("lifting system has {} levels, expected {n}", sigma.levels.len())));
    }
    if i == 1 {
        return Ok((Op::proj(field, n, 1, Cut::Ge(0), sigma.clone())?, Op::proj(field, n, 1, Cut::Lt(0), sigma.clone())?));
    }
    let (a, b) = decomposition_ops(field, n - 1, i - 1, &sigma.residual_reindexed())?;
    Ok((Op::coeff_lift(a, sigma.level(1).clone()), Op::coeff_lift(b, sigma.level(1).clone())))
}

pub fn decompose_identity(k: &TlfDescriptor, i: usize, sigma: &LiftingSystem) -> Result<Decomposition> {
    let (phi1, phi2) = decomposition_ops(&k.field, k.n, i, sigma)?;
    let cert1 = certify(&phi1, Target::Ideal(i, 1))?;
    let cert2 = certify(&phi2, Target::Ideal(i, 2))?;
    Ok(Decomposition { level: i, phi1, phi2, cert1, cert2 })
}

/// `P_ε = φ^{(1)}_{ε_1} ∘ ... ∘ φ^{(n)}_{ε_n}` for `ε ∈ {1,2}^n` in lexicographic order.
pub fn cubical_projectors(k: &TlfDescriptor, sigma: &LiftingSystem) -> Result<Vec<(Vec<u8>, OperatorExpr)>> {
    let n = k.n;
    let pairs: Vec<(Op, Op)> = (1..=n).map(|i| decomposition_ops(&k.field, n, i, sigma)).collect::<Result<_>>()?;
    let mut eps: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..n {
        eps = eps.into_iter().flat_map(|p| [1u8, 2].map(|e| [p.clone(), vec![e]].concat())).collect();
    }
    let mut out = Vec::with_capacity(eps.len());
    for e in eps {
        let pick = |i: usize| if e[i] == 1 { pairs[i].0.clone() } else { pairs[i].1.clone() };
        let mut acc = pick(n - 1);
        for i in (0..n - 1).rev() {
            acc = Op::compose(pick(i), acc)?;
        }
        out.push((e, acc));
    }
    Ok(out)
}

/// `[π_c, g] ∘ f = (π g (1 - π) - (1 - π) g π) ∘ f` with `π` the level-1 projection onto exponents `>= c`.
pub fn tate_commutator(f: &Series, g: &Series, c: i64) -> Result<OperatorExpr> {
    let field = f.field();
    let n = f.depth();
    let sigma = LiftingSystem::standard(n);
    let pi = Op::proj(field, n, 1, Cut::Ge(c), sigma.clone())?;
    let co = Op::proj(field, n, 1, Cut::Lt(c), sigma)?;
    let mg = Op::mul_by(g.clone())?;
    let first = Op::compose(pi.clone(), Op::compose(mg.clone(), co.clone())?)?;
    let second = Op::compose(co, Op::compose(mg, pi)?)?.neg()?;
    Op::compose(Op::add(first, second)?, Op::mul_by(f.clone())?)
}

#[derive(Clone, Debug)]
pub struct FiniteTrace {
    pub trace: BaseScalar,
    /// Smallest `q >= 1` with `rank(φ^q) = rank(φ^{q+1})` on the reduced space.
    pub potency: usize,
    pub stable_rank: usize,
    /// Exponent window `[lo, hi)` per level of the reduced space.
    pub windows: Vec<(i64, i64)>,
    /// Matrix over the base field on the reduced space.
    pub matrix: Vec<Vec<BaseScalar>>,
}

impl FiniteTrace {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "trace": self.trace.to_canonical_string(),
            "potency": self.potency,
            "stable_rank": self.stable_rank,
            "dim": self.dim(),
            "windows": self.windows,
        })
    }
}

fn reduction_windows(op: &OperatorExpr) -> Result<Option<Vec<(i64, i64)>>> {
    if op.is_trivially_zero() {
        return Ok(None);
    }
    let n = op.depth();
    let missing = |what: &str| Error::NotReduced(format!("no {what} lattice at the top level"));
    let a = op.image_witness()?.ok_or_else(|| missing("bounding"))?;
    let b = op.kill_witness()?.ok_or_else(|| missing("killed"))?;
    let (lo, hi) = (a.min(b), a.max(b));
    if n == 1 {
        return Ok(Some(vec![(lo, hi)]));
    }
    let s1 = op.top_sigma().map_err(|e| Error::NotReduced(e.to_string()))?;
    if s1 != LiftingSpec::Standard {
        return Err(Error::NotReduced("reduction needs the standard first-level lifting".into()));
    }
    let mut inner: Option<Vec<(i64, i64)>> = None;
    for s in lo..hi {
        for s2 in lo..hi {
            let c = op.coeff(s, s2, &s1).map_err(|e| Error::NotReduced(e.to_string()))?;
            if let Some(w) = reduction_windows(&c)? {
                inner = Some(match inner {
                    None => w,
                    Some(v) => v.iter().zip(&w).map(|(x, y)| (x.0.min(y.0), x.1.max(y.1))).collect(),
                });
            }
        }
    }
    let mut out = vec![(lo, hi)];
    out.extend(inner.unwrap_or_else(|| vec![(0, 0); n - 1]));
    Ok(Some(out))
}

fn mat_mul(a: &[Vec<BaseScalar>], b: &[Vec<BaseScalar>], zero: &BaseScalar) -> Vec<Vec<BaseScalar>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![zero.clone(); m]; n];
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] = out[i][j].add(&a[i][k].mul(&bk[j]));
            }
        }
    }
    out
}

/// Trace of a finite-potent operator through the reduction to a finite box of monomials.
pub fn finite_potent_trace(phi: &OperatorExpr) -> Result<FiniteTrace> {
    let n = phi.depth();
    let field = phi.field();
    let kind = field.base();
    let Some(windows) = reduction_windows(phi)? else {
        return Ok(FiniteTrace { trace: kind.zero(), potency: 1, stable_rank: 0, windows: vec![(0, 0); n], matrix: vec![] });
    };
    let mut boxes: Vec<Vec<i64>> = vec![vec![]];
    for &(lo, hi) in &windows {
        boxes = boxes.into_iter().flat_map(|p| (lo..hi).map(move |e| [p.clone(), vec![e]].concat())).collect();
    }
    if windows.iter().any(|(lo, hi)| lo >= hi) {
        boxes.clear();
    }
    let deg = field.degree();
    let dim = boxes.len() * deg;
    let mut matrix = vec![vec![kind.zero(); dim]; dim];
    for (ci, e) in boxes.iter().enumerate() {
        for j in 0..deg {
            let x = Series::monomial(&field, e, ExtScalar::generator_power(&field, j));
            let y = phi.apply(&x)?;
            for (ri, e2) in boxes.iter().enumerate() {
                let c = y.coefficient_at(e2)?;
                for (i, v) in c.coeffs().iter().enumerate().take(deg) {
                    matrix[ri * deg + i][ci * deg + j] = v.clone();
                }
            }
        }
    }
    let mut trace = kind.zero();
    for (i, row) in matrix.iter().enumerate() {
        trace = trace.add(&row[i]);
    }
    let zero = kind.zero();
    let mut power = matrix.clone();
    let mut r = rank(kind, power.clone());
    let mut q = 1;
    loop {
        let next = mat_mul(&power, &matrix, &zero);
        let rn = rank(kind, next.clone());
        if rn == r {
            break;
        }
        power = next;
        r = rn;
        q += 1;
    }
    Ok(FiniteTrace { trace, potency: q, stable_rank: r, windows, matrix })
}

#[derive(Clone, Debug)]
pub struct TargetReport {
    pub target: Target,
    /// Replay check counts, or the reason certification failed.
    pub under_sigma: std::result::Result<usize, String>,
    pub under_sigma_prime: std::result::Result<usize, String>,
}

impl TargetReport {
    pub fn agree(&self) -> bool {
        self.under_sigma.is_ok() == self.under_sigma_prime.is_ok()
    }
}

#[derive(Clone, Debug)]
pub struct LiftingReport {
    pub targets: Vec<TargetReport>,
}

impl LiftingReport {
    pub fn agree(&self) -> bool {
        self.targets.iter().all(TargetReport::agree)
    }

    pub fn to_json(&self) -> Value {
        let side = |r: &std::result::Result<usize, String>| match r {
            Ok(c) => json!({ "certified": true, "checks": c }),
            Err(e) => json!({ "certified": false, "reason": e }),
        };
        json!({
            "agree": self.agree(),
            "targets": self.targets.iter().map(|t| json!({
                "target": t.target.label(),
                "sigma": side(&t.under_sigma),
                "sigma_prime": side(&t.under_sigma_prime),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Certifies and replays `φ` with quotient coordinates from `σ` and from `σ'`.
pub fn verify_lifting_independence(
    phi: &OperatorExpr,
    sigma: &LiftingSystem,
    sigma_prime: &LiftingSystem,
    targets: &[Target],
    ladder: usize,
) -> LiftingReport {
    let run = |s: &LiftingSystem, t: Target| -> std::result::Result<usize, String> {
        let opts = CertifyOptions { ladder, quotient: Some(s.clone()), ..Default::default() };
        let c = certify_with(phi, t, &opts).map_err(|e| e.to_string())?;
        c.replay(phi, 10, 0x11f7).map_err(|e| e.to_string())
    };
    let targets = targets
        .iter()
        .map(|&t| TargetReport { target: t, under_sigma: run(sigma, t), under_sigma_prime: run(sigma_prime, t) })
        .collect();
    LiftingReport { targets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::BaseKind;

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    fn f5() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Prime(5))
    }

    fn m(f: &Arc<ExtField>, e: &[i64], c: i64) -> Series {
        Series::monomial(f, e, ExtScalar::from_i64(f, c))
    }

    #[test]
    fn basic_application() {
        let f = q();
        let t = Series::gen(&f, 1, 1);
        let mt = Op::mul_by(t.clone()).unwrap();
        assert_eq!(mt.apply(&t.pow(-1).unwrap()).unwrap(), Series::one(&f, 1));
        let p = Op::proj(&f, 1, 1, Cut::Ge(0), LiftingSystem::standard(1)).unwrap();
        let x = m(&f, &[-2], 1).add(&m(&f, &[0], 3)).add(&t);
        assert_eq!(p.apply(&x).unwrap(), m(&f, &[0], 3).add(&t));
        let d = Op::derivation(&f, 1, 1).unwrap();
        let c = Op::compose(d, mt).unwrap();
        assert_eq!(c.apply(&Series::one(&f, 1)).unwrap(), Series::one(&f, 1));
    }

    #[test]
    fn char_p_derivations_are_rejected() {
        assert!(matches!(Op::derivation(&f5(), 1, 1), Err(Error::CharacteristicObstruction(_))));
    }

    #[test]
    fn level_one_certificates() {
        let f = q();
        let t = Series::gen(&f, 1, 1);
        let c = certify(&Op::mul_by(t).unwrap(), Target::E).unwrap();
        assert_eq!(c.band, -1);
        c.replay(&Op::mul_by(Series::gen(&f, 1, 1)).unwrap(), 20, 1).unwrap();
        let phi2 = Op::proj(&f, 1, 1, Cut::Lt(0), LiftingSystem::standard(1)).unwrap();
        let c2 = certify(&phi2, Target::Ideal(1, 2)).unwrap();
        assert!(matches!(c2.evidence, Evidence::Kernel(0)));
        assert!(c2.replay(&phi2, 20, 2).unwrap() > 0);
        assert!(certify(&phi2, Target::Ideal(1, 1)).is_err());
        let d = Op::derivation(&f, 1, 1).unwrap();
        assert_eq!(certify(&d, Target::E).unwrap().band, 1);
    }

    #[test]
    fn level_two_decomposition() {
        let f = q();
        let k = TlfDescriptor::new(2, f.clone());
        let dec = decompose_identity(&k, 2, &LiftingSystem::standard(2)).unwrap();
        let x = m(&f, &[-1, -1], 1).add(&m(&f, &[1, 1], 1));
        assert_eq!(dec.phi1.apply(&x).unwrap(), m(&f, &[1, 1], 1));
        assert_eq!(dec.phi2.apply(&x).unwrap(), m(&f, &[-1, -1], 1));
        dec.cert1.replay(&dec.phi1, 10, 3).unwrap();
        dec.cert2.replay(&dec.phi2, 10, 4).unwrap();
    }

    #[test]
    fn cubical_examples() {
        let f = f5();
        let k = TlfDescriptor::new(2, f.clone());
        let ps = cubical_projectors(&k, &LiftingSystem::standard(2)).unwrap();
        assert_eq!(ps.len(), 4);
        let x = m(&f, &[-1, 1], 1);
        let get = |e: &[u8]| &ps.iter().find(|(k, _)| k == e).unwrap().1;
        assert!(get(&[1, 1]).apply(&x).unwrap().is_exact_zero());
        assert_eq!(get(&[2, 1]).apply(&x).unwrap(), x);
        for y in probe_set(&f, 2, 10, 5) {
            let mut acc = Series::zero(&f, 2);
            for (_, p) in &ps {
                acc = acc.add(&p.apply(&y).unwrap());
            }
            assert_eq!(acc, y);
        }
    }

    #[test]
    fn finite_traces() {
        let f = f5();
        let one = Series::one(&f, 1);
        let t = Series::gen(&f, 1, 1);
        let idem = Op::finite_rank(&f, 1, vec![(vec![0], one.clone())]).unwrap();
        assert!(finite_potent_trace(&idem).unwrap().trace.is_one());
        let nil = Op::finite_rank(&f, 1, vec![(vec![0], t.clone())]).unwrap();
        assert!(finite_potent_trace(&nil).unwrap().trace.is_zero());
        let s = LiftingSystem::standard(1);
        let p03 = Op::compose(
            Op::proj(&f, 1, 1, Cut::Ge(0), s.clone()).unwrap(),
            Op::proj(&f, 1, 1, Cut::Lt(3), s).unwrap(),
        )
        .unwrap();
        let phi = Op::compose(p03.clone(), Op::compose(Op::mul_by(one.add(&t)).unwrap(), p03).unwrap()).unwrap();
        let tr = finite_potent_trace(&phi).unwrap();
        assert_eq!(tr.trace, f.base().from_i64(3));
        assert_eq!(tr.dim(), 3);
    }

    #[test]
    fn tate_commutator_trace() {
        let f = q();
        let t = Series::gen(&f, 1, 1);
        let op = tate_commutator(&t.pow(-1).unwrap(), &t, 0).unwrap();
        assert!(finite_potent_trace(&op).unwrap().trace.is_one());
        let op = tate_commutator(&t.pow(2).unwrap(), &t.pow(-2).unwrap(), 0).unwrap();
        assert_eq!(finite_potent_trace(&op).unwrap().trace, f.base().from_i64(-2));
        let a = m(&f, &[-2], 3).add(&m(&f, &[1], 1)).add(&m(&f, &[0], 2));
        let b = m(&f, &[2], 1).add(&m(&f, &[-1], -1));
        let op = tate_commutator(&a, &b, 1).unwrap();
        assert_eq!(finite_potent_trace(&op).unwrap().trace, crate::residue::tate_residue_dim1(&a, &b).unwrap());
    }

    #[test]
    fn lifting_independence_under_twist() {
        let f = q();
        let k = TlfDescriptor::new(2, f.clone());
        let std = LiftingSystem::standard(2);
        let (phi1, _) = decomposition_ops(&f, 2, 2, &std).unwrap();
        let tw = LiftingSpec::twisted(&k, 1, 2, Series::one(&f, 1), 4).unwrap();
        let sp = LiftingSystem::standard(2).with_level(1, tw);
        let rep = verify_lifting_independence(&phi1, &std, &sp, &[Target::Ideal(2, 1)], 2);
        assert!(rep.agree(), "{:?}", rep.to_json());
        assert!(rep.targets[0].under_sigma_prime.is_ok(), "{:?}", rep.to_json());
    }

    #[test]
    fn json_roundtrip() {
        let f = q();
        let k = TlfDescriptor::new(2, f.clone());
        let ps = cubical_projectors(&k, &LiftingSystem::standard(2)).unwrap();
        for (_, p) in ps {
            assert_eq!(Op::from_json(&k, &p.to_json()).unwrap(), p);
        }
        let d = Op::derivation(&f, 2, 2).unwrap();
        let fr = Op::finite_rank(&f, 2, vec![(vec![0, 1], m(&f, &[1, 0], 2))]).unwrap();
        let e = Op::add(d, fr).unwrap();
        assert_eq!(Op::from_json(&k, &e.to_json()).unwrap(), e);
    }
}
