//! The valuation tower of `k'((t_1,...,t_n))`: uniformizer systems,
//! parametrizations, systems of liftings and change-of-lifting matrices.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::diffop::{indices_up_to, DiffOperator};
use crate::error::{precision, Error, Result};
use crate::scalars::{factorial, ExtField, ExtScalar};
use crate::series::{substitute, Series, DEFAULT_WINDOW};

/// An `n`-dimensional standard field `k'((t_1,...,t_n))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlfDescriptor {
    pub n: usize,
    pub field: Arc<ExtField>,
    pub window: i64,
}

impl TlfDescriptor {
    pub fn new(n: usize, field: Arc<ExtField>) -> Self {
        TlfDescriptor { n, field, window: DEFAULT_WINDOW }
    }

    pub fn with_window(mut self, w: i64) -> Self {
        self.window = w;
        self
    }

    pub fn characteristic(&self) -> u32 {
        self.field.characteristic()
    }

    pub fn gen(&self, i: usize) -> Series {
        Series::gen(&self.field, self.n, i)
    }

    pub fn gens(&self) -> Vec<Series> {
        (1..=self.n).map(|i| self.gen(i)).collect()
    }

    pub fn one(&self) -> Series {
        Series::one(&self.field, self.n)
    }

    pub fn zero(&self) -> Series {
        Series::zero(&self.field, self.n)
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.field.to_json();
        v["n"] = json!(self.n);
        v["window"] = json!(self.window);
        v
    }
}

/// A validated system `(a_1, ..., a_n)` with `v(a_i) = (0,...,0,1,*,...,*)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformizerSystem {
    a: Vec<Series>,
    valuations: Vec<Vec<i64>>,
}

impl UniformizerSystem {
    pub fn elements(&self) -> &[Series] {
        &self.a
    }

    pub fn valuations(&self) -> &[Vec<i64>] {
        &self.valuations
    }
}

pub fn validate_uniformizers(k: &TlfDescriptor, a: &[Series]) -> Result<UniformizerSystem> {
    if a.len() != k.n {
        return Err(Error::Domain(format!("expected {} uniformizers, got {}", k.n, a.len())));
    }
    let mut valuations = Vec::with_capacity(k.n);
    for (i, s) in a.iter().enumerate() {
        if s.depth() != k.n {
            return Err(Error::Domain(format!("uniformizer {} has depth {}", i + 1, s.depth())));
        }
        let v = s
            .valuation()
            .map_err(|e| Error::NotUniformizers { level: i + 1, reason: e.to_string() })?;
        crate::series::check_uniformizer_valuation(&v, i)?;
        valuations.push(v);
    }
    Ok(UniformizerSystem { a: a.to_vec(), valuations })
}

/// Mutually inverse substitutions `t -> a` and `t -> r` with `a(r) = t` within window.
#[derive(Clone, Debug)]
pub struct SubstitutionIso {
    pub forward: Vec<Series>,
    pub inverse: Vec<Series>,
    pub window: i64,
}

impl SubstitutionIso {
    pub fn apply_forward(&self, x: &Series) -> Result<Series> {
        substitute(x, &self.forward, self.window)
    }

    pub fn apply_inverse(&self, x: &Series) -> Result<Series> {
        substitute(x, &self.inverse, self.window)
    }
}

pub fn parametrize(k: &TlfDescriptor, a: &UniformizerSystem) -> Result<SubstitutionIso> {
    let n = k.n;
    let w = k.window;
    let f = &k.field;
    let t = k.gens();
    if a.a == t {
        return Ok(SubstitutionIso { forward: t.clone(), inverse: t, window: w });
    }
    // monomial approximation: leading terms c_i t^{M_i}, M upper unitriangular
    let lead: Vec<(Vec<i64>, ExtScalar)> = a
        .a
        .iter()
        .zip(&a.valuations)
        .map(|(s, v)| Ok((v.clone(), s.coefficient_at(v)?)))
        .collect::<Result<_>>()?;
    let minv = unitriangular_inverse(&lead.iter().map(|(m, _)| m.clone()).collect::<Vec<_>>());
    let mut d: Vec<ExtScalar> = vec![ExtScalar::one(f); n];
    for i in (0..n).rev() {
        let mut acc = lead[i].1.inv()?;
        for j in i + 1..n {
            acc = acc.mul(&scalar_pow(&d[j], -lead[i].0[j])?);
        }
        d[i] = acc;
    }
    let mut r: Vec<Series> = (0..n).map(|i| Series::monomial(f, &minv[i], d[i].clone())).collect();
    let jac: Vec<Vec<Series>> = a.a.iter().map(|s| (1..=n).map(|j| s.derivative(j)).collect()).collect();
    let max_iter = 2 * (64 - (w.max(1) as u64).leading_zeros()) as usize + 6;
    for _ in 0..max_iter {
        let residual: Vec<Series> = a
            .a
            .iter()
            .zip(&t)
            .map(|(s, ti)| Ok(substitute(s, &r, w)?.sub(ti)))
            .collect::<Result<_>>()?;
        if residual.iter().all(Series::is_zero_within_precision) {
            break;
        }
        let jr: Vec<Vec<Series>> = jac
            .iter()
            .map(|row| row.iter().map(|e| substitute(e, &r, w)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let delta = solve_series_system(jr, residual, w)?;
        r = r.iter().zip(&delta).map(|(ri, di)| ri.sub(di)).collect();
    }
    for (s, ti) in a.a.iter().zip(&t) {
        let back = substitute(s, &r, w)?;
        if !back.eq_within(ti) || back.window().is_some_and(|win| win <= 0) {
            return Err(precision("compositional inverse did not converge within the window"));
        }
    }
    Ok(SubstitutionIso { forward: a.a.clone(), inverse: r, window: w })
}

fn scalar_pow(x: &ExtScalar, k: i64) -> Result<ExtScalar> {
    if k >= 0 {
        Ok(x.pow(k as u64))
    } else {
        Ok(x.inv()?.pow(k.unsigned_abs()))
    }
}

/// Inverse of an upper unitriangular integer matrix given by rows.
fn unitriangular_inverse(m: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = m.len();
    let mut inv = vec![vec![0i64; n]; n];
    for i in (0..n).rev() {
        inv[i][i] = 1;
        for j in i + 1..n {
            // row i of inverse: inv[i] = e_i - sum_{k>i} m[i][k] inv[k]
            let mut acc = 0;
            for k in i + 1..n {
                acc -= m[i][k] * inv[k][j];
            }
            inv[i][j] = acc;
        }
    }
    inv
}

/// Solves `J x = b` over the series ring by Gaussian elimination.
pub fn solve_series_system(mut j: Vec<Vec<Series>>, mut b: Vec<Series>, w: i64) -> Result<Vec<Series>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| j[r][col].inv_with(w).is_ok())
            .ok_or_else(|| precision("Jacobian has no invertible pivot"))?;
        j.swap(piv, col);
        b.swap(piv, col);
        let pinv = j[col][col].inv_with(w)?;
        for r in 0..n {
            if r == col || j[r][col].is_exact_zero() {
                continue;
            }
            let factor = j[r][col].mul(&pinv);
            for c in col..n {
                let v = factor.mul(&j[col][c]);
                j[r][c] = j[r][c].sub(&v);
            }
            let v = factor.mul(&b[col]);
            b[r] = b[r].sub(&v);
        }
    }
    (0..n).map(|i| Ok(b[i].mul(&j[i][i].inv_with(w)?))).collect()
}

/// A random exact uniformizer system close to `(t_1, ..., t_n)`.
pub fn random_uniformizer_system<R: Rng + ?Sized>(k: &TlfDescriptor, rng: &mut R) -> UniformizerSystem {
    let f = &k.field;
    let n = k.n;
    let nonzero = |rng: &mut R| loop {
        let c = ExtScalar::random(f, rng);
        if !c.is_zero() {
            return c;
        }
    };
    let mut a = Vec::with_capacity(n);
    for i in 0..n {
        let mut lead = vec![0i64; n];
        lead[i] = 1;
        let mut terms = vec![(lead.clone(), nonzero(rng))];
        for _ in 0..rng.gen_range(1..=3) {
            // a monomial lexicographically above the leading one, t_1-order >= 0
            let mut m = vec![0i64; n];
            let pivot = rng.gen_range(0..n);
            for (l, e) in m.iter_mut().enumerate() {
                *e = match l.cmp(&pivot) {
                    std::cmp::Ordering::Less => lead[l],
                    std::cmp::Ordering::Equal => lead[l] + rng.gen_range(1..=2),
                    std::cmp::Ordering::Greater => rng.gen_range(-2..=2),
                };
            }
            terms.push((m, ExtScalar::random(f, rng)));
        }
        a.push(Series::from_terms(f, n, &terms));
    }
    validate_uniformizers(k, &a).expect("constructed system is valid")
}

/// `sigma_i` at level `i`: a section `k_i -> O_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiftingSpec {
    Standard,
    /// `sigma(x) = sum_{j <= depth} t_i^j D^j(x) / j!` with `D = c * d/dt_axis`.
    Twisted { axis: usize, c: Series, depth: u32 },
}

impl LiftingSpec {
    /// Validates a twisted lifting at `level` of an `n`-dimensional field.
    pub fn twisted(k: &TlfDescriptor, level: usize, axis: usize, c: Series, depth: u32) -> Result<Self> {
        if level == 0 || level > k.n || axis <= level || axis > k.n {
            return Err(Error::Domain(format!(
                "a level-{level} lifting twists along t_j with {level} < j <= {}",
                k.n
            )));
        }
        if c.depth() != k.n - level {
            return Err(Error::Domain(format!("twist coefficient must have depth {}", k.n - level)));
        }
        let p = k.characteristic();
        if p != 0 && depth >= p {
            return Err(Error::CharacteristicObstruction(format!(
                "truncation depth {depth} needs {depth}! invertible, characteristic is {p}"
            )));
        }
        Ok(LiftingSpec::Twisted { axis, c, depth })
    }

    /// Applies the lifting at `level` to a depth-`(n - level)` series.
    pub fn apply(&self, level: usize, x: &Series) -> Result<Series> {
        let f = x.field();
        let d = x.depth() + 1;
        match self {
            LiftingSpec::Standard => Ok(Series::build(f, d, 0, None, vec![x.clone()])),
            LiftingSpec::Twisted { axis, c, depth } => {
                let rel = axis - level;
                let mut coeffs = Vec::with_capacity(*depth as usize + 1);
                let mut cur = x.clone();
                for j in 0..=*depth {
                    let fac = factorial(f.base(), j).ok_or_else(|| {
                        Error::CharacteristicObstruction(format!("{j}! vanishes in characteristic {}", f.characteristic()))
                    })?;
                    let fac_inv = ExtScalar::from_base(f, fac.inv()?);
                    coeffs.push(cur.scale(&fac_inv));
                    cur = c.mul(&cur.derivative(rel));
                }
                Ok(Series::build(f, d, 0, Some(*depth as i64 + 1), coeffs))
            }
        }
    }

    pub fn to_json(&self, level: usize) -> Value {
        match self {
            LiftingSpec::Standard => json!({ "level": level, "kind": "standard" }),
            LiftingSpec::Twisted { axis, c, depth } => json!({
                "level": level, "kind": "twisted", "axis": axis, "c": c.to_json(), "depth": depth
            }),
        }
    }

    pub fn from_json(k: &TlfDescriptor, v: &Value) -> Result<(usize, Self)> {
        let bad = || Error::Domain("lifting JSON needs \"level\" and \"kind\"".into());
        let level = v.get("level").and_then(Value::as_u64).ok_or_else(bad)? as usize;
        match v.get("kind").and_then(Value::as_str).ok_or_else(bad)? {
            "standard" => Ok((level, LiftingSpec::Standard)),
            "twisted" => {
                let axis = v.get("axis").and_then(Value::as_u64).ok_or_else(bad)? as usize;
                let depth = v.get("depth").and_then(Value::as_u64).ok_or_else(bad)? as u32;
                let c = match v.get("c") {
                    Some(c) => Series::from_json(&k.field, k.n.saturating_sub(level), c)?,
                    None => Series::one(&k.field, k.n.saturating_sub(level)),
                };
                Ok((level, LiftingSpec::twisted(k, level, axis, c, depth)?))
            }
            _ => Err(bad()),
        }
    }
}

/// One lifting per level `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftingSystem {
    pub levels: Vec<LiftingSpec>,
}

impl LiftingSystem {
    pub fn standard(n: usize) -> Self {
        LiftingSystem { levels: vec![LiftingSpec::Standard; n] }
    }

    pub fn with_level(mut self, level: usize, spec: LiftingSpec) -> Self {
        self.levels[level - 1] = spec;
        self
    }

    pub fn level(&self, i: usize) -> &LiftingSpec {
        &self.levels[i - 1]
    }

    pub fn is_standard(&self) -> bool {
        self.levels.iter().all(|l| *l == LiftingSpec::Standard)
    }

    /// The system on `k_1(K)` obtained by dropping the first level.
    pub fn residual(&self) -> LiftingSystem {
        LiftingSystem { levels: self.levels[1..].to_vec() }
    }

    /// Shifts twist axes down by one, for use on `k_1(K)` as a standalone field.
    pub fn residual_reindexed(&self) -> LiftingSystem {
        LiftingSystem {
            levels: self.levels[1..]
                .iter()
                .map(|l| match l {
                    LiftingSpec::Standard => LiftingSpec::Standard,
                    LiftingSpec::Twisted { axis, c, depth } => {
                        LiftingSpec::Twisted { axis: axis - 1, c: c.clone(), depth: *depth }
                    }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.levels.iter().enumerate().map(|(i, l)| l.to_json(i + 1)).collect())
    }
}

/// `x ≡ sum_q sigma(b_q) a^q` for `x` in `k_{i-1}` (top variable `t_i`).
pub fn sigma_expand(x: &Series, spec: &LiftingSpec, level: usize, a: &Series) -> Result<Vec<(Series, i64)>> {
    if x.depth() == 0 {
        return Err(Error::Domain("expansion needs a series of positive depth".into()));
    }
    let mut out = Vec::new();
    let mut rest = x.clone();
    let Some(l) = x.as_laurent() else { unreachable!() };
    let mut q = l.order();
    loop {
        let rl = rest.as_laurent().expect("positive depth");
        if rl.coeffs().is_empty() && rl.prec().is_none() {
            break;
        }
        if rl.prec().is_some_and(|p| q >= p) {
            break;
        }
        if rl.prec().is_none() && q >= rl.order() + rl.coeffs().len() as i64 {
            break;
        }
        let aq = a.pow(q)?;
        let lead = aq.coeff_series(q)?;
        let cq = rest.coeff_series(q)?;
        if !cq.is_exact_zero() {
            let bq = if lead.as_scalar().is_some_and(|s| s.is_one()) { cq } else { cq.mul(&lead.inv()?) };
            let lifted = spec.apply(level, &bq)?.mul(&aq);
            rest = rest.sub(&lifted);
            out.push((bq, q));
        }
        q += 1;
    }
    Ok(out)
}

pub fn reassemble(parts: &[(Series, i64)], spec: &LiftingSpec, level: usize, a: &Series) -> Result<Series> {
    let mut acc: Option<Series> = None;
    for (b, q) in parts {
        let term = spec.apply(level, b)?.mul(&a.pow(*q)?);
        acc = Some(match acc {
            None => term,
            Some(s) => s.add(&term),
        });
    }
    Ok(acc.unwrap_or_else(|| Series::zero(a.field(), a.depth())))
}

/// `A = O_i / m_i^{l+1}`; elements are series in `t_i, ..., t_n` truncated at `t_i^{l+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArtinianQuotient {
    pub level: usize,
    pub l: u32,
}

impl ArtinianQuotient {
    pub fn reduce(&self, x: &Series) -> Result<Series> {
        if !x.is_zero_within_precision() && x.order() < 0 {
            return Err(Error::Domain("element lies outside the valuation ring".into()));
        }
        Ok(x.truncate(self.l as i64 + 1))
    }

    pub fn mul(&self, x: &Series, y: &Series) -> Result<Series> {
        self.reduce(&x.mul(y))
    }
}

/// The matrix `gamma` with `sigma(b) m_i = sum_j sigma'(gamma_ij(b)) m_j` in `A`.
#[derive(Clone, Debug)]
pub struct ChangeOfLifting {
    pub entries: Vec<Vec<DiffOperator>>,
    /// Certified differential-operator order of each entry.
    pub orders: Vec<Vec<u32>>,
    pub inverse: Vec<Vec<DiffOperator>>,
    pub probes_checked: usize,
}

impl ChangeOfLifting {
    pub fn is_unit_upper_triangular(&self) -> bool {
        let r = self.entries.len();
        let f_depth = self.entries[0][0].depth();
        (0..r).all(|i| {
            (0..r).all(|j| {
                let e = &self.entries[i][j];
                if i == j {
                    e.terms().len() == 1
                        && e.terms().get(&vec![0; f_depth]).and_then(Series::as_scalar).is_some_and(|s| s.is_one())
                } else if j < i {
                    e.is_zero()
                } else {
                    true
                }
            })
        })
    }

    pub fn to_json(&self) -> Value {
        let show = |m: &Vec<Vec<DiffOperator>>| -> Value {
            Value::Array(
                m.iter()
                    .map(|row| Value::Array(row.iter().map(|e| Value::String(e.display_from(2))).collect()))
                    .collect(),
            )
        };
        json!({
            "matrix": show(&self.entries),
            "orders": self.orders,
            "inverse": show(&self.inverse),
            "unit_upper_triangular": self.is_unit_upper_triangular(),
            "probes_checked": self.probes_checked,
        })
    }
}

/// Coordinates of `y` in `A` over the `sigma`-structure on the filtered basis.
fn express(a: &ArtinianQuotient, y: &Series, spec: &LiftingSpec, basis: &[Series]) -> Result<Vec<Series>> {
    let mut rest = a.reduce(y)?;
    let mut out = Vec::with_capacity(basis.len());
    for (j, m) in basis.iter().enumerate() {
        let lead = m.coeff_series(j as i64)?;
        let cj = rest.coeff_series(j as i64)?;
        let bj = cj.mul(&lead.inv()?);
        let lifted = spec.apply(a.level, &bj)?;
        rest = a.reduce(&rest.sub(&lifted.mul(m)))?;
        out.push(bj);
    }
    if !rest.is_zero_within_precision() {
        return Err(Error::BasisNotFiltered("basis does not span the quotient".into()));
    }
    Ok(out)
}

fn check_filtered(a: &ArtinianQuotient, basis: &[Series]) -> Result<()> {
    if basis.len() != a.l as usize + 1 {
        return Err(Error::BasisNotFiltered(format!("expected {} basis elements, got {}", a.l + 1, basis.len())));
    }
    for (j, m) in basis.iter().enumerate() {
        let v = m.valuation().map_err(|e| Error::BasisNotFiltered(e.to_string()))?;
        if v[0] != j as i64 {
            return Err(Error::BasisNotFiltered(format!(
                "element {j} has t-adic degree {}, expected {j}",
                v[0]
            )));
        }
    }
    Ok(())
}

/// The filtered basis `1, t_i, ..., t_i^l`.
pub fn monomial_basis(k: &TlfDescriptor, a: &ArtinianQuotient) -> Vec<Series> {
    let d = k.n - a.level + 1;
    (0..=a.l as i64)
        .map(|j| {
            let mut e = vec![0; d];
            e[0] = j;
            Series::monomial(&k.field, &e, ExtScalar::one(&k.field))
        })
        .collect()
}

fn probe_set(k: &TlfDescriptor, depth: usize, seed: u64) -> Vec<Series> {
    let f = &k.field;
    let mut probes = Vec::new();
    let range = -2i64..=3;
    let mut idx: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..depth {
        idx = idx
            .into_iter()
            .flat_map(|p| {
                range.clone().map(move |e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    for e in idx {
        probes.push(Series::monomial(f, &e, ExtScalar::one(f)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        probes.push(Series::random(f, depth, -2, 3, 0.4, &mut rng));
    }
    probes
}

/// Iterated commutator `[...[g, x_1], ..., x_r](b)` for a map `g`.
fn iterated_commutator(g: &dyn Fn(&Series) -> Result<Series>, xs: &[Series], b: &Series) -> Result<Series> {
    let r = xs.len();
    let mut acc = Series::zero(b.field(), b.depth());
    for mask in 0..(1u32 << r) {
        // terms: (-1)^{|S|} (prod_{S} x) g(prod_{not S} x * b)
        let mut inner = b.clone();
        let mut outer = Series::one(b.field(), b.depth());
        for (i, x) in xs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                outer = outer.mul(x);
            } else {
                inner = inner.mul(x);
            }
        }
        let term = outer.mul(&g(&inner)?);
        acc = if mask.count_ones() % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    Ok(acc)
}

/// `(M * N)_{ik} = sum_j N_jk ∘ M_ij`
fn op_matrix_product(m: &[Vec<DiffOperator>], n: &[Vec<DiffOperator>]) -> Vec<Vec<DiffOperator>> {
    let r = m.len();
    let f_depth = m[0][0].depth();
    let field = m[0][0].field().clone();
    (0..r)
        .map(|i| {
            (0..r)
                .map(|k| {
                    (0..r).fold(DiffOperator::zero(&field, f_depth), |acc, j| acc.add(&n[j][k].compose(&m[i][j])))
                })
                .collect()
        })
        .collect()
}

pub fn change_of_lifting_matrix(
    k: &TlfDescriptor,
    a: &ArtinianQuotient,
    sigma: &LiftingSpec,
    sigma_prime: &LiftingSpec,
    basis: &[Series],
) -> Result<ChangeOfLifting> {
    check_filtered(a, basis)?;
    for s in [sigma, sigma_prime] {
        if let LiftingSpec::Twisted { depth, .. } = s {
            if *depth < a.l {
                return Err(Error::Domain(format!(
                    "lifting truncated at depth {depth} is not multiplicative modulo t^{}",
                    a.l + 1
                )));
            }
        }
    }
    let r = a.l as usize + 1;
    let d = k.n - a.level;
    let f = &k.field;
    let p = k.characteristic();
    if p != 0 && r as u32 > p {
        return Err(Error::CharacteristicObstruction(format!(
            "order-{} operators cannot be read off monomials in characteristic {p}",
            r - 1
        )));
    }
    let gamma = |i: usize, b: &Series| -> Result<Vec<Series>> {
        let y = sigma.apply(a.level, b)?.mul(&basis[i]);
        express(a, &y, sigma_prime, basis)
    };
    let gamma_inv = |i: usize, b: &Series| -> Result<Vec<Series>> {
        let y = sigma_prime.apply(a.level, b)?.mul(&basis[i]);
        express(a, &y, sigma, basis)
    };
    // fit each entry as a differential operator of order <= r-1 on monomials
    let fit_idx = indices_up_to(d, (r - 1) as u32);
    let mut entries = vec![vec![DiffOperator::zero(f, d); r]; r];
    for (i, row) in entries.iter_mut().enumerate() {
        for beta in &fit_idx {
            let e: Vec<i64> = beta.iter().map(|&x| x as i64).collect();
            let mono = Series::monomial(f, &e, ExtScalar::one(f));
            let images = gamma(i, &mono)?;
            let mut bfact = ExtScalar::one(f);
            for &bk in beta {
                bfact = bfact.mul(&ExtScalar::from_base(f, factorial(f.base(), bk).expect("checked above")));
            }
            let bfact_inv = bfact.inv()?;
            for (j, img) in images.iter().enumerate() {
                let partial = row[j].apply(&mono);
                let c = img.sub(&partial).scale(&bfact_inv);
                if !c.is_exact_zero() {
                    row[j] = row[j].add(&DiffOperator::from_terms(f, d, vec![(beta.clone(), c)]));
                }
            }
        }
    }
    // replay the fit and certify orders on probes
    let probes = probe_set(k, d, 0x5eed);
    let mut mults: Vec<Series> = (1..=d).map(|i| Series::gen(f, d, i)).collect();
    mults.push(Series::one(f, d).add(&Series::gen(f, d, 1)));
    let mut orders = vec![vec![0u32; r]; r];
    for i in 0..r {
        for b in &probes {
            let images = gamma(i, b)?;
            for (j, img) in images.iter().enumerate() {
                if !entries[i][j].apply(b).eq_within(img) {
                    return Err(Error::NotCertifiable(format!(
                        "entry ({i},{j}) is not a differential operator of order <= {}",
                        r - 1
                    )));
                }
            }
        }
        for j in 0..r {
            let ord = entries[i][j].order();
            orders[i][j] = ord;
            let xs: Vec<Series> = (0..=ord).map(|s| mults[s as usize % mults.len()].clone()).collect();
            let g = |b: &Series| -> Result<Series> { Ok(gamma(i, b)?[j].clone()) };
            for b in probes.iter().take(8) {
                if !iterated_commutator(&g, &xs, b)?.is_zero_within_precision() {
                    return Err(Error::NotCertifiable(format!("entry ({i},{j}) fails the order-{ord} commutator test")));
                }
            }
        }
    }
    // Neumann inverse of the unipotent matrix
    let ident: Vec<Vec<DiffOperator>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { DiffOperator::identity(f, d) } else { DiffOperator::zero(f, d) }).collect())
        .collect();
    let minus_nil: Vec<Vec<DiffOperator>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { DiffOperator::zero(f, d) } else { entries[i][j].neg() }).collect())
        .collect();
    let mut inverse = ident.clone();
    let mut power = ident.clone();
    for _ in 1..r {
        power = op_matrix_product(&power, &minus_nil);
        inverse = (0..r).map(|i| (0..r).map(|j| inverse[i][j].add(&power[i][j])).collect()).collect();
    }
    let mut checked = 0;
    for b in &probes {
        for i in 0..r {
            let fwd = gamma(i, b)?;
            for kk in 0..r {
                let mut acc = Series::zero(f, d);
                for (j, gj) in fwd.iter().enumerate() {
                    acc = acc.add(&inverse[j][kk].apply(gj));
                }
                let expect = if i == kk { b.clone() } else { Series::zero(f, d) };
                if !acc.eq_within(&expect) {
                    return Err(Error::NotCertifiable("Neumann inverse does not invert on probes".into()));
                }
            }
            let direct = gamma_inv(i, b)?;
            for (kk, v) in direct.iter().enumerate() {
                if !inverse[i][kk].apply(b).eq_within(v) {
                    return Err(Error::NotCertifiable("Neumann inverse disagrees with the reverse change".into()));
                }
            }
            checked += 1;
        }
    }
    Ok(ChangeOfLifting { entries, orders, inverse, probes_checked: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::BaseKind;

    fn k2(c: u32) -> TlfDescriptor {
        TlfDescriptor::new(2, ExtField::trivial(BaseKind::from_char(c).unwrap()))
    }

    #[test]
    fn uniformizer_validation() {
        let k = k2(0);
        let (t1, t2) = (k.gen(1), k.gen(2));
        assert!(validate_uniformizers(&k, &[t1.clone(), t2.clone()]).is_ok());
        let e = validate_uniformizers(&k, &[t1.mul(&t1), t2.clone()]).unwrap_err();
        assert!(matches!(e, Error::NotUniformizers { level: 1, .. }));
        let e = validate_uniformizers(&k, &[t1.add(&t2), t2.clone()]).unwrap_err();
        assert!(matches!(e, Error::NotUniformizers { level: 1, .. }));
    }

    #[test]
    fn parametrize_identity_and_simple() {
        let k = k2(0);
        let (t1, t2) = (k.gen(1), k.gen(2));
        let id = parametrize(&k, &validate_uniformizers(&k, &k.gens()).unwrap()).unwrap();
        assert_eq!(id.apply_forward(&t1).unwrap(), t1);
        let s1 = t1.mul(&k.one().add(&t2));
        let sys = validate_uniformizers(&k, &[s1.clone(), t2.clone()]).unwrap();
        let iso = parametrize(&k, &sys).unwrap();
        assert_eq!(iso.apply_forward(&t1).unwrap(), s1);
        let back = iso.apply_inverse(&iso.apply_forward(&t1).unwrap()).unwrap();
        assert!(back.eq_within(&t1));
    }

    #[test]
    fn parametrize_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for c in [0, 5] {
            for n in [1, 2] {
                let k = TlfDescriptor::new(n, ExtField::trivial(BaseKind::from_char(c).unwrap())).with_window(6);
                for _ in 0..4 {
                    let sys = random_uniformizer_system(&k, &mut rng);
                    let iso = parametrize(&k, &sys).unwrap();
                    for _ in 0..3 {
                        let x = Series::random(&k.field, n, -1, 2, 0.5, &mut rng);
                        let y = iso.apply_inverse(&iso.apply_forward(&x).unwrap()).unwrap();
                        assert!(y.eq_within(&x), "roundtrip failed for {x}: {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn sigma_expansions() {
        let k = k2(0);
        let (t1, t2) = (k.gen(1), k.gen(2));
        let x = t1.add(&t2);
        let parts = sigma_expand(&x, &LiftingSpec::Standard, 1, &t1).unwrap();
        let one = Series::one(&k.field, 1);
        let t = Series::gen(&k.field, 1, 1);
        assert_eq!(parts, vec![(t.clone(), 0), (one.clone(), 1)]);
        assert_eq!(reassemble(&parts, &LiftingSpec::Standard, 1, &t1).unwrap(), x);

        let tw = LiftingSpec::twisted(&k, 1, 2, one.clone(), 1).unwrap();
        assert_eq!(tw.apply(1, &t).unwrap(), t2.add(&t1).truncate(2));
        let sq = tw.apply(1, &t.mul(&t)).unwrap();
        assert_eq!(sq, t2.mul(&t2).add(&t1.mul(&t2).mul_int(2)).truncate(2));
        let parts = sigma_expand(&t2, &tw, 1, &t1).unwrap();
        assert_eq!(parts[0], (t.clone(), 0));
        assert_eq!(parts[1], (one.neg(), 1));
        assert!(reassemble(&parts, &tw, 1, &t1).unwrap().eq_within(&t2));
    }

    #[test]
    fn twisted_depth_limited_in_char_p() {
        let k = k2(5);
        let one = Series::one(&k.field, 1);
        assert!(LiftingSpec::twisted(&k, 1, 2, one.clone(), 4).is_ok());
        assert!(matches!(
            LiftingSpec::twisted(&k, 1, 2, one, 5),
            Err(Error::CharacteristicObstruction(_))
        ));
    }

    #[test]
    fn change_of_lifting_is_unipotent() {
        for c in [5, 0] {
            let k = k2(c);
            let a = ArtinianQuotient { level: 1, l: 2 };
            let basis = monomial_basis(&k, &a);
            let one = Series::one(&k.field, 1);
            let tw = LiftingSpec::twisted(&k, 1, 2, one, 2).unwrap();
            let m = change_of_lifting_matrix(&k, &a, &LiftingSpec::Standard, &tw, &basis).unwrap();
            assert!(m.is_unit_upper_triangular());
            assert_eq!(m.orders[0][1], 1);
            assert_eq!(m.orders[0][2], 2);
            let minus_d = DiffOperator::derivation(&k.field, 1, 1, Series::from_i64(&k.field, 1, -1));
            assert_eq!(m.entries[0][1], minus_d);
            let half = ExtScalar::from_i64(&k.field, 2).inv().unwrap();
            let d2 = DiffOperator::from_terms(&k.field, 1, vec![(vec![2], Series::constant(&k.field, 1, half))]);
            assert_eq!(m.entries[0][2], d2);
            let same = change_of_lifting_matrix(&k, &a, &LiftingSpec::Standard, &LiftingSpec::Standard, &basis).unwrap();
            for (i, row) in same.entries.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    assert_eq!(e.is_zero(), i != j);
                }
            }
        }
    }

    #[test]
    fn unfiltered_basis_rejected() {
        let k = k2(0);
        let a = ArtinianQuotient { level: 1, l: 1 };
        let basis = vec![k.gen(1), k.one()];
        let e = change_of_lifting_matrix(&k, &a, &LiftingSpec::Standard, &LiftingSpec::Standard, &basis).unwrap_err();
        assert!(matches!(e, Error::BasisNotFiltered(_)));
    }
}
