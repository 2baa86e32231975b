//! Linear differential operators `sum_a c_a * d^a` with series coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::scalars::{ExtField, ExtScalar};
use crate::series::Series;

/// Acts on series of depth `depth`; multi-indices have one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOperator {
    field: Arc<ExtField>,
    depth: usize,
    terms: BTreeMap<Vec<u32>, Series>,
}

fn binom(n: u32, k: u32) -> i64 {
    let mut acc: i64 = 1;
    for i in 0..k as i64 {
        acc = acc * (n as i64 - i) / (i + 1);
    }
    acc
}

impl DiffOperator {
    pub fn zero(field: &Arc<ExtField>, depth: usize) -> Self {
        DiffOperator { field: field.clone(), depth, terms: BTreeMap::new() }
    }

    pub fn identity(field: &Arc<ExtField>, depth: usize) -> Self {
        Self::from_terms(field, depth, vec![(vec![0; depth], Series::one(field, depth))])
    }

    /// `c * d_axis` with `axis` 1-based among the operator's variables.
    pub fn derivation(field: &Arc<ExtField>, depth: usize, axis: usize, c: Series) -> Self {
        let mut a = vec![0; depth];
        a[axis - 1] = 1;
        Self::from_terms(field, depth, vec![(a, c)])
    }

    pub fn from_terms(field: &Arc<ExtField>, depth: usize, terms: Vec<(Vec<u32>, Series)>) -> Self {
        let mut op = Self::zero(field, depth);
        for (a, c) in terms {
            op.add_term(a, c);
        }
        op
    }

    fn add_term(&mut self, a: Vec<u32>, c: Series) {
        assert_eq!(a.len(), self.depth);
        let merged = match self.terms.remove(&a) {
            Some(old) => old.add(&c),
            None => c,
        };
        if !merged.is_exact_zero() {
            self.terms.insert(a, merged);
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Series> {
        &self.terms
    }

    pub fn order(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(Series::is_zero_within_precision)
    }

    pub fn apply(&self, x: &Series) -> Series {
        let mut acc = Series::zero(&self.field, self.depth);
        for (a, c) in &self.terms {
            let mut y = x.clone();
            for (axis, &k) in a.iter().enumerate() {
                for _ in 0..k {
                    y = y.derivative(axis + 1);
                }
            }
            acc = acc.add(&c.mul(&y));
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&ExtScalar::from_i64(&self.field, -1))
    }

    pub fn scale(&self, s: &ExtScalar) -> Self {
        Self::from_terms(
            &self.field,
            self.depth,
            self.terms.iter().map(|(a, c)| (a.clone(), c.scale(s))).collect(),
        )
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self::zero(&self.field, self.depth);
        for (alpha, a) in &self.terms {
            for (beta, b) in &other.terms {
                // a d^alpha (b d^beta) = a * sum_{g <= alpha} C(alpha, g) d^g(b) d^{alpha - g + beta}
                for g in sub_indices(alpha) {
                    let mut db = b.clone();
                    let mut coef = 1i64;
                    for (axis, (&gi, &ai)) in g.iter().zip(alpha).enumerate() {
                        coef *= binom(ai, gi);
                        for _ in 0..gi {
                            db = db.derivative(axis + 1);
                        }
                    }
                    let idx: Vec<u32> = alpha.iter().zip(&g).zip(beta).map(|((a, g), b)| a - g + b).collect();
                    out.add_term(idx, a.mul(&db).mul_int(coef));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(a, c)| json!({ "d": a, "coeff": c.to_json() }))
            .collect();
        json!({ "order": self.order(), "terms": terms })
    }

    /// Pretty form with variables `t{first}, ...`.
    pub fn display_from(&self, first: usize) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(a, c)| {
                let d: Vec<String> = a
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("d{}", first + i) } else { format!("d{}^{k}", first + i) })
                    .collect();
                let cs = c.display_from(first);
                match (d.is_empty(), cs.contains(' ')) {
                    (true, _) => cs,
                    (false, false) => format!("{cs}*{}", d.join("*")),
                    (false, true) => format!("({cs})*{}", d.join("*")),
                }
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_from(1))
    }
}

/// All multi-indices `g <= alpha` componentwise.
pub fn sub_indices(alpha: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=a).map(move |g| {
                    let mut p = prefix.clone();
                    p.push(g);
                    p
                })
            })
            .collect();
    }
    out
}

/// All multi-indices of the given length with total degree at most `d`.
pub fn indices_up_to(len: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                let used: u32 = prefix.iter().sum();
                (0..=d - used).map(move |g| {
                    let mut p = prefix.clone();
                    p.push(g);
                    p
                })
            })
            .collect();
    }
    out.sort_by_key(|a| (a.iter().sum::<u32>(), a.clone()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::BaseKind;

    #[test]
    fn composition_matches_application() {
        let f = ExtField::trivial(BaseKind::Rational);
        let t = Series::gen(&f, 1, 1);
        let d = DiffOperator::derivation(&f, 1, 1, t.clone());
        let dd = d.compose(&d);
        // (t d)^2 = t^2 d^2 + t d
        let expect = DiffOperator::from_terms(&f, 1, vec![(vec![2], t.mul(&t)), (vec![1], t.clone())]);
        assert_eq!(dd, expect);
        let x = t.pow(5).unwrap().add(&t.pow(-2).unwrap());
        assert_eq!(dd.apply(&x), d.apply(&d.apply(&x)));
    }

    #[test]
    fn index_enumeration() {
        assert_eq!(indices_up_to(2, 1), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(sub_indices(&[1, 2]).len(), 6);
    }
}
