use std::sync::Arc;

use tlf::bt_ops::{
    certify, cubical_projectors, decompose_identity, finite_potent_trace, OperatorExpr, Target,
};
use tlf::forms::{d_function, dlog, separate, SeparatedForm};
use tlf::geom::{enumerate_closed_points, global_residue_sum, irreducibles_up_to, local_expansion, ClosedPoint};
use tlf::lattices::{contains, find_refinement, induced_action, lattice_normal_form, quotient_module, Lattice};
use tlf::poly::Poly;
use tlf::residue::{counterexample_char0, res_tlf, tate_residue_dim1, trace_forms, ExtensionSpec};
use tlf::scalars::{ext_norm, ext_trace, BaseKind, BaseScalar, ExtField, ExtScalar};
use tlf::series::{substitute, Series};
use tlf::syntax::{parse_form, parse_operator, parse_rational_form, parse_series};
use tlf::tlf::{validate_uniformizers, LiftingSpec, LiftingSystem, TlfDescriptor};
use tlf::Error;

fn q() -> Arc<ExtField> {
    ExtField::trivial(BaseKind::Rational)
}

fn fp(p: u32) -> Arc<ExtField> {
    ExtField::trivial(BaseKind::Prime(p))
}

fn s(k: &TlfDescriptor, text: &str) -> Series {
    parse_series(k, text).unwrap()
}

fn sep(k: &TlfDescriptor, text: &str) -> SeparatedForm {
    let p = parse_form(&k.field, text).unwrap();
    separate(&p.form, &p.context(k).unwrap()).unwrap()
}

fn int(kind: BaseKind, v: i64) -> BaseScalar {
    kind.from_i64(v)
}

// scalars

#[test]
fn trace_and_norm_in_small_extensions() {
    let f4 = ExtField::from_i64s(BaseKind::Prime(2), &[1, 1, 1]).unwrap();
    let qi = ExtField::from_i64s(BaseKind::Rational, &[1, 0, 1]).unwrap();
    let f9 = ExtField::from_i64s(BaseKind::Prime(3), &[1, 0, 1]).unwrap();

    assert!(ext_trace(&ExtScalar::generator_power(&f4, 1)).is_one());
    assert!(ext_trace(&ExtScalar::zero(&f4)).is_zero());
    assert!(ext_trace(&ExtScalar::generator_power(&qi, 1)).is_zero());

    let one_plus_i = ExtScalar::one(&qi).add(&ExtScalar::generator_power(&qi, 1));
    assert_eq!(ext_norm(&one_plus_i), int(BaseKind::Rational, 2));
    assert!(ext_norm(&ExtScalar::one(&qi)).is_one());
    assert!(ext_norm(&ExtScalar::generator_power(&f9, 1)).is_one());
}

#[test]
fn reducible_modulus_is_rejected() {
    assert!(ExtField::from_i64s(BaseKind::Prime(5), &[1, 0, 1]).is_err());
}

// series

#[test]
fn series_arithmetic() {
    let k = TlfDescriptor::new(1, q());
    assert_eq!(s(&k, "(1 + t1) * (1 - t1)"), s(&k, "1 - t1^2"));

    let inv = s(&k, "1 - t1").inv().unwrap();
    for e in 0..8 {
        assert!(inv.coefficient_at(&[e]).unwrap().is_one());
    }
    assert!(matches!(inv.coefficient_at(&[40]), Err(Error::InsufficientPrecision(_))));

    let x = s(&k, "t1^-1 * (1 + t1)");
    let y = x.inv().unwrap();
    for e in 1..6 {
        let want = if e % 2 == 1 { 1 } else { -1 };
        assert_eq!(y.coefficient_at(&[e]).unwrap(), ExtScalar::from_i64(&k.field, want));
    }
    let one = x.mul(&y).sub(&k.one());
    for e in 0..6 {
        assert!(one.coefficient_at(&[e]).unwrap().is_zero());
    }
}

#[test]
fn valuations_and_coefficients() {
    let k = TlfDescriptor::new(2, q());
    assert_eq!(s(&k, "t1^2 * t2^-3").valuation().unwrap(), vec![2, -3]);
    assert_eq!(k.one().valuation().unwrap(), vec![0, 0]);
    assert_eq!(s(&k, "t1 + t2").valuation().unwrap(), vec![0, 1]);
    assert!(s(&k, "t1^-1 * t2^-1").coefficient_at(&[-1, -1]).unwrap().is_one());

    let k1 = TlfDescriptor::new(1, q());
    assert!(s(&k1, "inv(1 - t1)").coefficient_at(&[5]).unwrap().is_one());
}

#[test]
fn derivatives() {
    let k = TlfDescriptor::new(2, q());
    assert_eq!(s(&k, "t1^2 * t2").derivative(1), s(&k, "2 * t1 * t2"));

    let k5 = TlfDescriptor::new(1, fp(5));
    assert!(s(&k5, "t1^5").derivative(1).is_exact_zero());

    let b = s(&k, "t2 * inv(1 - t2)");
    let db = b.derivative(2);
    for j in 0..6 {
        assert_eq!(db.coefficient_at(&[0, j]).unwrap(), ExtScalar::from_i64(&k.field, j + 1));
    }
}

#[test]
fn substitution() {
    let k = TlfDescriptor::new(1, q());
    let img = substitute(&s(&k, "t1^-1"), &[s(&k, "t1 + t1^2")], 8).unwrap();
    assert!(img.mul(&s(&k, "t1 + t1^2")).sub(&k.one()).is_zero_within_precision());
    for e in -1..5 {
        let want = if e % 2 == 0 { -1 } else { 1 };
        assert_eq!(img.coefficient_at(&[e]).unwrap(), ExtScalar::from_i64(&k.field, want));
    }

    let x = s(&k, "3 + t1^-2 - t1^4");
    assert_eq!(substitute(&x, &k.gens(), 8).unwrap(), x);

    let k2 = TlfDescriptor::new(2, q());
    let vals = [s(&k2, "t1 * (1 + t2)"), k2.gen(2)];
    assert_eq!(substitute(&k2.gen(1), &vals, 8).unwrap(), vals[0]);
}

// uniformizers

#[test]
fn uniformizer_validation() {
    let k = TlfDescriptor::new(2, q());
    assert!(validate_uniformizers(&k, &k.gens()).is_ok());
    assert!(validate_uniformizers(&k, &[s(&k, "t1^2"), k.gen(2)]).is_err());
    assert!(validate_uniformizers(&k, &[s(&k, "t1 + t2"), k.gen(2)]).is_err());
}

#[test]
fn twisted_lifting_of_t2() {
    let k = TlfDescriptor::new(2, q());
    let inner = TlfDescriptor::new(1, q());
    let spec = LiftingSpec::twisted(&k, 1, 2, inner.one(), 1).unwrap();
    let lifted = spec.apply(1, &inner.gen(1)).unwrap().truncate(2);
    assert_eq!(lifted, s(&k, "t2 + t1").truncate(2));
    let sq = spec.apply(1, &s(&inner, "t1^2")).unwrap().truncate(2);
    assert_eq!(sq, s(&k, "t2^2 + 2*t1*t2").truncate(2));
}

// forms

#[test]
fn separation_examples() {
    let k = TlfDescriptor::new(2, q());
    let w = sep(&k, "d(t1*t2)");
    assert_eq!(w.coeff(&[1]), &k.gen(2));
    assert_eq!(w.coeff(&[2]), &k.gen(1));

    let alpha = sep(&k, "t1^-1 * d(b{series=t2*inv(1 - t2)}) ^ t2^-1 * d(t2)");
    assert!(alpha.is_zero_within_precision());

    let db = sep(&k, "d(b{series=t2 + t2^2})");
    assert!(db.coeff(&[1]).is_zero_within_precision());
    assert_eq!(db.coeff(&[2]), &s(&k, "1 + 2*t2"));
}

#[test]
fn exterior_derivative_and_wedge() {
    let k = TlfDescriptor::new(2, q());
    let w = SeparatedForm::monomial(k.gen(2), &[1]).exterior_d();
    assert_eq!(w.coeff(&[1, 2]), &s(&k, "-1"));

    let dt1 = d_function(&k.gen(1));
    let dt2 = d_function(&k.gen(2));
    assert!(dt1.wedge(&dt1).unwrap().is_zero_within_precision());
    assert!(dt1.wedge(&dt2).unwrap().coeff(&[1, 2]).as_scalar().unwrap().is_one());

    let lhs = dt1.mul_function(&k.gen(1)).wedge(&dt2.mul_function(&k.gen(2))).unwrap();
    assert_eq!(lhs.coeff(&[1, 2]), &s(&k, "t1*t2"));
}

#[test]
fn dlog_examples() {
    let k = TlfDescriptor::new(2, q());
    let w = dlog(&k.gens(), 8).unwrap();
    assert_eq!(w.coeff(&[1, 2]), &s(&k, "t1^-1 * t2^-1"));

    let k1 = TlfDescriptor::new(1, q());
    let w = dlog(&[s(&k1, "t1 + t1^2")], 8).unwrap();
    let want = s(&k1, "(1 + 2*t1) * inv(t1 + t1^2)");
    assert!(w.coeff(&[1]).sub(&want).is_zero_within_precision());
}

// residues

#[test]
fn residue_examples() {
    let k = TlfDescriptor::new(2, q());
    assert!(res_tlf(&sep(&k, "dlog(t1,t2)")).unwrap().is_one());
    assert!(res_tlf(&sep(&k, "[3] * t1 * dlog(t1,t2)")).unwrap().is_zero());
    assert!(res_tlf(&sep(&k, "t2^-2 * dlog(t1,t2)")).unwrap().is_zero());

    let k1 = TlfDescriptor::new(1, q());
    assert!(res_tlf(&sep(&k1, "(t1 + 2 + t1^-1) * d(t1)")).unwrap().is_one());
}

#[test]
fn traces_under_extensions() {
    let base = TlfDescriptor::new(1, q());
    let spec = ExtensionSpec::kummer(base.clone(), 2).unwrap();
    let up = spec.upper();
    let tr = trace_forms(&dlog(&[up.gen(1)], 8).unwrap(), &spec).unwrap();
    assert!(tr.eq_within(&dlog(&[base.gen(1)], 8).unwrap()));
    let tr = trace_forms(&d_function(&up.gen(1)), &spec).unwrap();
    assert!(tr.is_zero_within_precision());

    let f2 = TlfDescriptor::new(1, fp(2));
    let f4 = ExtField::from_i64s(BaseKind::Prime(2), &[1, 1, 1]).unwrap();
    let spec = ExtensionSpec::unramified(f2.clone(), f4.clone()).unwrap();
    let up = spec.upper();
    let x = Series::constant(&f4, 1, ExtScalar::generator_power(&f4, 1));
    let tr = trace_forms(&d_function(&up.gen(1)).mul_function(&x), &spec).unwrap();
    assert!(tr.eq_within(&d_function(&f2.gen(1))));
}

#[test]
fn tate_residue_examples() {
    let k = TlfDescriptor::new(1, q());
    assert!(tate_residue_dim1(&s(&k, "t1^-1"), &k.gen(1)).unwrap().is_one());
    assert!(tate_residue_dim1(&k.one(), &s(&k, "t1^-3 + 4*t1 + t1^2")).unwrap().is_zero());
    let v = tate_residue_dim1(&s(&k, "t1^-2"), &s(&k, "t1^2")).unwrap();
    assert_eq!(v, int(BaseKind::Rational, 2));
}

#[test]
fn topology_dependence() {
    let (st, nt) = counterexample_char0(None).unwrap();
    assert!(st.is_zero());
    assert!(nt.is_one());
    let (st, nt) = counterexample_char0(Some(Series::from_i64(&q(), 2, 3))).unwrap();
    assert!(st.is_zero());
    assert!(nt.is_one());
}

// lattices

fn mono(f: &Arc<ExtField>, e: i64) -> Series {
    Series::monomial(f, &[e], ExtScalar::one(f))
}

#[test]
fn lattice_normal_forms() {
    let f = q();
    let z = Series::zero(&f, 1);
    let id = vec![vec![mono(&f, 0), z.clone()], vec![z.clone(), mono(&f, 0)]];
    assert_eq!(lattice_normal_form(&id, 8).unwrap().divisors(), &[0, 0]);
    let diag = vec![vec![mono(&f, 1), z.clone()], vec![z.clone(), mono(&f, -1)]];
    assert_eq!(lattice_normal_form(&diag, 8).unwrap().divisors(), &[-1, 1]);
    let tri = vec![vec![mono(&f, 0), mono(&f, 1)], vec![z, mono(&f, 2)]];
    assert_eq!(lattice_normal_form(&tri, 8).unwrap().divisors(), &[0, 2]);
}

#[test]
fn lattice_containment() {
    let f = q();
    let l0 = Lattice::standard(&f, 1, 2, 0);
    let l2 = Lattice::standard(&f, 1, 2, 2);
    assert!(contains(&l0, &l2).unwrap());
    assert!(!contains(&l2, &l0).unwrap());
}

#[test]
fn refinements() {
    let k = TlfDescriptor::new(1, q());
    let l0 = Lattice::standard(&k.field, 1, 1, 0);
    for (op, m) in [("mul(t1^-2)", 2), ("d1", 1), ("id", 0)] {
        let phi = parse_operator(&k, op).unwrap();
        let r = find_refinement(Some(phi.band().unwrap()), &l0, &l0).unwrap();
        assert_eq!(r.m, m, "{op}");
        assert_eq!(r.l1p.divisors(), &[m]);
        assert_eq!(r.l2p.divisors(), &[-m]);
        let probes = [k.one(), s(&k, "1 + t1")];
        assert!(r.verify(&|x| phi.apply(x), &probes).unwrap(), "{op}");
    }
}

#[test]
fn induced_actions() {
    let k = TlfDescriptor::new(1, q());
    let l0 = Lattice::standard(&k.field, 1, 1, 0);
    let l2 = Lattice::standard(&k.field, 1, 1, 2);
    let quo = quotient_module(&l0, &l2, &LiftingSpec::Standard, 8).unwrap();
    assert_eq!(quo.dim(), 2);
    let one = Series::one(&k.field, 0);
    let shift = |x: &Series| Ok(x.mul(&k.gen(1)));
    let col = |a| -> Vec<i64> {
        induced_action(&shift, &quo, &quo, a, &one)
            .unwrap()
            .iter()
            .map(|c| if c.is_exact_zero() { 0 } else { 1 })
            .collect()
    };
    assert_eq!(col(0), vec![0, 1]);
    assert_eq!(col(1), vec![0, 0]);

    let c = Series::from_i64(&k.field, 0, 3);
    let coords = induced_action(&|x: &Series| Ok(x.clone()), &quo, &quo, 1, &c).unwrap();
    assert!(coords[0].is_exact_zero());
    assert_eq!(coords[1], c);
}

// operators

#[test]
fn operator_application() {
    let k = TlfDescriptor::new(1, q());
    let phi = OperatorExpr::mul_by(k.gen(1)).unwrap();
    assert_eq!(phi.apply(&s(&k, "t1^-1")).unwrap(), k.one());
    let p = parse_operator(&k, "proj1(>=0)").unwrap();
    assert_eq!(p.apply(&s(&k, "t1^-2 + 3 + t1")).unwrap(), s(&k, "3 + t1"));
    let c = parse_operator(&k, "d1.mul(t1)").unwrap();
    assert_eq!(c.apply(&k.one()).unwrap(), k.one());
}

#[test]
fn certificates() {
    let k = TlfDescriptor::new(1, q());
    for (op, target) in [("mul(t1)", Target::E), ("proj1(<0)", Target::Ideal(1, 2)), ("d1", Target::E)] {
        let phi = parse_operator(&k, op).unwrap();
        let cert = certify(&phi, target).unwrap();
        assert!(cert.replay(&phi, 5, 7).unwrap() > 0, "{op}");
    }
}

#[test]
fn decomposition_splits_inner_expansion() {
    let k = TlfDescriptor::new(2, q());
    let dec = decompose_identity(&k, 2, &LiftingSystem::standard(2)).unwrap();
    let x = s(&k, "t1^-1 * t2^-1 + t1 * t2");
    let a = dec.phi1.apply(&x).unwrap();
    let b = dec.phi2.apply(&x).unwrap();
    assert_eq!(a.add(&b), x);
    let mut parts = [a, b];
    parts.sort_by_key(|p| p.valuation().unwrap());
    assert_eq!(parts[0], s(&k, "t1^-1 * t2^-1"));
    assert_eq!(parts[1], s(&k, "t1 * t2"));
}

#[test]
fn cubical_projectors_on_a_monomial() {
    let k = TlfDescriptor::new(2, q());
    let ps = cubical_projectors(&k, &LiftingSystem::standard(2)).unwrap();
    assert_eq!(ps.len(), 4);
    let x = s(&k, "t1^-1 * t2");
    let mut hits = 0;
    for (eps, p) in &ps {
        let y = p.apply(&x).unwrap();
        match eps.as_slice() {
            [1, 1] => assert!(y.is_exact_zero()),
            [2, 1] => assert_eq!(y, x),
            _ => {}
        }
        if !y.is_exact_zero() {
            hits += 1;
        }
    }
    assert_eq!(hits, 1);
}

#[test]
fn finite_potent_traces() {
    let k = TlfDescriptor::new(1, q());
    for (op, tr) in [
        ("fin{[0]: 1}", 1),
        ("fin{[0]: t1}", 0),
        ("proj1(<3).proj1(>=0).mul(1 + t1).proj1(<3).proj1(>=0)", 3),
    ] {
        let phi = parse_operator(&k, op).unwrap();
        let t = finite_potent_trace(&phi).unwrap();
        assert_eq!(t.trace, int(BaseKind::Rational, tr), "{op}");
    }
}

// curves

#[test]
fn closed_points() {
    let kq = BaseKind::Rational;
    let pts = enumerate_closed_points(&Poly::from_i64s(kq, &[0, -1, 1]), true).unwrap();
    let labels: Vec<String> = pts.iter().map(ClosedPoint::label).collect();
    assert_eq!(labels.len(), 3);
    for l in ["t", "t - 1", "inf"] {
        assert!(labels.iter().any(|x| x == l), "{labels:?}");
    }

    let f3 = BaseKind::Prime(3);
    let pts = enumerate_closed_points(&Poly::from_i64s(f3, &[1, 0, 1]), false).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].degree(), 2);

    let irr = irreducibles_up_to(BaseKind::Prime(2), 2).unwrap();
    let labels: Vec<String> = irr.iter().map(|p| p.display_in("t")).collect();
    assert_eq!(labels, ["t", "t + 1", "t^2 + t + 1"]);
}

#[test]
fn local_residues() {
    let f3 = BaseKind::Prime(3);
    let w = parse_rational_form(f3, "t/(t^2 + 1) dt").unwrap();
    let g = global_residue_sum(&w).unwrap();
    assert!(g.sum.is_zero());
    for (x, r) in &g.locals {
        let want = if *x == ClosedPoint::Infinity { 2 } else { 1 };
        assert_eq!(*r, int(f3, want), "{}", x.label());
        assert_eq!(res_tlf(&local_expansion(&w, x).unwrap()).unwrap(), *r);
    }

    let kq = BaseKind::Rational;
    let dt = parse_rational_form(kq, "1 dt").unwrap();
    assert!(res_tlf(&local_expansion(&dt, &ClosedPoint::Infinity).unwrap()).unwrap().is_zero());
    assert!(global_residue_sum(&dt).unwrap().sum.is_zero());

    let w = parse_rational_form(kq, "1/(t*(t-1)) dt").unwrap();
    let g = global_residue_sum(&w).unwrap();
    assert!(g.sum.is_zero());
    for (x, r) in &g.locals {
        let want = match x.label().as_str() {
            "t" => -1,
            "t - 1" => 1,
            _ => 0,
        };
        assert_eq!(*r, int(kq, want), "{}", x.label());
    }
}
