use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tlf::bt_ops::cubical_projectors;
use tlf::forms::{d_function, SeparatedForm};
use tlf::geom::{global_residue_sum, RationalForm};
use tlf::poly::Poly;
use tlf::residue::{res_tlf, tate_residue_dim1};
use tlf::scalars::{BaseKind, ExtField, ExtScalar};
use tlf::series::Series;
use tlf::syntax::parse_series;
use tlf::tlf::{reassemble, sigma_expand, LiftingSystem, TlfDescriptor};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

fn field(which: u8) -> Arc<ExtField> {
    match which % 4 {
        0 => ExtField::trivial(BaseKind::Rational),
        1 => ExtField::trivial(BaseKind::Prime(5)),
        2 => ExtField::from_i64s(BaseKind::Prime(2), &[1, 1, 1]).unwrap(),
        _ => ExtField::from_i64s(BaseKind::Rational, &[1, 0, 1]).unwrap(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn nonzero(f: &Arc<ExtField>, n: usize, r: &mut ChaCha8Rng) -> Series {
    loop {
        let x = Series::random(f, n, -2, 2, 0.5, r);
        if !x.is_exact_zero() {
            return x;
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ext_scalars_form_a_field(which in 0u8..4, seed in any::<u64>()) {
        let f = field(which);
        let mut r = rng(seed);
        let a = ExtScalar::random(&f, &mut r);
        let b = ExtScalar::random(&f, &mut r);
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert!(a.sub(&a).is_zero());
        if !a.is_zero() {
            prop_assert!(a.mul(&a.inv().unwrap()).is_one());
        }
    }

    #[test]
    fn inverse_is_two_sided(which in 0u8..4, n in 1usize..=2, seed in any::<u64>()) {
        let f = field(which);
        let x = nonzero(&f, n, &mut rng(seed));
        let y = x.inv().unwrap();
        let one = Series::one(&f, n);
        prop_assert!(x.mul(&y).sub(&one).is_zero_within_precision());
        prop_assert!(y.mul(&x).sub(&one).is_zero_within_precision());
    }

    #[test]
    fn display_reparses(which in 0u8..4, n in 1usize..=3, seed in any::<u64>()) {
        let f = field(which);
        let k = TlfDescriptor::new(n, f.clone());
        let x = Series::random(&f, n, -3, 3, 0.4, &mut rng(seed));
        prop_assert_eq!(parse_series(&k, &x.to_string()).unwrap(), x);
    }

    #[test]
    fn leibniz_on_forms(which in 0u8..4, seed in any::<u64>()) {
        let f = field(which);
        let mut r = rng(seed);
        let n = 2;
        let a = SeparatedForm::function(Series::random(&f, n, -2, 2, 0.4, &mut r));
        let g = Series::random(&f, n, -2, 2, 0.4, &mut r);
        let b = d_function(&g);
        let lhs = a.wedge(&b).unwrap().exterior_d();
        let rhs = a.exterior_d().wedge(&b).unwrap().add(&a.wedge(&b.exterior_d()).unwrap()).unwrap();
        prop_assert!(lhs.eq_within(&rhs));
    }

    #[test]
    fn exact_top_forms_have_no_residue(n in 1usize..=2, seed in any::<u64>()) {
        let f = field(0);
        let mut r = rng(seed);
        let mut w = SeparatedForm::zero(&f, n, n - 1);
        for idx in w.coeffs().keys().cloned().collect::<Vec<_>>() {
            w.set_coeff(&idx, Series::random(&f, n, -3, 3, 0.5, &mut r));
        }
        prop_assert!(res_tlf(&w.exterior_d()).unwrap().is_zero());
    }

    #[test]
    fn tate_residue_matches_laurent_residue(which in 0u8..2, seed in any::<u64>()) {
        let f = field(which);
        let mut r = rng(seed);
        let a = Series::random(&f, 1, -4, 4, 0.6, &mut r);
        let b = Series::random(&f, 1, -4, 4, 0.6, &mut r);
        let tate = tate_residue_dim1(&a, &b).unwrap();
        let laurent = res_tlf(&d_function(&b).mul_function(&a)).unwrap();
        prop_assert_eq!(tate, laurent);
    }

    #[test]
    fn cubical_projectors_sum_to_identity(which in 0u8..4, seed in any::<u64>()) {
        let f = field(which);
        let k = TlfDescriptor::new(2, f.clone());
        let x = Series::random(&f, 2, -3, 3, 0.4, &mut rng(seed));
        let mut acc = Series::zero(&f, 2);
        for (_, p) in cubical_projectors(&k, &LiftingSystem::standard(2)).unwrap() {
            acc = acc.add(&p.apply(&x).unwrap());
        }
        prop_assert!(acc.eq_within(&x));
    }

    #[test]
    fn sigma_expansion_reassembles(which in 0u8..4, seed in any::<u64>()) {
        let f = field(which);
        let x = Series::random(&f, 2, -3, 3, 0.4, &mut rng(seed));
        let spec = LiftingSystem::standard(2);
        let a = Series::gen(&f, 2, 1);
        let parts = sigma_expand(&x, spec.level(1), 1, &a).unwrap();
        prop_assert!(reassemble(&parts, spec.level(1), 1, &a).unwrap().eq_within(&x));
    }

    #[test]
    fn residue_theorem_on_the_line(p in prop::sample::select(vec![0u32, 3, 5]), seed in any::<u64>()) {
        let kind = BaseKind::from_char(p).unwrap();
        let mut r = rng(seed);
        let roots: Vec<i64> = (0..3).map(|_| rand::Rng::gen_range(&mut r, -3..=3)).collect();
        let mut den = Poly::from_i64s(kind, &[1]);
        for c in &roots {
            den = den.mul(&Poly::from_i64s(kind, &[-c, 1]));
        }
        let num: Vec<i64> = (0..4).map(|_| rand::Rng::gen_range(&mut r, -4..=4)).collect();
        let num = Poly::from_i64s(kind, &num);
        prop_assume!(!num.is_zero());
        let w = RationalForm::new(num, den).unwrap();
        prop_assert!(global_residue_sum(&w).unwrap().sum.is_zero());
    }
}
