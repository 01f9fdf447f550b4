use calib6::forms6::{
    basis_len, complex_structure_pullback, max_diff, special_lagrangian_form, special_lagrangian_imag, unit, KForm,
    KVector, LinearMap6, MultiIndex,
};
use calib6::linalg::{c, expm, random_su3_algebra, realify, C64};
use nalgebra::Matrix3;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn phi() -> KForm<f64> {
    special_lagrangian_form()
}

/// `det [z_i(v_j)]` with `z_i = x_i + i y_i`.
fn dz123(vs: &[[f64; 6]; 3]) -> C64 {
    Matrix3::from_fn(|i, j| c(vs[j][i], vs[j][i + 3])).determinant()
}

fn form_strategy(k: usize) -> impl Strategy<Value = KForm<f64>> {
    prop::collection::vec(-2.0f64..2.0, basis_len(k)).prop_map(move |v| KForm::from_coeffs(k, v).unwrap())
}

fn int_form_strategy(k: usize) -> impl Strategy<Value = KForm<BigRational>> {
    prop::collection::vec(-5i64..=5, basis_len(k)).prop_map(move |v| {
        KForm::from_coeffs(k, v.into_iter().map(|x| BigRational::from_integer(x.into())).collect()).unwrap()
    })
}

fn vec6() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-1.0f64..1.0)
}

fn map6() -> impl Strategy<Value = LinearMap6> {
    prop::array::uniform6(prop::array::uniform6(-1.0f64..1.0)).prop_map(|m| LinearMap6 { m })
}

#[test]
fn phi_coefficients() {
    let p = phi();
    assert_eq!(p.get(&[0, 1, 2]), 1.0);
    assert_eq!(p.get(&[3, 4, 5]), 0.0);
    let nz: Vec<f64> = p.coeffs().iter().copied().filter(|x| *x != 0.0).collect();
    assert_eq!(nz.len(), 4);
    assert!(nz.iter().all(|x| x.abs() == 1.0));
    // -dy1 dy2 dx3, -dx1 dy2 dy3, -dy1 dx2 dy3 as written
    assert_eq!(p.get(&[3, 4, 2]), -1.0);
    assert_eq!(p.get(&[0, 4, 5]), -1.0);
    assert_eq!(p.get(&[3, 1, 5]), -1.0);
}

#[test]
fn phi_matches_complex_determinant_on_basis_triples() {
    let p = phi();
    let q = special_lagrangian_imag::<f64>();
    for a in 0..6 {
        for b in a + 1..6 {
            for d in b + 1..6 {
                let vs = [unit(a), unit(b), unit(d)];
                let z = dz123(&vs);
                assert_eq!(p.eval_vectors(&vs).unwrap(), z.re, "{a}{b}{d}");
                assert_eq!(q.eval_vectors(&vs).unwrap(), z.im, "{a}{b}{d}");
            }
        }
    }
}

#[test]
fn wedge_basics() {
    let dx1 = KForm::<f64>::coordinate(0).unwrap();
    let dx2 = KForm::<f64>::coordinate(1).unwrap();
    let dx3 = KForm::<f64>::coordinate(2).unwrap();
    assert!(dx1.wedge(&dx1).unwrap().is_zero());
    let w = dx1.wedge(&dx2).unwrap();
    assert_eq!(w.get(&[0, 1]), 1.0);
    assert_eq!(w.get(&[1, 0]), -1.0);
    assert_eq!(w.wedge(&dx3).unwrap(), KForm::basis(&[0, 1, 2]).unwrap());
    let vol = KForm::<f64>::basis(&[0, 1, 2, 3]).unwrap();
    assert!(vol.wedge(&w.wedge(&dx3).unwrap()).is_err());
    assert_eq!(vol.wedge(&w).unwrap().degree(), 6);
}

#[test]
fn multi_index_rejects_bad_input() {
    assert!(MultiIndex::new(&[0, 0]).is_err());
    assert!(MultiIndex::new(&[6]).is_err());
    assert!(MultiIndex::new(&[2, 1]).is_err());
    assert_eq!(MultiIndex::new(&[0, 3, 5]).unwrap().degree(), 3);
}

#[test]
fn interior_of_phi_along_x3() {
    let got = phi().interior(&unit(2)).unwrap();
    let mut want = KForm::<f64>::basis(&[0, 1]).unwrap();
    want.add_term(&[3, 4], -1.0).unwrap();
    assert_eq!(got, want);
    let vol = KForm::<f64>::basis(&[0, 1, 2]).unwrap();
    assert!(vol.interior(&unit(5)).unwrap().is_zero());
    assert!(KForm::<f64>::zero(0).unwrap().interior(&unit(0)).is_err());
}

#[test]
fn pullback_scaling_and_identity() {
    let p = phi();
    assert_eq!(p.pullback(&LinearMap6::identity()), p);
    assert_eq!(p.pullback(&LinearMap6::scaled_identity(2.0)), p.scale(8.0));
}

#[test]
fn pullback_matches_brute_force_evaluation() {
    let th: f64 = 0.7;
    let u = Matrix3::from_diagonal(&nalgebra::Vector3::new(c(th.cos(), th.sin()), c(1.0, 0.0), c(th.cos(), -th.sin())));
    let h = LinearMap6::from_matrix(&realify(&u));
    let p = phi();
    let pulled = p.pullback(&h);
    for a in 0..6 {
        for b in a + 1..6 {
            for d in b + 1..6 {
                let hv = [h.apply(&unit(a)), h.apply(&unit(b)), h.apply(&unit(d))];
                let brute = dz123(&hv).re;
                assert!((pulled.get(&[a, b, d]) - brute).abs() < 1e-14);
                assert!((pulled.get(&[a, b, d]) - p.get(&[a, b, d])).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn complex_structure_pullback_properties() {
    let p = phi();
    let jp = complex_structure_pullback(&p);
    let mut four = p.clone();
    for _ in 0..4 {
        four = complex_structure_pullback(&four);
    }
    assert!(max_diff(&four, &p) < 1e-15);
    // J z = i z, so (J^* phi)(v) = Re(i^3 dz(v)) = Im dz(v)
    assert_eq!(jp.eval_vectors(&[unit(0), unit(1), unit(2)]).unwrap(), 0.0);
    assert!(max_diff(&jp, &special_lagrangian_imag()) < 1e-15);
    let mixed = p.scale(0f64.cos()).try_sub(&jp.scale(0f64.sin())).unwrap();
    assert_eq!(mixed, p);
    // d/dx_j goes to d/dy_j and d/dy_j to -d/dx_j
    let j = LinearMap6::<f64>::complex_structure();
    assert_eq!(j.apply(&unit(0)), unit(3));
    assert_eq!(j.apply(&unit(3)), unit(0).map(|x| -x));
}

#[test]
fn evaluation_pairing() {
    let p = phi();
    let e123 = KVector::simple(&[unit(0), unit(1), unit(2)]).unwrap();
    let f123 = KVector::simple(&[unit(3), unit(4), unit(5)]).unwrap();
    assert_eq!(p.evaluate(&e123).unwrap(), 1.0);
    assert_eq!(p.evaluate(&f123).unwrap(), 0.0);
    assert_eq!(KForm::<f64>::basis(&[0, 1, 2]).unwrap().evaluate(&e123).unwrap(), 1.0);
    let two = KVector::simple(&[unit(0), unit(1)]).unwrap();
    assert!(p.evaluate(&two).is_err());
}

#[test]
fn phi_is_su3_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = phi();
    for _ in 0..100 {
        let u = expm(&random_su3_algebra(&mut rng, 1.5));
        let h = LinearMap6::from_matrix(&realify(&u));
        assert!(max_diff(&p.pullback(&h), &p) < 1e-10);
    }
}

proptest! {
    #[test]
    fn graded_anticommutativity_exact(
        k in 0usize..=3, l in 0usize..=3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mk = |d: usize, rng: &mut ChaCha8Rng| {
            KForm::<BigRational>::from_coeffs(
                d,
                (0..basis_len(d)).map(|_| BigRational::new(rng.gen_range(-9i64..=9).into(), rng.gen_range(1i64..=4).into())).collect(),
            )
            .unwrap()
        };
        let a = mk(k, &mut rng);
        let b = mk(l, &mut rng);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let ba = if (k * l) % 2 == 1 { ba.scale(BigRational::from_integer((-1).into())) } else { ba };
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn graded_anticommutativity_float(a in form_strategy(2), b in form_strategy(3)) {
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        prop_assert!(max_diff(&ab, &ba) <= 1e-12);
    }

    #[test]
    fn wedge_is_associative(a in int_form_strategy(1), b in int_form_strategy(2), d in int_form_strategy(2)) {
        let left = a.wedge(&b).unwrap().wedge(&d).unwrap();
        let right = a.wedge(&b.wedge(&d).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn pullback_is_contravariant(g in map6(), h in map6(), a in form_strategy(3)) {
        let lhs = a.pullback(&g.compose(&h));
        let rhs = a.pullback(&g).pullback(&h);
        let scale = 1.0 + calib6::forms6::max_norm(&lhs);
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-10 * scale);
    }

    #[test]
    fn pullback_agrees_with_evaluation(h in map6(), a in form_strategy(3), v in prop::array::uniform3(vec6())) {
        let lhs = a.pullback(&h).eval_vectors(&v).unwrap();
        let hv = v.map(|x| h.apply(&x));
        let rhs = a.eval_vectors(&hv).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn interior_is_an_antiderivation(v in vec6(), a in form_strategy(2), b in form_strategy(2)) {
        let lhs = a.wedge(&b).unwrap().interior(&v).unwrap();
        let rhs = a.interior(&v).unwrap().wedge(&b).unwrap()
            .try_add(&a.wedge(&b.interior(&v).unwrap()).unwrap()).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn double_interior_vanishes(v in vec6(), a in form_strategy(3)) {
        let twice = a.interior(&v).unwrap().interior(&v).unwrap();
        prop_assert!(calib6::forms6::max_norm(&twice) <= 1e-14);
    }

    #[test]
    fn interior_is_first_slot_evaluation(v in vec6(), w in prop::array::uniform2(vec6()), a in form_strategy(3)) {
        let lhs = a.interior(&v).unwrap().eval_vectors(&w).unwrap();
        let rhs = a.eval_vectors(&[v, w[0], w[1]]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}
