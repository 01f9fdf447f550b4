use calib6::forms6::{basis_len, basis_masks, max_diff, special_lagrangian_form, KForm, LinearMap6};
use calib6::form_orbit::{
    differential_image, factorize_near_phi, float_rank, kappa_findings, kappa_table, kernel_contains_sl3c,
    orbit_differential, sl3c_span_dimension, smallest_singular_value, stabilizer_dimension,
};
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phi() -> KForm<f64> {
    special_lagrangian_form()
}

fn row_of(idx: &[usize]) -> usize {
    let mask = idx.iter().fold(0u8, |m, i| m | (1 << i));
    basis_masks(3).iter().position(|m| *m == mask).unwrap()
}

fn nonzero_columns(row: &[f64]) -> Vec<(usize, usize, f64)> {
    row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(c, v)| (c / 6, c % 6, *v)).collect()
}

#[test]
fn differential_rows() {
    let d = orbit_differential(&phi()).unwrap();
    assert_eq!(d.rows.len(), 20);
    assert!(d.rows.iter().all(|r| r.len() == 36 && r.iter().all(|v| [-1.0, 0.0, 1.0].contains(v))));
    assert_eq!(nonzero_columns(&d.rows[row_of(&[0, 1, 2])]), vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
    // 1 2 I: h_{III,1} and h_{3,I}
    let cols: Vec<(usize, usize)> = nonzero_columns(&d.rows[row_of(&[0, 1, 3])]).iter().map(|(a, b, _)| (*a, *b)).collect();
    assert_eq!(cols.len(), 2);
    assert!(cols.contains(&(5, 0)) && cols.contains(&(2, 3)));
    let zero = orbit_differential(&KForm::<f64>::zero(3).unwrap()).unwrap();
    assert!(zero.rows.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn stabilizer_of_phi() {
    let s = stabilizer_dimension(&phi()).unwrap();
    assert_eq!((s.rank, s.kernel_dim), (20, 16));
    assert_eq!(float_rank(&phi()).unwrap(), 20);
    assert!(kernel_contains_sl3c(&phi()).unwrap());
    assert_eq!(sl3c_span_dimension(), 16);
    assert!(smallest_singular_value(&phi()).unwrap() > 0.1);
}

#[test]
fn stabilizers_of_other_forms() {
    let zero = stabilizer_dimension(&KForm::zero(3).unwrap()).unwrap();
    assert_eq!((zero.rank, zero.kernel_dim), (0, 36));
    let vol = KForm::<f64>::basis(&[0, 1, 2]).unwrap();
    let s = stabilizer_dimension(&vol).unwrap();
    assert_eq!(s.rank, float_rank(&vol).unwrap());
    assert_eq!(s.kernel_dim + s.rank, 36);
}

#[test]
fn sl3c_elements_and_the_trace_direction() {
    let mut diag = [[0i64; 6]; 6];
    diag[0][0] = 1;
    diag[3][3] = 1;
    diag[1][1] = -1;
    diag[4][4] = -1;
    assert!(differential_image(&phi(), &diag).unwrap().iter().all(|v| v.is_zero()));
    // i * identity realified rotates phi into J^* phi
    let mut i_id = [[0i64; 6]; 6];
    for j in 0..3 {
        i_id[j][j + 3] = -1;
        i_id[j + 3][j] = 1;
    }
    assert!(differential_image(&phi(), &i_id).unwrap().iter().any(|v| !v.is_zero()));
}

#[test]
fn kappa_examples() {
    let t = kappa_table(12);
    let get = |n: u32, k: u32| t.iter().find(|e| e.n == n && e.k == k).unwrap().clone();
    assert_eq!(get(6, 3).kappa, 16);
    assert!(get(6, 3).positive);
    assert_eq!(get(8, 4).kappa, -6);
    assert!(!get(8, 4).positive && !get(8, 4).predicted);
    for n in 2..=12 {
        assert_eq!(get(n, 0).kappa, (n * n) as i64 - 1);
        assert!(get(n, 2).positive);
    }
    assert_eq!(t.len(), (1..=13).sum::<usize>());
    // the trichotomy holds from n = 2 on; n = 0 and n = 1 disagree
    let findings = kappa_findings(&t);
    assert!(findings.iter().all(|e| e.n <= 1));
    assert_eq!(findings.len(), 3);
}

#[test]
fn factorization_examples() {
    let f = factorize_near_phi(&phi(), 1e-12).unwrap();
    assert_eq!(f.iterations, 0);
    assert_eq!(f.h, LinearMap6::identity());

    let mut tau = phi();
    tau.add_term(&[3, 4, 5], 0.02).unwrap();
    let f = factorize_near_phi(&tau, 1e-12).unwrap();
    assert!(max_diff(&phi().pullback(&f.h), &tau) <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let mut g = LinearMap6::<f64>::identity();
        for a in 0..6 {
            for b in 0..6 {
                g.m[a][b] += rng.gen_range(-0.01..0.01) / 6.0;
            }
        }
        let tau = phi().pullback(&g);
        let f = factorize_near_phi(&tau, 1e-12).unwrap();
        assert!(f.residual <= 1e-12);
        assert!(max_diff(&phi().pullback(&f.h), &tau) <= 1e-12);
    }
    assert!(factorize_near_phi(&KForm::<f64>::zero(2).unwrap(), 1e-12).is_err());
}

#[test]
fn factorization_is_lipschitz_along_a_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dir: Vec<f64> = (0..basis_len(3)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tau_at = |s: f64| {
        KForm::from_coeffs(3, phi().coeffs().iter().zip(&dir).map(|(p, d)| p + s * d).collect()).unwrap()
    };
    let hs: Vec<(f64, LinearMap6)> =
        (0..=30).map(|k| k as f64 * 1e-3).map(|s| (s, factorize_near_phi(&tau_at(s), 1e-12).unwrap().h)).collect();
    let dist = |a: &LinearMap6, b: &LinearMap6| {
        a.m.iter().flatten().zip(b.m.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    assert_eq!(dist(&hs[0].1, &LinearMap6::identity()), 0.0);
    let mut lip: f64 = 0.0;
    for w in hs.windows(2) {
        lip = lip.max(dist(&w[0].1, &w[1].1) / (w[1].0 - w[0].0));
    }
    assert!(lip.is_finite() && lip < 10.0, "empirical Lipschitz constant {lip}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_nearby_forms_factorize(coeffs in prop::collection::vec(-0.03f64..0.03, 20)) {
        let tau = KForm::from_coeffs(3, phi().coeffs().iter().zip(&coeffs).map(|(p, d)| p + d).collect()).unwrap();
        let f = factorize_near_phi(&tau, 1e-12).unwrap();
        prop_assert!(f.residual <= 1e-12);
        prop_assert!(max_diff(&phi().pullback(&f.h), &tau) <= 1e-12);
    }
}
