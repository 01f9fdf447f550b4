use calib6::graph_embed::*;
use calib6::hl_cone::{realizing_collection, RayOptions};
use calib6::linalg::{self, c, expm_antihermitian, frobenius, CMat3, CVec3};
use calib6::unitary_planes::{intersection_dimension, ComplexMatrix3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(k: usize) -> [f64; 6] {
    std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 })
}

fn random_generator(seed: u64) -> CMat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    linalg::random_su3_algebra(&mut rng, 1.0)
}

fn two_ball_rotation() -> (FlowField, [[f64; 6]; 2], [CMat3; 2]) {
    let v = [[0.0; 6], [0.0, 0.0, 2.0, 0.0, 0.0, 0.0]];
    let g = [random_generator(1), random_generator(2)];
    (FlowField::rotation(v.to_vec(), &g, Bump::standard(1.0)), v, g)
}

#[test]
fn log_of_identity_is_zero() {
    let l = su3_log(&ComplexMatrix3::identity()).unwrap();
    assert_eq!(frobenius(&l), 0.0);
}

#[test]
fn log_of_flipped_alignment_round_trips() {
    // An alignment rotation composed with diag(-1, 1, -1), as at the upper
    // end of an edge. The flip has a double eigenvalue -1.
    let g = GraphSpec::path(2);
    let plan = plan_embedding(&g, 1.0).unwrap();
    let s = plan.edges[0].rotations[1].0;
    let l = su3_log(&ComplexMatrix3(s)).unwrap();
    assert!(frobenius(&(expm_antihermitian(&l) - s)) <= 1e-10);
    assert!(l.trace().norm() <= 1e-12);
    assert_eq!(skew_defect(&l), 0.0);
    let flip = CMat3::from_diagonal(&CVec3::new(c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)));
    let lf = su3_log(&ComplexMatrix3(flip)).unwrap();
    assert!(frobenius(&(expm_antihermitian(&lf) - flip)) <= 1e-10);
}

#[test]
fn log_rejects_non_special() {
    let m = CMat3::identity() * c(0.0, 1.0);
    assert!(su3_log(&ComplexMatrix3(m)).is_err());
}

#[test]
fn rotation_field_inside_and_outside() {
    let (f, v, g) = two_ball_rotation();
    let r = linalg::realify(&g[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let d: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
        let u = f.eval(&d);
        let want = r * nalgebra::Vector6::from_row_slice(&d);
        for k in 0..6 {
            assert_eq!(u[k], want[k]);
        }
        assert!(linalg::dot6(&u, &d).abs() <= 1e-12);
    }
    // Between the balls and far away the field vanishes.
    let mid = [0.3, 0.0, 1.0, 0.0, 0.2, 0.0];
    assert_eq!(f.eval(&mid), [0.0; 6]);
    let far = [5.0, -3.0, 1.0, 2.0, 0.0, 0.0];
    assert_eq!(f.eval(&far), [0.0; 6]);
    let _ = v;
}

#[test]
fn time_one_map_is_the_exact_rotation_in_the_inner_ball() {
    let (f, v, g) = two_ball_rotation();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (centre, gen) in v.iter().zip(&g) {
        let e = linalg::realify(&expm_antihermitian(gen));
        for _ in 0..10 {
            let d: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
            let x: [f64; 6] = std::array::from_fn(|k| centre[k] + d[k]);
            let y = integrate_flow(&f, &x, 1.0).unwrap();
            let want = e * nalgebra::Vector6::from_row_slice(&d);
            for k in 0..6 {
                assert!((y[k] - centre[k] - want[k]).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn flow_preserves_spheres_around_centres() {
    let (f, v, _) = two_ball_rotation();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        // Radii straddling the transition annulus.
        let r = rng.gen_range(0.3..0.74);
        let mut d: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = linalg::norm6(&d);
        d = d.map(|x| x * r / n);
        let y = integrate_flow(&f, &d, 1.0).unwrap();
        assert!((linalg::norm6(&y) - r).abs() <= 1e-8);
        let back = integrate_flow(&f, &y, -1.0).unwrap();
        for k in 0..6 {
            assert!((back[k] - d[k]).abs() <= 1e-8);
        }
    }
    let _ = v;
}

#[test]
fn fixed_point_stays_put() {
    let (f, v, _) = two_ball_rotation();
    let y = integrate_flow(&f, &v[1], 1.0).unwrap();
    assert_eq!(y, v[1]);
}

#[test]
fn push_moves_far_points_by_the_push_time() {
    let v = [[0.0; 6], [0.0, 0.0, 4.0, 0.0, 0.0, 0.0]];
    let f = FlowField::push(v.to_vec(), unit(5), Bump::standard(1.0));
    let x = [0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
    let y = integrate_flow(&f, &x, 2.0).unwrap();
    assert!((y[5] - 2.0).abs() < 1e-12);
    // The inner balls stay fixed.
    let z = [0.1, 0.0, 0.3, 0.0, 0.0, 0.0];
    assert_eq!(integrate_flow(&f, &z, 2.0).unwrap(), z);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn flow_is_identity_outside_its_support(
        d in prop::array::uniform6(-3.0f64..3.0),
        t in -1.5f64..1.5,
    ) {
        let (f, v, _) = two_ball_rotation();
        let outer = Bump::standard(1.0).outer;
        prop_assume!(v.iter().all(|c| {
            let e: [f64; 6] = std::array::from_fn(|k| d[k] - c[k]);
            linalg::norm6(&e) >= outer
        }));
        let y = integrate_flow(&f, &d, t).unwrap();
        for k in 0..6 {
            prop_assert!((y[k] - d[k]).abs() <= 1e-10);
        }
    }
}

#[test]
fn empty_occupancy_takes_the_first_candidate() {
    let p = select_page_normal(&Occupancy::default(), DELTA_PAGE, 64).unwrap();
    assert_eq!(p.candidate, 0);
    assert_eq!(p.normal, candidate_normal(0));
}

#[test]
fn page_avoids_a_single_plane() {
    let mut occ = Occupancy::default();
    let rows = [unit(0), unit(3), [0.0, 0.6, 0.8, 0.0, 0.0, 0.0]];
    occ.add_plane(&rows);
    let p = select_page_normal(&occ, DELTA_PAGE, 256).unwrap();
    assert!(p.normal[2] == 0.0 && (linalg::norm6(&p.normal) - 1.0).abs() < 1e-14);
    // Brute force over the projected plane's unit circle... sphere.
    let mut worst = std::f64::consts::FRAC_PI_2;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20000 {
        let w: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let mut q = [0.0; 6];
        for (k, r) in rows.iter().enumerate() {
            for i in 0..6 {
                q[i] += w[k] * r[i];
            }
        }
        q[2] = 0.0;
        let n = linalg::norm6(&q);
        if n < 1e-9 {
            continue;
        }
        let cos = (linalg::dot6(&q, &p.normal) / n).abs().min(1.0);
        worst = worst.min(cos.acos());
    }
    assert!(worst >= DELTA_PAGE, "{worst}");
    assert!(worst >= p.clearance - 1e-9);
}

#[test]
fn page_found_beside_a_hemisphere_band() {
    // Occupied directions fill the band |d . e1| < 0.9 of the 4-sphere; the
    // complement (two caps around +-e1) is open and nonempty.
    let mut occ = Occupancy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let axes = [0usize, 1, 3, 4, 5];
    let mut pts = Vec::new();
    while pts.len() < 4000 {
        let mut d = [0.0; 6];
        for &a in &axes {
            d[a] = rng.gen_range(-1.0..1.0);
        }
        let n = linalg::norm6(&d);
        if n < 1e-3 || n > 1.0 {
            continue;
        }
        let d = d.map(|x| x / n);
        if d[0].abs() < 0.9 {
            pts.push(d);
        }
    }
    for p in &pts {
        occ.add_point(p);
    }
    let p = select_page_normal(&occ, DELTA_PAGE, 4096).unwrap();
    for d in &pts {
        let cos = linalg::dot6(d, &p.normal).abs().min(1.0);
        assert!(cos.acos() >= DELTA_PAGE);
    }
}

#[test]
fn single_edge_is_the_segment_configuration() {
    let plan = plan_embedding(&GraphSpec::path(2), 1.0).unwrap();
    let e = &plan.edges[0];
    assert_eq!(e.planes, [0, 0]);
    assert!((e.rho[0] - e.rho[1]).abs() < 1e-12);
    assert!(e.certificates.ray_deviation < 1e-8);
    assert!(e.certificates.alignment_defect < 1e-10);
    assert_eq!(e.certificates.skew_defect, 0.0);
    assert!(e.page.normal[2] == 0.0 && (linalg::norm6(&e.page.normal) - 1.0).abs() < 1e-14);
    assert!(e.page.clearance >= DELTA_PAGE);
    assert_eq!(e.polyline.len(), 1000);
    assert!(validate_plan(&plan).passed);
}

#[test]
fn star_centre_collection_is_pairwise_transverse() {
    let g = GraphSpec::star(4);
    let plan = plan_embedding(&g, 1.0).unwrap();
    let col = plan.vertices[0].collection.as_ref().unwrap();
    assert_eq!(col.planes.len(), 4);
    for i in 0..4 {
        for j in i + 1..4 {
            assert_eq!(intersection_dimension(&col.planes[i], &col.planes[j]), 0);
        }
    }
    let v = validate_plan(&plan);
    assert!(v.passed, "{v:?}");
    assert!(v.min_vertex_angle > MIN_VERTEX_ANGLE);
}

#[test]
fn complete_graph_on_four_vertices() {
    let plan = plan_embedding(&GraphSpec::complete(4), 1.0).unwrap();
    assert_eq!(plan.edges.len(), 6);
    let v = validate_plan(&plan);
    assert!(v.passed, "{v:?}");
    assert!(v.min_edge_distance > 0.0);
}

#[test]
fn plans_are_deterministic() {
    let g = GraphSpec::random_multigraph(4, 5, 3);
    let a = serde_json::to_string(&plan_embedding(&g, 1.0).unwrap()).unwrap();
    let b = serde_json::to_string(&plan_embedding(&g, 1.0).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn graph_spec_validation() {
    assert!(GraphSpec::from_json(r#"{"vertices":[1,2],"edges":[[1,1]]}"#).is_err());
    assert!(GraphSpec::from_json(r#"{"vertices":[1,1],"edges":[]}"#).is_err());
    assert!(GraphSpec::from_json(r#"{"vertices":[1,2],"edges":[[1,3]]}"#).is_err());
    let g = GraphSpec::from_json(r#"{"vertices":["a","b",3],"edges":[["a","b"],["a",3],["a","b"]]}"#).unwrap();
    assert_eq!(g.degrees(), vec![3, 2, 1]);
}

#[test]
fn collection_rays_are_single() {
    let col = realizing_collection(3, &RayOptions { seeds: 4000, two_resolution: false, ..Default::default() }).unwrap();
    assert_eq!(col.rays.len(), 3);
}
