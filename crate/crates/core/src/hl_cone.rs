//! The Harvey-Lawson T^2 cone, counting the rays in which it meets a
//! special Lagrangian plane, and families of planes meeting each other only
//! at the origin.
//!
//! A point of a plane with orthonormal complex rows `M` is `v = x M` for a
//! real `x` in R^3; it lies on the link torus exactly when `|x| = 1` and
//! `|v1|^2 = |v2|^2 = 1/3`, `v1 v2 v3 = 1/(3 sqrt 3)`.

use nalgebra::{DMatrix, Matrix6, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat3, CVec3, C64};
use crate::unitary_planes::{self, intersection_dimension, p_plane, r_diag, OrientedPlane3};

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DEDUPE_RADIUS: f64 = 1e-5;
pub const DEFAULT_SEEDS: usize = 50_000;

/// The seven table entries `(tau, theta, rays)`.
pub fn ray_table() -> [(f64, f64, usize); 7] {
    use std::f64::consts::PI;
    [
        (0.0, 0.0, 1),
        (0.0, PI / 6.0, 1),
        (0.0, PI / 4.0, 1),
        (0.0, PI / 3.0, 1),
        (PI / 4.0, PI / 4.0, 2),
        (PI / 4.0, PI / 3.0, 2),
        (0.0, PI / 2.0, 4),
    ]
}

/// The link of the cone, as a residual map on the coefficient sphere.
#[derive(Clone, Copy, Debug, Default)]
pub struct HLLink;

impl HLLink {
    /// Residual `[|v1|^2 - 1/3, |v2|^2 - 1/3, Re v1v2v3 - 1/(3 sqrt 3), Im v1v2v3]`.
    pub fn residual(&self, x: &Vector3<f64>, m: &CMat3) -> [f64; 4] {
        let v = Self::point(x, m);
        let p = v[0] * v[1] * v[2];
        [v[0].norm_sqr() - 1.0 / 3.0, v[1].norm_sqr() - 1.0 / 3.0, p.re - 1.0 / (3.0 * 3f64.sqrt()), p.im]
    }

    fn point(x: &Vector3<f64>, m: &CMat3) -> CVec3 {
        CVec3::from_fn(|j, _| (0..3).map(|k| m[(k, j)] * x[k]).sum::<C64>())
    }

    /// Residual with the sphere constraint appended, and its Jacobian.
    fn system(&self, x: &Vector3<f64>, m: &CMat3) -> ([f64; 5], [[f64; 3]; 5]) {
        let v = Self::point(x, m);
        let r4 = self.residual(x, m);
        let r = [r4[0], r4[1], r4[2], r4[3], x.norm_squared() - 1.0];
        let mut jac = [[0.0; 3]; 5];
        for k in 0..3 {
            let dv = [m[(k, 0)], m[(k, 1)], m[(k, 2)]];
            jac[0][k] = 2.0 * (v[0].conj() * dv[0]).re;
            jac[1][k] = 2.0 * (v[1].conj() * dv[1]).re;
            let dp = dv[0] * v[1] * v[2] + v[0] * dv[1] * v[2] + v[0] * v[1] * dv[2];
            jac[2][k] = dp.re;
            jac[3][k] = dp.im;
            jac[4][k] = 2.0 * x[k];
        }
        (r, jac)
    }
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solver settings.
#[derive(Clone, Debug, Serialize)]
pub struct RayOptions {
    pub seeds: usize,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub residual_tol: f64,
    pub dedupe_radius: f64,
    /// Rerun with four times the seeds and compare counts.
    pub two_resolution: bool,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self {
            seeds: DEFAULT_SEEDS,
            max_iterations: 80,
            max_halvings: 30,
            residual_tol: RESIDUAL_TOL,
            dedupe_radius: DEDUPE_RADIUS,
            two_resolution: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RayCountReport {
    pub count: usize,
    /// Unit ray directions in R^6.
    pub rays: Vec<[f64; 6]>,
    /// Coefficients `x` with `ray = x M`.
    pub coefficients: Vec<[f64; 3]>,
    pub residuals: Vec<f64>,
    /// Pairwise angles between rays, degrees, in (i, j) lexicographic order.
    pub pairwise_angles_deg: Vec<f64>,
    pub seeds: usize,
    /// Seeds that reached a solution.
    pub accepted: usize,
    /// Seeds that settled at a local minimum of the squared residual.
    pub stationary: usize,
    /// Seeds still moving when the iteration budget ran out.
    pub unconverged: usize,
    /// Count at four times the seeds, when requested.
    pub fine_count: Option<usize>,
    pub stable: bool,
    /// Largest distance from a ray to the plane's span.
    pub max_plane_distance: f64,
}

/// Points of a Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let t = i as f64 + 0.5;
            let z = 1.0 - 2.0 * t / n as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * t;
            Vector3::new(a.cos() * s, a.sin() * s, z)
        })
        .collect()
}

/// How a seed's iteration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SeedOutcome {
    /// Residual below the acceptance tolerance.
    Solution,
    /// Settled at a stationary point of the squared residual that is not a
    /// solution.
    Stationary,
    /// Still moving when the iteration budget ran out.
    Unconverged,
}

/// Damped Gauss-Newton from one seed.
fn solve_seed(link: &HLLink, m: &CMat3, seed: Vector3<f64>, opts: &RayOptions) -> (Vector3<f64>, f64, SeedOutcome) {
    let mut x = seed;
    let (mut r, mut jac) = link.system(&x, m);
    let mut cost = sum_sq(&r);
    let mut settled = false;
    for _ in 0..opts.max_iterations {
        if max_abs(&r) < 1e-15 {
            settled = true;
            break;
        }
        let jm = nalgebra::Matrix5x3::from_fn(|i, j| jac[i][j]);
        let rv = nalgebra::Vector5::from_column_slice(&r);
        let jtj = jm.transpose() * jm;
        let jtr = jm.transpose() * rv;
        let step = match jtj.cholesky() {
            Some(ch) => -ch.solve(&jtr),
            None => match jtj.try_inverse() {
                Some(inv) => -(inv * jtr),
                None => {
                    settled = true;
                    break;
                }
            },
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = x + step * scale;
            let n = trial.norm();
            if n > 0.0 {
                trial /= n;
            }
            let (tr, tj) = link.system(&trial, m);
            let tc = sum_sq(&tr);
            if tc < cost {
                x = trial;
                r = tr;
                jac = tj;
                cost = tc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.norm() * scale < 1e-14 {
            settled = true;
            break;
        }
    }
    let res = max_abs(&r);
    let outcome = if res <= opts.residual_tol {
        SeedOutcome::Solution
    } else if settled {
        SeedOutcome::Stationary
    } else {
        SeedOutcome::Unconverged
    };
    (x, res, outcome)
}

/// Complex rows of an orthonormal frame of the plane.
pub fn orthonormal_complex_rows(p: &OrientedPlane3) -> CMat3 {
    let q = p.orthonormal_frame();
    CMat3::from_fn(|i, j| c(q[i][j], q[i][j + 3]))
}

struct Pass {
    sols: Vec<(Vector3<f64>, f64)>,
    accepted: usize,
    stationary: usize,
    unconverged: usize,
}

fn count_once(m: &CMat3, n: usize, opts: &RayOptions) -> Pass {
    let link = HLLink;
    let seeds = fibonacci_sphere(n);
    let results: Vec<_> = seeds.par_iter().map(|s| solve_seed(&link, m, *s, opts)).collect();
    let mut sols: Vec<(Vector3<f64>, f64)> = Vec::new();
    let (mut accepted, mut stationary, mut unconverged) = (0, 0, 0);
    for (x, res, outcome) in results {
        match outcome {
            SeedOutcome::Solution => accepted += 1,
            SeedOutcome::Stationary => {
                stationary += 1;
                continue;
            }
            SeedOutcome::Unconverged => {
                unconverged += 1;
                continue;
            }
        }
        let ray = ray_of(m, &x);
        match sols.iter_mut().find(|(y, _)| {
            let other = ray_of(m, y);
            angle_between(&ray, &other) < opts.dedupe_radius
        }) {
            Some(existing) => {
                if res < existing.1 {
                    *existing = (x, res);
                }
            }
            None => sols.push((x, res)),
        }
    }
    Pass { sols, accepted, stationary, unconverged }
}

fn ray_of(m: &CMat3, x: &Vector3<f64>) -> [f64; 6] {
    let v = HLLink::point(x, m);
    let r = linalg::realify_vec(&v);
    let n = linalg::norm6(&r);
    r.map(|t| t / n)
}

/// Angle in radians between unit vectors.
pub fn angle_between(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let d: [f64; 6] = std::array::from_fn(|k| a[k] - b[k]);
    2.0 * (0.5 * linalg::norm6(&d)).min(1.0).asin()
}

/// Rays in which the cone meets the plane.
pub fn count_rays(p: &OrientedPlane3, opts: &RayOptions) -> Result<RayCountReport> {
    if opts.seeds == 0 {
        return Err(Error::Invalid("seed count must be positive".into()));
    }
    let m = orthonormal_complex_rows(p);
    let pass = count_once(&m, opts.seeds, opts);
    if 2 * pass.unconverged > opts.seeds {
        return Err(Error::Numeric(format!(
            "{} of {} seeds failed to converge; the plane may be degenerate",
            pass.unconverged, opts.seeds
        )));
    }
    let sols = pass.sols;
    let fine_count = if opts.two_resolution {
        Some(count_once(&m, 4 * opts.seeds, opts).sols.len())
    } else {
        None
    };
    let rays: Vec<[f64; 6]> = sols.iter().map(|(x, _)| ray_of(&m, x)).collect();
    let mut angles = Vec::new();
    for i in 0..rays.len() {
        for j in i + 1..rays.len() {
            angles.push(angle_between(&rays[i], &rays[j]).to_degrees());
        }
    }
    let max_plane_distance = rays.iter().map(|r| p.distance_to_span(r)).fold(0.0, f64::max);
    let count = rays.len();
    Ok(RayCountReport {
        count,
        coefficients: sols.iter().map(|(x, _)| [x[0], x[1], x[2]]).collect(),
        residuals: sols.iter().map(|s| s.1).collect(),
        rays,
        pairwise_angles_deg: angles,
        seeds: opts.seeds,
        accepted: pass.accepted,
        stationary: pass.stationary,
        unconverged: pass.unconverged,
        fine_count,
        stable: fine_count.map_or(true, |f| f == count),
        max_plane_distance,
    })
}

/// True if some two rays are antipodal within `tol` radians.
pub fn has_antipodal_pair(rays: &[[f64; 6]], tol: f64) -> bool {
    for i in 0..rays.len() {
        for j in i + 1..rays.len() {
            let neg = rays[j].map(|t| -t);
            if angle_between(&rays[i], &neg) < tol {
                return true;
            }
        }
    }
    false
}

/// Coefficient matrix of `c P = c' P R(t, t)` in unknowns `(c, c')`, rows
/// alternating real and imaginary parts of each complex component.
pub fn a_matrix(p: &OrientedPlane3, t: f64) -> Matrix6<f64> {
    let m = complex_rows(p);
    let pr = m * r_diag(t, t).0;
    let mut a = Matrix6::zeros();
    for j in 0..3 {
        for k in 0..3 {
            a[(2 * j, k)] = m[(k, j)].re;
            a[(2 * j + 1, k)] = m[(k, j)].im;
            a[(2 * j, k + 3)] = -pr[(k, j)].re;
            a[(2 * j + 1, k + 3)] = -pr[(k, j)].im;
        }
    }
    a
}

fn complex_rows(p: &OrientedPlane3) -> CMat3 {
    CMat3::from_fn(|i, j| c(p.rows[i][j], p.rows[i][j + 3]))
}

/// `det A(t)`; vanishes exactly when `P` and `P R(t, t)` meet nontrivially.
pub fn det_a(p: &OrientedPlane3, t: f64) -> f64 {
    a_matrix(p, t).determinant()
}

/// The same determinant from the 6 x 6 matrix of stacked realified rows.
pub fn det_a_stacked(p: &OrientedPlane3, t: f64) -> f64 {
    let q = p.right_mul(&r_diag(t, t).0);
    Matrix6::from_fn(|i, j| if i < 3 { p.rows[i][j] } else { q.rows[i - 3][j] }).determinant()
}

#[derive(Clone, Debug, Serialize)]
pub struct RootScan {
    pub roots: Vec<f64>,
    pub m0: f64,
}

/// Roots of `det_a(p, .)` on [-pi, pi) bracketed at `step` and bisected.
pub fn scan_roots(p: &OrientedPlane3, step: f64) -> Result<Vec<f64>> {
    use std::f64::consts::PI;
    let probe: f64 = (0..32).map(|k| det_a(p, -PI + (k as f64 + 0.37) * 2.0 * PI / 32.0).abs()).fold(0.0, f64::max);
    if probe < 1e-12 {
        return Err(Error::Degree("det A vanishes identically".into()));
    }
    let n = (2.0 * PI / step).ceil() as usize;
    let ts: Vec<f64> = (0..=n).map(|k| (-PI + k as f64 * step).min(PI)).collect();
    let vals: Vec<f64> = ts.par_iter().map(|&t| det_a(p, t)).collect();
    let mut roots = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (ts[k], ts[k + 1]);
        let (mut fa, fb) = (vals[k], vals[k + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 || fb == 0.0 {
            continue;
        }
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            let fm = det_a(p, mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fa * fm < 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    Ok(roots)
}

/// Smallest `|t| > 1e-6` with `det_a(p, t) = 0`.
pub fn min_nonzero_root_with_step(p: &OrientedPlane3, step: f64) -> Result<RootScan> {
    let roots = scan_roots(p, step)?;
    let m0 = roots
        .iter()
        .filter(|t| t.abs() > 1e-6)
        .map(|t| t.abs())
        .fold(f64::INFINITY, f64::min);
    if !m0.is_finite() {
        return Err(Error::Numeric("no nonzero root of det A".into()));
    }
    Ok(RootScan { roots, m0 })
}

pub fn min_nonzero_root(p: &OrientedPlane3) -> Result<f64> {
    Ok(min_nonzero_root_with_step(p, 1e-3)?.m0)
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizingCollection {
    pub degree: usize,
    pub m0: f64,
    /// Rotation step `m0 / (2n)`.
    pub step: f64,
    pub planes: Vec<OrientedPlane3>,
    /// The single ray of each plane on the cone.
    pub rays: Vec<[f64; 6]>,
    pub cone: &'static str,
}

/// Base plane of every realizing collection.
pub fn base_plane() -> OrientedPlane3 {
    p_plane(0.0, std::f64::consts::FRAC_PI_4)
}

/// `n` planes `P(0, pi/4) R(s_j, s_j)`, `s_j = (j - 1) m0 / (2n)`, each
/// meeting the cone in one ray and each other only at the origin.
pub fn realizing_collection(n: usize, opts: &RayOptions) -> Result<RealizingCollection> {
    if n == 0 {
        return Err(Error::Invalid("degree must be at least 1".into()));
    }
    let base = base_plane();
    let m0 = min_nonzero_root(&base)?;
    realizing_collection_with_m0(n, m0, opts)
}

pub fn realizing_collection_with_m0(n: usize, m0: f64, opts: &RayOptions) -> Result<RealizingCollection> {
    let base = base_plane();
    let step = m0 / (2.0 * n as f64);
    let planes: Vec<OrientedPlane3> = (0..n)
        .map(|j| {
            let s = j as f64 * step;
            let mut q = base.right_mul(&r_diag(s, s).0);
            q.origin = None;
            q
        })
        .collect();
    for j in 0..n {
        for k in j + 1..n {
            let d = intersection_dimension(&planes[j], &planes[k]);
            if d != 0 {
                return Err(Error::Certificate(format!("planes {} and {} meet in dimension {d}", j + 1, k + 1)));
            }
        }
    }
    let mut rays = Vec::with_capacity(n);
    for (j, q) in planes.iter().enumerate() {
        let rep = count_rays(q, opts)?;
        if rep.count != 1 {
            return Err(Error::Certificate(format!("plane {} meets the cone in {} rays", j + 1, rep.count)));
        }
        rays.push(rep.rays[0]);
    }
    Ok(RealizingCollection { degree: n, m0, step, planes, rays, cone: "harvey-lawson" })
}

/// Small sanity view of the plane as an SU(3) matrix, used in reports.
pub fn plane_matrix(tau: f64, theta: f64) -> unitary_planes::ComplexMatrix3 {
    unitary_planes::p_matrix(tau, theta)
}

/// Dense rank of the coefficient matrix, for diagnostics.
pub fn a_rank(p: &OrientedPlane3, t: f64) -> usize {
    let a = a_matrix(p, t);
    linalg::numerical_rank(&DMatrix::from_fn(6, 6, |i, j| a[(i, j)]), unitary_planes::RANK_CUTOFF)
}

/// Gram matrix of ray directions, used for the tetrahedron check.
pub fn ray_cosines(rays: &[[f64; 6]]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..rays.len() {
        for j in i + 1..rays.len() {
            out.push(linalg::dot6(&rays[i], &rays[j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_a_at_quarter_turn() {
        let exact = (3024.0 * 2f64.sqrt() - 4752.0) / 15552.0;
        let p = base_plane();
        let t = std::f64::consts::FRAC_PI_4;
        assert!((det_a(&p, t) - exact).abs() < 1e-12);
        assert!((det_a_stacked(&p, t) - exact).abs() < 1e-12);
    }

    #[test]
    fn det_a_vanishes_at_zero() {
        assert!(det_a(&base_plane(), 0.0).abs() < 1e-14);
    }

    #[test]
    fn fibonacci_points_are_unit() {
        for p in fibonacci_sphere(100) {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }
}
