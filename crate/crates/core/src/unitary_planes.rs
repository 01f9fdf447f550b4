//! Oriented real 3-planes in R^6 = C^3 written as row spans of complex 3 x 3
//! matrices, with Lagrangian tests, intersection dimension, and the
//! SU(3) normal form for a plane meeting a second plane along a line.
//!
//! Rows are complex row vectors `(z1, z2, z3)`, realified as
//! `(Re z1, Re z2, Re z3, Im z1, Im z2, Im z3)`. Diagonal torus elements act
//! on planes from the right (`row * R`), while coordinate changes act on
//! column vectors, so a coordinate change `S` sends a row `w` to `w * S^T`.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms6::{special_lagrangian_form, KForm};
use crate::linalg::{self, c, frobenius, realify, CMat3, CVec3, C64, I};

pub const UNITARY_TOL: f64 = 1e-12;
pub const LAGRANGIAN_TOL: f64 = 1e-10;
pub const RANK_CUTOFF: f64 = 1e-9;

/// 3 x 3 complex matrix with unitary checks on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexMatrix3(pub CMat3);

impl ComplexMatrix3 {
    pub fn identity() -> Self {
        Self(CMat3::identity())
    }

    pub fn from_rows(rows: [[C64; 3]; 3]) -> Self {
        Self(CMat3::from_fn(|i, j| rows[i][j]))
    }

    pub fn det(&self) -> C64 {
        self.0.determinant()
    }

    pub fn is_unitary(&self) -> bool {
        linalg::unitarity_defect(&self.0) <= UNITARY_TOL
    }

    pub fn is_special_unitary(&self) -> bool {
        self.is_unitary() && (self.det() - c(1.0, 0.0)).norm() <= UNITARY_TOL
    }

    pub fn realify(&self) -> nalgebra::Matrix6<f64> {
        realify(&self.0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `[[re, im], ...]` pairs row by row, for reports.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        (0..3).map(|i| (0..3).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect()).collect()
    }
}

impl Serialize for ComplexMatrix3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(s)
    }
}

/// Oriented 3-plane, orientation given by `rows[0] ^ rows[1] ^ rows[2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedPlane3 {
    pub rows: [[f64; 6]; 3],
    #[serde(skip)]
    pub origin: Option<ComplexMatrix3>,
}

impl OrientedPlane3 {
    pub fn from_rows(rows: [[f64; 6]; 3]) -> Result<Self> {
        let p = Self { rows, origin: None };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let normalized: Vec<[f64; 6]> = self
            .rows
            .iter()
            .map(|r| {
                let n = linalg::norm6(r);
                if n == 0.0 {
                    *r
                } else {
                    r.map(|x| x / n)
                }
            })
            .collect();
        let g = Matrix3::from_fn(|i, j| linalg::dot6(&normalized[i], &normalized[j]));
        if g.determinant() <= 1e-12 {
            return Err(Error::Invalid("plane rows are linearly dependent".into()));
        }
        Ok(())
    }

    /// Orientation-preserving orthonormal frame.
    pub fn orthonormal_frame(&self) -> [[f64; 6]; 3] {
        let q = linalg::gram_schmidt(&self.rows, 1e-300).expect("validated rows");
        [q[0], q[1], q[2]]
    }

    /// Same plane with its orientation reversed.
    pub fn reversed(&self) -> Self {
        let mut rows = self.rows;
        rows[2] = rows[2].map(|x| -x);
        Self { rows, origin: None }
    }

    /// Value of the special Lagrangian form on the oriented orthonormal frame.
    pub fn phi_value(&self) -> f64 {
        let phi: KForm<f64> = special_lagrangian_form();
        phi.eval_vectors(&self.orthonormal_frame()).expect("degree 3")
    }

    /// Flip the orientation if needed so that phi is nonnegative on it.
    pub fn with_phi_orientation(&self) -> Self {
        if self.phi_value() < 0.0 {
            self.reversed()
        } else {
            self.clone()
        }
    }

    /// Apply a coordinate change `S` (column action) to every row.
    pub fn transformed(&self, s: &CMat3) -> Self {
        let m = realify(s);
        let rows = self.rows.map(|r| {
            let v = m * nalgebra::Vector6::from_row_slice(&r);
            [v[0], v[1], v[2], v[3], v[4], v[5]]
        });
        Self { rows, origin: self.origin.map(|o| ComplexMatrix3(o.0 * s.transpose())) }
    }

    /// Right multiplication of every complex row by `r`.
    pub fn right_mul(&self, r: &CMat3) -> Self {
        self.transformed(&r.transpose())
    }

    /// Orthogonal projection of `v` onto the span.
    pub fn project(&self, v: &[f64; 6]) -> [f64; 6] {
        let q = self.orthonormal_frame();
        let mut out = [0.0; 6];
        for row in &q {
            let d = linalg::dot6(v, row);
            for k in 0..6 {
                out[k] += d * row[k];
            }
        }
        out
    }

    pub fn distance_to_span(&self, v: &[f64; 6]) -> f64 {
        let p = self.project(v);
        let d: [f64; 6] = std::array::from_fn(|k| v[k] - p[k]);
        linalg::norm6(&d)
    }
}

/// Realify each row of `m` into a plane.
pub fn plane_from_complex(m: &ComplexMatrix3) -> Result<OrientedPlane3> {
    let rows: [[f64; 6]; 3] = std::array::from_fn(|i| {
        let z = CVec3::new(m.0[(i, 0)], m.0[(i, 1)], m.0[(i, 2)]);
        linalg::realify_vec(&z)
    });
    let mut p = OrientedPlane3::from_rows(rows)?;
    p.origin = Some(*m);
    Ok(p)
}

/// Tangent plane of the cone over the torus link at (1,1,1)/sqrt 3, as an
/// orthonormal SU(3) matrix.
pub fn pi0() -> ComplexMatrix3 {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    ComplexMatrix3::from_rows([
        [c(1.0 / s3, 0.0), c(1.0 / s3, 0.0), c(1.0 / s3, 0.0)],
        [c(0.0, 1.0 / s2), c(0.0, 0.0), c(0.0, -1.0 / s2)],
        [c(0.0, 1.0 / s6), c(0.0, -(2.0f64 / 3.0).sqrt()), c(0.0, 1.0 / s6)],
    ])
}

/// Block rotation multiplying `pi0` on the left.
pub fn rho(tau: f64, theta: f64) -> ComplexMatrix3 {
    let e = (I * theta).exp();
    let ec = (-I * theta).exp();
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    ComplexMatrix3::from_rows([
        [o, z, z],
        [z, e * tau.cos(), e * tau.sin()],
        [z, -ec * tau.sin(), ec * tau.cos()],
    ])
}

/// `diag(e^{ia}, e^{ib}, e^{-i(a+b)})`.
pub fn r_diag(a: f64, b: f64) -> ComplexMatrix3 {
    let d = [(I * a).exp(), (I * b).exp(), (-I * (a + b)).exp()];
    ComplexMatrix3(CMat3::from_diagonal(&CVec3::new(d[0], d[1], d[2])))
}

/// `rho(tau, theta) * pi0` as a complex matrix.
pub fn p_matrix(tau: f64, theta: f64) -> ComplexMatrix3 {
    rho(tau, theta).mul(&pi0())
}

/// The plane `P(tau, theta)`.
pub fn p_plane(tau: f64, theta: f64) -> OrientedPlane3 {
    plane_from_complex(&p_matrix(tau, theta)).expect("SU(3) rows are independent")
}

/// `y1 y2 x3`-plane, oriented so that phi = +1 on it.
pub fn y1y2x3_plane() -> OrientedPlane3 {
    OrientedPlane3::from_rows([
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ])
    .expect("independent")
}

/// `{(x1, x2, x3, rho x1, -rho x2, 0)}` oriented by the x-coordinates.
pub fn gpm_plane(rho: f64) -> OrientedPlane3 {
    OrientedPlane3::from_rows([
        [1.0, 0.0, 0.0, rho, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, -rho, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ])
    .expect("independent")
}

/// Standard symplectic form `sum dx_j ^ dy_j`.
pub fn omega(u: &[f64; 6], v: &[f64; 6]) -> f64 {
    (0..3).map(|j| u[j] * v[j + 3] - u[j + 3] * v[j]).sum()
}

pub fn is_lagrangian(p: &OrientedPlane3) -> bool {
    lagrangian_defect(p) <= LAGRANGIAN_TOL
}

/// Largest `|omega|` over pairs of the orthonormal frame.
pub fn lagrangian_defect(p: &OrientedPlane3) -> f64 {
    let q = p.orthonormal_frame();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            worst = worst.max(omega(&q[i], &q[j]).abs());
        }
    }
    worst
}

pub fn is_special_lagrangian(p: &OrientedPlane3) -> bool {
    is_lagrangian(p) && (p.phi_value() - 1.0).abs() <= LAGRANGIAN_TOL
}

/// Real dimension of the intersection of the spans.
pub fn intersection_dimension(p: &OrientedPlane3, q: &OrientedPlane3) -> usize {
    let a = p.orthonormal_frame();
    let b = q.orthonormal_frame();
    let m = DMatrix::from_fn(6, 6, |i, j| if i < 3 { a[i][j] } else { b[i - 3][j] });
    6 - linalg::numerical_rank(&m, RANK_CUTOFF)
}

/// Result of [`align_pair`].
#[derive(Clone, Debug)]
pub struct Alignment {
    /// Coordinate change in SU(3), acting on column vectors.
    pub s: ComplexMatrix3,
    /// Slope of the aligned partner plane `{(x1, x2, x3, rho x1, -rho x2, 0)}`.
    pub rho: f64,
    /// Angle of the final rotation in the (z1, z2) coordinates.
    pub lambda: f64,
    /// `|w2 - mu w1|` defect of the partner factor as a complex line in
    /// `w1 = x1 + i x2`, `w2 = y1 - i y2`.
    pub complex_line_defect: f64,
}

impl Alignment {
    /// Compose with `diag(-1, 1, -1)`, which keeps the y1y2x3-plane and the
    /// partner plane but reverses the ray.
    pub fn flipped(&self) -> Self {
        let f = CMat3::from_diagonal(&CVec3::new(c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)));
        Self { s: ComplexMatrix3(f * self.s.0), ..self.clone() }
    }
}

fn rot_z12(lambda: f64) -> CMat3 {
    let (s, co) = lambda.sin_cos();
    let z = c(0.0, 0.0);
    CMat3::from_fn(|i, j| match (i, j) {
        (0, 0) | (1, 1) => c(co, 0.0),
        (0, 1) => c(-s, 0.0),
        (1, 0) => c(s, 0.0),
        (2, 2) => c(1.0, 0.0),
        _ => z,
    })
}

fn unit_in_plane_orthogonal(frame: &[[f64; 6]; 3], against: &[[f64; 6]]) -> [f64; 6] {
    let mut best = [0.0; 6];
    let mut best_norm = -1.0;
    for r in frame {
        let mut v = *r;
        for a in against {
            let d = linalg::dot6(&v, a);
            for k in 0..6 {
                v[k] -= d * a[k];
            }
        }
        let n = linalg::norm6(&v);
        if n > best_norm {
            best_norm = n;
            best = v.map(|x| x / n);
        }
    }
    best
}

/// SU(3) change of coordinates sending `p` to the y1y2x3-plane, `ray` to the
/// positive x3-axis, and `c_tangent` to a plane `{(x1, x2, x3, rho x1, -rho x2, 0)}`.
///
/// Among the four final rotations that achieve this (they differ by quarter
/// turns and flip the sign of rho), the one closest to the identity in
/// Frobenius norm is returned.
pub fn align_pair(c_tangent: &OrientedPlane3, p: &OrientedPlane3, ray: &[f64; 6]) -> Result<Alignment> {
    let p = p.with_phi_orientation();
    let ct = c_tangent.with_phi_orientation();
    for (name, plane) in [("plane", &p), ("partner", &ct)] {
        if !is_special_lagrangian(plane) {
            return Err(Error::Invalid(format!("{name} is not special Lagrangian")));
        }
    }
    match intersection_dimension(&ct, &p) {
        1 => {}
        d if d >= 2 => return Err(Error::Invalid(format!("tangential intersection (dimension {d})"))),
        _ => return Err(Error::Invalid("planes meet only at the origin".into())),
    }
    let n = linalg::norm6(ray);
    if n == 0.0 {
        return Err(Error::Invalid("zero ray".into()));
    }
    let e = ray.map(|x| x / n);
    if p.distance_to_span(&e) > 1e-8 || ct.distance_to_span(&e) > 1e-8 {
        return Err(Error::Invalid("ray is not in both planes".into()));
    }

    let pf = p.orthonormal_frame();
    let p1 = unit_in_plane_orthogonal(&pf, &[e]);
    let mut p2 = unit_in_plane_orthogonal(&pf, &[e, p1]);
    let phi: KForm<f64> = special_lagrangian_form();
    if phi.eval_vectors(&[p1, p2, e])? < 0.0 {
        p2 = p2.map(|x| -x);
    }
    let cols = [p1, p2, e];
    let v = CMat3::from_fn(|i, j| c(cols[j][i], cols[j][i + 3]));
    let k = CMat3::from_diagonal(&CVec3::new(I, -I, c(1.0, 0.0)));
    let s0 = k * v.adjoint();

    // Partner factor after s0, written in w1 = x1 + i x2, w2 = y1 - i y2.
    let ct0 = ct.transformed(&s0);
    let x3 = crate::forms6::unit(2);
    let cf = ct0.orthonormal_frame();
    let a = unit_in_plane_orthogonal(&cf, &[x3]);
    let b = unit_in_plane_orthogonal(&cf, &[x3, a]);
    let w = |u: &[f64; 6]| (c(u[0], u[1]), c(u[3], -u[4]));
    let (a1, a2) = w(&a);
    let (b1, b2) = w(&b);
    let denom = a1.norm_sqr() + b1.norm_sqr();
    if denom < 1e-20 {
        return Err(Error::Numeric("partner factor is the w2-line".into()));
    }
    let mu = (a1.conj() * a2 + b1.conj() * b2) / denom;
    let defect = ((a2 - mu * a1).norm()).max((b2 - mu * b1).norm()).max(a[5].abs()).max(b[5].abs());

    let beta = mu.arg();
    let mut best: Option<(f64, Alignment)> = None;
    for q in 0..4 {
        let lambda = beta / 2.0 + q as f64 * std::f64::consts::FRAC_PI_2;
        let s = rot_z12(lambda) * s0;
        let rho = mu.norm() * if q % 2 == 0 { 1.0 } else { -1.0 };
        let dist = frobenius(&(s - CMat3::identity()));
        if best.as_ref().map_or(true, |(d, _)| dist < *d - 1e-12) {
            best = Some((dist, Alignment { s: ComplexMatrix3(s), rho, lambda, complex_line_defect: defect }));
        }
    }
    let (_, out) = best.expect("four candidates");
    Ok(out)
}

/// Checks that an alignment does what it claims, returning the worst defect.
pub fn alignment_defect(al: &Alignment, c_tangent: &OrientedPlane3, p: &OrientedPlane3, ray: &[f64; 6]) -> f64 {
    let s = &al.s.0;
    let sp = p.transformed(s);
    let sc = c_tangent.transformed(s);
    let target_p = y1y2x3_plane();
    let target_c = gpm_plane(al.rho);
    let mut worst: f64 = 0.0;
    for r in sp.orthonormal_frame() {
        worst = worst.max(target_p.distance_to_span(&r));
    }
    for r in sc.orthonormal_frame() {
        worst = worst.max(target_c.distance_to_span(&r));
    }
    let m = realify(s);
    let n = linalg::norm6(ray);
    let v = m * nalgebra::Vector6::from_row_slice(ray);
    let img: [f64; 6] = std::array::from_fn(|k| v[k] / n);
    let mut x3 = [0.0; 6];
    x3[2] = 1.0;
    let d: [f64; 6] = std::array::from_fn(|k| img[k] - x3[k]);
    worst.max(linalg::norm6(&d))
}
