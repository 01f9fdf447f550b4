//! Lagrangian potentials on boxes in (x1, x2, x3) with derivatives to order 3.
//!
//! The graph of `grad F` over the x-coordinates is Lagrangian for any `F`.
//! Cone potentials are recovered from the cone itself: each point above `x`
//! is found by Newton's method in cone coordinates, and by degree-2
//! homogeneity `F(x) = x . grad F(x) / 2`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat3, CVec3, I};

pub type Mat3 = [[f64; 3]; 3];
pub type Tensor3 = [[[f64; 3]; 3]; 3];

/// Value, gradient, Hessian and third derivatives at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: Mat3,
    pub third: Tensor3,
}

impl Derivs {
    pub fn sub(&self, o: &Derivs) -> Derivs {
        let mut out = *self;
        out.value -= o.value;
        for i in 0..3 {
            out.grad[i] -= o.grad[i];
            for j in 0..3 {
                out.hess[i][j] -= o.hess[i][j];
                for k in 0..3 {
                    out.third[i][j][k] -= o.third[i][j][k];
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Derivs) -> Derivs {
        let neg = Derivs::default().sub(o);
        self.sub(&neg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    ConeGraph,
    QuadraticModel,
    Reflected,
    Bridged,
}

pub trait Potential: Send + Sync {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs>;
    fn kind(&self) -> PotentialKind;
}

/// Axis-aligned box in (x1, x2, x3).
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn contains(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] - 1e-12 && x[i] <= self.hi[i] + 1e-12)
    }
}

/// A potential together with the box it is certified on.
#[derive(Clone)]
pub struct PotentialPatch {
    pub domain: Box3,
    pub kind: PotentialKind,
    pub potential: Arc<dyn Potential>,
}

impl std::fmt::Debug for PotentialPatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialPatch").field("domain", &self.domain).field("kind", &self.kind).finish()
    }
}

impl PotentialPatch {
    pub fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        self.potential.derivs(x)
    }
}

/// `rho (x1^2 - x2^2) / 2`, whose gradient graph is the plane
/// `{(x1, x2, x3, rho x1, -rho x2, 0)}`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticModel {
    pub rho: f64,
}

impl Potential for QuadraticModel {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        let r = self.rho;
        let mut d = Derivs { value: r * (x[0] * x[0] - x[1] * x[1]) / 2.0, grad: [r * x[0], -r * x[1], 0.0], ..Default::default() };
        d.hess[0][0] = r;
        d.hess[1][1] = -r;
        Ok(d)
    }

    fn kind(&self) -> PotentialKind {
        PotentialKind::QuadraticModel
    }
}

/// `F'(x) = F(-x1, x2, 2 p3 - x3)`, the potential of the image of the graph
/// under `diag(-1, 1, -1)` followed by translation by `2 p3` along x3.
pub struct Reflected {
    pub inner: Arc<dyn Potential>,
    pub p3: f64,
}

const REFLECT: [f64; 3] = [-1.0, 1.0, -1.0];

impl Potential for Reflected {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        let y = [-x[0], x[1], 2.0 * self.p3 - x[2]];
        let d = self.inner.derivs(&y)?;
        let s = REFLECT;
        let mut out = Derivs { value: d.value, ..Default::default() };
        for i in 0..3 {
            out.grad[i] = s[i] * d.grad[i];
            for j in 0..3 {
                out.hess[i][j] = s[i] * s[j] * d.hess[i][j];
                for k in 0..3 {
                    out.third[i][j][k] = s[i] * s[j] * s[k] * d.third[i][j][k];
                }
            }
        }
        Ok(out)
    }

    fn kind(&self) -> PotentialKind {
        PotentialKind::Reflected
    }
}

/// Derivatives of `c(x3) D(x)` by the Leibniz rule, where `cj` holds
/// `c, c', c'', c'''`.
pub fn times_x3_function(cj: &[f64; 4], d: &Derivs) -> Derivs {
    let e = |i: usize| if i == 2 { 1.0 } else { 0.0 };
    let mut out = Derivs { value: cj[0] * d.value, ..Default::default() };
    for i in 0..3 {
        out.grad[i] = cj[0] * d.grad[i] + cj[1] * e(i) * d.value;
        for j in 0..3 {
            out.hess[i][j] = cj[0] * d.hess[i][j]
                + cj[1] * (e(i) * d.grad[j] + e(j) * d.grad[i])
                + cj[2] * e(i) * e(j) * d.value;
            for k in 0..3 {
                out.third[i][j][k] = cj[0] * d.third[i][j][k]
                    + cj[1] * (e(i) * d.hess[j][k] + e(j) * d.hess[i][k] + e(k) * d.hess[i][j])
                    + cj[2] * (e(i) * e(j) * d.grad[k] + e(i) * e(k) * d.grad[j] + e(j) * e(k) * d.grad[i])
                    + cj[3] * e(i) * e(j) * e(k) * d.value;
            }
        }
    }
    out
}

/// `chi F + (1 - chi) F'` with `chi` depending on x3 only.
pub struct Bridged {
    pub f: Arc<dyn Potential>,
    pub f_prime: Arc<dyn Potential>,
    pub chi: Cutoff,
}

impl Potential for Bridged {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        let a = self.f.derivs(x)?;
        let b = self.f_prime.derivs(x)?;
        let cj = self.chi.derivatives(x[2]);
        Ok(b.add(&times_x3_function(&cj, &a.sub(&b))))
    }

    fn kind(&self) -> PotentialKind {
        PotentialKind::Bridged
    }
}

/// Slope profile `rho(x3)` with derivatives to order 3.
pub trait SlopeProfile: Send + Sync {
    fn jet(&self, x3: f64) -> [f64; 4];
}

/// `rho1 + (rho2 - rho1)(1 - chi(x3))`.
#[derive(Clone, Copy, Debug)]
pub struct CutoffProfile {
    pub rho1: f64,
    pub rho2: f64,
    pub chi: Cutoff,
}

impl SlopeProfile for CutoffProfile {
    fn jet(&self, x3: f64) -> [f64; 4] {
        let c = self.chi.derivatives(x3);
        let d = self.rho2 - self.rho1;
        [self.rho1 + d * (1.0 - c[0]), -d * c[1], -d * c[2], -d * c[3]]
    }
}

/// `rho(x3) (x1^2 - x2^2) / 2`, bridging two planes of slopes `rho1`, `rho2`.
pub struct SlopeBridge {
    pub profile: Arc<dyn SlopeProfile>,
}

impl SlopeBridge {
    /// Rejects profiles whose derivative changes sign on `[lo, hi]`.
    pub fn new(profile: Arc<dyn SlopeProfile>, lo: f64, hi: f64) -> Result<Self> {
        let n = 2000;
        let (mut inc, mut dec) = (false, false);
        for k in 0..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            let d = profile.jet(t)[1];
            inc |= d > 1e-12;
            dec |= d < -1e-12;
        }
        if inc && dec {
            return Err(Error::Invalid("slope profile is not monotone".into()));
        }
        Ok(Self { profile })
    }
}

impl Potential for SlopeBridge {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        let q = QuadraticModel { rho: 1.0 }.derivs(x)?;
        Ok(times_x3_function(&self.profile.jet(x[2]), &q))
    }

    fn kind(&self) -> PotentialKind {
        PotentialKind::Bridged
    }
}

/// The Harvey-Lawson cone after a coordinate change `S`, as a graph over
/// the x-coordinates near the image of one of its rays.
///
/// Cone points are `r Re6(S u(a, b))` with
/// `u(a, b) = (e^{ia}, e^{ib}, e^{-i(a+b)}) / sqrt 3`.
#[derive(Clone, Debug)]
pub struct ConePotential {
    pub s: CMat3,
    /// Torus angles of the ray.
    pub a0: f64,
    pub b0: f64,
}

struct ConeJet {
    x: Vector3<f64>,
    y: Vector3<f64>,
    dx: Matrix3<f64>,
    dy: Matrix3<f64>,
    /// Second derivatives in (r, a, b), indexed `[m][n]`, of x and y parts.
    ddx: [[Vector3<f64>; 3]; 3],
    ddy: [[Vector3<f64>; 3]; 3],
}

impl ConePotential {
    /// Recovers the torus angles from a unit ray on the cone; `s` must send
    /// the ray to the positive x3-axis.
    pub fn from_ray(s: CMat3, ray: &[f64; 6]) -> Self {
        let v = CVec3::new(c(ray[0], ray[3]), c(ray[1], ray[4]), c(ray[2], ray[5]));
        Self { s, a0: v[0].arg(), b0: v[1].arg() }
    }

    fn u_derivs(a: f64, b: f64) -> [CVec3; 6] {
        let k = 1.0 / 3f64.sqrt();
        let ea = (I * a).exp() * k;
        let eb = (I * b).exp() * k;
        let ec = (-I * (a + b)).exp() * k;
        let z = c(0.0, 0.0);
        [
            CVec3::new(ea, eb, ec),
            CVec3::new(I * ea, z, -I * ec),
            CVec3::new(z, I * eb, -I * ec),
            CVec3::new(-ea, z, -ec),
            CVec3::new(z, z, -ec),
            CVec3::new(z, -eb, -ec),
        ]
    }

    fn jet(&self, p: &Vector3<f64>) -> ConeJet {
        let (r, a, b) = (p[0], p[1], p[2]);
        let u = Self::u_derivs(a, b);
        let su: Vec<CVec3> = u.iter().map(|v| self.s * v).collect();
        let split = |z: &CVec3| (Vector3::from_fn(|i, _| z[i].re), Vector3::from_fn(|i, _| z[i].im));
        let (x0, y0) = split(&su[0]);
        let (xa, ya) = split(&su[1]);
        let (xb, yb) = split(&su[2]);
        let (xaa, yaa) = split(&su[3]);
        let (xab, yab) = split(&su[4]);
        let (xbb, ybb) = split(&su[5]);
        let dx = Matrix3::from_columns(&[x0, xa * r, xb * r]);
        let dy = Matrix3::from_columns(&[y0, ya * r, yb * r]);
        let zero = Vector3::zeros();
        let ddx = [[zero, xa, xb], [xa, xaa * r, xab * r], [xb, xab * r, xbb * r]];
        let ddy = [[zero, ya, yb], [ya, yaa * r, yab * r], [yb, yab * r, ybb * r]];
        ConeJet { x: x0 * r, y: y0 * r, dx, dy, ddx, ddy }
    }

    /// Cone coordinates `(r, a, b)` of the point above `x`.
    pub fn solve(&self, x: &[f64; 3]) -> Result<Vector3<f64>> {
        let target = Vector3::new(x[0], x[1], x[2]);
        let mut p = Vector3::new(x[2], self.a0, self.b0);
        let scale = target.norm().max(1e-300);
        for _ in 0..60 {
            let j = self.jet(&p);
            let res = j.x - target;
            if res.norm() <= 1e-15 * scale {
                return Ok(p);
            }
            let Some(inv) = j.dx.try_inverse() else {
                break;
            };
            let step = inv * res;
            p -= step;
            if step.norm() <= 1e-16 * (1.0 + p.norm()) {
                let res = self.jet(&p).x - target;
                if res.norm() <= 1e-13 * scale {
                    return Ok(p);
                }
                break;
            }
        }
        let res = (self.jet(&p).x - target).norm();
        if res <= 1e-13 * scale && p[0] > 0.0 {
            return Ok(p);
        }
        Err(Error::Numeric(format!(
            "cone is not graphical at x = ({:.6e}, {:.6e}, {:.6e}); Newton residual {res:.3e}",
            x[0], x[1], x[2]
        )))
    }
}

impl Potential for ConePotential {
    fn derivs(&self, x: &[f64; 3]) -> Result<Derivs> {
        let p = self.solve(x)?;
        let j = self.jet(&p);
        let inv = j.dx.try_inverse().ok_or_else(|| Error::Numeric("singular cone chart".into()))?;
        let df = j.dy * inv;
        let f = j.y;
        let mut out = Derivs {
            value: 0.5 * (x[0] * f[0] + x[1] * f[1] + x[2] * f[2]),
            grad: [f[0], f[1], f[2]],
            ..Default::default()
        };
        for i in 0..3 {
            for k in 0..3 {
                out.hess[i][k] = 0.5 * (df[(i, k)] + df[(k, i)]);
            }
        }
        // d_j d_k f = (D^2 Y - Df D^2 X)[p_j, p_k] with p_j = DX^{-1} e_j.
        let pc: Vec<Vector3<f64>> = (0..3).map(|j| inv.column(j).into_owned()).collect();
        for jj in 0..3 {
            for kk in jj..3 {
                let mut second = Vector3::zeros();
                for m in 0..3 {
                    for n in 0..3 {
                        let w = pc[jj][m] * pc[kk][n];
                        if w != 0.0 {
                            second += (j.ddy[m][n] - df * j.ddx[m][n]) * w;
                        }
                    }
                }
                for l in 0..3 {
                    out.third[jj][kk][l] = second[l];
                    out.third[kk][jj][l] = second[l];
                }
            }
        }
        // Symmetrize over all index orders.
        let t = out.third;
        for a in 0..3 {
            for b in 0..3 {
                for cc in 0..3 {
                    out.third[a][b][cc] =
                        (t[a][b][cc] + t[a][cc][b] + t[b][a][cc] + t[b][cc][a] + t[cc][a][b] + t[cc][b][a]) / 6.0;
                }
            }
        }
        Ok(out)
    }

    fn kind(&self) -> PotentialKind {
        PotentialKind::ConeGraph
    }
}

/// Tangent plane of the cone at the torus point `u(a, b)`, as realified rows
/// `u`, `i diag(1, 0, -1) u`, `i diag(0, 1, -1) u` (before any coordinate change).
pub fn cone_tangent_rows(a: f64, b: f64) -> [[f64; 6]; 3] {
    let u = ConePotential::u_derivs(a, b);
    let re6 = |z: &CVec3| [z[0].re, z[1].re, z[2].re, z[0].im, z[1].im, z[2].im];
    [re6(&u[0]), re6(&u[1]), re6(&u[2])]
}

/// Loop integral of `grad F . dx` around the rectangle with corner `x`,
/// spanned by `e_i * len` and `e_j * len`, by 16-point Gauss-Legendre per side.
pub fn loop_integral(p: &dyn Potential, x: &[f64; 3], i: usize, j: usize, len: f64) -> Result<f64> {
    let rule = crate::linalg::gauss_legendre_01(16);
    let mut corners = [*x; 4];
    corners[1][i] += len;
    corners[2][i] += len;
    corners[2][j] += len;
    corners[3][j] += len;
    let mut total = 0.0;
    for side in 0..4 {
        let a = corners[side];
        let b = corners[(side + 1) % 4];
        let d: [f64; 3] = std::array::from_fn(|k| b[k] - a[k]);
        for (t, w) in &rule {
            let q: [f64; 3] = std::array::from_fn(|k| a[k] + t * d[k]);
            let g = p.derivs(&q)?.grad;
            total += w * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2]);
        }
    }
    Ok(total)
}
