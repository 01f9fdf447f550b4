//! The closed form `psi`, its metric, and the grid closedness audit.
//!
//! Work happens in the chart `Q(X, Y) = (X, grad F(X) + Y)` around the glued
//! surface `Sigma = graph grad F`. There the frame field is constant in `Y`,
//! so `phibar_Q = DQ^* phibar` and `tau_Q = d phibar_Q` depend on `X` only,
//! and `psi_Q = phibar_Q - I(tau_Q)` is affine in `Y`:
//! `psi_Q = phibar_Q - sum_j Y_j Phi_j(X)`.
//!
//! The grid uses `(X1, X2, s)` with `X3 = p3 (1 + tanh s)`, which clusters
//! nodes near both cone vertices.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{Matrix6, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::frames::{
    chart_differential, chart_differential_inverse, modified_form, modified_form_differential, FrameSample,
    TangentFrameField,
};
use super::homotopy::{diagonal_pullback, homotopy_primitive, FD4};
use super::potentials::Potential;
use crate::error::{Error, Result};
use crate::form_orbit::factorize_near_phi;
use crate::forms6::{max_diff, max_norm, special_lagrangian_form, KForm, LinearMap6, DIM};
use crate::linalg::{gauss_legendre_01, realify};

/// Tolerance passed to the orbit factorization.
pub const FACTOR_TOL: f64 = 1e-12;

/// Tensor grid over the tube around the segment `{(0, 0, x3)}`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct TubeGrid {
    /// Tube radius: `|X1|, |X2|, |Y_j| <= r`.
    pub r: f64,
    pub p3: f64,
    pub r0: f64,
    /// Nodes along `X1`, `X2`, `s`.
    pub n: [usize; 3],
}

/// Extra layers of nodes beyond the certified box on each side.
pub const PAD: usize = 2;

impl TubeGrid {
    pub fn new(r: f64, p3: f64, r0: f64, n: [usize; 3]) -> Result<Self> {
        if !(r > 0.0 && p3 > 0.0 && r0 > 0.0 && r0 < p3) {
            return Err(Error::Invalid(format!("bad tube geometry r = {r}, p3 = {p3}, r0 = {r0}")));
        }
        if n.iter().any(|k| *k < 5 || k % 2 == 0) {
            return Err(Error::Invalid(format!("grid sizes must be odd and >= 5, got {n:?}")));
        }
        Ok(Self { r, p3, r0, n })
    }

    pub fn s_range(&self) -> (f64, f64) {
        ((self.r0 / self.p3 - 1.0).atanh(), (1.0 - self.r0 / self.p3).atanh())
    }

    pub fn spacing(&self) -> [f64; 3] {
        let (lo, hi) = self.s_range();
        [
            2.0 * self.r / (self.n[0] - 1) as f64,
            2.0 * self.r / (self.n[1] - 1) as f64,
            (hi - lo) / (self.n[2] - 1) as f64,
        ]
    }

    pub fn x3_of(&self, s: f64) -> (f64, f64) {
        let t = s.tanh();
        (self.p3 * (1.0 + t), self.p3 * (1.0 - t * t))
    }

    /// Base point and `dX3/ds` of node `(i, j, k)`; indices may reach `PAD`
    /// beyond the certified range on each side.
    pub fn node(&self, i: isize, j: isize, k: isize) -> ([f64; 3], f64) {
        let h = self.spacing();
        let (lo, _) = self.s_range();
        let s = lo + k as f64 * h[2];
        let (x3, dx3) = self.x3_of(s);
        ([-self.r + i as f64 * h[0], -self.r + j as f64 * h[1], x3], dx3)
    }

    /// Same box with every spacing halved.
    pub fn refined(&self) -> Self {
        Self { n: self.n.map(|k| 2 * k - 1), ..*self }
    }

    /// Smallest chart Jacobian `|det D(Q o chart)| = dX3/ds` over the grid.
    pub fn min_jacobian(&self) -> f64 {
        let (_, a) = self.node(0, 0, -(PAD as isize));
        let (_, b) = self.node(0, 0, (self.n[2] - 1 + PAD) as isize);
        a.min(b)
    }

    pub fn node_count(&self) -> usize {
        self.n.iter().product()
    }

    /// True for base points in the flat end-zones `[r0, 3 r0 / 2]` and
    /// `[2 p3 - 3 r0 / 2, 2 p3 - r0]`.
    pub fn in_end_zone(&self, x3: f64) -> bool {
        let top = 2.0 * self.p3;
        (x3 >= self.r0 - 1e-12 && x3 <= 1.5 * self.r0) || (x3 >= top - 1.5 * self.r0 && x3 <= top - self.r0 + 1e-12)
    }
}

/// Forms at one base point of the chart.
#[derive(Clone, Debug)]
pub struct NodeForms {
    pub sample: FrameSample,
    pub dq: LinearMap6,
    pub dq_inv: LinearMap6,
    pub phibar: KForm,
    pub phibar_q: KForm,
    pub tau_q: KForm,
    /// `psi_Q = phibar_Q - sum_j Y_j phi_j[j]`.
    pub phi_j: [KForm; 3],
}

impl NodeForms {
    pub fn new(field: &TangentFrameField<'_>, x: &[f64; 3], rule: &[(f64, f64)]) -> Result<Self> {
        let sample = field.sample(x)?;
        let dq = chart_differential(&sample.hess);
        let dq_inv = chart_differential_inverse(&sample.hess);
        let phibar = modified_form(sample.frame.theta);
        let phibar_q = phibar.pullback(&dq);
        let tau_q = modified_form_differential(sample.frame.theta, &sample.dtheta).pullback(&dq);
        let mut phi_j: [KForm; 3] = std::array::from_fn(|_| KForm::zero(3).expect("degree 3"));
        for (j, slot) in phi_j.iter_mut().enumerate() {
            let mut p = [x[0], x[1], x[2], 0.0, 0.0, 0.0];
            p[3 + j] = 1.0;
            *slot = homotopy_primitive(|_| Ok(tau_q.clone()), &p, 3, rule)?;
        }
        Ok(Self { sample, dq, dq_inv, phibar, phibar_q, tau_q, phi_j })
    }

    pub fn psi_q(&self, y: &[f64; 3]) -> KForm {
        let mut out = self.phibar_q.clone();
        for j in 0..3 {
            if y[j] != 0.0 {
                out = out.try_sub(&self.phi_j[j].scale(y[j])).expect("degree 3");
            }
        }
        out
    }

    /// `psi` in ambient coordinates at `Q(X, Y)`.
    pub fn psi(&self, y: &[f64; 3]) -> KForm {
        self.psi_q(y).pullback(&self.dq_inv)
    }

    /// Ambient point `Q(X, Y)`.
    pub fn point(&self, y: &[f64; 3]) -> [f64; DIM] {
        let x = self.sample.x;
        let g = self.sample.grad;
        [x[0], x[1], x[2], g[0] + y[0], g[1] + y[1], g[2] + y[2]]
    }

    /// Realified `h` at this node.
    pub fn h_real(&self) -> Matrix6<f64> {
        realify(&self.sample.frame.h)
    }

    /// `max_Y |h^* psi - phi|` over `|Y_j| <= r`; `h^* phibar = phi` so only
    /// the `Y` terms contribute, and the maximum sits at a corner.
    pub fn basin_distance(&self, r: f64) -> f64 {
        let m = LinearMap6::from_matrix(&(self.dq_inv.to_matrix() * self.h_real()));
        let pulled: Vec<KForm> = self.phi_j.iter().map(|f| f.pullback(&m)).collect();
        let phi: KForm = special_lagrangian_form();
        let base = self.phibar_q.pullback(&m);
        let mut worst: f64 = 0.0;
        for c in 0..base.coeffs().len() {
            let lin: f64 = pulled.iter().map(|f| f.coeffs()[c].abs()).sum();
            worst = worst.max((base.coeffs()[c] - phi.coeffs()[c]).abs() + r * lin);
        }
        worst
    }
}

/// Chart-coordinate data stored per node for the differences.
#[derive(Clone, Debug)]
struct NodeData {
    phibar: Vec<f64>,
    phi_j: [Vec<f64>; 3],
    theta: f64,
    unitarity: f64,
    det_defect: f64,
    tangent_defect: f64,
    basin: f64,
}

fn chart_diag(dx3: f64) -> [f64; DIM] {
    [1.0, 1.0, dx3, 1.0, 1.0, 1.0]
}

/// Distance of `h (x1 x2 x3-plane)` from the tangent plane of the graph.
fn tangent_defect(s: &FrameSample, h: &Matrix6<f64>) -> f64 {
    // Tangent plane rows (e_j, H e_j); the normal space is spanned by
    // (-H e_j, e_j), so the defect is the normal component of h e_i.
    let mut n = nalgebra::SMatrix::<f64, 6, 3>::zeros();
    for j in 0..3 {
        n[(3 + j, j)] = 1.0;
        for a in 0..3 {
            n[(a, j)] = -s.hess[a][j];
        }
    }
    let q = n.qr().q();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let v = h.column(i);
        let comp = q.transpose() * v;
        worst = worst.max(comp.norm());
    }
    worst
}

fn node_data(field: &TangentFrameField<'_>, grid: &TubeGrid, i: isize, j: isize, k: isize, rule: &[(f64, f64)]) -> Result<NodeData> {
    let (x, dx3) = grid.node(i, j, k);
    let nf = NodeForms::new(field, &x, rule)
        .map_err(|e| Error::Numeric(format!("node ({i}, {j}, {k}) at x = {x:?}: {e}")))?;
    let d = chart_diag(dx3);
    let h = &nf.sample.frame.h;
    let unitarity = crate::linalg::unitarity_defect(h);
    let det_defect = (h.determinant() - crate::linalg::c(1.0, 0.0)).norm();
    let hr = nf.h_real();
    Ok(NodeData {
        phibar: diagonal_pullback(&nf.phibar_q, &d).into_coeffs(),
        phi_j: std::array::from_fn(|q| diagonal_pullback(&nf.phi_j[q], &d).into_coeffs()),
        theta: nf.sample.frame.theta,
        unitarity,
        det_defect,
        tangent_defect: tangent_defect(&nf.sample, &hr),
        basin: nf.basin_distance(grid.r),
    })
}

/// Result of a closedness sweep over one grid.
#[derive(Clone, Debug, Serialize)]
pub struct ClosednessSweep {
    pub grid: TubeGrid,
    /// `max |d psi|` over certified nodes and `|Y_j| <= r`, chart coordinates.
    pub max_defect: f64,
    /// Chart indices of the worst node.
    pub at: [usize; 3],
    pub nodes: usize,
    pub max_basin: f64,
    pub max_unitarity_defect: f64,
    /// `|det h - 1|` on the segment and the end-zones.
    pub max_det_defect_special: f64,
    /// `|theta|` on the segment and the end-zones.
    pub max_theta_special: f64,
    pub max_tangent_defect: f64,
    pub min_jacobian: f64,
}

fn axpy(acc: &mut [f64], w: f64, x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += w * b;
    }
}

/// `sum_a dc_a ^ partials[a]` for 3-forms given by coefficients.
fn d_from_partials(partials: &[Vec<f64>; 3]) -> Result<KForm> {
    let mut out = KForm::zero(4)?;
    for (a, p) in partials.iter().enumerate() {
        let f = KForm::from_coeffs(3, p.clone())?;
        out = out.try_add(&KForm::coordinate(a)?.wedge(&f)?)?;
    }
    Ok(out)
}

/// Streams the grid in `s`-slabs, keeping five slabs for the fourth-order
/// stencils, and returns the worst finite-difference `d psi`.
pub fn closedness_sweep(potential: &dyn Potential, grid: &TubeGrid) -> Result<ClosednessSweep> {
    let field = TangentFrameField::new(potential);
    let rule = gauss_legendre_01(super::homotopy::DEFAULT_NODES);
    let h = grid.spacing();
    let (n1, n2, ns) = (grid.n[0] + 2 * PAD, grid.n[1] + 2 * PAD, grid.n[2] + 2 * PAD);
    let p = PAD as isize;
    let mut window: VecDeque<Vec<NodeData>> = VecDeque::with_capacity(5);
    let mut sweep = ClosednessSweep {
        grid: *grid,
        max_defect: 0.0,
        at: [0; 3],
        nodes: 0,
        max_basin: 0.0,
        max_unitarity_defect: 0.0,
        max_det_defect_special: 0.0,
        max_theta_special: 0.0,
        max_tangent_defect: 0.0,
        min_jacobian: grid.min_jacobian(),
    };
    let mid = ((grid.n[0] - 1) / 2 + PAD, (grid.n[1] - 1) / 2 + PAD);
    for ks in 0..ns {
        let slab: Vec<NodeData> = (0..n1 * n2)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n2, idx % n2);
                node_data(&field, grid, i as isize - p, j as isize - p, ks as isize - p, &rule)
            })
            .collect::<Result<Vec<_>>>()?;
        window.push_back(slab);
        if window.len() > 5 {
            window.pop_front();
        }
        if window.len() < 5 {
            continue;
        }
        let kc = ks - 2;
        let x3 = grid.node(0, 0, kc as isize - p).0[2];
        let end_zone = grid.in_end_zone(x3);
        let centre = &window[2];
        let results: Vec<(f64, usize, f64, f64, f64, f64, f64)> = (PAD..n1 - PAD)
            .into_par_iter()
            .flat_map_iter(|i| (PAD..n2 - PAD).map(move |j| (i, j)))
            .map(|(i, j)| {
                let at = |di: isize, dj: isize| &centre[(i as isize + di) as usize * n2 + (j as isize + dj) as usize];
                let mut partials: [[Vec<f64>; 3]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; 20]));
                for (m, w) in FD4.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let o = m as isize - 2;
                    let nodes = [at(o, 0), at(0, o), &window[m][i * n2 + j]];
                    for (a, nd) in nodes.iter().enumerate() {
                        let wa = w / h[a];
                        axpy(&mut partials[0][a], wa, &nd.phibar);
                        for q in 0..3 {
                            axpy(&mut partials[1 + q][a], wa, &nd.phi_j[q]);
                        }
                    }
                }
                let c = at(0, 0);
                let mut a_form = d_from_partials(&partials[0]).expect("degree 3");
                let mut b_forms = Vec::with_capacity(3);
                for q in 0..3 {
                    let phi = KForm::from_coeffs(3, c.phi_j[q].clone()).expect("degree 3");
                    a_form = a_form.try_sub(&KForm::coordinate(3 + q).unwrap().wedge(&phi).unwrap()).unwrap();
                    b_forms.push(d_from_partials(&partials[1 + q]).expect("degree 3"));
                }
                let mut worst: f64 = 0.0;
                for (idx, av) in a_form.coeffs().iter().enumerate() {
                    let lin: f64 = b_forms.iter().map(|b| b.coeffs()[idx].abs()).sum();
                    worst = worst.max(av.abs() + grid.r * lin);
                }
                let special = end_zone || (i == mid.0 && j == mid.1);
                let theta = if special { c.theta.abs() } else { 0.0 };
                let det = if special { c.det_defect } else { 0.0 };
                (worst, i * n2 + j, c.basin, c.unitarity, det, theta, c.tangent_defect)
            })
            .collect();
        for (worst, idx, basin, unit, det, theta, tangent) in results {
            sweep.nodes += 1;
            if worst > sweep.max_defect || !worst.is_finite() {
                sweep.max_defect = worst;
                sweep.at = [idx / n2 - PAD, idx % n2 - PAD, kc - PAD];
            }
            sweep.max_basin = sweep.max_basin.max(basin);
            sweep.max_unitarity_defect = sweep.max_unitarity_defect.max(unit);
            sweep.max_det_defect_special = sweep.max_det_defect_special.max(det);
            sweep.max_theta_special = sweep.max_theta_special.max(theta);
            sweep.max_tangent_defect = sweep.max_tangent_defect.max(tangent);
        }
    }
    Ok(sweep)
}

/// Metric data at one point `Q(X, Y)`.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub psi: KForm,
    /// `h'` from the orbit factorization of `h^* psi`.
    pub h_prime: LinearMap6,
    pub factor_residual: f64,
    /// `A = h' h^{-1}` (realified), with `psi = A^* phi`.
    pub a: Matrix6<f64>,
    /// `g = A^T A`.
    pub g: Matrix6<f64>,
    /// `max |psi - A^* phi|`.
    pub pullback_defect: f64,
    pub min_eigenvalue: f64,
    /// `max |h' - id|`.
    pub h_prime_defect: f64,
}

pub fn metric_sample(nf: &NodeForms, y: &[f64; 3]) -> Result<MetricSample> {
    let psi = nf.psi(y);
    let hr = nf.h_real();
    let target = psi.pullback(&LinearMap6::from_matrix(&hr));
    let fac = factorize_near_phi(&target, FACTOR_TOL).map_err(|e| {
        Error::Numeric(format!(
            "factorization failed at X = {:?}, Y = {y:?} ({e}); a smaller tube radius flattens the cone",
            nf.sample.x
        ))
    })?;
    let a = fac.h.to_matrix() * hr.transpose();
    let phi: KForm = special_lagrangian_form();
    let pulled = phi.pullback(&LinearMap6::from_matrix(&a));
    let g = a.transpose() * a;
    let eig = SymmetricEigen::new(g);
    let min_eigenvalue = eig.eigenvalues.min();
    let h_prime_defect = (fac.h.to_matrix() - Matrix6::identity()).abs().max();
    Ok(MetricSample {
        x: nf.sample.x,
        y: *y,
        pullback_defect: max_diff(&psi, &pulled),
        psi,
        h_prime: fac.h,
        factor_residual: fac.residual,
        a,
        g,
        min_eigenvalue,
        h_prime_defect,
    })
}

/// `psi(v1, v2, v3) / vol_g(v1, v2, v3)` for an oriented frame.
pub fn calibrated_value(psi: &KForm, g: &Matrix6<f64>, vs: &[[f64; DIM]; 3]) -> Result<f64> {
    let gram = nalgebra::Matrix3::from_fn(|i, j| {
        let a = nalgebra::Vector6::from_row_slice(&vs[i]);
        let b = nalgebra::Vector6::from_row_slice(&vs[j]);
        (a.transpose() * g * b)[0]
    });
    let vol = gram.determinant();
    if !(vol > 0.0) {
        return Err(Error::Numeric("degenerate tangent frame".into()));
    }
    Ok(psi.eval_vectors(vs)? / vol.sqrt())
}

/// Tangent frame `(e_j, H e_j)` of the glued surface, oriented by x.
pub fn surface_tangent(hess: &[[f64; 3]; 3]) -> [[f64; DIM]; 3] {
    std::array::from_fn(|j| {
        let mut v = [0.0; DIM];
        v[j] = 1.0;
        for a in 0..3 {
            v[3 + a] = hess[a][j];
        }
        v
    })
}

/// Oriented frame `(d/dy1, -d/dy2, d/dx3)` of the y1y2x3-plane.
pub fn plane_tangent() -> [[f64; DIM]; 3] {
    let mut f = [[0.0; DIM]; 3];
    f[0][3] = 1.0;
    f[1][4] = -1.0;
    f[2][2] = 1.0;
    f
}

/// Everything certified about `psi` and `g` on one configuration.
#[derive(Clone)]
pub struct CalibrationPackage {
    pub potential: Arc<dyn Potential>,
    pub grid: TubeGrid,
    pub coarse: ClosednessSweep,
    pub fine: Option<ClosednessSweep>,
    pub samples: Vec<MetricSample>,
}

impl CalibrationPackage {
    /// Forms at base point `x`, for evaluating `psi` and `g` anywhere in the tube.
    pub fn node_forms(&self, x: &[f64; 3]) -> Result<NodeForms> {
        let field = TangentFrameField::new(self.potential.as_ref());
        NodeForms::new(&field, x, &gauss_legendre_01(super::homotopy::DEFAULT_NODES))
    }

    pub fn psi_at(&self, x: &[f64; 3], y: &[f64; 3]) -> Result<KForm> {
        Ok(self.node_forms(x)?.psi(y))
    }

    pub fn metric_at(&self, x: &[f64; 3], y: &[f64; 3]) -> Result<MetricSample> {
        metric_sample(&self.node_forms(x)?, y)
    }

    pub fn max_psi_minus_phi(&self) -> f64 {
        let phi: KForm = special_lagrangian_form();
        self.samples.iter().map(|s| max_norm(&s.psi.try_sub(&phi).expect("degree 3"))).fold(0.0, f64::max)
    }
}
