//! Placing a whole graph: vertices on the x3-axis (the spine), one realizing
//! collection per vertex, and each edge drawn as a curve in its own page.
//!
//! For an edge `{l, m}` two flows are built. `U` rotates small balls around
//! `v_l` and `v_m` so the chosen rays point at each other along the spine,
//! and `W` pushes everything outside those balls off the spine in the page
//! normal direction. The edge curve is the straight spine segment pulled
//! back through `W_t` and then `U_1`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gluing::potentials::cone_tangent_rows;
use crate::hl_cone::{realizing_collection, RayOptions, RealizingCollection};
use crate::linalg::{self, c, complexify_vec, expm_antihermitian, frobenius, realify, CMat3, CVec3};
use crate::unitary_planes::{align_pair, ComplexMatrix3, OrientedPlane3};

pub const DELTA_PAGE: f64 = 1e-2;
pub const FLOW_TOL: f64 = 1e-10;
/// Smallest angle allowed between two edges leaving the same vertex.
pub const MIN_VERTEX_ANGLE: f64 = 1e-3;

type P6 = [f64; 6];

fn sub(a: &P6, b: &P6) -> P6 {
    std::array::from_fn(|k| a[k] - b[k])
}

fn dist(a: &P6, b: &P6) -> f64 {
    linalg::norm6(&sub(a, b))
}

/// Component orthogonal to the x3-axis.
fn off_spine(x: &P6) -> P6 {
    let mut v = *x;
    v[2] = 0.0;
    v
}

fn apply(m: &Matrix6<f64>, x: &P6) -> P6 {
    let v = m * Vector6::from_row_slice(x);
    std::array::from_fn(|k| v[k])
}

// ---------------------------------------------------------------------------
// Graphs

/// Vertex label as it appears in the input JSON: a number or a string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexId {
    Num(i64),
    Name(String),
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Num(n) => write!(f, "{n}"),
            VertexId::Name(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for VertexId {
    fn from(n: i64) -> Self {
        VertexId::Num(n)
    }
}

/// Finite multigraph without self-loops. Edges are unordered pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<[VertexId; 2]>,
}

impl GraphSpec {
    pub fn new(vertices: Vec<VertexId>, edges: Vec<[VertexId; 2]>) -> Result<Self> {
        let g = Self { vertices, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(Error::Invalid("graph has no vertices".into()));
        }
        let mut seen = BTreeMap::new();
        for (k, v) in self.vertices.iter().enumerate() {
            if seen.insert(v, k).is_some() {
                return Err(Error::Invalid(format!("duplicate vertex id {v}")));
            }
        }
        for (e, [a, b]) in self.edges.iter().enumerate() {
            for v in [a, b] {
                if !seen.contains_key(v) {
                    return Err(Error::Invalid(format!("edge {e} uses unknown vertex {v}")));
                }
            }
            if a == b {
                return Err(Error::Invalid(format!("edge {e} is a self-loop at {a}")));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, v: &VertexId) -> Option<usize> {
        self.vertices.iter().position(|w| w == v)
    }

    /// Edges as vertex index pairs, in input order.
    pub fn edge_indices(&self) -> Vec<[usize; 2]> {
        self.edges
            .iter()
            .map(|[a, b]| [self.index_of(a).expect("validated"), self.index_of(b).expect("validated")])
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices.len()];
        for [a, b] in self.edge_indices() {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    fn numbered(n: usize, edges: Vec<[usize; 2]>) -> Self {
        let id = |k: usize| VertexId::Num(k as i64);
        Self { vertices: (0..n).map(id).collect(), edges: edges.into_iter().map(|[a, b]| [id(a), id(b)]).collect() }
    }

    /// Path with `n` vertices.
    pub fn path(n: usize) -> Self {
        Self::numbered(n, (1..n).map(|k| [k - 1, k]).collect())
    }

    pub fn complete(n: usize) -> Self {
        let mut e = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                e.push([a, b]);
            }
        }
        Self::numbered(n, e)
    }

    /// Star with one centre and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::numbered(leaves + 1, (1..=leaves).map(|k| [0, k]).collect())
    }

    /// Random multigraph on `n` vertices with `m` edges, no self-loops.
    pub fn random_multigraph(n: usize, m: usize, seed: u64) -> Self {
        assert!(n >= 2, "need two vertices for an edge");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Vec::with_capacity(m);
        while e.len() < m {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                e.push([a, b]);
            }
        }
        Self::numbered(n, e)
    }
}

// ---------------------------------------------------------------------------
// su(3) logarithm

/// Traceless anti-Hermitian logarithm, checked by exponentiating back.
///
/// A logarithm that fails the round trip (eigenvalues near -1 can leave the
/// eigenvectors poorly split) is retried on a conjugate `W U W^H` for a few
/// fixed `W in SU(3)`, using `log U = W^H log(W U W^H) W`.
pub fn su3_log(target: &ComplexMatrix3) -> Result<CMat3> {
    let u = &target.0;
    if linalg::unitarity_defect(u) > 1e-10 || (u.determinant() - c(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::Invalid("matrix is not in SU(3) within 1e-10".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1095);
    let mut w = CMat3::identity();
    for _ in 0..6 {
        let conj = w * u * w.adjoint();
        if let Ok(l) = linalg::su3_log(&conj) {
            let l = clean_algebra(&(w.adjoint() * l * w));
            if frobenius(&(expm_antihermitian(&l) - u)) <= 1e-10 {
                return Ok(l);
            }
        }
        w = linalg::random_su3(&mut rng);
    }
    Err(Error::Numeric("no su(3) logarithm passed the exp round trip".into()))
}

/// Projects onto su(3) so that the realified generator is exactly skew.
fn clean_algebra(a: &CMat3) -> CMat3 {
    let mut s = (a - a.adjoint()) * c(0.5, 0.0);
    let tr = s.trace() / c(3.0, 0.0);
    for k in 0..3 {
        s[(k, k)] = c(0.0, s[(k, k)].im - tr.im);
    }
    s
}

/// `max |R + R^T|` for the realified generator; zero means `<x R, x> = 0`.
pub fn skew_defect(a: &CMat3) -> f64 {
    let r = realify(a);
    (r + r.transpose()).abs().max()
}

// ---------------------------------------------------------------------------
// Flows

/// Smooth step in `s = |x - v|^2`: one for `s <= inner^2`, zero for
/// `s >= outer^2`, strictly between in between.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bump {
    pub inner: f64,
    pub outer: f64,
}

impl Bump {
    /// Radii `p3 / 2` and `3 p3 / 4`.
    pub fn standard(p3: f64) -> Self {
        Self { inner: 0.5 * p3, outer: 0.75 * p3 }
    }

    /// Radii `p3 / 2` and `(p3 + eps) / 2`.
    pub fn with_clearance(p3: f64, eps: f64) -> Self {
        Self { inner: 0.5 * p3, outer: 0.5 * (p3 + eps) }
    }

    pub fn value(&self, s: f64) -> f64 {
        let (s0, s1) = (self.inner * self.inner, self.outer * self.outer);
        if s <= s0 {
            return 1.0;
        }
        if s >= s1 {
            return 0.0;
        }
        let t = (s - s0) / (s1 - s0);
        let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let (a, b) = (f(1.0 - t), f(t));
        a / (a + b)
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum Generator {
    /// `sum_l b(|x - v_l|^2) R_l (x - v_l)` with `R_l` realified su(3) elements.
    Rotation {
        centres: Vec<P6>,
        #[serde(skip_serializing)]
        generators: Vec<Matrix6<f64>>,
        bump: Bump,
    },
    /// `prod_l (1 - b(|x - v_l|^2)) nu`.
    Push { centres: Vec<P6>, normal: P6, bump: Bump },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowSettings {
    /// Local error allowed per unit time.
    pub tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { tol: FLOW_TOL, initial_step: 0.05, min_step: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowField {
    pub generator: Generator,
    pub settings: FlowSettings,
}

impl FlowField {
    pub fn rotation(centres: Vec<P6>, generators: &[CMat3], bump: Bump) -> Self {
        let generators = generators.iter().map(realify).collect();
        Self { generator: Generator::Rotation { centres, generators, bump }, settings: FlowSettings::default() }
    }

    pub fn push(centres: Vec<P6>, normal: P6, bump: Bump) -> Self {
        Self { generator: Generator::Push { centres, normal, bump }, settings: FlowSettings::default() }
    }

    pub fn eval(&self, x: &P6) -> P6 {
        match &self.generator {
            Generator::Rotation { centres, generators, bump } => {
                let mut out = [0.0; 6];
                for (v, r) in centres.iter().zip(generators) {
                    let d = sub(x, v);
                    let b = bump.value(linalg::dot6(&d, &d));
                    if b != 0.0 {
                        let u = apply(r, &d);
                        for k in 0..6 {
                            out[k] += b * u[k];
                        }
                    }
                }
                out
            }
            Generator::Push { centres, normal, bump } => {
                let mut f = 1.0;
                for v in centres {
                    let d = sub(x, v);
                    f *= 1.0 - bump.value(linalg::dot6(&d, &d));
                }
                normal.map(|n| f * n)
            }
        }
    }

    /// Balls outside of which a rotation field vanishes. Push fields have none.
    pub fn support_balls(&self) -> Vec<(P6, f64)> {
        match &self.generator {
            Generator::Rotation { centres, bump, .. } => centres.iter().map(|v| (*v, bump.outer)).collect(),
            Generator::Push { .. } => Vec::new(),
        }
    }
}

fn rk4(f: &FlowField, x: &P6, h: f64) -> P6 {
    let k1 = f.eval(x);
    let at = |k: &P6, s: f64| -> P6 { std::array::from_fn(|i| x[i] + s * k[i]) };
    let k2 = f.eval(&at(&k1, 0.5 * h));
    let k3 = f.eval(&at(&k2, 0.5 * h));
    let k4 = f.eval(&at(&k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Time-`t` map of the flow, by RK4 with step doubling. Negative `t` runs
/// the flow backwards.
pub fn integrate_flow(field: &FlowField, x0: &P6, t: f64) -> Result<P6> {
    if !t.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite flow input".into()));
    }
    let s = &field.settings;
    let total = t.abs();
    let dir = t.signum();
    let mut x = *x0;
    let mut done = 0.0;
    let mut h = s.initial_step.min(total);
    while done < total {
        let last = h >= total - done;
        if last {
            h = total - done;
        }
        let full = rk4(field, &x, dir * h);
        let half = rk4(field, &x, 0.5 * dir * h);
        let two = rk4(field, &half, 0.5 * dir * h);
        let err = (0..6).map(|k| (two[k] - full[k]).abs()).fold(0.0, f64::max) / 15.0;
        let allowed = s.tol * h;
        if err <= allowed {
            x = std::array::from_fn(|k| two[k] + (two[k] - full[k]) / 15.0);
            done = if last { total } else { done + h };
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (allowed / err).powf(0.25)).min(2.0) };
            h *= grow.max(1.0);
        } else {
            h *= (0.9 * (allowed / err).powf(0.25)).max(0.2);
            if h < s.min_step {
                return Err(Error::Numeric(format!("flow step underflow at t = {}", dir * done)));
            }
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Page selection

/// Everything a new page has to avoid, seen from the spine.
///
/// Only directions orthogonal to the x3-axis matter: a page through the
/// spine meets a set off the spine exactly where the set's projected
/// direction is parallel to the page normal.
#[derive(Clone, Debug, Default)]
pub struct Occupancy {
    /// Orthonormal bases of projected linear subspaces (truncated planes).
    pub subspaces: Vec<Vec<P6>>,
    /// Unitary images of the cone, realified.
    pub cones: Vec<Matrix6<f64>>,
    /// Sample points of curves, relative to the spine.
    pub points: Vec<P6>,
}

impl Occupancy {
    /// Adds the plane through a spine point with the given direction rows.
    pub fn add_plane(&mut self, rows: &[P6; 3]) {
        let mut basis: Vec<P6> = Vec::new();
        for r in rows.iter().map(off_spine) {
            let mut v = r;
            for _ in 0..2 {
                for b in &basis {
                    let d = linalg::dot6(&v, b);
                    for k in 0..6 {
                        v[k] -= d * b[k];
                    }
                }
            }
            let n = linalg::norm6(&v);
            if n > 1e-9 {
                basis.push(v.map(|x| x / n));
            }
        }
        self.subspaces.push(basis);
    }

    pub fn add_point(&mut self, p: &P6) {
        self.points.push(*p);
    }
}

/// Unit point of the cone's link torus.
pub fn link_point(a: f64, b: f64) -> P6 {
    let k = 1.0 / 3f64.sqrt();
    let z = CVec3::new(c(a.cos(), a.sin()) * k, c(b.cos(), b.sin()) * k, c((a + b).cos(), -(a + b).sin()) * k);
    linalg::realify_vec(&z)
}

const CONE_GRID: usize = 64;

fn unit_off_spine(p: &P6) -> Option<P6> {
    let q = off_spine(p);
    let n = linalg::norm6(&q);
    (n > 1e-9).then(|| q.map(|x| x / n))
}

fn angle_from_cos(c: f64) -> f64 {
    c.abs().min(1.0).acos()
}

struct PreparedCone {
    m: Matrix6<f64>,
    grid: Vec<(f64, f64, P6)>,
}

impl PreparedCone {
    fn new(m: &Matrix6<f64>) -> Self {
        let step = std::f64::consts::TAU / CONE_GRID as f64;
        let mut grid = Vec::with_capacity(CONE_GRID * CONE_GRID);
        for i in 0..CONE_GRID {
            for j in 0..CONE_GRID {
                let (a, b) = (i as f64 * step, j as f64 * step);
                if let Some(d) = unit_off_spine(&apply(m, &link_point(a, b))) {
                    grid.push((a, b, d));
                }
            }
        }
        Self { m: *m, grid }
    }

    fn cos_at(&self, nu: &P6, a: f64, b: f64) -> f64 {
        unit_off_spine(&apply(&self.m, &link_point(a, b))).map_or(0.0, |d| linalg::dot6(nu, &d).abs())
    }

    /// Largest `|cos|` between `nu` and the projected cone: grid search, then
    /// pattern search from the best few grid points.
    fn max_cos(&self, nu: &P6) -> f64 {
        let mut scored: Vec<(f64, f64, f64)> =
            self.grid.iter().map(|(a, b, d)| (linalg::dot6(nu, d).abs(), *a, *b)).collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best: f64 = scored.first().map_or(0.0, |s| s.0);
        for &(v0, a0, b0) in scored.iter().take(4) {
            let (mut a, mut b, mut v) = (a0, b0, v0);
            let mut step = std::f64::consts::TAU / CONE_GRID as f64;
            while step > 1e-8 {
                let mut moved = false;
                for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let w = self.cos_at(nu, a + da, b + db);
                    if w > v {
                        (a, b, v) = (a + da, b + db, w);
                        moved = true;
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            best = best.max(v);
        }
        best
    }
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// `k`-th candidate page normal: a Halton point pushed through Box-Muller
/// onto the unit 4-sphere orthogonal to the spine.
pub fn candidate_normal(k: usize) -> P6 {
    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let u: [f64; 6] = std::array::from_fn(|d| radical_inverse(k as u64 + 1, BASES[d]));
    let mut g = [0.0; 6];
    for p in 0..3 {
        let r = (-2.0 * u[2 * p].max(1e-300).ln()).sqrt();
        let t = std::f64::consts::TAU * u[2 * p + 1];
        g[2 * p] = r * t.cos();
        g[2 * p + 1] = r * t.sin();
    }
    let v = [g[0], g[1], 0.0, g[2], g[3], g[4]];
    let n = linalg::norm6(&v);
    v.map(|x| x / n)
}

#[derive(Clone, Debug, Serialize)]
pub struct PageChoice {
    pub normal: P6,
    /// Smallest angle between the page and any occupied direction, radians.
    pub clearance: f64,
    pub candidate: usize,
}

/// Angle between the page spanned by the spine and `nu` and the occupied set.
pub fn page_clearance(occ: &Occupancy, nu: &P6) -> f64 {
    page_clearance_prepared(occ, &prepare(occ), nu, 0.0)
}

struct Prepared {
    cones: Vec<PreparedCone>,
    points: Vec<P6>,
}

fn prepare(occ: &Occupancy) -> Prepared {
    Prepared {
        cones: occ.cones.iter().map(PreparedCone::new).collect(),
        points: occ.points.iter().filter_map(unit_off_spine).collect(),
    }
}

/// Stops early once the clearance drops to `floor`.
fn page_clearance_prepared(occ: &Occupancy, prep: &Prepared, nu: &P6, floor: f64) -> f64 {
    let mut worst = std::f64::consts::FRAC_PI_2;
    for basis in &occ.subspaces {
        let p2: f64 = basis.iter().map(|b| linalg::dot6(nu, b).powi(2)).sum();
        worst = worst.min(angle_from_cos(p2.sqrt()));
    }
    let max_dot = prep.points.iter().map(|d| linalg::dot6(nu, d).abs()).fold(0.0, f64::max);
    worst = worst.min(angle_from_cos(max_dot));
    for cone in &prep.cones {
        if worst <= floor {
            return worst;
        }
        worst = worst.min(angle_from_cos(cone.max_cos(nu)));
    }
    worst
}

/// Picks the candidate normal with the largest clearance among the first
/// `candidates`, the earliest on ties, and requires clearance `>= delta`.
pub fn select_page_normal(occ: &Occupancy, delta: f64, candidates: usize) -> Result<PageChoice> {
    let prep = prepare(occ);
    let mut best: Option<PageChoice> = None;
    for k in 0..candidates {
        let nu = candidate_normal(k);
        let floor = best.as_ref().map_or(0.0, |b| b.clearance);
        let cl = page_clearance_prepared(occ, &prep, &nu, floor);
        if best.as_ref().map_or(true, |b| cl > b.clearance) {
            best = Some(PageChoice { normal: nu, clearance: cl, candidate: k });
        }
    }
    match best {
        Some(b) if b.clearance >= delta => Ok(b),
        Some(b) => Err(Error::Certificate(format!(
            "no page among {candidates} candidates clears {delta} rad (best {:.3e}); sample more directions",
            b.clearance
        ))),
        None => Err(Error::Invalid("no page candidates requested".into())),
    }
}

// ---------------------------------------------------------------------------
// Plans

#[derive(Clone, Debug, Serialize)]
pub struct PlanSettings {
    pub p3: f64,
    pub ray_seeds: usize,
    pub samples_per_edge: usize,
    pub delta_page: f64,
    pub page_candidates: usize,
    /// Push time in units of `p3`.
    pub push_factor: f64,
    pub flow: FlowSettings,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            p3: 1.0,
            ray_seeds: 4000,
            samples_per_edge: 1000,
            delta_page: DELTA_PAGE,
            page_candidates: 2048,
            push_factor: 2.0,
            flow: FlowSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexPlan {
    pub id: VertexId,
    pub position: P6,
    pub degree: usize,
    pub collection: Option<RealizingCollection>,
    /// Cone rays found on each plane of the collection.
    pub ray_counts: Vec<usize>,
}

/// Checks recorded while planning one edge; all are required to pass.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeCertificates {
    /// `max |R + R^T|` of both realified generators.
    pub skew_defect: f64,
    /// `|exp(generator) - rotation|`, both ends.
    pub log_defect: f64,
    pub alignment_defect: f64,
    /// Distance of the curve from its ray inside the inner balls.
    pub ray_deviation: f64,
    /// Smallest distance from the curve to a vertex other than its ends.
    pub min_other_vertex_distance: f64,
    /// Smallest distance to the spine outside balls of radius `5 p3 / 4`
    /// around the ends.
    pub min_spine_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgePlan {
    pub index: usize,
    /// Vertex indices, lower spine position first.
    pub ends: [usize; 2],
    /// Plane of each end's collection used by this edge.
    pub planes: [usize; 2],
    pub rays: [P6; 2],
    /// Coordinate changes about each end: ray to `+x3` at the lower end,
    /// to `-x3` at the upper end.
    pub rotations: [ComplexMatrix3; 2],
    pub generators: [ComplexMatrix3; 2],
    /// Slopes of the aligned cone tangent planes.
    pub rho: [f64; 2],
    pub page: PageChoice,
    pub push_distance: f64,
    pub polyline: Vec<P6>,
    pub certificates: EdgeCertificates,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingPlan {
    pub settings: PlanSettings,
    pub vertices: Vec<VertexPlan>,
    pub edges: Vec<EdgePlan>,
    /// Edge processing order (input order).
    pub order: Vec<usize>,
}

fn spine_point(k: usize, p3: f64) -> P6 {
    [0.0, 0.0, 2.0 * k as f64 * p3, 0.0, 0.0, 0.0]
}

pub fn rotation_flow(plan: &EmbeddingPlan, edge: &EdgePlan) -> FlowField {
    let p3 = plan.settings.p3;
    let centres = edge.ends.map(|v| plan.vertices[v].position).to_vec();
    let mut f = FlowField::rotation(centres, &edge.generators.map(|g| g.0), Bump::standard(p3));
    f.settings = plan.settings.flow;
    f
}

pub fn push_flow(plan: &EmbeddingPlan, edge: &EdgePlan) -> FlowField {
    let p3 = plan.settings.p3;
    let centres = edge.ends.map(|v| plan.vertices[v].position).to_vec();
    let mut f = FlowField::push(centres, edge.page.normal, Bump::standard(p3));
    f.settings = plan.settings.flow;
    f
}

fn flip() -> CMat3 {
    CMat3::from_diagonal(&CVec3::new(c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)))
}

/// Rotation about one end: aligns `(plane, ray)` so the ray points along
/// `+x3`, composed with `diag(-1, 1, -1)` at the upper end.
fn end_rotation(plane: &OrientedPlane3, ray: &P6, upper: bool) -> Result<(CMat3, f64, f64)> {
    let v = complexify_vec(ray);
    let tangent = OrientedPlane3::from_rows(cone_tangent_rows(v[0].arg(), v[1].arg()))?;
    let al = align_pair(&tangent, plane, ray)?;
    let defect = crate::unitary_planes::alignment_defect(&al, &tangent, plane, ray);
    let s = if upper { flip() * al.s.0 } else { al.s.0 };
    Ok((s, al.rho, defect))
}

/// Plans the embedding with default settings at spine spacing `2 p3`.
pub fn plan_embedding(g: &GraphSpec, p3: f64) -> Result<EmbeddingPlan> {
    plan_embedding_with(g, &PlanSettings { p3, ..Default::default() })
}

pub fn plan_embedding_with(g: &GraphSpec, settings: &PlanSettings) -> Result<EmbeddingPlan> {
    g.validate()?;
    let p3 = settings.p3;
    if !(p3 > 0.0 && p3.is_finite()) {
        return Err(Error::Invalid(format!("p3 must be positive, got {p3}")));
    }
    if settings.samples_per_edge < 3 {
        return Err(Error::Invalid("need at least 3 samples per edge".into()));
    }
    let degrees = g.degrees();
    let opts = RayOptions { seeds: settings.ray_seeds, two_resolution: false, ..Default::default() };
    let mut by_degree: BTreeMap<usize, RealizingCollection> = BTreeMap::new();
    for &d in &degrees {
        if d > 0 && !by_degree.contains_key(&d) {
            by_degree.insert(d, realizing_collection(d, &opts)?);
        }
    }
    let vertices: Vec<VertexPlan> = g
        .vertices
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let collection = by_degree.get(&degrees[k]).cloned();
            let ray_counts = collection.as_ref().map_or(Vec::new(), |c| vec![1; c.planes.len()]);
            VertexPlan { id: id.clone(), position: spine_point(k, p3), degree: degrees[k], collection, ray_counts }
        })
        .collect();

    let mut plan = EmbeddingPlan { settings: settings.clone(), vertices, edges: Vec::new(), order: Vec::new() };
    let mut next_plane = vec![0usize; g.vertices.len()];
    for (index, [a, b]) in g.edge_indices().into_iter().enumerate() {
        let ends = if a < b { [a, b] } else { [b, a] };
        let planes = ends.map(|v| {
            let j = next_plane[v];
            next_plane[v] += 1;
            j
        });
        let edge = plan_edge(&plan, index, ends, planes)?;
        plan.edges.push(edge);
        plan.order.push(index);
    }
    Ok(plan)
}

fn plan_edge(plan: &EmbeddingPlan, index: usize, ends: [usize; 2], planes: [usize; 2]) -> Result<EdgePlan> {
    let p3 = plan.settings.p3;
    let fail = |clause: &str| Error::Certificate(format!("edge {index} ({} - {}): {clause}", ends[0], ends[1]));
    let mut rotations = [CMat3::identity(); 2];
    let mut generators = [CMat3::zeros(); 2];
    let mut rho = [0.0; 2];
    let mut rays = [[0.0; 6]; 2];
    let mut alignment_defect: f64 = 0.0;
    let mut log_defect: f64 = 0.0;
    let mut skew: f64 = 0.0;
    for side in 0..2 {
        let col = plan.vertices[ends[side]].collection.as_ref().ok_or_else(|| fail("end has no collection"))?;
        let (plane, ray) = (&col.planes[planes[side]], col.rays[planes[side]]);
        let (s, r, d) = end_rotation(plane, &ray, side == 1)?;
        let l = su3_log(&ComplexMatrix3(s))?;
        log_defect = log_defect.max(frobenius(&(expm_antihermitian(&l) - s)));
        skew = skew.max(skew_defect(&l));
        alignment_defect = alignment_defect.max(d);
        rotations[side] = s;
        generators[side] = l;
        rho[side] = r;
        rays[side] = ray;
    }
    if skew > 1e-14 {
        return Err(fail(&format!("generator is not anti-Hermitian ({skew:e})")));
    }
    if log_defect > 1e-10 {
        return Err(fail(&format!("exp(log) misses the rotation by {log_defect:e}")));
    }

    let centres = ends.map(|v| plan.vertices[v].position);
    let mut rot = FlowField::rotation(centres.to_vec(), &generators, Bump::standard(p3));
    rot.settings = plan.settings.flow;

    // Occupancy in the rotated picture.
    let mut occ = Occupancy::default();
    for (k, v) in plan.vertices.iter().enumerate() {
        let Some(col) = &v.collection else { continue };
        let s = ends.iter().position(|&e| e == k).map_or(CMat3::identity(), |side| rotations[side]);
        for q in &col.planes {
            occ.add_plane(&q.transformed(&s).orthonormal_frame());
        }
        occ.cones.push(realify(&s));
    }
    let near_end = |q: &P6| centres.iter().any(|v| dist(q, v) < Bump::standard(p3).outer);
    let moved: Vec<Result<P6>> = plan
        .edges
        .par_iter()
        .flat_map_iter(|e| e.polyline.iter())
        .map(|q| if near_end(q) { integrate_flow(&rot, q, 1.0) } else { Ok(*q) })
        .collect();
    for q in moved {
        occ.add_point(&q?);
    }
    let page = select_page_normal(&occ, plan.settings.delta_page, plan.settings.page_candidates)
        .map_err(|e| fail(&format!("page selection: {e}")))?;

    let push_distance = plan.settings.push_factor * p3;
    let mut push = FlowField::push(centres.to_vec(), page.normal, Bump::standard(p3));
    push.settings = plan.settings.flow;
    let n = plan.settings.samples_per_edge;
    let polyline: Vec<P6> = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let q: P6 = std::array::from_fn(|i| centres[0][i] + t * (centres[1][i] - centres[0][i]));
            let p = integrate_flow(&push, &q, -push_distance)?;
            integrate_flow(&rot, &p, -1.0)
        })
        .collect::<Result<_>>()?;

    let inner = Bump::standard(p3).inner;
    let mut ray_deviation: f64 = 0.0;
    let mut min_other: f64 = f64::INFINITY;
    let mut min_spine: f64 = f64::INFINITY;
    for q in &polyline {
        for side in 0..2 {
            let d = sub(q, &centres[side]);
            if linalg::norm6(&d) <= inner {
                let along = linalg::dot6(&d, &rays[side]);
                let perp: P6 = std::array::from_fn(|k| d[k] - along * rays[side][k]);
                let behind = if along < 0.0 { -along } else { 0.0 };
                ray_deviation = ray_deviation.max(linalg::norm6(&perp)).max(behind);
            }
        }
        for (k, v) in plan.vertices.iter().enumerate() {
            if !ends.contains(&k) {
                min_other = min_other.min(dist(q, &v.position));
            }
        }
        if centres.iter().all(|v| dist(q, v) >= 1.25 * p3) {
            min_spine = min_spine.min(linalg::norm6(&off_spine(q)));
        }
    }
    if ray_deviation > 1e-8 * p3 {
        return Err(fail(&format!("curve leaves its ray near an end by {ray_deviation:e}")));
    }
    if min_other < p3 {
        return Err(fail(&format!("curve comes within {min_other:e} of another vertex")));
    }
    if min_spine < p3 {
        return Err(fail(&format!("curve comes within {min_spine:e} of the spine away from its ends")));
    }

    Ok(EdgePlan {
        index,
        ends,
        planes,
        rays,
        rotations: rotations.map(ComplexMatrix3),
        generators: generators.map(ComplexMatrix3),
        rho,
        page,
        push_distance,
        polyline,
        certificates: EdgeCertificates {
            skew_defect: skew,
            log_defect,
            alignment_defect,
            ray_deviation,
            min_other_vertex_distance: min_other,
            min_spine_distance: min_spine,
        },
    })
}

// ---------------------------------------------------------------------------
// Validity

#[derive(Clone, Debug, Serialize)]
pub struct PairDistance {
    pub edges: [usize; 2],
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub distinct_vertices: bool,
    /// Smallest distance between two edge curves, away from shared vertices.
    pub min_edge_distance: f64,
    pub closest_pair: Option<PairDistance>,
    /// Smallest angle between two edges leaving the same vertex.
    pub min_vertex_angle: f64,
    pub degrees_realized: bool,
    pub passed: bool,
}

fn segment_distance(p0: &P6, p1: &P6, q0: &P6, q1: &P6) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = linalg::dot6(&d1, &d1);
    let e = linalg::dot6(&d2, &d2);
    let f = linalg::dot6(&d2, &r);
    let (s, t);
    if a <= 1e-300 && e <= 1e-300 {
        return dist(p0, q0);
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let cc = linalg::dot6(&d1, &r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-cc / a).clamp(0.0, 1.0);
        } else {
            let b = linalg::dot6(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-300 { ((b * f - cc * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-cc / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - cc) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let pa: P6 = std::array::from_fn(|k| p0[k] + s * d1[k]);
    let qa: P6 = std::array::from_fn(|k| q0[k] + t * d2[k]);
    dist(&pa, &qa)
}

const BLOCK: usize = 25;

struct Block {
    lo: usize,
    hi: usize,
    centre: P6,
    radius: f64,
}

/// Consecutive runs of kept segments with bounding balls.
fn blocks(line: &[P6], keep: &[bool]) -> Vec<Block> {
    let mut out = Vec::new();
    let mut k = 0;
    while k + 1 < line.len() {
        if !keep[k] {
            k += 1;
            continue;
        }
        let lo = k;
        let mut hi = k;
        while hi + 1 < line.len() && keep[hi] && hi - lo < BLOCK {
            hi += 1;
        }
        let pts = &line[lo..=hi];
        let centre: P6 = std::array::from_fn(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64);
        let radius = pts.iter().map(|p| dist(p, &centre)).fold(0.0, f64::max);
        out.push(Block { lo, hi, centre, radius });
        k = hi;
    }
    out
}

/// Smallest distance between the kept segments (`keep[k]` covers segment
/// `k, k + 1`) of two polylines.
fn polyline_distance(a: &[P6], keep_a: &[bool], b: &[P6], keep_b: &[bool]) -> f64 {
    let ba = blocks(a, keep_a);
    let bb = blocks(b, keep_b);
    let mut best = f64::INFINITY;
    for x in &ba {
        for y in &bb {
            if dist(&x.centre, &y.centre) - x.radius - y.radius >= best {
                continue;
            }
            for i in x.lo..x.hi {
                if !keep_a[i] {
                    continue;
                }
                for j in y.lo..y.hi {
                    if keep_b[j] {
                        best = best.min(segment_distance(&a[i], &a[i + 1], &b[j], &b[j + 1]));
                    }
                }
            }
        }
    }
    best
}

/// Direction in which an edge leaves vertex `v`.
fn leaving_direction(e: &EdgePlan, v: usize) -> P6 {
    let line = &e.polyline;
    let (start, next) = if e.ends[0] == v { (line[0], line[1]) } else { (line[line.len() - 1], line[line.len() - 2]) };
    let d = sub(&next, &start);
    let n = linalg::norm6(&d);
    d.map(|x| x / n)
}

/// Checks the emitted curves: distinct vertex images, disjoint edges away
/// from shared vertices, transverse edges at shared vertices, and one
/// collection plane with one cone ray per incident edge.
///
/// Near a shared vertex each curve is a straight piece of its ray (the
/// `ray_deviation` certificate), so two edges with distinct rays meet there
/// only at the vertex; the curve distance is taken outside radius `p3 / 100`.
pub fn validate_plan(plan: &EmbeddingPlan) -> ValidityReport {
    let p3 = plan.settings.p3;
    let nv = plan.vertices.len();
    let mut distinct = true;
    for i in 0..nv {
        for j in i + 1..nv {
            if dist(&plan.vertices[i].position, &plan.vertices[j].position) == 0.0 {
                distinct = false;
            }
        }
    }
    let excl = 0.01 * p3;
    let pairs: Vec<(usize, usize)> =
        (0..plan.edges.len()).flat_map(|i| (i + 1..plan.edges.len()).map(move |j| (i, j))).collect();
    let dists: Vec<PairDistance> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (ei, ej) = (&plan.edges[i], &plan.edges[j]);
            let shared: Vec<P6> =
                ei.ends.iter().filter(|v| ej.ends.contains(v)).map(|&v| plan.vertices[v].position).collect();
            let keep = |line: &[P6]| -> Vec<bool> {
                (0..line.len() - 1)
                    .map(|k| shared.iter().all(|s| dist(&line[k], s) > excl && dist(&line[k + 1], s) > excl))
                    .collect()
            };
            let d = polyline_distance(&ei.polyline, &keep(&ei.polyline), &ej.polyline, &keep(&ej.polyline));
            PairDistance { edges: [i, j], distance: d }
        })
        .collect();
    let closest = dists.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)).cloned();
    let min_edge_distance = closest.as_ref().map_or(f64::INFINITY, |p| p.distance);

    let mut min_angle = std::f64::consts::PI;
    for v in 0..nv {
        let dirs: Vec<P6> =
            plan.edges.iter().filter(|e| e.ends.contains(&v)).map(|e| leaving_direction(e, v)).collect();
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                let cos = linalg::dot6(&dirs[i], &dirs[j]).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos());
            }
        }
    }

    let mut used = vec![0usize; nv];
    for e in &plan.edges {
        for v in e.ends {
            used[v] += 1;
        }
    }
    let degrees_realized = plan.vertices.iter().enumerate().all(|(k, v)| {
        let planes = v.collection.as_ref().map_or(0, |c| c.planes.len());
        planes == v.degree && used[k] == v.degree && v.ray_counts.iter().all(|&n| n == 1)
    });

    let passed = distinct && min_edge_distance > 0.0 && min_angle > MIN_VERTEX_ANGLE && degrees_realized;
    ValidityReport {
        distinct_vertices: distinct,
        min_edge_distance,
        closest_pair: closest,
        min_vertex_angle: min_angle,
        degrees_realized,
        passed,
    }
}

/// Edge curves as OBJ polylines, in the coordinates
/// `(x3, (x1 + y1 + y3) / sqrt 3, (x2 - y1 + y2 + y3) / 2)`.
pub fn plan_obj(plan: &EmbeddingPlan) -> String {
    let s3 = 3f64.sqrt();
    let proj = |q: &P6| [q[2], (q[0] + q[3] + q[5]) / s3, (q[1] - q[3] + q[4] + q[5]) / 2.0];
    let mut out = String::from("# edge curves\n");
    let mut base = 1;
    for e in &plan.edges {
        out.push_str(&format!("o edge_{}\n", e.index));
        for q in &e.polyline {
            let p = proj(q);
            out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        out.push('l');
        for k in 0..e.polyline.len() {
            out.push_str(&format!(" {}", base + k));
        }
        out.push('\n');
        base += e.polyline.len();
    }
    out
}
