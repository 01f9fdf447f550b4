//! Configurations, the end-to-end gluing run, and its certificates.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::Matrix6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::calibration::{
    calibrated_value, closedness_sweep, metric_sample, plane_tangent, surface_tangent, CalibrationPackage,
    ClosednessSweep, MetricSample, NodeForms, TubeGrid,
};
use super::comass::{comass, ComassOptions};
use super::cutoff::Cutoff;
use super::frames::{modified_form, modified_form_by_pullback, modified_form_differential, TangentFrameField};
use super::homotopy::{closedness, fd_exterior_derivative, DEFAULT_NODES};
use super::mean_curvature::{mean_curvature, ImmersionJet};
use super::potentials::{
    cone_tangent_rows, loop_integral, Box3, Bridged, ConePotential, CutoffProfile, Potential, PotentialKind,
    PotentialPatch, QuadraticModel, Reflected, SlopeBridge, SlopeProfile,
};
use crate::cli_report::Check;
use crate::error::{Error, Result};
use crate::forms6::{max_diff, special_lagrangian_form, KForm, DIM};
use crate::hl_cone::{count_rays, RayOptions};
use crate::linalg::gauss_legendre_01;
use crate::unitary_planes::{align_pair, alignment_defect, gpm_plane, p_plane, Alignment, OrientedPlane3};

/// Tolerance for every on-segment certificate.
pub const GAMMA_TOL: f64 = 1e-8;
pub const CLOSED_TOL: f64 = 5e-6;
pub const BASIN: f64 = crate::form_orbit::FACTOR_BASIN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// A cone glued to its mirror image across the midpoint of the segment.
    Reflected,
    /// Two planes of slopes `rho1`, `rho2` glued by a rotating tangent plane.
    Slopes,
    /// A cone glued to its tangent plane along the ray.
    Tangent,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflected" => Ok(Mode::Reflected),
            "slopes" | "unequal-slopes" => Ok(Mode::Slopes),
            "tangent" | "cone-to-tangent" => Ok(Mode::Tangent),
            _ => Err(Error::Invalid(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GluingConfig {
    pub mode: Mode,
    pub p3: f64,
    pub r0: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Plane `P(tau, theta)` meeting the cone in one ray.
    pub plane: (f64, f64),
    /// Rows of an arbitrary plane through the vertex; overrides `plane`.
    pub plane_rows: Option<[[f64; 6]; 3]>,
    /// Fixed tube radius; `None` shrinks from `r_start` until the basin check passes.
    pub tube_radius: Option<f64>,
    pub r_start: f64,
    pub grid: [usize; 3],
    /// Also sweep the grid with halved spacing.
    pub refine: bool,
    pub gamma_samples: usize,
    pub metric_samples: usize,
    pub comass_points: usize,
    pub comass: ComassOptions,
    pub seed: u64,
}

impl Default for GluingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Reflected,
            p3: 1.0,
            r0: 1.0 / 32.0,
            rho1: 0.3,
            rho2: 0.9,
            plane: (0.0, std::f64::consts::FRAC_PI_4),
            plane_rows: None,
            tube_radius: None,
            r_start: 1.0 / 1024.0,
            grid: [33, 33, 65],
            refine: true,
            gamma_samples: 257,
            metric_samples: 64,
            comass_points: 20,
            comass: ComassOptions::default(),
            seed: 7,
        }
    }
}

/// The glued potential and the data it was built from.
#[derive(Clone)]
pub struct Configuration {
    pub mode: Mode,
    pub p3: f64,
    pub r0: f64,
    /// Slope of the model plane along `gamma` at `x3 = r0`.
    pub rho: f64,
    pub alignment: Option<Alignment>,
    pub alignment_defect: f64,
    pub cone: Option<PotentialPatch>,
    pub partner: Option<PotentialPatch>,
    pub chi: Cutoff,
    pub glued: PotentialPatch,
    /// Slope profile in the two-plane mode.
    pub profile: Option<Arc<dyn SlopeProfile>>,
}

impl Configuration {
    /// Hessian of the model plane at height `x3`.
    pub fn model_hessian(&self, x3: f64) -> [[f64; 3]; 3] {
        let rho = match &self.profile {
            Some(p) => p.jet(x3)[0],
            None => self.rho,
        };
        [[rho, 0.0, 0.0], [0.0, -rho, 0.0], [0.0, 0.0, 0.0]]
    }
}

fn gamma_points(p3: f64, r0: f64, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|k| [0.0, 0.0, r0 + (2.0 * p3 - 2.0 * r0) * k as f64 / (n - 1).max(1) as f64]).collect()
}

fn hess_deviation(h: &[[f64; 3]; 3], m: &[[f64; 3]; 3]) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            w = w.max((h[i][j] - m[i][j]).abs());
        }
    }
    w
}

/// The cone near one of its rays as a gradient graph over the x-coordinates
/// of the aligned frame.
///
/// The box is sampled on a 5 x 5 x 9 lattice to confirm that the cone is
/// graphical there; `F`, `grad F` and `Hess F - diag(rho, -rho, 0)` are
/// certified on the segment of `gamma` inside the box.
pub fn cone_graph_potential(al: &Alignment, ray: &[f64; 6], domain: Box3) -> Result<PotentialPatch> {
    let cone = ConePotential::from_ray(al.s.0, ray);
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..9 {
                let x = [
                    domain.lo[0] + (domain.hi[0] - domain.lo[0]) * i as f64 / 4.0,
                    domain.lo[1] + (domain.hi[1] - domain.lo[1]) * j as f64 / 4.0,
                    domain.lo[2] + (domain.hi[2] - domain.lo[2]) * k as f64 / 8.0,
                ];
                cone.derivs(&x).map_err(|e| Error::Numeric(format!("cone graph node ({i}, {j}, {k}): {e}")))?;
            }
        }
    }
    let model = [[al.rho, 0.0, 0.0], [0.0, -al.rho, 0.0], [0.0; 3]];
    for k in 0..33 {
        let x = [0.0, 0.0, domain.lo[2] + (domain.hi[2] - domain.lo[2]) * k as f64 / 32.0];
        let d = cone.derivs(&x)?;
        let g = d.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = hess_deviation(&d.hess, &model);
        if g > GAMMA_TOL || h > GAMMA_TOL || d.value.abs() > GAMMA_TOL {
            return Err(Error::Certificate(format!(
                "cone potential does not vanish to second order on the ray at x3 = {}: |grad| {g:.2e}, Hess deviation {h:.2e}",
                x[2]
            )));
        }
    }
    Ok(PotentialPatch { domain, kind: PotentialKind::ConeGraph, potential: Arc::new(cone) })
}

/// `chi F + (1 - chi) F'` after checking that `F` and `F'` agree to second
/// order along `gamma`.
pub fn bridge_potentials(f: &PotentialPatch, f_prime: &PotentialPatch, chi: Cutoff) -> Result<PotentialPatch> {
    let lo = [f.domain.lo, f_prime.domain.lo];
    let hi = [f.domain.hi, f_prime.domain.hi];
    let domain = Box3 {
        lo: std::array::from_fn(|k| lo[0][k].max(lo[1][k])),
        hi: std::array::from_fn(|k| hi[0][k].min(hi[1][k])),
    };
    if (0..3).any(|k| domain.lo[k] > domain.hi[k]) {
        return Err(Error::Invalid("potentials have no common domain".into()));
    }
    for k in 0..65 {
        let x = [0.0, 0.0, domain.lo[2] + (domain.hi[2] - domain.lo[2]) * k as f64 / 64.0];
        let a = f.derivs(&x)?;
        let b = f_prime.derivs(&x)?;
        let g = a.grad.iter().chain(&b.grad).fold(0.0f64, |m, v| m.max(v.abs()));
        let h = hess_deviation(&a.hess, &b.hess);
        if g > GAMMA_TOL || h > GAMMA_TOL || (a.value - b.value).abs() > GAMMA_TOL {
            return Err(Error::Certificate(format!(
                "potentials do not agree to second order on gamma at x3 = {}: |grad| {g:.2e}, Hess gap {h:.2e}",
                x[2]
            )));
        }
    }
    let glued = Bridged { f: f.potential.clone(), f_prime: f_prime.potential.clone(), chi };
    Ok(PotentialPatch { domain, kind: PotentialKind::Bridged, potential: Arc::new(glued) })
}

/// Samples of the two-plane bridge `rho(x3) (x1^2 - x2^2) / 2`.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeSurface {
    pub checks: Vec<Check>,
    /// Fitted constant in `dist <= C (r |rho|_C1 + r^2 |rho|_C2)`.
    pub fitted_c: f64,
    /// Ambient sample points of the surface on the tube `|x1|, |x2| <= r`.
    pub points: Vec<[f64; DIM]>,
}

/// Checks the two-plane bridge over the tube of radius `r`.
pub fn rotating_tangent_bridge(
    rho1: f64,
    rho2: f64,
    profile: Arc<dyn SlopeProfile>,
    grid: &TubeGrid,
) -> Result<(PotentialPatch, BridgeSurface)> {
    let top = 2.0 * grid.p3;
    let bridge = SlopeBridge::new(profile.clone(), 0.0, top)?;
    for (x3, want, label) in [(0.0, rho1, "lower"), (top, rho2, "upper")] {
        let got = profile.jet(x3)[0];
        if (got - want).abs() > 1e-12 {
            return Err(Error::Invalid(format!("profile is {got} at the {label} end, expected {want}")));
        }
    }
    let mut tangent_gap: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut meet_gap = f64::INFINITY;
    let mut points = Vec::new();
    let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
    let n = 129;
    for k in 0..n {
        let x3 = grid.r0 + (top - 2.0 * grid.r0) * k as f64 / (n - 1) as f64;
        let j = profile.jet(x3);
        c1 = c1.max(j[0].abs()).max(j[1].abs());
        c2 = c2.max(j[0].abs()).max(j[1].abs()).max(j[2].abs());
    }
    for k in 0..n {
        let x3 = grid.r0 + (top - 2.0 * grid.r0) * k as f64 / (n - 1) as f64;
        let rho = profile.jet(x3)[0];
        let d = bridge.derivs(&[0.0, 0.0, x3])?;
        let plane = gpm_plane(rho);
        let tangent = OrientedPlane3::from_rows(surface_rows(&d.hess))?;
        for r in tangent.orthonormal_frame() {
            tangent_gap = tangent_gap.max(plane.distance_to_span(&r));
        }
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.7), (-1.0, 1.0)] {
            let x = [a * grid.r, b * grid.r, x3];
            let d = bridge.derivs(&x)?;
            let tangent = OrientedPlane3::from_rows(surface_rows(&d.hess))?;
            // Nearest plane of the family: slope fitted by least squares.
            let fit = 0.5 * (d.hess[0][0] - d.hess[1][1]);
            let gpm = gpm_plane(fit);
            let dist = tangent.orthonormal_frame().iter().fold(0.0f64, |m, r| m.max(gpm.distance_to_span(r)));
            let bound = grid.r * c1 + grid.r * grid.r * c2;
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(dist / bound);
            }
            // Distance of an off-gamma point of R from P = {x1 = x2 = y3 = 0}.
            let q = [x[0], x[1], x[2], d.grad[0], d.grad[1], d.grad[2]];
            let off = (q[0] * q[0] + q[1] * q[1] + q[5] * q[5]).sqrt() / (x[0] * x[0] + x[1] * x[1]).sqrt();
            meet_gap = meet_gap.min(off);
            points.push(q);
        }
    }
    let checks = vec![
        Check::at_most("bridge.tangent_on_gamma", tangent_gap, 1e-10, "tangent plane of the bridge along gamma"),
        Check::at_least("bridge.meets_plane_only_on_gamma", meet_gap, 0.5, "bridge meets P only along gamma"),
    ];
    let patch = PotentialPatch {
        domain: Box3 { lo: [-grid.r, -grid.r, 0.0], hi: [grid.r, grid.r, top] },
        kind: PotentialKind::Bridged,
        potential: Arc::new(bridge),
    };
    Ok((patch, BridgeSurface { checks, fitted_c: worst_ratio, points }))
}

fn surface_rows(hess: &[[f64; 3]; 3]) -> [[f64; 6]; 3] {
    std::array::from_fn(|j| {
        let mut v = [0.0; 6];
        v[j] = 1.0;
        for a in 0..3 {
            v[3 + a] = hess[a][j];
        }
        v
    })
}

/// Builds the glued potential for a mode.
pub fn build_configuration(cfg: &GluingConfig) -> Result<Configuration> {
    let (p3, r0) = (cfg.p3, cfg.r0);
    if !(p3 > 0.0 && r0 > 0.0 && 2.0 * r0 < p3) {
        return Err(Error::Invalid(format!("need 0 < 2 r0 < p3, got p3 = {p3}, r0 = {r0}")));
    }
    let chi = Cutoff::new(1.5 * r0, 2.0 * p3 - 1.5 * r0)?;
    let top = 2.0 * p3;
    let wide = 0.25 * r0;
    let domain = Box3 { lo: [-wide, -wide, 0.5 * r0], hi: [wide, wide, top - 0.5 * r0] };
    if cfg.mode == Mode::Slopes {
        let profile: Arc<dyn SlopeProfile> = Arc::new(CutoffProfile { rho1: cfg.rho1, rho2: cfg.rho2, chi });
        let bridge = SlopeBridge::new(profile.clone(), 0.0, top)?;
        return Ok(Configuration {
            mode: cfg.mode,
            p3,
            r0,
            rho: cfg.rho1,
            alignment: None,
            alignment_defect: 0.0,
            cone: None,
            partner: None,
            chi,
            glued: PotentialPatch { domain, kind: PotentialKind::Bridged, potential: Arc::new(bridge) },
            profile: Some(profile),
        });
    }
    let plane = match cfg.plane_rows {
        Some(rows) => OrientedPlane3::from_rows(rows)?,
        None => p_plane(cfg.plane.0, cfg.plane.1),
    };
    let opts = RayOptions { seeds: 4000, two_resolution: false, ..Default::default() };
    let rays = count_rays(&plane, &opts)?;
    if rays.count != 1 {
        return Err(Error::Invalid(format!("plane meets the cone in {} rays; pick a plane with one", rays.count)));
    }
    let ray = rays.rays[0];
    let v = crate::linalg::complexify_vec(&ray);
    let tangent = OrientedPlane3::from_rows(cone_tangent_rows(v[0].arg(), v[1].arg()))?;
    let al = align_pair(&tangent, &plane, &ray)?;
    let defect = alignment_defect(&al, &tangent, &plane, &ray);
    let cone = cone_graph_potential(&al, &ray, domain)?;
    let partner = match cfg.mode {
        Mode::Reflected => PotentialPatch {
            domain,
            kind: PotentialKind::Reflected,
            potential: Arc::new(Reflected { inner: cone.potential.clone(), p3 }),
        },
        _ => PotentialPatch {
            domain,
            kind: PotentialKind::QuadraticModel,
            potential: Arc::new(QuadraticModel { rho: al.rho }),
        },
    };
    let glued = bridge_potentials(&cone, &partner, chi)?;
    Ok(Configuration {
        mode: cfg.mode,
        p3,
        r0,
        rho: al.rho,
        alignment: Some(al),
        alignment_defect: defect,
        cone: Some(cone),
        partner: Some(partner),
        chi,
        glued,
        profile: None,
    })
}

/// Summary of one gluing run.
#[derive(Clone, Debug, Serialize)]
pub struct GluingReport {
    pub mode: Mode,
    pub rho: f64,
    pub tube_radius: f64,
    pub coarse: ClosednessSweep,
    pub fine: Option<ClosednessSweep>,
    pub checks: Vec<Check>,
    /// `max |h_q - h_gamma|` over the tube, for the flattening estimate.
    pub frame_spread: f64,
    /// Deviation of the cone from its tangent plane at two scales (cone modes).
    pub cone_flatness: Option<(f64, f64)>,
    /// Fitted constant of the two-plane tangent estimate (slopes mode).
    pub bridge_constant: Option<f64>,
    pub max_psi_minus_phi: f64,
    pub max_comass: f64,
    pub seconds: f64,
}

impl GluingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rule() -> Vec<(f64, f64)> {
    gauss_legendre_01(DEFAULT_NODES)
}

/// Worst basin distance on a sparse grid, or an error if the potential
/// is not defined there.
fn quick_basin(pot: &dyn Potential, grid: &TubeGrid) -> Result<f64> {
    let field = TangentFrameField::new(pot);
    let rule = rule();
    let mut worst: f64 = 0.0;
    for k in 0..grid.n[2] as isize {
        for (i, j) in [(0, 0), (0, grid.n[1] - 1), (grid.n[0] - 1, 0), (grid.n[0] - 1, grid.n[1] - 1)] {
            let (x, _) = grid.node(i as isize, j as isize, k);
            worst = worst.max(NodeForms::new(&field, &x, &rule)?.basin_distance(grid.r));
        }
    }
    Ok(worst)
}

/// Picks the tube radius: the configured one, or the largest `r_start / 2^k`
/// passing a sparse basin check.
pub fn choose_radius(cfg: &GluingConfig, conf: &Configuration) -> Result<f64> {
    if let Some(r) = cfg.tube_radius {
        return Ok(r);
    }
    let mut r = cfg.r_start;
    for _ in 0..12 {
        let grid = TubeGrid::new(r, cfg.p3, cfg.r0, cfg.grid)?;
        if let Ok(b) = quick_basin(conf.glued.potential.as_ref(), &grid) {
            if b <= 0.5 * BASIN {
                return Ok(r);
            }
        }
        r *= 0.5;
    }
    Err(Error::Numeric(format!("no tube radius down to {r:e} passes the basin check")))
}

fn max_abs(m: &Matrix6<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Runs the whole pipeline for one mode.
pub fn run(cfg: &GluingConfig) -> Result<(GluingReport, CalibrationPackage)> {
    let start = Instant::now();
    let conf = build_configuration(cfg)?;
    let pot = conf.glued.potential.clone();
    let field = TangentFrameField::new(pot.as_ref());
    let mut checks = Vec::new();

    // On-gamma chain.
    let (mut g_grad, mut g_hess, mut g_val, mut g_h, mut g_theta, mut g_dtheta, mut fd_p): (f64, f64, f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let theta_at = |x3: f64| -> Result<f64> { Ok(field.sample(&[0.0, 0.0, x3])?.frame.theta) };
    let fd_h = 1e-3;
    for x in gamma_points(cfg.p3, cfg.r0, cfg.gamma_samples) {
        let d = pot.derivs(&x)?;
        g_grad = g_grad.max(d.grad.iter().fold(0.0, |m, v| m.max(v.abs())));
        g_hess = g_hess.max(hess_deviation(&d.hess, &conf.model_hessian(x[2])));
        g_val = g_val.max(d.value.abs());
        g_h = g_h.max(mean_curvature(&ImmersionJet::gradient_graph(&d))?.norm());
        let s = field.sample(&x)?;
        g_theta = g_theta.max(s.frame.theta.abs());
        g_dtheta = g_dtheta.max(s.dtheta.iter().fold(0.0, |m, v| m.max(v.abs())));
        let mut t = [0.0; 4];
        for (slot, o) in t.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
            *slot = theta_at(x[2] + o * fd_h)?;
        }
        let fd = (t[0] - 8.0 * t[1] + 8.0 * t[2] - t[3]) / (12.0 * fd_h);
        fd_p = fd_p.max(fd.abs());
    }
    checks.push(Check::at_most("gamma.grad", g_grad, GAMMA_TOL, "grad F vanishes on gamma"));
    checks.push(Check::at_most("gamma.hess_minus_model", g_hess, GAMMA_TOL, "Hess F equals the model plane on gamma"));
    checks.push(Check::at_most("gamma.value", g_val, GAMMA_TOL, "F vanishes on gamma"));
    checks.push(Check::at_most("gamma.mean_curvature", g_h, GAMMA_TOL, "mean curvature vanishes on gamma"));
    checks.push(Check::at_most("gamma.theta", g_theta, GAMMA_TOL, "theta vanishes on gamma"));
    checks.push(Check::at_most("gamma.dtheta", g_dtheta, GAMMA_TOL, "d theta vanishes on gamma"));
    checks.push(Check::at_most("plane.dtheta_fd", fd_p, 1e-6, "finite-difference d theta restricted to P"));
    if conf.alignment.is_some() {
        checks.push(Check::at_most("alignment.defect", conf.alignment_defect, 1e-10, "coordinate change aligns P, ray and tangent plane"));
    }

    // Cone graph: exactness of the graph 1-form and flattening.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cone_flatness = None;
    if let Some(cone) = &conf.cone {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let side = 0.2 * cfg.r0;
            let x = [rng.gen_range(-side..side), rng.gen_range(-side..side), rng.gen_range(2.0 * cfg.r0..cfg.p3)];
            let (i, j) = match rng.gen_range(0..3) {
                0 => (0, 1),
                1 => (0, 2),
                _ => (1, 2),
            };
            worst = worst.max(loop_integral(cone.potential.as_ref(), &x, i, j, 0.5 * side)?.abs());
        }
        checks.push(Check::at_most("cone.loop_integrals", worst, 1e-8, "cone graph 1-form is closed"));
        let flat = |d: f64| -> Result<f64> {
            let w = 0.1 * cfg.r0;
            let mut m: f64 = 0.0;
            for (a, b) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-1.0, 0.5)] {
                for t in [d, 1.5 * d, 2.0 * d] {
                    let x = [a * w, b * w, t];
                    let g = cone.derivs(&x)?.grad;
                    let lin = [conf.rho * x[0], -conf.rho * x[1], 0.0];
                    m = m.max((0..3).map(|k| (g[k] - lin[k]).abs()).fold(0.0, f64::max));
                }
            }
            Ok(m)
        };
        let (near, far) = (flat(2.0 * cfg.r0)?, flat(4.0 * cfg.r0)?);
        checks.push(Check::flag("cone.flatter_further_out", far <= near, "cone flattens away from the vertex"));
        cone_flatness = Some((near, far));
    }

    // Tube radius and grids.
    let r = choose_radius(cfg, &conf)?;
    let grid = TubeGrid::new(r, cfg.p3, cfg.r0, cfg.grid)?;
    let mut bridge_constant = None;
    if let Some(profile) = &conf.profile {
        let (_, surf) = rotating_tangent_bridge(cfg.rho1, cfg.rho2, profile.clone(), &grid)?;
        checks.extend(surf.checks.iter().cloned());
        bridge_constant = Some(surf.fitted_c);
    }
    checks.push(Check::at_least("chart.jacobian", grid.min_jacobian(), 1e-6, "tube chart is nonsingular"));
    let coarse = closedness_sweep(pot.as_ref(), &grid)?;
    checks.push(Check::at_most("frames.unitary", coarse.max_unitarity_defect, 1e-10, "h_q is unitary"));
    checks.push(Check::at_most("frames.special_on_p_and_ends", coarse.max_det_defect_special, 1e-8, "h_q is special unitary on P and the end-zones"));
    checks.push(Check::at_most("frames.theta_on_p_and_ends", coarse.max_theta_special, 1e-8, "theta vanishes on P and the end-zones"));
    checks.push(Check::at_most("frames.tangent", coarse.max_tangent_defect, 1e-8, "h_q maps the x-plane to the tangent plane"));
    checks.push(Check::at_most("basin", coarse.max_basin, BASIN, "h^* psi stays in the factorization basin"));
    checks.push(Check::at_most("closedness.coarse", coarse.max_defect, CLOSED_TOL, "d psi vanishes on the grid"));
    let fine = if cfg.refine {
        let f = closedness_sweep(pot.as_ref(), &grid.refined())?;
        checks.push(Check::at_most("closedness.fine", f.max_defect, CLOSED_TOL, "d psi vanishes on the refined grid"));
        let ratio = if f.max_defect > 0.0 { coarse.max_defect / f.max_defect } else { f64::INFINITY };
        checks.push(Check::at_least("closedness.refinement_ratio", ratio, 2.0, "defect at least halves under refinement"));
        Some(f)
    } else {
        None
    };

    // Modified form and the input of the homotopy operator at random nodes.
    let rule = rule();
    let random_x = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(cfg.r0..2.0 * cfg.p3 - cfg.r0)]
    };
    let (mut two_expr, mut fd_phibar): (f64, f64) = (0.0, 0.0);
    let phibar_field = |p: &[f64; DIM]| -> Result<KForm> { Ok(modified_form(field.sample(&[p[0], p[1], p[2]])?.frame.theta)) };
    let tau_field = |p: &[f64; DIM]| -> Result<KForm> { Ok(NodeForms::new(&field, &[p[0], p[1], p[2]], &rule)?.tau_q) };
    let mut tau_samples = Vec::new();
    for _ in 0..16 {
        let x = random_x(&mut rng);
        let s = field.sample(&x)?;
        two_expr = two_expr.max(max_diff(&modified_form(s.frame.theta), &modified_form_by_pullback(&s.frame.h)));
        let p = [x[0], x[1], x[2], 0.0, 0.0, 0.0];
        let fd = fd_exterior_derivative(&phibar_field, &p, 1e-3 * r.max(1e-3))?;
        fd_phibar = fd_phibar.max(max_diff(&fd, &modified_form_differential(s.frame.theta, &s.dtheta)));
        tau_samples.push([x[0], x[1], x[2], rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)]);
    }
    let tau_closed = closedness(&tau_field, &tau_samples, 0.125 * r)?.max_defect;
    checks.push(Check::at_most("modified_form.two_expressions", two_expr, 1e-12, "cos(theta) phi - sin(theta) J^* phi = (h^-1)^* phi"));
    checks.push(Check::at_most("modified_form.fd_differential", fd_phibar, CLOSED_TOL, "d phibar = -d theta ^ (sin(theta) phi + cos(theta) J^* phi)"));
    checks.push(Check::at_most("homotopy.input_closed", tau_closed, CLOSED_TOL, "the integrated form is closed"));

    // Metric samples on Sigma, P, the end-zones and at random.
    let mut samples: Vec<(MetricSample, &'static str)> = Vec::new();
    let corners: Vec<[f64; 3]> = (0..8).map(|c| [0, 1, 2].map(|k| if c >> k & 1 == 1 { r } else { -r })).collect();
    let heights: Vec<f64> = (0..9).map(|k| cfg.r0 + (2.0 * cfg.p3 - 2.0 * cfg.r0) * k as f64 / 8.0).collect();
    for &x3 in &heights {
        for (a, b) in [(0.0, 0.0), (r, 0.0), (0.0, -r), (-r, r)] {
            let nf = NodeForms::new(&field, &[a, b, x3], &rule)?;
            samples.push((metric_sample(&nf, &[0.0; 3])?, "sigma"));
        }
        let nf = NodeForms::new(&field, &[0.0, 0.0, x3], &rule)?;
        for (a, b) in [(r, r), (-r, 0.5 * r), (0.3 * r, -r)] {
            samples.push((metric_sample(&nf, &[a, b, 0.0])?, "plane"));
        }
    }
    let ends = [cfg.r0, 1.25 * cfg.r0, 1.5 * cfg.r0, 2.0 * cfg.p3 - 1.5 * cfg.r0, 2.0 * cfg.p3 - cfg.r0];
    for &x3 in &ends {
        for (a, b) in [(0.0, 0.0), (r, -r), (-r, 0.5 * r)] {
            let nf = NodeForms::new(&field, &[a, b, x3], &rule)?;
            for y in corners.iter().step_by(3) {
                samples.push((metric_sample(&nf, y)?, "end"));
            }
        }
    }
    for _ in 0..cfg.metric_samples {
        let x = random_x(&mut rng);
        let y = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
        let nf = NodeForms::new(&field, &x, &rule)?;
        samples.push((metric_sample(&nf, &y)?, "random"));
    }
    let phi: KForm = special_lagrangian_form();
    let (mut resid, mut hp, mut cal_sigma, mut cal_p, mut end_psi, mut end_g, mut min_eig, mut pull): (f64, f64, f64, f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, f64::INFINITY, 0.0);
    for (s, tag) in &samples {
        resid = resid.max(s.factor_residual);
        min_eig = min_eig.min(s.min_eigenvalue);
        pull = pull.max(s.pullback_defect);
        match *tag {
            "sigma" => {
                hp = hp.max(s.h_prime_defect);
                let d = pot.derivs(&s.x)?;
                cal_sigma = cal_sigma.max((calibrated_value(&s.psi, &s.g, &surface_tangent(&d.hess))? - 1.0).abs());
            }
            "plane" => {
                hp = hp.max(s.h_prime_defect);
                cal_p = cal_p.max((calibrated_value(&s.psi, &s.g, &plane_tangent())? - 1.0).abs());
            }
            "end" => {
                hp = hp.max(s.h_prime_defect);
                end_psi = end_psi.max(max_diff(&s.psi, &phi));
                end_g = end_g.max(max_abs(&(s.g - Matrix6::identity())));
            }
            _ => {}
        }
    }
    checks.push(Check::at_most("factorization.residual", resid, 1e-12, "h'^* phi = h^* psi"));
    checks.push(Check::at_most("factorization.identity_on_sigma_p_ends", hp, 1e-8, "h' is the identity on Sigma, P and the end-zones"));
    checks.push(Check::at_most("calibrated.sigma", cal_sigma, 1e-8, "psi is 1 on unit tangent 3-vectors of Sigma"));
    checks.push(Check::at_most("calibrated.plane", cal_p, 1e-8, "psi is 1 on unit tangent 3-vectors of P"));
    checks.push(Check::at_most("ends.psi_is_phi", end_psi, 1e-12, "psi = phi on the end-zones"));
    checks.push(Check::at_most("ends.metric_is_flat", end_g, 1e-12, "g = delta on the end-zones"));
    checks.push(Check::at_least("metric.min_eigenvalue", min_eig, f64::MIN_POSITIVE, "g is positive definite"));
    checks.push(Check::at_most("metric.psi_is_pullback", pull, 1e-10, "psi = ((h' h)^-1)^* phi"));

    // Comass at random samples.
    let mut max_comass: f64 = 0.0;
    let randoms: Vec<&MetricSample> = samples.iter().filter(|(_, t)| *t == "random").map(|(s, _)| s).collect();
    for s in randoms.iter().take(cfg.comass_points) {
        max_comass = max_comass.max(comass(&s.psi, &s.g, &cfg.comass)?.value);
    }
    checks.push(Check::at_most("comass", max_comass, 1.0 + 1e-6, "psi has comass 1 in g"));

    // Spread of the frames over the tube, relative to gamma.
    let mut frame_spread: f64 = 0.0;
    for &x3 in &heights {
        let h0 = field.sample(&[0.0, 0.0, x3])?.frame.h;
        for (a, b) in [(r, r), (-r, r), (r, -r), (-r, -r)] {
            let h = field.sample(&[a, b, x3])?.frame.h;
            frame_spread = frame_spread.max((h - h0).norm());
        }
    }

    let package = CalibrationPackage {
        potential: pot,
        grid,
        coarse: coarse.clone(),
        fine: fine.clone(),
        samples: samples.into_iter().map(|(s, _)| s).collect(),
    };
    let max_psi_minus_phi = package.max_psi_minus_phi();
    let report = GluingReport {
        mode: cfg.mode,
        rho: conf.rho,
        tube_radius: r,
        coarse,
        fine,
        checks,
        frame_spread,
        cone_flatness,
        bridge_constant,
        max_psi_minus_phi,
        max_comass,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, package))
}
