//! Gluing along one singular segment: bridged Lagrangian potentials,
//! unitary frames, the closed form `psi`, its metric, and certificates.
//!
//! Everything is set in aligned coordinates where the segment is
//! `gamma = {(0, 0, x3) : 0 <= x3 <= 2 p3}`, the plane through it is the
//! y1y2x3-plane `P`, and the glued surface `Sigma` is the graph of the
//! gradient of a potential `F(x1, x2, x3)` with
//! `Hess F = diag(rho, -rho, 0)` along `gamma`.

pub mod calibration;
pub mod comass;
pub mod cutoff;
pub mod frames;
pub mod homotopy;
pub mod mean_curvature;
pub mod mesh;
pub mod pipeline;
pub mod potentials;

pub use calibration::{CalibrationPackage, ClosednessSweep, MetricSample, NodeForms, TubeGrid};
pub use comass::{comass, ComassOptions, ComassResult};
pub use cutoff::Cutoff;
pub use frames::{frame_from_hessian, modified_form, TangentFrameField};
pub use homotopy::{fd_exterior_derivative, homotopy_primitive};
pub use mean_curvature::{mean_curvature, ImmersionJet};
pub use pipeline::{
    bridge_potentials, build_configuration, cone_graph_potential, rotating_tangent_bridge, run, Configuration,
    GluingConfig, GluingReport, Mode,
};
pub use potentials::{Derivs, Potential, PotentialKind, PotentialPatch};
