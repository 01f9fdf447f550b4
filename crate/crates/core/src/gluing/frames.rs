//! Unitary frames `h_q` of gradient graphs and the modified form
//! `(h^{-1})^* phi = cos(theta) phi - sin(theta) J^* phi`.

use nalgebra::{Matrix3, SymmetricEigen};

use super::potentials::{Mat3, Potential, Tensor3};
use crate::error::{Error, Result};
use crate::forms6::{
    complex_structure_pullback, special_lagrangian_form, special_lagrangian_imag, KForm, LinearMap6,
};
use crate::linalg::{c, realify, unitary_polar, CMat3};

/// Tangent planes with a Hessian eigenvalue beyond this are rejected.
pub const MAX_SLOPE: f64 = 1e3;

/// Frame at one point of a gradient graph with Hessian `H`.
#[derive(Clone, Debug)]
pub struct Frame {
    /// Unitary polar factor of `I + i H`.
    pub h: CMat3,
    /// `arg det h^{-1}` in `(-pi, pi]`.
    pub theta: f64,
    /// Eigenvalues of `H`.
    pub slopes: [f64; 3],
}

fn to_matrix(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn frame_from_hessian(hess: &Mat3) -> Result<Frame> {
    let hm = to_matrix(hess);
    let eig = SymmetricEigen::new(hm);
    let slopes = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    if slopes.iter().any(|l| !l.is_finite() || l.abs() > MAX_SLOPE) {
        return Err(Error::Invalid(format!("tangent plane too steep: slopes {slopes:?}")));
    }
    let m = CMat3::from_fn(|i, j| c(if i == j { 1.0 } else { 0.0 }, hess[i][j]));
    let h = unitary_polar(&m)?;
    let theta = -h.determinant().arg();
    Ok(Frame { h, theta, slopes })
}

/// `d theta_j = -tr((I + H^2)^{-1} d_j H)` where `theta = -sum atan(lambda)`.
pub fn dtheta(hess: &Mat3, third: &Tensor3) -> Result<[f64; 3]> {
    let hm = to_matrix(hess);
    let g = (Matrix3::identity() + hm * hm)
        .try_inverse()
        .ok_or_else(|| Error::Numeric("I + H^2 is singular".into()))?;
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let t = Matrix3::from_fn(|a, b| third[j][a][b]);
        *o = -(g * t).trace();
    }
    Ok(out)
}

/// `cos(theta) phi - sin(theta) J^* phi`.
pub fn modified_form(theta: f64) -> KForm {
    let phi: KForm = special_lagrangian_form();
    let psi: KForm = special_lagrangian_imag();
    let (s, co) = theta.sin_cos();
    phi.scale(co).try_sub(&psi.scale(s)).expect("degree 3")
}

/// `(h^{-1})^* phi` computed by pulling back with the realified inverse.
pub fn modified_form_by_pullback(h: &CMat3) -> KForm {
    let phi: KForm = special_lagrangian_form();
    phi.pullback(&LinearMap6::from_matrix(&realify(&h.adjoint())))
}

/// `-d theta ^ (sin(theta) phi + cos(theta) J^* phi)` with `d theta` along x.
pub fn modified_form_differential(theta: f64, dtheta: &[f64; 3]) -> KForm {
    let phi: KForm = special_lagrangian_form();
    let jphi = complex_structure_pullback(&phi);
    let (s, co) = theta.sin_cos();
    let inner = phi.scale(s).try_add(&jphi.scale(co)).expect("degree 3");
    let mut dt = KForm::zero(1).expect("degree 1");
    for (j, v) in dtheta.iter().enumerate() {
        dt.add_term(&[j], -v).expect("degree 1");
    }
    dt.wedge(&inner).expect("degree 4")
}

/// Everything the pipeline needs from the surface at one base point.
#[derive(Clone, Debug)]
pub struct FrameSample {
    pub x: [f64; 3],
    pub grad: [f64; 3],
    pub hess: Mat3,
    pub frame: Frame,
    pub dtheta: [f64; 3],
}

/// `q -> h_q` on the tube, constant along the normal directions `Y_j` of
/// the chart `Q(X, Y) = (X, grad F(X) + Y)`.
pub struct TangentFrameField<'a> {
    pub potential: &'a dyn Potential,
}

impl<'a> TangentFrameField<'a> {
    pub fn new(potential: &'a dyn Potential) -> Self {
        Self { potential }
    }

    /// Frame data at chart point `(X, Y)`; only `X` matters.
    pub fn sample(&self, x: &[f64; 3]) -> Result<FrameSample> {
        let d = self.potential.derivs(x)?;
        let frame = frame_from_hessian(&d.hess)?;
        let dt = dtheta(&d.hess, &d.third)?;
        Ok(FrameSample { x: *x, grad: d.grad, hess: d.hess, frame, dtheta: dt })
    }
}

/// `Q` differential `[[I, 0], [H, I]]` acting on column vectors.
pub fn chart_differential(hess: &Mat3) -> LinearMap6 {
    let mut m = LinearMap6::identity();
    for i in 0..3 {
        for j in 0..3 {
            m.m[i + 3][j] = hess[i][j];
        }
    }
    m
}

/// Inverse of [`chart_differential`].
pub fn chart_differential_inverse(hess: &Mat3) -> LinearMap6 {
    let mut m = LinearMap6::identity();
    for i in 0..3 {
        for j in 0..3 {
            m.m[i + 3][j] = -hess[i][j];
        }
    }
    m
}
