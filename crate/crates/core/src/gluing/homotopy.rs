//! The integration operator `I` with `dI + Id = id - pi^*` on a cylinder
//! `base x R^k`, and finite-difference exterior derivatives of form fields.
//!
//! Points are split as `p = (p_base, p_perp)` along the first `base_dim`
//! coordinates. With `G(t, p) = (p_base, t p_perp)`,
//! `I(tau)(p) = int_0^1 D_t^* (p_perp _| tau(G(t, p))) dt` where
//! `D_t = diag(1, ..., 1, t, ..., t)`.

use crate::error::{Error, Result};
use crate::forms6::{basis_masks, KForm, DIM};
use crate::linalg::gauss_legendre_01;

pub const DEFAULT_NODES: usize = 32;

/// Pullback by a diagonal map.
pub fn diagonal_pullback(a: &KForm, d: &[f64; DIM]) -> KForm {
    let masks = basis_masks(a.degree());
    let coeffs = a
        .coeffs()
        .iter()
        .zip(masks)
        .map(|(c, m)| {
            let mut s = *c;
            for (i, di) in d.iter().enumerate() {
                if m & (1 << i) != 0 {
                    s *= di;
                }
            }
            s
        })
        .collect();
    KForm::from_coeffs(a.degree(), coeffs).expect("same degree")
}

/// `I(tau)(p)` by Gauss-Legendre quadrature in `t`.
pub fn homotopy_primitive<F>(tau: F, p: &[f64; DIM], base_dim: usize, rule: &[(f64, f64)]) -> Result<KForm>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    if base_dim > DIM {
        return Err(Error::Invalid(format!("base dimension {base_dim} exceeds {DIM}")));
    }
    let mut perp = [0.0; DIM];
    perp[base_dim..].copy_from_slice(&p[base_dim..]);
    let mut acc: Option<KForm> = None;
    for &(t, w) in rule {
        let mut g = *p;
        for v in g.iter_mut().skip(base_dim) {
            *v *= t;
        }
        let form = tau(&g)?;
        if form.degree() == 0 {
            return Err(Error::Degree("cannot integrate a 0-form".into()));
        }
        let mut d = [1.0; DIM];
        for v in d.iter_mut().skip(base_dim) {
            *v = t;
        }
        let term = diagonal_pullback(&form.interior(&perp)?, &d).scale(w);
        acc = Some(match acc {
            None => term,
            Some(a) => a.try_add(&term)?,
        });
    }
    acc.ok_or_else(|| Error::Invalid("empty quadrature rule".into()))
}

/// [`homotopy_primitive`] with the default 32-node rule.
pub fn homotopy_primitive_default<F>(tau: F, p: &[f64; DIM], base_dim: usize) -> Result<KForm>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    homotopy_primitive(tau, p, base_dim, &gauss_legendre_01(DEFAULT_NODES))
}

/// Fourth-order central difference weights for offsets -2..=2.
pub const FD4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

/// `sum_i dx_i ^ d_i a` with each partial derivative by fourth-order
/// central differences of step `h`.
pub fn fd_exterior_derivative<F>(field: F, p: &[f64; DIM], h: f64) -> Result<KForm>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    let mut out: Option<KForm> = None;
    for i in 0..DIM {
        let mut partial: Option<KForm> = None;
        for (k, w) in FD4.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let mut q = *p;
            q[i] += (k as f64 - 2.0) * h;
            let term = field(&q)?.scale(w / h);
            partial = Some(match partial {
                None => term,
                Some(a) => a.try_add(&term)?,
            });
        }
        let partial = partial.expect("nonzero weights");
        let term = KForm::coordinate(i)?.wedge(&partial)?;
        out = Some(match out {
            None => term,
            Some(a) => a.try_add(&term)?,
        });
    }
    Ok(out.expect("DIM > 0"))
}

/// Location and size of the largest finite-difference `d tau` over samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosednessReport {
    pub max_defect: f64,
    pub at: [f64; DIM],
}

pub fn closedness<F>(field: F, samples: &[[f64; DIM]], h: f64) -> Result<ClosednessReport>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    let mut rep = ClosednessReport { max_defect: 0.0, at: [0.0; DIM] };
    for p in samples {
        let d = crate::forms6::max_norm(&fd_exterior_derivative(&field, p, h)?);
        if d > rep.max_defect || !d.is_finite() {
            rep = ClosednessReport { max_defect: d, at: *p };
        }
    }
    Ok(rep)
}

/// [`homotopy_primitive`] after checking that `tau` is closed at the given
/// samples within `tol`.
pub fn checked_primitive<F>(
    tau: F,
    points: &[[f64; DIM]],
    samples: &[[f64; DIM]],
    base_dim: usize,
    h: f64,
    tol: f64,
) -> Result<Vec<KForm>>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    let rep = closedness(&tau, samples, h)?;
    if !(rep.max_defect <= tol) {
        return Err(Error::Certificate(format!(
            "input is not closed: |d tau| = {:.3e} at {:?}",
            rep.max_defect, rep.at
        )));
    }
    let rule = gauss_legendre_01(DEFAULT_NODES);
    points.iter().map(|p| homotopy_primitive(&tau, p, base_dim, &rule)).collect()
}

/// `pi^* tau` at `p`, where `pi(p) = (p_base, 0)`.
pub fn base_pullback<F>(tau: F, p: &[f64; DIM], base_dim: usize) -> Result<KForm>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    let mut q = *p;
    for v in q.iter_mut().skip(base_dim) {
        *v = 0.0;
    }
    let mut d = [1.0; DIM];
    for v in d.iter_mut().skip(base_dim) {
        *v = 0.0;
    }
    Ok(diagonal_pullback(&tau(&q)?, &d))
}

/// `d I(tau) + I(d tau) - tau + pi^* tau` at `p`; vanishes for any smooth
/// `tau` up to discretization error.
pub fn cartan_defect<F>(tau: F, p: &[f64; DIM], base_dim: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64; DIM]) -> Result<KForm>,
{
    let rule = gauss_legendre_01(DEFAULT_NODES);
    let d_i = fd_exterior_derivative(|q| homotopy_primitive(&tau, q, base_dim, &rule), p, h)?;
    let dtau = |q: &[f64; DIM]| fd_exterior_derivative(&tau, q, h);
    let i_d = homotopy_primitive(dtau, p, base_dim, &rule)?;
    let total = d_i.try_add(&i_d)?.try_sub(&tau(p)?)?.try_add(&base_pullback(&tau, p, base_dim)?)?;
    Ok(crate::forms6::max_norm(&total))
}
