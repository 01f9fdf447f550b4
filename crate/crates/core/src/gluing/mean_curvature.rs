//! Mean curvature of an immersed 3-manifold in R^6.

use nalgebra::{Matrix3, SMatrix, Vector6};

use super::potentials::Derivs;
use crate::error::{Error, Result};

pub type Jacobian = SMatrix<f64, 6, 3>;

/// First and second derivatives of an immersion at a point.
#[derive(Clone, Debug)]
pub struct ImmersionJet {
    pub d: Jacobian,
    /// `dd[i][j]` is the ambient vector `d_i d_j f`.
    pub dd: [[Vector6<f64>; 3]; 3],
}

impl ImmersionJet {
    /// Jet of `x -> (x, grad F(x))`.
    pub fn gradient_graph(f: &Derivs) -> Self {
        let mut d = Jacobian::zeros();
        for i in 0..3 {
            d[(i, i)] = 1.0;
            for a in 0..3 {
                d[(a + 3, i)] = f.hess[a][i];
            }
        }
        let dd = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut v = Vector6::zeros();
                for a in 0..3 {
                    v[a + 3] = f.third[i][j][a];
                }
                v
            })
        });
        Self { d, dd }
    }
}

/// `H = (g^{ij} d_i d_j f)^perp` with `g = D^T D`.
pub fn mean_curvature(jet: &ImmersionJet) -> Result<Vector6<f64>> {
    let g: Matrix3<f64> = jet.d.transpose() * jet.d;
    let gi = g.try_inverse().ok_or_else(|| Error::Numeric("singular induced metric".into()))?;
    if !(g.determinant() > 1e-14) {
        return Err(Error::Numeric("degenerate induced metric".into()));
    }
    let mut a = Vector6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a += jet.dd[i][j] * gi[(i, j)];
        }
    }
    let tangential = jet.d * (gi * (jet.d.transpose() * a));
    Ok(a - tangential)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_graph_is_minimal() {
        let f = Derivs::default();
        let h = mean_curvature(&ImmersionJet::gradient_graph(&f)).unwrap();
        assert_eq!(h.norm(), 0.0);
    }

    #[test]
    fn paraboloid_direction() {
        // Graph of grad(x1^3 / 6): y1 = x1^2 / 2 curves in y1 at the origin.
        let mut f = Derivs::default();
        f.third[0][0][0] = 1.0;
        let h = mean_curvature(&ImmersionJet::gradient_graph(&f)).unwrap();
        assert!((h[3] - 1.0).abs() < 1e-15);
    }
}
