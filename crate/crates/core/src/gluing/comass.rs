//! Comass of a 3-form in a constant metric on R^6.
//!
//! With `g = L L^T`, g-orthonormal frames are `L^{-T} u` for Euclidean
//! orthonormal `u`, so the comass of `omega` in `g` is the Euclidean comass of
//! `(L^{-T})^* omega`. That is maximized by projected gradient ascent over
//! orthonormal 3-frames from many starts, plus a random sampling sweep that
//! gives an independent lower bound.

use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms6::{KForm, LinearMap6, DIM};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComassOptions {
    pub seeds: usize,
    pub sweep: usize,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl Default for ComassOptions {
    fn default() -> Self {
        Self { seeds: 2000, sweep: 100_000, iterations: 400, rng_seed: 0x5eed }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComassResult {
    pub value: f64,
    /// Best sweep value, a lower bound found without ascent.
    pub sweep_value: f64,
    /// Maximizing g-orthonormal frame.
    pub frame: [[f64; DIM]; 3],
}

type Frame3 = [[f64; DIM]; 3];

fn gram_schmidt3(u: &mut Frame3) -> bool {
    for i in 0..3 {
        for j in 0..i {
            let d: f64 = (0..DIM).map(|k| u[i][k] * u[j][k]).sum();
            for k in 0..DIM {
                u[i][k] -= d * u[j][k];
            }
        }
        let n: f64 = u[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-12 {
            return false;
        }
        for k in 0..DIM {
            u[i][k] /= n;
        }
    }
    true
}

/// Value of a 3-form on three vectors, via its 20 coefficients.
fn value(w: &KForm, u: &Frame3) -> f64 {
    w.eval_vectors(u).expect("degree 3")
}

/// Partial gradients `omega(., u2, u3)`, `omega(u1, ., u3)`, `omega(u1, u2, .)`.
fn gradient(w: &KForm, u: &Frame3) -> Frame3 {
    let g0 = w.interior(&u[1]).and_then(|a| a.interior(&u[2]));
    let g1 = w.interior(&u[2]).and_then(|a| a.interior(&u[0]));
    let g2 = w.interior(&u[0]).and_then(|a| a.interior(&u[1]));
    let take = |f: Result<KForm>| -> [f64; DIM] {
        let f = f.expect("degree 3");
        std::array::from_fn(|k| f.coeffs()[k])
    };
    [take(g0), take(g1), take(g2)]
}

fn random_frame<R: Rng>(rng: &mut R) -> Frame3 {
    loop {
        let mut u: Frame3 = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        if gram_schmidt3(&mut u) {
            return u;
        }
    }
}

fn ascend(w: &KForm, mut u: Frame3, iterations: usize) -> (f64, Frame3) {
    let mut best = value(w, &u);
    let mut step = 0.5;
    for _ in 0..iterations {
        let g = gradient(w, &u);
        let mut cand = u;
        for i in 0..3 {
            for k in 0..DIM {
                cand[i][k] += step * g[i][k];
            }
        }
        if !gram_schmidt3(&mut cand) {
            step *= 0.5;
            continue;
        }
        let v = value(w, &cand);
        if v > best {
            let gain = v - best;
            best = v;
            u = cand;
            step = (step * 1.2).min(2.0);
            if gain < 1e-16 {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    (best, u)
}

/// Euclidean comass by multi-start ascent and a sampling sweep.
fn euclidean_comass(w: &KForm, opts: &ComassOptions) -> (f64, f64, Frame3) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut best = f64::NEG_INFINITY;
    let mut best_frame = [[0.0; DIM]; 3];
    for _ in 0..opts.seeds {
        let u = random_frame(&mut rng);
        // Both orientations: ascent from u and from its reversal.
        for start in [u, [u[1], u[0], u[2]]] {
            let (v, f) = ascend(w, start, opts.iterations);
            if v > best {
                best = v;
                best_frame = f;
            }
        }
    }
    let mut sweep = f64::NEG_INFINITY;
    for _ in 0..opts.sweep {
        let u = random_frame(&mut rng);
        sweep = sweep.max(value(w, &u).abs());
    }
    (best.max(sweep), sweep, best_frame)
}

/// Comass of `omega` in the metric `g`.
pub fn comass(omega: &KForm, g: &Matrix6<f64>, opts: &ComassOptions) -> Result<ComassResult> {
    if omega.degree() != 3 {
        return Err(Error::Degree(format!("comass of a {}-form", omega.degree())));
    }
    let chol = g.cholesky().ok_or_else(|| Error::Invalid("metric is not positive definite".into()))?;
    let l = chol.l();
    let lit = l.transpose().try_inverse().ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let w = omega.pullback(&LinearMap6::from_matrix(&lit));
    let (value, sweep_value, u) = euclidean_comass(&w, opts);
    let frame = u.map(|ui| {
        let v = lit * Vector6::from_row_slice(&ui);
        std::array::from_fn(|k| v[k])
    });
    Ok(ComassResult { value, sweep_value, frame })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_volume_has_comass_one() {
        let w = KForm::basis(&[0, 1, 2]).unwrap();
        let opts = ComassOptions { seeds: 20, sweep: 1000, ..Default::default() };
        let r = comass(&w, &Matrix6::identity(), &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
    }
}
