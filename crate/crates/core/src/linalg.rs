//! Small dense helpers shared across modules: complex 3 x 3 matrices and
//! their realification, unitary exponential and logarithm, polar factors,
//! numerical rank and Gauss-Legendre rules.

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat3 = Matrix3<C64>;
pub type CVec3 = Vector3<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `[[Re, -Im], [Im, Re]]`, the action on (x, y) with z = x + i y.
pub fn realify(m: &CMat3) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + 3)] = -z.im;
            out[(i + 3, j)] = z.im;
            out[(i + 3, j + 3)] = z.re;
        }
    }
    out
}

/// Complex vector of C^3 as a point of R^6.
pub fn realify_vec(z: &CVec3) -> [f64; 6] {
    [z[0].re, z[1].re, z[2].re, z[0].im, z[1].im, z[2].im]
}

pub fn complexify_vec(x: &[f64; 6]) -> CVec3 {
    CVec3::new(c(x[0], x[3]), c(x[1], x[4]), c(x[2], x[5]))
}

pub fn frobenius(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|| U^H U - I ||_F`.
pub fn unitarity_defect(u: &CMat3) -> f64 {
    frobenius(&(u.adjoint() * u - CMat3::identity()))
}

/// Exponential of an anti-Hermitian matrix through the Hermitian eigenproblem.
pub fn expm_antihermitian(a: &CMat3) -> CMat3 {
    let h: CMat3 = a * (-I);
    let h = (h + h.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let d = CMat3::from_diagonal(&Vector3::from_fn(|k, _| (I * eig.eigenvalues[k]).exp()));
    v * d * v.adjoint()
}

/// General matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &CMat3) -> CMat3 {
    let norm = frobenius(a);
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let b = a / c(f64::powi(2.0, s), 0.0);
    let mut term = CMat3::identity();
    let mut sum = CMat3::identity();
    for k in 1..20 {
        term = term * b / c(k as f64, 0.0);
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Eigen-decomposition of a unitary matrix `U = V diag(e^{i a}) V^H`.
/// Diagonalizes a generic real combination of the commuting Hermitian
/// parts, retrying the combination if the result does not reproduce `U`.
pub fn unitary_eigen(u: &CMat3) -> Result<(CMat3, [f64; 3])> {
    let h1 = (u + u.adjoint()) * c(0.5, 0.0);
    let h2 = (u - u.adjoint()) * c(0.0, -0.5);
    for weight in [0.618_033_988_749_894_9, 1.414_213_562_373_095, -2.718_281_828_459_045, 0.318_309_886_183_790_7] {
        let h = h1 + h2 * c(weight, 0.0);
        let h = (h + h.adjoint()) * c(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let v = eig.eigenvectors;
        let d = v.adjoint() * u * v;
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| d[(i, j)].norm())
            .fold(0.0, f64::max);
        if off < 1e-11 {
            let angles = [d[(0, 0)].arg(), d[(1, 1)].arg(), d[(2, 2)].arg()];
            return Ok((v, angles));
        }
    }
    Err(Error::Numeric("unitary eigen-decomposition did not converge".into()))
}

/// Traceless anti-Hermitian logarithm of an SU(3) element.
///
/// Eigen-angles start on the principal branch (-pi, pi]. When they sum to
/// a nonzero multiple of 2 pi, the angles farthest from zero are moved to
/// the adjacent branch so that the result lies in su(3).
pub fn su3_log(u: &CMat3) -> Result<CMat3> {
    let (v, mut ang) = unitary_eigen(u)?;
    for a in ang.iter_mut() {
        if *a <= -std::f64::consts::PI + 1e-15 {
            *a += 2.0 * std::f64::consts::PI;
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let sum: f64 = ang.iter().sum();
    let turns = (sum / two_pi).round() as i64;
    if (sum - turns as f64 * two_pi).abs() > 1e-8 {
        return Err(Error::Invalid(format!("determinant phase {sum} is not a multiple of 2 pi")));
    }
    let mut order = [0usize, 1, 2];
    for _ in 0..turns.abs() {
        if turns > 0 {
            order.sort_by(|&a, &b| ang[b].partial_cmp(&ang[a]).unwrap());
            ang[order[0]] -= two_pi;
        } else {
            order.sort_by(|&a, &b| ang[a].partial_cmp(&ang[b]).unwrap());
            ang[order[0]] += two_pi;
        }
    }
    let mean = ang.iter().sum::<f64>() / 3.0;
    let d = CMat3::from_diagonal(&Vector3::from_fn(|k, _| I * (ang[k] - mean)));
    Ok(v * d * v.adjoint())
}

/// Unitary polar factor of an invertible matrix, by the scaled Newton
/// iteration `X <- (g X + X^{-H} / g) / 2`.
///
/// Unlike `U V^H` from an SVD this stays accurate when singular values repeat.
pub fn unitary_polar(m: &CMat3) -> Result<CMat3> {
    let sv = m.singular_values();
    if !(sv.min() > 1e-14 * sv.max()) {
        return Err(Error::Numeric("singular matrix has no polar factor".into()));
    }
    let mut x = *m;
    for _ in 0..100 {
        let xi = x.try_inverse().ok_or_else(|| Error::Numeric("polar iteration hit a singular iterate".into()))?;
        let g = (frobenius(&xi) / frobenius(&x)).sqrt();
        let next = (x * c(g, 0.0) + xi.adjoint() * c(1.0 / g, 0.0)) * c(0.5, 0.0);
        let step = frobenius(&(next - x));
        x = next;
        if step < 1e-15 {
            return Ok(x);
        }
    }
    if unitarity_defect(&x) < 1e-13 {
        return Ok(x);
    }
    Err(Error::Numeric("polar iteration did not converge".into()))
}

/// Numerical rank with a relative singular value cutoff.
pub fn numerical_rank(m: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s >= rel_cutoff * max).count()
}

/// Orthonormalize real rows by Gram-Schmidt, erroring on dependence.
pub fn gram_schmidt(rows: &[[f64; 6]], tol: f64) -> Result<Vec<[f64; 6]>> {
    let mut out: Vec<[f64; 6]> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = *r;
        for _ in 0..2 {
            for q in &out {
                let d = dot6(&v, q);
                for k in 0..6 {
                    v[k] -= d * q[k];
                }
            }
        }
        let n = dot6(&v, &v).sqrt();
        if n <= tol {
            return Err(Error::Invalid("linearly dependent rows".into()));
        }
        out.push(v.map(|x| x / n));
    }
    Ok(out)
}

pub fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm6(a: &[f64; 6]) -> f64 {
    dot6(a, a).sqrt()
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Random element of su(3) with entries of size about `scale`.
pub fn random_su3_algebra<R: Rng>(rng: &mut R, scale: f64) -> CMat3 {
    let g = CMat3::from_fn(|_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let a = (g - g.adjoint()) * c(0.5 * scale, 0.0);
    let tr = a.trace() / c(3.0, 0.0);
    a - CMat3::identity() * tr
}

pub fn random_su3<R: Rng>(rng: &mut R) -> CMat3 {
    expm_antihermitian(&random_su3_algebra(rng, 2.0))
}

pub fn random_u3<R: Rng>(rng: &mut R) -> CMat3 {
    let phase = rng.gen_range(-3.0..3.0);
    random_su3(rng) * (I * phase).exp()
}
