//! The GL(6) orbit of a 3-form near the special Lagrangian form: the
//! differential of `h -> h^* phi`, its exact rank, the dimension count
//! `kappa(k, n) = n^2 - C(n, k)`, and a Newton solver writing nearby forms
//! as pullbacks of phi.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms6::{basis_len, basis_masks, special_lagrangian_form, KForm, LinearMap6, Scalar, DIM};
use crate::linalg;

/// Columns are indexed by `6 * row + col` of the elementary matrix.
pub const GL6_DIM: usize = DIM * DIM;

/// Matrix of `X -> d/dt (I + tX)^* phi` with one row per basis 3-index.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitDifferential<T> {
    pub rows: Vec<Vec<T>>,
}

impl OrbitDifferential<f64> {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), GL6_DIM, |i, j| self.rows[i][j])
    }
}

/// Assembles the differential column by column from elementary matrices.
pub fn orbit_differential<T: Scalar>(phi: &KForm<T>) -> Result<OrbitDifferential<T>> {
    let k = phi.degree();
    if k == 0 {
        return Err(Error::Degree("orbit differential of a 0-form".into()));
    }
    let masks = basis_masks(k);
    let mut rows = vec![vec![T::zero(); GL6_DIM]; masks.len()];
    for (r, mask) in masks.iter().enumerate() {
        let idx: Vec<usize> = (0..DIM).filter(|i| mask & (1 << i) != 0).collect();
        for alpha in 0..DIM {
            for (slot, &beta) in idx.iter().enumerate() {
                // E_{alpha beta} sends e_beta to e_alpha and kills the rest.
                let mut replaced = idx.clone();
                replaced[slot] = alpha;
                let v = phi.get(&replaced);
                let col = DIM * alpha + beta;
                rows[r][col] = rows[r][col].clone() + v;
            }
        }
    }
    Ok(OrbitDifferential { rows })
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn bareiss_rank(m: &[Vec<BigInt>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..rows {
            for j in col + 1..cols {
                let num = &a[rank][col] * &a[i][j] - &a[i][col] * &a[rank][j];
                debug_assert!((&num % &prev).is_zero());
                a[i][j] = num / &prev;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Exact rank of a rational matrix, clearing denominators row by row.
pub fn exact_rank(m: &[Vec<BigRational>]) -> usize {
    let ints: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::from(1), |acc, q| num_integer::Integer::lcm(&acc, q.denom()));
            row.iter().map(|q| (q * BigRational::from_integer(lcm.clone())).to_integer()).collect()
        })
        .collect();
    bareiss_rank(&ints)
}

/// The float form with its coefficients read as exact rationals.
pub fn to_exact(phi: &KForm<f64>) -> Result<KForm<BigRational>> {
    let coeffs: Option<Vec<BigRational>> = phi.coeffs().iter().map(|c| BigRational::from_float(*c)).collect();
    let coeffs = coeffs.ok_or_else(|| Error::Invalid("non-finite coefficient".into()))?;
    KForm::from_coeffs(phi.degree(), coeffs)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct StabilizerReport {
    pub rank: usize,
    pub kernel_dim: usize,
}

/// Exact rank of the orbit differential and the dimension of its kernel.
pub fn stabilizer_dimension(phi: &KForm<f64>) -> Result<StabilizerReport> {
    let exact = to_exact(phi)?;
    let d = orbit_differential(&exact)?;
    let rank = exact_rank(&d.rows);
    Ok(StabilizerReport { rank, kernel_dim: GL6_DIM - rank })
}

/// Float rank of the orbit differential with relative cutoff 1e-9.
pub fn float_rank(phi: &KForm<f64>) -> Result<usize> {
    let d = orbit_differential(phi)?;
    Ok(linalg::numerical_rank(&d.to_dmatrix(), 1e-9))
}

/// Smallest nonzero-count singular value, i.e. the `rank`-th singular value.
pub fn smallest_singular_value(phi: &KForm<f64>) -> Result<f64> {
    let d = orbit_differential(phi)?.to_dmatrix();
    let mut sv: Vec<f64> = d.singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(*sv.last().unwrap_or(&0.0))
}

/// Realifications of the 16 real basis elements of sl(3, C), as integer
/// 6 x 6 matrices: `E_jk` and `i E_jk` off the diagonal, then
/// `diag(1, -1, 0)`, `diag(0, 1, -1)` and their multiples by `i`.
pub fn sl3c_basis() -> Vec<[[i64; 6]; 6]> {
    let mut out = Vec::with_capacity(16);
    let real = |entries: &[(usize, usize, i64)]| {
        let mut m = [[0i64; 6]; 6];
        for &(j, k, v) in entries {
            m[j][k] = v;
            m[j + 3][k + 3] = v;
        }
        m
    };
    let imag = |entries: &[(usize, usize, i64)]| {
        let mut m = [[0i64; 6]; 6];
        for &(j, k, v) in entries {
            m[j][k + 3] = -v;
            m[j + 3][k] = v;
        }
        m
    };
    for j in 0..3 {
        for k in 0..3 {
            if j != k {
                out.push(real(&[(j, k, 1)]));
                out.push(imag(&[(j, k, 1)]));
            }
        }
    }
    for d in [[(0, 0, 1), (1, 1, -1)], [(1, 1, 1), (2, 2, -1)]] {
        out.push(real(&d));
        out.push(imag(&d));
    }
    out
}

fn apply_exact(d: &OrbitDifferential<BigRational>, m: &[[i64; 6]; 6]) -> Vec<BigRational> {
    d.rows
        .iter()
        .map(|row| {
            let mut acc = BigRational::zero();
            for a in 0..DIM {
                for b in 0..DIM {
                    if m[a][b] != 0 {
                        acc += &row[DIM * a + b] * BigRational::from_i64(m[a][b]).unwrap();
                    }
                }
            }
            acc
        })
        .collect()
}

/// Image of an integer matrix under the orbit differential, exactly.
pub fn differential_image(phi: &KForm<f64>, m: &[[i64; 6]; 6]) -> Result<Vec<BigRational>> {
    let d = orbit_differential(&to_exact(phi)?)?;
    Ok(apply_exact(&d, m))
}

/// True iff every realified basis element of sl(3, C) is in the kernel.
pub fn kernel_contains_sl3c(phi: &KForm<f64>) -> Result<bool> {
    let d = orbit_differential(&to_exact(phi)?)?;
    Ok(sl3c_basis().iter().all(|m| apply_exact(&d, m).iter().all(|v| v.is_zero())))
}

/// Exact rank of the 16 realified sl(3, C) basis elements as vectors in R^36.
pub fn sl3c_span_dimension() -> usize {
    let rows: Vec<Vec<BigInt>> = sl3c_basis()
        .iter()
        .map(|m| m.iter().flat_map(|r| r.iter().map(|v| BigInt::from(*v))).collect())
        .collect();
    bareiss_rank(&rows)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct KappaEntry {
    pub n: u32,
    pub k: u32,
    pub kappa: i64,
    pub positive: bool,
    /// What the trichotomy predicts for positivity.
    pub predicted: bool,
}

impl KappaEntry {
    pub fn agrees(&self) -> bool {
        self.positive == self.predicted
    }
}

pub fn binomial(n: u32, k: u32) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as i64;
    let n = n as i64;
    (0..k).fold(1i64, |acc, i| acc * (n - i) / (i + 1))
}

/// `n <= 7`, or `k` in {0, 1, 2, n-2, n-1, n}, or `n = 8, k != 4`.
pub fn trichotomy_predicts_positive(n: u32, k: u32) -> bool {
    let (n, k) = (n as i64, k as i64);
    n <= 7 || [0, 1, 2, n - 2, n - 1, n].contains(&k) || (n == 8 && k != 4)
}

/// All `(n, k)` with `0 <= k <= n <= n_max`.
pub fn kappa_table(n_max: u32) -> Vec<KappaEntry> {
    let mut out = Vec::new();
    for n in 0..=n_max {
        for k in 0..=n {
            let kappa = (n as i64) * (n as i64) - binomial(n, k);
            out.push(KappaEntry { n, k, kappa, positive: kappa > 0, predicted: trichotomy_predicts_positive(n, k) });
        }
    }
    out
}

/// Entries where the sign of kappa and the trichotomy disagree.
pub fn kappa_findings(table: &[KappaEntry]) -> Vec<KappaEntry> {
    table.iter().filter(|e| !e.agrees()).cloned().collect()
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub h: LinearMap6,
    pub residual: f64,
    pub iterations: usize,
}

pub const FACTOR_BASIN: f64 = 0.05;

/// Finds `h` near the identity with `h^* phi = tau`.
///
/// Each Newton step right-multiplies by `I + X`, with `X` the minimum-norm
/// solution of the linearized equation at the current iterate.
pub fn factorize_near_phi(tau: &KForm<f64>, tol: f64) -> Result<Factorization> {
    if tau.degree() != 3 {
        return Err(Error::Degree(format!("expected a 3-form, got degree {}", tau.degree())));
    }
    let phi: KForm<f64> = special_lagrangian_form();
    let mut h = LinearMap6::<f64>::identity();
    let mut current = phi.clone();
    let mut residual = crate::forms6::max_diff(&current, tau);
    for it in 0..=50 {
        if residual <= tol {
            return Ok(Factorization { h, residual, iterations: it });
        }
        if it == 50 {
            break;
        }
        let d = orbit_differential(&current)?.to_dmatrix();
        let rhs = nalgebra::DVector::from_iterator(basis_len(3), tau.coeffs().iter().zip(current.coeffs()).map(|(a, b)| a - b));
        let svd = d.svd(true, true);
        let x = svd
            .solve(&rhs, 1e-10 * svd.singular_values.max())
            .map_err(|e| Error::Numeric(format!("pseudoinverse failed: {e}")))?;
        let mut step = LinearMap6::<f64>::identity();
        for a in 0..DIM {
            for b in 0..DIM {
                step.m[a][b] += x[DIM * a + b];
            }
        }
        h = h.compose(&step);
        current = phi.pullback(&h);
        let next = crate::forms6::max_diff(&current, tau);
        if !next.is_finite() || next > 1e3 {
            break;
        }
        residual = next;
    }
    Err(Error::Numeric(format!("factorization did not converge; final residual {residual:e}")))
}

/// Is `x` within the documented basin around phi?
pub fn in_basin(tau: &KForm<f64>) -> bool {
    let phi: KForm<f64> = special_lagrangian_form();
    crate::forms6::max_diff(tau, &phi) <= FACTOR_BASIN
}
