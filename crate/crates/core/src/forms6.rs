//! Exterior algebra on R^6 with coordinates ordered (x1, x2, x3, y1, y2, y3).
//!
//! Forms and multivectors are stored densely over the strictly increasing
//! multi-indices of each degree, in lexicographic order. Coefficients are
//! generic over [`Scalar`], so the same code runs with `f64` and with exact
//! rationals or integers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::Matrix6;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub const DIM: usize = 6;

/// Axis labels in storage order.
pub const AXIS_NAMES: [&str; DIM] = ["x1", "x2", "x3", "y1", "y2", "y3"];

/// Ring operations needed by the exterior algebra.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Scalar for T where
    T: Clone
        + PartialEq
        + fmt::Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

struct Tables {
    by_degree: Vec<Vec<u8>>,
    position: [usize; 64],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut by_degree = vec![Vec::new(); DIM + 1];
        for k in 0..=DIM {
            let mut masks: Vec<u8> = (0u8..64).filter(|m| m.count_ones() as usize == k).collect();
            masks.sort_by_key(|m| mask_to_indices(*m));
            by_degree[k] = masks;
        }
        let mut position = [0usize; 64];
        for masks in &by_degree {
            for (i, m) in masks.iter().enumerate() {
                position[*m as usize] = i;
            }
        }
        Tables { by_degree, position }
    })
}

fn mask_to_indices(m: u8) -> Vec<usize> {
    (0..DIM).filter(|i| m & (1 << i) != 0).collect()
}

/// Number of basis elements of degree `k`.
pub fn basis_len(k: usize) -> usize {
    tables().by_degree[k].len()
}

/// Bitmask basis of degree `k` in storage order.
pub fn basis_masks(k: usize) -> &'static [u8] {
    &tables().by_degree[k]
}

fn position(mask: u8) -> usize {
    tables().position[mask as usize]
}

/// Strictly increasing list of axis labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: &[usize]) -> Result<Self> {
        if indices.len() > DIM {
            return Err(Error::Degree(format!("multi-index of length {}", indices.len())));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Degree(format!("multi-index {indices:?} is not strictly increasing")));
            }
        }
        if indices.iter().any(|&i| i >= DIM) {
            return Err(Error::Degree(format!("axis out of range in {indices:?}")));
        }
        Ok(MultiIndex(indices.to_vec()))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    fn mask(&self) -> u8 {
        self.0.iter().fold(0u8, |m, &i| m | (1 << i))
    }

    fn from_mask(m: u8) -> Self {
        MultiIndex(mask_to_indices(m))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|&i| AXIS_NAMES[i]).collect();
        write!(f, "{}", names.join("^"))
    }
}

/// Sort an index list, returning the sign of the sorting permutation and the
/// mask, or `None` when an index repeats.
fn normalize(indices: &[usize]) -> Option<(bool, u8)> {
    let mut v = indices.to_vec();
    let mut negative = false;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                negative = !negative;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((negative, v.iter().fold(0u8, |m, &i| m | (1 << i))))
}

/// Sign of `e_A ^ e_B = sign * e_{A u B}` for disjoint masks.
fn merge_negative(a: u8, b: u8) -> bool {
    let mut inversions = 0u32;
    for i in 0..DIM {
        if a & (1 << i) != 0 {
            inversions += (b & ((1u8 << i) - 1)).count_ones();
        }
    }
    inversions % 2 == 1
}

macro_rules! graded_storage {
    ($name:ident, $what:literal) => {
        #[doc = concat!("Dense ", $what, " on R^6.")]
        #[derive(Clone, PartialEq)]
        pub struct $name<T = f64> {
            degree: usize,
            coeffs: Vec<T>,
        }

        impl<T: Scalar> $name<T> {
            pub fn zero(degree: usize) -> Result<Self> {
                if degree > DIM {
                    return Err(Error::Degree(format!("degree {degree} exceeds {DIM}")));
                }
                Ok(Self { degree, coeffs: vec![T::zero(); basis_len(degree)] })
            }

            pub fn from_coeffs(degree: usize, coeffs: Vec<T>) -> Result<Self> {
                if degree > DIM || coeffs.len() != basis_len(degree) {
                    return Err(Error::Degree(format!(
                        "degree {degree} needs {} coefficients, got {}",
                        if degree > DIM { 0 } else { basis_len(degree) },
                        coeffs.len()
                    )));
                }
                Ok(Self { degree, coeffs })
            }

            /// Single basis element for an arbitrary ordering of distinct axes.
            pub fn basis(indices: &[usize]) -> Result<Self> {
                let mut out = Self::zero(indices.len())?;
                out.add_term(indices, T::one())?;
                Ok(out)
            }

            pub fn degree(&self) -> usize {
                self.degree
            }

            pub fn coeffs(&self) -> &[T] {
                &self.coeffs
            }

            pub fn into_coeffs(self) -> Vec<T> {
                self.coeffs
            }

            pub fn coeff(&self, index: &MultiIndex) -> T {
                self.coeffs[position(index.mask())].clone()
            }

            /// Value on the (possibly unsorted) index tuple; zero on repeats.
            pub fn get(&self, indices: &[usize]) -> T {
                if indices.len() != self.degree {
                    return T::zero();
                }
                match normalize(indices) {
                    None => T::zero(),
                    Some((neg, m)) => {
                        let c = self.coeffs[position(m)].clone();
                        if neg {
                            -c
                        } else {
                            c
                        }
                    }
                }
            }

            /// Add `c * e_{indices}` with the permutation sign folded in.
            pub fn add_term(&mut self, indices: &[usize], c: T) -> Result<()> {
                if indices.len() != self.degree {
                    return Err(Error::Degree(format!(
                        "term of degree {} added to degree {}",
                        indices.len(),
                        self.degree
                    )));
                }
                if indices.iter().any(|&i| i >= DIM) {
                    return Err(Error::Degree(format!("axis out of range in {indices:?}")));
                }
                if let Some((neg, m)) = normalize(indices) {
                    let p = position(m);
                    let v = if neg { -c } else { c };
                    self.coeffs[p] = self.coeffs[p].clone() + v;
                }
                Ok(())
            }

            pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, &T)> + '_ {
                basis_masks(self.degree)
                    .iter()
                    .zip(self.coeffs.iter())
                    .map(|(m, c)| (MultiIndex::from_mask(*m), c))
            }

            pub fn is_zero(&self) -> bool {
                self.coeffs.iter().all(|c| c.is_zero())
            }

            pub fn scale(&self, s: T) -> Self {
                Self {
                    degree: self.degree,
                    coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
                }
            }

            pub fn try_add(&self, other: &Self) -> Result<Self> {
                self.check_same(other)?;
                Ok(Self {
                    degree: self.degree,
                    coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect(),
                })
            }

            pub fn try_sub(&self, other: &Self) -> Result<Self> {
                self.check_same(other)?;
                Ok(Self {
                    degree: self.degree,
                    coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() - b.clone()).collect(),
                })
            }

            /// Exterior product. Errors when the degrees add past 6.
            pub fn wedge(&self, other: &Self) -> Result<Self> {
                let k = self.degree + other.degree;
                let mut out = Self::zero(k)?;
                for (ma, ca) in basis_masks(self.degree).iter().zip(&self.coeffs) {
                    if ca.is_zero() {
                        continue;
                    }
                    for (mb, cb) in basis_masks(other.degree).iter().zip(&other.coeffs) {
                        if ma & mb != 0 || cb.is_zero() {
                            continue;
                        }
                        let p = position(ma | mb);
                        let v = ca.clone() * cb.clone();
                        out.coeffs[p] = if merge_negative(*ma, *mb) {
                            out.coeffs[p].clone() - v
                        } else {
                            out.coeffs[p].clone() + v
                        };
                    }
                }
                Ok(out)
            }

            fn check_same(&self, other: &Self) -> Result<()> {
                if self.degree != other.degree {
                    return Err(Error::Degree(format!("degree {} vs {}", self.degree, other.degree)));
                }
                Ok(())
            }
        }

        impl<T: Scalar> fmt::Debug for $name<T> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(deg {}; ", stringify!($name), self.degree)?;
                let mut first = true;
                for (idx, c) in self.terms() {
                    if c.is_zero() {
                        continue;
                    }
                    if !first {
                        write!(f, ", ")?;
                    }
                    first = false;
                    write!(f, "{c:?} {idx}")?;
                }
                write!(f, ")")
            }
        }
    };
}

graded_storage!(KForm, "alternating k-form");
graded_storage!(KVector, "k-vector");

impl<T: Scalar> KForm<T> {
    /// Coordinate 1-form dx_i (i in 0..6).
    pub fn coordinate(i: usize) -> Result<Self> {
        Self::basis(&[i])
    }

    /// Contraction with `v` in the first slot.
    pub fn interior(&self, v: &[T; DIM]) -> Result<Self> {
        if self.degree == 0 {
            return Err(Error::Degree("interior product of a 0-form".into()));
        }
        let mut out = Self::zero(self.degree - 1)?;
        for (slot, mask) in basis_masks(self.degree - 1).iter().enumerate() {
            let mut acc = T::zero();
            for j in 0..DIM {
                if mask & (1 << j) != 0 || v[j].is_zero() {
                    continue;
                }
                let below = (mask & ((1u8 << j) - 1)).count_ones();
                let c = self.coeffs[position(mask | (1 << j))].clone() * v[j].clone();
                acc = if below % 2 == 1 { acc - c } else { acc + c };
            }
            out.coeffs[slot] = acc;
        }
        Ok(out)
    }

    /// `(h^* a)(v_1, ..., v_k) = a(h v_1, ..., h v_k)`.
    pub fn pullback(&self, h: &LinearMap6<T>) -> Self {
        let k = self.degree;
        let masks = basis_masks(k);
        let mut coeffs = vec![T::zero(); masks.len()];
        for (slot, mi) in masks.iter().enumerate() {
            let cols = mask_to_indices(*mi);
            let mut acc = T::zero();
            for (mj, cj) in masks.iter().zip(&self.coeffs) {
                if cj.is_zero() {
                    continue;
                }
                let rows = mask_to_indices(*mj);
                acc = acc + cj.clone() * minor(&h.m, &rows, &cols);
            }
            coeffs[slot] = acc;
        }
        Self { degree: k, coeffs }
    }

    /// Canonical pairing with a k-vector.
    pub fn evaluate(&self, v: &KVector<T>) -> Result<T> {
        if self.degree != v.degree {
            return Err(Error::Degree(format!("form of degree {} on a {}-vector", self.degree, v.degree)));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&v.coeffs)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
    }

    /// Value on a tuple of vectors.
    pub fn eval_vectors(&self, vs: &[[T; DIM]]) -> Result<T> {
        let v = KVector::simple(vs)?;
        self.evaluate(&v)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> KForm<U> {
        KForm { degree: self.degree, coeffs: self.coeffs.iter().map(f).collect() }
    }
}

impl<T: Scalar> KVector<T> {
    /// `v_1 ^ ... ^ v_k`, whose coefficients are the k x k minors.
    pub fn simple(vs: &[[T; DIM]]) -> Result<Self> {
        let k = vs.len();
        let mut out = Self::zero(k)?;
        let rows: Vec<usize> = (0..k).collect();
        let mut m: [[T; DIM]; DIM] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));
        // m[axis][slot] = component of v_slot along axis
        for (slot, v) in vs.iter().enumerate() {
            for axis in 0..DIM {
                m[axis][slot] = v[axis].clone();
            }
        }
        for (p, mask) in basis_masks(k).iter().enumerate() {
            out.coeffs[p] = minor(&m, &mask_to_indices(*mask), &rows);
        }
        Ok(out)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> KVector<U> {
        KVector { degree: self.degree, coeffs: self.coeffs.iter().map(f).collect() }
    }
}

fn minor<T: Scalar>(m: &[[T; DIM]; DIM], rows: &[usize], cols: &[usize]) -> T {
    let k = rows.len();
    match k {
        0 => T::one(),
        1 => m[rows[0]][cols[0]].clone(),
        2 => {
            m[rows[0]][cols[0]].clone() * m[rows[1]][cols[1]].clone()
                - m[rows[0]][cols[1]].clone() * m[rows[1]][cols[0]].clone()
        }
        _ => {
            // Laplace expansion along the first row.
            let mut acc = T::zero();
            let sub_rows = &rows[1..];
            for (j, &c) in cols.iter().enumerate() {
                let e = m[rows[0]][c].clone();
                if e.is_zero() {
                    continue;
                }
                let sub_cols: Vec<usize> = cols.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, &x)| x).collect();
                let term = e * minor(m, sub_rows, &sub_cols);
                acc = if j % 2 == 1 { acc - term } else { acc + term };
            }
            acc
        }
    }
}

/// A 6 x 6 matrix acting on column vectors of R^6.
#[derive(Clone, PartialEq, Debug)]
pub struct LinearMap6<T = f64> {
    pub m: [[T; DIM]; DIM],
}

impl<T: Scalar> LinearMap6<T> {
    pub fn identity() -> Self {
        Self { m: std::array::from_fn(|i| std::array::from_fn(|j| if i == j { T::one() } else { T::zero() })) }
    }

    pub fn zero() -> Self {
        Self { m: std::array::from_fn(|_| std::array::from_fn(|_| T::zero())) }
    }

    /// Elementary matrix with a single 1 at (row, col).
    pub fn elementary(row: usize, col: usize) -> Self {
        let mut out = Self::zero();
        out.m[row][col] = T::one();
        out
    }

    /// The complex structure: `J d/dx_j = d/dy_j`, `J d/dy_j = -d/dx_j`.
    pub fn complex_structure() -> Self {
        let mut out = Self::zero();
        for j in 0..3 {
            out.m[j + 3][j] = T::one();
            out.m[j][j + 3] = -T::one();
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    (0..DIM).fold(T::zero(), |acc, k| acc + self.m[i][k].clone() * other.m[k][j].clone())
                })
            }),
        }
    }

    pub fn apply(&self, v: &[T; DIM]) -> [T; DIM] {
        std::array::from_fn(|i| (0..DIM).fold(T::zero(), |acc, k| acc + self.m[i][k].clone() * v[k].clone()))
    }
}

impl LinearMap6<f64> {
    pub fn from_matrix(m: &Matrix6<f64>) -> Self {
        Self { m: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])) }
    }

    pub fn to_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.m[i][j])
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self::from_matrix(&(Matrix6::identity() * s))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.to_matrix()
            .try_inverse()
            .map(|m| Self::from_matrix(&m))
            .ok_or_else(|| Error::Numeric("singular linear map".into()))
    }
}

/// `Re dz1 ^ dz2 ^ dz3` (`imaginary = false`) or its imaginary part, expanded
/// factor by factor with `dz_j = dx_j + i dy_j`.
fn dz123_part<T: Scalar>(imaginary: bool) -> KForm<T> {
    let mut out = KForm::zero(3).expect("degree 3");
    for choice in 0u8..8 {
        let ys = choice.count_ones();
        if (ys % 2 == 1) != imaginary {
            continue;
        }
        // i^ys: real part sign for even ys is (-1)^(ys/2), imaginary part for odd is (-1)^((ys-1)/2)
        let negative = (ys / 2) % 2 == 1;
        let idx: Vec<usize> = (0..3).map(|j| if choice & (1 << j) != 0 { j + 3 } else { j }).collect();
        let c = if negative { -T::one() } else { T::one() };
        out.add_term(&idx, c).expect("degree 3");
    }
    out
}

/// The special Lagrangian form `Re dz1 ^ dz2 ^ dz3`.
pub fn special_lagrangian_form<T: Scalar>() -> KForm<T> {
    dz123_part(false)
}

/// `Im dz1 ^ dz2 ^ dz3`, which equals `J^* phi`.
pub fn special_lagrangian_imag<T: Scalar>() -> KForm<T> {
    dz123_part(true)
}

/// Pullback by the complex structure.
pub fn complex_structure_pullback<T: Scalar>(a: &KForm<T>) -> KForm<T> {
    a.pullback(&LinearMap6::complex_structure())
}

/// Max absolute coefficient.
pub fn max_norm(a: &KForm<f64>) -> f64 {
    a.coeffs().iter().fold(0.0, |m, c| m.max(c.abs()))
}

/// Max absolute coefficient of `a - b`.
pub fn max_diff(a: &KForm<f64>, b: &KForm<f64>) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Unit coordinate vector as an array.
pub fn unit(i: usize) -> [f64; DIM] {
    let mut v = [0.0; DIM];
    v[i] = 1.0;
    v
}
