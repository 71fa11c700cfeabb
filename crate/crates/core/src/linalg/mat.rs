//! Dense row-major matrix over a generic scalar.
//!
//! One generic container backs the three scalar modes used by the
//! library: exact rationals, doubles, and complex doubles (internal).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Rat, C64, MAX_DIM};

pub trait Scalar:
    Clone
    + PartialEq
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
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM, "matrix dimension above {MAX_DIM}");
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::new(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c));
        Mat::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat::new(self.rows, self.cols, self.data.iter().map(f).collect())
    }

    pub fn scale(&self, s: &T) -> Mat<T> {
        self.map(|v| v.clone() * s.clone())
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i].clone();
        }
    }

    pub fn from_cols(cols: Vec<Vec<T>>) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |v| v.len());
        Mat::from_fn(r, c, |i, j| cols[j][i].clone())
    }

    /// Columns as vectors.
    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out: Mat<T> = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)].clone();
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * rhs[(k, j)].clone();
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)].clone() * v[j].clone())
            })
            .collect()
    }

    pub fn pow(&self, mut e: u32) -> Mat<T> {
        assert!(self.is_square());
        let mut base = self.clone();
        let mut acc = Mat::identity(self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        acc
    }

    pub fn block_diag(blocks: &[Mat<T>]) -> Mat<T> {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let m: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Mat::zeros(n, m);
        let (mut ro, mut co) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out[(ro + i, co + j)] = b[(i, j)].clone();
                }
            }
            ro += b.rows;
            co += b.cols;
        }
        out
    }

    pub fn hstack(blocks: &[Mat<T>]) -> Mat<T> {
        let r = blocks[0].rows;
        assert!(blocks.iter().all(|b| b.rows == r));
        let mut cols = Vec::new();
        for b in blocks {
            cols.extend(b.columns());
        }
        Mat::from_cols(cols)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat<T> {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == T::zero())
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() + rhs[(i, j)].clone())
    }
}

impl<T: Scalar> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() - rhs[(i, j)].clone())
    }
}

impl<T: Scalar + fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub type FMat = Mat<f64>;
pub type QMat = Mat<Rat>;
pub type CMat = Mat<C64>;

/// Scalar mode of a public-facing matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Real,
}

/// Mode-tagged matrix, the public wire type.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Exact(QMat),
    Real(FMat),
}

impl Matrix {
    pub fn mode(&self) -> Mode {
        match self {
            Matrix::Exact(_) => Mode::Exact,
            Matrix::Real(_) => Mode::Real,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Exact(m) => m.rows(),
            Matrix::Real(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Exact(m) => m.cols(),
            Matrix::Real(m) => m.cols(),
        }
    }

    pub fn identity(n: usize, mode: Mode) -> Matrix {
        match mode {
            Mode::Exact => Matrix::Exact(QMat::identity(n)),
            Mode::Real => Matrix::Real(FMat::identity(n)),
        }
    }

    pub fn zeros(rows: usize, cols: usize, mode: Mode) -> Matrix {
        match mode {
            Mode::Exact => Matrix::Exact(QMat::zeros(rows, cols)),
            Mode::Real => Matrix::Real(FMat::zeros(rows, cols)),
        }
    }

    /// Double-precision view, exact entries rounded.
    pub fn to_real(&self) -> FMat {
        match self {
            Matrix::Exact(m) => m.map(crate::linalg::exact::rat_to_f64),
            Matrix::Real(m) => m.clone(),
        }
    }

    pub fn as_exact(&self) -> Result<&QMat> {
        match self {
            Matrix::Exact(m) => Ok(m),
            Matrix::Real(_) => Err(Error::Mode("expected exact-rational matrix".into())),
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        match (self, rhs) {
            (Matrix::Exact(a), Matrix::Exact(b)) => Ok(Matrix::Exact(a.matmul(b))),
            (Matrix::Real(a), Matrix::Real(b)) => Ok(Matrix::Real(a.matmul(b))),
            _ => Err(Error::Mode("cannot multiply matrices of different modes".into())),
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        match (self, rhs) {
            (Matrix::Exact(a), Matrix::Exact(b)) => Ok(Matrix::Exact(a - b)),
            (Matrix::Real(a), Matrix::Real(b)) => Ok(Matrix::Real(a - b)),
            _ => Err(Error::Mode("cannot subtract matrices of different modes".into())),
        }
    }

    /// Frobenius norm; exact matrices are evaluated in doubles.
    pub fn frob(&self) -> f64 {
        crate::linalg::float::frob(&self.to_real())
    }

    pub fn is_identity_exact(&self) -> bool {
        match self {
            Matrix::Exact(m) => m.is_square() && *m == QMat::identity(m.rows()),
            Matrix::Real(_) => false,
        }
    }
}

// --- JSON wire format: {rows, cols, mode, entries}, rationals as "p/q" ---

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    mode: Mode,
    entries: Vec<Vec<EntryJson>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryJson {
    Num(f64),
    Str(String),
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = match self {
            Matrix::Exact(m) => (0..m.rows())
                .map(|i| m.row(i).iter().map(|r| EntryJson::Str(r.to_string())).collect())
                .collect(),
            Matrix::Real(m) => (0..m.rows())
                .map(|i| m.row(i).iter().map(|&v| EntryJson::Num(v)).collect())
                .collect(),
        };
        MatrixJson { rows: self.rows(), cols: self.cols(), mode: self.mode(), entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let j = MatrixJson::deserialize(d)?;
        if j.entries.len() != j.rows || j.entries.iter().any(|r| r.len() != j.cols) {
            return Err(D::Error::custom("matrix entries do not match declared shape"));
        }
        match j.mode {
            Mode::Exact => {
                let mut rows = Vec::with_capacity(j.rows);
                for row in &j.entries {
                    let mut out = Vec::with_capacity(j.cols);
                    for e in row {
                        out.push(match e {
                            EntryJson::Str(s) => crate::linalg::exact::parse_rat(s)
                                .map_err(|e| D::Error::custom(e.to_string()))?,
                            EntryJson::Num(v) => crate::linalg::exact::f64_to_rat(*v)
                                .ok_or_else(|| D::Error::custom("non-finite entry"))?,
                        });
                    }
                    rows.push(out);
                }
                Ok(Matrix::Exact(QMat::from_rows(rows)))
            }
            Mode::Real => {
                let rows = j
                    .entries
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| match e {
                                EntryJson::Num(v) => Ok(*v),
                                EntryJson::Str(s) => s
                                    .parse::<f64>()
                                    .map_err(|_| D::Error::custom("bad real entry")),
                            })
                            .collect::<std::result::Result<Vec<_>, _>>()
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(Matrix::Real(FMat::from_rows(rows)))
            }
        }
    }
}
