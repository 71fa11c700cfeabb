//! Matrix exponential: scaling-and-squaring with a diagonal Padé
//! approximant in float mode, finite Taylor sum for exact nilpotents.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::linalg::float::frob;
use crate::linalg::mat::{FMat, Matrix, QMat};
use crate::Rat;

// [6/6] Padé coefficients of exp
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

pub fn mat_exp_f64(m: &FMat) -> Result<FMat> {
    if !m.is_square() {
        return Err(Error::Dimension("exp of non-square matrix".into()));
    }
    let norm = frob(m);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = m.scale(&(0.5f64.powi(s as i32)));
    let mut powers = vec![FMat::identity(m.rows())];
    for k in 1..=6 {
        powers.push(powers[k - 1].matmul(&a));
    }
    let mut p = FMat::zeros(m.rows(), m.rows());
    let mut q = FMat::zeros(m.rows(), m.rows());
    for (k, pw) in powers.iter().enumerate() {
        p = &p + &pw.scale(&PADE6[k]);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        q = &q + &pw.scale(&(sign * PADE6[k]));
    }
    let mut e = crate::linalg::float::inverse(&q)?.matmul(&p);
    for _ in 0..s {
        e = e.matmul(&e);
    }
    Ok(e)
}

pub fn nilpotency_index(m: &QMat) -> Option<u32> {
    let d = m.rows() as u32;
    let mut p = m.clone();
    for k in 1..=d {
        if p.is_zero() {
            return Some(k);
        }
        p = p.matmul(m);
    }
    None
}

/// Exact `exp(M)` for nilpotent rational `M` (finite Taylor sum).
pub fn mat_exp_nilpotent(m: &QMat) -> Result<QMat> {
    if !m.is_square() {
        return Err(Error::Dimension("exp of non-square matrix".into()));
    }
    let Some(idx) = nilpotency_index(m) else {
        return Err(Error::Domain("exact exp requires a nilpotent matrix".into()));
    };
    let n = m.rows();
    let mut sum = QMat::identity(n);
    let mut term = QMat::identity(n);
    let mut fact = Rat::from(BigInt::from(1));
    for k in 1..idx {
        term = term.matmul(m);
        fact *= Rat::from(BigInt::from(k as i64));
        sum = &sum + &term.scale(&fact.recip());
    }
    Ok(sum)
}

/// Mode-dispatching exponential. Exact mode is defined for nilpotent
/// inputs only, where the Taylor series truncates.
pub fn mat_exp(m: &Matrix) -> Result<Matrix> {
    match m {
        Matrix::Real(a) => Ok(Matrix::Real(mat_exp_f64(a)?)),
        Matrix::Exact(a) => Ok(Matrix::Exact(mat_exp_nilpotent(a)?)),
    }
}

/// Plain rotation generator exponential helper: exp(theta * L) = Q(theta)
/// with L = [[0,1],[-1,0]].
pub fn rotation(theta: f64) -> FMat {
    FMat::from_rows(vec![vec![theta.cos(), theta.sin()], vec![-theta.sin(), theta.cos()]])
}

/// Block-diagonal realization of `Q_k^nu(x)` for a concrete angle.
pub fn rotation_block(dim: usize, theta: f64) -> FMat {
    assert!(dim % 2 == 0);
    let q = rotation(theta);
    FMat::block_diag(&vec![q; dim / 2])
}

impl QMat {
    /// True when every entry of `self - id` powers to zero within dim steps.
    pub fn is_unipotent(&self) -> bool {
        self.is_square() && nilpotency_index(&(self - &QMat::identity(self.rows()))).is_some()
    }
}

pub fn is_nilpotent_f64(m: &FMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.rows() as u32;
    let scale = frob(m).max(1.0);
    frob(&m.pow(d)) <= tol * scale.powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::exact::rat_i;

    #[test]
    fn exp_zero_is_identity() {
        let e = mat_exp_f64(&FMat::zeros(3, 3)).unwrap();
        assert!(frob(&(&e - &FMat::identity(3))) < 1e-14);
    }

    #[test]
    fn exp_nilpotent_truncates() {
        // M = [[0,1],[0,0]] -> [[1,1],[0,1]]
        let m = QMat::from_rows(vec![vec![rat_i(0), rat_i(1)], vec![rat_i(0), rat_i(0)]]);
        let e = mat_exp_nilpotent(&m).unwrap();
        assert_eq!(e, QMat::from_rows(vec![vec![rat_i(1), rat_i(1)], vec![rat_i(0), rat_i(1)]]));
    }

    #[test]
    fn exp_rotation_generator() {
        // theta*L with theta = pi/2 -> Q(pi/2) = [[0,1],[-1,0]]
        let theta = std::f64::consts::FRAC_PI_2;
        let m = FMat::from_rows(vec![vec![0.0, theta], vec![-theta, 0.0]]);
        let e = mat_exp_f64(&m).unwrap();
        let expect = rotation(theta);
        assert!(frob(&(&e - &expect)) < 1e-12);
    }

    #[test]
    fn exp_additive_on_commuting_pair() {
        let a = FMat::from_rows(vec![vec![0.3, 0.1], vec![0.1, -0.2]]);
        let b = a.scale(&2.0);
        let lhs = mat_exp_f64(&(&a + &b)).unwrap();
        let rhs = mat_exp_f64(&a).unwrap().matmul(&mat_exp_f64(&b).unwrap());
        assert!(frob(&(&lhs - &rhs)) < 1e-9);
    }

    #[test]
    fn exp_scaling_squaring_large_norm() {
        let m = FMat::from_rows(vec![vec![3.0, 0.0], vec![0.0, -4.0]]);
        let e = mat_exp_f64(&m).unwrap();
        assert!((e[(0, 0)] - 3.0f64.exp()).abs() < 1e-10 * 3.0f64.exp());
        assert!((e[(1, 1)] - (-4.0f64).exp()).abs() < 1e-12);
    }
}
