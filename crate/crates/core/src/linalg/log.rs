//! Unipotent logarithm via the finite Mercator series.
//!
//! `log(id + X) = sum_{k=1}^{d-1} (-1)^{k+1} X^k / k` with `X = T - id`
//! nilpotent, so the series is a finite sum and `exp(log T) = T` exactly
//! in rational mode.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::linalg::exp::{is_nilpotent_f64, mat_exp_f64, nilpotency_index};
use crate::linalg::float::frob;
use crate::linalg::mat::{FMat, Matrix, QMat};
use crate::Rat;

pub fn unipotent_log_exact(t: &QMat) -> Result<QMat> {
    if !t.is_square() {
        return Err(Error::Dimension("log of non-square matrix".into()));
    }
    let n = t.rows();
    let x = t - &QMat::identity(n);
    let Some(idx) = nilpotency_index(&x) else {
        return Err(Error::Domain("unipotent_log requires (T - id) nilpotent".into()));
    };
    let mut sum = QMat::zeros(n, n);
    let mut pw = QMat::identity(n);
    for k in 1..idx {
        pw = pw.matmul(&x);
        let sign = if k % 2 == 1 { 1 } else { -1 };
        sum = &sum + &pw.scale(&Rat::new(BigInt::from(sign), BigInt::from(k as i64)));
    }
    Ok(sum)
}

pub fn unipotent_log_f64(t: &FMat, tol: f64) -> Result<FMat> {
    if !t.is_square() {
        return Err(Error::Dimension("log of non-square matrix".into()));
    }
    let n = t.rows();
    let x = t - &FMat::identity(n);
    if !is_nilpotent_f64(&x, tol) {
        return Err(Error::Domain("unipotent_log requires (T - id) nilpotent".into()));
    }
    let mut sum = FMat::zeros(n, n);
    let mut pw = FMat::identity(n);
    for k in 1..n.max(1) {
        pw = pw.matmul(&x);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum = &sum + &pw.scale(&(sign / k as f64));
    }
    // round trip guard
    let rt = mat_exp_f64(&sum)?;
    if frob(&(&rt - t)) > 1e-8 * frob(t).max(1.0) {
        return Err(Error::Numeric("unipotent_log round trip failed".into()));
    }
    Ok(sum)
}

pub fn unipotent_log(t: &Matrix) -> Result<Matrix> {
    match t {
        Matrix::Exact(m) => Ok(Matrix::Exact(unipotent_log_exact(m)?)),
        Matrix::Real(m) => Ok(Matrix::Real(unipotent_log_f64(m, 1e-9)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::exact::{rat, rat_i};
    use crate::linalg::exp::mat_exp_nilpotent;

    #[test]
    fn log_identity_is_zero() {
        let n = unipotent_log_exact(&QMat::identity(3)).unwrap();
        assert!(n.is_zero());
    }

    #[test]
    fn log_of_shear() {
        let t = QMat::from_rows(vec![vec![rat_i(1), rat_i(2)], vec![rat_i(0), rat_i(1)]]);
        let n = unipotent_log_exact(&t).unwrap();
        assert_eq!(n, QMat::from_rows(vec![vec![rat_i(0), rat_i(2)], vec![rat_i(0), rat_i(0)]]));
        assert_eq!(mat_exp_nilpotent(&n).unwrap(), t);
    }

    #[test]
    fn log_exp_round_trip_3x3() {
        let t = QMat::from_rows(vec![
            vec![rat_i(1), rat_i(1), rat_i(1)],
            vec![rat_i(0), rat_i(1), rat_i(1)],
            vec![rat_i(0), rat_i(0), rat_i(1)],
        ]);
        let n = unipotent_log_exact(&t).unwrap();
        assert_eq!(mat_exp_nilpotent(&n).unwrap(), t);
        // sanity on one entry: n01 = 1, n02 = 1/2
        assert_eq!(n[(0, 1)], rat_i(1));
        assert_eq!(n[(0, 2)], rat(1, 2));
    }

    #[test]
    fn rejects_non_unipotent() {
        let t = QMat::from_rows(vec![vec![rat_i(2), rat_i(0)], vec![rat_i(0), rat_i(1)]]);
        assert!(unipotent_log_exact(&t).is_err());
    }
}
