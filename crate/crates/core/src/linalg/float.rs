//! Double-precision matrix routines: norms, orthonormalization,
//! rank-revealing elimination, solve/inverse.

use crate::error::{Error, Result};
use crate::linalg::mat::FMat;

pub fn frob(a: &FMat) -> f64 {
    a.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(a: &FMat) -> f64 {
    a.data().iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn operator_norm(a: &FMat) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    let ata = a.transpose().matmul(a);
    let n = ata.rows();
    // deterministic start vector with all components populated
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.5).collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut lambda = 0.0f64;
    for _ in 0..500 {
        let w = ata.matvec(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let nl = dot(&next, &ata.matvec(&next));
        let done = (nl - lambda).abs() <= 1e-12 * nl.max(1.0);
        lambda = nl;
        v = next;
        if done {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
/// Returns the orthonormal basis and indices of dropped (dependent) inputs.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        let scale = norm2(v);
        if scale == 0.0 {
            dropped.push(idx);
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let n = norm2(&w);
        if n <= tol * scale {
            dropped.push(idx);
            continue;
        }
        w.iter_mut().for_each(|x| *x /= n);
        basis.push(w);
    }
    (basis, dropped)
}

/// Row echelon with partial pivoting; returns (echelon, rank, pivot cols).
fn echelon(a: &FMat, tol: f64) -> (FMat, usize, Vec<usize>) {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let scale = max_abs(&m).max(1.0);
    let mut rank = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        let (p, best) = (rank..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            for i in rank..rows {
                m[(i, c)] = 0.0;
            }
            continue;
        }
        if p != rank {
            for j in 0..cols {
                let tmp = m[(p, j)];
                m[(p, j)] = m[(rank, j)];
                m[(rank, j)] = tmp;
            }
        }
        let inv = 1.0 / m[(rank, c)];
        for j in 0..cols {
            m[(rank, j)] *= inv;
        }
        for i in 0..rows {
            if i == rank {
                continue;
            }
            let f = m[(i, c)];
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                m[(i, j)] -= f * m[(rank, j)];
            }
        }
        pivots.push(c);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    (m, rank, pivots)
}

pub fn rank(a: &FMat, tol: f64) -> usize {
    echelon(a, tol).1
}

/// Kernel basis at relative threshold `tol`, orthonormalized.
pub fn kernel(a: &FMat, tol: f64) -> Vec<Vec<f64>> {
    let (r, rank, pivots) = echelon(a, tol);
    let cols = a.cols();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![0.0; cols];
        v[f] = 1.0;
        for (row, &p) in pivots.iter().enumerate().take(rank) {
            v[p] = -r[(row, f)];
        }
        basis.push(v);
    }
    orthonormalize(&basis, 1e-12).0
}

/// Orthonormal basis of the column space at relative threshold `tol`.
pub fn range(a: &FMat, tol: f64) -> Vec<Vec<f64>> {
    let (_, _, pivots) = echelon(a, tol);
    let picked: Vec<Vec<f64>> = pivots.iter().map(|&c| a.col(c)).collect();
    orthonormalize(&picked, tol).0
}

pub fn inverse(a: &FMat) -> Result<FMat> {
    if !a.is_square() {
        return Err(Error::Dimension("inverse of non-square matrix".into()));
    }
    let n = a.rows();
    let aug = FMat::hstack(&[a.clone(), FMat::identity(n)]);
    let (r, rank, _) = echelon(&aug, 1e-13);
    if rank < n {
        return Err(Error::Singular("float inverse of (near-)singular matrix".into()));
    }
    Ok(r.submatrix(&(0..n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>()))
}

pub fn commutator_norm(a: &FMat, b: &FMat) -> f64 {
    frob(&(&a.matmul(b) - &b.matmul(a)))
}

/// ‖(id−P)AP‖ for P the orthogonal projector onto span(basis).
pub fn invariance_residual(a: &FMat, basis: &[Vec<f64>]) -> f64 {
    let p = projector(basis);
    let n = a.rows();
    let ip = &FMat::identity(n) - &p;
    frob(&ip.matmul(&a.matmul(&p)))
}

pub fn projector(basis: &[Vec<f64>]) -> FMat {
    let n = basis.first().map_or(0, |v| v.len());
    let u = FMat::from_cols(basis.to_vec());
    let ut = u.transpose();
    if basis.is_empty() {
        return FMat::zeros(n, n);
    }
    u.matmul(&ut)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opnorm_examples() {
        // operator_norm(diag(3, -5)) = 5
        let a = FMat::from_rows(vec![vec![3.0, 0.0], vec![0.0, -5.0]]);
        assert!((operator_norm(&a) - 5.0).abs() < 1e-10);
        // rotations are isometries
        let q = FMat::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!((operator_norm(&q) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn orthonormalize_examples() {
        let (b, dropped) = orthonormalize(&[vec![1.0, 0.0], vec![1.0, 1.0]], 1e-10);
        assert!(dropped.is_empty());
        assert!((b[0][0] - 1.0).abs() < 1e-12 && b[0][1].abs() < 1e-12);
        assert!(b[1][0].abs() < 1e-12 && (b[1][1] - 1.0).abs() < 1e-12);
        // dependent set reports the dropped vector
        let (_, dropped) = orthonormalize(&[vec![1.0, 0.0], vec![2.0, 0.0]], 1e-10);
        assert_eq!(dropped, vec![1]);
    }

    #[test]
    fn kernel_and_range() {
        let a = FMat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let k = kernel(&a, 1e-10);
        assert_eq!(k.len(), 1);
        assert!(k[0][0].abs() < 1e-12);
        let r = range(&a, 1e-10);
        assert_eq!(r.len(), 1);
        assert!(r[0][1].abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let a = FMat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 1.0]]);
        let inv = inverse(&a).unwrap();
        let err = frob(&(&a.matmul(&inv) - &FMat::identity(2)));
        assert!(err < 1e-12);
    }
}
