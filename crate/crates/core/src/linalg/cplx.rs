//! Complex double routines used internally by the eigenstructure code.

use crate::error::{Error, Result};
use crate::linalg::mat::{CMat, FMat};
use crate::C64;

pub fn to_complex(a: &FMat) -> CMat {
    a.map(|&v| C64::new(v, 0.0))
}

pub fn real_part(a: &CMat) -> FMat {
    a.map(|v| v.re)
}

pub fn imag_part(a: &CMat) -> FMat {
    a.map(|v| v.im)
}

pub fn frob(a: &CMat) -> f64 {
    a.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn orthonormalize(vectors: &[Vec<C64>], tol: f64) -> (Vec<Vec<C64>>, Vec<usize>) {
    let mut basis: Vec<Vec<C64>> = Vec::new();
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
                let c = hdot(b, &w);
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
        let inv = C64::new(1.0 / n, 0.0);
        w.iter_mut().for_each(|x| *x *= inv);
        basis.push(w);
    }
    (basis, dropped)
}

fn echelon(a: &CMat, tol: f64) -> (CMat, usize, Vec<usize>) {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let scale = m.data().iter().fold(0.0f64, |s, v| s.max(v.norm())).max(1.0);
    let mut rank = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        let (p, best) = (rank..rows)
            .map(|i| (i, m[(i, c)].norm()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            continue;
        }
        if p != rank {
            for j in 0..cols {
                let tmp = m[(p, j)];
                m[(p, j)] = m[(rank, j)];
                m[(rank, j)] = tmp;
            }
        }
        let inv = m[(rank, c)].inv();
        for j in 0..cols {
            m[(rank, j)] *= inv;
        }
        for i in 0..rows {
            if i == rank {
                continue;
            }
            let f = m[(i, c)];
            if f.norm() == 0.0 {
                continue;
            }
            for j in 0..cols {
                let v = f * m[(rank, j)];
                m[(i, j)] -= v;
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

/// Kernel basis at relative threshold, orthonormalized.
pub fn kernel(a: &CMat, tol: f64) -> Vec<Vec<C64>> {
    let (r, rank, pivots) = echelon(a, tol);
    let cols = a.cols();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![C64::new(0.0, 0.0); cols];
        v[f] = C64::new(1.0, 0.0);
        for (row, &p) in pivots.iter().enumerate().take(rank) {
            v[p] = -r[(row, f)];
        }
        basis.push(v);
    }
    orthonormalize(&basis, 1e-12).0
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::Dimension("inverse of non-square matrix".into()));
    }
    let n = a.rows();
    let aug = CMat::hstack(&[a.clone(), CMat::identity(n)]);
    let (r, rank, _) = echelon(&aug, 1e-13);
    if rank < n {
        return Err(Error::Singular("complex inverse of (near-)singular matrix".into()));
    }
    Ok(r.submatrix(&(0..n).collect::<Vec<_>>(), &(n..2 * n).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat::Mat;

    #[test]
    fn complex_kernel_of_rotation_shift() {
        // Q(pi/2) - i*id has kernel spanned by (1, i)/sqrt(2)
        let q = Mat::from_rows(vec![
            vec![C64::new(0.0, -1.0), C64::new(1.0, 0.0)],
            vec![C64::new(-1.0, 0.0), C64::new(0.0, -1.0)],
        ]);
        let k = kernel(&q, 1e-10);
        assert_eq!(k.len(), 1);
        let v = &k[0];
        // second component should be i times the first
        let ratio = v[1] / v[0];
        assert!((ratio - C64::new(0.0, 1.0)).norm() < 1e-10);
    }
}
