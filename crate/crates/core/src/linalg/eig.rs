//! Eigenvalue clustering and generalized eigenspaces for small dense
//! real matrices.
//!
//! Eigenvalues are computed through the standard dense path (Hessenberg
//! reduction followed by shifted QR, as provided by nalgebra's real
//! Schur); clustering and the rank-revealing kernels on top are local.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::cplx::{self, to_complex};
use crate::linalg::mat::{CMat, FMat};
use crate::C64;

/// One eigenvalue cluster of a matrix, with the spanning basis of the
/// associated generalized eigenspace.
#[derive(Clone, Debug)]
pub struct EigenCluster {
    pub center: C64,
    pub multiplicity: usize,
    pub basis: Vec<Vec<C64>>,
    pub residual: f64,
}

pub fn eigenvalues(a: &FMat) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues of non-square matrix".into()));
    }
    if a.rows() == 0 {
        return Ok(Vec::new());
    }
    let m = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)]);
    let eig = m.complex_eigenvalues();
    Ok(eig.iter().map(|z| C64::new(z.re, z.im)).collect())
}

/// Groups eigenvalues into clusters of pairwise distance <= tol
/// (transitive closure), with conjugate symmetrization for real input.
pub fn cluster_eigenvalues(eigs: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let n = eigs.len();
    let mut assigned = vec![usize::MAX; n];
    let mut nclust = 0;
    for i in 0..n {
        if assigned[i] != usize::MAX {
            continue;
        }
        // flood fill over the tol-proximity graph
        let mut stack = vec![i];
        assigned[i] = nclust;
        while let Some(k) = stack.pop() {
            for j in 0..n {
                if assigned[j] == usize::MAX && (eigs[k] - eigs[j]).norm() <= tol {
                    assigned[j] = nclust;
                    stack.push(j);
                }
            }
        }
        nclust += 1;
    }
    let mut clusters = Vec::with_capacity(nclust);
    for c in 0..nclust {
        let members: Vec<C64> = (0..n).filter(|&i| assigned[i] == c).map(|i| eigs[i]).collect();
        let mut center = members.iter().sum::<C64>() / members.len() as f64;
        if center.im.abs() <= tol {
            center.im = 0.0;
        }
        clusters.push((center, members.len()));
    }
    // pair conjugate clusters exactly
    for i in 0..clusters.len() {
        if clusters[i].0.im > 0.0 {
            let conj = clusters[i].0.conj();
            for j in 0..clusters.len() {
                if i != j && (clusters[j].0 - conj).norm() <= 2.0 * tol {
                    clusters[j].0 = clusters[i].0.conj();
                }
            }
        }
    }
    clusters.sort_by(|a, b| {
        (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap_or(std::cmp::Ordering::Equal)
    });
    clusters
}

/// Orthonormal basis of ker((A - lambda id)^power).
pub fn generalized_eigenspace(a: &CMat, lambda: C64, power: u32, tol: f64) -> Vec<Vec<C64>> {
    let n = a.rows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    // normalize before powering so the rank threshold stays meaningful
    let scale = cplx::frob(&shifted);
    if scale > 0.0 {
        shifted = shifted.scale(&C64::new(1.0 / scale, 0.0));
    }
    cplx::kernel(&shifted.pow(power), tol)
}

/// All eigenvalues of `a` grouped into clusters, each with its
/// generalized eigenspace.
pub fn eigenclusters(a: &FMat, tol: f64) -> Result<Vec<EigenCluster>> {
    let d = a.rows();
    let eigs = eigenvalues(a)?;
    let scale = crate::linalg::float::frob(a).max(1.0);
    let clusters = cluster_eigenvalues(&eigs, tol * scale);
    let ac = to_complex(a);
    let mut out = Vec::with_capacity(clusters.len());
    let mut total = 0;
    for (center, mult) in clusters {
        let basis = generalized_eigenspace(&ac, center, mult as u32, 1e-10);
        if basis.len() != mult {
            return Err(Error::Numeric(format!(
                "generalized eigenspace of {center} has dimension {} but multiplicity {mult}",
                basis.len()
            )));
        }
        let residual = eigenspace_residual(&ac, center, mult as u32, &basis);
        total += mult;
        out.push(EigenCluster { center, multiplicity: mult, basis, residual });
    }
    if total != d {
        return Err(Error::Numeric(format!("cluster multiplicities sum to {total}, expected {d}")));
    }
    Ok(out)
}

fn eigenspace_residual(a: &CMat, lambda: C64, power: u32, basis: &[Vec<C64>]) -> f64 {
    let n = a.rows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let scale = cplx::frob(&shifted).max(1.0);
    let p = shifted.scale(&C64::new(1.0 / scale, 0.0)).pow(power);
    basis
        .iter()
        .map(|v| cplx::norm2(&p.matvec(v)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_clusters() {
        let a = FMat::from_rows(vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ]);
        let cl = eigenclusters(&a, 1e-8).unwrap();
        assert_eq!(cl.len(), 2);
        let mults: Vec<usize> = cl.iter().map(|c| c.multiplicity).collect();
        assert_eq!(mults.iter().sum::<usize>(), 3);
        assert!(cl.iter().any(|c| (c.center.re - 2.0).abs() < 1e-9 && c.multiplicity == 2));
        assert!(cl.iter().any(|c| (c.center.re - 5.0).abs() < 1e-9 && c.multiplicity == 1));
    }

    #[test]
    fn rotation_conjugate_pair() {
        // Q(pi/2) has eigenvalues +-i
        let a = FMat::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let cl = eigenclusters(&a, 1e-8).unwrap();
        assert_eq!(cl.len(), 2);
        let mut ims: Vec<f64> = cl.iter().map(|c| c.center.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + 1.0).abs() < 1e-9 && (ims[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn defective_eigenvalue_full_space() {
        let a = FMat::from_rows(vec![vec![2.0, 1.0], vec![0.0, 2.0]]);
        let cl = eigenclusters(&a, 1e-8).unwrap();
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].multiplicity, 2);
        assert_eq!(cl[0].basis.len(), 2);
        assert!(cl[0].residual < 1e-9);
    }
}
