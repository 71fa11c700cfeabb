//! Simultaneous primary decomposition of a commuting family: iterative
//! refinement by generalized eigenspaces.

use crate::error::{Error, Result};
use crate::linalg::cplx::{self, to_complex};
use crate::linalg::eig::{cluster_eigenvalues, eigenvalues, generalized_eigenspace};
use crate::linalg::float::{self, commutator_norm};
use crate::linalg::mat::{CMat, FMat};
use crate::C64;

/// Intersection of two subspaces given by orthonormal spanning sets.
pub fn intersect(u: &[Vec<C64>], v: &[Vec<C64>]) -> Vec<Vec<C64>> {
    if u.is_empty() || v.is_empty() {
        return Vec::new();
    }
    let n = u[0].len();
    let p = u.len();
    let mut cols: Vec<Vec<C64>> = u.to_vec();
    cols.extend(v.iter().map(|c| c.iter().map(|z| -z).collect()));
    let stacked = CMat::from_cols(cols);
    let ker = cplx::kernel(&stacked, 1e-10);
    let mut out = Vec::new();
    for k in ker {
        let mut w = vec![C64::new(0.0, 0.0); n];
        for (j, uc) in u.iter().enumerate().take(p) {
            for i in 0..n {
                w[i] += k[j] * uc[i];
            }
        }
        out.push(w);
    }
    cplx::orthonormalize(&out, 1e-10).0
}

pub fn check_commuting(family: &[FMat], tol: f64) -> Result<()> {
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let r = commutator_norm(&family[i], &family[j]);
            let scale = float::frob(&family[i]).max(float::frob(&family[j])).max(1.0);
            if r > tol * scale {
                return Err(Error::Precondition(format!(
                    "family members {i} and {j} do not commute (residual {r:.3e})"
                )));
            }
        }
    }
    Ok(())
}

/// Complex simultaneous primary decomposition: invariant subspaces on
/// which every family member has a single eigenvalue.
pub fn spd_refine(family: &[FMat], tol: f64) -> Result<Vec<Vec<Vec<C64>>>> {
    check_commuting(family, tol.max(1e-9))?;
    let n = family.first().map_or(0, |a| a.rows());
    if n == 0 {
        return Ok(Vec::new());
    }
    let eye: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let mut components = vec![eye];
    for a in family {
        let scale = float::frob(a).max(1.0);
        let clusters = cluster_eigenvalues(&eigenvalues(a)?, 1e-7 * scale);
        let ac = to_complex(a);
        // kernel power = multiplicity, the minimal correct exponent
        let spaces: Vec<Vec<Vec<C64>>> = clusters
            .iter()
            .map(|&(lambda, m)| generalized_eigenspace(&ac, lambda, m as u32, 1e-10))
            .collect();
        // a member whose eigenspace dimensions do not add up has nearly
        // colliding clusters; it cannot refine anything reliably
        if spaces.iter().map(Vec::len).sum::<usize>() != n
            || spaces
                .iter()
                .zip(&clusters)
                .any(|(sp, &(_, m))| sp.len() != m)
        {
            continue;
        }
        let mut next = Vec::new();
        for comp in &components {
            for sp in &spaces {
                let inter = intersect(comp, sp);
                if !inter.is_empty() {
                    next.push(inter);
                }
            }
        }
        let total: usize = next.iter().map(|c| c.len()).sum();
        if total != n {
            return Err(Error::Numeric(format!(
                "primary refinement lost dimensions: {total} of {n}"
            )));
        }
        components = next;
    }
    Ok(components)
}

/// Real simultaneous primary decomposition: conjugate complex components
/// merged into real invariant subspaces.
pub fn refine_invariant(family: &[FMat], tol: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    let comps = spd_refine(family, tol)?;
    merge_conjugates(&comps)
}

/// Merges conjugate pairs of complex subspaces into their common real span.
pub fn merge_conjugates(comps: &[Vec<Vec<C64>>]) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut used = vec![false; comps.len()];
    let mut out = Vec::new();
    for i in 0..comps.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let real_span = real_span_basis(&comps[i]);
        if real_span.len() == comps[i].len() {
            // self-conjugate component, already real
            out.push(real_span);
            continue;
        }
        // find the conjugate partner and absorb it
        let conj: Vec<Vec<C64>> =
            comps[i].iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect();
        let mut found = false;
        for j in i + 1..comps.len() {
            if used[j] || comps[j].len() != comps[i].len() {
                continue;
            }
            if intersect(&conj, &comps[j]).len() == comps[j].len() {
                used[j] = true;
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Numeric(
                "complex primary component without conjugate partner".into(),
            ));
        }
        out.push(real_span);
    }
    Ok(out)
}

/// Orthonormal real basis of span_R { Re w, Im w : w in basis }.
pub fn real_span_basis(basis: &[Vec<C64>]) -> Vec<Vec<f64>> {
    let mut vs = Vec::with_capacity(2 * basis.len());
    for w in basis {
        vs.push(w.iter().map(|z| z.re).collect::<Vec<f64>>());
        vs.push(w.iter().map(|z| z.im).collect::<Vec<f64>>());
    }
    float::orthonormalize(&vs, 1e-8).0
}
