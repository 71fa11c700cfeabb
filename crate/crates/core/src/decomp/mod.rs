//! Decomposition engine: recovers the structure of a sampled matrix
//! semigroup. The ladder runs kernel split, simultaneous primary
//! decomposition, Jordan-Chevalley factorization, generator extraction,
//! rotation-class partitioning, and finally the factorization
//! g(x) = S(x) exp(Mx) with a rotation normal form for S.

pub mod jc;
pub mod partition;
pub mod structure;

use crate::cauchy::ModuleElement;
use crate::error::{Error, Result};
use crate::linalg::eig::eigenvalues;
use crate::linalg::float::{
    self, dot, frob, kernel, norm2, projector, range,
};
use crate::linalg::invariant::{refine_invariant, spd_refine};
use crate::linalg::mat::FMat;
use crate::semigroup::SampleSet;
use crate::C64;

pub use jc::{generators, jc_multiplicative, semigroup_jc, ComponentGenerators, JCResult};
pub use partition::{partitioned_srpd, PartitionBlock, Partition};
pub use structure::{
    classify, rotation_normal_form, structure, BlockReport, Classification, Report, Stage,
    StructureResult, Tolerances,
};

/// First type: one nonnegative real eigenvalue track. Second type: a
/// conjugate complex pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentType {
    First,
    Second,
}

/// One component of the simultaneous real primary decomposition.
#[derive(Clone, Debug)]
pub struct PrimaryComponent {
    /// Orthonormal basis, in the coordinates of the sample set.
    pub basis: Vec<Vec<f64>>,
    pub ctype: ComponentType,
    /// Per sample point, the eigenvalue with the conjugate pair
    /// collapsed to the upper half-plane representative.
    pub track: Vec<C64>,
}

impl PrimaryComponent {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Restriction of a sample to the component, in basis coordinates.
    pub fn restrict(&self, g: &FMat) -> FMat {
        let u = FMat::from_cols(self.basis.clone());
        u.transpose().matmul(g).matmul(&u)
    }
}

/// Result of splitting off the common kernel of the positive samples.
#[derive(Clone, Debug)]
pub struct KernelSplit {
    /// Orthonormal basis of ker g(x), x > 0.
    pub zero_basis: Vec<Vec<f64>>,
    /// Orthonormal basis of the invariant complement (the common range).
    pub inv_basis: Vec<Vec<f64>>,
    /// Samples restricted to the invertible part.
    pub invertible: SampleSet,
    /// Largest inner product between the two bases; 0 for an orthogonal
    /// split.
    pub gram_offdiag: f64,
}

const KERNEL_TOL: f64 = 1e-8;

/// Splits V into the common kernel of the positive samples and its
/// complement, verifying that the kernel is the same subspace at every
/// sampled x > 0.
pub fn kernel_split(s: &SampleSet) -> Result<KernelSplit> {
    s.validate()?;
    let pos = s.positive_indices();
    let x0 = *pos.first().ok_or_else(|| {
        Error::Precondition("kernel split needs at least one positive sample".into())
    })?;
    let g0 = s.samples[x0].to_real();
    let zero_basis = kernel(&g0, KERNEL_TOL);
    let inv_basis = range(&g0, KERNEL_TOL);

    // Lemma-style stability: the kernel may not depend on x
    let p0 = projector(&zero_basis);
    for &i in &pos[1..] {
        let ki = kernel(&s.samples[i].to_real(), KERNEL_TOL);
        let pi = projector(&ki);
        if ki.len() != zero_basis.len() || frob(&(&p0 - &pi)) > 1e-7 {
            return Err(Error::Precondition(format!(
                "kernels of samples {x0} and {i} disagree; input is not a semigroup"
            )));
        }
    }

    let mut gram: f64 = 0.0;
    for u in &inv_basis {
        for v in &zero_basis {
            gram = gram.max(dot(u, v).abs());
        }
    }
    let invertible = s.restrict(&inv_basis);
    Ok(KernelSplit { zero_basis, inv_basis, invertible, gram_offdiag: gram })
}

/// Defective-safe eigenvalue representative of a primary restriction:
/// the real part comes from the trace, the modulus from the
/// determinant, so nilpotent parts do not poison the accuracy.
fn primary_eigenvalue(b: &FMat, ctype: ComponentType) -> C64 {
    let m = b.rows();
    let tr: f64 = (0..m).map(|i| b[(i, i)]).sum();
    match ctype {
        ComponentType::First => C64::new(tr / m as f64, 0.0),
        ComponentType::Second => {
            let re = tr / m as f64;
            let det = det_f64(b).abs();
            let modulus = det.powf(1.0 / m as f64);
            let im2 = modulus * modulus - re * re;
            C64::new(re, if im2 > 0.0 { im2.sqrt() } else { 0.0 })
        }
    }
}

fn det_f64(a: &FMat) -> f64 {
    // LU with partial pivoting
    let n = a.rows();
    let mut m = a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let (mut piv, mut best) = (c, m[(c, c)].abs());
        for r in c + 1..n {
            if m[(r, c)].abs() > best {
                piv = r;
                best = m[(r, c)].abs();
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..n {
                let t = m[(c, j)];
                m[(c, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            det = -det;
        }
        det *= m[(c, c)];
        for r in c + 1..n {
            let f = m[(r, c)] / m[(c, c)];
            for j in c..n {
                m[(r, j)] -= f * m[(c, j)];
            }
        }
    }
    det
}

fn positive_family(s: &SampleSet) -> Vec<FMat> {
    s.positive_indices().iter().map(|&i| s.samples[i].to_real()).collect()
}

/// Simultaneous real primary decomposition of the (invertible) sample
/// family, with eigen-tracks and first/second type tags.
pub fn srpd(s: &SampleSet) -> Result<Vec<PrimaryComponent>> {
    s.validate()?;
    if s.dim() == 0 {
        return Ok(Vec::new());
    }
    let family = positive_family(s);
    let subs = refine_invariant(&family, 1e-9)?;
    let mut out = Vec::with_capacity(subs.len());
    for basis in subs {
        let u = FMat::from_cols(basis.clone());
        let ut = u.transpose();
        // decide the type from the raw spectra across samples
        let mut ctype = ComponentType::First;
        let mut restricted = Vec::with_capacity(s.len());
        for g in &s.samples {
            let b = ut.matmul(&g.to_real()).matmul(&u);
            let scale = frob(&b).max(1.0);
            if eigenvalues(&b)?.iter().any(|z| z.im.abs() > 1e-6 * scale) {
                ctype = ComponentType::Second;
            }
            restricted.push(b);
        }
        let track: Vec<C64> =
            restricted.iter().map(|b| primary_eigenvalue(b, ctype)).collect();
        if ctype == ComponentType::First {
            for (i, z) in track.iter().enumerate() {
                if z.re < -1e-8 {
                    return Err(Error::Numeric(format!(
                        "first-type component with negative eigenvalue {} at sample {i}",
                        z.re
                    )));
                }
            }
        }
        out.push(PrimaryComponent { basis, ctype, track });
    }
    // deterministic order: by dimension, then by first track value
    out.sort_by(|a, b| {
        (a.dim(), a.track.last().map(|z| (z.re, z.im)).unwrap_or((0.0, 0.0)))
            .partial_cmp(&(b.dim(), b.track.last().map(|z| (z.re, z.im)).unwrap_or((0.0, 0.0))))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Complexified refinement: components of the simultaneous primary
/// decomposition over C, each with its eigenvalue track.
pub fn spd(s: &SampleSet) -> Result<Vec<(Vec<Vec<C64>>, Vec<C64>)>> {
    s.validate()?;
    if s.dim() == 0 {
        return Ok(Vec::new());
    }
    let family = positive_family(s);
    let comps = spd_refine(&family, 1e-9)?;
    let mut out = Vec::with_capacity(comps.len());
    for basis in comps {
        let mut track = Vec::with_capacity(s.len());
        for g in &s.samples {
            let gc = crate::linalg::cplx::to_complex(&g.to_real());
            // Rayleigh quotient on the first basis vector is enough for
            // the track of a one-eigenvalue component
            let v = &basis[0];
            let gv = gc.matvec(v);
            let lam = crate::linalg::cplx::hdot(v, &gv);
            track.push(lam);
        }
        out.push((basis, track));
    }
    Ok(out)
}

/// Largest relative violation of track(x) track(y) = track(x+y) over
/// sampled pairs with sampled sum. The upper-half-plane collapse makes
/// the product match the track or its conjugate.
pub fn track_law_residual(s: &SampleSet, comp: &PrimaryComponent) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..s.len() {
        for j in i..s.len() {
            let sum = s.points[i].add(&s.points[j]);
            let Some(k) = s.index_of(&sum) else { continue };
            // tracks are collapsed to the closed upper half plane, so
            // each factor is only known up to conjugation
            let t = comp.track[k];
            let scale = t.norm().max(1e-300);
            let mut err = f64::INFINITY;
            for zi in [comp.track[i], comp.track[i].conj()] {
                for zj in [comp.track[j], comp.track[j].conj()] {
                    let prod = zi * zj;
                    err = err.min((prod - t).norm().min((prod - t.conj()).norm()));
                }
            }
            worst = worst.max(err / scale);
        }
    }
    worst
}

/// Common eigenvector of a first-type component by eigenspace descent:
/// refine by a strict eigenspace of some sample until every sample acts
/// as a scalar, then return a unit vector of the final space.
pub fn common_eigenvector(s: &SampleSet, comp: &PrimaryComponent) -> Result<Vec<f64>> {
    if comp.ctype != ComponentType::First {
        return Err(Error::Precondition(
            "common eigenvector descent needs a first-type component".into(),
        ));
    }
    let m = comp.dim();
    let restricted: Vec<FMat> = s.samples.iter().map(|g| comp.restrict(&g.to_real())).collect();
    // current space, as columns in component coordinates
    let mut cur: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    loop {
        let k = cur.len();
        let c = FMat::from_cols(cur.clone());
        let ct = c.transpose();
        // done when every sample acts as its track scalar on the space
        let mut worst = 0.0f64;
        for (b, lam) in restricted.iter().zip(&comp.track) {
            for v in &cur {
                let bv = b.matvec(v);
                let dev: Vec<f64> = bv.iter().zip(v).map(|(x, y)| x - lam.re * y).collect();
                worst = worst.max(norm2(&dev) / (1.0 + lam.re.abs()));
            }
        }
        if worst <= 1e-8 {
            break;
        }
        // strict eigenspace of some sample inside the current space,
        // smallest dimension first for fastest descent
        let mut best: Option<Vec<Vec<f64>>> = None;
        for (b, lam) in restricted.iter().zip(&comp.track) {
            let bc = ct.matmul(b).matmul(&c);
            let mut shifted = bc.clone();
            for i in 0..k {
                shifted[(i, i)] -= lam.re;
            }
            let scale = frob(&shifted);
            if scale > 0.0 {
                shifted = shifted.scale(&(1.0 / scale));
            }
            let es = kernel(&shifted, 1e-8);
            if !es.is_empty() && es.len() < k && best.as_ref().map_or(true, |b| es.len() < b.len())
            {
                best = Some(es);
            }
        }
        let Some(es) = best else {
            return Err(Error::Numeric(
                "eigenspace descent stalled; tolerance too tight for the data".into(),
            ));
        };
        // lift back to component coordinates
        cur = es
            .iter()
            .map(|w| {
                let mut v = vec![0.0; m];
                for (j, col) in cur.iter().enumerate() {
                    for i in 0..m {
                        v[i] += w[j] * col[i];
                    }
                }
                v
            })
            .collect();
        let (on, _) = float::orthonormalize(&cur, 1e-10);
        cur = on;
    }
    // ambient vector
    let v0 = &cur[0];
    let n = comp.basis[0].len();
    let mut out = vec![0.0; n];
    for (j, col) in comp.basis.iter().enumerate() {
        for i in 0..n {
            out[i] += v0[j] * col[i];
        }
    }
    let nrm = norm2(&out);
    Ok(out.into_iter().map(|x| x / nrm).collect())
}

/// Index of the sampled unit element of each basis entry.
pub(crate) fn basis_point_indices(s: &SampleSet) -> Result<Vec<usize>> {
    let n = s.basis.len();
    (0..n)
        .map(|k| {
            s.index_of(&ModuleElement::unit(k, n)).ok_or_else(|| {
                Error::Precondition(format!(
                    "sample set must contain the basis element {:?}",
                    s.basis.entries[k].label
                ))
            })
        })
        .collect()
}
