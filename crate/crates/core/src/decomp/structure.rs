//! Assembly of the structure factorization: g(x) = S(x) exp(M value(x))
//! with S built from the rotation classes, plus the orthogonal normal
//! form of rotation blocks and the end-to-end classification pipeline.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cauchy::mod_interval;
use crate::decomp::jc::{generators, semigroup_jc, ComponentGenerators, JCResult};
use crate::decomp::partition::{partitioned_srpd, Partition};
use crate::decomp::{
    kernel_split, srpd, track_law_residual, ComponentType, PrimaryComponent,
};
use crate::error::{Error, Result};
use crate::linalg::cplx;
use crate::linalg::eig::eigenclusters;
use crate::linalg::exp::{mat_exp_f64, rotation_block};
use crate::linalg::float::{dot, frob, inverse, norm2, operator_norm, orthonormalize};
use crate::linalg::mat::FMat;
use crate::semigroup::{
    verify_bound, verify_semigroup, BoundFunction, SampleSet, VerifyReport,
};

/// Embedding and local generator of one primary component inside the
/// assembled basis.
#[derive(Clone, Debug)]
pub struct MemberStructure {
    /// Index into the component list.
    pub comp: usize,
    /// (start, len) of this member's columns in the assembled basis.
    pub cols: (usize, usize),
    /// Generator in member coordinates: a id + c L + P.
    pub local_gen: FMat,
    /// Columns embedding member coordinates into the invertible part.
    pub embed: FMat,
}

#[derive(Clone, Debug)]
pub struct StructureBlock {
    /// Index into the partition's block list.
    pub part_index: usize,
    /// (start, len) of the whole block in the assembled basis.
    pub cols: (usize, usize),
    pub trivial: bool,
    pub members: Vec<MemberStructure>,
    /// eta_l at every sample point, parallel to the sample set.
    pub eta_samples: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StructureResult {
    /// Assembled basis B: block and member embeddings as columns.
    pub basis: FMat,
    pub basis_inv: FMat,
    /// Global generator M = B blockdiag(G_j) B^-1.
    pub m: FMat,
    /// S(x) per sample point.
    pub s_samples: Vec<FMat>,
    pub blocks: Vec<StructureBlock>,
    pub report: VerifyReport,
}

const REC_TOL: f64 = 1e-8;

/// Standard skew generator blockdiag([[0,1],[-1,0]], ...).
fn skew_l(dim: usize) -> FMat {
    let l = FMat::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    FMat::block_diag(&vec![l; dim / 2])
}

/// Realification basis of a second-type component from the restricted
/// semisimple factor at x0: columns (u_1, v_1, ..., u_m, v_m) in which
/// the factor acts as r Q_{2m}(tau). tau is the oriented angle target.
fn realification(d0: &FMat, tau: f64) -> Result<FMat> {
    let dim = d0.rows();
    let m = dim / 2;
    let clusters = eigenclusters(d0, 1e-7)?;
    let target = clusters
        .iter()
        .min_by(|a, b| {
            let da = mod_interval(a.center.im.atan2(a.center.re) - tau, PI).abs();
            let db = mod_interval(b.center.im.atan2(b.center.re) - tau, PI).abs();
            da.partial_cmp(&db).unwrap()
        })
        .ok_or_else(|| Error::Numeric("empty spectrum in realification".into()))?;
    let dist = mod_interval(target.center.im.atan2(target.center.re) - tau, PI).abs();
    if dist > 1e-6 {
        return Err(Error::Numeric(format!(
            "no eigenvalue matches the oriented angle (distance {dist:.3e})"
        )));
    }
    if target.multiplicity != m {
        return Err(Error::Numeric(format!(
            "eigenvalue multiplicity {} does not match half the block dimension {m}",
            target.multiplicity
        )));
    }
    let (ws, dropped) = cplx::orthonormalize(&target.basis, 1e-10);
    if !dropped.is_empty() || ws.len() != m {
        return Err(Error::Numeric("eigenspace basis is rank deficient".into()));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for w in &ws {
        let u: Vec<f64> = w.iter().map(|z| z.re).collect();
        let v: Vec<f64> = w.iter().map(|z| z.im).collect();
        // phase rotation making the pair orthogonal
        let uu = dot(&u, &u);
        let vv = dot(&v, &v);
        let uv = dot(&u, &v);
        let phi = 0.5 * (-2.0 * uv).atan2(uu - vv);
        let (c, s) = (phi.cos(), phi.sin());
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| c * a - s * b).collect();
        let vp: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + c * b).collect();
        let nu = norm2(&up);
        if nu < 1e-12 {
            return Err(Error::Numeric("degenerate realification vector".into()));
        }
        cols.push(up.iter().map(|x| x / nu).collect());
        cols.push(vp.iter().map(|x| x / nu).collect());
    }
    Ok(FMat::from_cols(cols))
}

/// Builds the change of basis B, the generator M, and the rotation
/// factors S(x), verifying isometry, block orthogonality, commutation,
/// and reconstruction along the way. The sample set is the invertible
/// part.
pub fn structure(
    s: &SampleSet,
    comps: &[PrimaryComponent],
    gens: &[ComponentGenerators],
    jc: &JCResult,
    part: &Partition,
) -> Result<StructureResult> {
    let d = s.dim();
    if d == 0 {
        return Ok(StructureResult {
            basis: FMat::zeros(0, 0),
            basis_inv: FMat::zeros(0, 0),
            m: FMat::zeros(0, 0),
            s_samples: s.samples.iter().map(|_| FMat::zeros(0, 0)).collect(),
            blocks: Vec::new(),
            report: VerifyReport::new(),
        });
    }
    let pos = s.positive_indices();
    let mut report = VerifyReport::new();
    let mut b_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut local_gens: Vec<FMat> = Vec::new();
    let mut blocks: Vec<StructureBlock> = Vec::new();

    for (l, pb) in part.blocks.iter().enumerate() {
        let block_start = b_cols.len();
        let mut members = Vec::with_capacity(pb.comps.len());
        for (mi, &j) in pb.comps.iter().enumerate() {
            let comp = &comps[j];
            let u_j = FMat::from_cols(comp.basis.clone());
            let start = b_cols.len();
            let (embed, g_local) = match comp.ctype {
                ComponentType::First => {
                    let mut g = gens[j].p.clone();
                    for i in 0..comp.dim() {
                        g[(i, i)] += gens[j].a;
                    }
                    (u_j.clone(), g)
                }
                ComponentType::Second => {
                    // oriented angle of this member at each sample
                    let tau = |i: usize| -> f64 {
                        pb.eta.evaluate(&s.points[i]).unwrap()
                            + pb.offsets[mi] * s.value(i)
                    };
                    let x0 = pos
                        .iter()
                        .copied()
                        .max_by(|&a, &b| {
                            tau(a).sin().abs().partial_cmp(&tau(b).sin().abs()).unwrap()
                        })
                        .ok_or_else(|| {
                            Error::Precondition("no positive sample points".into())
                        })?;
                    if tau(x0).sin().abs() < 1e-3 {
                        return Err(Error::Degenerate(
                            "rotation angles too close to 0 or pi at every sample".into(),
                        ));
                    }
                    let d0 = u_j.transpose().matmul(&jc.d[x0].to_real()).matmul(&u_j);
                    let r = realification(&d0, tau(x0))?;
                    let gram = r.transpose().matmul(&r);
                    report.record(
                        1e-8,
                        "realification-gram",
                        vec![j],
                        frob(&(&gram - &FMat::identity(r.cols()))),
                    );
                    let r_inv = inverse(&r)?;
                    let p_local = r_inv.matmul(&gens[j].p).matmul(&r);
                    let mut g = p_local;
                    let dim = comp.dim();
                    let sk = skew_l(dim).scale(&pb.offsets[mi]);
                    for a in 0..dim {
                        g[(a, a)] += gens[j].a;
                        for bcol in 0..dim {
                            g[(a, bcol)] += sk[(a, bcol)];
                        }
                    }
                    (u_j.matmul(&r), g)
                }
            };
            for c in 0..embed.cols() {
                b_cols.push(embed.col(c));
            }
            members.push(MemberStructure {
                comp: j,
                cols: (start, embed.cols()),
                local_gen: g_local.clone(),
                embed,
            });
            local_gens.push(g_local);
        }
        let eta_samples: Result<Vec<f64>> =
            s.points.iter().map(|x| pb.eta.evaluate(x)).collect();
        blocks.push(StructureBlock {
            part_index: l,
            cols: (block_start, b_cols.len() - block_start),
            trivial: pb.trivial,
            members,
            eta_samples: eta_samples?,
        });
    }
    if b_cols.len() != d {
        return Err(Error::Dimension(format!(
            "component embeddings span dimension {} instead of {d}",
            b_cols.len()
        )));
    }
    let basis = FMat::from_cols(b_cols);
    let basis_inv = inverse(&basis)?;
    let m = basis.matmul(&FMat::block_diag(&local_gens)).matmul(&basis_inv);

    // block orthogonality: columns of distinct blocks
    let mut block_gram = 0.0f64;
    for bi in 0..blocks.len() {
        for bj in bi + 1..blocks.len() {
            let (s1, n1) = blocks[bi].cols;
            let (s2, n2) = blocks[bj].cols;
            for c1 in s1..s1 + n1 {
                for c2 in s2..s2 + n2 {
                    let a = basis.col(c1);
                    let b = basis.col(c2);
                    let g = dot(&a, &b).abs() / (norm2(&a) * norm2(&b));
                    block_gram = block_gram.max(g);
                }
            }
        }
    }
    report.record(REC_TOL, "block-gram", vec![], block_gram);

    // S(x) per sample, and the verification sweep
    let mut s_samples = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        let mut locals: Vec<FMat> = Vec::new();
        for blk in &blocks {
            for mem in &blk.members {
                let dim = mem.cols.1;
                match comps[mem.comp].ctype {
                    ComponentType::Second => locals.push(rotation_block(dim, blk.eta_samples[i])),
                    ComponentType::First => locals.push(FMat::identity(dim)),
                }
            }
        }
        let s_i = basis.matmul(&FMat::block_diag(&locals)).matmul(&basis_inv);
        s_samples.push(s_i);
    }

    let m_scale = 1.0 + frob(&m);
    for i in 0..s.len() {
        let g_i = s.samples[i].to_real();
        let s_i = &s_samples[i];
        // isometry of S on each rotating block
        for blk in &blocks {
            if blk.trivial {
                continue;
            }
            let (st, n) = blk.cols;
            let cols: Vec<Vec<f64>> = (st..st + n).map(|c| basis.col(c)).collect();
            let (onb, _) = orthonormalize(&cols, 1e-10);
            if onb.len() != n {
                return Err(Error::Numeric("rotating block embedding is rank deficient".into()));
            }
            let o = FMat::from_cols(onb);
            let so = s_i.matmul(&o);
            let gram = so.transpose().matmul(&so);
            report.record(
                REC_TOL,
                "isometry",
                vec![i, blk.part_index],
                frob(&(&gram - &FMat::identity(n))),
            );
        }
        report.record(
            REC_TOL,
            "commutation",
            vec![i],
            frob(&(&m.matmul(s_i) - &s_i.matmul(&m))) / m_scale,
        );
        let rec = s_i.matmul(&mat_exp_f64(&m.scale(&s.value(i)))?);
        report.record(
            REC_TOL,
            "reconstruction",
            vec![i],
            frob(&(&rec - &g_i)) / (1.0 + frob(&g_i)),
        );
    }

    Ok(StructureResult { basis, basis_inv, m, s_samples, blocks, report })
}

/// Recovers an orthogonal U with S(x) = U Q_d(eta(x)) U^T from samples
/// of S restricted to one rotation block, where every 2-plane turns by
/// the same angle. Input matrices are square of even dimension; etas
/// are the block angles per sample.
pub fn rotation_normal_form(s_mats: &[FMat], etas: &[f64]) -> Result<FMat> {
    if s_mats.is_empty() || s_mats.len() != etas.len() {
        return Err(Error::Precondition("need matching S samples and angles".into()));
    }
    let d = s_mats[0].rows();
    if d % 2 != 0 {
        return Err(Error::Dimension("rotation block dimension must be even".into()));
    }
    let admissible: Vec<usize> =
        (0..etas.len()).filter(|&i| etas[i].sin().abs() > 1e-3).collect();
    let star = *admissible
        .iter()
        .max_by(|&&a, &&b| etas[a].sin().abs().partial_cmp(&etas[b].sin().abs()).unwrap())
        .ok_or_else(|| {
            Error::Degenerate("every sampled angle is within 1e-3 of 0 or pi".into())
        })?;

    let apply = |i: usize, v: &[f64]| -> Vec<f64> {
        let sv = s_mats[i].matvec(v);
        let (c, sn) = (etas[i].cos(), etas[i].sin());
        sv.iter().zip(v).map(|(a, b)| (a - c * b) / sn).collect()
    };

    let mut complement: Vec<Vec<f64>> =
        (0..d).map(|k| (0..d).map(|r| if r == k { 1.0 } else { 0.0 }).collect()).collect();
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while !complement.is_empty() {
        let v = complement[0].clone();
        let u = apply(star, &v);
        if dot(&u, &v).abs() > 1e-7 || (norm2(&u) - 1.0).abs() > 1e-7 {
            return Err(Error::Numeric(
                "paired vector is not orthonormal: not a conjugated rotation".into(),
            ));
        }
        for &i in &admissible {
            let ui = apply(i, &v);
            let dev: f64 =
                ui.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dev > 1e-7 {
                return Err(Error::Numeric(format!(
                    "pairing depends on the sample point (deviation {dev:.3e})"
                )));
            }
        }
        u_cols.push(v.clone());
        u_cols.push(u.iter().map(|x| -x).collect());
        // complement of the new invariant plane
        let rest: Vec<Vec<f64>> = complement[1..]
            .iter()
            .map(|w| {
                let a = dot(w, &v);
                let b = dot(w, &u);
                w.iter().zip(v.iter().zip(&u)).map(|(x, (vv, uu))| x - a * vv - b * uu).collect()
            })
            .collect();
        // drop ambient-scale-tiny leftovers; orthonormalize judges
        // dependence relative to each vector's own norm
        let rest: Vec<Vec<f64>> = rest.into_iter().filter(|w| norm2(w) > 1e-8).collect();
        let (next, _) = orthonormalize(&rest, 1e-8);
        if next.len() + 2 != complement.len() {
            return Err(Error::Numeric(format!(
                "complement dimension did not drop by two ({} -> {})",
                complement.len(),
                next.len()
            )));
        }
        complement = next;
    }
    let u = FMat::from_cols(u_cols);
    let orth = frob(&(&u.matmul(&u.transpose()) - &FMat::identity(d)));
    if orth > 1e-10 {
        return Err(Error::Numeric(format!("normal form not orthogonal (residual {orth:.3e})")));
    }
    for (i, s_i) in s_mats.iter().enumerate() {
        let q = rotation_block(d, etas[i]);
        let res = frob(&(&u.matmul(&q).matmul(&u.transpose()) - s_i));
        if res > 1e-8 {
            return Err(Error::Numeric(format!(
                "normal form fails to reproduce sample {i} (residual {res:.3e})"
            )));
        }
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub verify: f64,
    pub recover: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { verify: 1e-9, recover: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    /// "pass", "fail", or "skipped".
    pub status: String,
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockReport {
    /// "elementary-plain", "elementary-rotating", or "zero".
    pub tag: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Oriented angle values on the basis entries: eta(r_k) + c r_k.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_basis_values: Option<Vec<f64>>,
    /// Ambient embedding columns of this block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Vec<f64>>>,
    /// Local generator rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub stages: Vec<Stage>,
    pub blocks: Vec<BlockReport>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.status != "fail")
    }
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub report: Report,
    pub structure: Option<StructureResult>,
}

fn stage(name: &str, pass: bool, residuals: &[(&str, f64)]) -> Stage {
    Stage {
        name: name.into(),
        status: if pass { "pass" } else { "fail" }.into(),
        residuals: residuals.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

fn fail_out(mut report: Report, st: Stage, msgs: Vec<String>) -> Classification {
    report.stages.push(st);
    report.violations.extend(msgs);
    Classification { report, structure: None }
}

/// End-to-end pipeline: verification, kernel split, primary
/// decomposition, Jordan-Chevalley, generator recovery, rotation-class
/// partition, structure assembly, and orthogonal normal forms. Stops at
/// the first failing stage; failures are reported, not returned as
/// errors.
pub fn classify(
    s: &SampleSet,
    bound: &BoundFunction,
    tol: &Tolerances,
) -> Result<Classification> {
    s.validate()?;
    let mut report = Report {
        schema: "1".into(),
        stages: Vec::new(),
        blocks: Vec::new(),
        violations: Vec::new(),
        warnings: Vec::new(),
    };

    let rep = verify_semigroup(s, tol.verify)?;
    let st = stage("verify-semigroup", rep.passed, &[("max", rep.max_residual)]);
    if !rep.passed {
        let msgs = rep
            .violations
            .iter()
            .map(|v| format!("{} at points {:?}: residual {:.3e}", v.kind, v.points, v.residual))
            .collect();
        return Ok(fail_out(report, st, msgs));
    }
    report.stages.push(st);

    let brep = verify_bound(s, bound)?;
    let worst = brep.margins.iter().map(|m| -m.margin).fold(f64::NEG_INFINITY, f64::max);
    let st = stage("verify-bound", brep.passed, &[("max-excess", worst.max(0.0))]);
    if !brep.passed {
        let msgs = brep
            .margins
            .iter()
            .filter(|m| m.margin < -1e-12)
            .map(|m| {
                format!(
                    "norm {:.6} exceeds bound {:.6} at point {}",
                    m.norm, m.bound, m.point
                )
            })
            .collect();
        return Ok(fail_out(report, st, msgs));
    }
    report.stages.push(st);

    let split = match kernel_split(s) {
        Ok(sp) => sp,
        Err(e) => {
            let st = stage("kernel-split", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    let zero_dim = split.zero_basis.len();
    let st = stage(
        "kernel-split",
        split.gram_offdiag <= tol.recover,
        &[("gram-offdiag", split.gram_offdiag), ("zero-dim", zero_dim as f64)],
    );
    if split.gram_offdiag > tol.recover {
        // a non-orthogonal split forces |g(x)| to stay above 1 as x -> 0,
        // while the bound pushes it to f(0) = 1
        let pos = s.positive_indices();
        let near = pos
            .iter()
            .copied()
            .min_by(|&a, &b| s.value(a).partial_cmp(&s.value(b)).unwrap());
        let msg = match near {
            Some(i) => format!(
                "zero and invertible parts are not orthogonal (Gram {:.3e}); \
                 |g| stays at {:.6} near value {:.6} while the bound forces limit 1: \
                 bound assumption violated",
                split.gram_offdiag,
                operator_norm(&s.samples[i].to_real()),
                s.value(i)
            ),
            None => "zero and invertible parts are not orthogonal".into(),
        };
        return Ok(fail_out(report, st, vec![msg]));
    }
    report.stages.push(st);

    let inv = &split.invertible;
    let comps = match srpd(inv) {
        Ok(c) => c,
        Err(e) => {
            let st = stage("srpd", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    let track_res = comps.iter().map(|c| track_law_residual(inv, c)).fold(0.0, f64::max);
    let st = stage("srpd", track_res <= tol.verify, &[("track-law", track_res)]);
    if track_res > tol.verify {
        return Ok(fail_out(
            report,
            st,
            vec![format!("eigenvalue tracks violate the product law ({track_res:.3e})")],
        ));
    }
    report.stages.push(st);

    let jc = match semigroup_jc(inv) {
        Ok(j) => j,
        Err(e) => {
            let st = stage("jordan-chevalley", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    let st = stage("jordan-chevalley", jc.report.passed, &[("max", jc.report.max_residual)]);
    if !jc.report.passed {
        let msgs = jc
            .report
            .violations
            .iter()
            .map(|v| format!("{}: residual {:.3e}", v.kind, v.residual))
            .collect();
        return Ok(fail_out(report, st, msgs));
    }
    report.stages.push(st);

    let gens = match generators(inv, &comps, &jc, bound) {
        Ok(g) => g,
        Err(e) => {
            let st = stage("generators", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    let a_res = gens.iter().map(|g| g.a_residual.max(g.p_residual)).fold(0.0, f64::max);
    report.stages.push(stage("generators", true, &[("fit", a_res)]));

    let part = match partitioned_srpd(inv, &comps, &gens) {
        Ok(p) => p,
        Err(e) => {
            let st = stage("partition", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    report.warnings.extend(part.warnings.iter().cloned());
    report.stages.push(stage("partition", true, &[("blocks", part.blocks.len() as f64)]));

    let sr = match structure(inv, &comps, &gens, &jc, &part) {
        Ok(r) => r,
        Err(e) => {
            let st = stage("structure", false, &[]);
            return Ok(fail_out(report, st, vec![e.to_string()]));
        }
    };
    let mut res_by_kind: BTreeMap<String, f64> = BTreeMap::new();
    for v in &sr.report.violations {
        let e = res_by_kind.entry(v.kind.clone()).or_insert(0.0);
        *e = e.max(v.residual);
    }
    res_by_kind.entry("max".into()).or_insert(sr.report.max_residual);
    let st = Stage {
        name: "structure".into(),
        status: if sr.report.passed { "pass" } else { "fail" }.into(),
        residuals: res_by_kind,
    };
    if !sr.report.passed {
        let msgs = sr
            .report
            .violations
            .iter()
            .map(|v| format!("{}: residual {:.3e}", v.kind, v.residual))
            .collect();
        return Ok(fail_out(report, st, msgs));
    }
    report.stages.push(st);

    // orthogonal normal forms of the rotating blocks; ambient columns
    // are attached to the member reports of each block
    let v_inv = FMat::from_cols(split.inv_basis.clone());
    let mut block_u: BTreeMap<usize, FMat> = BTreeMap::new();
    let rotating: Vec<&StructureBlock> =
        sr.blocks.iter().filter(|b| !b.trivial).collect();
    if rotating.is_empty() {
        report.stages.push(Stage {
            name: "normal-form".into(),
            status: "skipped".into(),
            residuals: BTreeMap::new(),
        });
    } else {
        let mut worst = 0.0f64;
        for blk in rotating {
            let (st_c, n) = blk.cols;
            let cols: Vec<Vec<f64>> = (st_c..st_c + n).map(|c| sr.basis.col(c)).collect();
            let (onb, _) = orthonormalize(&cols, 1e-10);
            if onb.len() != n {
                let st = stage("normal-form", false, &[]);
                return Ok(fail_out(
                    report,
                    st,
                    vec!["rotating block embedding is rank deficient".into()],
                ));
            }
            let o = FMat::from_cols(onb);
            let restricted: Vec<FMat> = sr
                .s_samples
                .iter()
                .map(|sm| o.transpose().matmul(sm).matmul(&o))
                .collect();
            let u_l = match rotation_normal_form(&restricted, &blk.eta_samples) {
                Ok(u) => u,
                Err(e) => {
                    let st = stage("normal-form", false, &[]);
                    return Ok(fail_out(report, st, vec![e.to_string()]));
                }
            };
            for (i, sm) in restricted.iter().enumerate() {
                let q = rotation_block(n, blk.eta_samples[i]);
                worst = worst.max(frob(&(&u_l.matmul(&q).matmul(&u_l.transpose()) - sm)));
            }
            // ambient columns: invertible-part basis, then block basis
            block_u.insert(blk.part_index, v_inv.matmul(&o.matmul(&u_l)));
        }
        report.stages.push(stage("normal-form", true, &[("max", worst)]));
    }

    // per-member block reports, plus the zero block
    for blk in &sr.blocks {
        let pb = &part.blocks[blk.part_index];
        for (mi, mem) in blk.members.iter().enumerate() {
            let comp = &comps[mem.comp];
            let rotating = comp.ctype == ComponentType::Second && !blk.trivial;
            let nu_vals = if comp.ctype == ComponentType::Second {
                let rs = s.basis.values();
                Some(
                    pb.eta
                        .values_f64()
                        .iter()
                        .zip(rs.iter())
                        .map(|(e, r)| e + pb.offsets[mi] * r)
                        .collect(),
                )
            } else {
                None
            };
            // rotating members share the block's orthogonal normal form;
            // plain members carry their own ambient embedding
            let ambient = match block_u.get(&blk.part_index) {
                Some(bu) if rotating => bu.clone(),
                _ => v_inv.matmul(&mem.embed),
            };
            report.blocks.push(BlockReport {
                tag: if rotating { "elementary-rotating" } else { "elementary-plain" }.into(),
                dim: mem.cols.1,
                a: Some(gens[mem.comp].a),
                nu_basis_values: nu_vals,
                u: Some((0..ambient.cols()).map(|c| ambient.col(c)).collect()),
                m: Some(
                    (0..mem.local_gen.rows()).map(|r| mem.local_gen.row(r)).collect(),
                ),
            });
        }
    }
    if zero_dim > 0 {
        report.blocks.push(BlockReport {
            tag: "zero".into(),
            dim: zero_dim,
            a: None,
            nu_basis_values: None,
            u: Some(split.zero_basis.clone()),
            m: None,
        });
    }

    Ok(Classification { report, structure: Some(sr) })
}
