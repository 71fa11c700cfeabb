//! Partition of primary components into blocks sharing a rotation class:
//! two components land in the same block exactly when their angle tracks
//! differ by a linear solution, up to orientation.

use std::f64::consts::PI;

use crate::cauchy::{mod_interval, CauchySolution, ModuleElement};
use crate::decomp::jc::ComponentGenerators;
use crate::decomp::{basis_point_indices, ComponentType, PrimaryComponent};
use crate::error::{Error, Result};
use crate::semigroup::SampleSet;

/// One partition block: components whose oriented angle tracks are
/// nu_j = eta + c_j value(x).
#[derive(Clone, Debug)]
pub struct PartitionBlock {
    /// Indices into the component list, ascending.
    pub comps: Vec<usize>,
    /// Class representative; the zero solution for the trivial block.
    pub eta: CauchySolution,
    /// Linear offsets c_j, parallel to `comps`.
    pub offsets: Vec<f64>,
    /// +1 or -1 per member; -1 means the member's plane must be
    /// re-oriented (second realification vector negated) to match eta.
    pub orientations: Vec<i8>,
    /// True for the single block with eta equivalent to zero. Only this
    /// block may contain first-type components.
    pub trivial: bool,
}

#[derive(Clone, Debug)]
pub struct Partition {
    pub blocks: Vec<PartitionBlock>,
    /// Per-component lifted angle solutions (zero for first type).
    pub lifts: Vec<CauchySolution>,
    /// Borderline equivalence decisions worth a second look.
    pub warnings: Vec<String>,
}

const LIFT_TOL: f64 = 1e-6;
const GROUP_TOL: f64 = 1e-6;
const WARN_TOL: f64 = 1e-3;

/// Distance of two angles as rotations: 0 when they differ by 2 pi k.
fn angle_dist(a: f64, b: f64) -> f64 {
    mod_interval(a - b, PI).abs()
}

/// Recovers the angle solution of one second-type component from its
/// principal-argument track, which only determines each value up to
/// sign and a multiple of 2 pi. Candidate basis values are searched
/// over both choices; mixed and fractional sample points pin down the
/// relative branches. The global sign stays free and is fixed by the
/// iteration order.
fn lift_track(
    s: &SampleSet,
    track: &[f64],
    unit_idx: &[usize],
) -> Result<(CauchySolution, f64)> {
    let n = s.basis.len();
    let theta: Vec<f64> = unit_idx.iter().map(|&i| track[i]).collect();
    let pos = s.positive_indices();
    let score = |vals: &[f64]| -> f64 {
        let f = CauchySolution::real(s.basis.clone(), vals.to_vec()).unwrap();
        let mut worst = 0.0f64;
        for &i in &pos {
            let v = f.evaluate(&s.points[i]).unwrap();
            let t = track[i];
            let e = angle_dist(v, t).min(angle_dist(v, -t));
            worst = worst.max(e);
        }
        worst
    };
    // candidates ordered by total winding so the smallest correction wins
    let mut best: Option<(Vec<f64>, f64)> = None;
    let shifts: Vec<i64> = vec![0, 1, -1, 2, -2];
    let signs = [1.0f64, -1.0];
    let mut stack: Vec<Vec<(f64, i64)>> = vec![Vec::new()];
    // breadth-first over per-coordinate (sign, winding) choices
    let mut combos: Vec<Vec<(f64, i64)>> = Vec::new();
    while let Some(partial) = stack.pop() {
        if partial.len() == n {
            combos.push(partial);
            continue;
        }
        for &m in shifts.iter().rev() {
            for &sg in signs.iter().rev() {
                let mut next = partial.clone();
                next.push((sg, m));
                stack.push(next);
            }
        }
    }
    combos.sort_by_key(|c| c.iter().map(|(_, m)| m.abs()).sum::<i64>());
    for combo in combos {
        let vals: Vec<f64> =
            (0..n).map(|k| combo[k].0 * theta[k] + 2.0 * PI * combo[k].1 as f64).collect();
        let sc = score(&vals);
        if best.as_ref().map_or(true, |b| sc < b.1 - 1e-12) {
            best = Some((vals, sc));
            if sc <= 1e-12 {
                break;
            }
        }
    }
    let (vals, sc) = best.unwrap();
    if sc > LIFT_TOL {
        return Err(Error::Numeric(format!(
            "angle track does not lift to a Cauchy solution (residual {sc:.3e})"
        )));
    }
    Ok((CauchySolution::real(s.basis.clone(), vals)?, sc))
}

/// Groups the components of a simultaneous decomposition by rotation
/// class. First-type components and components with linear angle track
/// form the single trivial block; the rest are grouped by whether their
/// tracks differ by a linear solution, allowing orientation flips.
pub fn partitioned_srpd(
    s: &SampleSet,
    comps: &[PrimaryComponent],
    gens: &[ComponentGenerators],
) -> Result<Partition> {
    if comps.len() != gens.len() {
        return Err(Error::Precondition("component and generator lists differ in length".into()));
    }
    let unit_idx = basis_point_indices(s)?;
    let mut lifts: Vec<CauchySolution> = Vec::with_capacity(comps.len());
    let mut warnings: Vec<String> = Vec::new();
    for (j, comp) in comps.iter().enumerate() {
        match comp.ctype {
            ComponentType::First => lifts.push(CauchySolution::zero(s.basis.clone())),
            ComponentType::Second => {
                let (f, sc) = lift_track(s, &gens[j].nu_track, &unit_idx)?;
                if sc > LIFT_TOL * 1e-2 {
                    warnings.push(format!("component {j}: lift residual {sc:.3e}"));
                }
                lifts.push(f);
            }
        }
    }

    let mut trivial = PartitionBlock {
        comps: Vec::new(),
        eta: CauchySolution::zero(s.basis.clone()),
        offsets: Vec::new(),
        orientations: Vec::new(),
        trivial: true,
    };
    let mut blocks: Vec<PartitionBlock> = Vec::new();
    for (j, nu) in lifts.iter().enumerate() {
        if nu.is_linear(GROUP_TOL) {
            if !nu.is_linear(WARN_TOL * 1e-6) && !nu.is_zero() {
                // keep a trace of near-threshold classifications
                warnings.push(format!("component {j}: angle track is borderline linear"));
            }
            trivial.comps.push(j);
            trivial.offsets.push(nu.slope());
            trivial.orientations.push(1);
            continue;
        }
        let mut placed = false;
        for b in blocks.iter_mut() {
            let fwd = nu.sub(&b.eta)?;
            if fwd.is_linear(GROUP_TOL) {
                b.comps.push(j);
                b.offsets.push(fwd.slope());
                b.orientations.push(1);
                placed = true;
                break;
            }
            let bwd = nu.neg().sub(&b.eta)?;
            if bwd.is_linear(GROUP_TOL) {
                b.comps.push(j);
                b.offsets.push(bwd.slope());
                b.orientations.push(-1);
                placed = true;
                break;
            }
            let margin = nearest_linear_residual(s, &fwd).min(nearest_linear_residual(s, &bwd));
            if margin < WARN_TOL {
                warnings.push(format!(
                    "components {j} and {}: rotation classes separated by only {margin:.3e}",
                    b.comps[0]
                ));
            }
        }
        if !placed {
            blocks.push(PartitionBlock {
                comps: vec![j],
                eta: nu.clone(),
                offsets: vec![0.0],
                orientations: vec![1],
                trivial: false,
            });
        }
    }
    let mut out = Vec::with_capacity(blocks.len() + 1);
    if !trivial.comps.is_empty() {
        out.push(trivial);
    }
    out.extend(blocks);
    Ok(Partition { blocks: out, lifts, warnings })
}

/// How far a solution is from the nearest linear one, measured as the
/// largest basis-value deviation from the best-fit slope.
fn nearest_linear_residual(s: &SampleSet, f: &CauchySolution) -> f64 {
    let rs = s.basis.values();
    let vals = f.values_f64();
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, r) in vals.iter().zip(rs.iter()) {
        num += v * r;
        den += r * r;
    }
    let c = num / den;
    vals.iter().zip(rs.iter()).map(|(v, r)| (v - c * r).abs()).fold(0.0, f64::max)
}

/// Evaluates the oriented track of one block member at a sample point:
/// eta(x) + c value(x), negated for flipped members.
pub fn member_angle(
    block: &PartitionBlock,
    member: usize,
    x: &ModuleElement,
    s: &SampleSet,
) -> Result<f64> {
    let base = block.eta.evaluate(x)?;
    Ok(base + block.offsets[member] * x.value(&s.basis))
}
