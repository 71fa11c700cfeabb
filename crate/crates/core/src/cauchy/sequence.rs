//! Constructive sequences on the graph of a Cauchy solution: points
//! approaching zero on which the solution approaches a prescribed
//! target, and witnesses that non-linear solutions have dense graphs.

use std::f64::consts::PI;

use num_traits::Zero;

use crate::cauchy::approx::best_rational;
use crate::cauchy::{equivalent, CauchySolution, ModuleElement};
use crate::error::{Error, Result};
use crate::Rat;

/// Output of `pi_sequence`: points x_k with value(x_k) -> 0 and
/// f'(x_k) -> pi, g'(x_k) -> theta with |theta| < pi, where (f', g') is
/// the input pair possibly swapped.
#[derive(Clone, Debug)]
pub struct PiSequence {
    pub points: Vec<ModuleElement>,
    /// True when the second input attains pi.
    pub swapped: bool,
    /// Limit of the non-dominant solution along the sequence.
    pub theta: f64,
}

/// Per-pair slope differences f(r_i)/r_i - f(r_j)/r_j.
fn slope_diff(f: &CauchySolution, i: usize, j: usize) -> f64 {
    let vals = f.values_f64();
    let rs = f.basis.values();
    vals[i] / rs[i] - vals[j] / rs[j]
}

/// Picks the basis pair and orientation maximizing the dominance margin.
fn pick_pair(f: &CauchySolution, g: &CauchySolution) -> Result<(usize, usize, bool, f64)> {
    let n = f.basis.len();
    let mut best: Option<(usize, usize, bool, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let df = slope_diff(f, i, j).abs();
            let dg = slope_diff(g, i, j).abs();
            for (swapped, big, small) in [(false, df, dg), (true, dg, df)] {
                if big <= 0.0 {
                    continue;
                }
                let ratio = small / big;
                if ratio < 1.0 && best.map_or(true, |b| ratio < b.3) {
                    best = Some((i, j, swapped, ratio));
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::Degenerate("no basis pair with a strict slope-dominance margin".into())
    })
}

/// Lemma-style constructive sequence: x_k >= 0 with |value(x_k)| <= 1/k,
/// |f'(x_k) - pi| <= 1/k, and g'(x_k) -> theta with |theta| < pi.
pub fn pi_sequence(
    f: &CauchySolution,
    g: &CauchySolution,
    n_terms: usize,
) -> Result<PiSequence> {
    if f.basis != g.basis {
        return Err(Error::BasisMismatch("pi_sequence inputs on different bases".into()));
    }
    if f.basis.len() < 2 {
        return Err(Error::Precondition("pi_sequence needs a basis with >= 2 entries".into()));
    }
    if equivalent(f, g, 1e-9)? {
        return Err(Error::Precondition("pi_sequence requires non-equivalent solutions".into()));
    }
    let (i, j, swapped, _ratio) = pick_pair(f, g)?;
    let (fp, gp) = if swapped { (g, f) } else { (f, g) };
    let fv = fp.values_f64();
    let rs = fp.basis.values();
    let (ri, rj) = (rs[i], rs[j]);
    let (fi, fj) = (fv[i], fv[j]);
    let det = rj * fi - ri * fj; // = r_i r_j (f_i/r_i - f_j/r_j)
    let n_basis = fp.basis.len();
    let mut points = Vec::with_capacity(n_terms);
    for k in 1..=n_terms {
        let eps = 0.5 / k as f64;
        // solve q*r_i - r*r_j = eps, q*f_i - r*f_j = pi
        let q_real = (-eps * fj + rj * PI) / det;
        let r_real = (ri * PI - fi * eps) / det;
        let mut found = None;
        let mut max_den: i64 = 16 * k as i64;
        while max_den < (1 << 50) {
            let qh = best_rational(q_real, max_den);
            let rh = best_rational(r_real, max_den);
            let x = element(i, j, &qh, &rh, n_basis);
            let value = x.value(&fp.basis);
            let fval = fp.evaluate(&x)?;
            if value >= 0.0 && value <= 1.0 / k as f64 && (fval - PI).abs() <= 1.0 / k as f64 {
                found = Some(x);
                break;
            }
            max_den *= 4;
        }
        let x = found.ok_or_else(|| {
            Error::Numeric(format!("pi_sequence: no admissible rational pair at term {k}"))
        })?;
        points.push(x);
    }
    let theta = PI * (slope_diff(gp, i, j) / slope_diff(fp, i, j));
    Ok(PiSequence { points, swapped, theta })
}

fn element(i: usize, j: usize, q: &Rat, r: &Rat, n: usize) -> ModuleElement {
    let mut coords = vec![Rat::zero(); n];
    coords[i] = q.clone();
    coords[j] = -r.clone();
    ModuleElement::from_coords(coords)
}

/// Finds a module point whose (value, f-value) pair lies within eps of
/// the target, witnessing graph density. Returns `None` when the
/// denominator budget is exhausted.
pub fn dense_graph_witness(
    f: &CauchySolution,
    target: (f64, f64),
    eps: f64,
    max_denominator: i64,
) -> Result<Option<ModuleElement>> {
    if f.is_linear(1e-9) {
        return Err(Error::Precondition(
            "dense_graph_witness requires a non-linear solution (a linear graph is a line)".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let n = f.basis.len();
    // basis pair with the largest slope difference
    let mut best = (0usize, 1usize, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let d = slope_diff(f, i, j).abs();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, _) = best;
    let fv = f.values_f64();
    let rs = f.basis.values();
    let (ri, rj, fi, fj) = (rs[i], rs[j], fv[i], fv[j]);
    let det = rj * fi - ri * fj;
    let (t1, t2) = target;
    let q_real = (-t1 * fj + rj * t2) / det;
    let r_real = (ri * t2 - fi * t1) / det;
    let mut den: i64 = 1;
    loop {
        let qh = best_rational(q_real, den);
        let rh = best_rational(r_real, den);
        let x = element(i, j, &qh, &rh, n);
        let value = x.value(&f.basis);
        let fval = f.evaluate(&x)?;
        if (value - t1).abs() < eps && (fval - t2).abs() < eps {
            return Ok(Some(x));
        }
        if den >= max_denominator {
            return Ok(None);
        }
        den = (den * 4).min(max_denominator);
    }
}
