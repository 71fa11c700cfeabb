//! Multiplicative Jordan-Chevalley decomposition A = D T with D
//! diagonalizable, T unipotent, D T = T D, pointwise over a sample set,
//! and extraction of the linear generators a_i, P_i.

use num_traits::Zero;

use crate::decomp::{ComponentType, PrimaryComponent};
use crate::error::{Error, Result};
use crate::linalg::cplx;
use crate::linalg::eig::eigenclusters;
use crate::linalg::exact::{charpoly, integer_roots, rat_i};
use crate::linalg::float::frob;
use crate::linalg::log::unipotent_log_f64;
use crate::linalg::mat::{CMat, FMat, Matrix, QMat};
use crate::semigroup::{verify_bound, BoundFunction, SampleSet, VerifyReport};
use crate::{Rat, C64};

/// Semisimple factor of an exact matrix with integer eigenvalues, via
/// exact generalized kernels.
fn semisimple_exact(a: &QMat) -> Result<QMat> {
    let n = a.rows();
    let cp = charpoly(a);
    let roots = integer_roots(&cp).ok_or_else(|| {
        Error::Inexact("exact Jordan-Chevalley needs integer eigenvalues".into())
    })?;
    let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(n);
    let mut diag: Vec<Rat> = Vec::with_capacity(n);
    for &(lam, mult) in &roots {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= rat_i(lam);
        }
        let basis = crate::linalg::exact::kernel(&shifted.pow(mult as u32));
        if basis.len() != mult {
            return Err(Error::Numeric(format!(
                "generalized kernel of eigenvalue {lam} has dimension {} instead of {mult}",
                basis.len()
            )));
        }
        for b in basis {
            cols.push(b);
            diag.push(rat_i(lam));
        }
    }
    let v = QMat::from_cols(cols);
    let v_inv = crate::linalg::exact::inverse(&v)?;
    let mut dm = QMat::zeros(n, n);
    for (i, d) in diag.iter().enumerate() {
        dm[(i, i)] = d.clone();
    }
    Ok(v.matmul(&dm).matmul(&v_inv))
}

fn semisimple_f64(a: &FMat) -> Result<FMat> {
    let n = a.rows();
    let clusters = eigenclusters(a, 1e-7)?;
    let scale = frob(a).max(1.0);
    for c in &clusters {
        if c.center.norm() <= 1e-10 * scale {
            return Err(Error::Singular("Jordan-Chevalley factor of a singular matrix".into()));
        }
    }
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut diag: Vec<C64> = Vec::with_capacity(n);
    for c in &clusters {
        for b in &c.basis {
            cols.push(b.clone());
            diag.push(c.center);
        }
    }
    let v = CMat::from_cols(cols);
    let v_inv = cplx::inverse(&v)?;
    let mut dm = CMat::zeros(n, n);
    for (i, d) in diag.iter().enumerate() {
        dm[(i, i)] = *d;
    }
    let dc = v.matmul(&dm).matmul(&v_inv);
    let imag = frob(&cplx::imag_part(&dc));
    if imag > 1e-8 * scale {
        return Err(Error::Numeric(format!(
            "semisimple factor of a real matrix came out complex (residual {imag:.3e})"
        )));
    }
    Ok(cplx::real_part(&dc))
}

/// Multiplicative Jordan-Chevalley decomposition of an invertible
/// matrix: A = D T = T D with D diagonalizable over C and T unipotent.
/// Exact inputs require integer eigenvalues and stay exact.
pub fn jc_multiplicative(a: &Matrix) -> Result<(Matrix, Matrix)> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension("Jordan-Chevalley needs a square matrix".into()));
    }
    if a.rows() == 0 {
        return Ok((a.clone(), a.clone()));
    }
    match a {
        Matrix::Exact(q) => {
            if crate::linalg::exact::det(q).is_zero() {
                return Err(Error::Singular("Jordan-Chevalley of a singular matrix".into()));
            }
            let d = semisimple_exact(q)?;
            let t = crate::linalg::exact::inverse(&d)?.matmul(q);
            if !t.is_unipotent() {
                return Err(Error::Numeric("unipotent factor failed its defining check".into()));
            }
            Ok((Matrix::Exact(d), Matrix::Exact(t)))
        }
        Matrix::Real(f) => {
            let d = semisimple_f64(f)?;
            let t = crate::linalg::float::inverse(&d)?.matmul(f);
            Ok((Matrix::Real(d), Matrix::Real(t)))
        }
    }
}

/// Pointwise Jordan-Chevalley data of a sample set, with the semigroup
/// identities of both factors verified on sampled pairs.
#[derive(Clone, Debug)]
pub struct JCResult {
    /// Semisimple factors, parallel to the sample points.
    pub d: Vec<Matrix>,
    /// Unipotent factors.
    pub t: Vec<Matrix>,
    /// Nilpotent logarithms N(x) = log T(x).
    pub n: Vec<FMat>,
    pub report: VerifyReport,
}

const JC_TOL: f64 = 1e-9;

/// Decomposes every sample and verifies D(x)D(y) = D(x+y),
/// T(x)T(y) = T(x+y), T(x)D(y) = D(y)T(x), and N(x)+N(y) = N(x+y).
pub fn semigroup_jc(s: &SampleSet) -> Result<JCResult> {
    s.validate()?;
    let mut d = Vec::with_capacity(s.len());
    let mut t = Vec::with_capacity(s.len());
    let mut n = Vec::with_capacity(s.len());
    for (i, g) in s.samples.iter().enumerate() {
        if s.value(i) == 0.0 && s.points[i].is_zero() {
            d.push(Matrix::identity(s.dim(), s.mode()));
            t.push(Matrix::identity(s.dim(), s.mode()));
            n.push(FMat::zeros(s.dim(), s.dim()));
            continue;
        }
        let (di, ti) = jc_multiplicative(g)?;
        n.push(unipotent_log_f64(&ti.to_real(), 1e-7)?);
        d.push(di);
        t.push(ti);
    }
    let mut report = VerifyReport::new();
    for i in 0..s.len() {
        for j in i..s.len() {
            let sum = s.points[i].add(&s.points[j]);
            if let Some(k) = s.index_of(&sum) {
                let dd = d[i].to_real().matmul(&d[j].to_real());
                report.record(JC_TOL, "d-product", vec![i, j, k], frob(&(&dd - &d[k].to_real())));
                let tt = t[i].to_real().matmul(&t[j].to_real());
                report.record(JC_TOL, "t-product", vec![i, j, k], frob(&(&tt - &t[k].to_real())));
                let nn = &n[i] + &n[j];
                report.record(JC_TOL, "n-additive", vec![i, j, k], frob(&(&nn - &n[k])));
            }
            let td = t[i].to_real().matmul(&d[j].to_real());
            let dt = d[j].to_real().matmul(&t[i].to_real());
            report.record(JC_TOL, "dt-commute", vec![i, j], frob(&(&td - &dt)));
        }
    }
    Ok(JCResult { d, t, n, report })
}

/// Linear generator data of one primary component.
#[derive(Clone, Debug)]
pub struct ComponentGenerators {
    /// Growth rate: log |lambda(x)| = a value(x).
    pub a: f64,
    /// Nilpotent generator in component coordinates: N(x) = P value(x).
    pub p: FMat,
    /// Principal argument of the track per sample point, in [0, pi]
    /// for second-type components, 0 for first type.
    pub nu_track: Vec<f64>,
    pub a_residual: f64,
    pub p_residual: f64,
}

/// Fits a_i and P_i per component; the bound assumption is what makes
/// the fits linear, so a residual above tolerance is reported as a
/// bound violation.
pub fn generators(
    s: &SampleSet,
    comps: &[PrimaryComponent],
    jc: &JCResult,
    f: &BoundFunction,
) -> Result<Vec<ComponentGenerators>> {
    let bound = verify_bound(s, f)?;
    if !bound.passed {
        return Err(Error::Precondition("norm bound fails on the samples".into()));
    }
    let pos = s.positive_indices();
    let mut out = Vec::with_capacity(comps.len());
    for comp in comps {
        // growth rate from the track moduli
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in &pos {
            let v = s.value(i);
            num += v * comp.track[i].norm().ln();
            den += v * v;
        }
        let a = num / den;
        let mut a_residual = 0.0f64;
        for &i in &pos {
            a_residual = a_residual.max((comp.track[i].norm().ln() - a * s.value(i)).abs());
        }
        if a_residual > 1e-8 {
            return Err(Error::Numeric(format!(
                "non-linear growth (residual {a_residual:.3e}): bound assumption violated or insufficient samples"
            )));
        }
        // nilpotent generator from the best-conditioned sample
        let u = FMat::from_cols(comp.basis.clone());
        let ut = u.transpose();
        let x0 = *pos
            .iter()
            .max_by(|&&i, &&j| s.value(i).partial_cmp(&s.value(j)).unwrap())
            .unwrap();
        let p = ut.matmul(&jc.n[x0]).matmul(&u).scale(&(1.0 / s.value(x0)));
        let mut p_residual = 0.0f64;
        for &i in &pos {
            let ni = ut.matmul(&jc.n[i]).matmul(&u);
            let dev = &ni - &p.scale(&s.value(i));
            p_residual = p_residual.max(frob(&dev) / (1.0 + frob(&p)) / (1.0 + s.value(i)));
        }
        if p_residual > 1e-8 {
            return Err(Error::Numeric(format!(
                "non-linear nilpotent part (residual {p_residual:.3e}): bound assumption violated or insufficient samples"
            )));
        }
        let nu_track = comp
            .track
            .iter()
            .map(|z| if comp.ctype == ComponentType::Second { z.im.atan2(z.re) } else { 0.0 })
            .collect();
        out.push(ComponentGenerators { a, p, nu_track, a_residual, p_residual });
    }
    Ok(out)
}

/// Exact semisimple-part oracle by polynomial interpolation: h(A) where
/// h matches each eigenvalue to the multiplicity of its factor. Used to
/// cross-check `jc_multiplicative`; the characteristic polynomial is
/// recomputed here by determinant sampling so the two routes stay
/// independent.
pub fn semisimple_interpolation_oracle(a: &QMat) -> Result<QMat> {
    let n = a.rows();
    // charpoly via determinant evaluation at n+1 points + Lagrange
    let mut evals: Vec<(Rat, Rat)> = Vec::with_capacity(n + 1);
    for k in 0..=n as i64 {
        let x = rat_i(k);
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] = &shifted[(i, i)] - &x;
        }
        // det(A - x id) = (-1)^n charpoly(x) with monic charpoly
        let d = crate::linalg::exact::det(&shifted);
        let sign = if n % 2 == 0 { rat_i(1) } else { rat_i(-1) };
        evals.push((x, d * sign));
    }
    let cp = lagrange_coeffs(&evals);
    let roots = integer_roots(&cp).ok_or_else(|| {
        Error::Inexact("oracle needs integer eigenvalues".into())
    })?;
    // Hermite conditions h = lam_i mod (X - lam_i)^{m_i} via CRT in Q[X]
    let h = hermite_semisimple_poly(&roots);
    Ok(poly_eval_matrix(&h, a))
}

/// Coefficients (lowest degree first) of the polynomial through the
/// given points.
fn lagrange_coeffs(points: &[(Rat, Rat)]) -> Vec<Rat> {
    let n = points.len();
    let mut acc = vec![Rat::zero(); n];
    for (i, (xi, yi)) in points.iter().enumerate() {
        // basis polynomial prod_{j != i} (X - x_j)/(x_i - x_j)
        let mut num = vec![rat_i(1)];
        let mut den = rat_i(1);
        for (j, (xj, _)) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            num = poly_mul(&num, &[-xj.clone(), rat_i(1)]);
            den *= xi - xj;
        }
        let scale = yi / den;
        for (k, c) in num.iter().enumerate() {
            acc[k] += c * &scale;
        }
    }
    acc
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_mod(a: &[Rat], m: &[Rat]) -> Vec<Rat> {
    // remainder of a by monic-normalized m
    let mut r: Vec<Rat> = a.to_vec();
    let dm = m.len() - 1;
    let lead = m[dm].clone();
    while r.len() > dm {
        let k = r.len() - 1;
        let c = &r[k] / &lead;
        for i in 0..=dm {
            let idx = k - dm + i;
            r[idx] = &r[idx] - &(&c * &m[i]);
        }
        while r.len() > 1 && r.last().map_or(false, Zero::is_zero) {
            r.pop();
        }
        if r.len() == k + 1 {
            // leading term did not cancel; numeric impossibility in exact arithmetic
            r.pop();
        }
    }
    r
}

/// Extended Euclid in Q[X]: returns (g, s, t) with s a + t b = g.
fn poly_xgcd(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>, Vec<Rat>) {
    let mut r0: Vec<Rat> = a.to_vec();
    let mut r1: Vec<Rat> = b.to_vec();
    let mut s0 = vec![rat_i(1)];
    let mut s1 = vec![Rat::zero()];
    let mut t0 = vec![Rat::zero()];
    let mut t1 = vec![rat_i(1)];
    while !(r1.len() == 1 && r1[0].is_zero()) {
        let (q, r) = poly_divmod(&r0, &r1);
        let s2 = poly_sub(&s0, &poly_mul(&q, &s1));
        let t2 = poly_sub(&t0, &poly_mul(&q, &t1));
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s2;
        t0 = t1;
        t1 = t2;
    }
    (r0, s0, t0)
}

fn poly_divmod(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let db = b.len() - 1;
    if a.len() <= db {
        return (vec![Rat::zero()], a.to_vec());
    }
    let mut r = a.to_vec();
    let mut q = vec![Rat::zero(); a.len() - db];
    let lead = b[db].clone();
    for k in (db..a.len()).rev() {
        let c = &r[k] / &lead;
        q[k - db] = c.clone();
        for i in 0..=db {
            r[k - db + i] = &r[k - db + i] - &(&c * &b[i]);
        }
    }
    r.truncate(db.max(1));
    while r.len() > 1 && r.last().map_or(false, Zero::is_zero) {
        r.pop();
    }
    (q, r)
}

fn poly_sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Rat::zero);
            let y = b.get(i).cloned().unwrap_or_else(Rat::zero);
            x - y
        })
        .collect()
}

/// Polynomial h with h = lam_i mod (X - lam_i)^{m_i}: the semisimple
/// part of any matrix with this spectrum is h(A).
fn hermite_semisimple_poly(roots: &[(i64, usize)]) -> Vec<Rat> {
    // CRT over the pairwise coprime moduli (X - lam_i)^{m_i}
    let moduli: Vec<Vec<Rat>> = roots
        .iter()
        .map(|&(lam, m)| {
            let mut p = vec![rat_i(1)];
            for _ in 0..m {
                p = poly_mul(&p, &[rat_i(-lam), rat_i(1)]);
            }
            p
        })
        .collect();
    let full = moduli.iter().fold(vec![rat_i(1)], |acc, m| poly_mul(&acc, m));
    let mut h = vec![Rat::zero()];
    for (i, &(lam, _)) in roots.iter().enumerate() {
        let (q, _) = poly_divmod(&full, &moduli[i]);
        // q is invertible mod moduli[i]; find the inverse with xgcd
        let (g, inv, _) = poly_xgcd(&poly_mod(&q, &moduli[i]), &moduli[i]);
        let g0 = g[0].clone();
        let inv: Vec<Rat> = inv.iter().map(|c| c / &g0).collect();
        // contribution lam * q * inv mod full
        let contrib = poly_mul(&poly_mul(&q, &inv), &[rat_i(lam)]);
        h = poly_mod(&poly_sub(&h, &poly_mul(&contrib, &[rat_i(-1)])), &full);
    }
    h
}

fn poly_eval_matrix(p: &[Rat], a: &QMat) -> QMat {
    let n = a.rows();
    let mut acc = QMat::zeros(n, n);
    for c in p.iter().rev() {
        acc = acc.matmul(a);
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::ModuleBasis;
    use crate::linalg::exact::rat;
    use crate::semigroup::{build_plain, default_grid};

    #[test]
    fn jc_diagonal_is_its_own_semisimple_part() {
        let a = Matrix::Exact(QMat::from_rows(vec![
            vec![rat_i(2), rat_i(0)],
            vec![rat_i(0), rat_i(3)],
        ]));
        let (d, t) = jc_multiplicative(&a).unwrap();
        assert_eq!(d, a);
        assert!(t.is_identity_exact());
    }

    #[test]
    fn jc_jordan_block() {
        // A = [[2,1],[0,2]]: D = 2 id, T = [[1,1/2],[0,1]]
        let a = Matrix::Exact(QMat::from_rows(vec![
            vec![rat_i(2), rat_i(1)],
            vec![rat_i(0), rat_i(2)],
        ]));
        let (d, t) = jc_multiplicative(&a).unwrap();
        let dq = d.as_exact().unwrap();
        assert_eq!(*dq, QMat::identity(2).scale(&rat_i(2)));
        let tq = t.as_exact().unwrap();
        assert_eq!(tq[(0, 1)], rat(1, 2));
        // DT = TD = A exactly
        assert_eq!(dq.matmul(tq), *a.as_exact().unwrap());
        assert_eq!(tq.matmul(dq), *a.as_exact().unwrap());
    }

    #[test]
    fn jc_scaled_rotation_is_semisimple() {
        let r = FMat::from_rows(vec![vec![0.0, 2.0], vec![-2.0, 0.0]]);
        let (d, t) = jc_multiplicative(&Matrix::Real(r.clone())).unwrap();
        assert!(frob(&(&d.to_real() - &r)) < 1e-9);
        assert!(frob(&(&t.to_real() - &FMat::identity(2))) < 1e-9);
    }

    #[test]
    fn jc_singular_rejected() {
        let a = Matrix::Exact(QMat::zeros(2, 2));
        assert!(matches!(jc_multiplicative(&a), Err(Error::Singular(_))));
    }

    #[test]
    fn oracle_matches_on_jordan_block() {
        let a = QMat::from_rows(vec![vec![rat_i(2), rat_i(1)], vec![rat_i(0), rat_i(2)]]);
        let d = semisimple_exact(&a).unwrap();
        let o = semisimple_interpolation_oracle(&a).unwrap();
        assert_eq!(d, o);
    }

    #[test]
    fn oracle_matches_on_mixed_spectrum() {
        let a = QMat::from_rows(vec![
            vec![rat_i(1), rat_i(2), rat_i(0)],
            vec![rat_i(0), rat_i(1), rat_i(1)],
            vec![rat_i(0), rat_i(0), rat_i(3)],
        ]);
        let d = semisimple_exact(&a).unwrap();
        let o = semisimple_interpolation_oracle(&a).unwrap();
        assert_eq!(d, o);
    }

    #[test]
    fn semigroup_jc_closed_form() {
        // g(x) = exp((lam id + N) x): D(x) = e^{lam x} id, T(x) = exp(Nx)
        let b = ModuleBasis::standard();
        let lam = 0.4;
        let gen = FMat::from_rows(vec![vec![lam, 1.0], vec![0.0, lam]]);
        let m = build_plain(Matrix::Real(gen), b.clone()).unwrap();
        let s = m.sample(&default_grid(&b, 4)).unwrap();
        let jc = semigroup_jc(&s).unwrap();
        assert!(jc.report.passed, "{:?}", jc.report.violations);
        for i in s.positive_indices() {
            let v = s.value(i);
            let expect_d = FMat::identity(2).scale(&(lam * v).exp());
            assert!(frob(&(&jc.d[i].to_real() - &expect_d)) < 1e-8);
            assert!((jc.n[i][(0, 1)] - v).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_jc_semisimple_has_trivial_t() {
        let b = ModuleBasis::standard();
        let m = build_plain(
            Matrix::Real(FMat::from_rows(vec![vec![0.5, 0.0], vec![0.0, -0.25]])),
            b.clone(),
        )
        .unwrap();
        let s = m.sample(&default_grid(&b, 3)).unwrap();
        let jc = semigroup_jc(&s).unwrap();
        assert!(jc.report.passed);
        for i in 0..s.len() {
            assert!(frob(&(&jc.t[i].to_real() - &FMat::identity(2))) < 1e-9);
        }
    }

    #[test]
    fn generators_scalar_model() {
        let b = ModuleBasis::standard();
        let m = build_plain(Matrix::Real(FMat::identity(1).scale(&3.0)), b.clone()).unwrap();
        let s = m.sample(&default_grid(&b, 3)).unwrap();
        let comps = crate::decomp::srpd(&s).unwrap();
        let jc = semigroup_jc(&s).unwrap();
        let f = BoundFunction::parse("exp(4*x)").unwrap();
        let gens = generators(&s, &comps, &jc, &f).unwrap();
        assert_eq!(gens.len(), 1);
        assert!((gens[0].a - 3.0).abs() < 1e-9);
        assert!(frob(&gens[0].p) < 1e-9);
    }

    #[test]
    fn generators_jordan_model() {
        let b = ModuleBasis::standard();
        let gen = FMat::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        let m = build_plain(Matrix::Real(gen), b.clone()).unwrap();
        let s = m.sample(&default_grid(&b, 4)).unwrap();
        let comps = crate::decomp::srpd(&s).unwrap();
        let jc = semigroup_jc(&s).unwrap();
        let f = BoundFunction::parse("exp(3*x)").unwrap();
        let gens = generators(&s, &comps, &jc, &f).unwrap();
        assert_eq!(gens.len(), 1);
        assert!((gens[0].a - 1.0).abs() < 1e-9);
        // P has the same invariants as [[0,1],[0,0]] in any orthonormal
        // basis of the component: rank 1, P^2 = 0, Frobenius norm 1
        assert!((frob(&gens[0].p) - 1.0).abs() < 1e-8);
        assert!(frob(&gens[0].p.matmul(&gens[0].p)) < 1e-8);
    }

    #[test]
    fn generators_reject_nonlinear_growth() {
        // samples of e^{x^2} are not of the bounded semigroup form
        let b = ModuleBasis::rational_unit();
        let points: Vec<_> = (0..=3)
            .map(|k| crate::cauchy::ModuleElement::unit(0, 1).scale(&rat(k, 1)))
            .collect();
        let samples = points
            .iter()
            .map(|p| {
                let v = p.value(&b);
                Matrix::Real(FMat::identity(1).scale(&(v * v).exp()))
            })
            .collect();
        let s = SampleSet { basis: b, points, samples, bound: None };
        let comps = crate::decomp::srpd(&s).unwrap();
        let jc = semigroup_jc(&s).unwrap();
        let f = BoundFunction::parse("exp(4*x)").unwrap();
        assert!(generators(&s, &comps, &jc, &f).is_err());
    }
}
