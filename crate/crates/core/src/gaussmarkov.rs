//! Covariance kernels of centered processes and the Markov-property
//! criterion R(s,t) R(t,t)^-1 R(t,u) = R(s,u), which reduces Markov
//! kernels to matrix semigroups via g(x) = R(e^-x, 1).

use serde::{Deserialize, Serialize};

use crate::cauchy::{ModuleBasis, ModuleElement};
use crate::error::{Error, Result};
use crate::linalg::float::{frob, inverse};
use crate::linalg::mat::{FMat, Matrix};
use crate::semigroup::{SampleSet, VerifyReport};

/// Matrix covariance function R(s, t) on (0, inf)^2.
pub struct CovarianceModel {
    pub dim: usize,
    /// Self-similarity exponent, when the kernel has one.
    pub hurst: Option<f64>,
    /// True for tabulated kernels evaluated by interpolation.
    pub approximate: bool,
    eval: Box<dyn Fn(f64, f64) -> FMat + Send + Sync>,
}

impl CovarianceModel {
    pub fn new(
        dim: usize,
        hurst: Option<f64>,
        eval: Box<dyn Fn(f64, f64) -> FMat + Send + Sync>,
    ) -> Result<Self> {
        if dim == 0 || dim > crate::MAX_DIM {
            return Err(Error::Dimension(format!("covariance dimension {dim} out of range")));
        }
        if let Some(h) = hurst {
            if !(h > 0.0) {
                return Err(Error::Domain("Hurst exponent must be positive".into()));
            }
        }
        Ok(CovarianceModel { dim, hurst, approximate: false, eval })
    }

    pub fn evaluate(&self, s: f64, t: f64) -> Result<FMat> {
        if !(s > 0.0) || !(t > 0.0) {
            return Err(Error::Domain("covariance arguments must be positive".into()));
        }
        let r = (self.eval)(s, t);
        if r.rows() != self.dim || r.cols() != self.dim {
            return Err(Error::Dimension("kernel returned a wrongly shaped matrix".into()));
        }
        Ok(r)
    }

    /// R(s,t) = R(t,s)^T on the given argument pairs.
    pub fn symmetry_check(&self, pairs: &[(f64, f64)], tol: f64) -> Result<VerifyReport> {
        let mut report = VerifyReport::new();
        for (i, &(s, t)) in pairs.iter().enumerate() {
            let a = self.evaluate(s, t)?;
            let b = self.evaluate(t, s)?.transpose();
            report.record(tol, "symmetry", vec![i], frob(&(&a - &b)));
        }
        Ok(report)
    }
}

/// Scalar Brownian-motion kernel min(s, t).
pub fn min_kernel() -> CovarianceModel {
    CovarianceModel {
        dim: 1,
        hurst: Some(0.5),
        approximate: false,
        eval: Box::new(|s, t| FMat::from_rows(vec![vec![s.min(t)]])),
    }
}

/// Scalar fractional kernel (s^2H + t^2H - |s-t|^2H) / 2. Markov only
/// at H = 1/2, where it coincides with min(s, t).
pub fn fractional_kernel(h: f64) -> Result<CovarianceModel> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain("fractional kernel needs 0 < H < 1".into()));
    }
    CovarianceModel::new(
        1,
        Some(h),
        Box::new(move |s, t| {
            let e = 2.0 * h;
            FMat::from_rows(vec![vec![
                0.5 * (s.powf(e) + t.powf(e) - (s - t).abs().powf(e)),
            ]])
        }),
    )
}

/// Scalar kernel tabulated on a grid, evaluated by bilinear
/// interpolation; flagged approximate.
pub fn table_kernel(points: Vec<f64>, values: Vec<Vec<f64>>) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Precondition("table kernel needs at least a 2x2 grid".into()));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) || points[0] <= 0.0 {
        return Err(Error::Precondition("grid points must be positive and increasing".into()));
    }
    if values.len() != n || values.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("table values must form a square grid".into()));
    }
    let seg = move |x: f64, pts: &[f64]| -> (usize, f64) {
        // clamp outside the grid to the boundary cells
        let k = pts.partition_point(|&p| p <= x).clamp(1, pts.len() - 1) - 1;
        let w = ((x - pts[k]) / (pts[k + 1] - pts[k])).clamp(0.0, 1.0);
        (k, w)
    };
    let mut model = CovarianceModel::new(
        1,
        None,
        Box::new(move |s, t| {
            let (i, a) = seg(s, &points);
            let (j, b) = seg(t, &points);
            let v = (1.0 - a) * (1.0 - b) * values[i][j]
                + a * (1.0 - b) * values[i + 1][j]
                + (1.0 - a) * b * values[i][j + 1]
                + a * b * values[i + 1][j + 1];
            FMat::from_rows(vec![vec![v]])
        }),
    )?;
    model.approximate = true;
    Ok(model)
}

/// On-disk kernel description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSpec {
    /// "min", "fractional", or "table".
    pub kind: String,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<TableGrid>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableGrid {
    pub points: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn from_kernel_spec(spec: &KernelSpec) -> Result<CovarianceModel> {
    match spec.kind.as_str() {
        "min" => Ok(min_kernel()),
        "fractional" => {
            let h = spec
                .h
                .ok_or_else(|| Error::Precondition("fractional kernel needs H".into()))?;
            fractional_kernel(h)
        }
        "table" => {
            let g = spec
                .grid
                .as_ref()
                .ok_or_else(|| Error::Precondition("table kernel needs a grid".into()))?;
            table_kernel(g.points.clone(), g.values.clone())
        }
        other => Err(Error::Precondition(format!("unknown kernel kind {other:?}"))),
    }
}

/// Markov criterion on ordered triples: after sorting each triple to
/// s <= t <= u, residual |R(s,t) R(t,t)^-1 R(t,u) - R(s,u)|.
pub fn markov_check(
    model: &CovarianceModel,
    triples: &[(f64, f64, f64)],
    tol: f64,
) -> Result<VerifyReport> {
    let mut report = VerifyReport::new();
    for (i, &(a, b, c)) in triples.iter().enumerate() {
        let mut v = [a, b, c];
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let [s, t, u] = v;
        let rtt = model.evaluate(t, t)?;
        let rtt_inv = inverse(&rtt)
            .map_err(|_| Error::Singular(format!("R(t,t) singular at t = {t}")))?;
        let lhs = model.evaluate(s, t)?.matmul(&rtt_inv).matmul(&model.evaluate(t, u)?);
        let rhs = model.evaluate(s, u)?;
        report.record(tol, "markov", vec![i], frob(&(&lhs - &rhs)));
    }
    Ok(report)
}

/// Self-similarity R(a s, a t) = a^2H R(s, t) over the given pairs and
/// scales.
pub fn self_similarity_check(
    model: &CovarianceModel,
    h: f64,
    pairs: &[(f64, f64)],
    scales: &[f64],
    tol: f64,
) -> Result<VerifyReport> {
    let mut report = VerifyReport::new();
    for (i, &(s, t)) in pairs.iter().enumerate() {
        for (k, &a) in scales.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::Domain("scales must be positive".into()));
            }
            let lhs = model.evaluate(a * s, a * t)?;
            let rhs = model.evaluate(s, t)?.scale(&a.powf(2.0 * h));
            report.record(tol, "self-similarity", vec![i, k], frob(&(&lhs - &rhs)));
        }
    }
    Ok(report)
}

/// Reduction to a semigroup sample set: g(x) = R(e^-value(x), 1).
/// Requires R(1,1) = id, so that g(0) is the identity.
pub fn to_semigroup(
    model: &CovarianceModel,
    basis: &ModuleBasis,
    points: &[ModuleElement],
) -> Result<SampleSet> {
    let r11 = model.evaluate(1.0, 1.0)?;
    if frob(&(&r11 - &FMat::identity(model.dim))) > 1e-12 {
        return Err(Error::Precondition(
            "reduction needs R(1,1) = id; normalize the kernel first".into(),
        ));
    }
    let mut pts: Vec<ModuleElement> = vec![ModuleElement::zero(basis.len())];
    for p in points {
        if p.value(basis) < 0.0 {
            return Err(Error::Domain("sample points must have non-negative value".into()));
        }
        if !p.is_zero() {
            pts.push(p.clone());
        }
    }
    let samples = pts
        .iter()
        .map(|p| Ok(Matrix::Real(model.evaluate((-p.value(basis)).exp(), 1.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let s = SampleSet { basis: basis.clone(), points: pts, samples, bound: None };
    s.validate()?;
    Ok(s)
}

/// Deterministic k^3 lattice of triples in (0, hi] for Markov checks.
pub fn triple_grid(k: usize, hi: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(k * k * k);
    for i in 1..=k {
        for j in 1..=k {
            for l in 1..=k {
                out.push((
                    hi * i as f64 / k as f64,
                    hi * j as f64 / k as f64,
                    hi * l as f64 / k as f64,
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::verify_semigroup;

    fn triples() -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for i in 1..=5 {
            for j in 1..=5 {
                for k in 1..=5 {
                    out.push((i as f64 / 5.0, j as f64 / 5.0, k as f64 / 5.0));
                }
            }
        }
        out
    }

    #[test]
    fn min_kernel_is_markov() {
        let m = min_kernel();
        let rep = markov_check(&m, &triples(), 1e-12).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
    }

    #[test]
    fn fractional_half_equals_min() {
        let f = fractional_kernel(0.5).unwrap();
        let m = min_kernel();
        for &(s, t) in &[(0.3, 0.9), (1.0, 2.5), (2.0, 0.1)] {
            let a = f.evaluate(s, t).unwrap();
            let b = m.evaluate(s, t).unwrap();
            assert!((a[(0, 0)] - b[(0, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn fractional_yields_non_markov() {
        let m = fractional_kernel(0.7).unwrap();
        let rep = markov_check(&m, &triples(), 1e-3).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_residual > 1e-3);
    }

    #[test]
    fn self_similarity_of_fractional() {
        let h = 0.7;
        let m = fractional_kernel(h).unwrap();
        let pairs = [(0.2, 0.9), (1.0, 3.0)];
        let scales = [0.5, 2.0, 7.0];
        let rep = self_similarity_check(&m, h, &pairs, &scales, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
        // wrong exponent fails
        let rep = self_similarity_check(&m, 0.5, &pairs, &scales, 1e-3).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn symmetry_holds() {
        let m = fractional_kernel(0.3).unwrap();
        let rep = m.symmetry_check(&[(0.4, 1.7), (2.0, 0.3)], 1e-12).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn min_reduction_is_semigroup() {
        let m = min_kernel();
        let basis = ModuleBasis::standard();
        let pts = crate::semigroup::default_grid(&basis, 4);
        let s = to_semigroup(&m, &basis, &pts).unwrap();
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
    }

    #[test]
    fn fractional_reduction_fails_law() {
        let m = fractional_kernel(0.7).unwrap();
        let basis = ModuleBasis::standard();
        let pts = crate::semigroup::default_grid(&basis, 4);
        let s = to_semigroup(&m, &basis, &pts).unwrap();
        let rep = verify_semigroup(&s, 1e-3).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn reduction_requires_normalized_kernel() {
        let m = CovarianceModel::new(
            1,
            None,
            Box::new(|s: f64, t: f64| FMat::from_rows(vec![vec![2.0 * s.min(t)]])),
        )
        .unwrap();
        let basis = ModuleBasis::standard();
        let pts = crate::semigroup::default_grid(&basis, 3);
        assert!(matches!(to_semigroup(&m, &basis, &pts), Err(Error::Precondition(_))));
    }

    #[test]
    fn table_kernel_tracks_min() {
        let pts: Vec<f64> = (1..=40).map(|k| k as f64 / 20.0).collect();
        let vals: Vec<Vec<f64>> =
            pts.iter().map(|&s| pts.iter().map(|&t| s.min(t)).collect()).collect();
        let m = table_kernel(pts.clone(), vals).unwrap();
        assert!(m.approximate);
        // exact at grid nodes, close in between
        assert!((m.evaluate(0.5, 1.0).unwrap()[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((m.evaluate(0.525, 1.0).unwrap()[(0, 0)] - 0.525).abs() < 1e-10);
    }

    #[test]
    fn kernel_spec_round_trip() {
        let spec = KernelSpec { kind: "fractional".into(), h: Some(0.7), grid: None };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"H\":0.7"));
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        let m = from_kernel_spec(&back).unwrap();
        assert_eq!(m.hurst, Some(0.7));
        assert!(from_kernel_spec(&KernelSpec { kind: "nope".into(), h: None, grid: None }).is_err());
    }
}
