//! Solutions of Cauchy's functional equation `f(x+y) = f(x) + f(y)`
//! restricted to a finitely generated rational submodule of the reals.
//!
//! A `ModuleBasis` declares finitely many positive reals asserted to be
//! linearly independent over the rationals; this finite truncation
//! stands in for a Hamel basis, which is a modeling assumption and is
//! documented as such. A solution is determined by its values on the
//! basis and extended by rational linearity.

pub mod approx;
pub mod sequence;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::exact::{parse_rat, rat_to_f64};
use crate::linalg::mat::Mode;
use crate::Rat;

pub use sequence::{dense_graph_witness, pi_sequence, PiSequence};

/// 40-digit decimal expansions of the stock basis constants.
pub const DEC_ONE: &str = "1";
pub const DEC_SQRT2: &str = "1.4142135623730950488016887242096980785697";
pub const DEC_SQRT3: &str = "1.7320508075688772935274463415058723669428";
pub const DEC_PI: &str = "3.1415926535897932384626433832795028841972";

/// Minimum number of significant digits for an irrational basis constant.
pub const MIN_PRECISION: usize = 30;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BasisEntryJson", into = "BasisEntryJson")]
pub struct BasisEntry {
    pub label: String,
    /// Decimal expansion (or exact rational "p/q" / integer string).
    pub decimal: String,
    /// Declared number of valid significant digits.
    pub precision: usize,
    /// Double rounding of the value, used by all float-mode arithmetic.
    pub value: f64,
    /// Present when the entry is an exact rational.
    pub rational: Option<Rat>,
}

#[derive(Serialize, Deserialize)]
struct BasisEntryJson {
    label: String,
    value: String,
    precision: usize,
}

impl From<BasisEntry> for BasisEntryJson {
    fn from(e: BasisEntry) -> Self {
        BasisEntryJson { label: e.label, value: e.decimal, precision: e.precision }
    }
}

impl TryFrom<BasisEntryJson> for BasisEntry {
    type Error = Error;
    fn try_from(j: BasisEntryJson) -> Result<BasisEntry> {
        BasisEntry::new(&j.label, &j.value, j.precision)
    }
}

impl BasisEntry {
    pub fn new(label: &str, decimal: &str, precision: usize) -> Result<Self> {
        // entries without a fractional tail, or written as p/q, are exact
        let rational = if decimal.contains('/') || !decimal.contains('.') {
            Some(parse_rat(decimal)?)
        } else {
            None
        };
        let value = match &rational {
            Some(r) => rat_to_f64(r),
            None => {
                let digits = decimal.chars().filter(|c| c.is_ascii_digit()).count();
                if digits < precision {
                    return Err(Error::Domain(format!(
                        "basis entry {label:?} declares {precision} digits but provides {digits}"
                    )));
                }
                decimal
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad basis value {decimal:?}")))?
            }
        };
        if !(value > 0.0) {
            return Err(Error::Domain(format!("basis value for {label:?} must be positive")));
        }
        if rational.is_none() && precision < MIN_PRECISION {
            return Err(Error::Domain(format!(
                "basis entry {label:?}: precision {precision} below the required {MIN_PRECISION}"
            )));
        }
        Ok(BasisEntry { label: label.to_string(), decimal: decimal.to_string(), precision, value, rational })
    }
}

impl PartialEq for BasisEntry {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.decimal == other.decimal
    }
}

/// Finite set of declared basis reals. Rational linear independence is
/// asserted, not proven.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleBasis {
    pub entries: Vec<BasisEntry>,
}

impl ModuleBasis {
    pub fn new(entries: Vec<BasisEntry>) -> Result<Self> {
        let mut labels: Vec<&str> = entries.iter().map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != entries.len() {
            return Err(Error::Domain("duplicate basis labels".into()));
        }
        Ok(ModuleBasis { entries })
    }

    /// The stock basis {1, sqrt2, sqrt3}.
    pub fn standard() -> Self {
        ModuleBasis::new(vec![
            BasisEntry::new("1", DEC_ONE, 40).unwrap(),
            BasisEntry::new("sqrt2", DEC_SQRT2, 40).unwrap(),
            BasisEntry::new("sqrt3", DEC_SQRT3, 40).unwrap(),
        ])
        .unwrap()
    }

    /// Single-generator rational basis {1}, for exact-mode work.
    pub fn rational_unit() -> Self {
        ModuleBasis::new(vec![BasisEntry::new("1", DEC_ONE, 40).unwrap()]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn all_rational(&self) -> bool {
        self.entries.iter().all(|e| e.rational.is_some())
    }
}

/// Element of the module: exact rational coordinates over the basis.
/// Serialized as a list of "p/q" strings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleElement {
    pub coords: Vec<Rat>,
}

impl Serialize for ModuleElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        strs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModuleElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let strs = Vec::<String>::deserialize(d)?;
        let coords = strs
            .iter()
            .map(|s| parse_rat(s).map_err(|e| D::Error::custom(e.to_string())))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ModuleElement { coords })
    }
}

impl ModuleElement {
    pub fn zero(n: usize) -> Self {
        ModuleElement { coords: vec![Rat::zero(); n] }
    }

    pub fn unit(i: usize, n: usize) -> Self {
        let mut c = vec![Rat::zero(); n];
        c[i] = Rat::from(num_bigint::BigInt::from(1));
        ModuleElement { coords: c }
    }

    pub fn from_coords(coords: Vec<Rat>) -> Self {
        ModuleElement { coords }
    }

    pub fn add(&self, other: &ModuleElement) -> ModuleElement {
        ModuleElement {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, q: &Rat) -> ModuleElement {
        ModuleElement { coords: self.coords.iter().map(|c| c * q).collect() }
    }

    pub fn neg(&self) -> ModuleElement {
        ModuleElement { coords: self.coords.iter().map(|c| -c).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Real value sum c_i r_i at double precision.
    pub fn value(&self, basis: &ModuleBasis) -> f64 {
        self.coords.iter().zip(&basis.entries).map(|(c, e)| rat_to_f64(c) * e.value).sum()
    }

    /// Exact value, defined when every basis entry is rational.
    pub fn value_exact(&self, basis: &ModuleBasis) -> Result<Rat> {
        let mut acc = Rat::zero();
        for (c, e) in self.coords.iter().zip(&basis.entries) {
            let r = e.rational.as_ref().ok_or_else(|| {
                Error::Inexact(format!("basis entry {:?} is not rational", e.label))
            })?;
            acc += c * r;
        }
        Ok(acc)
    }
}

/// Mode-tagged values of a Cauchy solution on the basis.
#[derive(Clone, Debug, PartialEq)]
pub enum SolutionValues {
    Exact(Vec<Rat>),
    Real(Vec<f64>),
}

/// An additive function on the module, determined by its basis values.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySolution {
    pub basis: ModuleBasis,
    pub values: SolutionValues,
}

impl CauchySolution {
    pub fn real(basis: ModuleBasis, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::Dimension("one value per basis entry required".into()));
        }
        Ok(CauchySolution { basis, values: SolutionValues::Real(values) })
    }

    pub fn exact(basis: ModuleBasis, values: Vec<Rat>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::Dimension("one value per basis entry required".into()));
        }
        Ok(CauchySolution { basis, values: SolutionValues::Exact(values) })
    }

    pub fn zero(basis: ModuleBasis) -> Self {
        let n = basis.len();
        CauchySolution { basis, values: SolutionValues::Real(vec![0.0; n]) }
    }

    /// Linear solution x -> c*x on the given basis.
    pub fn linear(basis: ModuleBasis, c: f64) -> Self {
        let vals = basis.values().iter().map(|r| c * r).collect();
        CauchySolution { basis, values: SolutionValues::Real(vals) }
    }

    pub fn mode(&self) -> Mode {
        match self.values {
            SolutionValues::Exact(_) => Mode::Exact,
            SolutionValues::Real(_) => Mode::Real,
        }
    }

    pub fn values_f64(&self) -> Vec<f64> {
        match &self.values {
            SolutionValues::Exact(v) => v.iter().map(rat_to_f64).collect(),
            SolutionValues::Real(v) => v.clone(),
        }
    }

    fn check_basis(&self, x: &ModuleElement) -> Result<()> {
        if x.coords.len() != self.basis.len() {
            return Err(Error::BasisMismatch(format!(
                "element has {} coordinates, basis has {} entries",
                x.coords.len(),
                self.basis.len()
            )));
        }
        Ok(())
    }

    /// Sum of c_i f(r_i); additive in x by construction.
    pub fn evaluate(&self, x: &ModuleElement) -> Result<f64> {
        self.check_basis(x)?;
        Ok(x.coords
            .iter()
            .zip(self.values_f64())
            .map(|(c, v)| rat_to_f64(c) * v)
            .sum())
    }

    /// Exact evaluation; requires exact-mode values.
    pub fn evaluate_exact(&self, x: &ModuleElement) -> Result<Rat> {
        self.check_basis(x)?;
        match &self.values {
            SolutionValues::Exact(vals) => {
                Ok(x.coords.iter().zip(vals).fold(Rat::zero(), |acc, (c, v)| acc + c * v))
            }
            SolutionValues::Real(_) => {
                Err(Error::Mode("exact evaluation of a real-mode solution".into()))
            }
        }
    }

    /// Pointwise difference; shared basis required. Mixed modes drop to real.
    pub fn sub(&self, other: &CauchySolution) -> Result<CauchySolution> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch("solutions live on different bases".into()));
        }
        match (&self.values, &other.values) {
            (SolutionValues::Exact(a), SolutionValues::Exact(b)) => CauchySolution::exact(
                self.basis.clone(),
                a.iter().zip(b).map(|(x, y)| x - y).collect(),
            ),
            _ => CauchySolution::real(
                self.basis.clone(),
                self.values_f64().iter().zip(other.values_f64()).map(|(x, y)| x - y).collect(),
            ),
        }
    }

    pub fn neg(&self) -> CauchySolution {
        match &self.values {
            SolutionValues::Exact(v) => CauchySolution {
                basis: self.basis.clone(),
                values: SolutionValues::Exact(v.iter().map(|x| -x).collect()),
            },
            SolutionValues::Real(v) => CauchySolution {
                basis: self.basis.clone(),
                values: SolutionValues::Real(v.iter().map(|x| -x).collect()),
            },
        }
    }

    /// True iff f(r_i) r_j == f(r_j) r_i for all pairs, within tol
    /// relative to max(|r_i|, |r_j|).
    ///
    /// With tol = 0, an exact-mode solution on an all-rational basis is
    /// tested in exact arithmetic.
    pub fn is_linear(&self, tol: f64) -> bool {
        if tol == 0.0 && self.basis.all_rational() {
            if let SolutionValues::Exact(vals) = &self.values {
                let rs: Vec<&Rat> =
                    self.basis.entries.iter().map(|e| e.rational.as_ref().unwrap()).collect();
                for i in 0..vals.len() {
                    for j in i + 1..vals.len() {
                        if (&vals[i] * rs[j]) != (&vals[j] * rs[i]) {
                            return false;
                        }
                    }
                }
                return true;
            }
        }
        let vals = self.values_f64();
        let rs = self.basis.values();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                let cross = (vals[i] * rs[j] - vals[j] * rs[i]).abs();
                if cross > tol * rs[i].abs().max(rs[j].abs()) {
                    return false;
                }
            }
        }
        true
    }

    /// Best-fit slope f(r_i)/r_i (used for reporting; exact only for
    /// linear solutions).
    pub fn slope(&self) -> f64 {
        let vals = self.values_f64();
        let rs = self.basis.values();
        let num: f64 = vals.iter().zip(&rs).map(|(v, r)| v * r).sum();
        let den: f64 = rs.iter().map(|r| r * r).sum();
        num / den
    }

    pub fn is_zero(&self) -> bool {
        match &self.values {
            SolutionValues::Exact(v) => v.iter().all(|x| x.is_zero()),
            SolutionValues::Real(v) => v.iter().all(|x| *x == 0.0),
        }
    }
}

/// Equivalence of solutions: the difference is linear.
pub fn equivalent(f: &CauchySolution, g: &CauchySolution, tol: f64) -> Result<bool> {
    Ok(f.sub(g)?.is_linear(tol))
}

/// Reduces v into the half-open interval [-a, a).
pub fn mod_interval(v: f64, a: f64) -> f64 {
    let w = 2.0 * a;
    let r = v - w * ((v + a) / w).floor();
    // guard the upper boundary against rounding
    if r >= a {
        r - w
    } else {
        r
    }
}

/// Lifts a mod-interval solution to an additive function on the module:
/// the representative in [-a, a) is taken as the real value on each
/// basis element and extended by rational linearity. Lifts are not
/// unique; this constructor pins the representative choice.
pub fn lift(values_mod: &[f64], a: f64, basis: &ModuleBasis) -> Result<CauchySolution> {
    if !(a > 0.0) {
        return Err(Error::Precondition("lift interval bound must be positive".into()));
    }
    if values_mod.len() != basis.len() {
        return Err(Error::Dimension("one value per basis entry required".into()));
    }
    let vals = values_mod.iter().map(|&v| mod_interval(v, a)).collect();
    CauchySolution::real(basis.clone(), vals)
}

/// Representatives of the solution's basis values mod [-a, a).
pub fn reduce(f: &CauchySolution, a: f64) -> Vec<f64> {
    f.values_f64().iter().map(|&v| mod_interval(v, a)).collect()
}

// --- JSON wire format {basis, values, mode} ---

#[derive(Serialize, Deserialize)]
struct CauchySolutionJson {
    basis: ModuleBasis,
    values: Vec<serde_json::Value>,
    mode: Mode,
}

impl Serialize for CauchySolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let values = match &self.values {
            SolutionValues::Exact(v) => {
                v.iter().map(|r| serde_json::Value::String(r.to_string())).collect()
            }
            SolutionValues::Real(v) => v
                .iter()
                .map(|&x| serde_json::json!(x))
                .collect(),
        };
        CauchySolutionJson { basis: self.basis.clone(), values, mode: self.mode() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CauchySolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let j = CauchySolutionJson::deserialize(d)?;
        match j.mode {
            Mode::Exact => {
                let vals = j
                    .values
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => {
                            parse_rat(s).map_err(|e| D::Error::custom(e.to_string()))
                        }
                        serde_json::Value::Number(n) => n
                            .to_string()
                            .parse::<i64>()
                            .map(|i| Rat::from(num_bigint::BigInt::from(i)))
                            .map_err(|_| D::Error::custom("non-integer exact value")),
                        _ => Err(D::Error::custom("bad exact value")),
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                CauchySolution::exact(j.basis, vals).map_err(|e| D::Error::custom(e.to_string()))
            }
            Mode::Real => {
                let vals = j
                    .values
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| D::Error::custom("bad real value")))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                CauchySolution::real(j.basis, vals).map_err(|e| D::Error::custom(e.to_string()))
            }
        }
    }
}

/// Convenience: |f(x)| as exact rational magnitude comparison helper.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

/// Rational from integer pair, re-exported for test ergonomics.
pub fn q(p: i64, d: i64) -> Rat {
    Rat::new(p.into(), d.into())
}

pub fn qi(p: i64) -> Rat {
    Rat::from(num_bigint::BigInt::from(p))
}

pub fn rat_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis12() -> ModuleBasis {
        ModuleBasis::new(vec![
            BasisEntry::new("1", DEC_ONE, 40).unwrap(),
            BasisEntry::new("sqrt2", DEC_SQRT2, 40).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn evaluate_linear_extension() {
        // f(r1)=1 on basis {1}: f(3/2) = 3/2
        let b = ModuleBasis::rational_unit();
        let f = CauchySolution::real(b, vec![1.0]).unwrap();
        let x = ModuleElement::from_coords(vec![q(3, 2)]);
        assert_eq!(f.evaluate(&x).unwrap(), 1.5);
    }

    #[test]
    fn evaluate_kills_sqrt2_direction() {
        let f = CauchySolution::real(basis12(), vec![1.0, 0.0]).unwrap();
        let x = ModuleElement::from_coords(vec![qi(2), qi(3)]);
        assert_eq!(f.evaluate(&x).unwrap(), 2.0);
        let y = ModuleElement::from_coords(vec![qi(0), q(1, 3)]);
        assert_eq!(f.evaluate(&y).unwrap(), 0.0);
    }

    #[test]
    fn is_linear_examples() {
        let b = basis12();
        let lin = CauchySolution::real(b.clone(), vec![2.0, 2.0 * b.entries[1].value]).unwrap();
        assert!(lin.is_linear(1e-9));
        let nonlin = CauchySolution::real(b.clone(), vec![1.0, 0.0]).unwrap();
        assert!(!nonlin.is_linear(1e-9));
        let single = CauchySolution::real(ModuleBasis::rational_unit(), vec![5.0]).unwrap();
        assert!(single.is_linear(0.0));
    }

    #[test]
    fn equivalent_examples() {
        let b = basis12();
        let f = CauchySolution::real(b.clone(), vec![1.0, 0.0]).unwrap();
        assert!(equivalent(&f, &f, 1e-9).unwrap());
        let g =
            CauchySolution::real(b.clone(), vec![3.0, 2.0 * b.entries[1].value]).unwrap();
        // f - g = (-2, -2*sqrt2), which is linear with slope -2
        assert!(equivalent(&f, &g, 1e-9).unwrap());
        let zero = CauchySolution::zero(b.clone());
        assert!(!equivalent(&f, &zero, 1e-9).unwrap());
    }

    #[test]
    fn lift_reduce_identity_on_basis() {
        let b = basis12();
        let a = std::f64::consts::PI;
        let vals = [a / 2.0, -a / 3.0];
        let f = lift(&vals, a, &b).unwrap();
        let red = reduce(&f, a);
        assert!(red.iter().zip(&vals).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn lift_zero_is_zero() {
        let b = basis12();
        let f = lift(&[0.0, 0.0], std::f64::consts::PI, &b).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn lift_linearity_transfer() {
        let b = basis12();
        let a = std::f64::consts::PI;
        // c*r_i with |c*r_i| < a lifts to the linear solution
        let c = 0.7;
        let vals: Vec<f64> = b.values().iter().map(|r| c * r).collect();
        let f = lift(&vals, a, &b).unwrap();
        assert!(f.is_linear(1e-9));
        // a witnessed non-linear mod solution lifts non-linear
        let g = lift(&[1.0, 0.0], a, &b).unwrap();
        assert!(!g.is_linear(1e-9));
    }

    #[test]
    fn mod_interval_half_open() {
        let a = 1.0;
        assert_eq!(mod_interval(1.0, a), -1.0);
        assert_eq!(mod_interval(-1.0, a), -1.0);
        assert_eq!(mod_interval(0.5, a), 0.5);
        assert_eq!(mod_interval(2.5, a), 0.5);
        assert_eq!(mod_interval(-2.5, a), -0.5);
    }

    #[test]
    fn basis_mismatch_reported() {
        let f = CauchySolution::real(basis12(), vec![1.0, 2.0]).unwrap();
        let x = ModuleElement::from_coords(vec![qi(1)]);
        assert!(matches!(f.evaluate(&x), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn precision_enforced() {
        assert!(BasisEntry::new("bad", "1.4142", 30).is_err());
        // exact rationals are exempt
        assert!(BasisEntry::new("half", "1/2", 0).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let f = CauchySolution::real(basis12(), vec![0.25, -1.5]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let back: CauchySolution = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        let g = CauchySolution::exact(ModuleBasis::rational_unit(), vec![q(2, 3)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("2/3"));
        let back: CauchySolution = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
