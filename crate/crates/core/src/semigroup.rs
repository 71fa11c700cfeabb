//! Generative models of matrix semigroups g(x+y) = g(x)g(y) indexed by
//! module elements: elementary blocks exp(Mx) and Q_d^nu(x)exp(Mx),
//! zero blocks, direct sums, and conjugations, plus sampling and
//! verification of the semigroup law and the norm bound.

use std::collections::HashMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::cauchy::{CauchySolution, ModuleBasis, ModuleElement};
use crate::error::{Error, Result};
use crate::linalg::exact::{rat, rat_to_f64};
use crate::linalg::exp::{mat_exp_f64, mat_exp_nilpotent, rotation_block};
use crate::linalg::float::{commutator_norm, frob, operator_norm};
use crate::linalg::mat::{FMat, Matrix, Mode, QMat};
use crate::Rat;

/// An angle with exactly rational cosine and sine, used as the unit for
/// exact-mode rotation blocks: angles are integer multiples of it, so
/// rotation matrices stay rational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalAngle {
    pub cos: String,
    pub sin: String,
    #[serde(skip)]
    c: Option<Rat>,
    #[serde(skip)]
    s: Option<Rat>,
}

impl RationalAngle {
    pub fn new(cos: Rat, sin: Rat) -> Result<Self> {
        if &cos * &cos + &sin * &sin != Rat::from(num_bigint::BigInt::from(1)) {
            return Err(Error::Domain("rational angle must satisfy cos^2 + sin^2 = 1".into()));
        }
        Ok(RationalAngle {
            cos: cos.to_string(),
            sin: sin.to_string(),
            c: Some(cos),
            s: Some(sin),
        })
    }

    /// The (3,4,5) angle: cos = 3/5, sin = 4/5.
    pub fn pythagorean() -> Self {
        RationalAngle::new(rat(3, 5), rat(4, 5)).unwrap()
    }

    pub fn cos_rat(&self) -> Rat {
        match &self.c {
            Some(c) => c.clone(),
            None => crate::linalg::exact::parse_rat(&self.cos).expect("bad stored cosine"),
        }
    }

    pub fn sin_rat(&self) -> Rat {
        match &self.s {
            Some(s) => s.clone(),
            None => crate::linalg::exact::parse_rat(&self.sin).expect("bad stored sine"),
        }
    }

    pub fn radians(&self) -> f64 {
        rat_to_f64(&self.sin_rat()).atan2(rat_to_f64(&self.cos_rat()))
    }

    /// Exact 2x2 rotation through k times the unit angle; negative k
    /// rotates the other way.
    pub fn rotation_pow(&self, k: i64) -> QMat {
        let (c, s) = (self.cos_rat(), self.sin_rat());
        let base = if k >= 0 {
            QMat::from_rows(vec![vec![c.clone(), s.clone()], vec![-s, c]])
        } else {
            QMat::from_rows(vec![vec![c.clone(), -s.clone()], vec![s, c]])
        };
        base.pow(k.unsigned_abs() as u32)
    }

    /// Block-diagonal rotation on an even dimension.
    pub fn rotation_block_pow(&self, dim: usize, k: i64) -> QMat {
        assert!(dim % 2 == 0);
        QMat::block_diag(&vec![self.rotation_pow(k); dim / 2])
    }
}

/// One diagonal block of a model.
#[derive(Clone, Debug)]
pub enum Block {
    /// exp(M * value(x)).
    Plain { gen: Matrix },
    /// Q_d^nu(x) * exp(M * value(x)); dim even, M commutes with the
    /// rotation realization. In real mode nu values are radians; in
    /// exact mode they are integer multiples of `unit`.
    Rotating { gen: Matrix, nu: CauchySolution, unit: Option<RationalAngle> },
    /// Identity at x = 0, the zero matrix for value(x) > 0.
    Zero { dim: usize },
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Plain { gen } => gen.rows(),
            Block::Rotating { gen, .. } => gen.rows(),
            Block::Zero { dim } => *dim,
        }
    }

    fn mode(&self, fallback: Mode) -> Mode {
        match self {
            Block::Plain { gen } | Block::Rotating { gen, .. } => gen.mode(),
            Block::Zero { .. } => fallback,
        }
    }
}

/// A semigroup model: block-diagonal in a declared basis, optionally
/// conjugated by a global invertible matrix.
#[derive(Clone, Debug)]
pub struct SemigroupModel {
    pub basis: ModuleBasis,
    pub blocks: Vec<Block>,
    pub mode: Mode,
    conjugator: Option<(Matrix, Matrix)>,
}

/// Tolerance for the generator-rotation commutation check.
const COMMUTE_TOL: f64 = 1e-10;

fn rotation_generator(dim: usize) -> FMat {
    let l = FMat::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    FMat::block_diag(&vec![l; dim / 2])
}

fn check_rotating_block(gen: &Matrix, nu: &CauchySolution) -> Result<()> {
    let d = gen.rows();
    if d % 2 != 0 {
        return Err(Error::Dimension("rotating block needs even dimension".into()));
    }
    if nu.basis.len() == 0 {
        return Err(Error::Precondition("rotation solution needs a basis".into()));
    }
    // commuting with every Q_d(theta) is equivalent to commuting with
    // the rotation generator diag(L, ..., L)
    let c = commutator_norm(&gen.to_real(), &rotation_generator(d));
    if c > COMMUTE_TOL * frob(&gen.to_real()).max(1.0) {
        return Err(Error::Precondition(format!(
            "generator does not commute with the rotation realization (residual {c:.3e})"
        )));
    }
    Ok(())
}

impl SemigroupModel {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    fn from_blocks(
        basis: ModuleBasis,
        blocks: Vec<Block>,
        mode: Mode,
        conjugator: Option<Matrix>,
    ) -> Result<Self> {
        for b in &blocks {
            if b.mode(mode) != mode {
                return Err(Error::Mode("blocks of mixed scalar modes".into()));
            }
        }
        let mut model = SemigroupModel { basis, blocks, mode, conjugator: None };
        if let Some(a) = conjugator {
            model = model.conjugated(a)?;
        }
        Ok(model)
    }

    /// Conjugated copy A g(x) A^{-1}; composes with any existing
    /// conjugator.
    pub fn conjugated(&self, a: Matrix) -> Result<SemigroupModel> {
        if a.rows() != self.dim() || a.cols() != self.dim() {
            return Err(Error::Dimension("conjugator shape does not match the model".into()));
        }
        if a.mode() != self.mode {
            return Err(Error::Mode("conjugator mode does not match the model".into()));
        }
        let a_inv = match &a {
            Matrix::Exact(m) => Matrix::Exact(crate::linalg::exact::inverse(m)?),
            Matrix::Real(m) => Matrix::Real(crate::linalg::float::inverse(m)?),
        };
        let conjugator = match &self.conjugator {
            None => (a.clone(), a_inv),
            Some((b, b_inv)) => (a.matmul(b)?, b_inv.matmul(&a_inv)?),
        };
        Ok(SemigroupModel { conjugator: Some(conjugator), ..self.clone() })
    }

    pub fn conjugator(&self) -> Option<&Matrix> {
        self.conjugator.as_ref().map(|(a, _)| a)
    }

    fn eval_block(&self, block: &Block, x: &ModuleElement) -> Result<Matrix> {
        let d = block.dim();
        match block {
            Block::Zero { .. } => Ok(if x.is_zero() {
                Matrix::identity(d, self.mode)
            } else {
                Matrix::zeros(d, d, self.mode)
            }),
            Block::Plain { gen } => self.eval_exponential(gen, x),
            Block::Rotating { gen, nu, unit } => {
                let e = self.eval_exponential(gen, x)?;
                let q = match self.mode {
                    Mode::Real => {
                        let theta = nu.evaluate(x)?;
                        Matrix::Real(rotation_block(d, theta))
                    }
                    Mode::Exact => {
                        let unit = unit.as_ref().ok_or_else(|| {
                            Error::Mode("exact rotating block needs a rational angle unit".into())
                        })?;
                        let mult = nu.evaluate_exact(x)?;
                        if !mult.is_integer() {
                            return Err(Error::Inexact(format!(
                                "angle multiple {mult} is not an integer at this point"
                            )));
                        }
                        let k = mult.to_integer().to_i64().ok_or_else(|| {
                            Error::Numeric("angle multiple out of range".into())
                        })?;
                        Matrix::Exact(unit.rotation_block_pow(d, k))
                    }
                };
                q.matmul(&e)
            }
        }
    }

    fn eval_exponential(&self, gen: &Matrix, x: &ModuleElement) -> Result<Matrix> {
        match (self.mode, gen) {
            (Mode::Real, Matrix::Real(m)) => {
                let v = x.value(&self.basis);
                Ok(Matrix::Real(mat_exp_f64(&m.scale(&v))?))
            }
            (Mode::Exact, Matrix::Exact(m)) => {
                let v = x.value_exact(&self.basis)?;
                Ok(Matrix::Exact(mat_exp_nilpotent(&m.scale(&v))?))
            }
            _ => Err(Error::Mode("generator mode does not match the model".into())),
        }
    }

    /// Evaluates g at a module element with value(x) >= 0.
    pub fn evaluate(&self, x: &ModuleElement) -> Result<Matrix> {
        if x.coords.len() != self.basis.len() {
            return Err(Error::BasisMismatch("point lives on a different basis".into()));
        }
        if x.value(&self.basis) < 0.0 {
            return Err(Error::Domain("semigroup domain is value(x) >= 0".into()));
        }
        let parts = self
            .blocks
            .iter()
            .map(|b| self.eval_block(b, x))
            .collect::<Result<Vec<_>>>()?;
        let g = match self.mode {
            Mode::Exact => Matrix::Exact(QMat::block_diag(
                &parts.iter().map(|p| p.as_exact().unwrap().clone()).collect::<Vec<_>>(),
            )),
            Mode::Real => Matrix::Real(FMat::block_diag(
                &parts.iter().map(Matrix::to_real).collect::<Vec<_>>(),
            )),
        };
        match &self.conjugator {
            None => Ok(g),
            Some((a, a_inv)) => a.matmul(&g)?.matmul(a_inv),
        }
    }

    /// Samples the model at the given points; 0 is always included.
    pub fn sample(&self, points: &[ModuleElement]) -> Result<SampleSet> {
        let mut all = vec![ModuleElement::zero(self.basis.len())];
        for p in points {
            if !all.contains(p) {
                all.push(p.clone());
            }
        }
        let samples = all.iter().map(|p| self.evaluate(p)).collect::<Result<Vec<_>>>()?;
        Ok(SampleSet { basis: self.basis.clone(), points: all, samples, bound: None })
    }
}

/// Elementary model A Q_d^nu(x) exp(Mx) A^{-1} (rotation part optional).
/// A linear nu in real mode folds into the generator and yields a plain
/// block.
pub fn build_elementary(
    m: Matrix,
    nu: Option<CauchySolution>,
    conjugator: Option<Matrix>,
) -> Result<SemigroupModel> {
    build_elementary_exact(m, nu, None, conjugator)
}

/// As `build_elementary`, with an explicit angle unit for exact mode
/// (nu values are then integer multiples of the unit).
pub fn build_elementary_exact(
    m: Matrix,
    nu: Option<CauchySolution>,
    unit: Option<RationalAngle>,
    conjugator: Option<Matrix>,
) -> Result<SemigroupModel> {
    if !matches!(&m, Matrix::Exact(q) if q.is_square()) && m.rows() != m.cols() {
        return Err(Error::Dimension("generator must be square".into()));
    }
    let mode = m.mode();
    let basis = nu.as_ref().map_or_else(ModuleBasis::standard, |n| n.basis.clone());
    let block = match nu {
        None => Block::Plain { gen: m },
        Some(nu) => {
            check_rotating_block(&m, &nu)?;
            if mode == Mode::Real && nu.is_linear(1e-12) {
                // Q^nu(x) = exp(c x K) for linear nu, so fold it in
                let c = nu.slope();
                let folded = &m.to_real() + &rotation_generator(m.rows()).scale(&c);
                Block::Plain { gen: Matrix::Real(folded) }
            } else {
                Block::Rotating { gen: m, nu: nu.clone(), unit }
            }
        }
    };
    SemigroupModel::from_blocks(basis, vec![block], mode, conjugator)
}

/// Plain model on an explicit basis.
pub fn build_plain(m: Matrix, basis: ModuleBasis) -> Result<SemigroupModel> {
    let mode = m.mode();
    SemigroupModel::from_blocks(basis, vec![Block::Plain { gen: m }], mode, None)
}

/// Single-block model on an explicit basis; rotating blocks are
/// validated as in `build_elementary`.
pub fn model_from_block(basis: ModuleBasis, block: Block) -> Result<SemigroupModel> {
    let mode = match &block {
        Block::Plain { gen } | Block::Rotating { gen, .. } => gen.mode(),
        Block::Zero { .. } => Mode::Real,
    };
    if let Block::Rotating { gen, nu, .. } = &block {
        check_rotating_block(gen, nu)?;
    }
    SemigroupModel::from_blocks(basis, vec![block], mode, None)
}

/// Block-diagonal join of models on a shared basis.
pub fn direct_sum(models: &[SemigroupModel]) -> Result<SemigroupModel> {
    let first = models.first().ok_or_else(|| {
        Error::Precondition("direct_sum needs at least one model".into())
    })?;
    let mut blocks = Vec::new();
    let mut conjugators = Vec::new();
    let mut any_conj = false;
    for m in models {
        if m.basis != first.basis {
            return Err(Error::BasisMismatch("direct summands on different bases".into()));
        }
        if m.mode != first.mode {
            return Err(Error::Mode("direct summands of mixed modes".into()));
        }
        blocks.extend(m.blocks.iter().cloned());
        any_conj |= m.conjugator.is_some();
        conjugators.push((m.conjugator.clone(), m.dim()));
    }
    let conjugator = if any_conj {
        let parts: Vec<Matrix> = conjugators
            .iter()
            .map(|(c, d)| match c {
                Some((a, _)) => a.clone(),
                None => Matrix::identity(*d, first.mode),
            })
            .collect();
        Some(match first.mode {
            Mode::Exact => Matrix::Exact(QMat::block_diag(
                &parts.iter().map(|p| p.as_exact().unwrap().clone()).collect::<Vec<_>>(),
            )),
            Mode::Real => Matrix::Real(FMat::block_diag(
                &parts.iter().map(Matrix::to_real).collect::<Vec<_>>(),
            )),
        })
    } else {
        None
    };
    SemigroupModel::from_blocks(first.basis.clone(), blocks, first.mode, conjugator)
}

/// Appends a k-dimensional zero block.
pub fn with_zero_block(model: &SemigroupModel, k: usize) -> Result<SemigroupModel> {
    if model.conjugator.is_some() {
        return Err(Error::Precondition(
            "append zero blocks before conjugating the model".into(),
        ));
    }
    let mut blocks = model.blocks.clone();
    blocks.push(Block::Zero { dim: k });
    SemigroupModel::from_blocks(model.basis.clone(), blocks, model.mode, None)
}

/// Conjugates the model by an invertible A.
pub fn conjugate(model: &SemigroupModel, a: Matrix) -> Result<SemigroupModel> {
    model.conjugated(a)
}

// --- sample sets ---

/// Samples of a (claimed) semigroup at finitely many module points.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub basis: ModuleBasis,
    pub points: Vec<ModuleElement>,
    /// Parallel to `points`.
    pub samples: Vec<Matrix>,
    pub bound: Option<BoundFunction>,
}

impl SampleSet {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Matrix::rows)
    }

    pub fn mode(&self) -> Mode {
        self.samples.first().map_or(Mode::Real, Matrix::mode)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: &ModuleElement) -> Option<usize> {
        self.points.iter().position(|p| p == x)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.points[i].value(&self.basis)
    }

    /// Indices of strictly positive sample points.
    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.value(i) > 0.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.samples.len() {
            return Err(Error::Dimension("one sample per point required".into()));
        }
        let d = self.dim();
        let mode = self.mode();
        for (p, s) in self.points.iter().zip(&self.samples) {
            if p.coords.len() != self.basis.len() {
                return Err(Error::BasisMismatch("point does not fit the basis".into()));
            }
            if s.rows() != d || s.cols() != d {
                return Err(Error::Dimension("samples of mixed dimensions".into()));
            }
            if s.mode() != mode {
                return Err(Error::Mode("samples of mixed modes".into()));
            }
        }
        if self.index_of(&ModuleElement::zero(self.basis.len())).is_none() {
            return Err(Error::Precondition("sample set must include the point 0".into()));
        }
        Ok(())
    }

    /// Restriction of every sample to a subspace expressed in the given
    /// orthonormal column basis (real mode).
    pub fn restrict(&self, cols: &[Vec<f64>]) -> SampleSet {
        if cols.is_empty() {
            let samples = self.samples.iter().map(|_| Matrix::Real(FMat::zeros(0, 0))).collect();
            return SampleSet {
                basis: self.basis.clone(),
                points: self.points.clone(),
                samples,
                bound: self.bound.clone(),
            };
        }
        let u = FMat::from_cols(cols.to_vec());
        let ut = u.transpose();
        let samples = self
            .samples
            .iter()
            .map(|s| Matrix::Real(ut.matmul(&s.to_real()).matmul(&u)))
            .collect();
        SampleSet {
            basis: self.basis.clone(),
            points: self.points.clone(),
            samples,
            bound: self.bound.clone(),
        }
    }
}

/// Default sampling grid: 0, the basis elements, their pairwise sums,
/// and rational multiples with denominators up to `max_den`.
pub fn default_grid(basis: &ModuleBasis, max_den: i64) -> Vec<ModuleElement> {
    let n = basis.len();
    let mut pts = vec![ModuleElement::zero(n)];
    for i in 0..n {
        pts.push(ModuleElement::unit(i, n));
    }
    for i in 0..n {
        for j in i..n {
            pts.push(ModuleElement::unit(i, n).add(&ModuleElement::unit(j, n)));
        }
    }
    for i in 0..n {
        for q in 2..=max_den.max(1) {
            pts.push(ModuleElement::unit(i, n).scale(&rat(1, q)));
        }
    }
    pts
}

/// Integer-coordinate grid, safe for exact rotation blocks whose angle
/// multiples must stay integral.
pub fn integer_grid(basis: &ModuleBasis, max_mult: i64) -> Vec<ModuleElement> {
    let n = basis.len();
    let mut pts = vec![ModuleElement::zero(n)];
    for i in 0..n {
        for k in 1..=max_mult {
            pts.push(ModuleElement::unit(i, n).scale(&rat(k, 1)));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            pts.push(ModuleElement::unit(i, n).add(&ModuleElement::unit(j, n)));
        }
    }
    pts
}

// --- verification reports ---

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    /// Which identity failed.
    pub kind: String,
    /// Indices of the sample points involved.
    pub points: Vec<usize>,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: usize,
    pub max_residual: f64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub(crate) fn new() -> Self {
        VerifyReport { passed: true, checks: 0, max_residual: 0.0, violations: Vec::new() }
    }

    pub(crate) fn record(&mut self, tol: f64, kind: &str, points: Vec<usize>, residual: f64) {
        self.checks += 1;
        if residual > self.max_residual {
            self.max_residual = residual;
        }
        if residual > tol {
            self.passed = false;
            self.violations.push(Violation { kind: kind.into(), points, residual });
        }
    }
}

fn residual(a: &Matrix, b: &Matrix) -> f64 {
    match (a, b) {
        (Matrix::Exact(x), Matrix::Exact(y)) => {
            if x == y {
                0.0
            } else {
                frob(&(x - y).map(rat_to_f64))
            }
        }
        _ => frob(&(&a.to_real() - &b.to_real())),
    }
}

/// Checks g(0) = id, the product law on every sampled pair whose sum is
/// sampled, and pairwise commutation. tol = 0 demands exact equality
/// (exact mode).
pub fn verify_semigroup(s: &SampleSet, tol: f64) -> Result<VerifyReport> {
    s.validate()?;
    let mut report = VerifyReport::new();
    let zero_idx = s.index_of(&ModuleElement::zero(s.basis.len())).unwrap();
    let id = Matrix::identity(s.dim(), s.mode());
    report.record(tol, "identity-at-zero", vec![zero_idx], residual(&s.samples[zero_idx], &id));

    // index the points for sum lookup
    let keyed: HashMap<String, usize> = s
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (point_key(p), i))
        .collect();
    for i in 0..s.len() {
        for j in i..s.len() {
            let sum = s.points[i].add(&s.points[j]);
            if let Some(&k) = keyed.get(&point_key(&sum)) {
                let prod = s.samples[i].matmul(&s.samples[j])?;
                report.record(tol, "product-law", vec![i, j, k], residual(&prod, &s.samples[k]));
            }
            if j > i {
                let ab = s.samples[i].matmul(&s.samples[j])?;
                let ba = s.samples[j].matmul(&s.samples[i])?;
                report.record(tol, "commutation", vec![i, j], residual(&ab, &ba));
            }
        }
    }
    Ok(report)
}

fn point_key(p: &ModuleElement) -> String {
    p.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

// --- bound functions ---

/// Closed-form norm bound f with f(0) = 1, from a tiny expression
/// grammar over {x, exp, +, *, constants}.
#[derive(Clone, Debug)]
pub struct BoundFunction {
    pub text: String,
    expr: Expr,
    pub locally_bounded: bool,
    pub right_continuous_at_0: bool,
}

#[derive(Clone, Debug)]
enum Expr {
    X,
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::X => x,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "expected '{}' at offset {} in bound expression",
                c as char, self.pos
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        while self.peek() == Some(b'+') {
            self.pos += 1;
            acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
                }
                // juxtaposition like "2x" or "2 exp(x)"
                Some(c) if c == b'x' || c == b'e' || c == b'(' => {
                    acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(Expr::X)
            }
            Some(b'e') => {
                let rest = &self.src[self.pos..];
                if rest.starts_with(b"exp") {
                    self.pos += 3;
                    self.expect(b'(')?;
                    let e = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expr::Exp(Box::new(e)))
                } else {
                    Err(Error::Parse("unknown identifier in bound expression".into()))
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' || c == b'-' => {
                let start = self.pos;
                self.pos += 1;
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                s.parse::<f64>()
                    .map(Expr::Const)
                    .map_err(|_| Error::Parse(format!("bad number {s:?} in bound expression")))
            }
            _ => Err(Error::Parse("unexpected end of bound expression".into())),
        }
    }
}

impl BoundFunction {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(Error::Parse(format!(
                "trailing input at offset {} in bound expression",
                p.pos
            )));
        }
        let f0 = expr.eval(0.0);
        if (f0 - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("bound must satisfy f(0) = 1, got {f0}")));
        }
        // closed forms in this grammar are continuous, hence both flags
        Ok(BoundFunction {
            text: text.to_string(),
            expr,
            locally_bounded: true,
            right_continuous_at_0: true,
        })
    }

    /// f identically 1, the isometry bound.
    pub fn one() -> Self {
        BoundFunction::parse("1").unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }
}

impl PartialEq for BoundFunction {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Serialize for BoundFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.text.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let text = String::deserialize(d)?;
        BoundFunction::parse(&text).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Per-point margin of the norm bound check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundMargin {
    pub point: usize,
    pub norm: f64,
    pub bound: f64,
    /// bound - norm; negative beyond the slack means a violation.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub passed: bool,
    pub margins: Vec<BoundMargin>,
}

/// Slack allowed on the norm bound comparison.
const BOUND_SLACK: f64 = 1e-12;

/// Checks operator_norm(g(x)) <= f(value(x)) at every sample.
pub fn verify_bound(s: &SampleSet, f: &BoundFunction) -> Result<BoundReport> {
    s.validate()?;
    let f0 = f.eval(0.0);
    if (f0 - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("bound must satisfy f(0) = 1".into()));
    }
    let mut margins = Vec::with_capacity(s.len());
    let mut passed = true;
    for i in 0..s.len() {
        let norm = operator_norm(&s.samples[i].to_real());
        let bound = f.eval(s.value(i));
        let margin = bound - norm;
        if margin < -BOUND_SLACK {
            passed = false;
        }
        margins.push(BoundMargin { point: i, norm, bound, margin });
    }
    Ok(BoundReport { passed, margins })
}

// --- JSON wire format {basis, points, samples, bound?} ---

#[derive(Serialize, Deserialize)]
struct SampleSetJson {
    basis: ModuleBasis,
    points: Vec<ModuleElement>,
    // string keys survive serde's flatten buffering; padded so that
    // lexicographic order is numeric order
    samples: std::collections::BTreeMap<String, Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundFunction>,
}

fn sample_key(i: usize) -> String {
    format!("{i:06}")
}

impl Serialize for SampleSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let samples = self
            .samples
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (sample_key(i), m))
            .collect();
        SampleSetJson {
            basis: self.basis.clone(),
            points: self.points.clone(),
            samples,
            bound: self.bound.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SampleSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let j = SampleSetJson::deserialize(d)?;
        let mut indexed: Vec<(usize, Matrix)> = Vec::with_capacity(j.samples.len());
        for (k, m) in j.samples {
            let i: usize = k
                .parse()
                .map_err(|_| D::Error::custom(format!("bad sample index {k:?}")))?;
            indexed.push((i, m));
        }
        indexed.sort_by_key(|(i, _)| *i);
        if indexed.len() != j.points.len()
            || indexed.iter().enumerate().any(|(i, (k, _))| i != *k)
        {
            return Err(D::Error::custom("sample indices must cover 0..points.len()"));
        }
        let samples = indexed.into_iter().map(|(_, m)| m).collect();
        let out = SampleSet { basis: j.basis, points: j.points, samples, bound: j.bound };
        out.validate().map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{qi, BasisEntry, DEC_ONE, DEC_SQRT2};

    fn basis12() -> ModuleBasis {
        ModuleBasis::new(vec![
            BasisEntry::new("1", DEC_ONE, 40).unwrap(),
            BasisEntry::new("sqrt2", DEC_SQRT2, 40).unwrap(),
        ])
        .unwrap()
    }

    fn unit_points(n: usize) -> Vec<ModuleElement> {
        (0..n).map(|i| ModuleElement::unit(i, n)).collect()
    }

    #[test]
    fn constant_identity_model() {
        let m = build_plain(Matrix::Real(FMat::zeros(2, 2)), basis12()).unwrap();
        let g = m.evaluate(&ModuleElement::unit(0, 2)).unwrap();
        assert!(frob(&(&g.to_real() - &FMat::identity(2))) < 1e-14);
    }

    #[test]
    fn rotating_scalar_block() {
        // d=2, M=a*id, nu(1)=pi/2, nu(sqrt2)=0: g(1) = Q(pi/2) e^a
        let b = basis12();
        let a = 0.3;
        let m = Matrix::Real(FMat::identity(2).scale(&a));
        let nu =
            CauchySolution::real(b.clone(), vec![std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        let model = build_elementary(m, Some(nu), None).unwrap();
        let g = model.evaluate(&ModuleElement::unit(0, 2)).unwrap().to_real();
        let expect = rotation_block(2, std::f64::consts::FRAC_PI_2).scale(&a.exp());
        assert!(frob(&(&g - &expect)) < 1e-12);
    }

    #[test]
    fn rotation_generator_commutes() {
        let b = basis12();
        let m = Matrix::Real(rotation_generator(2));
        let nu = CauchySolution::real(b, vec![1.0, 0.0]).unwrap();
        assert!(build_elementary(m, Some(nu), None).is_ok());
    }

    #[test]
    fn non_commuting_generator_rejected() {
        let b = basis12();
        let m = Matrix::Real(FMat::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]));
        let nu = CauchySolution::real(b, vec![1.0, 0.0]).unwrap();
        assert!(build_elementary(m, Some(nu), None).is_err());
    }

    #[test]
    fn odd_dimension_with_rotation_rejected() {
        let b = basis12();
        let m = Matrix::Real(FMat::zeros(3, 3));
        let nu = CauchySolution::real(b, vec![1.0, 0.0]).unwrap();
        assert!(build_elementary(m, Some(nu), None).is_err());
    }

    #[test]
    fn linear_nu_drops_to_plain() {
        let b = basis12();
        let m = Matrix::Real(FMat::zeros(2, 2));
        let nu = CauchySolution::linear(b.clone(), 0.5);
        let model = build_elementary(m, Some(nu), None).unwrap();
        assert!(matches!(model.blocks[0], Block::Plain { .. }));
        // still evaluates to the rotation
        let g = model.evaluate(&ModuleElement::unit(0, 2)).unwrap().to_real();
        assert!(frob(&(&g - &rotation_block(2, 0.5))) < 1e-12);
    }

    #[test]
    fn zero_block_evaluation() {
        // with_zero_block(plain e^x, 1): g(1) = diag(e, 0)
        let b = basis12();
        let m = build_plain(Matrix::Real(FMat::identity(1)), b).unwrap();
        let m = with_zero_block(&m, 1).unwrap();
        let g = m.evaluate(&ModuleElement::unit(0, 2)).unwrap().to_real();
        assert!((g[(0, 0)] - 1f64.exp()).abs() < 1e-12);
        assert_eq!(g[(1, 1)], 0.0);
        let g0 = m.evaluate(&ModuleElement::zero(2)).unwrap().to_real();
        assert!(frob(&(&g0 - &FMat::identity(2))) < 1e-14);
    }

    #[test]
    fn conjugation_round_trip() {
        let b = basis12();
        let base = build_plain(
            Matrix::Real(FMat::from_rows(vec![vec![1.0, 0.0], vec![0.0, -1.0]])),
            b,
        )
        .unwrap();
        let a = FMat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 1.0]]);
        let a_inv = crate::linalg::float::inverse(&a).unwrap();
        let conj = conjugate(&base, Matrix::Real(a)).unwrap();
        let back = conjugate(&conj, Matrix::Real(a_inv)).unwrap();
        for p in unit_points(2) {
            let x = base.evaluate(&p).unwrap().to_real();
            let y = back.evaluate(&p).unwrap().to_real();
            assert!(frob(&(&x - &y)) < 1e-10);
        }
    }

    #[test]
    fn direct_sum_of_identities() {
        let b = basis12();
        let id1 = build_plain(Matrix::Real(FMat::zeros(2, 2)), b.clone()).unwrap();
        let id2 = build_plain(Matrix::Real(FMat::zeros(3, 3)), b).unwrap();
        let m = direct_sum(&[id1, id2]).unwrap();
        let g = m.evaluate(&ModuleElement::unit(1, 2)).unwrap().to_real();
        assert!(frob(&(&g - &FMat::identity(5))) < 1e-14);
    }

    #[test]
    fn sample_includes_zero_and_law() {
        let b = basis12();
        let m = build_plain(
            Matrix::Real(FMat::from_rows(vec![vec![0.2, 1.0], vec![0.0, 0.2]])),
            b,
        )
        .unwrap();
        let one = ModuleElement::unit(0, 2);
        let two = one.scale(&rat(2, 1));
        let s = m.sample(&[one.clone(), two.clone()]).unwrap();
        assert_eq!(s.index_of(&ModuleElement::zero(2)), Some(0));
        let i = s.index_of(&one).unwrap();
        let k = s.index_of(&two).unwrap();
        let sq = s.samples[i].matmul(&s.samples[i]).unwrap();
        assert!(residual(&sq, &s.samples[k]) < 1e-12);
    }

    #[test]
    fn negative_point_rejected() {
        let b = basis12();
        let m = build_plain(Matrix::Real(FMat::zeros(2, 2)), b).unwrap();
        let neg = ModuleElement::unit(0, 2).scale(&rat(-1, 1));
        assert!(matches!(m.evaluate(&neg), Err(Error::Domain(_))));
    }

    #[test]
    fn verify_semigroup_passes_and_detects_fault() {
        let b = basis12();
        let m = build_plain(
            Matrix::Real(FMat::from_rows(vec![vec![0.1, 0.4], vec![0.0, -0.3]])),
            b.clone(),
        )
        .unwrap();
        let mut s = m.sample(&default_grid(&b, 4)).unwrap();
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        assert!(rep.passed, "violations: {:?}", rep.violations);

        // single-entry perturbation of 1e-3 is detected
        if let Matrix::Real(g) = &mut s.samples[2] {
            g[(0, 1)] += 1e-3;
        }
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.violations.iter().any(|v| v.points.contains(&2)));
    }

    #[test]
    fn non_semigroup_family_fails() {
        // g(x) = id + x N with N^2 != 0 violates the law at (1,1,2)
        let b = ModuleBasis::rational_unit();
        let n = FMat::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let points: Vec<ModuleElement> = (0..=2)
            .map(|k| ModuleElement::unit(0, 1).scale(&rat(k, 1)))
            .collect();
        let samples = points
            .iter()
            .map(|p| {
                let v = p.value(&b);
                Matrix::Real(&FMat::identity(3) + &n.scale(&v))
            })
            .collect();
        let s = SampleSet { basis: b, points, samples, bound: None };
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.violations.iter().any(|v| v.kind == "product-law"));
    }

    #[test]
    fn exact_mode_law_holds_with_tol_zero() {
        let b = ModuleBasis::rational_unit();
        // the only nilpotent commuting with L in d=2 is 0
        let n = QMat::zeros(2, 2);
        let nu = CauchySolution::exact(b.clone(), vec![qi(1)]).unwrap();
        let model = build_elementary_exact(
            Matrix::Exact(n),
            Some(nu),
            Some(RationalAngle::pythagorean()),
            None,
        )
        .unwrap();
        let s = model.sample(&integer_grid(&b, 3)).unwrap();
        let rep = verify_semigroup(&s, 0.0).unwrap();
        assert!(rep.passed, "violations: {:?}", rep.violations);
        assert_eq!(rep.max_residual, 0.0);
    }

    #[test]
    fn exact_rotation_powers() {
        let u = RationalAngle::pythagorean();
        let q2 = u.rotation_pow(2);
        // cos 2t = cos^2 - sin^2 = 9/25 - 16/25 = -7/25
        assert_eq!(q2[(0, 0)], rat(-7, 25));
        assert_eq!(q2[(0, 1)], rat(24, 25));
        let qm1 = u.rotation_pow(-1);
        assert!(u.rotation_pow(1).matmul(&qm1) == QMat::identity(2));
    }

    #[test]
    fn bound_expression_parser() {
        let f = BoundFunction::parse("exp(2*x)").unwrap();
        assert!((f.eval(1.0) - 2f64.exp()).abs() < 1e-12);
        let g = BoundFunction::parse("0.5 + 0.5*exp(x)").unwrap();
        assert!((g.eval(0.0) - 1.0).abs() < 1e-15);
        assert!(BoundFunction::parse("2*x").is_err()); // f(0) != 1
        assert!(BoundFunction::parse("exp(").is_err());
    }

    #[test]
    fn bound_checks() {
        let b = basis12();
        // rotation-only model with f = 1 passes
        let nu = CauchySolution::real(b.clone(), vec![1.0, 0.3]).unwrap();
        let model =
            build_elementary(Matrix::Real(FMat::zeros(2, 2)), Some(nu), None).unwrap();
        let s = model.sample(&default_grid(&b, 3)).unwrap();
        let rep = verify_bound(&s, &BoundFunction::one()).unwrap();
        assert!(rep.passed);

        // g(x) = e^{2x} against f(x) = e^x fails for x > 0
        let fast = build_plain(Matrix::Real(FMat::identity(1).scale(&2.0)), b.clone()).unwrap();
        let s = fast.sample(&default_grid(&b, 2)).unwrap();
        let rep = verify_bound(&s, &BoundFunction::parse("exp(x)").unwrap()).unwrap();
        assert!(!rep.passed);

        // zero block with f = 1 passes
        let z = with_zero_block(&build_plain(Matrix::Real(FMat::zeros(1, 1)), b.clone()).unwrap(), 2)
            .unwrap();
        let s = z.sample(&default_grid(&b, 2)).unwrap();
        assert!(verify_bound(&s, &BoundFunction::one()).unwrap().passed);
    }

    #[test]
    fn sample_set_json_round_trip() {
        let b = basis12();
        let m = build_plain(Matrix::Real(FMat::identity(2).scale(&0.5)), b.clone()).unwrap();
        let mut s = m.sample(&default_grid(&b, 2)).unwrap();
        s.bound = Some(BoundFunction::parse("exp(x)").unwrap());
        let text = serde_json::to_string(&s).unwrap();
        let back: SampleSet = serde_json::from_str(&text).unwrap();
        assert_eq!(s.points, back.points);
        assert_eq!(s.samples, back.samples);
        assert_eq!(s.bound, back.bound);
    }
}
