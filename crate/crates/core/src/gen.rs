//! Seeded random construction of semigroup models with ground-truth
//! records, plus random matrices used by decomposition tests.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cauchy::{CauchySolution, ModuleBasis};
use crate::error::Result;
use crate::linalg::float::{operator_norm, orthonormalize};
use crate::linalg::mat::{FMat, Matrix, QMat};
use crate::semigroup::{
    build_plain, direct_sum, with_zero_block, Block, BoundFunction, SemigroupModel,
};
use crate::Rat;

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

/// Random orthogonal matrix: orthonormalized Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha20Rng, n: usize) -> FMat {
    loop {
        let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
        let (basis, dropped) = orthonormalize(&cols, 1e-8);
        if dropped.is_empty() && basis.len() == n {
            return FMat::from_cols(basis);
        }
    }
}

/// Random unimodular integer matrix: a product of elementary shears, so
/// the inverse is exactly rational.
pub fn random_unimodular(rng: &mut ChaCha20Rng, n: usize, steps: usize) -> QMat {
    let mut m = QMat::identity(n);
    for _ in 0..steps {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        while j == i {
            j = rng.gen_range(0..n);
        }
        let c: i64 = rng.gen_range(-2..=2);
        let mut e = QMat::identity(n);
        e[(i, j)] = Rat::from(BigInt::from(c));
        m = m.matmul(&e);
    }
    m
}

/// Random rational matrix with prescribed integer eigenvalues: an
/// integer upper-triangular seed conjugated by a unimodular matrix.
pub fn random_integer_eig_matrix(rng: &mut ChaCha20Rng, n: usize) -> (QMat, Vec<i64>) {
    let mut eigs: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    // repeated eigenvalues exercise the nilpotent part
    if n >= 2 && rng.gen_bool(0.5) {
        eigs[1] = eigs[0];
    }
    let mut t = QMat::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = Rat::from(BigInt::from(eigs[i]));
        for j in i + 1..n {
            t[(i, j)] = Rat::from(BigInt::from(rng.gen_range(-2..=2i64)));
        }
    }
    let u = random_unimodular(rng, n, 2 * n);
    let u_inv = crate::linalg::exact::inverse(&u).unwrap();
    (u.matmul(&t).matmul(&u_inv), eigs)
}

/// What one generated diagonal block is, before conjugation.
#[derive(Clone, Debug)]
pub struct TruthBlock {
    pub dim: usize,
    /// Growth rate; meaningless for zero blocks.
    pub a: f64,
    /// Rotation solution of rotating blocks.
    pub nu: Option<CauchySolution>,
    pub has_nilpotent: bool,
    pub is_zero: bool,
}

#[derive(Clone, Debug)]
pub struct GeneratedModel {
    pub model: SemigroupModel,
    pub truth: Vec<TruthBlock>,
    pub zero_dim: usize,
    pub bound: BoundFunction,
    pub conjugator: FMat,
}

/// Non-linear solution with basis values in (-pi + margin, pi - margin),
/// so its principal-value reduction is the solution itself.
pub fn random_nonlinear_nu(rng: &mut ChaCha20Rng, basis: &ModuleBasis) -> CauchySolution {
    let lim = std::f64::consts::PI - 0.15;
    loop {
        let vals: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-lim..lim)).collect();
        let f = CauchySolution::real(basis.clone(), vals).unwrap();
        if !f.is_linear(1e-3) {
            return f;
        }
    }
}

/// Random model of the given total dimension: a mix of plain blocks
/// (optionally with a nilpotent part), rotating blocks with non-linear
/// nu on the standard basis, and zero blocks, conjugated by a random
/// orthogonal matrix. Deterministic in the seed.
pub fn random_model(seed: u64, total_dim: usize) -> Result<GeneratedModel> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let basis = ModuleBasis::standard();

    // growth rates from a shuffled grid, so clusters stay separated
    let mut rates: Vec<f64> = (0..9).map(|k| -0.8 + 0.2 * k as f64).collect();
    for i in (1..rates.len()).rev() {
        rates.swap(i, rng.gen_range(0..=i));
    }
    let mut next_rate = rates.into_iter();

    let mut remaining = total_dim;
    let mut truth: Vec<TruthBlock> = Vec::new();
    let mut models: Vec<SemigroupModel> = Vec::new();
    let mut zero_dim = 0usize;
    let mut last_nu: Option<CauchySolution> = None;

    while remaining > 0 {
        let choices: &[usize] = if remaining >= 2 { &[0, 1, 2, 3] } else { &[0, 3] };
        match choices[rng.gen_range(0..choices.len())] {
            // 1-dim plain
            0 => {
                let a = next_rate.next().unwrap_or(0.0);
                models.push(build_plain(Matrix::Real(FMat::identity(1).scale(&a)), basis.clone())?);
                truth.push(TruthBlock { dim: 1, a, nu: None, has_nilpotent: false, is_zero: false });
                remaining -= 1;
            }
            // 2-dim plain with a nilpotent part
            1 => {
                let a = next_rate.next().unwrap_or(0.0);
                let m = FMat::from_rows(vec![vec![a, 1.0], vec![0.0, a]]);
                models.push(build_plain(Matrix::Real(m), basis.clone())?);
                truth.push(TruthBlock { dim: 2, a, nu: None, has_nilpotent: true, is_zero: false });
                remaining -= 2;
            }
            // 2-dim rotating
            2 => {
                let a = next_rate.next().unwrap_or(0.0);
                // sometimes reuse the previous class, shifted by a
                // linear term, to exercise the partition grouping
                let nu = match (&last_nu, rng.gen_bool(0.4)) {
                    (Some(prev), true) => {
                        let c = rng.gen_range(-1.0..1.0);
                        let shift = CauchySolution::linear(basis.clone(), c);
                        CauchySolution::real(
                            basis.clone(),
                            prev.values_f64()
                                .iter()
                                .zip(shift.values_f64())
                                .map(|(x, y)| x + y)
                                .collect(),
                        )?
                    }
                    _ => random_nonlinear_nu(&mut rng, &basis),
                };
                last_nu = Some(nu.clone());
                let gen = Matrix::Real(FMat::identity(2).scale(&a));
                let block = Block::Rotating { gen, nu: nu.clone(), unit: None };
                let model = crate::semigroup::model_from_block(basis.clone(), block)?;
                models.push(model);
                truth.push(TruthBlock { dim: 2, a, nu: Some(nu), has_nilpotent: false, is_zero: false });
                remaining -= 2;
            }
            // 1-dim zero block
            _ => {
                zero_dim += 1;
                truth.push(TruthBlock { dim: 1, a: 0.0, nu: None, has_nilpotent: false, is_zero: true });
                remaining -= 1;
            }
        }
    }
    if models.is_empty() {
        // all-zero draw: keep one invertible direction out of it
        models.push(build_plain(Matrix::Real(FMat::zeros(0, 0)), basis.clone())?);
    }
    let mut model = direct_sum(&models)?;
    if zero_dim > 0 {
        model = with_zero_block(&model, zero_dim)?;
    }
    let q = random_orthogonal(&mut rng, total_dim);
    let model = model.conjugated(Matrix::Real(q.clone()))?;

    // exp(C x) with C above every block generator norm is a valid bound
    let mut c: f64 = 0.0;
    for b in &truth {
        if b.is_zero {
            continue;
        }
        let mut m = FMat::identity(b.dim).scale(&b.a);
        if b.has_nilpotent {
            m[(0, 1)] = 1.0;
        }
        // rotation parts are isometric and add nothing to the norm
        c = c.max(operator_norm(&m));
    }
    let c = (c + 0.5).ceil();
    let bound = BoundFunction::parse(&format!("exp({c}*x)"))?;

    Ok(GeneratedModel { model, truth, zero_dim, bound, conjugator: q })
}

/// Exact model with rational entries at every integer-grid point: a mix
/// of nilpotent plain blocks, rational-angle rotating blocks, and zero
/// blocks, conjugated by a random unimodular matrix.
pub struct ExactGeneratedModel {
    pub model: SemigroupModel,
    pub zero_dim: usize,
    pub bound: BoundFunction,
}

pub fn random_exact_model(seed: u64, total_dim: usize) -> Result<ExactGeneratedModel> {
    use crate::cauchy::qi;
    use crate::linalg::mat::QMat;
    use crate::semigroup::{model_from_block, RationalAngle};

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let basis = crate::cauchy::ModuleBasis::rational_unit();
    let mut remaining = total_dim;
    let mut models: Vec<SemigroupModel> = Vec::new();
    let mut zero_dim = 0usize;
    while remaining > 0 {
        let choices: &[usize] = if remaining >= 2 { &[0, 1, 2, 3] } else { &[0, 3] };
        match choices[rng.gen_range(0..choices.len())] {
            // 1-dim trivial plain block (constant identity)
            0 => {
                models.push(build_plain(
                    Matrix::Exact(QMat::zeros(1, 1)),
                    basis.clone(),
                )?);
                remaining -= 1;
            }
            // 2-dim nilpotent plain block
            1 => {
                let q = crate::Rat::new(
                    BigInt::from(rng.gen_range(1..=3i64)),
                    BigInt::from(rng.gen_range(1..=2i64)),
                );
                let mut m = QMat::zeros(2, 2);
                m[(0, 1)] = q;
                models.push(build_plain(Matrix::Exact(m), basis.clone())?);
                remaining -= 2;
            }
            // 2-dim rotating block with a rational unit angle
            2 => {
                let k: i64 = rng.gen_range(1..=3);
                let nu = crate::cauchy::CauchySolution::exact(basis.clone(), vec![qi(k)])?;
                let block = Block::Rotating {
                    gen: Matrix::Exact(QMat::zeros(2, 2)),
                    nu,
                    unit: Some(RationalAngle::pythagorean()),
                };
                models.push(model_from_block(basis.clone(), block)?);
                remaining -= 2;
            }
            // 1-dim zero block
            _ => {
                zero_dim += 1;
                remaining -= 1;
            }
        }
    }
    if models.is_empty() {
        models.push(build_plain(Matrix::Exact(QMat::zeros(0, 0)), basis.clone())?);
    }
    let mut model = direct_sum(&models)?;
    if zero_dim > 0 {
        model = with_zero_block(&model, zero_dim)?;
    }
    let u = random_unimodular(&mut rng, total_dim, 2 * total_dim);
    let model = model.conjugated(Matrix::Exact(u))?;

    // bound from the realized norms on the integer grid
    let s = model.sample(&crate::semigroup::integer_grid(&basis, 3))?;
    let mut c: f64 = 0.0;
    for i in s.positive_indices() {
        let n = operator_norm(&s.samples[i].to_real());
        if n > 1.0 {
            c = c.max(n.ln() / s.value(i));
        }
    }
    let c = (c + 1.0).ceil();
    let bound = BoundFunction::parse(&format!("exp({c}*x)"))?;
    Ok(ExactGeneratedModel { model, zero_dim, bound })
}

/// Random nilpotent strictly upper triangular matrix (float).
pub fn random_nilpotent(rng: &mut ChaCha20Rng, n: usize) -> FMat {
    let mut m = FMat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    m
}
