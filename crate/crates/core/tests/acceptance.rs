//! End-to-end acceptance checks. Each test prints a single pass/fail
//! line; run with `cargo test --test acceptance -- --nocapture` to see
//! them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use semidec::cauchy::{equivalent, pi_sequence, CauchySolution, ModuleBasis};
use semidec::decomp::{
    classify, jc_multiplicative, kernel_split, rotation_normal_form, semigroup_jc, srpd,
    track_law_residual, Tolerances,
};
use semidec::decomp::jc::semisimple_interpolation_oracle;
use semidec::gaussmarkov::{fractional_kernel, markov_check, min_kernel, to_semigroup, triple_grid};
use semidec::gen::{random_exact_model, random_integer_eig_matrix, random_model, random_orthogonal};
use semidec::linalg::exact::rat;
use semidec::linalg::exp::rotation_block;
use semidec::linalg::float::frob;
use semidec::linalg::mat::{FMat, Matrix};
use semidec::semigroup::{
    default_grid, verify_semigroup, BoundFunction, SampleSet,
};

fn report(n: usize, what: &str, ok: bool) {
    println!("acceptance {n} ({what}): {}", if ok { "pass" } else { "fail" });
}

#[test]
fn acceptance_1_round_trip_recovery() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..50u64 {
        let dim = 2 + (seed as usize % 7);
        let g = random_model(seed, dim).unwrap();
        let s = g.model.sample(&default_grid(&g.model.basis, 6)).unwrap();
        assert!(s.len() >= 12);
        let c = classify(&s, &g.bound, &Tolerances::default()).unwrap();
        if !c.report.passed() {
            ok = false;
            detail = format!("seed {seed}: {:?}", c.report);
            break;
        }
        let zero: usize =
            c.report.blocks.iter().filter(|b| b.tag == "zero").map(|b| b.dim).sum();
        if zero != g.zero_dim {
            ok = false;
            detail = format!("seed {seed}: zero dim {zero} != {}", g.zero_dim);
            break;
        }
        let mut truth_dims: Vec<usize> =
            g.truth.iter().filter(|t| !t.is_zero).map(|t| t.dim).collect();
        let mut got_dims: Vec<usize> =
            c.report.blocks.iter().filter(|b| b.tag != "zero").map(|b| b.dim).collect();
        truth_dims.sort_unstable();
        got_dims.sort_unstable();
        if truth_dims != got_dims {
            ok = false;
            detail = format!("seed {seed}: dims {got_dims:?} != {truth_dims:?}");
            break;
        }
        let mut truth_a: Vec<f64> = g.truth.iter().filter(|t| !t.is_zero).map(|t| t.a).collect();
        let mut got_a: Vec<f64> = c.report.blocks.iter().filter_map(|b| b.a).collect();
        truth_a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        got_a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if truth_a.len() != got_a.len()
            || truth_a.iter().zip(&got_a).any(|(t, r)| (t - r).abs() > 1e-8)
        {
            ok = false;
            detail = format!("seed {seed}: rates {got_a:?} != {truth_a:?}");
            break;
        }
        let st = c.report.stages.iter().find(|s| s.name == "structure").unwrap();
        if st.residuals["max"] > 1e-8 {
            ok = false;
            detail = format!("seed {seed}: structure residual {}", st.residuals["max"]);
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        ok = false;
        detail = format!("took {elapsed:.1}s");
    }
    report(1, "round-trip recovery of 50 random models", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_2_law_verification_and_perturbation() {
    let mut ok = true;
    let mut detail = String::new();
    // exact sub-suite: rational rotation angles, tolerance exactly zero
    for seed in 0..10u64 {
        let g = random_exact_model(seed, 5).unwrap();
        let s = g.model.sample(&semidec::semigroup::integer_grid(&g.model.basis, 3)).unwrap();
        let rep = verify_semigroup(&s, 0.0).unwrap();
        if !rep.passed {
            ok = false;
            detail = format!("exact seed {seed}: {:?}", rep.violations);
        }
    }
    // real sub-suite
    for seed in 0..10u64 {
        let g = random_model(seed, 5).unwrap();
        let s = g.model.sample(&default_grid(&g.model.basis, 5)).unwrap();
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        if !rep.passed {
            ok = false;
            detail = format!("real seed {seed}: {:?}", rep.violations);
        }
    }
    // every single-entry perturbation of size 1e-3 must be caught
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for case in 0..20u64 {
        let g = random_model(case, 4).unwrap();
        let mut s = g.model.sample(&default_grid(&g.model.basis, 4)).unwrap();
        let pos = s.positive_indices();
        let i = pos[rng.gen_range(0..pos.len())];
        let r = rng.gen_range(0..s.dim());
        let c = rng.gen_range(0..s.dim());
        if let Matrix::Real(m) = &mut s.samples[i] {
            m[(r, c)] += 1e-3;
        }
        let rep = verify_semigroup(&s, 1e-9).unwrap();
        if rep.passed {
            ok = false;
            detail = format!("perturbation case {case} went undetected");
        }
    }
    for seed in 0..5u64 {
        let g = random_exact_model(seed, 4).unwrap();
        let mut s = g.model.sample(&semidec::semigroup::integer_grid(&g.model.basis, 3)).unwrap();
        let i = s.positive_indices()[0];
        if let Matrix::Exact(m) = &mut s.samples[i] {
            m[(0, 0)] += rat(1, 1000);
        }
        let rep = verify_semigroup(&s, 0.0).unwrap();
        if rep.passed {
            ok = false;
            detail = format!("exact perturbation seed {seed} went undetected");
        }
    }
    report(2, "semigroup law verification and perturbation detection", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_3_jordan_chevalley_exactness() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..100 {
        let n = 2 + case % 4; // 2..=5
        let (a, _eigs) = random_integer_eig_matrix(&mut rng, n);
        let (d, t) = jc_multiplicative(&Matrix::Exact(a.clone())).unwrap();
        let dq = d.as_exact().unwrap().clone();
        let tq = t.as_exact().unwrap().clone();
        let oracle = semisimple_interpolation_oracle(&a).unwrap();
        if dq != oracle {
            ok = false;
            detail = format!("case {case}: semisimple part disagrees with the oracle");
            break;
        }
        if dq.matmul(&tq) != a || tq.matmul(&dq) != a {
            ok = false;
            detail = format!("case {case}: DT or TD differs from A");
            break;
        }
        let mut nil = tq.clone();
        for i in 0..n {
            nil[(i, i)] -= rat(1, 1);
        }
        if !nil.pow(n as u32).is_zero() {
            ok = false;
            detail = format!("case {case}: (T - id)^{n} is not zero");
            break;
        }
    }
    report(3, "exact Jordan-Chevalley vs interpolation oracle on 100 matrices", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_4_factor_identities() {
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..8u64 {
        let g = random_model(seed, 5).unwrap();
        let s = g.model.sample(&default_grid(&g.model.basis, 5)).unwrap();
        let split = kernel_split(&s).unwrap();
        let jc = semigroup_jc(&split.invertible).unwrap();
        if !jc.report.passed {
            ok = false;
            detail = format!("seed {seed}: {:?}", jc.report.violations);
            break;
        }
    }
    report(4, "D/T product, commutation, and N additivity within 1e-9", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_5_rotation_normal_form() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let basis = ModuleBasis::standard();
    let grid = default_grid(&basis, 4);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..20 {
        let d = [2usize, 4, 6][case % 3];
        let q = random_orthogonal(&mut rng, d);
        let nu = semidec::gen::random_nonlinear_nu(&mut rng, &basis);
        let mut mats = Vec::new();
        let mut etas = Vec::new();
        for p in &grid {
            let theta = nu.evaluate(p).unwrap();
            mats.push(q.matmul(&rotation_block(d, theta)).matmul(&q.transpose()));
            etas.push(theta);
        }
        let u = match rotation_normal_form(&mats, &etas) {
            Ok(u) => u,
            Err(e) => {
                ok = false;
                detail = format!("case {case}: {e}");
                break;
            }
        };
        let orth = frob(&(&u.matmul(&u.transpose()) - &FMat::identity(d)));
        if orth > 1e-10 {
            ok = false;
            detail = format!("case {case}: orthogonality residual {orth:.3e}");
            break;
        }
        for (i, m) in mats.iter().enumerate() {
            let rec = u.matmul(&rotation_block(d, etas[i])).matmul(&u.transpose());
            let res = frob(&(&rec - m));
            if res > 1e-8 {
                ok = false;
                detail = format!("case {case}: reconstruction residual {res:.3e}");
            }
        }
        if !ok {
            break;
        }
    }
    report(5, "orthogonal normal form of 20 conjugated rotation models", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_6_pi_sequences() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let basis = ModuleBasis::standard();
    let mut ok = true;
    let mut detail = String::new();
    let mut done = 0;
    while done < 10 {
        let fv: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let gv: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = CauchySolution::real(basis.clone(), fv).unwrap();
        let g = CauchySolution::real(basis.clone(), gv).unwrap();
        if equivalent(&f, &g, 1e-6).unwrap() {
            continue;
        }
        let seq = match pi_sequence(&f, &g, 20) {
            Ok(s) => s,
            Err(_) => continue,
        };
        done += 1;
        if seq.theta.abs() >= std::f64::consts::PI - 1e-3 {
            ok = false;
            detail = format!("theta {} too close to pi", seq.theta);
            break;
        }
        let (fp, _gp) = if seq.swapped { (&g, &f) } else { (&f, &g) };
        for (k, x) in seq.points.iter().enumerate() {
            let k = (k + 1) as f64;
            let v = x.value(&basis);
            let fval = fp.evaluate(x).unwrap();
            if !(v >= 0.0 && v <= 1.0 / k) || (fval - std::f64::consts::PI).abs() > 1.0 / k {
                ok = false;
                detail = format!("bounds violated at term {k}: value {v}, f {fval}");
            }
        }
        if !ok {
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 5.0 {
        ok = false;
        detail = format!("took {elapsed:.1}s");
    }
    report(6, "constructive pi-sequences for 10 non-equivalent pairs", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_7_kernel_split_orthogonality() {
    let mut ok = true;
    let mut detail = String::new();
    // random models with zero blocks have orthogonal splits
    let mut with_zero = 0;
    for seed in 0..40u64 {
        let g = random_model(seed, 5).unwrap();
        if g.zero_dim == 0 {
            continue;
        }
        with_zero += 1;
        let s = g.model.sample(&default_grid(&g.model.basis, 5)).unwrap();
        let split = kernel_split(&s).unwrap();
        if split.gram_offdiag > 1e-8 {
            ok = false;
            detail = format!("seed {seed}: gram {:.3e}", split.gram_offdiag);
            break;
        }
        if with_zero >= 5 {
            break;
        }
    }
    if with_zero < 5 {
        ok = false;
        detail = "not enough models with zero blocks".into();
    }
    // hand-built non-orthogonal split: g(x) = A diag(e^-x, 0) A^-1 with
    // a shear A; must be rejected with a bound-violation report
    if ok {
        let basis = ModuleBasis::standard();
        let a = FMat::from_rows(vec![vec![1.0, 2.0], vec![0.0, 1.0]]);
        let a_inv = FMat::from_rows(vec![vec![1.0, -2.0], vec![0.0, 1.0]]);
        let points = default_grid(&basis, 5);
        let samples: Vec<Matrix> = points
            .iter()
            .map(|p| {
                let v = p.value(&basis);
                let core = if p.is_zero() {
                    FMat::identity(2)
                } else {
                    FMat::from_rows(vec![vec![(-v).exp(), 0.0], vec![0.0, 0.0]])
                };
                Matrix::Real(a.matmul(&core).matmul(&a_inv))
            })
            .collect();
        let s = SampleSet { basis, points, samples, bound: None };
        let bound = BoundFunction::parse("exp(6*x)").unwrap();
        let c = classify(&s, &bound, &Tolerances::default()).unwrap();
        let failed_split = c
            .report
            .stages
            .last()
            .map_or(false, |st| st.name == "kernel-split" && st.status == "fail");
        let bound_report = c.report.violations.iter().any(|v| v.contains("bound"));
        if c.report.passed() || !failed_split || !bound_report {
            ok = false;
            detail = format!("non-orthogonal split not rejected: {:?}", c.report);
        }
    }
    report(7, "orthogonality of the kernel split and rejection of violations", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_8_markov_kernels() {
    let mut ok = true;
    let mut detail = String::new();
    let mut triples = triple_grid(5, 2.0);
    triples.truncate(100);
    let basis = ModuleBasis::standard();
    let grid = default_grid(&basis, 4);

    let min = min_kernel();
    let min_markov = markov_check(&min, &triples, 1e-12).unwrap().passed;
    let min_reduced = verify_semigroup(&to_semigroup(&min, &basis, &grid).unwrap(), 1e-9)
        .unwrap()
        .passed;
    if !min_markov || !min_reduced {
        ok = false;
        detail = "min kernel should pass both checks".into();
    }
    if min_markov != min_reduced {
        ok = false;
        detail = "verdicts disagree for the min kernel".into();
    }

    let frac = fractional_kernel(0.7).unwrap();
    let frac_rep = markov_check(&frac, &triples, 1e-3).unwrap();
    let frac_markov = frac_rep.passed;
    let frac_reduced = verify_semigroup(&to_semigroup(&frac, &basis, &grid).unwrap(), 1e-3)
        .unwrap()
        .passed;
    if frac_markov || frac_reduced || frac_rep.max_residual <= 1e-3 {
        ok = false;
        detail = "fractional kernel at H = 0.7 should fail both checks above 1e-3".into();
    }
    if frac_markov != frac_reduced {
        ok = false;
        detail = "verdicts disagree for the fractional kernel".into();
    }
    report(8, "Markov criterion and reduction agree on both kernels", ok);
    assert!(ok, "{detail}");
}

#[test]
fn acceptance_9_track_multiplicativity() {
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..10u64 {
        let g = random_model(seed, 6).unwrap();
        let s = g.model.sample(&default_grid(&g.model.basis, 5)).unwrap();
        let split = kernel_split(&s).unwrap();
        let comps = srpd(&split.invertible).unwrap();
        for (ci, comp) in comps.iter().enumerate() {
            let r = track_law_residual(&split.invertible, comp);
            if r > 1e-9 {
                ok = false;
                detail = format!("seed {seed} component {ci}: residual {r:.3e}");
            }
        }
        if !ok {
            break;
        }
    }
    report(9, "eigenvalue tracks satisfy the product law within 1e-9", ok);
    assert!(ok, "{detail}");
}
