//! End-to-end acceptance run. Each criterion prints one `PASS` or `FAIL`
//! line with the measured values; the process exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use hpds_core::control::*;
use hpds_core::dynamics::*;
use hpds_core::hypergeometric::{gauss_g_integral, gauss_g_series};
use hpds_core::linalg::{self, Matrix};
use hpds_core::oracle::{integrate, integrate_at, IntegratorOptions, Termination};
use hpds_core::polynomial::{from_polynomial, to_polynomial, Monomial, PolynomialSpec};
use hpds_core::rng::SeededRng;
use hpds_core::spectral::*;
use hpds_core::tensor::{AlmostSymTensor, SymTensor, Tensor};
use hpds_core::transform::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- helpers

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / linalg::norm(b).max(1e-300)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn signed(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    let m = rng.uniform_in(lo, hi);
    if rng.uniform() < 0.5 { -m } else { m }
}

fn mono(e: &[u32], c: f64) -> Monomial {
    Monomial::new(e.to_vec(), c)
}

fn coeff(spec: &PolynomialSpec, eq: usize, e: &[u32]) -> f64 {
    spec.equations()[eq]
        .iter()
        .filter(|m| m.exponents == e)
        .map(|m| m.coeff)
        .sum()
}

/// `sum_r w_r v_r^{∘(k-1)} ∘ W_r` with `W = V^{-T}`.
fn structured(order: usize, v: &Matrix, weights: &[f64]) -> AlmostSymTensor {
    let n = v.nrows();
    let w = linalg::checked_inverse(v).unwrap().transpose();
    let mut t = Tensor::zeros(order, n);
    for r in 0..n {
        let vr = linalg::column(v, r);
        let wr = linalg::column(&w, r);
        let mut factors: Vec<&[f64]> = (0..order - 1).map(|_| vr.as_slice()).collect();
        factors.push(&wr);
        t.add_rank_one(weights[r], &factors);
    }
    AlmostSymTensor::new(t).unwrap()
}

fn well_conditioned(n: usize, rng: &mut SeededRng, max_cond: f64) -> Matrix {
    loop {
        let m = rng.gaussian_matrix(n, n);
        let sv = m.clone().singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() < max_cond {
            return m;
        }
    }
}

/// Random odeco system with orthonormal vectors and signed eigenvalues.
fn random_system(order: usize, dim: usize, rng: &mut SeededRng) -> (SymTensor, OdecoDecomposition) {
    let q = linalg::random_orthogonal(dim, rng);
    let lambdas: Vec<f64> = (0..dim).map(|_| signed(rng, 0.3, 2.0)).collect();
    let t = SymTensor::from_rank_one_sum(order, &lambdas, &q);
    let d = odeco_decompose(&t, 1e-8).unwrap();
    (t, d)
}

fn sample_times(end: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| end * i as f64 / count as f64).collect()
}

/// Twenty (order, dim) pairs cycling through k in {3,4,5}, n in {2,3,4}.
fn shapes() -> impl Iterator<Item = (usize, usize)> {
    (0..20).map(|i| (3 + i % 3, 2 + (i / 3) % 3))
}

// ------------------------------------------------------------- criteria

fn synthetic_quartic() -> Outcome {
    let start = Instant::now();
    let (a, b) = (2f64.sqrt() / 3.0, 7f64.sqrt() / 3.0);
    let v = Matrix::from_row_slice(2, 2, &[a, -b, b, a]);
    let t = SymTensor::from_rank_one_sum(4, &[-1.0, -2.0], &v);
    let d = odeco_decompose(&t, 1e-8).unwrap();
    let verdict = classify_global_even(&d).unwrap().verdict;
    let elapsed = start.elapsed().as_secs_f64();

    // the tensor reproduces every printed entry to four decimals
    let printed = [
        ([0, 0], [[-1.2593, 0.5543], [0.5543, -0.5185]]),
        ([0, 1], [[0.5543, -0.5185], [-0.5185, -0.1386]]),
        ([1, 0], [[0.5543, -0.5185], [-0.5185, -0.1386]]),
        ([1, 1], [[-0.5185, -0.1386], [-0.1386, -0.7037]]),
    ];
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    let mut rounds = true;
    for ([p, q], block) in printed {
        for i in 0..2 {
            for j in 0..2 {
                rounds &= round4(t.as_tensor().get(&[i, j, p, q])) == block[i][j];
            }
        }
    }
    let dl = (d.eigenvalues()[0] + 1.0).abs().max((d.eigenvalues()[1] + 2.0).abs());

    // the four-decimal coefficients themselves, for reference
    let printed_spec = PolynomialSpec::new(
        2,
        3,
        vec![
            vec![mono(&[3, 0], -1.2593), mono(&[2, 1], 1.6630), mono(&[1, 2], -1.5554), mono(&[0, 3], -0.1386)],
            vec![mono(&[3, 0], 0.5543), mono(&[2, 1], -1.5554), mono(&[1, 2], -0.4158), mono(&[0, 3], -0.7037)],
        ],
    )
    .unwrap();
    let rounded = from_polynomial(&printed_spec).as_tensor().symmetrize();
    let dr = odeco_decompose(&rounded, 1e-3).unwrap();
    let dl_rounded = (dr.eigenvalues()[0] + 1.0).abs().max((dr.eigenvalues()[1] + 2.0).abs());

    let pass = rounds && dl <= 1e-6 && verdict == Verdict::AsymptoticallyStable && elapsed < 1.0;
    outcome(
        pass,
        format!(
            "lambda = ({:.12}, {:.12}), max error {dl:.1e} (tol 1e-6); entries round to the printed slices: {rounds}; \
             verdict {} from the eigenvalue signs; {elapsed:.4} s (limit 1 s); \
             four-decimal coefficients alone give lambda error {dl_rounded:.1e}",
            d.eigenvalues()[0],
            d.eigenvalues()[1],
            verdict.as_str()
        ),
    )
}

fn population() -> Outcome {
    let h = 0.5f64.sqrt();
    let v = Matrix::from_row_slice(2, 2, &[h, h, h, -h]);
    let t = SymTensor::from_rank_one_sum(4, &[2.0, 2.0], &v);
    let spec = to_polynomial(&t.clone().into());
    let want: [(usize, [u32; 2], f64); 8] = [
        (0, [3, 0], 1.0),
        (0, [2, 1], 0.0),
        (0, [1, 2], 3.0),
        (0, [0, 3], 0.0),
        (1, [3, 0], 0.0),
        (1, [2, 1], 3.0),
        (1, [1, 2], 0.0),
        (1, [0, 3], 1.0),
    ];
    let coeff_err = want
        .iter()
        .map(|(eq, e, c)| (coeff(&spec, *eq, e) - c).abs())
        .fold(0.0, f64::max);

    let x0 = [0.5, 0.1];
    let alpha = linalg::mat_t_vec(&v, &x0);
    let formula = (1.0 / (4.0 * alpha[0] * alpha[0])).min(1.0 / (4.0 * alpha[1] * alpha[1]));
    let d = odeco_decompose(&t, 1e-8).unwrap();
    let report = classify_stability(&d, &x0).unwrap();
    let blowup = report.blowup_time.unwrap_or(f64::NAN);
    let blowup_err = (blowup - formula).abs().max((blowup - 1.0 / 0.72).abs());

    let tr = integrate(&HPDSystem::free(t), &x0, 2.0, 1e-8, 1e-10).unwrap();
    let (escape, crossed) = match tr.terminated {
        Termination::NormExceeded { time, .. } => (time, true),
        _ => (tr.escape_time().unwrap_or(f64::NAN), false),
    };
    let ratio = escape / blowup;
    let pass = coeff_err <= 1e-12 && blowup_err <= 1e-9 && crossed && (0.95..=1.01).contains(&ratio);
    outcome(
        pass,
        format!(
            "coefficient error {coeff_err:.1e} (tol 1e-12); blow-up {blowup:.12} vs formula {formula:.12}, \
             error {blowup_err:.1e} (tol 1e-9); RK4 (rtol 1e-8) crosses norm 1e6 at {escape:.10} = {ratio:.8} x blow-up \
             (band [0.95, 1.01])"
        ),
    )
}

fn three_species() -> Outcome {
    let spec = PolynomialSpec::new(
        3,
        3,
        vec![
            vec![mono(&[3, 0, 0], -1.0), mono(&[2, 1, 0], -3.0), mono(&[1, 2, 0], -3.0)],
            vec![mono(&[0, 3, 0], -1.0)],
            vec![
                mono(&[0, 0, 3], -1.0),
                mono(&[2, 0, 1], -3.0),
                mono(&[1, 0, 2], -3.0),
                mono(&[0, 2, 1], -3.0),
                mono(&[0, 1, 2], -3.0),
                mono(&[1, 1, 1], -6.0),
            ],
        ],
    )
    .unwrap();
    let a = from_polynomial(&spec);
    let b = vec![2.0, 2.0, 2.0];
    let (ok, fit) = is_transformable(&a, Threshold::relative(1e-12), &FitOptions::default()).unwrap();
    let rel = fit.relative_fit_error();
    let model = build_transformation(&fit, &Matrix::identity(3, 3)).unwrap();
    let p = model.p().unwrap().clone();
    let p_inv = inverse_transformation(&model).unwrap();

    // P differs from the printed matrix by a scaled permutation
    let printed = Matrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
    let m = linalg::checked_inverse(&printed).unwrap() * &p;
    let monomial = (0..3).all(|i| {
        (0..3).filter(|&j| m[(i, j)].abs() > 1e-9).count() == 1 && (0..3).filter(|&j| m[(j, i)].abs() > 1e-9).count() == 1
    });

    // conjugacy: x(t) = P y(t) for the controlled flows
    let odeco = transformed_tensor(&model).unwrap();
    let original = HPDSystem::new(a.clone(), Some(b.clone())).unwrap();
    let transformed = HPDSystem::new(odeco.into(), Some(linalg::mat_vec(&p_inv, &b))).unwrap();
    let x0 = [1.0, 1.0, 1.0];
    let times = sample_times(20.0, 40);
    let opts = IntegratorOptions::default();
    let xs = integrate_at(&original, &x0, &times, &opts).unwrap();
    let ys = integrate_at(&transformed, &linalg::mat_vec(&p_inv, &x0), &times, &opts).unwrap();
    let conj = xs
        .states
        .iter()
        .zip(&ys.states)
        .map(|(x, y)| rel_diff(&linalg::mat_vec(&p, y), x))
        .fold(0.0, f64::max);
    let conj_ok = xs.states.len() == times.len() && ys.states.len() == times.len() && conj <= 1e-6;

    let d = transformed_decomposition(&model).unwrap();
    let ye = controlled_equilibrium(&d, &linalg::mat_vec(&p_inv, &b)).unwrap();
    let xe = linalg::mat_vec(&p, &ye);
    let want = [0.3275, 1.2599, 0.2297];
    let xe_err = max_abs_diff(&xe, &want);
    let final_gap = max_abs_diff(xs.states.last().unwrap(), &xe);

    let pass = ok && rel < 1e-12 && monomial && conj_ok && xe_err <= 5e-4 && final_gap <= 1e-3;
    outcome(
        pass,
        format!(
            "transformable {ok}, relative fit error {rel:.1e} (tol 1e-12); printed^-1 P is a scaled permutation: {monomial}; \
             conjugacy error {conj:.1e} over 40 times (tol 1e-6); x_e = ({:.6}, {:.6}, {:.6}), error {xe_err:.1e} (tol 5e-4); \
             RK4 gap to x_e at t = 20: {final_gap:.1e} (tol 1e-3)",
            xe[0], xe[1], xe[2]
        ),
    )
}

fn closed_form_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(0x0dec0);
    let mut worst: f64 = 0.0;
    let mut short = 0;
    for (order, dim) in shapes() {
        let (t, d) = random_system(order, dim, &mut rng);
        let x0 = rng.normal_vec(dim);
        let sol = explicit_solution(&d, &x0).unwrap();
        let times = sample_times((0.9 * sol.domain_end()).min(10.0), 10);
        let tr = integrate_at(&HPDSystem::free(t), &x0, &times, &IntegratorOptions::default()).unwrap();
        if tr.states.len() != times.len() {
            short += 1;
        }
        for (x, &s) in tr.states.iter().zip(&times) {
            worst = worst.max(rel_diff(&eval_solution(&sol, s).unwrap(), x));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && short == 0 && elapsed < 60.0,
        format!(
            "20 systems x 10 times: max relative difference {worst:.1e} (tol 1e-6); \
             {short} trajectories stopped early; {elapsed:.2} s (limit 60 s)"
        ),
    )
}

/// Starts whose modal products are all negative where possible and zero
/// for modes that cannot decay.
fn decaying_start(d: &OdecoDecomposition, rng: &mut SeededRng) -> Option<Vec<f64>> {
    let k = d.order();
    let mut x = vec![0.0; d.dim()];
    let mut any = false;
    for (r, &l) in d.eigenvalues().iter().enumerate() {
        let alpha = if k % 2 == 1 {
            // odd power: choose the sign of alpha against lambda
            -l.signum() * rng.uniform_in(0.3, 1.0)
        } else if l < 0.0 {
            signed(rng, 0.3, 1.0)
        } else {
            continue;
        };
        any = true;
        for (xi, vi) in x.iter_mut().zip(d.eigenvector(r)) {
            *xi += alpha * vi;
        }
    }
    any.then_some(x)
}

fn trichotomy() -> Outcome {
    let mut rng = SeededRng::new(0x7a1c);
    let mut counts = [0usize; 3];
    let mut escape_fail = 0;
    let mut bound_fail = 0;
    let mut decay_fail = 0;
    let mut worst_decay: f64 = 0.0;
    let mut worst_prediction: f64 = 0.0;
    for (order, dim) in shapes() {
        let (t, d) = random_system(order, dim, &mut rng);
        let sys = HPDSystem::free(t);
        let mut starts = vec![rng.normal_vec(dim)];
        starts.extend(decaying_start(&d, &mut rng));
        for x0 in starts {
            let report = classify_stability(&d, &x0).unwrap();
            let x0_norm = linalg::norm(&x0);
            match report.verdict {
                Verdict::Unstable => {
                    counts[0] += 1;
                    let blowup = report.blowup_time.unwrap();
                    let tr = integrate(&sys, &x0, 1.05 * blowup, 1e-10, 1e-12).unwrap();
                    if !tr.escape_time().is_some_and(|e| e < 1.05 * blowup) {
                        escape_fail += 1;
                    }
                }
                verdict => {
                    let times = sample_times(50.0, 50);
                    let tr = integrate_at(&sys, &x0, &times, &IntegratorOptions::default()).unwrap();
                    if tr.escape_time().is_some() || tr.states.len() != times.len() {
                        escape_fail += 1;
                        continue;
                    }
                    let bound = (dim as f64).sqrt() * x0_norm;
                    if tr.states.iter().any(|x| linalg::norm(x) > bound * (1.0 + 1e-9)) {
                        bound_fail += 1;
                    }
                    if verdict == Verdict::AsymptoticallyStable {
                        counts[1] += 1;
                        let ratio = linalg::norm(tr.final_state()) / x0_norm;
                        let predicted = linalg::norm(&explicit_solution(&d, &x0).unwrap().eval(50.0).unwrap()) / x0_norm;
                        if ratio >= 1e-3 {
                            decay_fail += 1;
                        }
                        worst_decay = worst_decay.max(ratio);
                        worst_prediction = worst_prediction.max(predicted);
                    } else {
                        counts[2] += 1;
                    }
                }
            }
        }
    }
    let pass = escape_fail == 0 && bound_fail == 0 && decay_fail == 0;
    outcome(
        pass,
        format!(
            "{} unstable / {} asymptotically stable / {} stable starts; escape iff unstable: {escape_fail} mismatches; \
             norm bound sqrt(n)|x0|: {bound_fail} violations; |x(50)| < 1e-3 |x0|: {decay_fail} of {} violate it, \
             largest |x(50)|/|x0| = {worst_decay:.3e} (closed form {worst_prediction:.3e}; modes decay only like t^(-1/(k-2)))",
            counts[0], counts[1], counts[2], counts[1]
        ),
    )
}

fn unfolding_bound() -> Outcome {
    let mut rng = SeededRng::new(0x1e33);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50usize {
        let order = if i % 2 == 0 { 4 } else { 6 };
        let dim = 2 + (i / 2) % 2;
        let data = rng.normal_vec(dim.pow(order as u32));
        let t = Tensor::from_vec(order, dim, data).unwrap().symmetrize();
        let lambda1 = decompose_best_effort(&t, &DecomposeOptions::default()).decomposition.eigenvalues()[0];
        worst = worst.max(lambda1 - mu_max(&t).unwrap());
    }
    outcome(
        worst <= 1e-9,
        format!("50 tensors (k in {{4, 6}}, n in {{2, 3}}): max lambda_1 - mu_max = {worst:.3e} (must be <= 1e-9)"),
    )
}

/// Largest time at which the time map is resolvable in double precision:
/// short of an escape, and before a converging mode is within 1e-6 of its
/// equilibrium.
fn valid_window(p: &ControlledModalProblem) -> f64 {
    match p.fate() {
        ModalFate::Escapes { time } => (0.95 * time).min(5.0),
        ModalFate::Converges { equilibrium: e } => {
            let slope = (p.lambda * (p.order - 1) as f64 * e.powi(p.order as i32 - 2)).abs();
            let gap = (p.alpha - e).abs() / (1e-6 * e.abs().max(1.0));
            if slope > 0.0 && gap > 1.0 { (gap.ln() / slope).min(5.0) } else { 5.0 }
        }
        _ => 5.0,
    }
}

fn modal_round_trip() -> Outcome {
    let mut rng = SeededRng::new(0xc41a);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let order = 3 + (rng.uniform() * 3.0) as usize;
        let p = ControlledModalProblem::new(
            order,
            signed(&mut rng, 0.2, 2.0),
            rng.uniform_in(-3.0, 3.0),
            rng.uniform_in(-2.0, 2.0),
        )
        .unwrap();
        let t = rng.uniform_in(0.01, 1.0) * valid_window(&p);
        let c = solve_modal(&p, t, default_time_tolerance(t)).unwrap();
        let back = if c == p.alpha && p.fate() == ModalFate::Stationary { t } else { implicit_time(&p, c).unwrap() };
        worst = worst.max((back - t).abs());
    }
    let mut series_gap: f64 = 0.0;
    for i in 0..=20 {
        let a = 0.01 + 0.99 * i as f64 / 20.0;
        for j in 0..=36 {
            let z = -0.9 + 1.8 * j as f64 / 36.0;
            series_gap = series_gap.max((gauss_g_series(a, z).unwrap() - gauss_g_integral(a, z).unwrap()).abs());
        }
    }
    outcome(
        worst <= 1e-8 && series_gap <= 1e-10,
        format!(
            "200 problems: max |T(c(t)) - t| = {worst:.1e} (tol 1e-8); series vs quadrature on a in [0.01, 1], \
             z in [-0.9, 0.9]: max gap {series_gap:.1e} (tol 1e-10)"
        ),
    )
}

fn transform_conjugacy() -> Outcome {
    let mut rng = SeededRng::new(0x5c9d);
    let mut accepted = 0;
    let mut worst_fit: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let mut short = 0;
    for i in 0..10 {
        let (order, dim) = (3 + i % 2, 2 + i % 3);
        let v = well_conditioned(dim, &mut rng, 10.0);
        let weights: Vec<f64> = (0..dim).map(|_| signed(&mut rng, 0.5, 2.0)).collect();
        let a = structured(order, &v, &weights);
        let (ok, fit) = is_transformable(&a, Threshold::relative(1e-10), &FitOptions::default()).unwrap();
        worst_fit = worst_fit.max(fit.relative_fit_error());
        if !ok {
            continue;
        }
        accepted += 1;
        let model = build_transformation(&fit, &Matrix::identity(dim, dim)).unwrap();
        let p = model.p().unwrap().clone();
        let p_inv = inverse_transformation(&model).unwrap();
        let d = transformed_decomposition(&model).unwrap();
        let original = HPDSystem::free(a);
        let transformed = HPDSystem::free(transformed_tensor(&model).unwrap());
        for _ in 0..5 {
            let x0 = rng.unit_vector(dim);
            let y0 = linalg::mat_vec(&p_inv, &x0);
            let end = (0.5 * explicit_solution(&d, &y0).unwrap().domain_end()).min(2.0);
            let times = sample_times(end, 8);
            let opts = IntegratorOptions::default();
            let xs = integrate_at(&original, &x0, &times, &opts).unwrap();
            let ys = integrate_at(&transformed, &y0, &times, &opts).unwrap();
            if xs.states.len() != times.len() || ys.states.len() != times.len() {
                short += 1;
            }
            for (x, y) in xs.states.iter().zip(&ys.states) {
                worst = worst.max(rel_diff(&linalg::mat_vec(&p, y), x));
            }
        }
    }
    outcome(
        accepted == 10 && worst <= 1e-6 && short == 0,
        format!(
            "{accepted}/10 accepted at relative 1e-10 (largest relative fit error {worst_fit:.1e}); \
             max |P y(t) - x(t)| / |x(t)| = {worst:.1e} over 50 starts (tol 1e-6); {short} trajectories stopped early"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("synthetic quartic", synthetic_quartic),
        ("population blow-up", population),
        ("three species", three_species),
        ("closed form vs oracle", closed_form_vs_oracle),
        ("stability trichotomy", trichotomy),
        ("unfolding bound", unfolding_bound),
        ("modal time map", modal_round_trip),
        ("transform conjugacy", transform_conjugacy),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("{tag} {} {name}: {}", i + 1, result.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
