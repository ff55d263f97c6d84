mod common;

use common::{random_odeco, rel_diff};
use hpds_core::dynamics::*;
use hpds_core::linalg::{self, Matrix};
use hpds_core::oracle::{integrate, integrate_at, IntegratorOptions};
use hpds_core::rng::SeededRng;
use hpds_core::spectral::{odeco_decompose, OdecoDecomposition};
use hpds_core::tensor::SymTensor;
use proptest::prelude::*;

fn signed_lambdas(dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let m = rng.uniform_in(0.3, 2.0);
            if rng.uniform() < 0.5 { -m } else { m }
        })
        .collect()
}

fn system(order: usize, dim: usize, lambdas: &[f64], rng: &mut SeededRng) -> (SymTensor, OdecoDecomposition) {
    let (_, _, q) = random_odeco(order, dim, rng, 1.0, 1.0);
    let t = SymTensor::from_rank_one_sum(order, lambdas, &q);
    let d = odeco_decompose(&t, 1e-8).unwrap();
    (t, d)
}

fn sample_times(end: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| end * i as f64 / count as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn closed_form_satisfies_the_ode(seed in any::<u64>(), order in 3usize..6, dim in 2usize..5) {
        let mut rng = SeededRng::new(seed);
        let lambdas = signed_lambdas(dim, &mut rng);
        let (t, d) = system(order, dim, &lambdas, &mut rng);
        // unit states keep the blow-up time away from zero, so the interior
        // point stays well separated from the singularity
        let x0 = rng.unit_vector(dim);
        let sol = explicit_solution(&d, &x0).unwrap();
        let h = 1e-5;
        let s = 0.5 * sol.domain_end().min(2.0);
        let plus = sol.eval(s + h).unwrap();
        let minus = sol.eval(s - h).unwrap();
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let rhs = t.apply(&sol.eval(s).unwrap()).unwrap();
        prop_assert!(rel_diff(&fd, &rhs) <= 1e-6, "{fd:?} vs {rhs:?}");
    }

    #[test]
    fn closed_form_matches_the_oracle(seed in any::<u64>(), order in 3usize..6, dim in 2usize..5) {
        let mut rng = SeededRng::new(seed);
        let lambdas = signed_lambdas(dim, &mut rng);
        let (t, d) = system(order, dim, &lambdas, &mut rng);
        let x0 = rng.normal_vec(dim);
        let sol = explicit_solution(&d, &x0).unwrap();
        let times = sample_times((0.9 * sol.domain_end()).min(10.0), 8);
        let tr = integrate_at(&HPDSystem::free(t), &x0, &times, &IntegratorOptions::default()).unwrap();
        prop_assert_eq!(tr.states.len(), times.len());
        for (x, &s) in tr.states.iter().zip(&times) {
            let closed = eval_solution(&sol, s).unwrap();
            prop_assert!(rel_diff(&closed, x) <= 1e-6, "t = {s}");
            // orthonormal vectors carry the norm over unchanged
            let c = sol.modal(s).unwrap();
            prop_assert!((linalg::norm(&closed) - linalg::norm(&c)).abs() <= 1e-12 * linalg::norm(&c).max(1.0));
        }
    }

    #[test]
    fn verdicts_are_witnessed_by_the_oracle(seed in any::<u64>(), order in 3usize..6, dim in 2usize..5) {
        let mut rng = SeededRng::new(seed);
        let lambdas = signed_lambdas(dim, &mut rng);
        let (t, d) = system(order, dim, &lambdas, &mut rng);
        let sys = HPDSystem::free(t);
        // a random state and one lying in a decaying invariant subspace
        let mut starts = vec![rng.normal_vec(dim)];
        let decaying: Vec<usize> = (0..dim).filter(|&r| {
            let l = d.eigenvalues()[r];
            l < 0.0 && order % 2 == 0
        }).collect();
        if !decaying.is_empty() {
            let mut x = vec![0.0; dim];
            for &r in &decaying {
                let s = rng.normal();
                for (xi, vi) in x.iter_mut().zip(d.eigenvector(r)) {
                    *xi += s * vi;
                }
            }
            starts.push(x);
        }
        for x0 in starts {
            let report = classify_stability(&d, &x0).unwrap();
            let bound = (dim as f64).sqrt() * linalg::norm(&x0);
            match report.verdict {
                Verdict::Unstable => {
                    let blowup = report.blowup_time.unwrap();
                    let tr = integrate(&sys, &x0, 1.05 * blowup, 1e-10, 1e-12).unwrap();
                    let escape = tr.escape_time();
                    prop_assert!(escape.is_some_and(|e| e < 1.05 * blowup), "{:?} vs {blowup}", tr.terminated);
                }
                _ => {
                    let tr = integrate_at(&sys, &x0, &sample_times(20.0, 20), &IntegratorOptions::default()).unwrap();
                    prop_assert_eq!(tr.states.len(), 20);
                    for x in &tr.states {
                        prop_assert!(linalg::norm(x) <= bound * (1.0 + 1e-9));
                    }
                }
            }
        }
    }

    #[test]
    fn global_verdict_agrees_with_pointwise_classification(seed in any::<u64>(), half in 2usize..4, dim in 2usize..5) {
        let mut rng = SeededRng::new(seed);
        let order = 2 * half;
        let lambdas = signed_lambdas(dim, &mut rng);
        let (_, d) = system(order, dim, &lambdas, &mut rng);
        let global = classify_global_even(&d).unwrap();
        for _ in 0..100 {
            let x0 = rng.normal_vec(dim);
            let r = classify_stability(&d, &x0).unwrap();
            // a product inside the zero tolerance counts as zero; for k = 6
            // that happens once |alpha_r| drops to about 1e-3 ||x0||
            let tol = product_zero_tolerance(&d, &x0);
            if r.mode_products.iter().any(|p| p.abs() <= tol) {
                let expected = if r.mode_products.iter().any(|&p| p > tol) {
                    Verdict::Unstable
                } else {
                    Verdict::Stable
                };
                prop_assert_eq!(r.verdict, expected);
            } else {
                prop_assert_eq!(r.verdict, global.verdict);
            }
        }
    }

    #[test]
    fn unfolding_verdict_never_overstates(seed in any::<u64>(), half in 2usize..4, dim in 2usize..4, negative in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let order = 2 * half;
        let lambdas: Vec<f64> = if negative {
            (0..dim).map(|_| -rng.uniform_in(0.3, 2.0)).collect()
        } else {
            signed_lambdas(dim, &mut rng)
        };
        let (t, d) = system(order, dim, &lambdas, &mut rng);
        let global = classify_global_even(&d).unwrap();
        if let Some(by_unfolding) = classify_by_unfolding(&t).unwrap() {
            prop_assert!(global.verdict.at_least(by_unfolding.verdict), "{:?} vs {:?}", global.verdict, by_unfolding.verdict);
        }
    }

    #[test]
    fn linear_case_matches_matrix_exponential(seed in any::<u64>(), dim in 1usize..5, t in 0.0f64..3.0) {
        let mut rng = SeededRng::new(seed);
        let g = rng.gaussian_matrix(dim, dim);
        let m = (&g + g.transpose()) * 0.5;
        let sym = SymTensor::new(hpds_core::Tensor::from_vec(2, dim, m.transpose().as_slice().to_vec()).unwrap()).unwrap();
        let d = odeco_decompose(&sym, 1e-8).unwrap();
        let x0 = rng.normal_vec(dim);
        let got = eval_solution_k2(&d, &x0, t).unwrap();
        let want = linalg::mat_vec(&expm(&(m * t)), &x0);
        prop_assert!(rel_diff(&got, &want) <= 1e-10);
    }
}

/// Scaling and squaring with a Taylor core; independent of any
/// eigendecomposition.
fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = a.abs().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = Matrix::identity(n, n);
    let mut sum = Matrix::identity(n, n);
    for j in 1..30 {
        term = &term * &scaled / j as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
