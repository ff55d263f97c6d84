use hpds_core::polynomial::{from_polynomial, Monomial, PolynomialSpec};
use hpds_core::rng::SeededRng;
use hpds_core::tensor::{SymTensor, Tensor};
use proptest::prelude::*;

fn random_tensor(order: usize, dim: usize, rng: &mut SeededRng) -> Tensor {
    let data = rng.normal_vec(dim.pow(order as u32));
    Tensor::from_vec(order, dim, data).unwrap()
}

/// Every exponent vector of total degree `degree` in `dim` variables.
fn exponent_vectors(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![degree]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in exponent_vectors(dim - 1, degree - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn random_spec(dim: usize, degree: usize, rng: &mut SeededRng) -> PolynomialSpec {
    let mut equations = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut eq = Vec::new();
        for e in exponent_vectors(dim, degree as u32) {
            if rng.uniform() < 0.7 {
                eq.push(Monomial::new(e, rng.normal()));
            }
        }
        equations.push(eq);
    }
    PolynomialSpec::new(dim, degree, equations).unwrap()
}

fn sorted(idx: &[usize]) -> Vec<usize> {
    let mut s = idx.to_vec();
    s.sort_unstable();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetrized_entries_are_permutation_invariant(seed in any::<u64>(), order in 2usize..6, dim in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let s = random_tensor(order, dim, &mut rng).symmetrize();
        let t = s.as_tensor();
        let mut idx = vec![0; order];
        for lin in 0..t.data().len() {
            t.multi_index(lin, &mut idx);
            let canonical = t.get(&sorted(&idx));
            prop_assert!((t.get(&idx) - canonical).abs() <= 1e-15 * (1.0 + canonical.abs()));
        }
        prop_assert!(SymTensor::new(t.clone()).is_ok());
    }

    #[test]
    fn apply_matches_monomial_evaluation(seed in any::<u64>(), dim in 1usize..4, degree in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let spec = random_spec(dim, degree, &mut rng);
        let a = from_polynomial(&spec);
        for _ in 0..100 {
            let x = rng.normal_vec(dim);
            let got = a.apply(&x).unwrap();
            let want = spec.evaluate(&x);
            let scale = spec
                .equations()
                .iter()
                .flat_map(|eq| eq.iter().map(|m| m.coeff.abs()))
                .sum::<f64>()
                * x.iter().fold(1.0f64, |m, v| m.max(v.abs())).powi(degree as i32);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-12 * scale.max(1e-300), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn polyval_is_homogeneous(seed in any::<u64>(), order in 2usize..6, dim in 1usize..4, s in -3.0f64..3.0) {
        let mut rng = SeededRng::new(seed);
        let t = random_tensor(order, dim, &mut rng).symmetrize();
        let x = rng.normal_vec(dim);
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let base = t.polyval(&x).unwrap();
        let scaled = t.polyval(&sx).unwrap();
        let want = s.powi(order as i32) * base;
        let size = t.norm() * linalg_norm(&sx).powi(order as i32);
        prop_assert!((scaled - want).abs() <= 1e-12 * size.max(1e-300));
    }

    #[test]
    fn even_order_unfolding_is_symmetric(seed in any::<u64>(), half in 1usize..4, dim in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let t = random_tensor(2 * half, dim, &mut rng).symmetrize();
        let u = t.unfold_psi().unwrap();
        prop_assert_eq!(u.nrows(), dim.pow(half as u32));
        prop_assert!((&u - u.transpose()).abs().max() <= 1e-15 * t.norm().max(1.0));
    }

    #[test]
    fn symmetrize_is_idempotent_and_keeps_the_form(seed in any::<u64>(), order in 2usize..6, dim in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let raw = random_tensor(order, dim, &mut rng);
        let s = raw.symmetrize();
        let twice = s.as_tensor().symmetrize();
        prop_assert!(hpds_core::tensor::frob_distance(s.as_tensor(), twice.as_tensor()).unwrap() <= 1e-14 * s.norm().max(1.0));
        for _ in 0..10 {
            let x = rng.normal_vec(dim);
            let want = raw.full_contraction(&x).unwrap();
            let got = s.polyval(&x).unwrap();
            let size = raw.norm() * linalg_norm(&x).powi(order as i32);
            prop_assert!((got - want).abs() <= 1e-12 * size.max(1e-300));
        }
    }
}

fn linalg_norm(x: &[f64]) -> f64 {
    hpds_core::linalg::norm(x)
}
