use mixprod::hadamard::hadamard_extension;
use mixprod::linalg::{eig_real, singular_values, spectral_norm, svd};
use mixprod::model::ModelClassParams;
use mixprod::{draw_samples, exact_moments, model_distance, random_model, validate_membership, MixtureModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small_model(k: usize, n: usize, seed: u64) -> MixtureModel {
    random_model(k, n, 0.1, 0.05, seed).unwrap()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_distance_is_a_pseudometric(k in 1usize..5, n in 1usize..6, s in any::<[u64; 3]>()) {
        let (a, b, c) = (small_model(k, n, s[0]), small_model(k, n, s[1]), small_model(k, n, s[2]));
        let ab = model_distance(&a, &b).unwrap();
        prop_assert_eq!(model_distance(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - model_distance(&b, &a).unwrap()).abs() <= 1e-12);
        let ac = model_distance(&a, &c).unwrap();
        let cb = model_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn relabeling_is_invisible(k in 1usize..6, n in 1usize..5, seed: u64, perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let model = small_model(k, n, seed);
        let perm: Vec<usize> = perm.into_iter().filter(|&j| j < k).collect();
        let permuted = model.permute_columns(&perm).unwrap();
        prop_assert_eq!(model_distance(&model, &permuted).unwrap(), 0.0);
        let (mu, nu) = (exact_moments(&model).unwrap(), exact_moments(&permuted).unwrap());
        for (x, y) in mu.values().iter().zip(nu.values()) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn random_models_are_members(k in 1usize..7, n in 1usize..8, zeta in 0.01f64..0.2, slack in 0.01f64..1.0, seed: u64) {
        let pi_min = slack / k as f64;
        let model: MixtureModel = random_model(k, n, zeta, pi_min, seed).unwrap();
        let params = ModelClassParams::new(zeta, pi_min).unwrap();
        prop_assert!(validate_membership(&model, &params).member);
        // membership is monotone in both parameters
        let looser = ModelClassParams::new(zeta * 0.5, pi_min * 0.5).unwrap();
        prop_assert!(validate_membership(&model, &looser).member);
    }

    #[test]
    fn exact_moments_are_probabilities(k in 1usize..5, n in 1usize..8, seed: u64) {
        let mu = exact_moments(&small_model(k, n, seed)).unwrap();
        prop_assert_eq!(mu.values()[0], 1.0);
        prop_assert!(mu.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn weyl_bound(rows in 1usize..17, cols in 1usize..17, seed: u64, scale in -8i32..0) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        let e = DMatrix::<f64>::from_fn(rows, cols, |_, _| 10f64.powi(scale) * rng.gen_range(-1.0..1.0));
        let sa = singular_values(&a).unwrap();
        let sb = singular_values(&(&a + &e)).unwrap();
        let en = spectral_norm(&e).unwrap();
        for (x, y) in sa.iter().zip(sb.iter()) {
            prop_assert!((x - y).abs() <= en + 1e-10);
        }
    }

    #[test]
    fn eckart_young(a in (1usize..17, 1usize..17).prop_flat_map(|(r, c)| matrix(r, c)), frac in 0.0f64..1.0) {
        let s = svd(&a).unwrap();
        let r = ((s.sigma.len() as f64) * frac) as usize;
        let resid = spectral_norm(&(&a - s.truncate(r))).unwrap();
        let expect = s.sigma.get(r).copied().unwrap_or(0.0);
        prop_assert!((resid - expect).abs() <= 1e-10);
        // Frobenius residual is the tail energy
        let tail: f64 = s.sigma.iter().skip(r).map(|x| x * x).sum();
        prop_assert!(((&a - s.truncate(r)).norm() - tail.sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn eig_defect_on_diagonalizable(k in 1usize..9, seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = DMatrix::<f64>::from_fn(k, k, |i, j| if i == j { 2.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
        let mut lambdas: Vec<f64> = (0..k).map(|j| j as f64 / k as f64 + rng.gen_range(0.0..0.5 / k as f64)).collect();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas.clone()));
        let a = &p * d * p.clone().try_inverse().unwrap();
        let eig = eig_real(&a, None).unwrap();
        prop_assert!(eig.max_defect <= 1e-8 * spectral_norm(&a).unwrap());
        lambdas.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (got, want) in eig.eigenvalues.iter().zip(&lambdas) {
            prop_assert!((got - want).abs() <= 1e-8);
        }
    }
}

use rand::{Rng, SeedableRng};

fn check_multiplicative(m: &DMatrix<f64>, rel: f64) {
    let h = hadamard_extension(m).unwrap();
    let full = (1usize << m.nrows()) - 1;
    for a in 0..=full {
        // every b disjoint from a
        let rest = full & !a;
        let mut b = rest;
        loop {
            for j in 0..m.ncols() {
                let prod = h.data()[(a, j)] * h.data()[(b, j)];
                let got = h.data()[(a | b, j)];
                assert!((got - prod).abs() <= rel * prod.abs(), "{got} vs {prod}");
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & rest;
        }
    }
}

#[test]
fn hadamard_extension_is_multiplicative() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for r in 0..=10 {
        // dyadic entries with 4 significant bits: every product is exact
        let dyadic = DMatrix::<f64>::from_fn(r, 2, |_, _| rng.gen_range(-16i32..=16) as f64 / 8.0);
        check_multiplicative(&dyadic, 0.0);
        let real = DMatrix::<f64>::from_fn(r, 2, |_, _| rng.gen_range(-1.5..1.5));
        check_multiplicative(&real, 4.0 * r as f64 * f64::EPSILON);
    }
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let model: MixtureModel = random_model(3, 6, 0.2, 0.1, 17).unwrap();
    let draw = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| draw_samples(&model, 5000, 99).unwrap())
    };
    let single = draw(1);
    assert_eq!(single, draw(4));
    assert_eq!(single, draw(7));
}
