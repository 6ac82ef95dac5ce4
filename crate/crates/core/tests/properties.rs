//! Property checks over randomly drawn inputs.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rlgr::baselines::mean_impute;
use rlgr::dataio::{l2_normalize, nmse_model, prediction_nmse, weibull_fit, DatasetBundle, Provenance, Split};
use rlgr::estimators::{empirical_moments, plugin_moments_rlgr, threshold_moments};
use rlgr::solver::{objective_value, prox_l1, smooth_gradient};
use rlgr::{fit, Hyperparams, MaskedTaskData, ModelMatrix, MomentPair, SolverSettings, TaskGraph, ThresholdVariant};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

fn random_graph(k: usize, bits: u64) -> TaskGraph {
    let mut edges = Vec::new();
    let mut b = 0;
    for a in 1..=k {
        for c in a + 1..=k {
            if bits >> b & 1 == 1 {
                edges.push((a, c));
            }
            b += 1;
        }
    }
    TaskGraph::from_edges(k, &edges).unwrap()
}

fn random_moments(rng: &mut ChaCha8Rng, k: usize, p: usize, n: usize) -> Vec<MomentPair> {
    (0..k)
        .map(|_| {
            let x = gaussian(rng, n, p);
            let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            empirical_moments(&x, &y).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_columns_have_one_plus_and_one_minus(k in 1usize..7, bits in any::<u64>()) {
        let g = random_graph(k, bits);
        let r = g.incidence();
        for col in r.entries().column_iter() {
            prop_assert_eq!(col.iter().filter(|&&v| v == 1).count(), 1);
            prop_assert_eq!(col.iter().filter(|&&v| v == -1).count(), 1);
            prop_assert_eq!(col.iter().filter(|&&v| v == 0).count(), k - 2);
        }
    }

    #[test]
    fn laplacian_is_symmetric_psd_with_zero_row_sums(k in 1usize..7, bits in any::<u64>()) {
        let l = random_graph(k, bits).laplacian();
        prop_assert_eq!(&l, &l.transpose());
        for row in l.row_iter() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
        let eigs = l.symmetric_eigen().eigenvalues;
        prop_assert!(eigs.iter().all(|&e| e > -1e-10));
    }

    #[test]
    fn mean_impute_keeps_observed_entries_and_column_means(seed in any::<u64>(), n in 3usize..15, p in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(&mut rng, n, p);
        let mut mask = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() > 0.4);
        for c in 0..p {
            mask[(0, c)] = true;
        }
        let data = MaskedTaskData::new(x.clone(), mask.clone(), DVector::zeros(n)).unwrap();
        let filled = mean_impute(&data).values;
        for c in 0..p {
            let obs: Vec<f64> = (0..n).filter(|&r| mask[(r, c)]).map(|r| x[(r, c)]).collect();
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            assert_relative_eq!(filled.column(c).mean(), mean, epsilon = 1e-12);
            for r in 0..n {
                if mask[(r, c)] {
                    prop_assert_eq!(filled[(r, c)], x[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn metrics_are_invariant_to_task_order(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = gaussian(&mut rng, 6, k);
        let est = gaussian(&mut rng, 6, k);
        let perm: Vec<usize> = (0..k).rev().collect();
        let permute = |m: &DMatrix<f64>| m.select_columns(&perm);
        let a = nmse_model(&ModelMatrix::new(est.clone()).unwrap(), &ModelMatrix::new(truth.clone()).unwrap()).unwrap();
        let b = nmse_model(&ModelMatrix::new(permute(&est)).unwrap(), &ModelMatrix::new(permute(&truth)).unwrap()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);

        let preds: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(5, |_, _| rng.sample(StandardNormal))).collect();
        let ys: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(5, |_, _| rng.sample(StandardNormal))).collect();
        let rev = |v: &[DVector<f64>]| v.iter().rev().cloned().collect::<Vec<_>>();
        assert_relative_eq!(
            prediction_nmse(&preds, &ys).unwrap(),
            prediction_nmse(&rev(&preds), &rev(&ys)).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn l2_normalization_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks: Vec<MaskedTaskData> = (0..2)
            .map(|_| MaskedTaskData::complete(gaussian(&mut rng, 8, 3), DVector::zeros(8)).unwrap())
            .collect();
        let bundle = DatasetBundle::new(tasks, TaskGraph::chain(2).unwrap(), Split::Full, Provenance::Synthetic).unwrap();
        let once = l2_normalize(&bundle).unwrap();
        let twice = l2_normalize(&once).unwrap();
        for (a, b) in once.tasks.iter().zip(&twice.tasks) {
            prop_assert!((a.values() - b.values()).amax() < 1e-12);
            for c in a.values().column_iter() {
                assert_relative_eq!(c.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weibull_fit_is_scale_equivariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 5.0 + 0.1).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let a = weibull_fit(&xs).unwrap();
        let b = weibull_fit(&scaled).unwrap();
        assert_relative_eq!(a.shape, b.shape, max_relative = 1e-7);
        assert_relative_eq!(a.scale * c, b.scale, max_relative = 1e-7);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), k in 1usize..4, bits in any::<u64>(), lambda in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 4;
        let moments = random_moments(&mut rng, k, p, 10);
        let r = random_graph(k, bits).incidence();
        let hyper = Hyperparams::new(0.0, lambda, 0.0).unwrap();
        let w = gaussian(&mut rng, p, k);
        let g = smooth_gradient(&ModelMatrix::new(w.clone()).unwrap(), &moments, &hyper, &r).unwrap();
        let f = |m: DMatrix<f64>| objective_value(&ModelMatrix::new(m).unwrap(), &moments, &hyper, &r).unwrap();
        let h = 1e-5;
        for a in 0..p {
            for b in 0..k {
                let mut up = w.clone();
                up[(a, b)] += h;
                let mut down = w.clone();
                down[(a, b)] -= h;
                let fd = (f(up) - f(down)) / (2.0 * h);
                prop_assert!((fd - g[(a, b)]).abs() <= 1e-6 * (1.0 + g.norm()));
            }
        }
    }

    #[test]
    fn solution_is_a_prox_gradient_fixed_point(seed in any::<u64>(), k in 1usize..4, mu in 0.01f64..1.0, lambda in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moments = random_moments(&mut rng, k, 5, 30);
        let r = TaskGraph::chain(k).unwrap().incidence();
        let hyper = Hyperparams::new(mu, lambda, 0.0).unwrap();
        let settings = SolverSettings { tol: 1e-14, max_iters: 50_000, ..SolverSettings::default() };
        let report = fit(&moments, &hyper, &r, &settings).unwrap();
        let w = report.model.coefficients();
        let g = smooth_gradient(&report.model, &moments, &hyper, &r).unwrap();
        let t = 0.1;
        let next = prox_l1(&(w - &g * t), t * mu / 2.0);
        prop_assert!((&next - w).amax() < 1e-5, "moved by {}", (&next - w).amax());
    }

    #[test]
    fn objective_trace_never_increases(seed in any::<u64>(), mu in 0.0f64..1.0, lambda in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moments = random_moments(&mut rng, 3, 6, 20);
        let r = TaskGraph::chain(3).unwrap().incidence();
        let report = fit(&moments, &Hyperparams::new(mu, lambda, 0.0).unwrap(), &r, &SolverSettings::default()).unwrap();
        for pair in report.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0));
        }
    }

    #[test]
    fn scaling_moments_and_penalties_keeps_the_solution(seed in any::<u64>(), c in 0.1f64..10.0) {
        // F(W; cG, cg, c mu, c lambda) = c F(W; G, g, mu, lambda).
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moments = random_moments(&mut rng, 2, 4, 25);
        let scaled: Vec<MomentPair> = moments.iter().map(|m| m.scaled(c)).collect();
        let r = TaskGraph::chain(2).unwrap().incidence();
        let settings = SolverSettings { tol: 1e-14, max_iters: 50_000, ..SolverSettings::default() };
        let a = fit(&moments, &Hyperparams::new(0.2, 0.5, 0.0).unwrap(), &r, &settings).unwrap();
        let b = fit(&scaled, &Hyperparams::new(0.2 * c, 0.5 * c, 0.0).unwrap(), &r, &settings).unwrap();
        prop_assert!((a.model.coefficients() - b.model.coefficients()).amax() < 1e-6);
    }

    #[test]
    fn complete_data_estimates_equal_empirical_moments(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(&mut rng, 12, 4);
        let y = DVector::from_fn(12, |_, _| rng.sample(StandardNormal));
        let data = MaskedTaskData::complete(x.clone(), y.clone()).unwrap();
        let plug = plugin_moments_rlgr(&data).unwrap();
        let emp = empirical_moments(&x, &y).unwrap();
        prop_assert_eq!(plug.gamma_mat(), emp.gamma_mat());
        prop_assert_eq!(plug.gamma_vec(), emp.gamma_vec());
        let t = threshold_moments(&plug, 0.0, ThresholdVariant::Reflect).unwrap();
        prop_assert_eq!(t.gamma_mat(), emp.gamma_mat());
    }
}
