use coper::cca::{correlation_loss, fit_cca};
use coper::cluster::{kmeans, KMeansConfig};
use coper::datagen::{synth_multiview, LatentSpec, MultiViewDataset, RandomSpec};
use coper::lda::{fit_lda, scatter_matrices};
use coper::linalg::{
    assignment_cost, center, covariance, inv_psd, inv_sqrt, optimal_assignment, spectral_norm, sym_eig, Divisor, Matrix,
};
use coper::metrics::{accuracy, adjusted_rand_index, normalized_mutual_information, silhouette, ClusterAssignment};
use coper::permute::{apply_plan, sample_plan};
use coper::perturb::{bound_check, error_terms, inject_label_noise};
use coper::pseudolabel::{multiview_agreement, refine_per_view, select_confident, ProbabilityMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn symmetric(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian(n, n, rng).symmetrize()
}

fn balanced_labels(n: usize, k: usize, rng: &mut ChaCha8Rng) -> ClusterAssignment {
    let mut l: Vec<usize> = (0..n).map(|i| i % k).collect();
    l.shuffle(rng);
    ClusterAssignment::new(l, k).unwrap()
}

fn random_map(k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut m: Vec<usize> = (0..k).collect();
    m.shuffle(rng);
    m
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_transposes(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = center(&gaussian(d1, n, &mut rng)).unwrap();
        let b = center(&gaussian(d2, n, &mut rng)).unwrap();
        let ab = covariance(&a, &b, Divisor::Unbiased).unwrap();
        let ba = covariance(&b, &a, Divisor::Unbiased).unwrap();
        prop_assert!(ab.sub(&ba.transpose()).max_abs() <= 1e-12);
    }

    #[test]
    fn eigendecomposition_trace_and_orthonormality(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = symmetric(n, &mut rng);
        let e = sym_eig(&a).unwrap();
        prop_assert!((e.values.iter().sum::<f64>() - a.trace()).abs() <= 1e-8);
        prop_assert!(e.vectors.t_matmul(&e.vectors).sub(&Matrix::identity(n)).max_abs() <= 1e-8);
        let norm = spectral_norm(&a);
        for v in &e.values {
            prop_assert!(norm >= v.abs() - 1e-10);
        }
    }

    #[test]
    fn inverse_square_root_squares_to_inverse(seed in any::<u64>(), n in 1usize..6, ridge in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(n, n + 3, &mut rng);
        let c = g.matmul_t(&g).scale(1.0 / (n + 3) as f64);
        let w = inv_sqrt(&c, ridge).unwrap();
        let inv = inv_psd(&c, ridge).unwrap();
        prop_assert!(w.matmul(&w).sub(&inv).max_abs() <= 1e-6 * inv.max_abs().max(1.0));
    }

    #[test]
    fn assignment_is_exhaustive_minimum(seed in any::<u64>(), k in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = Matrix::from_fn(k, k, |_, _| rng.random_range(0.0..10.0));
        let best = permutations(k).iter().map(|p| assignment_cost(&cost, p)).fold(f64::INFINITY, f64::min);
        let found = assignment_cost(&cost, &optimal_assignment(&cost).unwrap());
        prop_assert!((found - best).abs() <= 1e-9);
    }

    #[test]
    fn metrics_are_relabeling_invariant(seed in any::<u64>(), k in 1usize..=6, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred = ClusterAssignment::new(p, k).unwrap();
        let truth = ClusterAssignment::new(t, k).unwrap();
        let pred2 = pred.relabel(&random_map(k, &mut rng)).unwrap();
        let truth2 = truth.relabel(&random_map(k, &mut rng)).unwrap();
        prop_assert_eq!(accuracy(&pred, &truth).unwrap(), accuracy(&pred2, &truth2).unwrap());
        prop_assert_eq!(adjusted_rand_index(&pred, &truth).unwrap(), adjusted_rand_index(&pred2, &truth2).unwrap());
        prop_assert_eq!(
            normalized_mutual_information(&pred, &truth).unwrap(),
            normalized_mutual_information(&pred2, &truth2).unwrap()
        );
        let h = gaussian(2, n, &mut rng);
        prop_assert_eq!(silhouette(&h, &pred).ok(), silhouette(&h, &pred2).ok());
        prop_assert!(accuracy(&pred, &truth).unwrap() >= 1.0 / k as f64 - 1e-12);
    }

    #[test]
    fn partition_agrees_with_itself(seed in any::<u64>(), k in 2usize..=6, n in 12usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = balanced_labels(n, k, &mut rng);
        prop_assert_eq!(adjusted_rand_index(&l, &l).unwrap(), 1.0);
        prop_assert_eq!(accuracy(&l, &l).unwrap(), 1.0);
    }

    #[test]
    fn correlation_loss_bridges_to_cca(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, n in 12usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(2, n, &mut rng);
        let x1 = gaussian(d1, 2, &mut rng).matmul(&z).add(&gaussian(d1, n, &mut rng));
        let x2 = gaussian(d2, 2, &mut rng).matmul(&z).add(&gaussian(d2, n, &mut rng));
        let l12 = correlation_loss(&x1, &x2, 0.0).unwrap();
        prop_assert!((l12 - correlation_loss(&x2, &x1, 0.0).unwrap()).abs() <= 1e-8);
        prop_assert!(l12 >= -(d1.min(d2) as f64) - 1e-9);
        let m = fit_cca(&x1, &x2, d1.min(d2), 0.0).unwrap();
        prop_assert!((-l12 - m.correlations.iter().map(|r| r * r).sum::<f64>()).abs() <= 1e-8);
        prop_assert!(m.correlations.iter().all(|&r| (-1e-9..=1.0 + 1e-9).contains(&r)));
    }

    #[test]
    fn invertible_maps_reach_the_loss_floor(seed in any::<u64>(), d in 1usize..4, n in 12usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(d, n, &mut rng);
        let a = gaussian(d, d, &mut rng).add(&Matrix::identity(d).scale(3.0));
        let loss = correlation_loss(&x, &a.matmul(&x), 0.0).unwrap();
        prop_assert!((loss + d as f64).abs() <= 1e-7);
    }

    #[test]
    fn cca_ignores_invertible_reparameterization(seed in any::<u64>(), n in 30usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(2, n, &mut rng);
        let x1 = gaussian(3, 2, &mut rng).matmul(&z).add(&gaussian(3, n, &mut rng));
        let x2 = gaussian(2, 2, &mut rng).matmul(&z).add(&gaussian(2, n, &mut rng));
        let a = gaussian(3, 3, &mut rng).add(&Matrix::identity(3).scale(3.0));
        let m1 = fit_cca(&x1, &x2, 2, 0.0).unwrap();
        let m2 = fit_cca(&a.matmul(&x1), &x2, 2, 0.0).unwrap();
        for (r1, r2) in m1.correlations.iter().zip(&m2.correlations) {
            prop_assert!((r1 - r2).abs() <= 1e-6);
        }
    }

    #[test]
    fn lda_identities(seed in any::<u64>(), d in 1usize..4, k in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10 * k + d;
        let labels = balanced_labels(n, k, &mut rng);
        let shift = gaussian(d, k, &mut rng).scale(2.0);
        let x = Matrix::from_fn(d, n, |r, c| shift[(r, labels.labels()[c])]).add(&gaussian(d, n, &mut rng));
        let (ce, ca) = scatter_matrices(&x, &labels).unwrap();
        let xc = x.sub_row_offsets(&x.row_means());
        prop_assert!(ce.add(&ca).sub(&xc.matmul_t(&xc).scale(1.0 / n as f64)).max_abs() <= 1e-10);

        let lda = fit_lda(&x, &labels, 0.0).unwrap();
        let h = lda.eigvecs.column(0);
        let q = |m: &Matrix| h.iter().zip(m.matvec(&h)).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((q(&ca) / q(&ce) - lda.eigvals[0]).abs() <= 1e-8 * lda.eigvals[0].max(1.0));

        let a = gaussian(d, d, &mut rng).add(&Matrix::identity(d).scale(3.0));
        let moved = fit_lda(&a.matmul(&x), &labels, 0.0).unwrap();
        for (l1, l2) in lda.eigvals.iter().zip(&moved.eigvals) {
            prop_assert!((l1 - l2).abs() <= 1e-6 * l1.abs().max(1.0));
        }
    }

    #[test]
    fn plans_stay_within_clusters(seed in any::<u64>(), k in 2usize..5, n in 10usize..40, round in 0u64..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = balanced_labels(n, k, &mut rng);
        let ds = MultiViewDataset::new(vec![gaussian(3, n, &mut rng), gaussian(2, n, &mut rng)], Some(labels.clone())).unwrap();
        let plan = sample_plan(&labels, round, seed);
        let src = plan.source_indices(n).unwrap();
        for (i, &j) in src.iter().enumerate() {
            prop_assert_eq!(labels.labels()[i], labels.labels()[j]);
        }
        let moved = apply_plan(&ds, &plan, &[1]).unwrap();
        prop_assert_eq!(moved.labels.as_ref(), Some(&labels));
        let mut sorted = src.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let v = &moved.views[1];
        let (a, b) = (center(&ds.views[1]).unwrap(), center(v).unwrap());
        let ca = covariance(&a, &a, Divisor::Biased).unwrap();
        let cb = covariance(&b, &b, Divisor::Biased).unwrap();
        prop_assert!(ca.sub(&cb).max_abs() <= 1e-12);
    }

    #[test]
    fn agreement_keeps_only_consistent_labels(seed in any::<u64>(), n in 12usize..40, k in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Matrix::from_fn(n, k, |_, _| rng.random_range(0.01..1.0));
        let p = Matrix::from_fn(n, k, |r, c| p[(r, c)] / p.row(r).iter().sum::<f64>());
        let p = ProbabilityMatrix::new(p).unwrap();
        let sets = select_confident(&p, n.div_ceil(k)).unwrap();
        let views: Vec<_> = (0..3).map(|_| refine_per_view(&gaussian(2, n, &mut rng), &sets, 0.0).unwrap()).collect();
        let agreed = multiview_agreement(&views);
        let argmax = |y: &Vec<f64>| y.iter().enumerate().fold(0, |b, (i, v)| if *v > y[b] { i } else { b });
        for i in 0..n {
            let labels: Vec<usize> = agreed.iter().filter_map(|v| v.get(&i)).map(argmax).collect();
            prop_assert!(labels.windows(2).all(|w| w[0] == w[1]));
            for (before, after) in views.iter().zip(&agreed) {
                prop_assert!(!after.contains_key(&i) || before.contains_key(&i));
            }
        }
        let everything = refine_per_view(&gaussian(2, n, &mut rng), &sets, -1.0).unwrap();
        prop_assert_eq!(everything.len(), sets.union.len());
        prop_assert!(refine_per_view(&gaussian(2, n, &mut rng), &sets, 1.0 + 1e-9).unwrap().is_empty());
    }

    #[test]
    fn error_terms_sum_to_e(seed in any::<u64>(), noise in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = balanced_labels(60, 3, &mut rng);
        let x = gaussian(3, 60, &mut rng);
        let noisy = inject_label_noise(&labels, noise, seed).unwrap();
        let (e1, e2, e3) = error_terms(&x, &labels, &noisy).unwrap();
        let r = bound_check(&x, &labels, &noisy, 1e-6).unwrap();
        prop_assert_eq!(r.e, e1.add(&e2).add(&e3));
        let exact: Vec<Option<usize>> = labels.labels().iter().map(|&l| Some(l)).collect();
        let zero = bound_check(&x, &labels, &exact, 1e-6).unwrap();
        prop_assert_eq!(zero.d.max_abs(), 0.0);
        prop_assert!(zero.max_gap <= 1e-8);
    }

    #[test]
    fn kmeans_is_monotone_and_leaves_no_empty_cluster(seed in any::<u64>(), k in 2usize..6, n in 12usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(n, 2, &mut rng);
        let r = kmeans(&x, &KMeansConfig { restarts: 3, ..KMeansConfig::new(k, seed) }).unwrap();
        prop_assert!(r.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(r.assignment.counts().iter().all(|&c| c > 0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generators_are_pure(seed in any::<u64>(), n in 10usize..50) {
        let spec = LatentSpec::random(&RandomSpec::default(), seed).unwrap();
        let a = synth_multiview(&spec, n, seed).unwrap();
        let b = synth_multiview(&spec, n, seed).unwrap();
        prop_assert_eq!(a.views, b.views);
        prop_assert_eq!(a.labels, b.labels);
    }
}
