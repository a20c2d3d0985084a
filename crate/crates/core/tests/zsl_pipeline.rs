mod common;

use common::rng;
use mbfa::pipeline::{infer_embedded, simplex_grid};
use mbfa::{
    cosine_similarity, generate_synthetic, grid_search_weights, sweep_dimension, train, FusionWeights,
    GridSearchOptions, PrototypeBank, SyntheticSpec, TrainOptions, ViewSpec,
};
use proptest::prelude::*;
use rand::Rng;

fn spec(seed: u64, sigma: f64) -> SyntheticSpec {
    SyntheticSpec {
        latent_dim: 8,
        class_count: 12,
        instances_per_class: 30,
        unseen_count: 4,
        latent_sigma: sigma,
        views: vec![
            ViewSpec::new(20, sigma),
            ViewSpec::new(10, sigma),
            ViewSpec::new(12, sigma),
        ],
        seed,
    }
}

/// Direct evaluation of the fused argmax: explicit loops, first maximum wins.
#[allow(clippy::needless_range_loop)]
fn loop_oracle(theta: &[f64], bank: &PrototypeBank, alphas: &[f64]) -> usize {
    let mut best_class = bank.classes[0];
    let mut best_score = f64::NEG_INFINITY;
    for l in 0..bank.classes.len() {
        let mut score = 0.0;
        for k in 0..alphas.len() {
            let p = &bank.embedded[k][l];
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for i in 0..theta.len() {
                ab += theta[i] * p[i];
                aa += theta[i] * theta[i];
                bb += p[i] * p[i];
            }
            let sim = if aa.sqrt() < 1e-15 || bb.sqrt() < 1e-15 {
                0.0
            } else {
                (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
            };
            score += alphas[k] * sim;
        }
        if score > best_score {
            best_score = score;
            best_class = bank.classes[l];
        }
    }
    best_class
}

#[test]
fn inference_matches_loop_oracle() {
    let mut g = rng(5);
    for case in 0..300 {
        let (k, n, d) = (g.random_range(1..4), g.random_range(2..7), g.random_range(1..5));
        let mut embedded: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| (0..d).map(|_| g.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        if case % 3 == 0 {
            // duplicate prototypes force exact ties
            for per_type in &mut embedded {
                per_type[n - 1] = per_type[0].clone();
            }
        }
        let bank = PrototypeBank {
            classes: (100..100 + n).collect(),
            embedded,
        };
        let weights = if case % 4 == 0 {
            FusionWeights::one_hot(g.random_range(0..k), k)
        } else {
            FusionWeights::normalized(&(0..k).map(|_| g.random_range(0.0..1.0)).collect::<Vec<_>>()).unwrap()
        };
        let theta: Vec<f64> = if case % 3 == 0 {
            bank.embedded[0][0].clone()
        } else {
            (0..d).map(|_| g.random_range(-1.0..1.0)).collect()
        };
        let (class, _) = infer_embedded(&theta, &bank, &weights).unwrap();
        assert_eq!(class, loop_oracle(&theta, &bank, weights.alphas()), "case {case}");
    }
}

proptest! {
    #[test]
    fn predictions_ignore_positive_rescaling(
        seed in any::<u64>(),
        factor in 1e-3f64..1e3,
        target in 0usize..5,
    ) {
        let mut g = rng(seed);
        let embedded: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|_| (0..5).map(|_| (0..3).map(|_| g.random_range(-1.0..1.0)).collect()).collect())
            .collect();
        let bank = PrototypeBank { classes: (0..5).collect(), embedded };
        let theta: Vec<f64> = (0..3).map(|_| g.random_range(-1.0..1.0)).collect();
        let weights = FusionWeights::new(vec![0.4, 0.6]).unwrap();
        let (base, scores) = infer_embedded(&theta, &bank, &weights).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sorted[0] - sorted[1] > 1e-9);

        let scaled_theta: Vec<f64> = theta.iter().map(|v| v * factor).collect();
        prop_assert_eq!(infer_embedded(&scaled_theta, &bank, &weights).unwrap().0, base);

        let mut scaled_bank = bank.clone();
        for per_type in &mut scaled_bank.embedded {
            per_type[target].iter_mut().for_each(|v| *v *= factor);
        }
        prop_assert_eq!(infer_embedded(&theta, &scaled_bank, &weights).unwrap().0, base);
    }

    #[test]
    fn cosine_is_bounded(a in prop::collection::vec(-1e3f64..1e3, 4), b in prop::collection::vec(-1e3f64..1e3, 4)) {
        let s = cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }
}

#[test]
fn one_hot_fusion_equals_single_type_inference() {
    let ds = generate_synthetic(&spec(3, 0.2)).unwrap();
    let opts = TrainOptions::mbfa(5);
    let joint = train(&ds, &[0, 1], &opts).unwrap();
    for k in 0..2 {
        let single = mbfa::PrototypeBank {
            classes: joint.bank.classes.clone(),
            embedded: vec![joint.bank.embedded[k].clone()],
        };
        let one_hot = FusionWeights::one_hot(k, 2);
        for j in ds.instances_of(ds.unseen()) {
            let theta = joint.model.project(0, &ds.features().column(j)).unwrap();
            let a = infer_embedded(&theta, &joint.bank, &one_hot).unwrap();
            let b = infer_embedded(&theta, &single, &FusionWeights::uniform(1)).unwrap();
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
    }
}

#[test]
fn single_side_information_is_the_two_view_fit() {
    let ds = generate_synthetic(&spec(4, 0.05)).unwrap();
    let zsl = train(&ds, &[1], &TrainOptions::mbfa(4)).unwrap();
    assert_eq!(zsl.model.view_count(), 2);
    assert_eq!(zsl.model.view_names, vec!["visual".to_string(), "side1".to_string()]);
    let both = train(&ds, &[0, 1], &TrainOptions::mbfa(4)).unwrap();
    assert_eq!(both.model.view_count(), 3);
}

#[test]
fn noiseless_unseen_prototypes_are_distinct() {
    let ds = generate_synthetic(&spec(8, 0.0)).unwrap();
    let zsl = train(&ds, &[0, 1], &TrainOptions::mbfa(5)).unwrap();
    for per_type in &zsl.bank.embedded {
        for a in 0..per_type.len() {
            for b in a + 1..per_type.len() {
                assert!(cosine_similarity(&per_type[a], &per_type[b]).unwrap() < 1.0 - 1e-6);
            }
        }
    }
    let report = zsl.evaluate(&ds, &FusionWeights::uniform(2)).unwrap();
    assert_eq!(report.mean_per_class_top1, 1.0);
}

#[test]
fn noise_side_information_gets_little_weight() {
    // Enough validation classes that candidates do not all tie at 1.0.
    let mut noisy = SyntheticSpec {
        class_count: 20,
        latent_sigma: 0.3,
        ..spec(0, 0.05)
    };
    noisy.views[2] = ViewSpec::observing(12, 1.0, vec![]);
    for seed in 0..5 {
        noisy.seed = seed;
        let ds = generate_synthetic(&noisy).unwrap();
        let search = grid_search_weights(
            &ds,
            &[0, 1],
            &TrainOptions::mbfa(5),
            &GridSearchOptions {
                seed,
                val_fraction: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(search.candidates.len(), 11);
        assert!(search.weights.alphas()[1] <= 0.3, "seed {seed}: {:?}", search.weights);
    }
}

#[test]
fn grid_search_single_type_skips_training() {
    let ds = generate_synthetic(&spec(1, 0.05)).unwrap();
    let search = grid_search_weights(&ds, &[0], &TrainOptions::mbfa(1000), &GridSearchOptions::default()).unwrap();
    assert_eq!(search.weights.alphas(), &[1.0]);
    assert!(search.candidates.is_empty());
}

#[test]
fn grid_search_returns_simplex_points_deterministically() {
    let ds = generate_synthetic(&spec(2, 0.3)).unwrap();
    let opts = TrainOptions::mbfa(5);
    let search = GridSearchOptions {
        grid_step: 0.25,
        ..Default::default()
    };
    let a = grid_search_weights(&ds, &[0, 1], &opts, &search).unwrap();
    assert_eq!(a, grid_search_weights(&ds, &[0, 1], &opts, &search).unwrap());
    assert!(simplex_grid(2, 0.25).unwrap().contains(&a.weights));
    assert_eq!(a.val_classes.len(), 2);
    let best = a.candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let first = a.candidates.iter().find(|c| c.1 == best).unwrap();
    assert_eq!(first.0, a.weights);
}

#[test]
fn sweep_row_matches_direct_evaluation() {
    let ds = generate_synthetic(&spec(6, 0.3)).unwrap();
    let weights = FusionWeights::uniform(2);
    let opts = TrainOptions::mbfa(5);
    let rows = sweep_dimension(&ds, &[0, 1], &weights, &[5], &opts).unwrap();
    let direct = train(&ds, &[0, 1], &opts).unwrap().evaluate(&ds, &weights).unwrap();
    assert_eq!(rows, vec![(5, direct.mean_per_class_top1)]);
    assert_eq!(
        sweep_dimension(&ds, &[0, 1], &weights, &[2, 4, 6], &opts)
            .unwrap()
            .len(),
        3
    );
}

#[test]
fn pipeline_is_deterministic() {
    let run = || {
        let ds = generate_synthetic(&spec(9, 0.2)).unwrap();
        let zsl = train(&ds, &[0, 1], &TrainOptions::mbfa(5)).unwrap();
        let w = grid_search_weights(&ds, &[0, 1], &TrainOptions::mbfa(5), &GridSearchOptions::default()).unwrap();
        let p: Vec<_> = zsl
            .predict_instances(&ds, &ds.instances_of(ds.unseen()), &w.weights)
            .unwrap()
            .into_iter()
            .map(|p| (p.class, p.scores))
            .collect();
        p
    };
    assert_eq!(run(), run());
}

#[test]
fn mcca_pipeline_runs() {
    let ds = generate_synthetic(&spec(11, 0.05)).unwrap();
    let zsl = train(&ds, &[0, 1], &TrainOptions::mcca(5, 1e-6)).unwrap();
    assert_eq!(zsl.model.method, mbfa::Method::Mcca);
    let report = zsl.evaluate(&ds, &FusionWeights::uniform(2)).unwrap();
    assert!(report.mean_per_class_top1 > 0.0);
}

#[test]
fn empty_or_bad_selection_fails() {
    let ds = generate_synthetic(&spec(1, 0.05)).unwrap();
    assert!(train(&ds, &[], &TrainOptions::mbfa(3)).is_err());
    assert!(train(&ds, &[5], &TrainOptions::mbfa(3)).is_err());
    assert!(train(&ds, &[0, 0], &TrainOptions::mbfa(3)).is_err());
}
