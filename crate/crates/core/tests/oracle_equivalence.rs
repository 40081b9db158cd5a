mod common;

use declust::oracle::visit_paths;
use declust::scalar::log_sum_exp;
use declust::{
    enumerate_paths, log_likelihood, oracle_loglik, oracle_posteriors, path_weight,
    smoothed_report, viterbi_decode, Catalog, Location, LabeledPath, Region, TabulatedIntensity,
};

use common::small_draw;

#[test]
fn forward_likelihood_matches_enumeration() {
    for seed in 0..60 {
        let (cat, model) = small_draw(seed, 10);
        let fast = log_likelihood(&cat, &model, None).unwrap();
        let exact = oracle_loglik(&cat, &model, None).unwrap();
        assert!(
            ((fast - exact) / exact).abs() < 1e-9,
            "seed {seed}: {fast} vs {exact}"
        );
        let horizon = cat.last_time().unwrap() + 3.0;
        let fast = log_likelihood(&cat, &model, Some(horizon)).unwrap();
        let exact = oracle_loglik(&cat, &model, Some(horizon)).unwrap();
        assert!(((fast - exact) / exact).abs() < 1e-9, "seed {seed} horizon");
    }
}

#[test]
fn smoothed_posteriors_match_enumeration() {
    for seed in 100..160 {
        let (cat, model) = small_draw(seed, 9);
        for horizon in [None, Some(cat.last_time().unwrap() + 5.0)] {
            let filt = smoothed_report(&cat, &model, horizon).unwrap();
            let exact = oracle_posteriors(&cat, &model, horizon).unwrap();
            for i in 0..cat.len() {
                assert!(
                    (filt.membership[i] - exact.membership[i]).abs() < 1e-8,
                    "seed {seed} membership {i}: {} vs {}",
                    filt.membership[i],
                    exact.membership[i]
                );
                assert!(
                    (filt.active[i] - exact.active[i]).abs() < 1e-8,
                    "seed {seed} active {i}"
                );
            }
        }
    }
}

#[test]
fn path_weights_agree_and_viterbi_is_optimal() {
    for seed in 200..240 {
        let (cat, model) = small_draw(seed, 8);
        let paths = enumerate_paths(&cat, &model).unwrap();
        let (decoded, best) = viterbi_decode(&cat, &model).unwrap();
        let weights: Vec<f64> = paths.iter().map(|p| p.log_weight).collect();
        for wp in &paths {
            let direct = path_weight(&cat, &wp.path, &model).unwrap();
            assert!(
                direct == wp.log_weight
                    || (direct - wp.log_weight).abs() < 1e-12 * direct.abs().max(1.0),
                "seed {seed}: {direct} vs {}",
                wp.log_weight
            );
            assert!(wp.log_weight <= best + 1e-10);
        }
        let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((max - best).abs() < 1e-10, "seed {seed}");
        let decoded_weight = path_weight(&cat, &decoded, &model).unwrap();
        assert!((decoded_weight - best).abs() < 1e-10);

        let total = log_sum_exp(&weights);
        let normalized: f64 = weights.iter().map(|w| (w - total).exp()).sum();
        assert!((normalized - 1.0).abs() < 1e-12);
    }
}

#[test]
fn probabilities_are_bounded_by_path_structure() {
    for seed in 300..320 {
        let (cat, model) = small_draw(seed, 8);
        let post = oracle_posteriors(&cat, &model, None).unwrap();
        for i in 0..cat.len() {
            let (m, a) = (post.membership[i], post.active[i]);
            assert!((0.0..=1.0 + 1e-12).contains(&m));
            assert!((0.0..=1.0 + 1e-12).contains(&a));
            // right after the first event, D = 1 only if it was a mother
            if i == 0 {
                assert!(a <= m + 1e-12);
            }
        }
    }
}

#[test]
fn streamed_and_collected_enumeration_agree() {
    let (cat, model) = small_draw(7, 7);
    let mut streamed = Vec::new();
    visit_paths(&cat, &model, None, |labels, w| {
        streamed.push((LabeledPath::from_labels(labels.to_vec()).unwrap(), w))
    })
    .unwrap();
    let collected = enumerate_paths(&cat, &model).unwrap();
    assert_eq!(streamed.len(), collected.len());
    for ((p, w), wp) in streamed.iter().zip(&collected) {
        assert_eq!(p, &wp.path);
        assert_eq!(*w, wp.log_weight);
    }
}

#[test]
fn worked_two_event_posteriors() {
    let region = Region::new(0.0_f64, 1.0, 0.0, 1.0).unwrap();
    let cat = Catalog::from_points(
        region,
        [(1.0, Location::new(0.5, 0.5)), (2.0, Location::new(0.5, 0.5))],
    )
    .unwrap();
    let model = TabulatedIntensity::new(0.1, 0.01, 0.2)
        .offspring_total(1, 0.05)
        .offspring_total(2, 0.05)
        .kernel(2, 1, 2.0);
    let exact = oracle_posteriors(&cat, &model, None).unwrap();
    assert!((exact.membership[0] - 0.647_171_029_431_073_9).abs() < 1e-14);
    assert!((exact.membership[1] - 0.648_428_722_323_738_8).abs() < 1e-14);
    let filt = smoothed_report(&cat, &model, None).unwrap();
    assert!((filt.membership[0] - exact.membership[0]).abs() < 1e-14);
    assert!((filt.membership[1] - exact.membership[1]).abs() < 1e-14);
}
