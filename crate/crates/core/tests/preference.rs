mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roomcraft::config::Config;
use roomcraft::engine::{CommandOutcome, Engine, EngineCommand, EngineConfig};
use roomcraft::level::{TileGrid, TileKind};
use roomcraft::preference::{
    build_adhoc_matrix, build_dataset, combined_fitness, compute_weights, confidence, predicted_preference,
    run_job_sync, BlendMode, PreferenceDataset, PreferenceError, PreferenceModel, StepMetric, TrainConfig, TrainingJob,
    TrainingQueue,
};
use roomcraft::session::{initial_model, training_job};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn weights_are_convex_and_capped(conf in 0.0f64..=1.0, acc in 0.0f64..=1.0, obj in 0.0f64..=1.0, pref in 0.0f64..=1.0) {
        let (w0, w1) = compute_weights(conf, acc).unwrap();
        prop_assert!((0.0..=0.5).contains(&w1));
        prop_assert!((w0 + w1 - 1.0).abs() < 1e-15);
        let c = combined_fitness(obj, pref, w0, w1, BlendMode::Weighted);
        prop_assert!((0.0..=1.0).contains(&c));
        let (cw0, cw1) = compute_weights(conf, 0.0).unwrap();
        prop_assert_eq!(combined_fitness(obj, pref, cw0, cw1, BlendMode::Weighted), obj);
    }

    #[test]
    fn weights_reject_out_of_domain(bad in prop_oneof![-10.0f64..-1e-9, 1.0f64 + 1e-9..10.0]) {
        prop_assert!(compute_weights(bad, 0.5).is_err());
        prop_assert!(compute_weights(0.5, bad).is_err());
    }

    #[test]
    fn adhoc_matrix_is_reflection_symmetric(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let oi = (seed as usize) % rows;
        let oj = (seed as usize / 7) % cols;
        let m = build_adhoc_matrix((oi, oj), (rows, cols), StepMetric::Chebyshev).unwrap();
        for i in 0..rows {
            for j in 0..cols {
                // Reflect through the origin cell where the reflection stays on the grid.
                let ri = (2 * oi).checked_sub(i).filter(|&r| r < rows);
                let rj = (2 * oj).checked_sub(j).filter(|&r| r < cols);
                if let (Some(ri), Some(rj)) = (ri, rj) {
                    prop_assert_eq!(m.value(i, j), m.value(ri, rj));
                }
                if let Some(ri) = ri {
                    prop_assert_eq!(m.value(i, j), m.value(ri, j));
                }
                if let Some(rj) = rj {
                    prop_assert_eq!(m.value(i, j), m.value(i, rj));
                }
            }
        }
    }

    #[test]
    fn labels_match_cells_and_split_is_stratified(
        cells in prop::collection::vec((0usize..5, 0usize..5), 1..300),
        origin in (0usize..5, 0usize..5),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grids: Vec<TileGrid> = cells.iter().map(|_| common::random_grid(13, 7, &mut rng)).collect();
        let matrix = build_adhoc_matrix(origin, (5, 5), StepMetric::Chebyshev).unwrap();
        let dataset = build_dataset(cells.iter().copied().zip(&grids), &matrix, 91, 0.1, &mut rng).unwrap();
        prop_assert_eq!(dataset.len(), cells.len());
        for s in dataset.samples() {
            prop_assert_eq!(s.label, matrix.class_at(s.cell.0, s.cell.1));
        }
        let train = dataset.train_histogram();
        let test = dataset.test_histogram();
        for c in 0..6 {
            let n = (train[c] + test[c]) as f64;
            prop_assert!((test[c] as f64 - 0.1 * n).abs() <= 1.0);
        }
    }
}

#[test]
fn predictions_are_distributions_and_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = initial_model(91, &TrainConfig::default(), 1);
    let uniform = model.predict(&common::random_grid(13, 7, &mut rng)).unwrap();
    assert!(uniform.iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-12));
    assert!((predicted_preference(&uniform) - 0.5).abs() < 1e-12);
    assert!((confidence(&uniform) - 1.0 / 6.0).abs() < 1e-12);

    let trained = trained_model(2);
    for _ in 0..1000 {
        let grid = common::random_grid(13, 7, &mut rng);
        let p = trained.predict(&grid).unwrap();
        assert_eq!(p.len(), 6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p, trained.predict(&grid).unwrap());
    }
    assert!(matches!(
        trained.predict(&TileGrid::filled(12, 7, TileKind::Floor)),
        Err(PreferenceError::ShapeMismatch { .. })
    ));
}

fn trained_model(seed: u64) -> PreferenceModel {
    let config = Config::default();
    let room = common::drafted_room();
    let cold = Arc::new(initial_model(91, &config.training, seed));
    let mut engine = Engine::new(EngineConfig::default(), cold.clone(), room, seed).unwrap();
    engine.run_until(300).unwrap();
    let cell = engine.grid().cells().find(|(_, c)| c.elite().is_some()).unwrap().0;
    let CommandOutcome::Suggestion(s) = engine.apply(EngineCommand::ApplySuggestion(cell)).unwrap().outcome else {
        panic!("expected a suggestion");
    };
    let job = training_job(&s, (5, 5), &config.training, 91, seed, 1)
        .unwrap()
        .unwrap();
    run_job_sync(&cold, &job).unwrap()
}

#[test]
fn uniform_labels_are_learned_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grids: Vec<TileGrid> = (0..120).map(|_| common::random_grid(13, 7, &mut rng)).collect();
    let matrix = build_adhoc_matrix((0, 0), (5, 5), StepMetric::Chebyshev).unwrap();
    let dataset = build_dataset(grids.iter().map(|g| ((0, 0), g)), &matrix, 91, 0.1, &mut rng).unwrap();
    let model = initial_model(91, &TrainConfig::default(), 3);
    let (trained, report) = model
        .train_episode(&dataset, &TrainConfig::default(), &mut rng)
        .unwrap();
    assert_eq!(report.test_samples, 12);
    assert_eq!(trained.last_test_acc(), 1.0);
    assert_eq!(trained.episodes_trained(), 1);
    assert!(matches!(
        model.train_episode(&PreferenceDataset::default(), &TrainConfig::default(), &mut rng),
        Err(PreferenceError::EmptyDataset)
    ));
}

#[test]
fn one_sample_dataset_trains_with_zero_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = common::random_grid(13, 7, &mut rng);
    let matrix = build_adhoc_matrix((2, 2), (5, 5), StepMetric::Chebyshev).unwrap();
    let dataset = build_dataset([((4, 4), &grid)], &matrix, 91, 0.1, &mut rng).unwrap();
    assert_eq!((dataset.train.len(), dataset.test.len()), (1, 0));
    let (trained, _) = initial_model(91, &TrainConfig::default(), 4)
        .train_episode(&dataset, &TrainConfig::default(), &mut rng)
        .unwrap();
    assert_eq!(trained.last_test_acc(), 0.0);
}

#[test]
fn queued_episodes_match_synchronous_replays() {
    let config = Config::default();
    let cold = Arc::new(initial_model(91, &config.training, 5));
    let mut engine = Engine::new(EngineConfig::default(), cold.clone(), common::drafted_room(), 5).unwrap();
    let mut queue = TrainingQueue::spawn(cold.clone());
    let mut jobs: Vec<TrainingJob> = Vec::new();
    for episode in 1..=2 {
        engine.run_until(engine.generation() + 100).unwrap();
        let cell = engine.grid().cells().find(|(_, c)| c.elite().is_some()).unwrap().0;
        let CommandOutcome::Suggestion(s) = engine.apply(EngineCommand::ApplySuggestion(cell)).unwrap().outcome else {
            panic!("expected a suggestion");
        };
        let job = training_job(&s, (5, 5), &config.training, 91, 5, episode)
            .unwrap()
            .unwrap();
        queue.submit(job.clone());
        jobs.push(job);
    }
    let first = queue.next_blocking().unwrap();
    let second = queue.next_blocking().unwrap();
    assert_eq!((first.episode, second.episode), (1, 2));
    let m1 = run_job_sync(&cold, &jobs[0]).unwrap();
    let m2 = run_job_sync(&m1, &jobs[1]).unwrap();
    assert_eq!(*first.result.unwrap().0, m1);
    assert_eq!(*second.result.unwrap().0, m2);
    assert_eq!(m2.episodes_trained(), 2);
    assert_eq!(PreferenceModel::from_bytes(&m2.to_bytes()).unwrap(), m2);
}
