use qcredit::ansatz::AnsatzConfig;
use qcredit::data::{generate, Dataset, GeneratorSpec, SplitKind};
use qcredit::metrics;
use qcredit::model::{Checkpoint, Model, ModelKind};
use qcredit::training::{self, evaluate, repeat_runs, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset(n_pos: usize, n_neg: usize, signal: f64, seed: u64) -> Dataset {
    generate(&GeneratorSpec {
        n_pos,
        n_neg,
        signal_strength: signal,
        seed,
    })
    .unwrap()
    .dataset
    .prepare(seed)
    .unwrap()
}

fn cfg(kind: ModelKind, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        model_kind: kind,
        ansatz: AnsatzConfig::new(4, 1).unwrap(),
        ..Default::default()
    }
}

#[test]
fn zero_learning_rate_keeps_everything_constant() {
    let data = dataset(40, 160, 5.0, 1);
    let config = TrainConfig {
        lr: 0.0,
        ..cfg(ModelKind::Fh, 6)
    };
    let outcome = train(&config, &data).unwrap();
    let initial = Model::init(
        &config.model_spec(),
        &mut ChaCha8Rng::seed_from_u64(config.seed),
    )
    .unwrap();
    assert_eq!(outcome.best_model.params_flat(), initial.params_flat());
    let first = &outcome.report.epochs[0];
    for e in &outcome.report.epochs {
        assert_eq!(
            (e.train_auc, e.val_auc, e.val_loss),
            (first.train_auc, first.val_auc, first.val_loss)
        );
    }
}

#[test]
fn same_seed_same_report_different_seed_different_report() {
    let data = dataset(30, 120, 3.0, 2);
    for kind in [ModelKind::Fh, ModelKind::Cc] {
        let a = train(&cfg(kind, 4), &data).unwrap().report;
        let b = train(&cfg(kind, 4), &data).unwrap().report;
        assert_eq!(a.without_timings(), b.without_timings());
        let json_a = serde_json::to_string(&a.without_timings()).unwrap();
        let json_b = serde_json::to_string(&b.without_timings()).unwrap();
        assert_eq!(json_a, json_b);
        let c = train(
            &TrainConfig {
                seed: 9,
                ..cfg(kind, 4)
            },
            &data,
        )
        .unwrap()
        .report;
        assert_ne!(a.without_timings().epochs, c.without_timings().epochs);
    }
}

#[test]
fn early_training_loss_is_non_increasing_on_high_signal_data() {
    let data = dataset(246, 2000, 10.0, 0);
    for kind in [ModelKind::Fh, ModelKind::Cc] {
        let config = TrainConfig {
            model_kind: kind,
            epochs: 10,
            ..Default::default()
        };
        let report = train(&config, &data).unwrap().report;
        for w in report.epochs.windows(2) {
            assert!(w[1].train_loss.is_finite());
            assert!(
                w[1].train_loss <= w[0].train_loss,
                "{kind}: epoch {} loss {} > {}",
                w[1].epoch,
                w[1].train_loss,
                w[0].train_loss
            );
        }
    }
}

#[test]
fn zero_signal_gives_chance_level_auc() {
    let data = dataset(246, 2000, 0.0, 4);
    let summary = repeat_runs(&cfg(ModelKind::Cc, 100), &data, 5).unwrap();
    assert!(
        (0.40..=0.60).contains(&summary.mean_test_auc),
        "mean {}",
        summary.mean_test_auc
    );
    let mean = summary.reports.iter().map(|r| r.test_auc).sum::<f64>() / 5.0;
    assert!((mean - summary.mean_test_auc).abs() < 1e-15);
}

#[test]
fn exported_scores_reproduce_reported_auc() {
    let data = dataset(30, 120, 3.0, 5);
    let outcome = train(&cfg(ModelKind::Fh, 3), &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (epochs, scores) = (dir.path().join("e.csv"), dir.path().join("s.csv"));
    outcome.report.save_csvs(&epochs, &scores).unwrap();
    let (s, y) = training::read_scores_csv(std::fs::File::open(&scores).unwrap()).unwrap();
    assert_eq!(metrics::auc(&s, &y).unwrap().value, outcome.report.test_auc);
    let direct = evaluate(&outcome.best_model, &data, SplitKind::Test).unwrap();
    assert_eq!(direct.auc, outcome.report.test_auc);
    assert_eq!(direct.scores, s);

    let text = std::fs::read_to_string(&epochs).unwrap();
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("epoch,train_loss,val_loss,train_auc,val_auc"));
    assert_eq!(text.lines().count(), 2 + 3);
}

#[test]
fn report_json_round_trips() {
    let data = dataset(30, 120, 3.0, 6);
    let report = train(&cfg(ModelKind::Cc, 3), &data).unwrap().report;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    report.save_json(&path).unwrap();
    assert_eq!(training::RunReport::load_json(&path).unwrap(), report);
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let data = dataset(30, 120, 3.0, 7);
    for kind in [ModelKind::Fh, ModelKind::Cc] {
        let config = cfg(kind, 2);
        let model = train(&config, &data).unwrap().best_model;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        Checkpoint::new(model.clone(), config.seed, &config)
            .unwrap()
            .save(&path)
            .unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model, model);
        for &i in data.indices(SplitKind::Test).unwrap() {
            let a = model.predict(data.row(i)).unwrap();
            let b = loaded.model.predict(data.row(i)).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn zero_model_evaluates_to_one_half() {
    let data = dataset(30, 120, 3.0, 8);
    let model = Model::zeros(&cfg(ModelKind::Fh, 1).model_spec()).unwrap();
    let eval = evaluate(&model, &data, SplitKind::Test).unwrap();
    assert_eq!(eval.auc, 0.5);
    assert!(eval.scores.iter().all(|&p| p == 0.5));
}
