//! Library-level end-to-end flow: simulate, partition, label, train, score,
//! evaluate, with determinism checks along the way.

use faceq_core::gallery::{self, TemplatePolicy};
use faceq_core::labeler::{self, FailurePolicy, QualityLabel};
use faceq_core::metrics;
use faceq_core::synth::{self, SynthSpec};
use faceq_core::trainer::{self, RegressionHead, TrainConfig, TrainHistory};
use faceq_core::Dataset;

struct FlowResult {
    dataset: Dataset,
    labels: Vec<QualityLabel>,
    head: RegressionHead,
    history: TrainHistory,
}

fn run_flow(seed: u64, epochs: usize) -> FlowResult {
    let spec = SynthSpec {
        n_subjects: 30,
        images_per_subject: 6,
        dim: 16,
        seed,
        ..SynthSpec::default()
    };
    let (dataset, _truth) = synth::generate(&spec).unwrap();
    let split = gallery::partition(&dataset, TemplatePolicy::First, seed).unwrap();
    let labeling = labeler::label_dataset(&split, FailurePolicy::FailFast).unwrap();
    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let (head, history) = trainer::train(&labeling.labels, &dataset, &config).unwrap();
    FlowResult {
        dataset,
        labels: labeling.labels,
        head,
        history,
    }
}

#[test]
fn full_flow_produces_consistent_artifacts() {
    let flow = run_flow(2, 8);

    assert_eq!(flow.dataset.len(), 180);
    assert_eq!(flow.labels.len(), 150);

    assert_eq!(flow.history.train_loss.len(), 8);
    assert_eq!(flow.history.test_loss.len(), 8);
    assert_eq!(flow.history.train_keys.len(), 105);
    assert_eq!(flow.history.test_keys.len(), 45);
    assert!(
        flow.history.train_loss.last().unwrap() < &flow.history.initial_train_loss,
        "training must reduce the train loss from its initialization value"
    );

    for record in flow.dataset.records() {
        let p = trainer::predict(&flow.head, &record.vector).unwrap();
        assert!(
            p > 0.0 && p < 1.0,
            "prediction {p} outside the open interval"
        );
    }
    for label in &flow.labels {
        assert!(label.target > 0.0 && label.target < 1.0);
        assert!(label.impostor_std > 0.0);
    }
}

#[test]
fn evaluation_brackets_the_curve_endpoints() {
    let flow = run_flow(3, 2);
    let pairs = metrics::build_pairs(&flow.dataset).unwrap();
    let max = pairs
        .same_pairs()
        .iter()
        .chain(pairs.diff_pairs())
        .map(|p| p.distance)
        .fold(0.0f64, f64::max);
    let grid = metrics::linear_grid(max, 256).unwrap();
    let curve = metrics::curve(&pairs, &grid).unwrap();

    // threshold 0 accepts nothing, the max distance accepts everything
    assert_eq!(curve.far()[0], 0.0);
    assert_eq!(curve.frr()[0], 1.0);
    assert_eq!(curve.far()[curve.len() - 1], 1.0);
    assert_eq!(curve.frr()[curve.len() - 1], 0.0);

    for w in curve.far().windows(2) {
        assert!(w[1] >= w[0]);
    }
    for w in curve.frr().windows(2) {
        assert!(w[1] <= w[0]);
    }

    let eer = metrics::eer(&curve).unwrap();
    assert!(eer.eer >= 0.0 && eer.eer <= 1.0);
    assert!(eer.threshold >= 0.0 && eer.threshold <= max);
}

#[test]
fn rerun_with_the_same_seed_reproduces_every_bit() {
    let a = run_flow(7, 5);
    let b = run_flow(7, 5);

    assert_eq!(a.labels.len(), b.labels.len());
    for (x, y) in a.labels.iter().zip(&b.labels) {
        assert_eq!(x.subject_id, y.subject_id);
        assert_eq!(x.image_id, y.image_id);
        assert_eq!(x.target.to_bits(), y.target.to_bits());
        assert_eq!(x.z_score.to_bits(), y.z_score.to_bits());
    }
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.head.weights), bits(&b.head.weights));
    assert_eq!(a.head.bias.to_bits(), b.head.bias.to_bits());
    assert_eq!(bits(&a.history.train_loss), bits(&b.history.train_loss));
    assert_eq!(bits(&a.history.test_loss), bits(&b.history.test_loss));
    assert_eq!(a.history.train_keys, b.history.train_keys);
}

#[test]
fn a_different_training_seed_changes_the_model() {
    let spec = SynthSpec {
        n_subjects: 20,
        images_per_subject: 5,
        dim: 8,
        seed: 40,
        ..SynthSpec::default()
    };
    let (dataset, _) = synth::generate(&spec).unwrap();
    let split = gallery::partition(&dataset, TemplatePolicy::First, 40).unwrap();
    let labeling = labeler::label_dataset(&split, FailurePolicy::FailFast).unwrap();

    let train_with = |seed: u64| {
        let config = TrainConfig {
            epochs: 3,
            seed,
            ..TrainConfig::default()
        };
        trainer::train(&labeling.labels, &dataset, &config)
            .unwrap()
            .0
    };
    let h1 = train_with(1);
    let h2 = train_with(2);
    assert_ne!(
        h1.weights, h2.weights,
        "distinct seeds must give distinct initializations and splits"
    );
}

#[test]
fn held_out_loss_improves_over_default_training() {
    let flow = run_flow(11, 30);
    let first = flow.history.test_loss[0];
    let last = *flow.history.test_loss.last().unwrap();
    assert!(
        last < first,
        "held-out loss must drop between the first and last epoch, got {first} -> {last}"
    );
}
