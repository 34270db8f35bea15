//! End-to-end pipeline driven by a JSON config: obtain embeddings, partition,
//! label, train, score, and evaluate, all under one seed.

use std::path::Path;

use faceq_core::gallery::TemplatePolicy;
use faceq_core::trainer::TrainConfig;
use faceq_core::{dataset, gallery, labeler, metrics, synth, trainer, Error, Result};
use serde::Deserialize;

/// Top-level pipeline configuration.
///
/// Exactly one of `embeddings` and `simulate` must be present. The single
/// `seed` drives simulation, partitioning, and training.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    seed: u64,
    out_dir: String,
    #[serde(default)]
    embeddings: Option<String>,
    #[serde(default)]
    simulate: Option<SimulateSection>,
    #[serde(default = "default_policy")]
    policy: String,
    #[serde(default)]
    train: TrainSection,
    #[serde(default = "default_grid_size")]
    grid_size: usize,
    #[serde(default = "default_bins")]
    bins: usize,
}

fn default_policy() -> String {
    "first".to_owned()
}

fn default_grid_size() -> usize {
    512
}

fn default_bins() -> usize {
    32
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimulateSection {
    subjects: usize,
    images_per_subject: usize,
    dim: usize,
    noise_low: f64,
    noise_high: f64,
    centroid_scale: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let spec = synth::SynthSpec::default();
        Self {
            subjects: spec.n_subjects,
            images_per_subject: spec.images_per_subject,
            dim: spec.dim,
            noise_low: spec.noise_low,
            noise_high: spec.noise_high,
            centroid_scale: spec.centroid_scale,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainSection {
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    batch_size: usize,
    epochs: usize,
    train_fraction: f64,
    log_epsilon: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let config = TrainConfig::default();
        Self {
            lr: config.learning_rate,
            momentum: config.momentum,
            weight_decay: config.weight_decay,
            batch_size: config.batch_size,
            epochs: config.epochs,
            train_fraction: config.train_fraction,
            log_epsilon: config.log_epsilon,
        }
    }
}

fn read_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn run(config_path: &Path) -> Result<()> {
    let config = read_config(config_path)?;
    let policy: TemplatePolicy = config.policy.parse()?;
    let train_config = TrainConfig {
        learning_rate: config.train.lr,
        momentum: config.train.momentum,
        weight_decay: config.train.weight_decay,
        batch_size: config.train.batch_size,
        epochs: config.train.epochs,
        train_fraction: config.train.train_fraction,
        seed: config.seed,
        log_epsilon: config.train.log_epsilon,
    };
    train_config.validate()?;
    if config.grid_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid_size must be at least 2, got {}",
            config.grid_size
        )));
    }
    if config.bins == 0 {
        return Err(Error::InvalidConfig("bins must be positive".to_owned()));
    }

    let out_dir = Path::new(&config.out_dir);
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_owned(),
        source,
    })?;

    let data = match (&config.embeddings, &config.simulate) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(
                "config sets both embeddings and simulate; pick one input source".to_owned(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "config sets neither embeddings nor simulate; pick one input source".to_owned(),
            ))
        }
        (Some(path), None) => {
            let data = dataset::read_jsonl(Path::new(path))?;
            println!("ingested {} records from {path}", data.len());
            data
        }
        (None, Some(sim)) => {
            let spec = synth::SynthSpec {
                n_subjects: sim.subjects,
                images_per_subject: sim.images_per_subject,
                dim: sim.dim,
                noise_low: sim.noise_low,
                noise_high: sim.noise_high,
                centroid_scale: sim.centroid_scale,
                seed: config.seed,
            };
            let (data, truth) = synth::generate(&spec)?;
            dataset::write_jsonl(&data, &out_dir.join("embeddings.jsonl"))?;
            synth::write_truth_csv(&truth, &out_dir.join("truth.csv"))?;
            println!(
                "simulated {} records ({} subjects x {} images)",
                data.len(),
                sim.subjects,
                sim.images_per_subject
            );
            data
        }
    };

    let split = gallery::partition(&data, policy, config.seed)?;
    gallery::write_manifest(&split.manifest(), &out_dir.join("manifest.json"))?;
    println!(
        "partitioned into {} templates and {} probes",
        split.templates().len(),
        split.probes().len()
    );

    let labeling = labeler::label_dataset(&split, labeler::FailurePolicy::FailFast)?;
    labeler::write_labels_csv(&labeling.labels, &out_dir.join("labels.csv"))?;
    println!("labeled {} probes", labeling.labels.len());

    let (head, history) = trainer::train(&labeling.labels, &data, &train_config)?;
    trainer::write_model(&head, &train_config, &out_dir.join("model.json"))?;
    trainer::write_history_csv(&history, &out_dir.join("history.csv"))?;
    println!(
        "trained on {} labels for {} epochs (final train loss {:.6}, test loss {:.6})",
        history.train_keys.len(),
        train_config.epochs,
        history.train_loss.last().copied().unwrap_or(f64::NAN),
        history.test_loss.last().copied().unwrap_or(f64::NAN)
    );

    trainer::write_scores_csv(&head, &data, &out_dir.join("scores.csv"))?;
    println!("scored {} records", data.len());

    let pairs = metrics::build_pairs(&data)?;
    let max = pairs
        .same_pairs()
        .iter()
        .chain(pairs.diff_pairs())
        .map(|p| p.distance)
        .fold(0.0f64, f64::max);
    let grid = metrics::linear_grid(max, config.grid_size)?;
    let curve = metrics::curve(&pairs, &grid)?;
    let eer = metrics::eer(&curve)?;
    let hist = metrics::distance_histograms(&pairs, config.bins)?;
    metrics::write_curve_csv(&curve, &out_dir.join("curve.csv"))?;
    metrics::write_eer_json(
        &eer,
        pairs.same_pairs().len(),
        pairs.diff_pairs().len(),
        &out_dir.join("eer.json"),
    )?;
    metrics::write_histograms_csv(&hist, &out_dir.join("histogram.csv"))?;
    println!(
        "evaluated {} same and {} different pairs: eer {:.4} at threshold {:.4}",
        pairs.same_pairs().len(),
        pairs.diff_pairs().len(),
        eer.eer,
        eer.threshold
    );
    println!("pipeline outputs in {}", out_dir.display());
    Ok(())
}
