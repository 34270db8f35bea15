//! `faceq`: quality labeling, head training, and verification metrics over
//! face-embedding galleries.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numeric failure.

use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use faceq_core::error::ErrorCategory;
use faceq_core::gallery::TemplatePolicy;
use faceq_core::trainer::TrainConfig;
use faceq_core::{dataset, gallery, labeler, metrics, synth, trainer};

mod pipeline;

#[derive(Parser)]
#[command(
    name = "faceq",
    version,
    about = "Face-image quality from embedding galleries: partition, label, train, score, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    First,
    Random,
}

impl From<PolicyArg> for TemplatePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::First => TemplatePolicy::First,
            PolicyArg::Random => TemplatePolicy::Random,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split embeddings into a one-template-per-subject gallery and probes
    Partition {
        /// Embeddings in JSON Lines format
        #[arg(long)]
        embeddings: PathBuf,
        /// Template choice policy
        #[arg(long, value_enum, default_value_t = PolicyArg::First)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-probe quality labels against a partition manifest
    Label {
        #[arg(long)]
        embeddings: PathBuf,
        /// Partition manifest JSON produced by `partition`
        #[arg(long)]
        manifest: PathBuf,
        /// Output labels CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sigmoid quality head on labeled embeddings
    Train {
        #[arg(long)]
        embeddings: PathBuf,
        /// Labels CSV produced by `label`
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 0.99)]
        momentum: f64,
        #[arg(long, default_value_t = 1e-5)]
        weight_decay: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for model.json and history.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every embedding with a trained model
    Score {
        /// Model JSON produced by `train`
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Output scores CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// FAR/FRR curve, equal error rate, and distance histograms
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
        /// Number of evenly spaced thresholds from 0 to the largest distance
        #[arg(long, default_value_t = 512)]
        grid_size: usize,
        /// Number of histogram bins
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// Output directory for curve.csv, eer.json, and histogram.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic embedding dataset with known noise levels
    Simulate {
        #[arg(long, default_value_t = 50)]
        subjects: usize,
        #[arg(long, default_value_t = 10)]
        images_per_subject: usize,
        #[arg(long, default_value_t = faceq_core::DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0.05)]
        noise_low: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_high: f64,
        #[arg(long, default_value_t = 1.0)]
        centroid_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for embeddings.jsonl and truth.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Run simulate/ingest, partition, label, train, score, and eval from
    /// a JSON config
    Pipeline {
        /// Pipeline configuration JSON path
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = err.source();
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            let code = match err.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numeric => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> faceq_core::Result<()> {
    match command {
        Command::Partition {
            embeddings,
            policy,
            seed,
            out,
        } => cmd_partition(&embeddings, policy.into(), seed, &out),
        Command::Label {
            embeddings,
            manifest,
            out,
        } => cmd_label(&embeddings, &manifest, &out),
        Command::Train {
            embeddings,
            labels,
            lr,
            momentum,
            weight_decay,
            batch_size,
            epochs,
            train_fraction,
            seed,
            out,
        } => {
            let config = TrainConfig {
                learning_rate: lr,
                momentum,
                weight_decay,
                batch_size,
                epochs,
                train_fraction,
                seed,
                log_epsilon: TrainConfig::default().log_epsilon,
            };
            cmd_train(&embeddings, &labels, &config, &out)
        }
        Command::Score {
            model,
            embeddings,
            out,
        } => cmd_score(&model, &embeddings, &out),
        Command::Eval {
            embeddings,
            grid_size,
            bins,
            out,
        } => cmd_eval(&embeddings, grid_size, bins, &out),
        Command::Simulate {
            subjects,
            images_per_subject,
            dim,
            noise_low,
            noise_high,
            centroid_scale,
            seed,
            out,
        } => {
            let spec = synth::SynthSpec {
                n_subjects: subjects,
                images_per_subject,
                dim,
                noise_low,
                noise_high,
                centroid_scale,
                seed,
            };
            cmd_simulate(&spec, &out)
        }
        Command::Pipeline { config } => pipeline::run(&config),
    }
}

fn ensure_dir(path: &Path) -> faceq_core::Result<()> {
    std::fs::create_dir_all(path).map_err(|source| faceq_core::Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn cmd_partition(
    embeddings: &Path,
    policy: TemplatePolicy,
    seed: u64,
    out: &Path,
) -> faceq_core::Result<()> {
    let dataset = dataset::read_jsonl(embeddings)?;
    let split = gallery::partition(&dataset, policy, seed)?;
    gallery::write_manifest(&split.manifest(), out)?;
    println!(
        "partitioned {} records into {} templates and {} probes -> {}",
        dataset.len(),
        split.templates().len(),
        split.probes().len(),
        out.display()
    );
    Ok(())
}

fn cmd_label(embeddings: &Path, manifest: &Path, out: &Path) -> faceq_core::Result<()> {
    let dataset = dataset::read_jsonl(embeddings)?;
    let manifest = gallery::read_manifest(manifest)?;
    let split = gallery::GalleryPartition::from_manifest(&manifest, &dataset)?;
    let labeling = labeler::label_dataset(&split, labeler::FailurePolicy::FailFast)?;
    labeler::write_labels_csv(&labeling.labels, out)?;
    println!(
        "labeled {} probes -> {}",
        labeling.labels.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(
    embeddings: &Path,
    labels: &Path,
    config: &TrainConfig,
    out: &Path,
) -> faceq_core::Result<()> {
    // reject bad hyperparameters before any file is touched
    config.validate()?;
    let dataset = dataset::read_jsonl(embeddings)?;
    let labels = labeler::read_labels_csv(labels)?;
    let (head, history) = trainer::train(&labels, &dataset, config)?;
    ensure_dir(out)?;
    trainer::write_model(&head, config, &out.join("model.json"))?;
    trainer::write_history_csv(&history, &out.join("history.csv"))?;
    println!(
        "trained on {} of {} labels for {} epochs (final train loss {:.6}, test loss {:.6}) -> {}",
        history.train_keys.len(),
        labels.len(),
        config.epochs,
        history.train_loss.last().copied().unwrap_or(f64::NAN),
        history.test_loss.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_score(model: &Path, embeddings: &Path, out: &Path) -> faceq_core::Result<()> {
    let (head, _config) = trainer::read_model(model)?;
    let dataset = dataset::read_jsonl(embeddings)?;
    trainer::write_scores_csv(&head, &dataset, out)?;
    println!("scored {} records -> {}", dataset.len(), out.display());
    Ok(())
}

fn cmd_eval(
    embeddings: &Path,
    grid_size: usize,
    bins: usize,
    out: &Path,
) -> faceq_core::Result<()> {
    let dataset = dataset::read_jsonl(embeddings)?;
    let pairs = metrics::build_pairs(&dataset)?;
    let max = pairs
        .same_pairs()
        .iter()
        .chain(pairs.diff_pairs())
        .map(|p| p.distance)
        .fold(0.0f64, f64::max);
    let grid = metrics::linear_grid(max, grid_size)?;
    let curve = metrics::curve(&pairs, &grid)?;
    let eer = metrics::eer(&curve)?;
    let hist = metrics::distance_histograms(&pairs, bins)?;
    ensure_dir(out)?;
    metrics::write_curve_csv(&curve, &out.join("curve.csv"))?;
    metrics::write_eer_json(
        &eer,
        pairs.same_pairs().len(),
        pairs.diff_pairs().len(),
        &out.join("eer.json"),
    )?;
    metrics::write_histograms_csv(&hist, &out.join("histogram.csv"))?;
    println!(
        "evaluated {} same and {} different pairs: eer {:.4} at threshold {:.4} -> {}",
        pairs.same_pairs().len(),
        pairs.diff_pairs().len(),
        eer.eer,
        eer.threshold,
        out.display()
    );
    Ok(())
}

fn cmd_simulate(spec: &synth::SynthSpec, out: &Path) -> faceq_core::Result<()> {
    let (dataset, truth) = synth::generate(spec)?;
    ensure_dir(out)?;
    dataset::write_jsonl(&dataset, &out.join("embeddings.jsonl"))?;
    synth::write_truth_csv(&truth, &out.join("truth.csv"))?;
    println!(
        "simulated {} subjects x {} images in {} dimensions -> {}",
        spec.n_subjects,
        spec.images_per_subject,
        spec.dim,
        out.display()
    );
    Ok(())
}
