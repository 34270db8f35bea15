//! The trainable quality predictor: a single sigmoid unit over fixed
//! embeddings, fitted with mini-batch SGD (classical momentum, L2 decay on
//! the weights) against a root-mean-squared logarithmic error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use crate::dataset::Dataset;
use crate::error::{io_err, Error, Result};
use crate::labeler::QualityLabel;
use crate::ops::logistic;
use crate::textfmt::{csv_field, format_f64};

/// Weight vector plus bias of the sigmoid quality predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl RegressionHead {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub log_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.99,
            weight_decay: 1e-5,
            batch_size: 64,
            epochs: 30,
            train_fraction: 0.7,
            seed: 0,
            log_epsilon: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            ));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return bad(format!(
                "weight_decay must be non-negative and finite, got {}",
                self.weight_decay
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !self.train_fraction.is_finite()
            || self.train_fraction <= 0.0
            || self.train_fraction >= 1.0
        {
            return bad(format!(
                "train_fraction must be strictly between 0 and 1, got {}",
                self.train_fraction
            ));
        }
        if !self.log_epsilon.is_finite() || self.log_epsilon <= 0.0 {
            return bad(format!(
                "log_epsilon must be positive and finite, got {}",
                self.log_epsilon
            ));
        }
        Ok(())
    }
}

/// Sigmoid response of the head to one embedding, always inside (0, 1).
pub fn predict(head: &RegressionHead, vector: &[f64]) -> Result<f64> {
    if head.weights.len() != vector.len() {
        return Err(Error::DimensionMismatch {
            expected: head.weights.len(),
            got: vector.len(),
        });
    }
    let activation: f64 = head
        .weights
        .iter()
        .zip(vector)
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + head.bias;
    Ok(logistic(activation))
}

fn check_loss_inputs(targets: &[f64], predictions: &[f64], log_epsilon: f64) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidConfig("loss over an empty batch".into()));
    }
    if targets.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if !log_epsilon.is_finite() || log_epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "log_epsilon must be positive and finite, got {log_epsilon}"
        )));
    }
    Ok(())
}

/// Root of the mean squared difference between shifted logs of targets and
/// predictions. `log_epsilon` keeps the logs finite when a value sits at the
/// bottom of its range.
pub fn rmsle_loss(targets: &[f64], predictions: &[f64], log_epsilon: f64) -> Result<f64> {
    check_loss_inputs(targets, predictions, log_epsilon)?;
    let n = targets.len() as f64;
    let sum: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(y, p)| {
            let e = (p + log_epsilon).ln() - (y + log_epsilon).ln();
            e * e
        })
        .sum();
    Ok((sum / n).sqrt())
}

/// Gradient of the batch loss with respect to the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Momentum buffer, same shape as the parameters it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Velocity {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }
}

/// Analytic gradient of `rmsle_loss(targets, predict(head, x))` over a batch.
///
/// The square root has a kink where the loss is exactly zero (a perfect
/// fit); the gradient is defined as zero there, which is also the global
/// minimum.
pub fn loss_gradient(
    head: &RegressionHead,
    vectors: &[&[f64]],
    targets: &[f64],
    log_epsilon: f64,
) -> Result<Gradient> {
    if vectors.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: vectors.len(),
        });
    }
    let mut predictions = Vec::with_capacity(vectors.len());
    for v in vectors {
        predictions.push(predict(head, v)?);
    }
    check_loss_inputs(targets, &predictions, log_epsilon)?;

    let n = vectors.len() as f64;
    let mut errs = Vec::with_capacity(vectors.len());
    let mut sum_sq = 0.0;
    for (y, p) in targets.iter().zip(&predictions) {
        let e = (p + log_epsilon).ln() - (y + log_epsilon).ln();
        errs.push(e);
        sum_sq += e * e;
    }
    let loss = (sum_sq / n).sqrt();

    let dim = head.dim();
    let mut grad = Gradient {
        weights: vec![0.0; dim],
        bias: 0.0,
    };
    if loss == 0.0 {
        return Ok(grad);
    }
    for ((v, p), e) in vectors.iter().zip(&predictions).zip(&errs) {
        // dL/de_i = e_i / (n L); de_i/dz_i = p (1 - p) / (p + eps)
        let coeff = e / (n * loss) * p * (1.0 - p) / (p + log_epsilon);
        grad.bias += coeff;
        for (gw, x) in grad.weights.iter_mut().zip(*v) {
            *gw += coeff * x;
        }
    }
    Ok(grad)
}

/// One SGD update with classical momentum and L2 decay on the weights:
/// `v <- momentum v - lr (g + weight_decay w)`, then `w <- w + v`. The bias
/// is exempt from decay.
pub fn sgd_step(
    head: &mut RegressionHead,
    velocity: &mut Velocity,
    gradient: &Gradient,
    config: &TrainConfig,
) -> Result<()> {
    let dim = head.dim();
    if gradient.weights.len() != dim || velocity.weights.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: gradient.weights.len().min(velocity.weights.len()),
        });
    }
    if !gradient.bias.is_finite() || gradient.weights.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "gradient".into(),
        });
    }
    for i in 0..dim {
        let g = gradient.weights[i] + config.weight_decay * head.weights[i];
        velocity.weights[i] = config.momentum * velocity.weights[i] - config.learning_rate * g;
        head.weights[i] += velocity.weights[i];
    }
    velocity.bias = config.momentum * velocity.bias - config.learning_rate * gradient.bias;
    head.bias += velocity.bias;
    if !head.bias.is_finite() || head.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            context: "updated parameters".into(),
        });
    }
    Ok(())
}

/// Loss trajectory and the exact membership of the train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Losses of the freshly initialized head, before any update.
    pub initial_train_loss: f64,
    pub initial_test_loss: f64,
    /// One entry per epoch, measured over the full split after the epoch.
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub train_keys: Vec<(String, String)>,
    pub test_keys: Vec<(String, String)>,
}

/// Trains a fresh head on labeled embeddings.
///
/// One seeded generator drives, in order: the parameter initialization, the
/// train/test shuffle, and each epoch's batch shuffle. The first
/// `floor(train_fraction * n)` shuffled records train; the rest are held
/// out. Losses are recorded per epoch over both splits.
pub fn train(
    labels: &[QualityLabel],
    embeddings: &Dataset,
    config: &TrainConfig,
) -> Result<(RegressionHead, TrainHistory)> {
    config.validate()?;
    let dim = embeddings.dim();
    let mut vectors: Vec<&[f64]> = Vec::with_capacity(labels.len());
    let mut targets: Vec<f64> = Vec::with_capacity(labels.len());
    for label in labels {
        let record = embeddings
            .get(&label.subject_id, &label.image_id)
            .ok_or_else(|| Error::UnresolvedKey {
                subject: label.subject_id.clone(),
                image: label.image_id.clone(),
            })?;
        vectors.push(&record.vector);
        targets.push(label.target);
    }
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewRecords { need: 2, found: n });
    }

    let mut rng = StdRng::seed_from_u64(config.seed);
    // small symmetric init; zero init would start exactly at the 0.5
    // fixed point
    let mut head = RegressionHead {
        weights: (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect(),
        bias: rng.random_range(-0.1..0.1),
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (config.train_fraction * n as f64).floor() as usize;
    if n_train == 0 {
        return Err(Error::InvalidConfig(format!(
            "train_fraction {} leaves an empty training split for {} records",
            config.train_fraction, n
        )));
    }
    let (train_idx, test_idx) = order.split_at(n_train);

    let eval_loss = |head: &RegressionHead, idx: &[usize]| -> Result<f64> {
        let mut ys = Vec::with_capacity(idx.len());
        let mut ps = Vec::with_capacity(idx.len());
        for &i in idx {
            ys.push(targets[i]);
            ps.push(predict(head, vectors[i])?);
        }
        rmsle_loss(&ys, &ps, config.log_epsilon)
    };

    let initial_train_loss = eval_loss(&head, train_idx)?;
    let initial_test_loss = eval_loss(&head, test_idx)?;

    let mut velocity = Velocity::zeros(dim);
    let mut train_order = train_idx.to_vec();
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut test_loss = Vec::with_capacity(config.epochs);
    let mut batch_vectors: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut batch_targets: Vec<f64> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        train_order.shuffle(&mut rng);
        for (batch_no, batch) in train_order.chunks(config.batch_size).enumerate() {
            batch_vectors.clear();
            batch_targets.clear();
            for &i in batch {
                batch_vectors.push(vectors[i]);
                batch_targets.push(targets[i]);
            }
            let gradient =
                loss_gradient(&head, &batch_vectors, &batch_targets, config.log_epsilon)?;
            sgd_step(&mut head, &mut velocity, &gradient, config)
                .map_err(|err| annotate_step(err, epoch, batch_no))?;
        }
        train_loss.push(eval_loss(&head, train_idx)?);
        test_loss.push(eval_loss(&head, test_idx)?);
    }

    let keys = |idx: &[usize]| {
        idx.iter()
            .map(|&i| (labels[i].subject_id.clone(), labels[i].image_id.clone()))
            .collect()
    };
    Ok((
        head,
        TrainHistory {
            initial_train_loss,
            initial_test_loss,
            train_loss,
            test_loss,
            train_keys: keys(train_idx),
            test_keys: keys(test_idx),
        },
    ))
}

fn annotate_step(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite { context } => Error::NonFinite {
            context: format!("{context} at epoch {}, batch {}", epoch + 1, batch + 1),
        },
        other => other,
    }
}

/// Writes the model file: dimension, parameters, the training
/// configuration, and the seed, with round-trip-exact reals.
pub fn write_model(head: &RegressionHead, config: &TrainConfig, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"dim\": {},\n", head.dim()));
    out.push_str("  \"weights\": [");
    for (i, w) in head.weights.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format_f64(*w));
    }
    out.push_str("],\n");
    out.push_str(&format!("  \"bias\": {},\n", format_f64(head.bias)));
    out.push_str("  \"config\": {\n");
    out.push_str(&format!(
        "    \"learning_rate\": {},\n",
        format_f64(config.learning_rate)
    ));
    out.push_str(&format!(
        "    \"momentum\": {},\n",
        format_f64(config.momentum)
    ));
    out.push_str(&format!(
        "    \"weight_decay\": {},\n",
        format_f64(config.weight_decay)
    ));
    out.push_str(&format!("    \"batch_size\": {},\n", config.batch_size));
    out.push_str(&format!("    \"epochs\": {},\n", config.epochs));
    out.push_str(&format!(
        "    \"train_fraction\": {},\n",
        format_f64(config.train_fraction)
    ));
    out.push_str(&format!(
        "    \"log_epsilon\": {}\n",
        format_f64(config.log_epsilon)
    ));
    out.push_str("  },\n");
    out.push_str(&format!("  \"seed\": {}\n", config.seed));
    out.push_str("}\n");
    std::fs::write(path, out).map_err(io_err(path))
}

#[derive(Deserialize)]
struct ModelFile {
    dim: usize,
    weights: Vec<f64>,
    bias: f64,
    config: ModelConfigBlock,
    seed: u64,
}

#[derive(Deserialize)]
struct ModelConfigBlock {
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    batch_size: usize,
    epochs: usize,
    train_fraction: f64,
    log_epsilon: f64,
}

/// Reads a model file written by [`write_model`].
pub fn read_model(path: &Path) -> Result<(RegressionHead, TrainConfig)> {
    let file = File::open(path).map_err(io_err(path))?;
    let parsed: ModelFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Malformed {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
    if parsed.weights.len() != parsed.dim {
        return Err(Error::Malformed {
            path: path.to_owned(),
            line: 0,
            message: format!(
                "dim field says {}, but {} weights are present",
                parsed.dim,
                parsed.weights.len()
            ),
        });
    }
    if !parsed.bias.is_finite() || parsed.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("model parameters in {}", path.display()),
        });
    }
    let head = RegressionHead {
        weights: parsed.weights,
        bias: parsed.bias,
    };
    let config = TrainConfig {
        learning_rate: parsed.config.learning_rate,
        momentum: parsed.config.momentum,
        weight_decay: parsed.config.weight_decay,
        batch_size: parsed.config.batch_size,
        epochs: parsed.config.epochs,
        train_fraction: parsed.config.train_fraction,
        seed: parsed.seed,
        log_epsilon: parsed.config.log_epsilon,
    };
    Ok((head, config))
}

/// Writes the per-epoch loss table: `epoch,train_loss,test_loss`.
pub fn write_history_csv(history: &TrainHistory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,test_loss")?;
        for (i, (tr, te)) in history
            .train_loss
            .iter()
            .zip(&history.test_loss)
            .enumerate()
        {
            writeln!(w, "{},{},{}", i + 1, format_f64(*tr), format_f64(*te))?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}

/// Scores every record of a dataset with a trained head and writes
/// `subject,image,quality` rows in dataset order.
pub fn write_scores_csv(head: &RegressionHead, dataset: &Dataset, path: &Path) -> Result<()> {
    let mut rows = Vec::with_capacity(dataset.len());
    for record in dataset.records() {
        let quality = predict(head, &record.vector)?;
        rows.push(format!(
            "{},{},{}",
            csv_field(&record.subject_id),
            csv_field(&record.image_id),
            format_f64(quality)
        ));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "subject,image,quality")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}
