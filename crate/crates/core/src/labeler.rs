//! Quality label generation.
//!
//! For each probe: the genuine score is its distance to its own subject's
//! template; the impostor distribution is its distances to every other
//! subject's template. The z-score of the genuine distance against that
//! distribution, squashed through `logistic(-z)`, becomes a (0, 1) training
//! target where well-separated probes land near 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::dataset::EmbeddingRecord;
use crate::error::{csv_err, io_err, Error, Result};
use crate::gallery::GalleryPartition;
use crate::ops::{euclidean_distance, logistic};
use crate::textfmt::{csv_field, format_f64};

pub const LABELS_HEADER: [&str; 7] = [
    "subject",
    "image",
    "genuine_dist",
    "imp_mean",
    "imp_std",
    "z",
    "target",
];

/// Per-probe quality supervision record.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityLabel {
    pub subject_id: String,
    pub image_id: String,
    pub genuine_dist: f64,
    pub impostor_mean: f64,
    pub impostor_std: f64,
    pub z_score: f64,
    pub target: f64,
}

/// Distance from a probe to its own subject's template.
pub fn genuine_score(probe: &EmbeddingRecord, partition: &GalleryPartition) -> Result<f64> {
    let template =
        partition
            .template_for(&probe.subject_id)
            .ok_or_else(|| Error::MissingTemplate {
                subject: probe.subject_id.clone(),
            })?;
    euclidean_distance(&probe.vector, &template.vector)
}

/// Mean and population standard deviation of the probe's distances to every
/// template enrolled for a different subject.
pub fn impostor_stats(probe: &EmbeddingRecord, partition: &GalleryPartition) -> Result<(f64, f64)> {
    let mut distances = Vec::with_capacity(partition.templates().len().saturating_sub(1));
    for (subject, template) in partition.templates() {
        if subject == &probe.subject_id {
            continue;
        }
        distances.push(euclidean_distance(&probe.vector, &template.vector)?);
    }
    if distances.len() < 2 {
        return Err(Error::TooFewImpostors {
            found: distances.len(),
        });
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::DegenerateImpostors);
    }
    Ok((mean, std))
}

/// Z-score of the genuine distance against the impostor distribution.
pub fn normalize(genuine_dist: f64, impostor_mean: f64, impostor_std: f64) -> Result<f64> {
    // a NaN std must fail here too, not merely a non-positive one
    if impostor_std.is_nan() || impostor_std <= 0.0 {
        return Err(Error::DegenerateImpostors);
    }
    Ok((genuine_dist - impostor_mean) / impostor_std)
}

/// Maps a z-score to a (0, 1) training target. Strictly decreasing: a more
/// negative z (genuine distance far below the impostor mean) means higher
/// quality.
pub fn to_target(z_score: f64) -> Result<f64> {
    if !z_score.is_finite() {
        return Err(Error::NonFinite {
            context: "z-score".into(),
        });
    }
    Ok(logistic(-z_score))
}

/// Labels one probe against the gallery.
pub fn label_probe(probe: &EmbeddingRecord, partition: &GalleryPartition) -> Result<QualityLabel> {
    let genuine_dist = genuine_score(probe, partition)?;
    let (impostor_mean, impostor_std) = impostor_stats(probe, partition)?;
    let z_score = normalize(genuine_dist, impostor_mean, impostor_std)?;
    let target = to_target(z_score)?;
    Ok(QualityLabel {
        subject_id: probe.subject_id.clone(),
        image_id: probe.image_id.clone(),
        genuine_dist,
        impostor_mean,
        impostor_std,
        z_score,
        target,
    })
}

/// What to do when a single probe cannot be labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePolicy {
    /// Abort on the first failing probe.
    FailFast,
    /// Drop failing probes and report them alongside the labels.
    SkipAndReport,
}

/// A probe that could not be labeled, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedProbe {
    pub subject_id: String,
    pub image_id: String,
    pub reason: String,
}

/// Labels for a whole partition, plus any probes that were skipped.
#[derive(Debug, Clone, Default)]
pub struct Labeling {
    pub labels: Vec<QualityLabel>,
    pub skipped: Vec<SkippedProbe>,
}

/// Labels every probe, in probe order.
pub fn label_dataset(partition: &GalleryPartition, policy: FailurePolicy) -> Result<Labeling> {
    let mut labeling = Labeling {
        labels: Vec::with_capacity(partition.probes().len()),
        skipped: Vec::new(),
    };
    for probe in partition.probes() {
        match label_probe(probe, partition) {
            Ok(label) => labeling.labels.push(label),
            Err(err) => match policy {
                FailurePolicy::FailFast => {
                    return Err(Error::Probe {
                        subject: probe.subject_id.clone(),
                        image: probe.image_id.clone(),
                        source: Box::new(err),
                    });
                }
                FailurePolicy::SkipAndReport => labeling.skipped.push(SkippedProbe {
                    subject_id: probe.subject_id.clone(),
                    image_id: probe.image_id.clone(),
                    reason: err.to_string(),
                }),
            },
        }
    }
    Ok(labeling)
}

/// Writes labels as CSV with round-trip-exact reals.
pub fn write_labels_csv(labels: &[QualityLabel], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{}", LABELS_HEADER.join(","))?;
        for label in labels {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                csv_field(&label.subject_id),
                csv_field(&label.image_id),
                format_f64(label.genuine_dist),
                format_f64(label.impostor_mean),
                format_f64(label.impostor_std),
                format_f64(label.z_score),
                format_f64(label.target),
            )?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}

#[derive(Deserialize)]
struct LabelRow {
    subject: String,
    image: String,
    genuine_dist: f64,
    imp_mean: f64,
    imp_std: f64,
    z: f64,
    target: f64,
}

/// Reads a labels CSV written by [`write_labels_csv`].
pub fn read_labels_csv(path: &Path) -> Result<Vec<QualityLabel>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?;
    if headers != LABELS_HEADER.as_slice() {
        return Err(Error::Malformed {
            path: path.to_owned(),
            line: 1,
            message: format!(
                "unexpected header {:?}, expected {:?}",
                headers,
                LABELS_HEADER.join(",")
            ),
        });
    }
    let mut labels = Vec::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let check = |name: &str, value: f64| -> Result<f64> {
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::Malformed {
                    path: path.to_owned(),
                    line: i + 2,
                    message: format!("non-finite {name}"),
                })
            }
        };
        labels.push(QualityLabel {
            genuine_dist: check("genuine_dist", row.genuine_dist)?,
            impostor_mean: check("imp_mean", row.imp_mean)?,
            impostor_std: check("imp_std", row.imp_std)?,
            z_score: check("z", row.z)?,
            target: check("target", row.target)?,
            subject_id: row.subject,
            image_id: row.image,
        });
    }
    Ok(labels)
}
