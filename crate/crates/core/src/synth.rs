//! Seeded synthetic embedding generator with a known per-image quality
//! knob.
//!
//! Each subject gets a centroid drawn uniformly on the sphere of radius
//! `centroid_scale`; each image is the centroid plus isotropic Gaussian
//! noise with a per-image scale `tau` drawn uniformly from
//! `[noise_low, noise_high]`. Small `tau` means a clean, high-quality
//! image.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, EmbeddingRecord, DEFAULT_DIM};
use crate::error::{io_err, Error, Result};
use crate::textfmt::{csv_field, format_f64};

/// Shape and noise parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub images_per_subject: usize,
    pub dim: usize,
    pub noise_low: f64,
    pub noise_high: f64,
    pub centroid_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 50,
            images_per_subject: 10,
            dim: DEFAULT_DIM,
            noise_low: 0.05,
            noise_high: 1.0,
            centroid_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_subjects < 2 {
            return bad(format!(
                "need at least 2 subjects for impostor statistics, got {}",
                self.n_subjects
            ));
        }
        if self.images_per_subject == 0 {
            return bad("images_per_subject must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !self.noise_low.is_finite() || !self.noise_high.is_finite() {
            return bad("noise bounds must be finite".into());
        }
        if self.noise_low < 0.0 || self.noise_high < self.noise_low {
            return bad(format!(
                "noise bounds must satisfy 0 <= low <= high, got [{}, {}]",
                self.noise_low, self.noise_high
            ));
        }
        if !self.centroid_scale.is_finite() || self.centroid_scale <= 0.0 {
            return bad(format!(
                "centroid_scale must be positive and finite, got {}",
                self.centroid_scale
            ));
        }
        Ok(())
    }
}

/// The generator's ground truth: the noise scale of every image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    taus: BTreeMap<(String, String), f64>,
}

impl SynthTruth {
    pub fn tau(&self, subject_id: &str, image_id: &str) -> Option<f64> {
        self.taus
            .get(&(subject_id.to_owned(), image_id.to_owned()))
            .copied()
    }

    /// Entries in (subject, image) order.
    pub fn entries(&self) -> impl Iterator<Item = (&(String, String), f64)> {
        self.taus.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

fn unit_vector(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a zero draw has no direction; retry (astronomically rare)
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates the dataset and its ground truth. The same spec always
/// produces the same records.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, SynthTruth)> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.n_subjects * spec.images_per_subject);
    let mut taus = BTreeMap::new();
    for s in 0..spec.n_subjects {
        let subject_id = format!("s{s:05}");
        let centroid: Vec<f64> = unit_vector(&mut rng, spec.dim)
            .into_iter()
            .map(|x| x * spec.centroid_scale)
            .collect();
        for i in 0..spec.images_per_subject {
            let image_id = format!("i{i:04}");
            let tau = if spec.noise_low == spec.noise_high {
                spec.noise_low
            } else {
                rng.random_range(spec.noise_low..spec.noise_high)
            };
            let vector: Vec<f64> = centroid
                .iter()
                .map(|c| c + tau * rng.sample::<f64, _>(StandardNormal))
                .collect();
            records.push(EmbeddingRecord::new(
                subject_id.as_str(),
                image_id.as_str(),
                vector,
            )?);
            taus.insert((subject_id.clone(), image_id.clone()), tau);
        }
    }
    Ok((Dataset::new(records)?, SynthTruth { taus }))
}

/// Writes the ground truth as `subject,image,tau` rows in key order.
pub fn write_truth_csv(truth: &SynthTruth, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let inner = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "subject,image,tau")?;
        for ((subject, image), tau) in truth.entries() {
            writeln!(
                w,
                "{},{},{}",
                csv_field(subject),
                csv_field(image),
                format_f64(tau)
            )?;
        }
        w.flush()
    };
    inner(&mut w).map_err(io_err(path))
}
