//! Template/probe gallery construction: one enrolled image per subject,
//! every remaining image becomes a probe.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, EmbeddingRecord};
use crate::error::{io_err, Error, Result};

/// How the template image is chosen among a subject's images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplatePolicy {
    /// Lexicographically smallest image id. Needs no randomness.
    First,
    /// Seeded uniform choice among the subject's images.
    Random,
}

impl TemplatePolicy {
    pub fn tag(self) -> &'static str {
        match self {
            Self::First => "first",
            Self::Random => "random",
        }
    }
}

impl FromStr for TemplatePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::First),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown template policy '{other}' (expected 'first' or 'random')"
            ))),
        }
    }
}

/// A template gallery plus the probe set it was split from.
///
/// Every subject of the source dataset owns exactly one template; probes
/// exist only for subjects that had more than one image.
#[derive(Debug, Clone)]
pub struct GalleryPartition {
    templates: BTreeMap<String, EmbeddingRecord>,
    probes: Vec<EmbeddingRecord>,
    policy_tag: String,
    seed: u64,
}

impl GalleryPartition {
    /// Templates keyed by subject, iterated in subject order.
    pub fn templates(&self) -> &BTreeMap<String, EmbeddingRecord> {
        &self.templates
    }

    pub fn probes(&self) -> &[EmbeddingRecord] {
        &self.probes
    }

    pub fn template_for(&self, subject_id: &str) -> Option<&EmbeddingRecord> {
        self.templates.get(subject_id)
    }

    pub fn policy_tag(&self) -> &str {
        &self.policy_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Key-level description of the split, for writing to disk.
    pub fn manifest(&self) -> PartitionManifest {
        PartitionManifest {
            policy_tag: self.policy_tag.clone(),
            seed: self.seed,
            templates: self
                .templates
                .values()
                .map(|r| (r.subject_id.clone(), r.image_id.clone()))
                .collect(),
            probes: self
                .probes
                .iter()
                .map(|r| (r.subject_id.clone(), r.image_id.clone()))
                .collect(),
        }
    }

    /// Rebuilds a partition by resolving manifest keys against a dataset.
    pub fn from_manifest(manifest: &PartitionManifest, dataset: &Dataset) -> Result<Self> {
        let resolve = |subject: &str, image: &str| -> Result<EmbeddingRecord> {
            dataset
                .get(subject, image)
                .cloned()
                .ok_or_else(|| Error::UnresolvedKey {
                    subject: subject.to_owned(),
                    image: image.to_owned(),
                })
        };
        let mut templates = BTreeMap::new();
        let mut template_keys: HashSet<(&str, &str)> = HashSet::new();
        for (subject, image) in &manifest.templates {
            let record = resolve(subject, image)?;
            if templates.insert(subject.clone(), record).is_some() {
                return Err(Error::DuplicateKey {
                    subject: subject.clone(),
                    image: image.clone(),
                });
            }
            template_keys.insert((subject, image));
        }
        let mut probes = Vec::with_capacity(manifest.probes.len());
        for (subject, image) in &manifest.probes {
            if template_keys.contains(&(subject.as_str(), image.as_str())) {
                return Err(Error::InvalidConfig(format!(
                    "({subject}, {image}) is listed both as template and probe"
                )));
            }
            if !templates.contains_key(subject) {
                return Err(Error::MissingTemplate {
                    subject: subject.clone(),
                });
            }
            probes.push(resolve(subject, image)?);
        }
        Ok(Self {
            templates,
            probes,
            policy_tag: manifest.policy_tag.clone(),
            seed: manifest.seed,
        })
    }
}

/// Serialized form of a partition: key lists plus the policy and seed that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub policy_tag: String,
    pub seed: u64,
    pub templates: Vec<(String, String)>,
    pub probes: Vec<(String, String)>,
}

/// Splits a dataset into a one-template-per-subject gallery and a probe set.
///
/// Probes keep the source dataset's record order. The random policy draws
/// from a generator seeded with `seed`, visiting subjects in sorted order,
/// so a given (dataset, policy, seed) always yields the same split.
pub fn partition(dataset: &Dataset, policy: TemplatePolicy, seed: u64) -> Result<GalleryPartition> {
    let mut by_subject: BTreeMap<&str, Vec<&EmbeddingRecord>> = BTreeMap::new();
    for record in dataset.records() {
        by_subject
            .entry(&record.subject_id)
            .or_default()
            .push(record);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut templates = BTreeMap::new();
    let mut template_keys: HashSet<(&str, &str)> = HashSet::new();
    for (subject, records) in &by_subject {
        let chosen: &EmbeddingRecord = match policy {
            TemplatePolicy::First => records
                .iter()
                .min_by_key(|r| &r.image_id)
                .copied()
                .expect("subject groups are non-empty"),
            TemplatePolicy::Random => records[rng.random_range(0..records.len())],
        };
        template_keys.insert(chosen.key());
        templates.insert((*subject).to_owned(), chosen.clone());
    }
    let probes = dataset
        .records()
        .iter()
        .filter(|r| !template_keys.contains(&r.key()))
        .cloned()
        .collect();
    Ok(GalleryPartition {
        templates,
        probes,
        policy_tag: policy.tag().to_owned(),
        seed,
    })
}

/// Writes a manifest as pretty-printed JSON.
pub fn write_manifest(manifest: &PartitionManifest, path: &Path) -> Result<()> {
    let mut json =
        serde_json::to_string_pretty(manifest).expect("manifest serialization cannot fail");
    json.push('\n');
    std::fs::write(path, json).map_err(io_err(path))
}

/// Reads a manifest written by [`write_manifest`].
pub fn read_manifest(path: &Path) -> Result<PartitionManifest> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Malformed {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}
