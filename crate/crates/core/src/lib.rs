//! Face-image quality from embedding galleries.
//!
//! The pipeline, end to end: partition a dataset of face embeddings into a
//! one-image-per-subject template gallery plus a probe set; give each probe
//! a quality target from the z-score of its genuine distance against its
//! impostor-distance distribution; train a sigmoid regression head to
//! predict that target straight from the embedding; evaluate verification
//! behavior with FAR/FRR curves, the equal error rate, and distance
//! histograms.
//!
//! All randomness flows through explicitly seeded generators and all file
//! writers format reals for exact round-trips, so every artifact is
//! reproducible byte for byte.
//!
//! ```
//! use faceq_core::dataset::{Dataset, EmbeddingRecord};
//! use faceq_core::gallery::{partition, TemplatePolicy};
//! use faceq_core::labeler::{label_dataset, FailurePolicy};
//!
//! let records = vec![
//!     EmbeddingRecord::new("alice", "a", vec![0.0, 0.0])?,
//!     EmbeddingRecord::new("alice", "b", vec![0.1, 0.0])?,
//!     EmbeddingRecord::new("bob", "a", vec![1.0, 0.0])?,
//!     EmbeddingRecord::new("bob", "b", vec![1.0, 0.1])?,
//!     EmbeddingRecord::new("carol", "a", vec![0.0, 1.0])?,
//! ];
//! let dataset = Dataset::new(records)?;
//! let split = partition(&dataset, TemplatePolicy::First, 7)?;
//! let labeling = label_dataset(&split, FailurePolicy::FailFast)?;
//! // alice and bob each contribute one probe; carol only enrolls
//! assert_eq!(labeling.labels.len(), 2);
//! for label in &labeling.labels {
//!     assert!(label.target > 0.0 && label.target < 1.0);
//! }
//! # Ok::<(), faceq_core::Error>(())
//! ```

pub mod dataset;
pub mod error;
pub mod gallery;
pub mod labeler;
pub mod metrics;
pub mod ops;
pub mod synth;
pub mod textfmt;
pub mod trainer;

pub use dataset::{Dataset, EmbeddingRecord, DEFAULT_DIM};
pub use error::{Error, ErrorCategory, Result};
pub use gallery::{GalleryPartition, PartitionManifest, TemplatePolicy};
pub use labeler::{FailurePolicy, Labeling, QualityLabel, SkippedProbe};
pub use metrics::{DistanceHistograms, EerResult, EvalCurve, PairSet, ScoredPair};
pub use synth::{SynthSpec, SynthTruth};
pub use trainer::{Gradient, RegressionHead, TrainConfig, TrainHistory, Velocity};
