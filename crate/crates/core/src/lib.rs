//! Recognition of high-dimensional feature vectors with sparsity augmented
//! collaborative representation (SA-CRC).
//!
//! The pipeline is: flatten activations into vectors ([`features`]), compress
//! them with Gram-matrix PCA ([`pca`]), stack the unit-norm enrolment vectors
//! into a [`Dictionary`], and classify or score probes against it
//! ([`classifiers`]). [`evaluation`] turns scores into EER, GMR-at-FAR, ROC
//! and rank-1 accuracy.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod pca;

pub use classifiers::{Classifier, CrcOperator, Recognizer, RepresentationResult, SacrcConfig, ScoreRule};
pub use data::{build_dictionary, validate_dataset, Dataset, Dictionary, FeatureVector};
pub use error::{Error, Result};
pub use pca::{PcaModel, PcaSelection};
