//! Verification and identification evaluation.

mod metrics;
mod synthetic;

use std::collections::HashMap;

use rayon::prelude::*;

pub use metrics::{
    compute_eer, compute_gmr_at_far, compute_roc, verification_metrics, GmrAtFar, RocPoint, ScoreRecord, ScoreSet,
    VerificationMetrics, DEFAULT_FAR_TARGETS,
};
pub use synthetic::{generate_synthetic, SyntheticParams};

use crate::classifiers::{Classifier, Recognizer, ScoreRule};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which (probe, claimed class) comparisons make up a score set.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// Each probe is compared against every enrolled class.
    AllVsAll,
    /// Explicit `(probe_id, claimed_class)` pairs.
    Pairs(Vec<(String, usize)>),
}

/// Scores probes against claimed classes. Work is spread over the rayon pool;
/// record order follows probe order and never depends on scheduling.
pub fn build_scoreset(
    probes: &Dataset,
    recognizer: &Recognizer,
    classifier: Classifier,
    rule: ScoreRule,
    protocol: &Protocol,
) -> Result<ScoreSet> {
    let dim = recognizer.dictionary().dim();
    if probes.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: probes.dim(),
        });
    }
    let c = recognizer.num_classes();
    let records = match protocol {
        Protocol::AllVsAll => {
            let per_probe: Vec<Vec<ScoreRecord>> = probes
                .samples()
                .par_iter()
                .map(|p| {
                    let scores = recognizer.class_scores(&p.values, classifier, rule)?;
                    Ok(scores
                        .into_iter()
                        .enumerate()
                        .map(|(class, score)| ScoreRecord {
                            probe_id: p.id.clone(),
                            claimed_class: class,
                            score,
                            is_genuine: class == p.class_label,
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            per_probe.into_iter().flatten().collect()
        }
        Protocol::Pairs(pairs) => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            for (i, p) in probes.samples().iter().enumerate() {
                index.entry(p.id.as_str()).or_insert(i);
            }
            pairs
                .par_iter()
                .map(|(id, claimed)| {
                    let i = *index
                        .get(id.as_str())
                        .ok_or_else(|| Error::InvalidParameters(format!("pair refers to unknown probe `{id}`")))?;
                    if *claimed >= c {
                        return Err(Error::UnknownClass {
                            class: *claimed,
                            num_classes: c,
                        });
                    }
                    let p = &probes.samples()[i];
                    let scores = recognizer.class_scores(&p.values, classifier, rule)?;
                    Ok(ScoreRecord {
                        probe_id: id.clone(),
                        claimed_class: *claimed,
                        score: scores[*claimed],
                        is_genuine: *claimed == p.class_label,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    ScoreSet::new(records)
}

/// Rank-1 predictions for every probe, in probe order.
pub fn predict_all(probes: &Dataset, recognizer: &Recognizer, classifier: Classifier) -> Result<Vec<usize>> {
    probes
        .samples()
        .par_iter()
        .map(|p| recognizer.predict(&p.values, classifier))
        .collect()
}

/// Fraction of probes whose predicted class equals their label. Every probe's
/// class must be enrolled.
pub fn rank1_identification(probes: &Dataset, recognizer: &Recognizer, classifier: Classifier) -> Result<f64> {
    let c = recognizer.num_classes();
    if let Some(p) = probes.samples().iter().find(|p| p.class_label >= c) {
        return Err(Error::UnknownClass {
            class: p.class_label,
            num_classes: c,
        });
    }
    let predictions = predict_all(probes, recognizer, classifier)?;
    let correct = predictions
        .iter()
        .zip(probes.samples())
        .filter(|(pred, p)| **pred == p.class_label)
        .count();
    Ok(correct as f64 / probes.len() as f64)
}
