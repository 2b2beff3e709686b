//! Verification metrics over a set of genuine and impostor scores.
//!
//! A comparison is accepted at threshold `t` when its score is `>= t`.

use crate::error::{Error, Result};

/// FAR targets reported by default.
pub const DEFAULT_FAR_TARGETS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub probe_id: String,
    pub claimed_class: usize,
    pub score: f64,
    pub is_genuine: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    records: Vec<ScoreRecord>,
}

impl ScoreSet {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
            return Err(Error::NonFiniteScore(r.probe_id.clone()));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn genuine_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_genuine).count()
    }

    pub fn impostor_count(&self) -> usize {
        self.len() - self.genuine_count()
    }

    /// Genuine and impostor scores, each sorted ascending.
    fn split_sorted(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut genuine, mut impostor): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        for r in &self.records {
            if r.is_genuine {
                genuine.push(r.score);
            } else {
                impostor.push(r.score);
            }
        }
        if genuine.is_empty() || impostor.is_empty() {
            return Err(Error::DegenerateScoreSet {
                genuine: genuine.len(),
                impostor: impostor.len(),
            });
        }
        genuine.sort_by(f64::total_cmp);
        impostor.sort_by(f64::total_cmp);
        Ok((genuine, impostor))
    }
}

/// One operating point of the ROC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of impostor scores `>= threshold`.
    pub far: f64,
    /// Fraction of genuine scores `>= threshold`.
    pub gmr: f64,
}

impl RocPoint {
    pub fn fnmr(&self) -> f64 {
        1.0 - self.gmr
    }
}

/// Count of entries `>= t` in an ascending slice.
fn count_at_least(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&s| s < t)
}

fn roc_from_sorted(genuine: &[f64], impostor: &[f64]) -> Vec<RocPoint> {
    let mut thresholds: Vec<f64> = Vec::with_capacity(genuine.len() + impostor.len() + 2);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend(genuine.iter().chain(impostor));
    thresholds[1..].sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);
    thresholds
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            far: count_at_least(impostor, t) as f64 / ni,
            gmr: count_at_least(genuine, t) as f64 / ng,
        })
        .collect()
}

/// Operating points at every distinct observed score, bracketed by `-inf`
/// (everything accepted) and `+inf` (nothing accepted), in increasing
/// threshold order.
pub fn compute_roc(s: &ScoreSet) -> Result<Vec<RocPoint>> {
    let (genuine, impostor) = s.split_sorted()?;
    Ok(roc_from_sorted(&genuine, &impostor))
}

fn eer_from_roc(roc: &[RocPoint]) -> f64 {
    for w in roc.windows(2) {
        let d0 = w[0].far - w[0].fnmr();
        let d1 = w[1].far - w[1].fnmr();
        if d0 == 0.0 {
            return w[0].far;
        }
        if d0 > 0.0 && d1 < 0.0 {
            let t = d0 / (d0 - d1);
            return w[0].far + t * (w[1].far - w[0].far);
        }
    }
    // unreachable with the sentinels in place: d = 1 at -inf and -1 at +inf
    let last = roc[roc.len() - 1];
    (last.far + last.fnmr()) / 2.0
}

/// Equal error rate: the FMR/FNMR crossing of the threshold sweep, linearly
/// interpolated between the two sweep points that bracket it.
pub fn compute_eer(s: &ScoreSet) -> Result<f64> {
    Ok(eer_from_roc(&compute_roc(s)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmrAtFar {
    pub far_target: f64,
    pub gmr: f64,
    pub threshold: f64,
    /// Empirical FAR at `threshold`.
    pub far: f64,
    /// Fewer than `1 / far_target` impostor scores were available.
    pub insufficient_impostors: bool,
    /// No observed threshold reached the target; `gmr` is taken at the
    /// highest observed score.
    pub target_unreachable: bool,
}

fn gmr_from_roc(roc: &[RocPoint], target: f64, impostors: usize) -> GmrAtFar {
    let observed = &roc[1..roc.len() - 1];
    let (point, unreachable) = match observed.iter().find(|p| p.far <= target) {
        Some(p) => (*p, false),
        None => (observed[observed.len() - 1], true),
    };
    GmrAtFar {
        far_target: target,
        gmr: point.gmr,
        threshold: point.threshold,
        far: point.far,
        insufficient_impostors: (impostors as f64) < 1.0 / target,
        target_unreachable: unreachable,
    }
}

/// Genuine match rate at the most lenient observed threshold whose FAR does
/// not exceed `far_target`.
pub fn compute_gmr_at_far(s: &ScoreSet, far_target: f64) -> Result<GmrAtFar> {
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "FAR target {far_target} must lie in (0, 1)"
        )));
    }
    let roc = compute_roc(s)?;
    Ok(gmr_from_roc(&roc, far_target, s.impostor_count()))
}

/// EER, the GMR panel and the ROC of one score set.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationMetrics {
    pub eer: f64,
    pub gmr_at_far: Vec<GmrAtFar>,
    pub roc: Vec<RocPoint>,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

/// Computes every verification metric from a single sort of the scores.
pub fn verification_metrics(s: &ScoreSet, far_targets: &[f64]) -> Result<VerificationMetrics> {
    if let Some(t) = far_targets.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidParameters(format!("FAR target {t} must lie in (0, 1)")));
    }
    let roc = compute_roc(s)?;
    let impostors = s.impostor_count();
    Ok(VerificationMetrics {
        eer: eer_from_roc(&roc),
        gmr_at_far: far_targets
            .iter()
            .map(|&t| gmr_from_roc(&roc, t, impostors))
            .collect(),
        roc,
        genuine_count: s.genuine_count(),
        impostor_count: impostors,
    })
}
