//! Representation-based classification over an enrolment dictionary.
//!
//! SA-CRC codes a unit-norm probe twice, once densely with ridge regression
//! ([`crc_solve`]) and once with at most `k` atoms ([`omp_solve`]), adds the
//! two codes, rescales the sum to unit length and sums it per class with the
//! label matrix. The class with the largest sum wins.
//!
//! The ridge penalty is the squared norm `lambda * ||alpha||_2^2`, which is
//! what gives the closed-form operator `(Phi^T Phi + lambda I)^{-1} Phi^T`.

mod crc;
mod omp;

use std::str::FromStr;

use nalgebra::DVector;

pub use crc::{crc_solve, CrcOperator};
pub use omp::{omp_solve, SparseCode, CORRELATION_FLOOR};

use crate::data::{Dataset, Dictionary};
use crate::error::{Error, Result};
use crate::features::l2_norm;

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_MAX_SPARSITY: usize = 50;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

/// Below this norm the summed code is treated as zero.
pub const AUGMENTATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacrcConfig {
    pub lambda: f64,
    pub sparsity_k: usize,
    pub residual_tol: f64,
}

impl SacrcConfig {
    /// Defaults for a dictionary with `num_atoms` columns.
    pub fn for_atoms(num_atoms: usize) -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            sparsity_k: DEFAULT_MAX_SPARSITY.min(num_atoms),
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }

    pub fn validate(&self, num_atoms: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameters(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if self.sparsity_k == 0 || self.sparsity_k > num_atoms {
            return Err(Error::InvalidParameters(format!(
                "sparsity k = {} must lie in [1, {num_atoms}]",
                self.sparsity_k
            )));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::InvalidParameters(format!(
                "residual tolerance {} must be >= 0",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

/// Every intermediate of one SA-CRC decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationResult {
    pub alpha_collab: DVector<f64>,
    pub alpha_sparse: DVector<f64>,
    /// Unit-norm augmented code.
    pub alpha_aug: DVector<f64>,
    /// `L * alpha_aug`.
    pub class_scores: DVector<f64>,
    pub predicted_class: usize,
    /// Set when the summed code vanished and `alpha_aug` fell back to the
    /// normalized collaborative code.
    pub degenerate: bool,
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the first minimum.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn unit_probe(y: &[f64], dim: usize) -> Result<DVector<f64>> {
    if y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: y.len(),
        });
    }
    let norm = l2_norm(y);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNormSample("probe".into()));
    }
    Ok(DVector::from_iterator(dim, y.iter().map(|v| v / norm)))
}

/// `(collab + sparse) / ||collab + sparse||`. When the sum vanishes the
/// normalized collaborative code is returned instead, with the flag set.
pub fn augment(collab: &DVector<f64>, sparse: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let sum = collab + sparse;
    let sum_norm = sum.norm();
    if sum_norm >= AUGMENTATION_FLOOR {
        return Ok((sum / sum_norm, false));
    }
    let collab_norm = collab.norm();
    if collab_norm < AUGMENTATION_FLOOR {
        return Err(Error::DegenerateAugmentation);
    }
    Ok((collab / collab_norm, true))
}

pub fn sacrc_classify(
    y: &[f64],
    dict: &Dictionary,
    op: &CrcOperator,
    cfg: &SacrcConfig,
) -> Result<RepresentationResult> {
    let y = unit_probe(y, dict.dim())?;
    let alpha_collab = crc_solve(&y, op)?;
    let alpha_sparse = omp_solve(&y, dict, cfg.sparsity_k, cfg.residual_tol)?.coefficients;

    let (alpha_aug, degenerate) = augment(&alpha_collab, &alpha_sparse)?;
    let class_scores = dict.class_sums(&alpha_aug);
    let predicted_class = argmax(class_scores.as_slice());
    Ok(RepresentationResult {
        alpha_collab,
        alpha_sparse,
        alpha_aug,
        class_scores,
        predicted_class,
        degenerate,
    })
}

/// Class-specific residuals `||y - Phi delta_i(alpha)||_2` and the class
/// minimizing them.
pub fn src_residual_classify(y: &[f64], dict: &Dictionary, alpha: &DVector<f64>) -> (usize, Vec<f64>) {
    let residuals = class_residuals(y, dict, alpha);
    (argmin(&residuals), residuals)
}

fn class_residuals(y: &[f64], dict: &Dictionary, alpha: &DVector<f64>) -> Vec<f64> {
    let atoms = dict.atoms();
    let mut reconstructions = vec![DVector::<f64>::zeros(dict.dim()); dict.num_classes()];
    for (j, &class) in dict.column_labels().iter().enumerate() {
        if alpha[j] != 0.0 {
            reconstructions[class].axpy(alpha[j], &atoms.column(j), 1.0);
        }
    }
    reconstructions
        .iter()
        .map(|r| {
            y.iter()
                .zip(r.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Class of the nearest enrolment sample in Euclidean distance; the earliest
/// sample wins ties.
pub fn knn1_classify(y: &[f64], enrolment: &Dataset) -> Result<usize> {
    if enrolment.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y.len() != enrolment.dim() {
        return Err(Error::DimensionMismatch {
            expected: enrolment.dim(),
            found: y.len(),
        });
    }
    let mut best = (f64::INFINITY, 0);
    for s in enrolment.samples() {
        let d = squared_distance(y, &s.values);
        if d < best.0 {
            best = (d, s.class_label);
        }
    }
    Ok(best.1)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Verification score of `y` against `claimed_class`: that class's entry of
/// `Q = L * alpha_aug`.
pub fn match_score(
    y: &[f64],
    dict: &Dictionary,
    op: &CrcOperator,
    cfg: &SacrcConfig,
    claimed_class: usize,
) -> Result<f64> {
    if claimed_class >= dict.num_classes() {
        return Err(Error::UnknownClass {
            class: claimed_class,
            num_classes: dict.num_classes(),
        });
    }
    Ok(sacrc_classify(y, dict, op, cfg)?.class_scores[claimed_class])
}

/// Decision rule used for identification and verification scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classifier {
    /// Augmented code, label-matrix decision.
    Sacrc,
    /// Collaborative code only, label-matrix decision.
    Crc,
    /// OMP code, minimum class residual.
    Src,
    /// Nearest atom in Euclidean distance.
    Knn1,
}

impl Classifier {
    pub const ALL: [Classifier; 4] = [Classifier::Sacrc, Classifier::Crc, Classifier::Src, Classifier::Knn1];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Sacrc => "sacrc",
            Classifier::Crc => "crc",
            Classifier::Src => "src",
            Classifier::Knn1 => "knn1",
        }
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sacrc" => Ok(Classifier::Sacrc),
            "crc" | "crc-only" => Ok(Classifier::Crc),
            "src" | "src-residual" => Ok(Classifier::Src),
            "knn1" | "knn" => Ok(Classifier::Knn1),
            other => Err(Error::InvalidParameters(format!("unknown classifier `{other}`"))),
        }
    }
}

/// How a representation is turned into a per-class verification score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreRule {
    /// Label-matrix evidence `Q_i`.
    #[default]
    ClassEvidence,
    /// Negated class residual `-r_i`.
    Residual,
}

impl FromStr for ScoreRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(ScoreRule::ClassEvidence),
            "residual" => Ok(ScoreRule::Residual),
            other => Err(Error::InvalidParameters(format!("unknown score rule `{other}`"))),
        }
    }
}

impl ScoreRule {
    pub fn name(self) -> &'static str {
        match self {
            ScoreRule::ClassEvidence => "q",
            ScoreRule::Residual => "residual",
        }
    }
}

/// A dictionary with its factorized ridge operator and hyperparameters, ready
/// to score probes. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Recognizer {
    dict: Dictionary,
    op: CrcOperator,
    cfg: SacrcConfig,
}

impl Recognizer {
    pub fn new(dict: Dictionary, cfg: SacrcConfig) -> Result<Self> {
        cfg.validate(dict.num_atoms())?;
        let op = CrcOperator::new(&dict, cfg.lambda)?;
        Ok(Self { dict, op, cfg })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn operator(&self) -> &CrcOperator {
        &self.op
    }

    pub fn config(&self) -> &SacrcConfig {
        &self.cfg
    }

    pub fn num_classes(&self) -> usize {
        self.dict.num_classes()
    }

    pub fn sacrc(&self, y: &[f64]) -> Result<RepresentationResult> {
        sacrc_classify(y, &self.dict, &self.op, &self.cfg)
    }

    /// Per-class scores, higher meaning more likely genuine.
    pub fn class_scores(&self, y: &[f64], classifier: Classifier, rule: ScoreRule) -> Result<Vec<f64>> {
        let negate = |v: Vec<f64>| v.into_iter().map(|r| -r).collect();
        match (classifier, rule) {
            (Classifier::Sacrc, ScoreRule::ClassEvidence) => {
                Ok(self.sacrc(y)?.class_scores.as_slice().to_vec())
            }
            (Classifier::Sacrc, ScoreRule::Residual) => {
                let r = self.sacrc(y)?;
                let code = (&r.alpha_collab + &r.alpha_sparse) * 0.5;
                let unit = unit_probe(y, self.dict.dim())?;
                Ok(negate(class_residuals(unit.as_slice(), &self.dict, &code)))
            }
            (Classifier::Crc, ScoreRule::ClassEvidence) => {
                let unit = unit_probe(y, self.dict.dim())?;
                let code = crc_solve(&unit, &self.op)?;
                let norm = code.norm();
                if norm < AUGMENTATION_FLOOR {
                    return Err(Error::DegenerateAugmentation);
                }
                Ok(self.dict.class_sums(&(code / norm)).as_slice().to_vec())
            }
            (Classifier::Crc, ScoreRule::Residual) => {
                let unit = unit_probe(y, self.dict.dim())?;
                let code = crc_solve(&unit, &self.op)?;
                Ok(negate(class_residuals(unit.as_slice(), &self.dict, &code)))
            }
            (Classifier::Src, _) => {
                let unit = unit_probe(y, self.dict.dim())?;
                let code = omp_solve(&unit, &self.dict, self.cfg.sparsity_k, self.cfg.residual_tol)?;
                Ok(negate(class_residuals(unit.as_slice(), &self.dict, &code.coefficients)))
            }
            (Classifier::Knn1, _) => {
                let unit = unit_probe(y, self.dict.dim())?;
                let mut best = vec![f64::INFINITY; self.num_classes()];
                for (j, &class) in self.dict.column_labels().iter().enumerate() {
                    let d = squared_distance(unit.as_slice(), self.dict.atoms().column(j).as_slice());
                    best[class] = best[class].min(d);
                }
                Ok(best.into_iter().map(|d| -d.sqrt()).collect())
            }
        }
    }

    /// Rank-1 decision of `classifier` for probe `y`.
    pub fn predict(&self, y: &[f64], classifier: Classifier) -> Result<usize> {
        match classifier {
            Classifier::Sacrc => Ok(self.sacrc(y)?.predicted_class),
            Classifier::Knn1 => {
                let unit = unit_probe(y, self.dict.dim())?;
                let mut best = (f64::INFINITY, 0);
                for (j, &class) in self.dict.column_labels().iter().enumerate() {
                    let d = squared_distance(unit.as_slice(), self.dict.atoms().column(j).as_slice());
                    if d < best.0 {
                        best = (d, class);
                    }
                }
                Ok(best.1)
            }
            other => Ok(argmax(&self.class_scores(y, other, ScoreRule::ClassEvidence)?)),
        }
    }
}
