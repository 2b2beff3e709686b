//! Samples, datasets and the enrolment dictionary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::l2_normalize;

/// One sample's descriptor together with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub class_label: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(id: impl Into<String>, class_label: usize, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            class_label,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A validated collection of samples sharing one dimension.
///
/// `num_classes` is one past the largest class label seen. Whether every
/// class in `[0, num_classes)` is populated is checked separately by
/// [`Dataset::require_all_classes`], since probe sets may legitimately skip
/// classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<FeatureVector>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    /// Validates `samples`: non-empty, a common dimension `D >= 1`, and only
    /// finite values.
    pub fn new(samples: Vec<FeatureVector>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut num_classes = 0;
        for s in &samples {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            if let Some(index) = s.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    sample: s.id.clone(),
                    index,
                });
            }
            num_classes = num_classes.max(s.class_label + 1);
        }
        Ok(Self {
            samples,
            dim,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[FeatureVector] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<FeatureVector> {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-class sample counts, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.class_label] += 1;
        }
        counts
    }

    /// Fails with [`Error::MissingClass`] for the first class in
    /// `[0, num_classes)` that has no sample.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&n| n == 0) {
            Some(class) => Err(Error::MissingClass(class)),
            None => Ok(()),
        }
    }

    /// Samples as the columns of a `D x M` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.samples.len(), |r, c| {
            self.samples[c].values[r]
        })
    }

    /// Applies `f` to every sample's values, keeping ids and labels.
    pub fn map_values<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(FeatureVector::new(s.id.clone(), s.class_label, f(&s.values)?)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

/// Checks a list of samples and wraps it as a [`Dataset`].
pub fn validate_dataset(samples: Vec<FeatureVector>) -> Result<Dataset> {
    Dataset::new(samples)
}

/// Column-stacked unit-norm enrolment features with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    column_labels: Vec<usize>,
    num_classes: usize,
}

impl Dictionary {
    /// Assembles a dictionary from atoms that are already unit-norm and
    /// ordered class-major. Used when loading a persisted model.
    pub fn from_parts(
        atoms: DMatrix<f64>,
        column_labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if atoms.ncols() != column_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.ncols(),
                found: column_labels.len(),
            });
        }
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut seen = vec![false; num_classes];
        for &label in &column_labels {
            if label >= num_classes {
                return Err(Error::UnknownClass {
                    class: label,
                    num_classes,
                });
            }
            seen[label] = true;
        }
        if let Some(class) = seen.iter().position(|s| !s) {
            return Err(Error::MissingClass(class));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameters(format!(
                    "dictionary column {j} is not unit norm (norm {})",
                    col.norm()
                )));
            }
        }
        Ok(Self {
            atoms,
            column_labels,
            num_classes,
        })
    }

    /// The `K x N` atom matrix.
    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn column_labels(&self) -> &[usize] {
        &self.column_labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Feature dimension `K` (rows).
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `N` (columns).
    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// The `c x N` binary label matrix.
    pub fn label_matrix(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.num_classes, self.num_atoms());
        for (j, &class) in self.column_labels.iter().enumerate() {
            l[(class, j)] = 1.0;
        }
        l
    }

    /// `L * alpha`, accumulated per class without forming `L`.
    pub fn class_sums(&self, alpha: &DVector<f64>) -> DVector<f64> {
        let mut q = DVector::zeros(self.num_classes);
        for (j, &class) in self.column_labels.iter().enumerate() {
            q[class] += alpha[j];
        }
        q
    }

    /// Column indices belonging to `class`.
    pub fn class_columns(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.column_labels
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == class)
            .map(|(j, _)| j)
    }
}

/// Builds the dictionary from enrolment features: each sample is
/// l2-normalized and placed as a column, ordered by class and then by input
/// order.
pub fn build_dictionary(enrolment: &Dataset) -> Result<Dictionary> {
    enrolment.require_all_classes()?;
    let mut order: Vec<usize> = (0..enrolment.len()).collect();
    // stable: keeps input order within a class
    order.sort_by_key(|&i| enrolment.samples[i].class_label);

    let k = enrolment.dim();
    let mut atoms = DMatrix::zeros(k, order.len());
    let mut column_labels = Vec::with_capacity(order.len());
    for (j, &i) in order.iter().enumerate() {
        let sample = &enrolment.samples[i];
        let unit = l2_normalize(&sample.values)
            .map_err(|_| Error::ZeroNormSample(sample.id.clone()))?;
        atoms.column_mut(j).copy_from_slice(&unit);
        column_labels.push(sample.class_label);
    }
    Ok(Dictionary {
        atoms,
        column_labels,
        num_classes: enrolment.num_classes(),
    })
}
