//! PCA for data with far more dimensions than samples.
//!
//! With `M` centered samples as the columns of `X` (`D x M`), the nonzero
//! eigenvalues of the scatter matrix `X X^T` are those of the Gram matrix
//! `X^T X`, and a Gram eigenvector `v` with eigenvalue `mu` maps to the unit
//! scatter eigenvector `X v / sqrt(mu)`. Only the `M x M` Gram matrix is
//! decomposed, so memory stays at `O(M^2 + D K)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Number of components used when nothing else is requested.
pub const DEFAULT_NUM_COMPONENTS: usize = 1300;

/// Eigenvalues below this fraction of the largest are discarded.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaSelection {
    /// Exactly `K` components.
    Fixed(usize),
    /// The smallest `K` whose cumulative eigenvalue fraction reaches the
    /// given value in `(0, 1]`.
    Retain(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Length-`D` mean of the enrolment data.
    pub mean: DVector<f64>,
    /// `D x K`, orthonormal columns.
    pub projection: DMatrix<f64>,
    /// Gram eigenvalues (sums of squared centered projections), non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Cumulative explained-variance fractions, one per kept component.
    pub variance_fractions: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.projection.ncols()
    }

    /// Projects `x` onto the principal directions: `M^T (x - mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        pca_transform(x, self)
    }
}

/// Every usable principal direction of a dataset, before truncation.
#[derive(Debug, Clone)]
struct GramDecomposition {
    mean: DVector<f64>,
    directions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    cumulative: Vec<f64>,
    /// `min(D, M - 1)`
    max_components: usize,
}

impl GramDecomposition {
    fn compute(data: &Dataset) -> Result<Self> {
        let m = data.len();
        if m < 2 {
            return Err(Error::InsufficientSamples { needed: 2, found: m });
        }
        let d = data.dim();
        let mut x = data.to_matrix();
        let mean = x.column_mean();
        for mut col in x.column_iter_mut() {
            col -= &mean;
        }

        let gram = x.tr_mul(&x);
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let largest = eig.eigenvalues[order[0]];
        if !(largest > 0.0) {
            return Err(Error::DegenerateData);
        }
        let floor = EIGENVALUE_FLOOR * largest;
        let max_components = d.min(m - 1);
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > floor)
            .take(max_components)
            .collect();

        let mut directions = DMatrix::zeros(d, kept.len());
        let mut eigenvalues = Vec::with_capacity(kept.len());
        for (k, &i) in kept.iter().enumerate() {
            let mu = eig.eigenvalues[i];
            let mut u = &x * eig.eigenvectors.column(i) / mu.sqrt();
            canonical_sign(&mut u);
            directions.set_column(k, &u);
            eigenvalues.push(mu);
        }

        let total: f64 = eigenvalues.iter().sum();
        let mut acc = 0.0;
        let cumulative = eigenvalues
            .iter()
            .map(|mu| {
                acc += mu;
                acc / total
            })
            .collect();

        Ok(Self {
            mean,
            directions,
            eigenvalues,
            cumulative,
            max_components,
        })
    }

    fn resolve(&self, selection: PcaSelection) -> Result<usize> {
        match selection {
            PcaSelection::Fixed(0) => Err(Error::InvalidParameters(
                "number of principal components must be positive".into(),
            )),
            PcaSelection::Fixed(k) if k > self.max_components => Err(Error::KTooLarge {
                requested: k,
                max: self.max_components,
                reason: "K must not exceed min(D, M - 1)",
            }),
            PcaSelection::Fixed(k) if k > self.eigenvalues.len() => Err(Error::KTooLarge {
                requested: k,
                max: self.eigenvalues.len(),
                reason: "the data has fewer non-negligible eigenvalues",
            }),
            PcaSelection::Fixed(k) => Ok(k),
            PcaSelection::Retain(rho) if !(rho > 0.0 && rho <= 1.0) => Err(
                Error::InvalidParameters(format!("retained variance fraction {rho} not in (0, 1]")),
            ),
            PcaSelection::Retain(rho) => Ok(self
                .cumulative
                .iter()
                .position(|&f| f >= rho)
                // rounding can leave the last fraction a hair below 1
                .map_or(self.cumulative.len(), |i| i + 1)),
        }
    }

    fn truncate(&self, k: usize) -> PcaModel {
        PcaModel {
            mean: self.mean.clone(),
            projection: self.directions.columns(0, k).into_owned(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            variance_fractions: self.cumulative[..k].to_vec(),
        }
    }
}

/// Flips `u` so that its largest-magnitude entry (first one on ties) is
/// positive.
fn canonical_sign(u: &mut DVector<f64>) {
    let mut pivot = 0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[pivot].abs() {
            pivot = i;
        }
    }
    if u[pivot] < 0.0 {
        u.neg_mut();
    }
}

/// Fits PCA on the enrolment data with the Gram-matrix trick.
pub fn pca_fit(enrolment: &Dataset, selection: PcaSelection) -> Result<PcaModel> {
    let decomposition = GramDecomposition::compute(enrolment)?;
    let k = decomposition.resolve(selection)?;
    Ok(decomposition.truncate(k))
}

/// Fits once and truncates to every requested `K`, in input order.
pub fn pca_sweep(enrolment: &Dataset, k_values: &[usize]) -> Result<Vec<PcaModel>> {
    let decomposition = GramDecomposition::compute(enrolment)?;
    k_values
        .iter()
        .map(|&k| {
            decomposition
                .resolve(PcaSelection::Fixed(k))
                .map(|k| decomposition.truncate(k))
        })
        .collect()
}

/// Largest `K` that a fixed-size fit on this data would accept, capped at
/// `cap`.
pub fn feasible_components(enrolment: &Dataset, cap: usize) -> Result<usize> {
    let decomposition = GramDecomposition::compute(enrolment)?;
    Ok(decomposition.eigenvalues.len().min(cap))
}

pub fn pca_transform(x: &[f64], model: &PcaModel) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    let centered = DVector::from_column_slice(x) - &model.mean;
    Ok(model.projection.tr_mul(&centered).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sparserec_oracle::pca::direct_covariance_pca;

    fn dataset(rows: &[Vec<f64>]) -> Dataset {
        Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, r)| FeatureVector::new(format!("s{i}"), 0, r.clone()))
                .collect(),
        )
        .unwrap()
    }

    fn random_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let model = pca_fit(&dataset(&[vec![1., 1.], vec![-1., -1.]]), PcaSelection::Fixed(1)).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((model.projection[(0, 0)] - s).abs() < 1e-12);
        assert!((model.projection[(1, 0)] - s).abs() < 1e-12);
        assert!((model.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert_eq!(model.variance_fractions, vec![1.0]);
    }

    #[test]
    fn matches_direct_covariance_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = random_rows(&mut rng, 4, 6);
        let model = pca_fit(&dataset(&rows), PcaSelection::Fixed(3)).unwrap();
        let (values, vectors) = direct_covariance_pca(&rows);
        for k in 0..3 {
            let cos: f64 = model
                .projection
                .column(k)
                .iter()
                .zip(&vectors[k])
                .map(|(a, b)| a * b)
                .sum();
            assert!((cos.abs() - 1.0).abs() < 1e-8, "column {k}: {cos}");
            assert!((model.eigenvalues[k] - values[k]).abs() < 1e-8 * values[0]);
        }
    }

    #[test]
    fn rejects_infeasible_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = random_rows(&mut rng, 5, 10);
        let err = pca_fit(&dataset(&rows), PcaSelection::Fixed(5)).unwrap_err();
        assert!(matches!(err, Error::KTooLarge { requested: 5, max: 4, .. }));
        assert!(pca_fit(&dataset(&rows[..1]), PcaSelection::Fixed(1)).is_err());
        let constant = vec![vec![1.0, 2.0]; 3];
        assert_eq!(pca_fit(&dataset(&constant), PcaSelection::Fixed(1)), Err(Error::DegenerateData));
    }

    #[test]
    fn retain_selects_smallest_sufficient_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows = random_rows(&mut rng, 12, 8);
        let full = pca_fit(&dataset(&rows), PcaSelection::Fixed(8)).unwrap();
        let target = full.variance_fractions[2] - 1e-9;
        let retained = pca_fit(&dataset(&rows), PcaSelection::Retain(target)).unwrap();
        assert_eq!(retained.num_components(), 3);
        let all = pca_fit(&dataset(&rows), PcaSelection::Retain(1.0)).unwrap();
        assert_eq!(all.num_components(), 8);
        assert!((all.variance_fractions[7] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = random_rows(&mut rng, 6, 9);
        let model = pca_fit(&dataset(&rows), PcaSelection::Fixed(4)).unwrap();
        let z = model.transform(model.mean.as_slice()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let shifted: Vec<f64> = model
            .mean
            .iter()
            .zip(model.projection.column(0).iter())
            .map(|(m, u)| m + u)
            .collect();
        let z = model.transform(&shifted).unwrap();
        assert!((z[0].abs() - 1.0).abs() < 1e-10);
        assert!(z[1..].iter().all(|v| v.abs() < 1e-10));

        assert!(matches!(model.transform(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn reconstruction_residual_is_energy_outside_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rows = random_rows(&mut rng, 7, 10);
        let model = pca_fit(&dataset(&rows), PcaSelection::Fixed(3)).unwrap();
        let (_, vectors) = direct_covariance_pca(&rows);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let centered: Vec<f64> = x.iter().zip(model.mean.iter()).map(|(a, b)| a - b).collect();
        let z = DVector::from_vec(model.transform(&x).unwrap());
        let recon = &model.projection * z;
        let residual: f64 = centered
            .iter()
            .zip(recon.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // energy of the centered point along directions 4..D of the full
        // eigenbasis
        let outside: f64 = vectors[3..]
            .iter()
            .map(|v| {
                let p: f64 = v.iter().zip(&centered).map(|(a, b)| a * b).sum();
                p * p
            })
            .sum::<f64>()
            .sqrt();
        assert!((residual - outside).abs() < 1e-9);
    }

    #[test]
    fn sweep_truncates_one_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows = random_rows(&mut rng, 30, 12);
        let ds = dataset(&rows);
        let models = pca_sweep(&ds, &[10, 5]).unwrap();
        assert_eq!(models[0].num_components(), 10);
        assert_eq!(models[1].num_components(), 5);
        assert_eq!(models[0].mean, models[1].mean);
        assert_eq!(
            models[0].projection.columns(0, 5).into_owned(),
            models[1].projection
        );
        assert_eq!(models[1], pca_fit(&ds, PcaSelection::Fixed(5)).unwrap());
    }

    #[test]
    fn projected_enrolment_has_diagonal_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let rows = random_rows(&mut rng, 15, 40);
        let model = pca_fit(&dataset(&rows), PcaSelection::Fixed(10)).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| model.transform(r).unwrap()).collect();
        let mut moment = DMatrix::<f64>::zeros(10, 10);
        for p in &z {
            let v = DVector::from_column_slice(p);
            moment += &v * v.transpose();
        }
        let largest = moment.diagonal().max();
        for i in 0..10 {
            assert!((moment[(i, i)] - model.eigenvalues[i]).abs() < 1e-8 * largest);
            for j in 0..10 {
                if i != j {
                    assert!(moment[(i, j)].abs() < 1e-6 * largest);
                }
            }
        }
    }

    #[test]
    fn orthonormal_columns_and_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows = random_rows(&mut rng, 20, 60);
        let model = pca_fit(&dataset(&rows), PcaSelection::Fixed(19)).unwrap();
        let gram = model.projection.tr_mul(&model.projection);
        assert!((gram - DMatrix::identity(19, 19)).amax() < 1e-8);
        for col in model.projection.column_iter() {
            let pivot = col.iamax();
            assert!(col[pivot] > 0.0);
        }
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(model.variance_fractions.windows(2).all(|w| w[0] <= w[1]));
        assert!((model.variance_fractions[18] - 1.0).abs() < 1e-9);
    }
}
