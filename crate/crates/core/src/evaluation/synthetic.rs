use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, FeatureVector};
use crate::error::{Error, Result};

/// Parameters of the union-of-subspaces generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub num_classes: usize,
    /// Enrolment samples per class.
    pub samples_per_class: usize,
    /// Probe samples per class.
    pub probes_per_class: usize,
    pub dim: usize,
    pub subspace_dim: usize,
    /// Standard deviation of the per-entry Gaussian noise.
    pub noise_sigma: f64,
    /// Norm of a direction shared by every class, added to each sample.
    pub shared_offset: f64,
    pub seed: u64,
}

impl SyntheticParams {
    /// Equal-sized enrolment and probe sets and the default shared offset.
    pub fn new(num_classes: usize, samples_per_class: usize, dim: usize, subspace_dim: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            num_classes,
            samples_per_class,
            probes_per_class: samples_per_class,
            dim,
            subspace_dim,
            noise_sigma,
            shared_offset: Self::default_shared_offset(subspace_dim),
            seed,
        }
    }

    /// `3 sqrt(s)`: the shared direction carries about nine times the energy
    /// of the class-specific part, so samples of different classes have
    /// cosine similarity around 0.85.
    pub fn default_shared_offset(subspace_dim: usize) -> f64 {
        3.0 * (subspace_dim as f64).sqrt()
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameters(msg));
        if self.num_classes == 0 || self.samples_per_class == 0 || self.probes_per_class == 0 {
            return fail("class and sample counts must be positive".into());
        }
        if self.subspace_dim == 0 || self.subspace_dim >= self.dim {
            return fail(format!(
                "subspace dimension {} must lie in [1, dim = {})",
                self.subspace_dim, self.dim
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if !(self.shared_offset >= 0.0 && self.shared_offset.is_finite()) {
            return fail(format!("shared offset {} must be finite and >= 0", self.shared_offset));
        }
        Ok(())
    }
}

/// Draws one random `subspace_dim`-dimensional subspace per class and samples
/// `shared + basis * coeffs + sigma * noise` from it, all from a single seeded
/// stream.
///
/// Coefficients are half-normal, so every class occupies a cone inside its
/// subspace. Together with the shared direction this makes samples strongly
/// positively correlated, as non-negative network activations are: classes
/// differ by low-dimensional structure rather than by overall direction.
/// Returns `(enrolment, probes)`, both ordered by class.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<(Dataset, Dataset)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (d, s) = (params.dim, params.subspace_dim);
    let mut enrolment = Vec::with_capacity(params.num_classes * params.samples_per_class);
    let mut probes = Vec::with_capacity(params.num_classes * params.probes_per_class);

    let shared = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize() * params.shared_offset;
    for class in 0..params.num_classes {
        let gaussian = DMatrix::from_fn(d, s, |_, _| rng.sample::<f64, _>(StandardNormal));
        let basis = gaussian.qr().q();
        let draw = |rng: &mut ChaCha8Rng| {
            let coeffs = DVector::from_fn(s, |_, _| rng.sample::<f64, _>(StandardNormal).abs());
            let mut x = &basis * coeffs + &shared;
            for v in x.iter_mut() {
                *v += params.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
            x.as_slice().to_vec()
        };
        for i in 0..params.samples_per_class {
            enrolment.push(FeatureVector::new(format!("c{class}_e{i}"), class, draw(&mut rng)));
        }
        for i in 0..params.probes_per_class {
            probes.push(FeatureVector::new(format!("c{class}_p{i}"), class, draw(&mut rng)));
        }
    }
    Ok((Dataset::new(enrolment)?, Dataset::new(probes)?))
}
