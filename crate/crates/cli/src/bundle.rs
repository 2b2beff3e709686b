//! The fitted model on disk: optional PCA, the dictionary and the
//! classifier hyperparameters.
//!
//! ```text
//! magic    b"CSRM"
//! version  u32 = 1
//! pca      u8 flag; when 1: u32 D, u32 K, mean (D f64), eigenvalues (K f64),
//!          cumulative variance fractions (K f64), projection (D x K f64, column-major)
//! dict     u32 K, u32 N, u32 c, atoms (K x N f64, column-major), labels (N u32)
//! config   f64 lambda, u32 sparsity_k, f64 residual_tol
//! ```
//!
//! All values little-endian. The ridge factorization is rebuilt on load; it
//! is a deterministic function of the stored atoms and lambda.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sparserec::{Dictionary, PcaModel, Recognizer, SacrcConfig};

use crate::error::{CliError, CliResult};
use crate::formats::{FormatError, Reader};

pub const MODEL_MAGIC: [u8; 4] = *b"CSRM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub pca: Option<PcaModel>,
    pub dictionary: Dictionary,
    pub config: SacrcConfig,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), FormatError> {
    let v = u32::try_from(v).map_err(|_| FormatError::InvalidDimensions(format!("{v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn invalid(e: sparserec::Error) -> FormatError {
    FormatError::InvalidDimensions(e.to_string())
}

impl ModelBundle {
    /// Feature dimension a probe must have.
    pub fn input_dim(&self) -> usize {
        self.pca.as_ref().map_or(self.dictionary.dim(), PcaModel::input_dim)
    }

    pub fn components(&self) -> Option<usize> {
        self.pca.as_ref().map(PcaModel::num_components)
    }

    pub fn recognizer(&self, cfg: SacrcConfig) -> sparserec::Result<Recognizer> {
        Recognizer::new(self.dictionary.clone(), cfg)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        match &self.pca {
            None => out.push(0),
            Some(p) => {
                out.push(1);
                put_u32(&mut out, p.input_dim())?;
                put_u32(&mut out, p.num_components())?;
                put_f64s(&mut out, p.mean.iter());
                put_f64s(&mut out, &p.eigenvalues);
                put_f64s(&mut out, &p.variance_fractions);
                put_f64s(&mut out, p.projection.iter());
            }
        }
        let d = &self.dictionary;
        put_u32(&mut out, d.dim())?;
        put_u32(&mut out, d.num_atoms())?;
        put_u32(&mut out, d.num_classes())?;
        put_f64s(&mut out, d.atoms().iter());
        for &l in d.column_labels() {
            put_u32(&mut out, l)?;
        }
        out.extend_from_slice(&self.config.lambda.to_le_bytes());
        put_u32(&mut out, self.config.sparsity_k)?;
        out.extend_from_slice(&self.config.residual_tol.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.header(&MODEL_MAGIC, MODEL_VERSION)?;
        let pca = match r.take(1, "pca flag")?[0] {
            0 => None,
            1 => {
                let dim = r.u32("pca header")? as usize;
                let k = r.u32("pca header")? as usize;
                let mean = r.f64s(dim, "pca mean")?;
                let eigenvalues = r.f64s(k, "pca eigenvalues")?;
                let variance_fractions = r.f64s(k, "pca variance fractions")?;
                let projection = r.f64s(dim.saturating_mul(k), "pca projection")?;
                Some(PcaModel {
                    mean: DVector::from_vec(mean),
                    projection: DMatrix::from_vec(dim, k, projection),
                    eigenvalues,
                    variance_fractions,
                })
            }
            other => return Err(FormatError::InvalidFlag(other)),
        };
        let k = r.u32("dictionary header")? as usize;
        let n = r.u32("dictionary header")? as usize;
        let c = r.u32("dictionary header")? as usize;
        let atoms = r.f64s(k.saturating_mul(n), "dictionary atoms")?;
        let mut labels = Vec::with_capacity(n.min(r.remaining() / 4));
        for _ in 0..n {
            labels.push(r.u32("dictionary labels")? as usize);
        }
        let lambda = f64::from_le_bytes(r.take(8, "config")?.try_into().unwrap());
        let sparsity_k = r.u32("config")? as usize;
        let residual_tol = f64::from_le_bytes(r.take(8, "config")?.try_into().unwrap());
        r.finish()?;

        if let Some(p) = &pca {
            if p.num_components() != k {
                return Err(FormatError::InvalidDimensions(format!(
                    "pca has {} components but the dictionary dimension is {k}",
                    p.num_components()
                )));
            }
        }
        let dictionary = Dictionary::from_parts(DMatrix::from_vec(k, n, atoms), labels, c).map_err(invalid)?;
        let config = SacrcConfig {
            lambda,
            sparsity_k,
            residual_tol,
        };
        config.validate(n).map_err(invalid)?;
        Ok(Self {
            pca,
            dictionary,
            config,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| CliError::format(path, e))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let bytes = self.to_bytes().map_err(|e| CliError::format(path, e))?;
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }
}
