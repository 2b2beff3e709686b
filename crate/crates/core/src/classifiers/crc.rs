use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::Dictionary;
use crate::error::{Error, Result};

/// Smallest acceptable pivot of the Cholesky factor, squared, relative to the
/// largest diagonal entry of the regularized Gram matrix.
const PIVOT_FLOOR: f64 = 1e-13;

/// Ridge solver for one dictionary: `(Phi^T Phi + lambda I)^{-1} Phi^T y`.
///
/// The regularized Gram matrix is factorized once at construction and reused
/// for every probe.
#[derive(Debug, Clone)]
pub struct CrcOperator {
    atoms: DMatrix<f64>,
    system: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    lambda: f64,
}

impl CrcOperator {
    pub fn new(dict: &Dictionary, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        let atoms = dict.atoms().clone();
        let mut system = atoms.tr_mul(&atoms);
        for i in 0..system.nrows() {
            system[(i, i)] += lambda;
        }
        let factor = Cholesky::new(system.clone()).ok_or(Error::SingularSystem { lambda })?;
        let largest = system.diagonal().max();
        let l = factor.l_dirty();
        let smallest_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if smallest_pivot <= PIVOT_FLOOR * largest {
            return Err(Error::SingularSystem { lambda });
        }
        Ok(Self {
            atoms,
            system,
            factor,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// The regularized Gram matrix `Phi^T Phi + lambda I`.
    pub fn system(&self) -> &DMatrix<f64> {
        &self.system
    }

    pub fn apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let rhs = self.atoms.tr_mul(y);
        let mut alpha = self.factor.solve(&rhs);
        // one step of iterative refinement
        let correction = self.factor.solve(&(&rhs - &self.system * &alpha));
        alpha += correction;
        Ok(alpha)
    }
}

/// Dense collaborative code of `y` over the operator's dictionary.
pub fn crc_solve(y: &DVector<f64>, op: &CrcOperator) -> Result<DVector<f64>> {
    op.apply(y)
}
