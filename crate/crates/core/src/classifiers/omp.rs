use nalgebra::{DMatrix, DVector};

use crate::data::Dictionary;
use crate::error::{Error, Result};

/// Selection stops once no unused atom correlates with the residual by more
/// than this fraction of `||y||`.
pub const CORRELATION_FLOOR: f64 = 1e-12;

/// Output of [`omp_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Length-`N` code with nonzeros only on `support`.
    pub coefficients: DVector<f64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    /// `||residual||_2` before the first and after every selection.
    pub residual_norms: Vec<f64>,
}

impl SparseCode {
    pub fn residual_norm(&self) -> f64 {
        *self.residual_norms.last().unwrap_or(&0.0)
    }
}

/// Orthogonal matching pursuit: greedily add the atom most correlated with the
/// residual, refit least squares on the active set, and stop at `k` atoms or
/// when the residual norm drops to `tol`.
pub fn omp_solve(y: &DVector<f64>, dict: &Dictionary, k: usize, tol: f64) -> Result<SparseCode> {
    let atoms = dict.atoms();
    if y.len() != atoms.nrows() {
        return Err(Error::DimensionMismatch {
            expected: atoms.nrows(),
            found: y.len(),
        });
    }
    let n = atoms.ncols();
    let mut coefficients = DVector::zeros(n);
    let mut support = Vec::with_capacity(k.min(n));
    let mut selected = vec![false; n];
    let mut residual = y.clone();
    let y_norm = y.norm();
    let mut residual_norms = vec![y_norm];
    if y_norm == 0.0 {
        return Ok(SparseCode {
            coefficients,
            support,
            residual_norms,
        });
    }

    while support.len() < k.min(n) && residual.norm() > tol {
        let correlations = atoms.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in correlations.iter().enumerate() {
            if !selected[j] && best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        let Some((j, corr)) = best else { break };
        if corr <= CORRELATION_FLOOR * y_norm {
            break;
        }
        support.push(j);
        let Some(active) = least_squares(atoms, &support, y) else {
            support.pop();
            break;
        };
        selected[j] = true;
        coefficients.fill(0.0);
        residual.copy_from(y);
        for (&col, &c) in support.iter().zip(active.iter()) {
            coefficients[col] = c;
            residual.axpy(-c, &atoms.column(col), 1.0);
        }
        residual_norms.push(residual.norm());
    }

    Ok(SparseCode {
        coefficients,
        support,
        residual_norms,
    })
}

/// Least squares on the columns in `support` via thin QR. `None` when the
/// selected columns are numerically dependent.
fn least_squares(atoms: &DMatrix<f64>, support: &[usize], y: &DVector<f64>) -> Option<DVector<f64>> {
    if support.len() > atoms.nrows() {
        return None;
    }
    let sub = atoms.select_columns(support);
    let qr = sub.qr();
    let r = qr.r();
    let largest = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * largest) {
        return None;
    }
    let qty = qr.q().tr_mul(y);
    r.solve_upper_triangular(&qty)
}
