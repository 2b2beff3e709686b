//! Slow, straight-line reference computations for tests.
//!
//! Nothing here is shared with the `sparserec` implementation paths: matrices
//! are plain nested `Vec`s, linear systems go through Gaussian elimination,
//! and sparse codes are found by enumerating supports. The one exception is
//! [`pca::direct_covariance_pca`], which decomposes the full `D x D` scatter
//! matrix with nalgebra (the implementation never forms that matrix).

/// Row-major dense matrix.
pub type Mat = Vec<Vec<f64>>;

pub mod stats {
    /// Two-pass mean and population variance.
    pub fn mean_and_population_variance(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }
}

pub mod linalg {
    use super::Mat;

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    /// Column `j` of a row-major matrix.
    pub fn column(a: &Mat, j: usize) -> Vec<f64> {
        a.iter().map(|row| row[j]).collect()
    }

    /// `a * x`.
    pub fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    /// `a^T * y`.
    pub fn mat_t_vec(a: &Mat, y: &[f64]) -> Vec<f64> {
        let cols = a.first().map_or(0, |r| r.len());
        (0..cols)
            .map(|j| a.iter().zip(y).map(|(row, yi)| row[j] * yi).sum())
            .collect()
    }

    /// Solves `a x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot is numerically zero.
    pub fn gauss_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
        let n = b.len();
        let mut m: Mat = a.clone();
        let mut rhs = b.to_vec();
        let scale = a
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
            if m[pivot][col].abs() <= 1e-13 * scale {
                return None;
            }
            m.swap(col, pivot);
            rhs.swap(col, pivot);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
            x[row] = (rhs[row] - s) / m[row][row];
        }
        Some(x)
    }

    /// Ridge solution `(A^T A + lambda I)^{-1} A^T y` via explicit normal
    /// equations.
    pub fn ridge(a: &Mat, y: &[f64], lambda: f64) -> Option<Vec<f64>> {
        let n = a.first().map_or(0, |r| r.len());
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = a.iter().map(|row| row[i] * row[j]).sum();
            }
            g[i][i] += lambda;
        }
        gauss_solve(&g, &mat_t_vec(a, y))
    }

    /// Least squares restricted to the columns in `support`; returns the
    /// coefficients (in support order) and the residual vector.
    pub fn restricted_lstsq(a: &Mat, y: &[f64], support: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        let sub: Mat = a
            .iter()
            .map(|row| support.iter().map(|&j| row[j]).collect())
            .collect();
        let coef = ridge(&sub, y, 0.0)?;
        let fit = mat_vec(&sub, &coef);
        let residual = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        Some((coef, residual))
    }
}

pub mod sparse {
    use super::linalg::{dot, norm, restricted_lstsq};
    use super::Mat;

    /// Best residual over all supports of size at most `k`.
    #[derive(Debug, Clone)]
    pub struct Exhaustive {
        pub support: Vec<usize>,
        pub coefficients: Vec<f64>,
        pub residual_norm: f64,
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut current, &mut out);
        out
    }

    /// Enumerates every support of size `1..=k` and keeps the smallest
    /// least-squares residual. Singular supports are skipped.
    pub fn exhaustive_l0(a: &Mat, y: &[f64], k: usize) -> Exhaustive {
        let n = a.first().map_or(0, |r| r.len());
        let mut best = Exhaustive {
            support: vec![],
            coefficients: vec![],
            residual_norm: norm(y),
        };
        for size in 1..=k.min(n) {
            for support in combinations(n, size) {
                if let Some((coef, r)) = restricted_lstsq(a, y, &support) {
                    let rn = norm(&r);
                    if rn < best.residual_norm - 1e-15 {
                        best = Exhaustive {
                            support,
                            coefficients: coef,
                            residual_norm: rn,
                        };
                    }
                }
            }
        }
        best
    }

    /// Straight-line orthogonal matching pursuit. Returns the dense code and
    /// the selected support in selection order.
    pub fn reference_omp(a: &Mat, y: &[f64], k: usize, tol: f64) -> (Vec<f64>, Vec<usize>) {
        let n = a.first().map_or(0, |r| r.len());
        let mut code = vec![0.0; n];
        let mut support: Vec<usize> = Vec::new();
        let mut residual = y.to_vec();
        let y_norm = norm(y);
        if y_norm == 0.0 {
            return (code, support);
        }
        while support.len() < k && norm(&residual) > tol {
            let mut best_j = usize::MAX;
            let mut best_c = -1.0;
            for j in 0..n {
                if support.contains(&j) {
                    continue;
                }
                let col: Vec<f64> = a.iter().map(|row| row[j]).collect();
                let c = dot(&col, &residual).abs();
                if c > best_c {
                    best_c = c;
                    best_j = j;
                }
            }
            if best_j == usize::MAX || best_c <= 1e-12 * y_norm {
                break;
            }
            support.push(best_j);
            match restricted_lstsq(a, y, &support) {
                Some((coef, r)) => {
                    code = vec![0.0; n];
                    for (&j, c) in support.iter().zip(&coef) {
                        code[j] = *c;
                    }
                    residual = r;
                }
                None => {
                    support.pop();
                    break;
                }
            }
        }
        (code, support)
    }
}

pub mod classify {
    use super::linalg::{column, mat_vec, norm, ridge};
    use super::sparse::reference_omp;
    use super::Mat;

    #[derive(Debug, Clone)]
    pub struct ReferenceResult {
        pub alpha_collab: Vec<f64>,
        pub alpha_sparse: Vec<f64>,
        pub alpha_aug: Vec<f64>,
        pub q: Vec<f64>,
        pub predicted: usize,
    }

    /// SA-CRC written out step by step: normalize the probe, ridge code,
    /// OMP code, normalized sum, label-matrix scores, first maximum.
    pub fn reference_sacrc(
        atoms: &Mat,
        labels: &[usize],
        num_classes: usize,
        y: &[f64],
        lambda: f64,
        k: usize,
        tol: f64,
    ) -> Option<ReferenceResult> {
        let yn = norm(y);
        let y: Vec<f64> = y.iter().map(|v| v / yn).collect();
        let alpha_collab = ridge(atoms, &y, lambda)?;
        let (alpha_sparse, _) = reference_omp(atoms, &y, k, tol);
        let sum: Vec<f64> = alpha_collab
            .iter()
            .zip(&alpha_sparse)
            .map(|(a, b)| a + b)
            .collect();
        let sn = norm(&sum);
        let alpha_aug: Vec<f64> = if sn < 1e-12 {
            let cn = norm(&alpha_collab);
            alpha_collab.iter().map(|v| v / cn).collect()
        } else {
            sum.iter().map(|v| v / sn).collect()
        };
        let mut l = vec![vec![0.0; labels.len()]; num_classes];
        for (j, &c) in labels.iter().enumerate() {
            l[c][j] = 1.0;
        }
        let q = mat_vec(&l, &alpha_aug);
        let mut predicted = 0;
        for i in 1..num_classes {
            if q[i] > q[predicted] {
                predicted = i;
            }
        }
        Some(ReferenceResult {
            alpha_collab,
            alpha_sparse,
            alpha_aug,
            q,
            predicted,
        })
    }

    /// Class-specific reconstruction residuals `||y - A delta_i(alpha)||`.
    pub fn class_residuals(atoms: &Mat, labels: &[usize], num_classes: usize, y: &[f64], alpha: &[f64]) -> Vec<f64> {
        (0..num_classes)
            .map(|class| {
                let mut r = y.to_vec();
                for (j, &c) in labels.iter().enumerate() {
                    if c == class {
                        let col = column(atoms, j);
                        for (ri, ci) in r.iter_mut().zip(&col) {
                            *ri -= alpha[j] * ci;
                        }
                    }
                }
                norm(&r)
            })
            .collect()
    }

    /// Index of the nearest sample by a full Euclidean scan, first wins.
    pub fn nearest(samples: &[Vec<f64>], y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in samples.iter().enumerate() {
            let d: f64 = s.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

pub mod metrics {
    /// `(threshold, far, gmr)` recounted from scratch at every threshold in
    /// `-inf, sorted unique scores, +inf`. Scores `>= t` are accepted.
    pub fn brute_force_roc(genuine: &[f64], impostor: &[f64]) -> Vec<(f64, f64, f64)> {
        let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thresholds.dedup();
        thresholds.insert(0, f64::NEG_INFINITY);
        thresholds.push(f64::INFINITY);
        thresholds
            .into_iter()
            .map(|t| {
                let fa = impostor.iter().filter(|&&s| s >= t).count();
                let ga = genuine.iter().filter(|&&s| s >= t).count();
                (t, fa as f64 / impostor.len() as f64, ga as f64 / genuine.len() as f64)
            })
            .collect()
    }

    /// EER by scanning the brute-force ROC for the FMR/FNMR crossing.
    pub fn brute_force_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
        let roc = brute_force_roc(genuine, impostor);
        for w in roc.windows(2) {
            let (_, f0, g0) = w[0];
            let (_, f1, g1) = w[1];
            let d0 = f0 - (1.0 - g0);
            let d1 = f1 - (1.0 - g1);
            if d0 == 0.0 {
                return f0;
            }
            if d0 > 0.0 && d1 < 0.0 {
                let t = d0 / (d0 - d1);
                return f0 + t * (f1 - f0);
            }
        }
        let (_, f, g) = *roc.last().unwrap();
        (f + 1.0 - g) / 2.0
    }

    /// GMR at the lowest observed threshold whose FAR is within `target`,
    /// or at the highest observed score when none is.
    pub fn brute_force_gmr_at_far(genuine: &[f64], impostor: &[f64], target: f64) -> f64 {
        let roc = brute_force_roc(genuine, impostor);
        let observed = &roc[1..roc.len() - 1];
        observed
            .iter()
            .find(|(_, far, _)| *far <= target)
            .or(observed.last())
            .map(|&(_, _, gmr)| gmr)
            .unwrap()
    }
}

pub mod pca {
    use nalgebra::{DMatrix, SymmetricEigen};

    /// Eigenpairs of the full `D x D` scatter matrix of centered data,
    /// sorted by decreasing eigenvalue. `samples` are the data points.
    pub fn direct_covariance_pca(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = samples.len();
        let d = samples[0].len();
        let mut mean = vec![0.0; d];
        for s in samples {
            for (a, v) in mean.iter_mut().zip(s) {
                *a += v / m as f64;
            }
        }
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        for s in samples {
            let c: Vec<f64> = s.iter().zip(&mean).map(|(a, b)| a - b).collect();
            for i in 0..d {
                for j in 0..d {
                    scatter[(i, j)] += c[i] * c[j];
                }
            }
        }
        let eig = SymmetricEigen::new(scatter);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (values, vectors)
    }
}
