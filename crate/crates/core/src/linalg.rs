//! Small dense helpers shared by the analysis modules.

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};

/// Singular values below `RANK_RTOL * σ_max` are treated as zero.
pub const RANK_RTOL: f64 = 1e-9;

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= RANK_RTOL * max).count()
}

/// Smallest eigenvalue of a symmetric matrix (symmetrised before decomposition).
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric eigen-decomposition wrapper returning `(eigenvalues, eigenvectors)`.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig: SymmetricEigen<f64, Dyn> = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank threshold.
///
/// Full-rank inputs go through LU or Householder QR, which is markedly more accurate
/// than the SVD path on matrices with small but significant entries.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let r = rank(m);
    if r == m.ncols() && r == m.nrows() {
        if let Some(inv) = m.clone().lu().try_inverse() {
            return inv;
        }
    }
    if r == m.ncols() {
        let qr = m.clone().qr();
        if let Some(x) = qr.r().solve_upper_triangular(&qr.q().transpose()) {
            return x;
        }
    } else if r == m.nrows() {
        return pinv(&m.transpose()).transpose();
    }
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = RANK_RTOL * max;
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// Column-major flattening of a matrix into a vector.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn mat_of(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_respects_relative_threshold() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert_eq!(rank(&m), 1);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-6]);
        assert_eq!(rank(&m), 2);
        assert_eq!(rank(&DMatrix::<f64>::zeros(3, 2)), 0);
    }

    #[test]
    fn pinv_of_full_column_rank_is_left_inverse() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 1.0, 0.0]);
        let p = pinv(&m);
        let id = &p * &m;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
