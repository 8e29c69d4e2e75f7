//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::{CovarianceMatrix, EigenSpectrum, PcaError};
use crate::linalg::Matrix;

pub const MAX_SWEEPS: usize = 100;
/// Off-diagonal magnitude, relative to the Frobenius norm, at which the
/// matrix counts as diagonal.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Allowed asymmetry, relative to `max(‖S‖_F, 1)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn max_off_diagonal(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            m = m.max(a[(p, q)].abs());
        }
    }
    m
}

/// Eigendecomposition of a covariance matrix.
pub fn eigen_symmetric(s: &CovarianceMatrix) -> Result<EigenSpectrum, PcaError> {
    eigen_symmetric_matrix(&s.values)
}

/// Eigendecomposition of any symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenpairs come back sorted by descending eigenvalue with a stable sort,
/// so equal eigenvalues keep the order the rotations left them in. Each
/// eigenvector is then flipped so that its largest-magnitude entry (first
/// one on ties) is positive.
pub fn eigen_symmetric_matrix(s: &Matrix) -> Result<EigenSpectrum, PcaError> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(PcaError::NotSquare { rows: n, cols: s.ncols() });
    }
    if !s.is_finite() {
        return Err(PcaError::NonFinite);
    }
    let norm = s.frobenius_norm();
    let sym_tol = SYMMETRY_TOL * norm.max(1.0);
    for p in 0..n {
        for q in p + 1..n {
            let gap = (s[(p, q)] - s[(q, p)]).abs();
            if gap > sym_tol {
                return Err(PcaError::NotSymmetric { row: p, col: q, gap });
            }
        }
    }

    // work on the exactly symmetrized copy
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = Matrix::identity(n);
    let threshold = OFF_DIAGONAL_TOL * norm;
    let mut sweeps = 0;
    while max_off_diagonal(&a) > threshold {
        if sweeps == MAX_SWEEPS {
            return Err(PcaError::NoConvergence {
                sweeps,
                residual: max_off_diagonal(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep rotation output order
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = v.select_columns(&order);
    for c in 0..n {
        let col = eigenvectors.column(c);
        let lead = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if col[lead] < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|x| -x).collect();
            eigenvectors.set_column(c, &flipped);
        }
    }
    Ok(EigenSpectrum {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// One Jacobi rotation annihilating `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.nrows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let (arp, arq) = (a[(r, p)], a[(r, q)]);
        let new_p = c * arp - s * arq;
        let new_q = s * arp + c * arq;
        a[(r, p)] = new_p;
        a[(p, r)] = new_p;
        a[(r, q)] = new_q;
        a[(q, r)] = new_q;
    }
    for r in 0..n {
        let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}
