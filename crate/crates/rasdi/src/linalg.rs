//! Thin helpers over nalgebra's dense factorizations.

use nalgebra::{Complex, DMatrix, DVector, Dyn, LU};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Relative singular value cutoff for minimum-norm least squares.
pub const SVD_TOL: f64 = 1e-12;

/// Max-row-sum norm.
pub fn norm_inf_mat(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// LU factorization with partial pivoting that refuses near-singular input.
#[derive(Clone, Debug)]
pub struct Lu {
    inner: LU<f64, Dyn, Dyn>,
    dim: usize,
}

impl Lu {
    /// Returns `None` when some pivot is below `PIVOT_TOL * ||m||_inf`.
    pub fn new(m: &DMatrix<f64>) -> Option<Lu> {
        assert!(m.is_square(), "LU of a non-square matrix");
        let dim = m.nrows();
        if dim == 0 {
            return Some(Lu {
                inner: m.clone().lu(),
                dim,
            });
        }
        let scale = norm_inf_mat(m);
        let inner = m.clone().lu();
        let u = inner.u();
        let tiny = PIVOT_TOL * scale;
        if scale == 0.0 || u.diagonal().iter().any(|p| p.abs() <= tiny) {
            return None;
        }
        Some(Lu { inner, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        if self.dim == 0 {
            return DVector::zeros(0);
        }
        self.inner.solve(b).expect("pivots were checked at factorization")
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if self.dim == 0 {
            return DMatrix::zeros(0, b.ncols());
        }
        self.inner.solve(b).expect("pivots were checked at factorization")
    }
}

/// Moore-Penrose pseudo-inverse via SVD with a relative cutoff. Returns the
/// pseudo-inverse and the numerical rank.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cut && **s > 0.0).count();
    if rank == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let pinv = svd
        .pseudo_inverse(cut.max(f64::MIN_POSITIVE))
        .expect("both factors were computed");
    (pinv, rank)
}

/// Numerical rank with the same cutoff rule as `pinv`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > rel_tol * smax && **s > 0.0).count()
}

/// Eigenvalues of a general real matrix, sorted by decreasing modulus.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev = schur_eigenvalues(m);
    ev.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

/// Iteration cap for one Schur attempt; nalgebra's default is unbounded and
/// stalls on some matrices with exact zero patterns.
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues from a bounded Schur iteration. A stalled attempt is retried
/// on the transpose and then on shifted copies `m + s I`, which change the
/// iteration path but not the spectrum beyond the shift.
fn schur_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    let scale = norm_inf_mat(m).max(f64::MIN_POSITIVE);
    let attempts = [(false, 0.0), (true, 0.0), (false, 0.37 * scale), (true, -0.61 * scale)];
    for (transpose, shift) in attempts {
        let mut a = if transpose { m.transpose() } else { m.clone() };
        for i in 0..n {
            a[(i, i)] += shift;
        }
        if let Some(schur) = a.try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
            return schur.complex_eigenvalues().iter().map(|l| l - shift).collect();
        }
    }
    log::warn!("eigenvalue iteration did not converge for a {n}x{n} matrix");
    vec![Complex::new(f64::NAN, f64::NAN); n]
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).first().map(|l| l.norm()).unwrap_or(0.0)
}

/// Dense matrix from a row-major nested slice; handy in tests and presets.
pub fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_rejects_singular() {
        let m = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(Lu::new(&m).is_none());
        let m = mat(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let lu = Lu::new(&m).unwrap();
        let x = lu.solve(&DVector::from_vec(vec![5.0, 5.0]));
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_rank_deficient() {
        let m = mat(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let (p, r) = pinv(&m, SVD_TOL);
        assert_eq!(r, 1);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn rotation_eigenvalues() {
        let m = mat(&[&[0.0, -2.0], &[2.0, 0.0]]);
        let ev = eigenvalues(&m);
        assert!((ev[0].im - 2.0).abs() < 1e-14);
        assert!((ev[1].im + 2.0).abs() < 1e-14);
        assert!((spectral_radius(&m) - 2.0).abs() < 1e-14);
    }
}
