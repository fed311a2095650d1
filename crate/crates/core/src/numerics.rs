//! Dense complex matrices, Hermitian spectra, PSD verdicts and the
//! vectorized Stein-type solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Default relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: ||M - M*|| = {asymmetry:e} exceeds {allowed:e}")]
    NotHermitian { asymmetry: f64, allowed: f64 },
    #[error("matrix is indefinite: minimum eigenvalue {min_eigenvalue:e}")]
    Indefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry encountered")]
    NonFinite,
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Builds a complex matrix from real row-major rows.
pub fn real_matrix(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    CMat::from_fn(n, m, |i, j| r(rows[i][j]))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `tol * max(1, scale)`
pub fn scaled_tol(tol: f64, scale: f64) -> f64 {
    tol * scale.max(1.0)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * r(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: CMat,
}

pub fn hermitian_spectrum(m: &CMat) -> HermitianSpectrum {
    let n = m.nrows();
    if n == 0 {
        return HermitianSpectrum {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    HermitianSpectrum { values, vectors }
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Clone, Debug)]
pub struct HermitianVerdict {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// The threshold actually applied, `tol * max(1, ||M||)`.
    pub tolerance: f64,
    /// Unit eigenvector for the minimum eigenvalue.
    pub witness: Option<CVec>,
}

/// PSD test on `(M + M*)/2`; fails with `NotHermitian` if `M` is not
/// Hermitian within the scaled tolerance.
pub fn psd_check(m: &CMat, tol: f64) -> Result<HermitianVerdict, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if !is_finite(m) {
        return Err(NumericsError::NonFinite);
    }
    let norm = spectral_norm(m);
    let allowed = scaled_tol(tol, norm);
    let asymmetry = spectral_norm(&(m - m.adjoint()));
    if asymmetry > allowed {
        return Err(NumericsError::NotHermitian { asymmetry, allowed });
    }
    if m.nrows() == 0 {
        return Ok(HermitianVerdict {
            is_psd: true,
            min_eigenvalue: 0.0,
            tolerance: allowed,
            witness: None,
        });
    }
    let spec = hermitian_spectrum(m);
    let min_eigenvalue = spec.values[0];
    Ok(HermitianVerdict {
        is_psd: min_eigenvalue >= -allowed,
        min_eigenvalue,
        tolerance: allowed,
        witness: Some(spec.vectors.column(0).into_owned()),
    })
}

/// `S` with `S* S = H`, built from the spectral decomposition. Rows of `S`
/// belonging to negligible eigenvalues are zero.
pub fn hermitian_factor(h: &CMat, tol: f64) -> Result<CMat, NumericsError> {
    let verdict = psd_check(h, tol)?;
    if !verdict.is_psd {
        return Err(NumericsError::Indefinite {
            min_eigenvalue: verdict.min_eigenvalue,
        });
    }
    let spec = hermitian_spectrum(h);
    let n = h.nrows();
    let roots: Vec<f64> = spec.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(CMat::from_fn(n, n, |i, j| {
        spec.vectors[(j, i)].conj() * roots[i]
    }))
}

/// Like [`hermitian_factor`], but keeps only the rows for eigenvalues above
/// the scaled tolerance, so the result is `rank x n` with full row rank.
pub fn hermitian_factor_reduced(h: &CMat, tol: f64) -> Result<CMat, NumericsError> {
    let verdict = psd_check(h, tol)?;
    if !verdict.is_psd {
        return Err(NumericsError::Indefinite {
            min_eigenvalue: verdict.min_eigenvalue,
        });
    }
    let spec = hermitian_spectrum(h);
    let keep: Vec<usize> = (0..spec.values.len())
        .rev()
        .filter(|&i| spec.values[i] > verdict.tolerance)
        .collect();
    let n = h.nrows();
    Ok(CMat::from_fn(keep.len(), n, |row, j| {
        let i = keep[row];
        spec.vectors[(j, i)].conj() * spec.values[i].sqrt()
    }))
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(h: &CMat, tol: f64) -> Result<CMat, NumericsError> {
    let verdict = psd_check(h, tol)?;
    if !verdict.is_psd {
        return Err(NumericsError::Indefinite {
            min_eigenvalue: verdict.min_eigenvalue,
        });
    }
    let spec = hermitian_spectrum(h);
    let n = h.nrows();
    let d = CMat::from_diagonal(&CVec::from_iterator(
        n,
        spec.values.iter().map(|&l| r(l.max(0.0).sqrt())),
    ));
    Ok(&spec.vectors * d * spec.vectors.adjoint())
}

/// Inverse of a Hermitian positive definite matrix via its spectrum.
pub fn hermitian_inverse(h: &CMat) -> Option<CMat> {
    let spec = hermitian_spectrum(h);
    if spec.values.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let n = h.nrows();
    let d = CMat::from_diagonal(&CVec::from_iterator(
        n,
        spec.values.iter().map(|&l| r(1.0 / l)),
    ));
    Some(&spec.vectors * d * spec.vectors.adjoint())
}

/// Numerical rank: singular values above `tol * max(1, sigma_max)`.
pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    let cut = scaled_tol(tol, top);
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis (columns) of the column space, by SVD.
pub fn range_basis(m: &CMat, tol: f64) -> CMat {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = scaled_tol(tol, top);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cut)
        .collect();
    CMat::from_fn(m.nrows(), keep.len(), |i, k| u[(i, keep[k])])
}

/// Orthonormal basis (columns) of the null space.
pub fn null_space_basis(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(n);
    }
    // Pad to at least square so that the full right singular basis is produced.
    let padded = if m.nrows() < n {
        let mut p = zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = scaled_tol(tol, top);
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= cut)
        .collect();
    CMat::from_fn(n, null.len(), |i, k| v_t[(null[k], i)].conj())
}

/// Orthogonal complement (columns) of the column space of `basis` in `C^n`.
pub fn orthogonal_complement(basis: &CMat, n: usize, tol: f64) -> CMat {
    if basis.ncols() == 0 {
        return identity(n);
    }
    null_space_basis(&basis.adjoint(), tol)
}

/// Moore-Penrose pseudo-inverse with a relative singular value cut.
pub fn pseudo_inverse(m: &CMat, tol: f64) -> CMat {
    if m.is_empty() {
        return zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = scaled_tol(tol, top);
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let k = svd.singular_values.len();
    let mut out = zeros(m.ncols(), m.nrows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cut {
            let col = v_t.row(i).adjoint();
            let row = u.column(i).adjoint();
            out += (col * row) * r(1.0 / s);
        }
    }
    out
}

/// `[a b]`
pub fn concat_columns(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    out
}

/// `[a; b]`
pub fn concat_rows(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), 0), (b.nrows(), b.ncols()))
        .copy_from(b);
    out
}

/// A linear map on square matrices of the form `X -> X - sum_k L_k X R_k`.
#[derive(Clone, Debug)]
pub struct SteinOperator {
    pub dim: usize,
    pub terms: Vec<(CMat, CMat)>,
}

impl SteinOperator {
    /// `H -> H - sum_j A_j* H A_j`
    pub fn from_tuple(a: &[CMat]) -> Self {
        let dim = a.first().map(|m| m.nrows()).unwrap_or(0);
        SteinOperator {
            dim,
            terms: a.iter().map(|aj| (aj.adjoint(), aj.clone())).collect(),
        }
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = x.clone();
        for (l, rt) in &self.terms {
            out -= l * x * rt;
        }
        out
    }

    /// Matrix of the map acting on column-major `vec(X)`.
    pub fn vectorized(&self) -> CMat {
        let n = self.dim;
        let mut big = identity(n * n);
        for (l, rt) in &self.terms {
            // vec(L X R) = (R^T kron L) vec(X)
            big -= rt.transpose().kronecker(l);
        }
        big
    }
}

/// Result of a vectorized solve.
#[derive(Clone, Debug)]
pub struct LinearSolveReport {
    /// Least-squares (minimum norm) solution; present when the residual is
    /// within tolerance.
    pub solution: Option<CMat>,
    pub residual: f64,
    pub null_space_dim: usize,
    /// Basis of solutions of the homogeneous equation, each reshaped to a matrix.
    pub null_space: Vec<CMat>,
}

/// Solves `X - sum L_k X R_k = rhs` by vectorization. Singular systems are
/// reported through `null_space_dim`, not as errors.
pub fn solve_sylvester_vectorized(
    op: &SteinOperator,
    rhs: &CMat,
    tol: f64,
) -> Result<LinearSolveReport, NumericsError> {
    let n = op.dim;
    if rhs.nrows() != n || rhs.ncols() != n {
        return Err(NumericsError::Dimension(format!(
            "right-hand side is {}x{}, operator acts on {n}x{n}",
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    for (l, rt) in &op.terms {
        if l.shape() != (n, n) || rt.shape() != (n, n) {
            return Err(NumericsError::Dimension(
                "coefficient matrices must be square".into(),
            ));
        }
    }
    let big = op.vectorized();
    let b = CVec::from_iterator(n * n, rhs.iter().cloned());
    let pinv = pseudo_inverse(&big, 1e-12);
    let x = &pinv * &b;
    let residual_vec = &big * &x - &b;
    let residual = residual_vec.norm();
    let null = null_space_basis(&big, 1e-12);
    let null_space = (0..null.ncols())
        .map(|k| CMat::from_iterator(n, n, null.column(k).iter().cloned()))
        .collect::<Vec<_>>();
    let ok = residual <= scaled_tol(tol, b.norm());
    Ok(LinearSolveReport {
        solution: if ok {
            Some(CMat::from_iterator(n, n, x.iter().cloned()))
        } else {
            None
        },
        residual,
        null_space_dim: null_space.len(),
        null_space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_identity() {
        let v = psd_check(&identity(3), DEFAULT_TOL).unwrap();
        assert!(v.is_psd);
        assert!((v.min_eigenvalue - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_diag_negative_witness() {
        let m = real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let v = psd_check(&m, DEFAULT_TOL).unwrap();
        assert!(!v.is_psd);
        assert!((v.min_eigenvalue + 1.0).abs() < 1e-14);
        let w = v.witness.unwrap();
        assert!(w[0].norm() < 1e-14 && (w[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_stated_reverse_stein_matrix_is_indefinite() {
        let m = real_matrix(&[
            &[7.0 / 8.0, 5.0 / 8.0, 3.0 / 8.0],
            &[5.0 / 8.0, 0.0, 0.25],
            &[3.0 / 8.0, 0.25, 0.0],
        ]);
        assert!(!psd_check(&m, DEFAULT_TOL).unwrap().is_psd);
    }

    #[test]
    fn psd_rejects_non_hermitian() {
        let m = real_matrix(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(
            psd_check(&m, DEFAULT_TOL),
            Err(NumericsError::NotHermitian { .. })
        ));
    }

    #[test]
    fn factor_examples() {
        let s = hermitian_factor(&identity(3), DEFAULT_TOL).unwrap();
        assert!((s.adjoint() * &s - identity(3)).norm() < 1e-14);
        let h = real_matrix(&[&[4.0, 0.0], &[0.0, 9.0]]);
        let s = hermitian_factor(&h, DEFAULT_TOL).unwrap();
        assert!((s.adjoint() * &s - &h).norm() < 1e-12);
        let mut sv = singular_values(&s);
        sv.sort_by(f64::total_cmp);
        assert!((sv[0] - 2.0).abs() < 1e-12 && (sv[1] - 3.0).abs() < 1e-12);
        let bad = real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(
            hermitian_factor(&bad, DEFAULT_TOL),
            Err(NumericsError::Indefinite { .. })
        ));
    }

    #[test]
    fn sylvester_examples() {
        let op = SteinOperator::from_tuple(&[real_matrix(&[&[0.5]])]);
        let rep = solve_sylvester_vectorized(&op, &real_matrix(&[&[1.0]]), DEFAULT_TOL).unwrap();
        assert!((rep.solution.unwrap()[(0, 0)].re - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(rep.null_space_dim, 0);

        let op = SteinOperator::from_tuple(&[zeros(2, 2), zeros(2, 2)]);
        let rhs = real_matrix(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let rep = solve_sylvester_vectorized(&op, &rhs, DEFAULT_TOL).unwrap();
        assert!((rep.solution.unwrap() - rhs).norm() < 1e-14);

        let op = SteinOperator::from_tuple(&[identity(1)]);
        let rep = solve_sylvester_vectorized(&op, &zeros(1, 1), DEFAULT_TOL).unwrap();
        assert_eq!(rep.null_space_dim, 1);
    }

    #[test]
    fn null_space_and_range() {
        let m = real_matrix(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 0.0]]);
        let n = null_space_basis(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-12);
        assert_eq!(range_basis(&m, 1e-12).ncols(), 1);
        assert_eq!(numerical_rank(&m, 1e-12), 1);
    }
}
