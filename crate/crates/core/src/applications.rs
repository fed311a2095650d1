//! Row-shift dilations, the Poisson transform, von Neumann inequality
//! probes and Beurling-Lax representations on truncated spaces.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::combinatorics::{
    enumerate_words_up_to, multi_indices_up_to, transpose, words_up_to, CombinatoricsError,
    MultiIndex, Word,
};
use crate::numerics::{
    hermitian_factor_reduced, hermitian_inverse, hermitian_spectrum, identity, numerical_rank,
    psd_check, psd_sqrt, r, range_basis, scaled_tol, spectral_norm, zeros, CMat, CVec,
    NumericsError,
};
use crate::spaces::{
    ab_obs_poly, arveson_backshift, nc_obs_poly, right_backshift, BallPoly, FockPoly, SpacesError,
};
use crate::stein::{
    abelian_rows, arveson_weight, cp_apply, strong_stability, StabilityVerdict, DEFAULT_MAX_LEVEL,
};
use crate::systems::{
    is_commutative, tuple_power_multi, tuple_power_word, Mode, OutputPair, SystemsError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplicationsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tuple is not a strict row contraction (||sum T_j T_j*|| = {rho})")]
    NotStrict { rho: f64 },
    #[error("truncated observability gramian is singular; the tuple has no defect to dilate with")]
    SingularGramian,
    #[error("operator needs depth {depth}, above the explicit limit {limit}")]
    TooDeep { depth: usize, limit: usize },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
}

/// Depth of the explicit Fock-coordinate checks inside [`dilate`].
pub const EXPLICIT_DEPTH: usize = 4;

/// `sum_j T_j T_j*`
pub fn row_gram(t: &[CMat]) -> CMat {
    let m = t[0].nrows();
    t.iter()
        .fold(zeros(m, m), |acc, tj| acc + tj * tj.adjoint())
}

/// The pair `(D_{T*}, T*)` with `D_{T*} = (I - sum T_j T_j*)^{1/2}`.
pub fn defect_pair(t: &[CMat], tol: f64) -> Result<OutputPair, ApplicationsError> {
    let m = t[0].nrows();
    let defect = psd_sqrt(&(identity(m) - row_gram(t)), tol)?;
    Ok(OutputPair::new(
        defect,
        t.iter().map(|tj| tj.adjoint()).collect(),
    )?)
}

/// Level terms of the gramian of `(D_{T*}, T*)` through level `n`, word or
/// abelianized weighting. Entry `k` is the partial sum through level `k`.
fn partial_gramians(pair: &OutputPair, mode: Mode, n: usize) -> Vec<CMat> {
    let m = pair.state_dim();
    let mut sums = Vec::with_capacity(n + 1);
    let mut total = zeros(m, m);
    match mode {
        Mode::Nc => {
            let mut level = pair.c.adjoint() * &pair.c;
            for k in 0..=n {
                if k > 0 {
                    level = cp_apply(&pair.a, &level);
                }
                total += &level;
                sums.push(total.clone());
            }
        }
        Mode::Commutative => {
            let rows = abelian_rows(pair, n);
            let mut k = 0;
            for (idx, row) in rows {
                while idx.total() > k {
                    sums.push(total.clone());
                    k += 1;
                }
                total += row.adjoint() * &row * r(arveson_weight(&idx));
            }
            sums.push(total);
        }
    }
    sums
}

#[derive(Clone, Debug)]
pub struct DilationReport {
    pub mode: Mode,
    pub truncation: usize,
    /// `D_{T*}`
    pub defect: CMat,
    pub coefficient_space_dim: usize,
    pub row_contraction: bool,
    /// `Some` in commutative mode.
    pub commuting: Option<bool>,
    pub adjoint_stability: StabilityVerdict,
    /// `||sum T_j T_j*||`
    pub rho: f64,
    /// Gramian of `(D_{T*}, T*)` summed through the truncation.
    pub gramian: CMat,
    /// `||G_N - I||`
    pub obs_isometry_residual: f64,
    /// `rho^{N+1}`
    pub tail_bound: f64,
    /// Floating-point allowance for summing `N + 1` levels.
    pub rounding_allowance: f64,
    /// Largest coefficient of `(S_j)* Ô x - Ô T_j* x` on the explicit depth.
    pub intertwining_residual: f64,
    /// Per `j`: `||G^{-1/2} T_j G_{N-1} G^{-1/2} - T_j||`, the compression of
    /// the shift to `Ran Ô` in orthonormal coordinates against `T_j`.
    pub compression_residuals: Vec<f64>,
    /// Mismatch between the compression formula and explicit shift matrices
    /// on Fock or Arveson coordinates of the explicit depth.
    pub explicit_compression_check: f64,
}

impl DilationReport {
    pub fn isometric_within_tail(&self) -> bool {
        self.obs_isometry_residual <= self.tail_bound + self.rounding_allowance
    }
}

/// Dilation data of a row contraction through the pair `(D_{T*}, T*)`.
pub fn dilate(
    t: &[CMat],
    mode: Mode,
    truncation: usize,
    tol: f64,
) -> Result<DilationReport, ApplicationsError> {
    let m = t
        .first()
        .ok_or_else(|| ApplicationsError::Dimension("empty tuple".into()))?
        .nrows();
    if t.iter().any(|tj| tj.shape() != (m, m)) {
        return Err(ApplicationsError::Dimension(
            "operators must be square of equal size".into(),
        ));
    }
    let gram = row_gram(t);
    let rho = spectral_norm(&gram);
    let row_contraction = psd_check(&(identity(m) - &gram), tol)?.is_psd;
    let pair = defect_pair(t, tol)?;
    let coefficient_space_dim = numerical_rank(&pair.c, tol);
    let commuting = (mode == Mode::Commutative).then(|| is_commutative(t, tol));
    let adjoint_stability = strong_stability(&pair.a, None, DEFAULT_MAX_LEVEL, tol).verdict;

    let sums = partial_gramians(&pair, mode, truncation);
    let g = sums[truncation].clone();
    let obs_isometry_residual = spectral_norm(&(&g - identity(m)));
    let tail_bound = rho.powi(truncation as i32 + 1);
    let rounding_allowance = 16.0 * f64::EPSILON * (truncation as f64 + 1.0) * (m as f64);

    let explicit = EXPLICIT_DEPTH.min(truncation);
    let mut intertwining_residual: f64 = 0.0;
    for i in 0..m {
        let mut x = CVec::zeros(m);
        x[i] = r(1.0);
        match mode {
            Mode::Nc => {
                let f = nc_obs_poly(&pair, &x, explicit)?;
                for j in 1..=t.len() {
                    let lhs = right_backshift(j, &f);
                    let rhs = nc_obs_poly(&pair, &(&pair.a[j - 1] * &x), explicit)?;
                    for w in enumerate_words_up_to(t.len(), explicit.saturating_sub(1))? {
                        intertwining_residual =
                            intertwining_residual.max((lhs.coeff(&w) - rhs.coeff(&w)).norm());
                    }
                }
            }
            Mode::Commutative => {
                let f = ab_obs_poly(&pair, &x, explicit);
                for j in 1..=t.len() {
                    let lhs = arveson_backshift(j, &f);
                    let rhs = ab_obs_poly(&pair, &(&pair.a[j - 1] * &x), explicit);
                    intertwining_residual = intertwining_residual
                        .max(lhs.max_coeff_diff(&rhs, explicit.saturating_sub(1)));
                }
            }
        }
    }

    let g_inv_sqrt =
        hermitian_inverse(&psd_sqrt(&g, tol)?).ok_or(ApplicationsError::SingularGramian)?;
    let prev = if truncation > 0 {
        sums[truncation - 1].clone()
    } else {
        zeros(m, m)
    };
    let compression_residuals = t
        .iter()
        .map(|tj| spectral_norm(&(&g_inv_sqrt * tj * &prev * &g_inv_sqrt - tj)))
        .collect();

    let explicit_compression_check = explicit_compression(
        &pair,
        mode,
        explicit,
        &partial_gramians(&pair, mode, explicit),
    )?;

    Ok(DilationReport {
        mode,
        truncation,
        defect: pair.c.clone(),
        coefficient_space_dim,
        row_contraction,
        commuting,
        adjoint_stability,
        rho,
        gramian: g,
        obs_isometry_residual,
        tail_bound,
        rounding_allowance,
        intertwining_residual,
        compression_residuals,
        explicit_compression_check,
    })
}

/// Explicit `Ô* S_j Ô` on truncated coordinates against `T_j G_{n-1}`.
fn explicit_compression(
    pair: &OutputPair,
    mode: Mode,
    depth: usize,
    sums: &[CMat],
) -> Result<f64, ApplicationsError> {
    let m = pair.state_dim();
    let d = pair.d();
    let prev = if depth > 0 {
        sums[depth - 1].clone()
    } else {
        zeros(m, m)
    };
    let mut worst: f64 = 0.0;
    match mode {
        Mode::Nc => {
            let cols: Vec<FockPoly> = (0..m)
                .map(|i| {
                    let mut x = CVec::zeros(m);
                    x[i] = r(1.0);
                    nc_obs_poly(pair, &x, depth)
                })
                .collect::<Result<_, _>>()?;
            for j in 1..=d {
                let mut mat = zeros(m, m);
                for (k, ck) in cols.iter().enumerate() {
                    let shifted = crate::spaces::right_shift(j, ck).poly;
                    for (i, ci) in cols.iter().enumerate() {
                        mat[(i, k)] = shifted.inner(ci);
                    }
                }
                let expected = pair.a[j - 1].adjoint() * &prev;
                worst = worst.max(spectral_norm(&(mat - expected)));
            }
        }
        Mode::Commutative => {
            let cols: Vec<BallPoly> = (0..m)
                .map(|i| {
                    let mut x = CVec::zeros(m);
                    x[i] = r(1.0);
                    ab_obs_poly(pair, &x, depth)
                })
                .collect();
            for j in 1..=d {
                let mut mat = zeros(m, m);
                for (k, ck) in cols.iter().enumerate() {
                    let shifted = crate::spaces::arveson_shift(j, ck).poly;
                    for (i, ci) in cols.iter().enumerate() {
                        mat[(i, k)] = shifted.inner(ci);
                    }
                }
                let expected = pair.a[j - 1].adjoint() * &prev;
                worst = worst.max(spectral_norm(&(mat - expected)));
            }
        }
    }
    Ok(worst)
}

/// Operators on the Fock space `H²_Y(F_d)` handed to the Poisson transform.
#[derive(Clone, Debug)]
pub enum FockOperator {
    Identity,
    /// `sum c_w S^w` with `S^w = S_{w_1} ... S_{w_k}` (right shifts).
    ShiftPoly(Vec<(Word, Complex64)>),
    /// Matrix on the coordinates of polynomials of depth `<= depth`
    /// (word-major, `dim Y` entries per word).
    Dense {
        depth: usize,
        matrix: CMat,
    },
}

/// Largest depth accepted for [`FockOperator::Dense`].
pub const DENSE_DEPTH_LIMIT: usize = 10;

/// `Ô* X Ô` for the pair `(D_{T*}, T*)`, with `Ô` truncated at depth `n`.
/// For `X = S^w` this is `T^w G_{n-|w|}`.
pub fn poisson_transform(
    t: &[CMat],
    x: &FockOperator,
    n: usize,
    tol: f64,
) -> Result<CMat, ApplicationsError> {
    let rho = spectral_norm(&row_gram(t));
    if rho >= 1.0 {
        return Err(ApplicationsError::NotStrict { rho });
    }
    let pair = defect_pair(t, tol)?;
    let m = pair.state_dim();
    match x {
        FockOperator::Identity => Ok(partial_gramians(&pair, Mode::Nc, n).pop().unwrap()),
        FockOperator::ShiftPoly(terms) => {
            let sums = partial_gramians(&pair, Mode::Nc, n);
            let mut out = zeros(m, m);
            for (w, coef) in terms {
                if w.len() > n {
                    continue;
                }
                out += tuple_power_word(t, w) * &sums[n - w.len()] * *coef;
            }
            Ok(out)
        }
        FockOperator::Dense { depth, matrix } => {
            if *depth > DENSE_DEPTH_LIMIT {
                return Err(ApplicationsError::TooDeep {
                    depth: *depth,
                    limit: DENSE_DEPTH_LIMIT,
                });
            }
            let size = words_up_to(pair.d(), *depth) * m;
            if matrix.shape() != (size, size) {
                return Err(ApplicationsError::Dimension(format!(
                    "dense operator must be {size}x{size}"
                )));
            }
            let mut o = zeros(size, m);
            for i in 0..m {
                let mut e = CVec::zeros(m);
                e[i] = r(1.0);
                o.set_column(i, &nc_obs_poly(&pair, &e, *depth)?.to_vector());
            }
            Ok(o.adjoint() * matrix * o)
        }
    }
}

/// `rho^{n+1}` bound on `||P(T)[I] - I||` at truncation `n`.
pub fn poisson_tail_bound(t: &[CMat], n: usize) -> f64 {
    spectral_norm(&row_gram(t)).powi(n as i32 + 1)
}

/// Polynomial in noncommuting or commuting variables.
#[derive(Clone, Debug)]
pub enum Polynomial {
    Nc(Vec<(Word, Complex64)>),
    Commutative(Vec<(MultiIndex, Complex64)>),
}

impl Polynomial {
    fn degree(&self) -> usize {
        match self {
            Polynomial::Nc(t) => t.iter().map(|(w, _)| w.len()).max().unwrap_or(0),
            Polynomial::Commutative(t) => t.iter().map(|(n, _)| n.total()).max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VonNeumannReport {
    /// `||p(T)||`
    pub lhs: f64,
    /// `(N, ||P_N p(S) P_N||)`, lower bounds of `||p(S)||`.
    pub rhs: Vec<(usize, f64)>,
    pub nondecreasing: bool,
    /// `lhs <= rhs_N + tol` at the last truncation. This is evidence at a
    /// truncation, not a proof.
    pub satisfied_at_truncation: bool,
}

/// Truncated shift-side norms `||P_N p(S) P_N||` for `N = deg p, ..., max_depth`.
pub fn von_neumann_probe(
    t: &[CMat],
    p: &Polynomial,
    max_depth: usize,
    tol: f64,
) -> Result<VonNeumannReport, ApplicationsError> {
    let d = t.len();
    let m = t[0].nrows();
    let lhs_mat = match p {
        Polynomial::Nc(terms) => terms
            .iter()
            .fold(zeros(m, m), |acc, (w, c)| acc + tuple_power_word(t, w) * *c),
        Polynomial::Commutative(terms) => {
            let mut acc = zeros(m, m);
            for (n, c) in terms {
                acc += tuple_power_multi(t, n, f64::INFINITY)? * *c;
            }
            acc
        }
    };
    let lhs = spectral_norm(&lhs_mat);
    let mut rhs = Vec::new();
    for depth in p.degree().max(1)..=max_depth {
        let mat = match p {
            Polynomial::Nc(terms) => {
                let words = enumerate_words_up_to(d, depth)?;
                let mut mat = zeros(words.len(), words.len());
                for u in &words {
                    for (w, c) in terms {
                        let target = u.concat(&transpose(w));
                        if target.len() <= depth {
                            mat[(target.index(), u.index())] += c;
                        }
                    }
                }
                mat
            }
            Polynomial::Commutative(terms) => {
                let idx = multi_indices_up_to(d, depth);
                let pos: BTreeMap<&MultiIndex, usize> =
                    idx.iter().enumerate().map(|(i, n)| (n, i)).collect();
                let mut mat = zeros(idx.len(), idx.len());
                for k in &idx {
                    for (n, c) in terms {
                        let target = k.add(n);
                        if let Some(&row) = pos.get(&target) {
                            let scale = (arveson_weight(&target) / arveson_weight(k)).sqrt();
                            mat[(row, pos[k])] += c * scale;
                        }
                    }
                }
                mat
            }
        };
        rhs.push((depth, spectral_norm(&mat)));
    }
    let nondecreasing = rhs.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    let last = rhs.last().map(|x| x.1).unwrap_or(0.0);
    Ok(VonNeumannReport {
        lhs,
        rhs,
        nondecreasing,
        satisfied_at_truncation: lhs <= last + tol,
    })
}

/// Coefficients of a multiplier, `dim Y x dim U` blocks.
#[derive(Clone, Debug)]
pub enum MultiplierCoeffs {
    Nc(BTreeMap<Word, CMat>),
    Commutative(BTreeMap<MultiIndex, CMat>),
}

#[derive(Clone, Debug)]
pub struct MultiplierPoly {
    pub coeffs: MultiplierCoeffs,
    pub depth: usize,
    pub output_dim: usize,
    pub input_dim: usize,
    /// Norm of the multiplication operator on the collar-truncated domain.
    pub norm_estimate: f64,
}

impl MultiplierPoly {
    pub fn mode(&self) -> Mode {
        match self.coeffs {
            MultiplierCoeffs::Nc(_) => Mode::Nc,
            MultiplierCoeffs::Commutative(_) => Mode::Commutative,
        }
    }

    /// Coefficient blocks stacked over the shared keys of depth `<= depth`.
    fn stacked(&self, depth: usize) -> Vec<CMat> {
        match &self.coeffs {
            MultiplierCoeffs::Nc(map) => map
                .iter()
                .filter(|(w, _)| w.len() <= depth)
                .map(|(_, c)| c.clone())
                .collect(),
            MultiplierCoeffs::Commutative(map) => map
                .iter()
                .filter(|(n, _)| n.total() <= depth)
                .map(|(_, c)| c.clone())
                .collect(),
        }
    }
}

/// Best constant `U` with `recovered ≈ planted · U` through `depth`, and the
/// residual `max ||recovered_v - planted_v U||`.
pub fn align_multipliers(
    recovered: &MultiplierPoly,
    planted: &MultiplierPoly,
    depth: usize,
) -> (CMat, f64) {
    let a = recovered.stacked(depth);
    let b = planted.stacked(depth);
    let rows_b = b.iter().fold(zeros(0, planted.input_dim), |acc, m| {
        crate::numerics::concat_rows(&acc, m)
    });
    let rows_a = a.iter().fold(zeros(0, recovered.input_dim), |acc, m| {
        crate::numerics::concat_rows(&acc, m)
    });
    let u = crate::numerics::pseudo_inverse(&rows_b, 1e-12) * &rows_a;
    let residual = b
        .iter()
        .zip(&a)
        .map(|(pb, ra)| spectral_norm(&(ra - pb * &u)))
        .fold(0.0, f64::max);
    (u, residual)
}

/// Finite-dimensional shift-invariant subspace given by a spanning set of
/// truncated polynomials.
#[derive(Clone, Debug)]
pub enum SubspaceBasis {
    Fock(Vec<FockPoly>),
    Ball(Vec<BallPoly>),
}

#[derive(Clone, Debug)]
pub struct BeurlingLaxReport {
    pub mode: Mode,
    pub depth: usize,
    pub subspace_dim: usize,
    /// Distance of `S_j f` from the span, over basis vectors whose shift
    /// stays inside the truncation.
    pub shift_invariance_residual: f64,
    pub row_contractive: bool,
    pub adjoint_stability: StabilityVerdict,
    /// `(C, A)` with `A_j = (S_j|_M)*` and `C*C = I - sum A_j* A_j`.
    pub pair: OutputPair,
    pub theta: MultiplierPoly,
    pub within_unit_ball: bool,
    /// `||T*T - I||` on the collar domain.
    pub isometry_residual: f64,
    /// `||T T* T - T||`
    pub partial_isometry_residual: f64,
    /// `||(I - P_M) T||`
    pub range_residual: f64,
    pub spans_subspace: bool,
    /// `||T T* - P_M||`
    pub projection_residual: f64,
}

impl BeurlingLaxReport {
    pub fn partial_isometry(&self, tol: f64) -> bool {
        self.partial_isometry_residual <= scaled_tol(tol, 1.0)
    }
}

/// Beurling-Lax representer of a shift-invariant subspace: the multiplier
/// `θ` with `θ u = ι Ô* u`, read off from `V C*`.
pub fn beurling_lax(
    basis: &SubspaceBasis,
    tol: f64,
) -> Result<BeurlingLaxReport, ApplicationsError> {
    match basis {
        SubspaceBasis::Fock(polys) => beurling_lax_nc(polys, tol),
        SubspaceBasis::Ball(polys) => beurling_lax_commutative(polys, tol),
    }
}

struct Coordinates {
    /// Orthonormal basis of the subspace, columns.
    v: CMat,
    /// Backshifts applied to each column, in the same coordinates.
    backshifted: Vec<CMat>,
    shift_invariance_residual: f64,
}

fn finish_report(
    mode: Mode,
    depth: usize,
    coords: Coordinates,
    k: usize,
    build_theta: impl Fn(&CMat, f64) -> MultiplierCoeffs,
    multiplication: impl Fn(&MultiplierCoeffs, usize) -> CMat,
    tol: f64,
) -> Result<BeurlingLaxReport, ApplicationsError> {
    let v = &coords.v;
    let dim = v.ncols();
    let a: Vec<CMat> = coords.backshifted.iter().map(|b| v.adjoint() * b).collect();
    let restricted: Vec<CMat> = a.iter().map(|aj| aj.adjoint()).collect();
    let row_contractive = psd_check(&(identity(dim) - row_gram(&restricted)), tol)?.is_psd;
    let adjoint_stability = strong_stability(&a, None, DEFAULT_MAX_LEVEL, tol).verdict;
    let mut defect = identity(dim);
    for aj in &a {
        defect -= aj.adjoint() * aj;
    }
    let c = hermitian_factor_reduced(&crate::numerics::hermitian_part(&defect), tol)?;
    let u_dim = c.nrows();
    let pair = OutputPair::new(c.clone(), a)?;
    // θ u = ι Ô* u = V C* u
    let theta_vectors = v * c.adjoint();
    let cutoff = coefficient_cutoff(&theta_vectors, tol);
    let coeffs = build_theta(&theta_vectors, cutoff);
    let t = multiplication(&coeffs, u_dim);
    let norm = spectral_norm(&t);
    let tt = t.adjoint() * &t;
    let isometry_residual = spectral_norm(&(&tt - identity(tt.nrows())));
    let partial_isometry_residual = spectral_norm(&(&t * &tt - &t));
    let pm = v * v.adjoint();
    let range_residual = spectral_norm(&(&t - &pm * &t));
    let spans_subspace = numerical_rank(&t, tol) == dim;
    let projection_residual = spectral_norm(&(&t * t.adjoint() - &pm));
    Ok(BeurlingLaxReport {
        mode,
        depth,
        subspace_dim: dim,
        shift_invariance_residual: coords.shift_invariance_residual,
        row_contractive,
        adjoint_stability,
        pair,
        theta: MultiplierPoly {
            coeffs,
            depth,
            output_dim: k,
            input_dim: u_dim,
            norm_estimate: norm,
        },
        within_unit_ball: norm <= 1.0 + tol,
        isometry_residual,
        partial_isometry_residual,
        range_residual,
        spans_subspace,
        projection_residual,
    })
}

/// Coefficient blocks below this are rounding noise of the eigensolver.
fn coefficient_cutoff(theta_vectors: &CMat, tol: f64) -> f64 {
    scaled_tol(tol, theta_vectors.norm()) * 1e-3
}

/// Degree of each column of `θ`: largest key length with a nonzero entry.
fn column_degrees<K>(
    map: &BTreeMap<K, CMat>,
    u_dim: usize,
    len: impl Fn(&K) -> usize,
    tol: f64,
) -> Vec<usize> {
    let scale = map.values().map(|c| c.norm()).fold(0.0, f64::max);
    (0..u_dim)
        .map(|u| {
            map.iter()
                .filter(|(_, c)| c.column(u).norm() > scaled_tol(tol, scale) * 1e-3)
                .map(|(key, _)| len(key))
                .max()
                .unwrap_or(0)
        })
        .collect()
}

fn beurling_lax_nc(polys: &[FockPoly], tol: f64) -> Result<BeurlingLaxReport, ApplicationsError> {
    let first = polys
        .first()
        .ok_or_else(|| ApplicationsError::Dimension("empty basis".into()))?;
    let (d, depth, k) = (first.alphabet(), first.depth(), first.coeff_dim());
    let cols: Vec<CVec> = polys.iter().map(|f| f.to_vector()).collect();
    let v = range_basis(&CMat::from_columns(&cols), tol);
    let to_poly = |col: CVec| FockPoly::from_vector(d, depth, k, &col);
    let mut backshifted = Vec::with_capacity(d);
    let mut shift_invariance_residual: f64 = 0.0;
    let pm = &v * v.adjoint();
    for j in 1..=d {
        let mut b = zeros(v.nrows(), v.ncols());
        for i in 0..v.ncols() {
            let f = to_poly(v.column(i).into_owned())?;
            b.set_column(i, &right_backshift(j, &f).to_vector());
            let shifted = crate::spaces::right_shift(j, &f);
            if !shifted.truncated {
                let g = shifted.poly.to_vector();
                shift_invariance_residual = shift_invariance_residual.max((&g - &pm * &g).norm());
            }
        }
        backshifted.push(b);
    }
    let words = enumerate_words_up_to(d, depth)?;
    let coords = Coordinates {
        v,
        backshifted,
        shift_invariance_residual,
    };
    finish_report(
        Mode::Nc,
        depth,
        coords,
        k,
        |tv, cutoff| {
            let mut map = BTreeMap::new();
            for w in &words {
                let block = tv.rows(w.index() * k, k).into_owned();
                if block.norm() > cutoff {
                    map.insert(w.clone(), block);
                }
            }
            MultiplierCoeffs::Nc(map)
        },
        |coeffs, u_dim| {
            let MultiplierCoeffs::Nc(map) = coeffs else {
                unreachable!()
            };
            let degs = &column_degrees(map, u_dim, |w: &Word| w.len(), tol);
            // domain: (x, u) with |x| <= depth - deg_u
            let domain: Vec<(Word, usize)> = (0..u_dim)
                .flat_map(|u| {
                    words
                        .iter()
                        .filter(move |x| x.len() + degs[u] <= depth)
                        .map(move |x| (x.clone(), u))
                })
                .collect();
            let mut t = zeros(words.len() * k, domain.len());
            for (col, (x, u)) in domain.iter().enumerate() {
                for (w, block) in map {
                    let target = w.concat(x);
                    if target.len() <= depth {
                        for y in 0..k {
                            t[(target.index() * k + y, col)] += block[(y, *u)];
                        }
                    }
                }
            }
            t
        },
        tol,
    )
}

fn beurling_lax_commutative(
    polys: &[BallPoly],
    tol: f64,
) -> Result<BeurlingLaxReport, ApplicationsError> {
    let first = polys
        .first()
        .ok_or_else(|| ApplicationsError::Dimension("empty basis".into()))?;
    let (d, depth, k) = (first.dim(), first.degree(), first.coeff_dim());
    let idx = multi_indices_up_to(d, depth);
    let pos: BTreeMap<MultiIndex, usize> = idx
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    // weighted coordinates: Euclidean geometry equals the Arveson norm
    let cols: Vec<CVec> = polys.iter().map(|f| f.to_vector(depth, true)).collect();
    let v = range_basis(&CMat::from_columns(&cols), tol);
    let to_poly = |col: &CVec| -> Result<BallPoly, SpacesError> {
        let mut f = BallPoly::zero(d, depth, k);
        for (i, n) in idx.iter().enumerate() {
            let y = col.rows(i * k, k).into_owned() * r(1.0 / arveson_weight(n).sqrt());
            if y.norm() > 0.0 {
                f.set(n.clone(), y)?;
            }
        }
        Ok(f)
    };
    let pm = &v * v.adjoint();
    let mut backshifted = Vec::with_capacity(d);
    let mut shift_invariance_residual: f64 = 0.0;
    for j in 1..=d {
        let mut b = zeros(v.nrows(), v.ncols());
        for i in 0..v.ncols() {
            let f = to_poly(&v.column(i).into_owned())?;
            b.set_column(i, &arveson_backshift(j, &f).to_vector(depth, true));
            let shifted = crate::spaces::arveson_shift(j, &f);
            if !shifted.truncated {
                let g = shifted.poly.to_vector(depth, true);
                shift_invariance_residual = shift_invariance_residual.max((&g - &pm * &g).norm());
            }
        }
        backshifted.push(b);
    }
    let coords = Coordinates {
        v,
        backshifted,
        shift_invariance_residual,
    };
    finish_report(
        Mode::Commutative,
        depth,
        coords,
        k,
        |tv, cutoff| {
            let mut map = BTreeMap::new();
            for (i, n) in idx.iter().enumerate() {
                let block = tv.rows(i * k, k).into_owned() * r(1.0 / arveson_weight(n).sqrt());
                if block.norm() > cutoff {
                    map.insert(n.clone(), block);
                }
            }
            MultiplierCoeffs::Commutative(map)
        },
        |coeffs, u_dim| {
            let MultiplierCoeffs::Commutative(map) = coeffs else {
                unreachable!()
            };
            let degs = &column_degrees(map, u_dim, |n: &MultiIndex| n.total(), tol);
            let domain: Vec<(MultiIndex, usize)> = (0..u_dim)
                .flat_map(|u| {
                    idx.iter()
                        .filter(move |n| n.total() + degs[u] <= depth)
                        .map(move |n| (n.clone(), u))
                })
                .collect();
            let mut t = zeros(idx.len() * k, domain.len());
            for (col, (x, u)) in domain.iter().enumerate() {
                for (n, block) in map {
                    let target = n.add(x);
                    if let Some(&row) = pos.get(&target) {
                        let scale = (arveson_weight(&target) / arveson_weight(x)).sqrt();
                        for y in 0..k {
                            t[(row * k + y, col)] += block[(y, *u)] * scale;
                        }
                    }
                }
            }
            t
        },
        tol,
    )
}

/// Spectrum helper for reports: eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues(h: &CMat) -> Vec<f64> {
    hermitian_spectrum(h).values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;
    use crate::sampling::{random_row_contraction, seeded};

    #[test]
    fn zero_contraction_dilates_exactly() {
        let rep = dilate(&[zeros(1, 1)], Mode::Nc, 10, 1e-9).unwrap();
        assert!((rep.defect[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((rep.gramian[(0, 0)].re - 1.0).abs() < 1e-15);
        assert_eq!(rep.compression_residuals, vec![0.0]);
    }

    #[test]
    fn random_dilation_checks() {
        let t = random_row_contraction(&mut seeded(4), 4, 2, 0.6);
        let rep = dilate(&t, Mode::Nc, 40, 1e-9).unwrap();
        assert!(
            rep.isometric_within_tail(),
            "{} vs {}",
            rep.obs_isometry_residual,
            rep.tail_bound
        );
        assert_eq!(rep.intertwining_residual, 0.0);
        assert!(rep.compression_residuals.iter().all(|&x| x <= 1e-8));
        assert!(rep.explicit_compression_check < 1e-12);
    }

    #[test]
    fn poisson_bookkeeping_against_dense() {
        let t = random_row_contraction(&mut seeded(8), 2, 2, 0.5);
        let depth = 3;
        let dense = {
            let words = enumerate_words_up_to(2, depth).unwrap();
            let m = 2;
            let mut s1 = zeros(words.len() * m, words.len() * m);
            for u in &words {
                let target = u.append(1);
                if target.len() <= depth {
                    for y in 0..m {
                        s1[(target.index() * m + y, u.index() * m + y)] = r(1.0);
                    }
                }
            }
            s1
        };
        let via_dense = poisson_transform(
            &t,
            &FockOperator::Dense {
                depth,
                matrix: dense,
            },
            depth,
            1e-9,
        )
        .unwrap();
        let w = Word::parse(2, "1").unwrap();
        let via_formula =
            poisson_transform(&t, &FockOperator::ShiftPoly(vec![(w, r(1.0))]), depth, 1e-9)
                .unwrap();
        assert!((via_dense - via_formula).norm() < 1e-13);
        let zero = poisson_transform(&t, &FockOperator::ShiftPoly(vec![]), 10, 1e-9).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn von_neumann_simple_cases() {
        let t = random_row_contraction(&mut seeded(9), 3, 2, 0.8);
        let p = Polynomial::Nc(vec![(Word::parse(2, "1").unwrap(), r(1.0))]);
        let rep = von_neumann_probe(&t, &p, 5, 1e-9).unwrap();
        assert!((rep.lhs - spectral_norm(&t[0])).abs() < 1e-14);
        assert!((rep.rhs.last().unwrap().1 - 1.0).abs() < 1e-14);
        let p = Polynomial::Nc(vec![(Word::empty(2), c(0.0, 2.0))]);
        let rep = von_neumann_probe(&t, &p, 3, 1e-9).unwrap();
        assert!((rep.lhs - 2.0).abs() < 1e-14 && (rep.rhs[0].1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn von_neumann_symmetric_product_on_example_tuple() {
        let t = crate::catalog::reverse_stein().a;
        let p = Polynomial::Nc(vec![
            (Word::parse(2, "12").unwrap(), r(1.0)),
            (Word::parse(2, "21").unwrap(), r(1.0)),
        ]);
        let rep = von_neumann_probe(&t, &p, 8, 1e-9).unwrap();
        // oracle: z1z2 + z2z1 maps z^u to z^{u21} + z^{u12}, norm sqrt(2) once depth >= 2
        assert!((rep.rhs.last().unwrap().1 - 2f64.sqrt()).abs() < 1e-12);
        assert!(rep.nondecreasing && rep.satisfied_at_truncation);
        assert!(rep.lhs < rep.rhs[0].1);
    }

    #[test]
    fn beurling_lax_z1() {
        let depth = 5;
        let basis: Vec<FockPoly> = enumerate_words_up_to(2, depth - 1)
            .unwrap()
            .into_iter()
            .map(|v| {
                FockPoly::monomial(&v.prepend(1), depth, CVec::from_element(1, r(1.0))).unwrap()
            })
            .collect();
        let rep = beurling_lax(&SubspaceBasis::Fock(basis), 1e-9).unwrap();
        assert_eq!(rep.theta.input_dim, 1);
        let MultiplierCoeffs::Nc(map) = &rep.theta.coeffs else {
            panic!()
        };
        assert_eq!(map.len(), 1);
        let (w, c1) = map.iter().next().unwrap();
        assert_eq!(w, &Word::parse(2, "1").unwrap());
        assert!((c1[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(rep.within_unit_ball && rep.isometry_residual < 1e-12 && rep.spans_subspace);
        assert!(rep.projection_residual < 1e-12);
    }

    #[test]
    fn beurling_lax_lambda1() {
        let depth = 6;
        let basis: Vec<BallPoly> = multi_indices_up_to(2, depth - 1)
            .into_iter()
            .map(|n| {
                BallPoly::monomial(
                    &n.add(&MultiIndex::unit(2, 1)),
                    depth,
                    CVec::from_element(1, r(1.0)),
                )
            })
            .collect();
        let rep = beurling_lax(&SubspaceBasis::Ball(basis), 1e-9).unwrap();
        assert_eq!(rep.theta.input_dim, depth);
        assert!(rep.isometry_residual > 0.5);
        assert!(rep.within_unit_ball);
        assert!(rep.partial_isometry(1e-9));
    }
}
