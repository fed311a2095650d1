//! Truncated Fock space `H²_Y(F_d)` and Arveson space `H_Y(k_d)` as
//! coefficient stores, with shifts, the transpose involution, evaluation
//! maps, model pairs and Gleason solutions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::combinatorics::{
    multi_indices_up_to, multinomial_weight, transpose, words_up_to, CombinatoricsError,
    MultiIndex, Word,
};
use crate::numerics::{
    psd_check, pseudo_inverse, r, range_basis, scaled_tol, singular_values, spectral_norm, zeros,
    CMat, CVec, NumericsError,
};
use crate::sampling::{ball_points, seeded};
use crate::stein::{ab_gramian, arveson_weight, SteinError, DEFAULT_MAX_LEVEL};
use crate::systems::{resolvent_row, OutputPair, SystemsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacesError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("basis is linearly dependent (rank {rank} of {count})")]
    DependentBasis { rank: usize, count: usize },
    #[error("span is not invariant under the backward shifts (residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("abelianized gramian did not converge ({0})")]
    Divergent(String),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Stein(#[from] SteinError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
}

/// Fock-space polynomial `sum_{|v| <= N} f_v z^v` with `f_v` in `C^k`,
/// stored densely in graded lexicographic word order.
#[derive(Clone, Debug, PartialEq)]
pub struct FockPoly {
    d: usize,
    depth: usize,
    k: usize,
    coeffs: Vec<CVec>,
}

impl FockPoly {
    pub fn zero(d: usize, depth: usize, k: usize) -> Result<Self, SpacesError> {
        let count = words_up_to(d, depth);
        let cap = crate::combinatorics::max_words();
        if count > cap {
            return Err(CombinatoricsError::TooManyWords {
                requested: count as u128,
                cap,
            }
            .into());
        }
        Ok(FockPoly {
            d,
            depth,
            k,
            coeffs: vec![CVec::zeros(k); count],
        })
    }

    pub fn monomial(word: &Word, depth: usize, y: CVec) -> Result<Self, SpacesError> {
        let mut f = FockPoly::zero(word.alphabet(), depth, y.len())?;
        f.set(word, y)?;
        Ok(f)
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn coeff_dim(&self) -> usize {
        self.k
    }

    /// `f_v`, zero beyond the depth.
    pub fn coeff(&self, v: &Word) -> CVec {
        if v.len() > self.depth {
            return CVec::zeros(self.k);
        }
        self.coeffs[v.index()].clone()
    }

    pub fn coeff_at(&self, index: usize) -> &CVec {
        &self.coeffs[index]
    }

    pub fn set(&mut self, v: &Word, y: CVec) -> Result<(), SpacesError> {
        if v.len() > self.depth || y.len() != self.k || v.alphabet() != self.d {
            return Err(SpacesError::Dimension(format!(
                "cannot store {v:?} with a {}-vector",
                y.len()
            )));
        }
        self.coeffs[v.index()] = y;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Word, &CVec)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, y)| (Word::from_index(self.d, i), y))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|y| y.norm_squared()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &FockPoly) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| b.dotc(a))
            .sum()
    }

    /// Concatenated coefficients, word-major.
    pub fn to_vector(&self) -> CVec {
        CVec::from_iterator(
            self.coeffs.len() * self.k,
            self.coeffs.iter().flat_map(|y| y.iter().cloned()),
        )
    }

    pub fn from_vector(d: usize, depth: usize, k: usize, v: &CVec) -> Result<Self, SpacesError> {
        let mut f = FockPoly::zero(d, depth, k)?;
        if v.len() != f.coeffs.len() * k {
            return Err(SpacesError::Dimension(format!(
                "vector of length {} for {} slots",
                v.len(),
                f.coeffs.len() * k
            )));
        }
        for (i, y) in f.coeffs.iter_mut().enumerate() {
            *y = v.rows(i * k, k).into_owned();
        }
        Ok(f)
    }

    pub fn combine(&self, other: &FockPoly, alpha: Complex64) -> FockPoly {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * alpha;
        }
        out
    }

    pub fn scale(&self, alpha: Complex64) -> FockPoly {
        FockPoly {
            coeffs: self.coeffs.iter().map(|y| y * alpha).collect(),
            ..self.clone()
        }
    }

    /// Sum of `||f_v||²` over `|v| = level`.
    pub fn level_norm_sqr(&self, level: usize) -> f64 {
        if level > self.depth {
            return 0.0;
        }
        let lo = crate::combinatorics::words_below_length(self.d, level);
        let hi = words_up_to(self.d, level);
        self.coeffs[lo..hi].iter().map(|y| y.norm_squared()).sum()
    }

    fn same_shape(&self, other: &FockPoly) -> bool {
        self.d == other.d && self.depth == other.depth && self.k == other.k
    }
}

/// Result of a forward shift: coefficients pushed past the depth are dropped
/// and their norm recorded.
#[derive(Clone, Debug)]
pub struct Shifted<P> {
    pub poly: P,
    pub truncated: bool,
    pub leaked_norm: f64,
}

/// `S^R_j`: `f_v z^v -> f_v z^{vj}`.
pub fn right_shift(j: usize, f: &FockPoly) -> Shifted<FockPoly> {
    shift_with(f, |v| v.append(j))
}

/// `S^L_j`: `f_v z^v -> f_v z^{jv}`.
pub fn left_shift(j: usize, f: &FockPoly) -> Shifted<FockPoly> {
    shift_with(f, |v| v.prepend(j))
}

fn shift_with(f: &FockPoly, target: impl Fn(&Word) -> Word) -> Shifted<FockPoly> {
    let mut out = FockPoly {
        coeffs: vec![CVec::zeros(f.k); f.coeffs.len()],
        ..f.clone()
    };
    let mut leaked = 0.0;
    for (i, y) in f.coeffs.iter().enumerate() {
        let v = Word::from_index(f.d, i);
        if v.len() == f.depth {
            leaked += y.norm_squared();
        } else {
            out.coeffs[target(&v).index()] = y.clone();
        }
    }
    Shifted {
        poly: out,
        truncated: leaked > 0.0,
        leaked_norm: leaked.sqrt(),
    }
}

/// `(S^R_j)*`: `(g)_v = f_{vj}`.
pub fn right_backshift(j: usize, f: &FockPoly) -> FockPoly {
    backshift_with(f, |v| v.append(j))
}

/// `(S^L_j)*`: `(g)_v = f_{jv}`.
pub fn left_backshift(j: usize, f: &FockPoly) -> FockPoly {
    backshift_with(f, |v| v.prepend(j))
}

fn backshift_with(f: &FockPoly, source: impl Fn(&Word) -> Word) -> FockPoly {
    let mut out = FockPoly {
        coeffs: vec![CVec::zeros(f.k); f.coeffs.len()],
        ..f.clone()
    };
    let below = crate::combinatorics::words_below_length(f.d, f.depth);
    for (i, slot) in out.coeffs.iter_mut().enumerate().take(below) {
        let v = Word::from_index(f.d, i);
        *slot = f.coeffs[source(&v).index()].clone();
    }
    out
}

/// `f_v -> f_{v^T}`.
pub fn tau(f: &FockPoly) -> FockPoly {
    let mut out = f.clone();
    for (i, slot) in out.coeffs.iter_mut().enumerate() {
        let v = Word::from_index(f.d, i);
        *slot = f.coeffs[transpose(&v).index()].clone();
    }
    out
}

/// Evaluation `E f = f_∅`.
pub fn eval_e(f: &FockPoly) -> CVec {
    f.coeffs[0].clone()
}

/// `E* y`: the constant polynomial `y`.
pub fn eval_e_adjoint(d: usize, depth: usize, y: &CVec) -> Result<FockPoly, SpacesError> {
    FockPoly::monomial(&Word::empty(d), depth, y.clone())
}

/// Arveson-space polynomial `sum_{|n| <= N} f_n λ^n`, with norm
/// `sum_n (n!/|n|!) ||f_n||²`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallPoly {
    d: usize,
    degree: usize,
    k: usize,
    coeffs: BTreeMap<MultiIndex, CVec>,
}

impl BallPoly {
    pub fn zero(d: usize, degree: usize, k: usize) -> Self {
        BallPoly {
            d,
            degree,
            k,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(n: &MultiIndex, degree: usize, y: CVec) -> Self {
        let mut f = BallPoly::zero(n.dim(), degree.max(n.total()), y.len());
        f.coeffs.insert(n.clone(), y);
        f
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff_dim(&self) -> usize {
        self.k
    }

    pub fn coeff(&self, n: &MultiIndex) -> CVec {
        self.coeffs
            .get(n)
            .cloned()
            .unwrap_or_else(|| CVec::zeros(self.k))
    }

    pub fn set(&mut self, n: MultiIndex, y: CVec) -> Result<(), SpacesError> {
        if n.total() > self.degree || y.len() != self.k || n.dim() != self.d {
            return Err(SpacesError::Dimension(format!(
                "cannot store {n:?} with a {}-vector",
                y.len()
            )));
        }
        self.coeffs.insert(n, y);
        Ok(())
    }

    /// Stored (possibly zero) coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CVec)> {
        self.coeffs.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(n, y)| arveson_weight(n) * y.norm_squared())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Arveson inner product `<self, other>`.
    pub fn inner(&self, other: &BallPoly) -> Complex64 {
        self.coeffs
            .iter()
            .filter_map(|(n, a)| other.coeffs.get(n).map(|b| b.dotc(a) * arveson_weight(n)))
            .sum()
    }

    pub fn combine(&self, other: &BallPoly, alpha: Complex64) -> BallPoly {
        let mut out = self.clone();
        out.degree = self.degree.max(other.degree);
        for (n, y) in &other.coeffs {
            let slot = out
                .coeffs
                .entry(n.clone())
                .or_insert_with(|| CVec::zeros(self.k));
            *slot += y * alpha;
        }
        out
    }

    pub fn scale(&self, alpha: Complex64) -> BallPoly {
        BallPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|(n, y)| (n.clone(), y * alpha))
                .collect(),
            ..self.clone()
        }
    }

    /// `f(λ)` for the truncated polynomial.
    pub fn eval(&self, lambda: &[Complex64]) -> CVec {
        let mut out = CVec::zeros(self.k);
        for (n, y) in &self.coeffs {
            let mono: Complex64 = n
                .entries()
                .iter()
                .zip(lambda)
                .map(|(&e, z)| z.powu(e as u32))
                .product();
            out += y * mono;
        }
        out
    }

    /// Coefficients over `multi_indices_up_to(d, degree)`, each multiplied by
    /// `sqrt(n!/|n|!)` when `weighted`, so that Euclidean geometry matches
    /// the Arveson norm.
    pub fn to_vector(&self, degree: usize, weighted: bool) -> CVec {
        let idx = multi_indices_up_to(self.d, degree);
        let mut out = CVec::zeros(idx.len() * self.k);
        for (i, n) in idx.iter().enumerate() {
            if let Some(y) = self.coeffs.get(n) {
                let w = if weighted {
                    arveson_weight(n).sqrt()
                } else {
                    1.0
                };
                out.rows_mut(i * self.k, self.k).copy_from(&(y * r(w)));
            }
        }
        out
    }

    /// Largest coefficient difference over `|n| <= degree`.
    pub fn max_coeff_diff(&self, other: &BallPoly, degree: usize) -> f64 {
        multi_indices_up_to(self.d, degree)
            .iter()
            .map(|n| (self.coeff(n) - other.coeff(n)).norm())
            .fold(0.0, f64::max)
    }

    pub fn truncate(&self, degree: usize) -> BallPoly {
        BallPoly {
            degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(n, _)| n.total() <= degree)
                .map(|(n, y)| (n.clone(), y.clone()))
                .collect(),
            ..self.clone()
        }
    }
}

/// `G f = f(0)`.
pub fn eval_g(f: &BallPoly) -> CVec {
    f.coeff(&MultiIndex::zero(f.d))
}

/// `M*_j`: `λ^m -> (m_j/|m|) λ^{m - e_j}`.
pub fn arveson_backshift(j: usize, f: &BallPoly) -> BallPoly {
    let mut out = BallPoly::zero(f.d, f.degree, f.k);
    for (m, y) in &f.coeffs {
        if let Some(prev) = m.minus_unit(j) {
            let factor = m.get(j) as f64 / m.total() as f64;
            let slot = out.coeffs.entry(prev).or_insert_with(|| CVec::zeros(f.k));
            *slot += y * r(factor);
        }
    }
    out
}

/// `M_j`: `λ^m -> λ^{m + e_j}`, dropping what leaves the degree.
pub fn arveson_shift(j: usize, f: &BallPoly) -> Shifted<BallPoly> {
    let mut out = BallPoly::zero(f.d, f.degree, f.k);
    let mut leaked = 0.0;
    for (m, y) in &f.coeffs {
        let next = m.plus_unit(j);
        if next.total() > f.degree {
            leaked += arveson_weight(m) * y.norm_squared();
        } else {
            out.coeffs.insert(next, y.clone());
        }
    }
    Shifted {
        poly: out,
        truncated: leaked > 0.0,
        leaked_norm: leaked.sqrt(),
    }
}

/// `sum_{|n| <= N} G W(n) f λ^n` for the pair `(G, M*)`, with
/// `W(n) = (|n|!/n!) (M*)^n` since the backshifts commute.
pub fn backshift_observability(f: &BallPoly, degree: usize) -> Result<BallPoly, SpacesError> {
    let mut out = BallPoly::zero(f.d, degree, f.k);
    for n in multi_indices_up_to(f.d, degree) {
        let mut g = f.clone();
        for j in 1..=f.d {
            for _ in 0..n.get(j) {
                g = arveson_backshift(j, &g);
            }
        }
        let count = multinomial_weight(&n)?.value;
        let y = eval_g(&g) * r(count);
        if y.norm() > 0.0 {
            out.coeffs.insert(n, y);
        }
    }
    Ok(out)
}

/// `sum_{|v| <= N} (C A^v x) z^v`, built with `A^{kv} x = A_k (A^v x)`.
pub fn nc_obs_poly(pair: &OutputPair, x: &CVec, depth: usize) -> Result<FockPoly, SpacesError> {
    let d = pair.d();
    let mut f = FockPoly::zero(d, depth, pair.output_dim())?;
    let mut states: Vec<CVec> = Vec::with_capacity(f.coeffs.len());
    for i in 0..f.coeffs.len() {
        let w = Word::from_index(d, i);
        let s = match w.first() {
            None => x.clone(),
            Some(k) => {
                let parent =
                    crate::combinatorics::left_quotient(k, &w).expect("first letter strips");
                &pair.a[k - 1] * &states[parent.index()]
            }
        };
        f.coeffs[i] = &pair.c * &s;
        states.push(s);
    }
    Ok(f)
}

/// `sum_{|n| <= N} (C W(n) x) λ^n`, built with `W(n) x = sum_i A_i W(n - e_i) x`.
pub fn ab_obs_poly(pair: &OutputPair, x: &CVec, degree: usize) -> BallPoly {
    let d = pair.d();
    let mut states: BTreeMap<MultiIndex, CVec> = BTreeMap::new();
    let mut f = BallPoly::zero(d, degree, pair.output_dim());
    for n in multi_indices_up_to(d, degree) {
        let s = if n.total() == 0 {
            x.clone()
        } else {
            let mut acc = CVec::zeros(x.len());
            for i in 1..=d {
                if let Some(prev) = n.minus_unit(i) {
                    acc += &pair.a[i - 1] * &states[&prev];
                }
            }
            acc
        };
        f.coeffs.insert(n.clone(), &pair.c * &s);
        states.insert(n, s);
    }
    f
}

/// Model pair `A_j = (S^L_j)*|_X`, `C = E|_X` on `X = τ(M)`.
#[derive(Clone, Debug)]
pub struct ModelPair {
    pub pair: OutputPair,
    /// Orthonormal basis of `X = τ(M)` fixing the coordinates.
    pub state_basis: Vec<FockPoly>,
    /// Largest distance of `(S^L_j)* q` from `X` over basis vectors `q`.
    pub invariance_residual: f64,
}

impl ModelPair {
    /// Coordinates of `τ f` for `f` in `M`.
    pub fn coordinates(&self, f: &FockPoly) -> CVec {
        let g = tau(f);
        CVec::from_iterator(
            self.state_basis.len(),
            self.state_basis.iter().map(|q| g.inner(q)),
        )
    }
}

pub fn model_pair_from_fock_subspace(
    basis: &[FockPoly],
    tol: f64,
) -> Result<ModelPair, SpacesError> {
    let first = basis
        .first()
        .ok_or_else(|| SpacesError::Dimension("empty basis".into()))?;
    if basis.iter().any(|f| !f.same_shape(first)) {
        return Err(SpacesError::Dimension(
            "basis polynomials differ in alphabet, depth or coefficient size".into(),
        ));
    }
    let (d, depth, k) = (first.d, first.depth, first.k);
    let cols: Vec<CVec> = basis.iter().map(|f| tau(f).to_vector()).collect();
    let stacked = CMat::from_columns(&cols);
    let q = range_basis(&stacked, tol);
    if q.ncols() < basis.len() {
        return Err(SpacesError::DependentBasis {
            rank: q.ncols(),
            count: basis.len(),
        });
    }
    let state_basis: Vec<FockPoly> = (0..q.ncols())
        .map(|i| FockPoly::from_vector(d, depth, k, &q.column(i).into_owned()))
        .collect::<Result<_, _>>()?;
    let dim = state_basis.len();
    let mut residual: f64 = 0.0;
    let mut a = Vec::with_capacity(d);
    for j in 1..=d {
        let mut aj = zeros(dim, dim);
        for (i, qi) in state_basis.iter().enumerate() {
            let g = left_backshift(j, qi).to_vector();
            let coords = q.adjoint() * &g;
            residual = residual.max((&g - &q * &coords).norm());
            aj.set_column(i, &coords);
        }
        a.push(aj);
    }
    if residual > scaled_tol(tol, 1.0) {
        return Err(SpacesError::NotInvariant { residual });
    }
    let cmat = CMat::from_columns(&state_basis.iter().map(eval_e).collect::<Vec<_>>());
    Ok(ModelPair {
        pair: OutputPair::new(cmat, a)?,
        state_basis,
        invariance_residual: residual,
    })
}

/// Finite-dimensional subspace of the Arveson space with a tuple solving
/// the Gleason problem on it, in basis coordinates.
#[derive(Clone, Debug)]
pub struct GleasonSolution {
    pub basis: Vec<BallPoly>,
    pub t: Vec<CMat>,
    /// `f -> f(0)` in basis coordinates.
    pub c: CMat,
    /// Arveson Gram matrix of the basis.
    pub gram: CMat,
    pub contractive: bool,
    /// `max |f(λ) - f(0) - sum λ_j (T_j f)(λ)|` over sample points and basis
    /// elements, from closed-form evaluation.
    pub sample_residual: f64,
}

/// Number of sample points used for the closed-form residual.
pub const GLEASON_SAMPLES: usize = 20;

fn contractive_on(gram: &CMat, c: &CMat, t: &[CMat], tol: f64) -> Result<(bool, f64), SpacesError> {
    let mut defect = gram - c.adjoint() * c;
    for tj in t {
        defect -= tj.adjoint() * gram * tj;
    }
    let verdict = psd_check(&defect, tol)?;
    Ok((verdict.is_psd, verdict.min_eigenvalue))
}

/// Gleason solution on `Ran Ô^a` from an a-output-stable pair: coordinates
/// are `x` in an orthonormal basis of `(Ker G^a)^⊥`, with `T_j = P A_j`
/// there and basis elements `Ô^a x`.
pub fn gleason_from_pair(
    pair: &OutputPair,
    degree: usize,
    tol: f64,
) -> Result<GleasonSolution, SpacesError> {
    let ga = ab_gramian(pair, DEFAULT_MAX_LEVEL, tol * 1e-3);
    if !ga.converged() {
        return Err(SpacesError::Divergent(ga.verdict.as_str().into()));
    }
    let v = range_basis(&ga.value, tol);
    let t: Vec<CMat> = pair.a.iter().map(|aj| v.adjoint() * aj * &v).collect();
    let c = &pair.c * &v;
    let gram = v.adjoint() * &ga.value * &v;
    let basis: Vec<BallPoly> = (0..v.ncols())
        .map(|i| ab_obs_poly(pair, &v.column(i).into_owned(), degree))
        .collect();
    let (contractive, _) = contractive_on(&gram, &c, &t, tol)?;
    let mut rng = seeded(0x61ea_5011);
    let mut sample_residual: f64 = 0.0;
    for lambda in ball_points(&mut rng, pair.d(), GLEASON_SAMPLES, 0.9) {
        let b = resolvent_row(pair, &lambda)? * &v;
        let mut res = &b - &c;
        for (j, tj) in t.iter().enumerate() {
            res -= &b * tj * lambda[j];
        }
        sample_residual = sample_residual.max(spectral_norm(&res));
    }
    Ok(GleasonSolution {
        basis,
        t,
        c,
        gram,
        contractive,
        sample_residual,
    })
}

#[derive(Clone, Debug)]
pub struct GleasonCheck {
    pub solves: bool,
    /// Largest coefficient of `f - f(0) - sum λ_j T_j f` over `|n| <= N`.
    pub coefficient_residual: f64,
    pub contractive: bool,
    pub contractivity_margin: f64,
    pub equals_backshift: bool,
    /// Largest coefficient of `T_j f - M*_j f` over `|n| <= N - 1`.
    pub backshift_residual: f64,
    pub backshift_invariant: bool,
    /// Largest Arveson distance of `M*_j f` from the span, on `|n| <= N - 1`.
    pub invariance_residual: f64,
}

fn apply_t(basis: &[BallPoly], tj: &CMat, k: usize) -> BallPoly {
    let mut out = BallPoly::zero(basis[0].d, basis[0].degree, basis[0].k);
    for (i, bi) in basis.iter().enumerate() {
        out = out.combine(bi, tj[(i, k)]);
    }
    out
}

pub fn gleason_check(candidate: &GleasonSolution, tol: f64) -> Result<GleasonCheck, SpacesError> {
    let basis = &candidate.basis;
    if basis.is_empty() {
        return Err(SpacesError::Dimension("empty basis".into()));
    }
    let d = basis[0].d;
    let degree = basis.iter().map(|b| b.degree).min().unwrap_or(0);
    let scale = basis
        .iter()
        .flat_map(|b| b.coeffs.values().map(|y| y.norm()))
        .fold(0.0, f64::max);
    let inner_degree = degree.saturating_sub(1);

    let mut coefficient_residual: f64 = 0.0;
    let mut backshift_residual: f64 = 0.0;
    let mut invariance_residual: f64 = 0.0;
    // span of the basis truncated below the top degree, in weighted coordinates
    let span = CMat::from_columns(
        &basis
            .iter()
            .map(|b| b.to_vector(inner_degree, true))
            .collect::<Vec<_>>(),
    );
    let span_pinv = pseudo_inverse(&span, tol);
    for (k, f) in basis.iter().enumerate() {
        let tf: Vec<BallPoly> = candidate.t.iter().map(|tj| apply_t(basis, tj, k)).collect();
        for n in multi_indices_up_to(d, degree) {
            if n.total() == 0 {
                continue;
            }
            let mut res = f.coeff(&n);
            for (j, g) in tf.iter().enumerate() {
                if let Some(prev) = n.minus_unit(j + 1) {
                    res -= g.coeff(&prev);
                }
            }
            coefficient_residual = coefficient_residual.max(res.norm());
        }
        for (j, g) in tf.iter().enumerate() {
            let back = arveson_backshift(j + 1, f);
            backshift_residual = backshift_residual.max(back.max_coeff_diff(g, inner_degree));
            let target = back.to_vector(inner_degree, true);
            let fit = &span * (&span_pinv * &target);
            invariance_residual = invariance_residual.max((&target - fit).norm());
        }
    }
    let (contractive, contractivity_margin) =
        contractive_on(&candidate.gram, &candidate.c, &candidate.t, tol)?;
    let allowed = scaled_tol(tol, scale);
    Ok(GleasonCheck {
        solves: coefficient_residual <= allowed,
        coefficient_residual,
        contractive,
        contractivity_margin,
        equals_backshift: backshift_residual <= allowed,
        backshift_residual,
        backshift_invariant: invariance_residual <= allowed,
        invariance_residual,
    })
}

/// One Hankel section `H_k = [s_{i+j}]_{i,j=0}^k`.
#[derive(Clone, Debug)]
pub struct HankelSection {
    pub k: usize,
    pub size: usize,
    /// Rank from the scaled singular values.
    pub rank: usize,
    pub smallest_singular_value: f64,
    /// Smallest singular value of `D H_k D`, `D = diag(|H_ii|^{-1/2})`.
    pub smallest_scaled_singular_value: f64,
    /// Rank by exact rational elimination, when exact data was given.
    pub exact_rank: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct HankelReport {
    pub sections: Vec<HankelSection>,
    /// Threshold on scaled singular values used for the numerical rank.
    pub threshold: f64,
    /// Every section through `n` has full numerical rank.
    pub full_rank: bool,
    /// Every section through `n` has full exact rank (when exact data was given).
    pub exact_full_rank: Option<bool>,
}

/// Scaled singular values counted against this threshold.
pub const HANKEL_RANK_THRESHOLD: f64 = 1e-10;

fn hankel(seq: &[f64], k: usize) -> CMat {
    CMat::from_fn(k + 1, k + 1, |i, j| r(seq[i + j]))
}

fn equilibrate(h: &CMat) -> CMat {
    let n = h.nrows();
    let dscale: Vec<f64> = (0..n)
        .map(|i| {
            let a = h[(i, i)].norm();
            if a > 0.0 {
                1.0 / a.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    CMat::from_fn(n, n, |i, j| h[(i, j)] * dscale[i] * dscale[j])
}

/// Ranks and smallest singular values of the Hankel sections `H_0..H_n`.
pub fn hankel_rationality_probe(seq: &[f64], n: usize) -> Result<HankelReport, SpacesError> {
    if seq.len() < 2 * n + 1 {
        return Err(SpacesError::Dimension(format!(
            "need {} terms, got {}",
            2 * n + 1,
            seq.len()
        )));
    }
    let mut sections = Vec::new();
    for k in 0..=n {
        let h = hankel(seq, k);
        let raw = singular_values(&h);
        let scaled = singular_values(&equilibrate(&h));
        let top = scaled.first().copied().unwrap_or(0.0);
        let rank = scaled
            .iter()
            .filter(|&&s| s > HANKEL_RANK_THRESHOLD * top.max(f64::MIN_POSITIVE))
            .count();
        sections.push(HankelSection {
            k,
            size: k + 1,
            rank,
            smallest_singular_value: raw.last().copied().unwrap_or(0.0),
            smallest_scaled_singular_value: scaled.last().copied().unwrap_or(0.0),
            exact_rank: None,
        });
    }
    let full_rank = sections.iter().all(|s| s.rank == s.size);
    Ok(HankelReport {
        sections,
        threshold: HANKEL_RANK_THRESHOLD,
        full_rank,
        exact_full_rank: None,
    })
}

/// As [`hankel_rationality_probe`], also computing exact ranks over the rationals.
pub fn hankel_rationality_probe_exact(
    seq: &[BigRational],
    n: usize,
) -> Result<HankelReport, SpacesError> {
    use num_traits::ToPrimitive;
    let floats: Vec<f64> = seq.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
    let mut report = hankel_rationality_probe(&floats, n)?;
    for s in report.sections.iter_mut() {
        s.exact_rank = Some(exact_hankel_rank(seq, s.k));
    }
    report.exact_full_rank = Some(report.sections.iter().all(|s| s.exact_rank == Some(s.size)));
    Ok(report)
}

/// Rank of `[s_{i+j}]_{i,j=0}^k` by Gaussian elimination over the rationals.
pub fn exact_hankel_rank(seq: &[BigRational], k: usize) -> usize {
    let n = k + 1;
    let mut m: Vec<Vec<BigRational>> = (0..n)
        .map(|i| (0..n).map(|j| seq[i + j].clone()).collect())
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(pivot) = (rank..n).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        for i in rank + 1..n {
            if m[i][col].is_zero() {
                continue;
            }
            let factor = &m[i][col] / &m[rank][col];
            let (top, bottom) = m.split_at_mut(i);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[rank][col..]) {
                *x -= &factor * p;
            }
        }
        rank += 1;
    }
    rank
}

/// `s_k = (k + 1)/(2k + 1)` as exact rationals.
pub fn odd_ratio_sequence(len: usize) -> Vec<BigRational> {
    (0..len)
        .map(|k| BigRational::new(BigInt::from(k + 1), BigInt::from(2 * k + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_words_up_to;
    use crate::numerics::{c, identity, real_matrix};
    use crate::sampling::random_matrix;

    fn scalar(x: f64) -> CVec {
        CVec::from_element(1, r(x))
    }

    fn random_fock(seed: u64, d: usize, depth: usize, k: usize) -> FockPoly {
        let mut rng = seeded(seed);
        let mut f = FockPoly::zero(d, depth, k).unwrap();
        for y in f.coeffs.iter_mut() {
            *y = random_matrix(&mut rng, k, 1).column(0).into_owned();
        }
        f
    }

    #[test]
    fn right_backshift_strips_last_letter() {
        let w = Word::parse(2, "21").unwrap();
        let f = FockPoly::monomial(&w, 3, scalar(1.0)).unwrap();
        let g = right_backshift(1, &f);
        assert_eq!(g.coeff(&Word::parse(2, "2").unwrap()), scalar(1.0));
        assert_eq!(g.norm(), 1.0);
        let one = FockPoly::monomial(&Word::empty(2), 3, scalar(1.0)).unwrap();
        assert_eq!(right_backshift(2, &one).norm(), 0.0);
    }

    #[test]
    fn tau_transposes_and_is_unitary() {
        let w = Word::parse(2, "12").unwrap();
        let f = FockPoly::monomial(&w, 2, scalar(1.0)).unwrap();
        assert_eq!(tau(&f).coeff(&Word::parse(2, "21").unwrap()), scalar(1.0));
        let pal = FockPoly::monomial(&Word::parse(2, "121").unwrap(), 3, scalar(2.0)).unwrap();
        assert_eq!(tau(&pal), pal);
        let f = random_fock(1, 3, 3, 2);
        assert!((tau(&f).norm() - f.norm()).abs() < 1e-13);
        assert_eq!(tau(&tau(&f)), f);
    }

    #[test]
    fn tau_intertwines_backshifts_exactly() {
        let f = random_fock(2, 2, 4, 1);
        for j in 1..=2 {
            assert_eq!(left_backshift(j, &tau(&f)), tau(&right_backshift(j, &f)));
            assert_eq!(right_backshift(j, &tau(&f)), tau(&left_backshift(j, &f)));
            assert_eq!(right_shift(j, &tau(&f)).poly, tau(&left_shift(j, &f).poly));
        }
    }

    #[test]
    fn shift_leaks_at_the_boundary() {
        let f = FockPoly::monomial(&Word::parse(2, "12").unwrap(), 2, scalar(3.0)).unwrap();
        let s = right_shift(1, &f);
        assert!(s.truncated);
        assert!((s.leaked_norm - 3.0).abs() < 1e-15);
        let g = FockPoly::monomial(&Word::parse(2, "1").unwrap(), 2, scalar(3.0)).unwrap();
        assert!(!right_shift(1, &g).truncated);
    }

    #[test]
    fn row_unitarity_identities_on_interior() {
        // I - sum S_j S_j* = E*E on every basis element of depth <= 3
        let (d, depth) = (2, 3);
        for w in enumerate_words_up_to(d, depth).unwrap() {
            let f = FockPoly::monomial(&w, depth, scalar(1.0)).unwrap();
            let mut lhs = f.clone();
            for j in 1..=d {
                let s = right_shift(j, &right_backshift(j, &f));
                assert!(!s.truncated);
                lhs = lhs.combine(&s.poly, r(-1.0));
            }
            let rhs = eval_e_adjoint(d, depth, &eval_e(&f)).unwrap();
            assert_eq!(lhs, rhs);
            // S_i* S_j = δ_ij away from the top level, E S_j = 0
            if w.len() < depth {
                for i in 1..=d {
                    for j in 1..=d {
                        let g = right_backshift(i, &right_shift(j, &f).poly);
                        if i == j {
                            assert_eq!(g, f);
                        } else {
                            assert_eq!(g.norm(), 0.0);
                        }
                    }
                    assert_eq!(eval_e(&right_shift(i, &f).poly).norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn backshift_level_sums_decay() {
        let f = random_fock(3, 2, 5, 1);
        // sum_{|v| = N} ||S*^v f||² is the mass of f at levels >= N
        let mut prev = f.norm_sqr();
        for level in 1..=6 {
            let mass: f64 = (level..=5).map(|l| f.level_norm_sqr(l)).sum();
            assert!(mass <= prev + 1e-12);
            prev = mass;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn arveson_backshift_examples() {
        let f = BallPoly::monomial(&MultiIndex::new(vec![1, 1]), 2, scalar(1.0));
        let g = arveson_backshift(1, &f);
        assert_eq!(g.coeff(&MultiIndex::new(vec![0, 1])), scalar(0.5));
        let one = BallPoly::monomial(&MultiIndex::zero(2), 2, scalar(1.0));
        assert_eq!(arveson_backshift(1, &one).norm(), 0.0);
    }

    #[test]
    fn iterated_backshift_formula() {
        // (M*)^n λ^m = m!|m-n|!/(|m|!(m-n)!) λ^{m-n}
        let m = MultiIndex::new(vec![3, 2]);
        let n = MultiIndex::new(vec![2, 1]);
        let mut f = BallPoly::monomial(&m, 5, scalar(1.0));
        for _ in 0..2 {
            f = arveson_backshift(1, &f);
        }
        f = arveson_backshift(2, &f);
        let expected = (6.0 * 2.0 * 2.0) / (120.0 * 1.0 * 1.0);
        let got = f.coeff(&m.checked_sub(&n).unwrap())[0].re;
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn backshift_observability_is_identity_on_monomials() {
        for n in multi_indices_up_to(2, 5) {
            let f = BallPoly::monomial(&n, 5, scalar(1.0));
            let g = backshift_observability(&f, 5).unwrap();
            assert!(g.max_coeff_diff(&f, 5) < 1e-12, "{n:?}");
        }
    }

    #[test]
    fn nc_obs_poly_of_zero_and_geometric() {
        let p = OutputPair::new(real_matrix(&[&[1.0]]), vec![real_matrix(&[&[0.5]])]).unwrap();
        let f = nc_obs_poly(&p, &scalar(0.0), 4).unwrap();
        assert_eq!(f.norm(), 0.0);
        let f = nc_obs_poly(&p, &scalar(1.0), 30).unwrap();
        assert!((f.norm_sqr() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn model_pair_of_constants() {
        let one = FockPoly::monomial(&Word::empty(2), 2, scalar(1.0)).unwrap();
        let m = model_pair_from_fock_subspace(&[one], 1e-12).unwrap();
        assert!((m.pair.c[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(m.pair.a.iter().all(|a| a[(0, 0)].norm() == 0.0));
    }

    #[test]
    fn model_pair_reproduces_basis() {
        let depth = 3;
        let basis: Vec<FockPoly> = ["", "1", "2"]
            .iter()
            .map(|s| FockPoly::monomial(&Word::parse(2, s).unwrap(), depth, scalar(1.0)).unwrap())
            .collect();
        let m = model_pair_from_fock_subspace(&basis, 1e-12).unwrap();
        for f in &basis {
            let x = m.coordinates(f);
            let g = nc_obs_poly(&m.pair, &x, depth).unwrap();
            assert!(g.combine(f, r(-1.0)).norm() < 1e-12);
        }
        let not_invariant =
            vec![FockPoly::monomial(&Word::parse(2, "1").unwrap(), depth, scalar(1.0)).unwrap()];
        assert!(matches!(
            model_pair_from_fock_subspace(&not_invariant, 1e-12),
            Err(SpacesError::NotInvariant { .. })
        ));
    }

    #[test]
    fn gleason_on_span_one_lambda() {
        let a = c(0.0, 2.0);
        let pair = OutputPair::new(
            real_matrix(&[&[1.0, 0.0, 0.0]]),
            vec![
                CMat::from_row_slice(
                    3,
                    3,
                    &[
                        r(0.0),
                        r(1.0),
                        r(0.0),
                        r(0.0),
                        r(0.0),
                        r(0.0),
                        a,
                        r(0.0),
                        r(0.0),
                    ],
                ),
                CMat::from_row_slice(
                    3,
                    3,
                    &[
                        r(0.0),
                        r(0.0),
                        r(1.0),
                        -a,
                        r(0.0),
                        r(0.0),
                        r(0.0),
                        r(0.0),
                        r(0.0),
                    ],
                ),
            ],
        )
        .unwrap();
        let g = gleason_from_pair(&pair, 6, 1e-9).unwrap();
        assert!((&g.gram - identity(3)).norm() < 1e-12);
        assert!(g.sample_residual < 1e-12);
        assert!(!g.contractive);
        let chk = gleason_check(&g, 1e-9).unwrap();
        assert!(chk.solves && !chk.contractive && !chk.equals_backshift);
    }

    #[test]
    fn hankel_examples() {
        let geometric: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let rep = hankel_rationality_probe(&geometric, 6).unwrap();
        assert!(rep.sections.iter().all(|s| s.rank == 1));
        let linear: Vec<f64> = (0..20).map(|k| (k + 1) as f64).collect();
        let rep = hankel_rationality_probe(&linear, 6).unwrap();
        assert!(rep.sections.iter().skip(1).all(|s| s.rank == 2));
        let exact = hankel_rationality_probe_exact(&odd_ratio_sequence(17), 8).unwrap();
        assert_eq!(exact.exact_full_rank, Some(true));
    }
}
