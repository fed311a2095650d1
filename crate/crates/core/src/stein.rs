//! Observability gramians (word and abelianized), Stein equations and
//! inequalities, strong stability and observability classification.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::combinatorics::{
    abelianize, enumerate_words_up_to, multi_indices_of_degree, multinomial_weight_capped,
    CombinatoricsError, MultiIndex, Word,
};
use crate::numerics::{
    concat_columns, hermitian_factor, hermitian_inverse, hermitian_spectrum, identity,
    null_space_basis, psd_check, r, range_basis, scaled_tol, solve_sylvester_vectorized,
    spectral_norm, zeros, CMat, HermitianVerdict, NumericsError, SteinOperator,
};
use crate::systems::{OutputPair, SystemsError};

/// Levels of the ratio window used by the geometric tail certificate.
pub const CERTIFICATE_WINDOW: usize = 5;
/// Partial sums beyond this multiple of `||C*C||` count as divergence.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Levels after which a series with no ratio certificate is declared divergent.
pub const UNCERTIFIED_LEVEL_LIMIT: usize = 60;
/// Default cap on the number of levels summed.
pub const DEFAULT_MAX_LEVEL: usize = 400;
/// Exact weights are computed for total degrees up to this bound.
const WEIGHT_CAP: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteinError {
    #[error("pair is not contractive: I - ΣA*A - C*C has eigenvalue {min_eigenvalue:e}")]
    NotContractive { min_eigenvalue: f64 },
    #[error("gramian series has not converged ({0})")]
    NotConverged(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// `X -> sum_j A_j* X A_j`
pub fn cp_apply(a: &[CMat], x: &CMat) -> CMat {
    let m = a.first().map(|m| m.ncols()).unwrap_or(0);
    let mut out = zeros(m, m);
    for aj in a {
        out += aj.adjoint() * x * aj;
    }
    out
}

/// The completely positive map `X -> sum_j A_j* X A_j` with its tuple.
#[derive(Clone, Debug)]
pub struct CpMap {
    pub a: Vec<CMat>,
}

impl CpMap {
    pub fn new(a: Vec<CMat>) -> Self {
        CpMap { a }
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        cp_apply(&self.a, x)
    }

    pub fn power(&self, x: &CMat, n: usize) -> CMat {
        (0..n).fold(x.clone(), |acc, _| self.apply(&acc))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesVerdict {
    Converged,
    Divergent,
    Inconclusive,
}

impl SeriesVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesVerdict::Converged => "converged",
            SeriesVerdict::Divergent => "divergent",
            SeriesVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Partial sum of a gramian series with its convergence diagnostics.
#[derive(Clone, Debug)]
pub struct GramianReport {
    pub value: CMat,
    /// Index of the last level added.
    pub levels_used: usize,
    /// `sigma_N`, the norm of each level term.
    pub level_norms: Vec<f64>,
    /// Norm of the partial sum after each level.
    pub partial_sum_norms: Vec<f64>,
    /// Norm of the last level term.
    pub tail_estimate: f64,
    /// Largest ratio in the certificate window, when below one.
    pub certified_ratio: Option<f64>,
    /// Geometric bound on the neglected remainder, when certified.
    pub tail_bound: Option<f64>,
    pub verdict: SeriesVerdict,
    /// `||G - Φ(G) - C*C||`, reported for the word gramian only.
    pub stein_residual: Option<f64>,
    pub tolerance: f64,
}

impl GramianReport {
    pub fn converged(&self) -> bool {
        self.verdict == SeriesVerdict::Converged
    }
}

/// Ratio certificate over the last [`CERTIFICATE_WINDOW`] levels.
fn ratio_certificate(sigmas: &[f64]) -> Option<f64> {
    if sigmas.len() < CERTIFICATE_WINDOW + 1 {
        return None;
    }
    let tail = &sigmas[sigmas.len() - CERTIFICATE_WINDOW - 1..];
    let mut worst: f64 = 0.0;
    for pair in tail.windows(2) {
        if pair[0] <= 0.0 {
            return None;
        }
        worst = worst.max(pair[1] / pair[0]);
    }
    (worst < 1.0).then_some(worst)
}

/// Sums level terms produced by `next_level` until the certificate, the
/// blow-up threshold or the level cap decides.
fn sum_series(
    scale: f64,
    max_level: usize,
    tol: f64,
    dim: usize,
    mut next_level: impl FnMut(usize) -> CMat,
) -> GramianReport {
    let mut value = zeros(dim, dim);
    let mut level_norms = Vec::new();
    let mut partial_sum_norms = Vec::new();
    let threshold = tol * scale;
    let mut verdict = SeriesVerdict::Inconclusive;
    let mut certified_ratio = None;
    let mut tail_bound = None;
    let mut levels_used = 0;
    for level in 0..=max_level {
        let term = next_level(level);
        let sigma = spectral_norm(&term);
        value += &term;
        level_norms.push(sigma);
        let total = spectral_norm(&value);
        partial_sum_norms.push(total);
        levels_used = level;
        if !total.is_finite() || total > BLOWUP_FACTOR * scale.max(f64::MIN_POSITIVE) {
            verdict = SeriesVerdict::Divergent;
            break;
        }
        if sigma == 0.0 {
            // every later level is built from this one, so the remainder vanishes
            certified_ratio = Some(0.0);
            tail_bound = Some(0.0);
            verdict = SeriesVerdict::Converged;
            break;
        }
        certified_ratio = ratio_certificate(&level_norms);
        tail_bound = certified_ratio.map(|q| sigma * q / (1.0 - q));
        if let Some(bound) = tail_bound {
            if sigma <= threshold && bound <= threshold {
                verdict = SeriesVerdict::Converged;
                break;
            }
        }
        if level + 1 >= UNCERTIFIED_LEVEL_LIMIT && certified_ratio.is_none() {
            verdict = SeriesVerdict::Divergent;
            break;
        }
    }
    let tail_estimate = level_norms.last().copied().unwrap_or(0.0);
    GramianReport {
        value,
        levels_used,
        level_norms,
        partial_sum_norms,
        tail_estimate,
        certified_ratio,
        tail_bound,
        verdict,
        stein_residual: None,
        tolerance: threshold,
    }
}

/// `sum_N Φ^N(X)` for a PSD seed `X`.
pub fn cp_series(a: &[CMat], seed: &CMat, max_level: usize, tol: f64) -> GramianReport {
    let scale = spectral_norm(seed);
    let m = seed.nrows();
    if scale == 0.0 {
        return sum_series(1.0, 0, tol, m, |_| zeros(m, m));
    }
    let mut current = seed.clone();
    sum_series(scale, max_level, tol, m, |level| {
        if level > 0 {
            current = cp_apply(a, &current);
        }
        current.clone()
    })
}

/// The word gramian `sum_v (A^v)* C*C A^v`, summed by level.
pub fn nc_gramian(pair: &OutputPair, max_level: usize, tol: f64) -> GramianReport {
    let cc = pair.c.adjoint() * &pair.c;
    let mut report = cp_series(&pair.a, &cc, max_level, tol);
    let g = &report.value;
    report.stein_residual = Some(spectral_norm(&(g - cp_apply(&pair.a, g) - &cc)));
    report
}

/// Table of the fiber sums `W(n) = sum_{a(u) = n} A^u`.
#[derive(Clone, Debug)]
pub struct AbelianPowerTable {
    pub depth: usize,
    pub table: BTreeMap<MultiIndex, CMat>,
}

impl AbelianPowerTable {
    pub fn get(&self, n: &MultiIndex) -> Option<&CMat> {
        self.table.get(n)
    }
}

/// Fills `W(0) = I`, `W(n) = sum_i W(n - e_i) A_i`.
pub fn abelian_power_table(a: &[CMat], depth: usize) -> AbelianPowerTable {
    let d = a.len();
    let m = a[0].nrows();
    let mut table = BTreeMap::new();
    table.insert(MultiIndex::zero(d), identity(m));
    for total in 1..=depth {
        for n in multi_indices_of_degree(d, total) {
            let mut acc = zeros(m, m);
            for i in 1..=d {
                if let Some(prev) = n.minus_unit(i) {
                    acc += &table[&prev] * &a[i - 1];
                }
            }
            table.insert(n, acc);
        }
    }
    AbelianPowerTable { depth, table }
}

/// Rows `C W(n)` for `|n| = level`, generated level by level.
struct AbelianRows<'a> {
    pair: &'a OutputPair,
    current: BTreeMap<MultiIndex, CMat>,
    level: usize,
}

impl<'a> AbelianRows<'a> {
    fn new(pair: &'a OutputPair) -> Self {
        let mut current = BTreeMap::new();
        current.insert(MultiIndex::zero(pair.d()), pair.c.clone());
        AbelianRows {
            pair,
            current,
            level: 0,
        }
    }

    fn advance(&mut self) {
        let d = self.pair.d();
        let mut next = BTreeMap::new();
        for n in multi_indices_of_degree(d, self.level + 1) {
            let mut acc = zeros(self.pair.output_dim(), self.pair.state_dim());
            for i in 1..=d {
                if let Some(prev) = n.minus_unit(i) {
                    acc += &self.current[&prev] * &self.pair.a[i - 1];
                }
            }
            next.insert(n, acc);
        }
        self.current = next;
        self.level += 1;
    }
}

/// `C W(n)` for all `|n| <= depth`, in degree order.
pub fn abelian_rows(pair: &OutputPair, depth: usize) -> Vec<(MultiIndex, CMat)> {
    let mut rows = AbelianRows::new(pair);
    let mut out: Vec<(MultiIndex, CMat)> = rows
        .current
        .iter()
        .map(|(n, m)| (n.clone(), m.clone()))
        .collect();
    for _ in 0..depth {
        rows.advance();
        out.extend(rows.current.iter().map(|(n, m)| (n.clone(), m.clone())));
    }
    out
}

/// `C A^v` for all `|v| <= depth`, in graded word order.
pub fn word_rows(pair: &OutputPair, depth: usize) -> Result<Vec<(Word, CMat)>, SteinError> {
    let words = enumerate_words_up_to(pair.d(), depth)?;
    let mut rows: Vec<CMat> = Vec::with_capacity(words.len());
    for w in &words {
        let row = match w.last() {
            None => pair.c.clone(),
            Some(j) => &rows[w.strip_last(j).unwrap().index()] * &pair.a[j - 1],
        };
        rows.push(row);
    }
    Ok(words.into_iter().zip(rows).collect())
}

/// Arveson weight `n!/|n|!` from exact integers.
pub fn arveson_weight(n: &MultiIndex) -> f64 {
    multinomial_weight_capped(n, WEIGHT_CAP)
        .map(|w| w.reciprocal())
        .unwrap_or_else(|_| 1.0 / crate::combinatorics::multinomial_f64(n))
}

/// The abelianized gramian `sum_n (n!/|n|!) W(n)* C*C W(n)`, by total degree.
/// No Stein residual is attached: this gramian satisfies only the reverse
/// inequality.
pub fn ab_gramian(pair: &OutputPair, max_degree: usize, tol: f64) -> GramianReport {
    let cc = pair.c.adjoint() * &pair.c;
    let scale = spectral_norm(&cc);
    let m = pair.state_dim();
    if scale == 0.0 {
        return sum_series(1.0, 0, tol, m, |_| zeros(m, m));
    }
    let mut rows = AbelianRows::new(pair);
    sum_series(scale, max_degree, tol, m, |level| {
        if level > 0 {
            rows.advance();
        }
        let mut term = zeros(m, m);
        for (n, row) in &rows.current {
            term += row.adjoint() * row * r(arveson_weight(n));
        }
        term
    })
}

/// `C*C - G^a + Φ(G^a)` and its companions.
#[derive(Clone, Debug)]
pub struct ReverseSteinReport {
    /// `Q = C*C - G^a + Φ(G^a)`, PSD by the reverse Stein inequality.
    pub residual: CMat,
    pub verdict: HermitianVerdict,
    /// `G^a - Φ(G^a) - C*C = -Q`.
    pub complementary: CMat,
    /// `G^a - Φ(G^a)`.
    pub stein_difference: CMat,
}

pub fn reverse_stein_residual(
    pair: &OutputPair,
    gramian: &GramianReport,
    tol: f64,
) -> Result<ReverseSteinReport, SteinError> {
    if !gramian.converged() {
        return Err(SteinError::NotConverged(gramian.verdict.as_str().into()));
    }
    let cc = pair.c.adjoint() * &pair.c;
    let stein_difference = &gramian.value - cp_apply(&pair.a, &gramian.value);
    let residual = &cc - &stein_difference;
    let verdict = psd_check(&residual, tol)?;
    Ok(ReverseSteinReport {
        complementary: -&residual,
        residual,
        verdict,
        stein_difference,
    })
}

fn factorial(k: usize) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `n!/N!` as a float via exact rationals.
fn factorial_ratio(n: &MultiIndex, total: usize) -> f64 {
    let num = n
        .entries()
        .iter()
        .fold(BigUint::one(), |acc, &k| acc * factorial(k));
    BigRational::new(num.into(), factorial(total).into())
        .to_f64()
        .unwrap_or(0.0)
}

/// Per-multi-index PSD blocks whose sum is the reverse-Stein residual.
#[derive(Clone, Debug)]
pub struct ReverseSteinCertificate {
    pub depth: usize,
    pub blocks: Vec<(MultiIndex, CMat)>,
    /// Largest `||R_{n,i,j}||` seen.
    pub max_r_norm: f64,
    pub sum: CMat,
}

/// Builds `S_n = sum_{i != j} 1/2 (n - e_i - e_j)!/N! R*R` with
/// `R = C[n_i W(n - e_j) A_j - n_j W(n - e_i) A_i]` for `1 <= |n| <= depth`.
pub fn reverse_stein_certificate(pair: &OutputPair, depth: usize) -> ReverseSteinCertificate {
    let d = pair.d();
    let m = pair.state_dim();
    let mut rows = AbelianRows::new(pair);
    let mut blocks = Vec::new();
    let mut sum = zeros(m, m);
    let mut max_r_norm: f64 = 0.0;
    for total in 1..=depth {
        // rows.current holds C W(n) for |n| = total - 1
        for n in multi_indices_of_degree(d, total) {
            let mut block = zeros(m, m);
            for i in 1..=d {
                for j in 1..=d {
                    if i == j || n.get(i) == 0 || n.get(j) == 0 {
                        continue;
                    }
                    let ni = r(n.get(i) as f64);
                    let nj = r(n.get(j) as f64);
                    let w_j = &rows.current[&n.minus_unit(j).unwrap()];
                    let w_i = &rows.current[&n.minus_unit(i).unwrap()];
                    let rr = w_j * &pair.a[j - 1] * ni - w_i * &pair.a[i - 1] * nj;
                    max_r_norm = max_r_norm.max(spectral_norm(&rr));
                    let reduced = n.minus_unit(i).unwrap().minus_unit(j).unwrap();
                    let coef = 0.5 * factorial_ratio(&reduced, total);
                    block += rr.adjoint() * &rr * r(coef);
                }
            }
            sum += &block;
            blocks.push((n, block));
        }
        rows.advance();
    }
    ReverseSteinCertificate {
        depth,
        blocks,
        max_r_norm,
        sum,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteinSolveMode {
    Equation,
    StrictlyPositiveSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Unstable => "unstable",
            StabilityVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// `sigma_N = ||Φ^N(H)||` with a classification.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub levels: Vec<f64>,
    pub verdict: StabilityVerdict,
    /// Last iterate `Φ^K(H)`, the estimate of the strong limit.
    pub delta: CMat,
    pub certified_ratio: Option<f64>,
}

/// Strong stability test through the iterates `Φ^N(H)` (default `H = I`).
pub fn strong_stability(
    a: &[CMat],
    h: Option<&CMat>,
    max_level: usize,
    tol: f64,
) -> StabilityReport {
    let m = a[0].nrows();
    let mut current = h.cloned().unwrap_or_else(|| identity(m));
    let sigma0 = spectral_norm(&current);
    let mut levels = vec![sigma0];
    if sigma0 == 0.0 {
        return StabilityReport {
            levels,
            verdict: StabilityVerdict::Stable,
            delta: current,
            certified_ratio: Some(0.0),
        };
    }
    let mut certified_ratio = None;
    for _ in 0..max_level {
        current = cp_apply(a, &current);
        let sigma = spectral_norm(&current);
        levels.push(sigma);
        if sigma == 0.0 {
            return StabilityReport {
                levels,
                verdict: StabilityVerdict::Stable,
                delta: current,
                certified_ratio: Some(0.0),
            };
        }
        if !sigma.is_finite() || sigma > BLOWUP_FACTOR * sigma0 {
            return StabilityReport {
                levels,
                verdict: StabilityVerdict::Unstable,
                delta: current,
                certified_ratio: None,
            };
        }
        certified_ratio = ratio_certificate(&levels);
        if certified_ratio.is_some() && sigma <= tol * sigma0 {
            return StabilityReport {
                levels,
                verdict: StabilityVerdict::Stable,
                delta: current,
                certified_ratio,
            };
        }
    }
    let last = *levels.last().unwrap();
    let verdict = if last >= sigma0 * (1.0 - tol) {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::Inconclusive
    };
    StabilityReport {
        levels,
        verdict,
        delta: current,
        certified_ratio,
    }
}

/// Similarity to a contractive pair found by the strictly positive search.
#[derive(Clone, Debug)]
pub struct ContractiveSimilarity {
    pub delta: f64,
    pub h: CMat,
    /// `S` with `H = S* S`.
    pub s: CMat,
    /// `(C S^{-1}, S A_j S^{-1})`
    pub pair: OutputPair,
    /// Minimum eigenvalue of `I - sum Ã_j* Ã_j - C̃* C̃`.
    pub contractivity_margin: f64,
}

#[derive(Clone, Debug)]
pub struct SteinSolveReport {
    pub mode: SteinSolveMode,
    /// Equation mode: the minimum-norm solution of `H - Φ(H) = C*C`.
    pub solution: Option<CMat>,
    pub residual: f64,
    pub null_space_dim: usize,
    /// Minimum eigenvalue of the solution, when one exists.
    pub solution_min_eigenvalue: Option<f64>,
    /// Hypotheses in force, recorded alongside the uniqueness claim.
    pub contractive: bool,
    pub strongly_stable: StabilityVerdict,
    pub unique: bool,
    /// Search mode: the `δ` values tried, in order.
    pub deltas_tried: Vec<f64>,
    pub similarity: Option<ContractiveSimilarity>,
}

/// `δ` values tried by the strictly positive search.
pub const SEARCH_DELTAS: [f64; 7] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

pub fn stein_solve(
    pair: &OutputPair,
    mode: SteinSolveMode,
    tol: f64,
) -> Result<SteinSolveReport, SteinError> {
    let m = pair.state_dim();
    let cc = pair.c.adjoint() * &pair.c;
    let contractive = psd_check(&pair.contractivity_defect(), tol)?.is_psd;
    let strongly_stable = strong_stability(&pair.a, None, DEFAULT_MAX_LEVEL, tol).verdict;
    let mut report = SteinSolveReport {
        mode,
        solution: None,
        residual: f64::NAN,
        null_space_dim: 0,
        solution_min_eigenvalue: None,
        contractive,
        strongly_stable,
        unique: false,
        deltas_tried: Vec::new(),
        similarity: None,
    };
    match mode {
        SteinSolveMode::Equation => {
            let solve = solve_sylvester_vectorized(&SteinOperator::from_tuple(&pair.a), &cc, tol)?;
            report.residual = solve.residual;
            report.null_space_dim = solve.null_space_dim;
            report.unique = solve.null_space_dim == 0;
            report.solution_min_eigenvalue = solve
                .solution
                .as_ref()
                .map(|h| hermitian_spectrum(h).values.first().copied().unwrap_or(0.0));
            report.solution = solve.solution;
        }
        SteinSolveMode::StrictlyPositiveSearch => {
            for &delta in &SEARCH_DELTAS {
                report.deltas_tried.push(delta);
                let seed = &cc + identity(m) * r(delta);
                let series = cp_series(&pair.a, &seed, DEFAULT_MAX_LEVEL, tol * 1e-3);
                if !series.converged() {
                    break;
                }
                let h = series.value;
                let spec = hermitian_spectrum(&h);
                if spec.values[0] <= scaled_tol(tol, spec.values[m - 1]) {
                    break;
                }
                let s = hermitian_factor(&h, tol)?;
                let Some(s_inv) = s.clone().try_inverse() else {
                    break;
                };
                let similar = pair.similar(&s, &s_inv);
                let margin = hermitian_spectrum(&similar.contractivity_defect()).values[0];
                if margin < -scaled_tol(tol, 1.0) {
                    break;
                }
                report.residual = spectral_norm(&(&h - cp_apply(&pair.a, &h) - &seed));
                report.solution = Some(h.clone());
                report.solution_min_eigenvalue = Some(spec.values[0]);
                report.similarity = Some(ContractiveSimilarity {
                    delta,
                    h,
                    s,
                    pair: similar,
                    contractivity_margin: margin,
                });
            }
        }
    }
    Ok(report)
}

/// Observability verdicts for both flavors.
#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub exactly_observable: bool,
    pub a_observable: bool,
    pub exactly_a_observable: bool,
    /// Orthonormal columns spanning `Ker O = ∩_v Ker C A^v`.
    pub unobservable_basis: CMat,
    /// Orthonormal columns spanning `∩_n Ker C W(n)` (through the truncation).
    pub a_unobservable_basis: CMat,
    /// `dim span{C A^v : |v| <= k}` for `k = 0, 1, ...` until stabilization.
    pub rank_by_length: Vec<usize>,
    /// `dim span{C W(n) : |n| <= k}` for `k` up to the truncation.
    pub a_rank_by_degree: Vec<usize>,
    /// Degree from which the abelianized span stopped growing.
    pub a_span_stabilized_at: usize,
    /// `max ||C W(n) x||` over unit `x` in the word kernel; zero when the
    /// word kernel sits inside the abelianized one.
    pub kernel_containment_residual: f64,
    pub kernel_contained: bool,
    pub nc_gramian: GramianReport,
    pub ab_gramian: GramianReport,
}

/// `span{C A^v : |v| <= k}` grown until a level adds nothing. Returns the
/// orthonormal row basis (as columns of the adjoint) and the rank history.
pub fn observability_span(pair: &OutputPair, tol: f64) -> (CMat, Vec<usize>) {
    let m = pair.state_dim();
    let mut basis = range_basis(&pair.c.adjoint(), tol);
    let mut ranks = vec![basis.ncols()];
    loop {
        if basis.ncols() == m || basis.ncols() == 0 {
            break;
        }
        // rows r A_j  <->  columns A_j* r*
        let mut cols = basis.clone();
        for aj in &pair.a {
            let extra = aj.adjoint() * &basis;
            cols = concat_columns(&cols, &extra);
        }
        let next = range_basis(&cols, tol);
        let grew = next.ncols() > basis.ncols();
        basis = next;
        if !grew {
            break;
        }
        ranks.push(basis.ncols());
    }
    (basis, ranks)
}

/// Orthonormal basis of `span{(C W(n))* : |n| <= depth}` and its rank history.
pub fn abelian_observability_span(pair: &OutputPair, depth: usize, tol: f64) -> (CMat, Vec<usize>) {
    let m = pair.state_dim();
    let mut rows = AbelianRows::new(pair);
    let mut basis = zeros(m, 0);
    let mut ranks = Vec::new();
    for level in 0..=depth {
        if level > 0 {
            rows.advance();
        }
        let mut cols = basis.clone();
        for row in rows.current.values() {
            cols = concat_columns(&cols, &row.adjoint());
        }
        basis = range_basis(&cols, tol);
        ranks.push(basis.ncols());
    }
    (basis, ranks)
}

pub fn observability_analysis(
    pair: &OutputPair,
    truncation: usize,
    tol: f64,
) -> ObservabilityReport {
    let m = pair.state_dim();
    let (span, rank_by_length) = observability_span(pair, tol);
    let unobservable_basis = crate::numerics::orthogonal_complement(&span, m, tol);
    let (a_span, a_rank_by_degree) = abelian_observability_span(pair, truncation.max(1), tol);
    let a_unobservable_basis = crate::numerics::orthogonal_complement(&a_span, m, tol);
    let final_rank = *a_rank_by_degree.last().unwrap_or(&0);
    let a_span_stabilized_at = a_rank_by_degree
        .iter()
        .position(|&k| k == final_rank)
        .unwrap_or(0);

    let mut kernel_containment_residual: f64 = 0.0;
    if unobservable_basis.ncols() > 0 {
        let mut rows = AbelianRows::new(pair);
        for level in 0..=truncation.max(1) {
            if level > 0 {
                rows.advance();
            }
            for row in rows.current.values() {
                kernel_containment_residual =
                    kernel_containment_residual.max(spectral_norm(&(row * &unobservable_basis)));
            }
        }
    }
    let c_scale = spectral_norm(&pair.c);

    let nc = nc_gramian(pair, DEFAULT_MAX_LEVEL, tol);
    let ab = ab_gramian(pair, DEFAULT_MAX_LEVEL.min(120), tol);
    let strictly_positive = |g: &GramianReport| {
        g.converged() && {
            let spec = hermitian_spectrum(&g.value);
            spec.values[0] > scaled_tol(tol, spec.values[m - 1])
        }
    };
    ObservabilityReport {
        observable: unobservable_basis.ncols() == 0,
        exactly_observable: strictly_positive(&nc),
        a_observable: a_unobservable_basis.ncols() == 0,
        exactly_a_observable: strictly_positive(&ab),
        unobservable_basis,
        a_unobservable_basis,
        rank_by_length,
        a_rank_by_degree,
        a_span_stabilized_at,
        kernel_contained: kernel_containment_residual <= scaled_tol(tol, c_scale),
        kernel_containment_residual,
        nc_gramian: nc,
        ab_gramian: ab,
    }
}

/// Projection onto `(Ker O)^⊥` analysis for a contractive pair.
#[derive(Clone, Debug)]
pub struct QSteinReport {
    pub q: CMat,
    /// Verdict on `Q - Φ(Q) - C*C`.
    pub inequality: HermitianVerdict,
    pub equality_residual: f64,
    pub equality_holds: bool,
    /// `Q - G ⪰ 0`, when the word gramian converged.
    pub gramian_below_q: Option<bool>,
    pub q_below_identity: bool,
    pub kernel_dim: usize,
    /// `||P_{Ker^⊥} A_j P_{Ker}||`: zero because the kernel is invariant.
    pub lower_left_residual: f64,
    /// `max_j ||P_{Ker} A_j P_{Ker^⊥}||`, the blocks `A_{j2}`.
    pub upper_right_norm: f64,
    /// `||I - sum A0_j* A0_j - C0* C0||` for the restricted pair.
    pub restricted_isometry_residual: f64,
    pub restricted_isometric: bool,
}

pub fn q_stein_analysis(pair: &OutputPair, tol: f64) -> Result<QSteinReport, SteinError> {
    let defect = psd_check(&pair.contractivity_defect(), tol)?;
    if !defect.is_psd {
        return Err(SteinError::NotContractive {
            min_eigenvalue: defect.min_eigenvalue,
        });
    }
    let m = pair.state_dim();
    let (span, _) = observability_span(pair, tol);
    let kernel = null_space_basis(&span.adjoint(), tol);
    let q = &span * span.adjoint();
    let cc = pair.c.adjoint() * &pair.c;
    let stein = &q - cp_apply(&pair.a, &q) - &cc;
    let inequality = psd_check(&stein, tol)?;
    let equality_residual = spectral_norm(&stein);
    let equality_holds = equality_residual <= scaled_tol(tol, 1.0);

    let nc = nc_gramian(pair, DEFAULT_MAX_LEVEL, tol);
    let gramian_below_q = nc
        .converged()
        .then(|| psd_check(&(&q - &nc.value), tol).map(|v| v.is_psd))
        .transpose()?;
    let q_below_identity = psd_check(&(identity(m) - &q), tol)?.is_psd;

    let mut lower_left_residual: f64 = 0.0;
    let mut upper_right_norm: f64 = 0.0;
    let mut restricted = identity(span.ncols()) - (&pair.c * &span).adjoint() * (&pair.c * &span);
    for aj in &pair.a {
        if kernel.ncols() > 0 {
            lower_left_residual =
                lower_left_residual.max(spectral_norm(&(span.adjoint() * aj * &kernel)));
            upper_right_norm =
                upper_right_norm.max(spectral_norm(&(kernel.adjoint() * aj * &span)));
        }
        let a0 = span.adjoint() * aj * &span;
        restricted -= a0.adjoint() * &a0;
    }
    let restricted_isometry_residual = spectral_norm(&restricted);
    Ok(QSteinReport {
        q,
        inequality,
        equality_residual,
        equality_holds,
        gramian_below_q,
        q_below_identity,
        kernel_dim: kernel.ncols(),
        lower_left_residual,
        upper_right_norm,
        restricted_isometric: restricted_isometry_residual <= scaled_tol(tol, 1.0),
        restricted_isometry_residual,
    })
}

/// `max_{|v| <= depth} ||C A^v - C W(a(v)) / |a^{-1}(a(v))|||`; zero exactly
/// when `C A^v` depends only on the letter counts of `v` up to that depth.
pub fn c_abelian_defect(pair: &OutputPair, depth: usize) -> Result<f64, SteinError> {
    let table = abelian_power_table(&pair.a, depth);
    let mut worst: f64 = 0.0;
    for (w, row) in word_rows(pair, depth)? {
        let n = abelianize(&w);
        let count = crate::combinatorics::multinomial_weight(&n)?.value;
        let mean = &pair.c * &table.table[&n] * r(1.0 / count);
        worst = worst.max(spectral_norm(&(&row - mean)));
    }
    Ok(worst)
}

/// Inverse of a strictly positive gramian, refusing near-singular input.
pub fn gramian_inverse(g: &CMat, min_eigenvalue: f64) -> Option<CMat> {
    let spec = hermitian_spectrum(g);
    if spec.values.first().copied().unwrap_or(0.0) <= min_eigenvalue {
        return None;
    }
    hermitian_inverse(g)
}
