//! Positive kernels of output pairs, the Arveson kernel, lifted inner
//! products, and matching algorithms for unitary equivalence and containment.

use num_complex::Complex64;
use thiserror::Error;

use crate::combinatorics::Word;
use crate::numerics::{
    concat_columns, concat_rows, hermitian_inverse, hermitian_spectrum, identity, psd_check,
    pseudo_inverse, range_basis, scaled_tol, spectral_norm, zeros, CMat, CVec, HermitianVerdict,
    NumericsError,
};
use crate::stein::{
    ab_gramian, abelian_observability_span, abelian_rows, observability_span, strong_stability,
    word_rows, StabilityVerdict, SteinError, DEFAULT_MAX_LEVEL,
};
use crate::systems::{is_commutative, resolvent, tuple_power_word, Mode, OutputPair, SystemsError};

/// Below this eigenvalue of `G^a` the inverse-gramian kernel is refused.
pub const INVERSE_GRAMIAN_FLOOR: f64 = 1e-8;
/// Residual allowed in the matching verifications.
pub const MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelsError {
    #[error("weight H is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    IndefiniteWeight { min_eigenvalue: f64 },
    #[error(
        "abelianized gramian is not strictly positive (minimum eigenvalue {min_eigenvalue:e})"
    )]
    SingularGramian { min_eigenvalue: f64 },
    #[error("operation needs the {expected} flavor")]
    WrongFlavor { expected: &'static str },
    #[error("point pair lies on or outside the boundary: |<λ, ζ>| = {inner_abs}")]
    Boundary { inner_abs: f64 },
    #[error("{which} pair is not observable (rank {rank} of {dim})")]
    Unobservable {
        which: &'static str,
        rank: usize,
        dim: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Stein(#[from] SteinError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFlavor {
    Noncommutative,
    Commutative,
    /// Commutative kernel with `H = (G^a)^{-1}`.
    CommutativeInverseGramian,
}

/// A pair with a PSD weight, selecting one of the kernels it defines.
#[derive(Clone, Debug)]
pub struct KernelHandle {
    pub pair: OutputPair,
    pub h: CMat,
    pub flavor: KernelFlavor,
}

impl KernelHandle {
    /// `h = None` means `H = I`; the inverse-gramian flavor ignores `h`.
    pub fn new(
        pair: OutputPair,
        h: Option<CMat>,
        flavor: KernelFlavor,
        tol: f64,
    ) -> Result<Self, KernelsError> {
        let m = pair.state_dim();
        let h = match flavor {
            KernelFlavor::CommutativeInverseGramian => {
                let ga = ab_gramian(&pair, DEFAULT_MAX_LEVEL, tol * 1e-3);
                if !ga.converged() {
                    return Err(SteinError::NotConverged(ga.verdict.as_str().into()).into());
                }
                let min_eigenvalue = hermitian_spectrum(&ga.value).values[0];
                if min_eigenvalue <= INVERSE_GRAMIAN_FLOOR {
                    return Err(KernelsError::SingularGramian { min_eigenvalue });
                }
                hermitian_inverse(&ga.value)
                    .ok_or(KernelsError::SingularGramian { min_eigenvalue })?
            }
            _ => h.unwrap_or_else(|| identity(m)),
        };
        if h.shape() != (m, m) {
            return Err(KernelsError::Dimension(format!(
                "H is {}x{}, state dimension is {m}",
                h.nrows(),
                h.ncols()
            )));
        }
        let verdict = psd_check(&h, tol)?;
        if !verdict.is_psd {
            return Err(KernelsError::IndefiniteWeight {
                min_eigenvalue: verdict.min_eigenvalue,
            });
        }
        Ok(KernelHandle { pair, h, flavor })
    }
}

/// Coefficient of `z^α w^{β^T}`: `C A^α H (A^β)* C*`.
pub fn nc_kernel_coeff(kh: &KernelHandle, alpha: &Word, beta: &Word) -> Result<CMat, KernelsError> {
    if kh.flavor != KernelFlavor::Noncommutative {
        return Err(KernelsError::WrongFlavor {
            expected: "noncommutative",
        });
    }
    let p = &kh.pair;
    Ok(&p.c
        * tuple_power_word(&p.a, alpha)
        * &kh.h
        * tuple_power_word(&p.a, beta).adjoint()
        * p.c.adjoint())
}

/// Block matrix `[C A^α H (A^β)* C*]` over all words of length `<= depth`.
pub fn nc_kernel_coefficient_gram(kh: &KernelHandle, depth: usize) -> Result<CMat, KernelsError> {
    if kh.flavor != KernelFlavor::Noncommutative {
        return Err(KernelsError::WrongFlavor {
            expected: "noncommutative",
        });
    }
    let rows = word_rows(&kh.pair, depth)?;
    let stacked = rows
        .iter()
        .fold(zeros(0, kh.pair.state_dim()), |acc, (_, row)| {
            concat_rows(&acc, row)
        });
    Ok(&stacked * &kh.h * stacked.adjoint())
}

/// `C (I - Z(λ)A)^{-1} H (I - A* Z(ζ)*)^{-1} C*`.
pub fn ab_kernel_eval(
    kh: &KernelHandle,
    lambda: &[Complex64],
    zeta: &[Complex64],
) -> Result<CMat, KernelsError> {
    if kh.flavor == KernelFlavor::Noncommutative {
        return Err(KernelsError::WrongFlavor {
            expected: "commutative",
        });
    }
    let p = &kh.pair;
    let left = &p.c * resolvent(&p.a, lambda)?;
    let right = &p.c * resolvent(&p.a, zeta)?;
    Ok(left * &kh.h * right.adjoint())
}

/// `1/(1 - <λ, ζ>)`.
pub fn arveson_kernel(lambda: &[Complex64], zeta: &[Complex64]) -> Result<Complex64, KernelsError> {
    if lambda.len() != zeta.len() {
        return Err(KernelsError::Dimension(
            "points of different dimension".into(),
        ));
    }
    let inner: Complex64 = lambda.iter().zip(zeta).map(|(l, z)| l * z.conj()).sum();
    if inner.norm() >= 1.0 {
        return Err(KernelsError::Boundary {
            inner_abs: inner.norm(),
        });
    }
    Ok(Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - inner))
}

/// PSD verdict on the block Gram matrix `[K(λ_i, λ_j)]`.
pub fn kernel_gram(
    kh: &KernelHandle,
    points: &[Vec<Complex64>],
    tol: f64,
) -> Result<HermitianVerdict, KernelsError> {
    Ok(psd_check(&kernel_gram_matrix(kh, points)?, tol)?)
}

pub fn kernel_gram_matrix(
    kh: &KernelHandle,
    points: &[Vec<Complex64>],
) -> Result<CMat, KernelsError> {
    let p = kh.pair.output_dim();
    let n = points.len();
    let mut gram = zeros(n * p, n * p);
    for (i, li) in points.iter().enumerate() {
        for (j, lj) in points.iter().enumerate() {
            let block = ab_kernel_eval(kh, li, lj)?;
            gram.view_mut((i * p, j * p), (p, p)).copy_from(&block);
        }
    }
    Ok(gram)
}

/// Projection onto `(Ker O)^⊥` for the word (`Nc`) or abelianized observability
/// operator; the latter uses rows through `depth`.
pub fn observability_projection(pair: &OutputPair, mode: Mode, depth: usize, tol: f64) -> CMat {
    let basis = match mode {
        Mode::Nc => observability_span(pair, tol).0,
        Mode::Commutative => abelian_observability_span(pair, depth, tol).0,
    };
    &basis * basis.adjoint()
}

/// `<H Q x, Q y>`, the lifted inner product realized through the projection
/// `Q` onto the orthogonal complement of the observability kernel.
pub fn lifted_inner_product(
    pair: &OutputPair,
    h: &CMat,
    x: &CVec,
    y: &CVec,
    mode: Mode,
    depth: usize,
    tol: f64,
) -> Complex64 {
    let q = observability_projection(pair, mode, depth, tol);
    let qx = &q * x;
    let qy = &q * y;
    (h * qx).dotc(&qy).conj()
}

/// Columns `(A^β)* C*` (word mode) or `(C W(n))*` (commutative mode).
fn observability_columns(
    pair: &OutputPair,
    mode: Mode,
    depth: usize,
) -> Result<CMat, KernelsError> {
    let rows: Vec<CMat> = match mode {
        Mode::Nc => word_rows(pair, depth)?
            .into_iter()
            .map(|(_, r)| r)
            .collect(),
        Mode::Commutative => abelian_rows(pair, depth)
            .into_iter()
            .map(|(_, r)| r)
            .collect(),
    };
    Ok(rows.iter().fold(zeros(pair.state_dim(), 0), |acc, row| {
        concat_columns(&acc, &row.adjoint())
    }))
}

/// Depth of the spanning set used by the matching algorithms.
fn matching_depth(pair: &OutputPair, mode: Mode) -> usize {
    let m = pair.state_dim();
    match mode {
        Mode::Nc => m,
        Mode::Commutative => 2 * m + 2,
    }
}

/// Residuals of a candidate intertwiner `U` between `(C, A)` and `(C̃, Ã)`:
/// `C = C̃ U`, `U A_j = Ã_j U`, `U* U = I`.
#[derive(Clone, Debug)]
pub struct MatchReport {
    pub candidate: CMat,
    pub isometry_residual: f64,
    pub output_residual: f64,
    pub intertwining_residual: f64,
    pub accepted: bool,
}

fn check_match(a: &OutputPair, b: &OutputPair, u: CMat, tol: f64) -> MatchReport {
    let isometry_residual = spectral_norm(&(u.adjoint() * &u - identity(a.state_dim())));
    let output_residual = spectral_norm(&(&a.c - &b.c * &u));
    let intertwining_residual =
        a.a.iter()
            .zip(&b.a)
            .map(|(aj, bj)| spectral_norm(&(&u * aj - bj * &u)))
            .fold(0.0, f64::max);
    let accepted =
        isometry_residual <= tol && output_residual <= tol && intertwining_residual <= tol;
    MatchReport {
        candidate: u,
        isometry_residual,
        output_residual,
        intertwining_residual,
        accepted,
    }
}

fn require_observable(
    pair: &OutputPair,
    mode: Mode,
    which: &'static str,
    tol: f64,
) -> Result<CMat, KernelsError> {
    let cols = observability_columns(pair, mode, matching_depth(pair, mode))?;
    let rank = range_basis(&cols, tol).ncols();
    if rank < pair.state_dim() {
        return Err(KernelsError::Unobservable {
            which,
            rank,
            dim: pair.state_dim(),
        });
    }
    Ok(cols)
}

/// Least-squares intertwiner `U = K_B K_A^+` from the correspondence
/// `(A^β)* C* y -> (Ã^β)* C̃* y`, with its verification residuals.
pub fn unitary_equivalence_report(
    a: &OutputPair,
    b: &OutputPair,
    mode: Mode,
) -> Result<MatchReport, KernelsError> {
    if a.output_dim() != b.output_dim() || a.d() != b.d() || a.state_dim() != b.state_dim() {
        return Err(KernelsError::Dimension(
            "pairs differ in output dimension, state dimension or d".into(),
        ));
    }
    let tol = 1e-10;
    let ka = require_observable(a, mode, "first", tol)?;
    let kb = require_observable(b, mode, "second", tol)?;
    let u = &kb * pseudo_inverse(&ka, tol);
    Ok(check_match(a, b, u, MATCH_TOL))
}

/// The unitary `U` with `C = C̃ U`, `U A_j = Ã_j U`, or `None` when the
/// verification fails.
pub fn unitary_equivalence(
    a: &OutputPair,
    b: &OutputPair,
    mode: Mode,
) -> Result<Option<CMat>, KernelsError> {
    let report = unitary_equivalence_report(a, b, mode)?;
    Ok(report.accepted.then_some(report.candidate))
}

/// Isometry `V: X -> X̃` with `C = C̃ V`, `V A_j = Ã_j V`, together with
/// the hypotheses checked on both pairs.
#[derive(Clone, Debug)]
pub struct ContainmentReport {
    pub isometry: Option<CMat>,
    pub check: MatchReport,
    pub first_isometric: bool,
    pub second_isometric: bool,
    pub first_commutative: bool,
    pub second_commutative: bool,
    pub first_stability: StabilityVerdict,
    pub second_stability: StabilityVerdict,
}

impl ContainmentReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.first_isometric
            && self.second_isometric
            && self.first_commutative
            && self.second_commutative
            && self.first_stability == StabilityVerdict::Stable
            && self.second_stability == StabilityVerdict::Stable
    }
}

/// Matches `C W(n) = C̃ W̃(n) V` for all `n` through the matching depth by
/// `V = K̃^+ K` on stacked rows, then verifies the conditions.
pub fn containment_isometry(
    a: &OutputPair,
    b: &OutputPair,
    tol: f64,
) -> Result<ContainmentReport, KernelsError> {
    if a.output_dim() != b.output_dim() || a.d() != b.d() {
        return Err(KernelsError::Dimension(
            "pairs differ in output dimension or d".into(),
        ));
    }
    let depth = matching_depth(b, Mode::Commutative);
    let stack = |p: &OutputPair| {
        abelian_rows(p, depth)
            .into_iter()
            .fold(zeros(0, p.state_dim()), |acc, (_, row)| {
                concat_rows(&acc, &row)
            })
    };
    let oa = stack(a);
    let ob = stack(b);
    let v = pseudo_inverse(&ob, 1e-10) * &oa;
    let check = check_match(a, b, v, MATCH_TOL);
    let isometric =
        |p: &OutputPair| spectral_norm(&p.contractivity_defect()) <= scaled_tol(tol, 1.0);
    let stability = |p: &OutputPair| strong_stability(&p.a, None, DEFAULT_MAX_LEVEL, tol).verdict;
    Ok(ContainmentReport {
        isometry: check.accepted.then(|| check.candidate.clone()),
        first_isometric: isometric(a),
        second_isometric: isometric(b),
        first_commutative: is_commutative(&a.a, tol),
        second_commutative: is_commutative(&b.a, tol),
        first_stability: stability(a),
        second_stability: stability(b),
        check,
    })
}

/// `sum_j <H A_j x, A_j x>` against `<H x, x> - ||C x||²`: returns the
/// matrix `H - sum A_j* H A_j - C*C` whose PSD-ness is the inequality on
/// all `x` at once.
pub fn difference_quotient_defect(pair: &OutputPair, h: &CMat) -> CMat {
    let mut out = h - pair.c.adjoint() * &pair.c;
    for aj in &pair.a {
        out -= aj.adjoint() * h * aj;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, r, real_matrix};
    use crate::sampling::{ball_points, random_pair, random_unitary, seeded};

    fn not_shift_inv_pair() -> OutputPair {
        let s = 0.75f64.sqrt();
        OutputPair::new(
            real_matrix(&[&[s, 0.0], &[0.0, s]]),
            vec![
                real_matrix(&[&[0.0, 0.0], &[0.5, 0.0]]),
                real_matrix(&[&[0.0, 0.5], &[0.0, 0.0]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn nc_coefficients() {
        let p = not_shift_inv_pair();
        let kh = KernelHandle::new(p, None, KernelFlavor::Noncommutative, 1e-9).unwrap();
        let e = Word::empty(2);
        let k00 = nc_kernel_coeff(&kh, &e, &e).unwrap();
        assert!((k00 - identity(2) * r(0.75)).norm() < 1e-15);
        let a = Word::parse(2, "12").unwrap();
        let b = Word::parse(2, "2").unwrap();
        let kab = nc_kernel_coeff(&kh, &a, &b).unwrap();
        let kba = nc_kernel_coeff(&kh, &b, &a).unwrap();
        assert!((kab - kba.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn closed_form_kernel_of_two_by_two_example() {
        let kh =
            KernelHandle::new(not_shift_inv_pair(), None, KernelFlavor::Commutative, 1e-9).unwrap();
        let pts = ball_points(&mut seeded(11), 2, 10, 0.95);
        for w in pts.windows(2) {
            let (l, z) = (&w[0], &w[1]);
            let got = ab_kernel_eval(&kh, l, z).unwrap();
            let two = c(2.0, 0.0);
            let left = CMat::from_row_slice(2, 2, &[two, l[1], l[0], two]);
            let right = CMat::from_row_slice(2, 2, &[two, z[0].conj(), z[1].conj(), two]);
            let f = c(3.0, 0.0)
                / ((c(4.0, 0.0) - l[0] * l[1]) * (c(4.0, 0.0) - z[0].conj() * z[1].conj()));
            let expected = left * right * f;
            assert!((got - expected).norm() < 1e-10);
        }
        let verdict = kernel_gram(&kh, &pts[..6], 1e-9).unwrap();
        assert!(verdict.is_psd);
    }

    #[test]
    fn arveson_kernel_values() {
        let z = [c(0.0, 0.0), c(0.0, 0.0)];
        assert_eq!(arveson_kernel(&z, &z).unwrap(), c(1.0, 0.0));
        let h = [c(0.5, 0.0), c(0.0, 0.0)];
        assert!((arveson_kernel(&h, &h).unwrap() - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        let out = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!(arveson_kernel(&out, &out).is_err());
    }

    #[test]
    fn plant_and_recover_unitary() {
        let mut rng = seeded(5);
        let a = random_pair(&mut rng, 3, 2, 2, 0.9);
        let u0 = random_unitary(&mut rng, 3);
        let b = OutputPair::new(
            &a.c * u0.adjoint(),
            a.a.iter().map(|aj| &u0 * aj * u0.adjoint()).collect(),
        )
        .unwrap();
        let u = unitary_equivalence(&a, &b, Mode::Nc).unwrap().unwrap();
        assert!((&u - &u0).norm() < 1e-8);
        let same = unitary_equivalence(&a, &a, Mode::Nc).unwrap().unwrap();
        assert!((same - identity(3)).norm() < 1e-8);
        let mut c2 = b.c.clone();
        c2[(0, 0)] += c(1e-3, 0.0);
        let perturbed = OutputPair::new(c2, b.a.clone()).unwrap();
        assert!(unitary_equivalence(&a, &perturbed, Mode::Nc)
            .unwrap()
            .is_none());
    }

    #[test]
    fn inverse_gramian_flavor_refuses_singular() {
        // the pair with an a-unobservable direction
        let p = OutputPair::new(
            real_matrix(&[&[1.0, 0.0]]),
            vec![real_matrix(&[&[0.5, 0.0], &[0.0, 0.5]])],
        )
        .unwrap();
        assert!(matches!(
            KernelHandle::new(p, None, KernelFlavor::CommutativeInverseGramian, 1e-9),
            Err(KernelsError::SingularGramian { .. })
        ));
    }

    #[test]
    fn lifted_product_examples() {
        let p = not_shift_inv_pair();
        let x = CVec::from_vec(vec![c(1.0, 0.5), c(-0.2, 0.0)]);
        let y = CVec::from_vec(vec![c(0.3, 0.0), c(0.1, 1.0)]);
        let got = lifted_inner_product(&p, &identity(2), &x, &y, Mode::Nc, 4, 1e-9);
        assert!((got - y.dotc(&x)).norm() < 1e-14);
        let q = OutputPair::new(
            real_matrix(&[&[1.0, 0.0]]),
            vec![real_matrix(&[&[0.5, 0.0], &[0.0, 0.5]])],
        )
        .unwrap();
        let e2 = CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(lifted_inner_product(&q, &identity(2), &e2, &e2, Mode::Nc, 4, 1e-9).norm() < 1e-15);
    }
}
