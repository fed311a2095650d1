//! Seeded random matrices, pairs and ball points for tests and probes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{c, identity, r, spectral_norm, CMat};
use crate::systems::OutputPair;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with real and imaginary parts uniform in `[-1, 1]`.
pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_real_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| r(rng.random_range(-1.0..1.0)))
}

/// Unitary from the QR factor of a random matrix.
pub fn random_unitary(rng: &mut SeededRng, n: usize) -> CMat {
    random_matrix(rng, n, n).qr().q()
}

/// Pair with `||[C; A_1; ...; A_d]|| = scale`, so contractive when `scale <= 1`.
pub fn random_pair(rng: &mut SeededRng, m: usize, p: usize, d: usize, scale: f64) -> OutputPair {
    let cmat = random_matrix(rng, p, m);
    let a: Vec<CMat> = (0..d).map(|_| random_matrix(rng, m, m)).collect();
    normalize_pair(cmat, a, scale)
}

/// Rescales `(C, A)` jointly so the stacked column has norm `scale`.
pub fn normalize_pair(cmat: CMat, a: Vec<CMat>, scale: f64) -> OutputPair {
    let mut gram = cmat.adjoint() * &cmat;
    for aj in &a {
        gram += aj.adjoint() * aj;
    }
    let norm = spectral_norm(&gram).sqrt();
    let f = if norm > 0.0 { scale / norm } else { 1.0 };
    OutputPair::new(cmat * r(f), a.into_iter().map(|aj| aj * r(f)).collect()).expect("shapes agree")
}

/// Commuting tuple `A_j = S D_j S^{-1}` with `S` near the identity, scaled
/// together with `C` to a contractive pair.
pub fn random_commuting_pair(
    rng: &mut SeededRng,
    m: usize,
    p: usize,
    d: usize,
    scale: f64,
) -> OutputPair {
    let s = identity(m) + random_matrix(rng, m, m) * r(0.3);
    let s_inv = s
        .clone()
        .try_inverse()
        .expect("perturbation of the identity is invertible");
    let a: Vec<CMat> = (0..d)
        .map(|_| {
            let diag = CMat::from_fn(m, m, |i, k| {
                if i == k {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                } else {
                    c(0.0, 0.0)
                }
            });
            &s * diag * &s_inv
        })
        .collect();
    let cmat = random_matrix(rng, p, m);
    normalize_pair(cmat, a, scale)
}

/// Row contraction with `||sum T_j T_j*|| = rho`.
pub fn random_row_contraction(rng: &mut SeededRng, m: usize, d: usize, rho: f64) -> Vec<CMat> {
    let t: Vec<CMat> = (0..d).map(|_| random_matrix(rng, m, m)).collect();
    let mut gram = CMat::zeros(m, m);
    for tj in &t {
        gram += tj * tj.adjoint();
    }
    let f = (rho / spectral_norm(&gram)).sqrt();
    t.into_iter().map(|tj| tj * r(f)).collect()
}

/// Points of the open ball of radius `radius`.
pub fn ball_points(
    rng: &mut SeededRng,
    d: usize,
    count: usize,
    radius: f64,
) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|_| {
            let v: Vec<Complex64> = (0..d)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = v
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let len = radius * rng.random_range(0.05..1.0);
            v.into_iter().map(|z| z * (len / norm)).collect()
        })
        .collect()
}

pub fn random_unit(rng: &mut SeededRng) -> f64 {
    rng.random_range(0.0..1.0)
}

pub fn random_below(rng: &mut SeededRng, n: usize) -> usize {
    rng.random_range(0..n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::psd_check;
    use crate::systems::commutativity_defect;

    #[test]
    fn generated_pairs_have_requested_shape() {
        let mut rng = seeded(7);
        let p = random_pair(&mut rng, 4, 2, 3, 0.9);
        assert_eq!((p.state_dim(), p.output_dim(), p.d()), (4, 2, 3));
        assert!(psd_check(&p.contractivity_defect(), 1e-12).unwrap().is_psd);
        let q = random_commuting_pair(&mut rng, 3, 1, 2, 0.9);
        assert!(commutativity_defect(&q.a) < 1e-12);
        let t = random_row_contraction(&mut rng, 3, 2, 0.5);
        let g = &t[0] * t[0].adjoint() + &t[1] * t[1].adjoint();
        assert!((spectral_norm(&g) - 0.5).abs() < 1e-12);
        let u = random_unitary(&mut rng, 3);
        assert!((u.adjoint() * &u - identity(3)).norm() < 1e-12);
    }

    #[test]
    fn same_seed_same_draws() {
        let a = random_matrix(&mut seeded(3), 2, 2);
        let b = random_matrix(&mut seeded(3), 2, 2);
        assert_eq!(a, b);
    }
}
