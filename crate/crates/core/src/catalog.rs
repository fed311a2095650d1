//! Small named systems used as worked examples by the tests and the CLI.

use num_complex::Complex64;

use crate::numerics::{c, real_matrix, CMat};
use crate::systems::OutputPair;

/// Noncommuting pair whose abelianized gramian fails the reverse Stein
/// inequality test.
pub fn reverse_stein() -> OutputPair {
    OutputPair::new(
        real_matrix(&[&[1.0, 0.0, 0.0]]),
        vec![
            real_matrix(&[&[0.0, 0.5, 0.0], &[0.0, 0.0, 0.0], &[-0.5, 0.0, 0.0]]),
            real_matrix(&[&[0.0, 0.0, 0.5], &[0.5, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
        ],
    )
    .expect("fixed shapes")
}

/// Output stable after abelianization but not in the word sense.
pub fn a_stable() -> OutputPair {
    OutputPair::new(
        real_matrix(&[&[1.0, 0.0, 0.0]]),
        vec![
            real_matrix(&[&[0.0, 2.0, 0.0], &[0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]]),
            real_matrix(&[&[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
        ],
    )
    .expect("fixed shapes")
}

/// Observable pair whose abelianized observability has kernel `e_2`.
pub fn a_obs() -> OutputPair {
    let s = 1.0 / 16.0;
    OutputPair::new(
        real_matrix(&[&[0.0, 0.0, 0.0, 1.0]]),
        vec![
            real_matrix(&[
                &[-s, s, 0.0, 0.0],
                &[-s, s, -s, s],
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, -s, s],
            ]),
            real_matrix(&[
                &[s, 0.0, 0.0, -s],
                &[-s, -s, -s, -s],
                &[s, -s, s, -s],
                &[-s, 0.0, 0.0, -s],
            ]),
        ],
    )
    .expect("fixed shapes")
}

/// Two-dimensional pair whose state space is not backward-shift invariant.
pub fn not_shift_inv() -> OutputPair {
    let s = 0.75f64.sqrt();
    OutputPair::new(
        real_matrix(&[&[s, 0.0], &[0.0, s]]),
        vec![
            real_matrix(&[&[0.0, 0.0], &[0.5, 0.0]]),
            real_matrix(&[&[0.0, 0.5], &[0.0, 0.0]]),
        ],
    )
    .expect("fixed shapes")
}

/// Realizations of `span{1, λ_1, λ_2}`, one for each `a`.
pub fn linear_span_family(a: Complex64) -> OutputPair {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    OutputPair::new(
        CMat::from_row_slice(1, 3, &[one, z, z]),
        vec![
            CMat::from_row_slice(3, 3, &[z, one, z, z, z, z, a, z, z]),
            CMat::from_row_slice(3, 3, &[z, z, one, -a, z, z, z, z, z]),
        ],
    )
    .expect("fixed shapes")
}

/// Realizations of `span{4, λ_1, λ_2} / (4 - λ_1λ_2)`, one for each `a`.
pub fn rational_span_family(a: Complex64) -> OutputPair {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let q = c(0.25, 0.0);
    OutputPair::new(
        CMat::from_row_slice(1, 3, &[one, z, z]),
        vec![
            CMat::from_row_slice(3, 3, &[z, q, z, z, z, z, a, z, z]),
            CMat::from_row_slice(3, 3, &[z, z, q, one - a, z, z, z, z, z]),
        ],
    )
    .expect("fixed shapes")
}

/// `s_k = (k + 1) / (2k + 1)`
pub fn odd_ratio(k: usize) -> f64 {
    (k as f64 + 1.0) / (2.0 * k as f64 + 1.0)
}
