//! Output pairs, Fornasini-Marchesini realizations, their noncommutative
//! (word-indexed) and commutative (lattice) trajectories, transfer functions
//! and the projection of word trajectories onto the lattice.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::combinatorics::{
    abelianize, enumerate_words_up_to, left_quotient, multi_indices_up_to, CombinatoricsError,
    MultiIndex, Word,
};
use crate::numerics::{identity, r, spectral_norm, zeros, CMat, CVec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tuple is not commutative: defect {defect:e} exceeds {allowed:e}")]
    NonCommutative { defect: f64, allowed: f64 },
    #[error("I - Z(λ)A is singular at the requested point")]
    SingularResolvent,
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// Output map `C: X -> Y` with a `d`-tuple `A` acting on `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPair {
    pub c: CMat,
    pub a: Vec<CMat>,
}

impl OutputPair {
    pub fn new(c: CMat, a: Vec<CMat>) -> Result<Self, SystemsError> {
        if a.is_empty() {
            return Err(SystemsError::Dimension(
                "the tuple must have at least one operator".into(),
            ));
        }
        let m = a[0].nrows();
        for (j, aj) in a.iter().enumerate() {
            if aj.nrows() != m || aj.ncols() != m {
                return Err(SystemsError::Dimension(format!(
                    "A_{} is {}x{}, expected {m}x{m}",
                    j + 1,
                    aj.nrows(),
                    aj.ncols()
                )));
            }
        }
        if c.ncols() != m {
            return Err(SystemsError::Dimension(format!(
                "C has {} columns, state dimension is {m}",
                c.ncols()
            )));
        }
        Ok(OutputPair { c, a })
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Residual `I - sum A_j* A_j - C*C`; PSD means the pair is contractive,
    /// zero means isometric.
    pub fn contractivity_defect(&self) -> CMat {
        let mut out = identity(self.state_dim()) - self.c.adjoint() * &self.c;
        for aj in &self.a {
            out -= aj.adjoint() * aj;
        }
        out
    }

    /// The pair `(C S^{-1}, S A_j S^{-1})`.
    pub fn similar(&self, s: &CMat, s_inv: &CMat) -> OutputPair {
        OutputPair {
            c: &self.c * s_inv,
            a: self.a.iter().map(|aj| s * aj * s_inv).collect(),
        }
    }
}

/// `(A, B, C, D)` data of a Fornasini-Marchesini system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemRealization {
    pub pair: OutputPair,
    pub b: Vec<CMat>,
    pub d: CMat,
}

impl SystemRealization {
    pub fn new(pair: OutputPair, b: Vec<CMat>, d: CMat) -> Result<Self, SystemsError> {
        if b.len() != pair.d() {
            return Err(SystemsError::Dimension(format!(
                "{} input operators for a {}-tuple",
                b.len(),
                pair.d()
            )));
        }
        let q = d.ncols();
        if d.nrows() != pair.output_dim() {
            return Err(SystemsError::Dimension(
                "D must have as many rows as C".into(),
            ));
        }
        for (j, bj) in b.iter().enumerate() {
            if bj.nrows() != pair.state_dim() || bj.ncols() != q {
                return Err(SystemsError::Dimension(format!(
                    "B_{} is {}x{}, expected {}x{q}",
                    j + 1,
                    bj.nrows(),
                    bj.ncols(),
                    pair.state_dim()
                )));
            }
        }
        Ok(SystemRealization { pair, b, d })
    }

    /// Realization with no input channel (`q = 0`).
    pub fn autonomous(pair: OutputPair) -> Self {
        let m = pair.state_dim();
        let p = pair.output_dim();
        let b = vec![zeros(m, 0); pair.d()];
        SystemRealization {
            pair,
            b,
            d: zeros(p, 0),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d.ncols()
    }
}

/// `A^v = A_{v_1} A_{v_2} ... A_{v_N}` with `A^∅ = I`.
pub fn tuple_power_word(a: &[CMat], v: &Word) -> CMat {
    let m = a[0].nrows();
    let mut out = identity(m);
    for &l in v.letters() {
        out *= &a[l - 1];
    }
    out
}

/// `max_{i<j} ||A_i A_j - A_j A_i||`
pub fn commutativity_defect(a: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            worst = worst.max(spectral_norm(&(&a[i] * &a[j] - &a[j] * &a[i])));
        }
    }
    worst
}

/// The allowed commutator size `tol * max_j ||A_j||^2`.
pub fn commutativity_threshold(a: &[CMat], tol: f64) -> f64 {
    let biggest = a.iter().map(spectral_norm).fold(0.0, f64::max);
    tol * biggest * biggest
}

pub fn is_commutative(a: &[CMat], tol: f64) -> bool {
    commutativity_defect(a) <= commutativity_threshold(a, tol)
}

/// `A_1^{n_1} ... A_d^{n_d}` for a commuting tuple.
pub fn tuple_power_multi(a: &[CMat], n: &MultiIndex, tol: f64) -> Result<CMat, SystemsError> {
    if n.dim() != a.len() {
        return Err(SystemsError::Dimension(format!(
            "multi-index of length {} for a {}-tuple",
            n.dim(),
            a.len()
        )));
    }
    let defect = commutativity_defect(a);
    let allowed = commutativity_threshold(a, tol);
    if defect > allowed {
        return Err(SystemsError::NonCommutative { defect, allowed });
    }
    Ok(tuple_power_word(a, &n.canonical_word()))
}

/// Word-indexed input signal; absent words carry the zero input.
/// Word-indexed (noncommutative) or multi-index (commutative) setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Nc,
    Commutative,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Nc => "nc",
            Mode::Commutative => "commutative",
        }
    }
}

pub type InputMap = BTreeMap<Word, CVec>;

/// Lattice-indexed input signal; absent points carry the zero input.
pub type LatticeInputMap = BTreeMap<MultiIndex, CVec>;

/// States, inputs and outputs of the word recursion on all words of
/// length at most `depth`, stored in graded lexicographic word order.
#[derive(Clone, Debug)]
pub struct NcTrajectory {
    pub d: usize,
    pub depth: usize,
    pub states: Vec<CVec>,
    pub inputs: Vec<CVec>,
    pub outputs: Vec<CVec>,
}

impl NcTrajectory {
    pub fn state(&self, v: &Word) -> &CVec {
        &self.states[v.index()]
    }

    pub fn output(&self, v: &Word) -> &CVec {
        &self.outputs[v.index()]
    }

    pub fn input(&self, v: &Word) -> &CVec {
        &self.inputs[v.index()]
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.states.len()).map(move |i| Word::from_index(self.d, i))
    }
}

/// Lattice trajectory on `{n : |n| <= depth}`.
#[derive(Clone, Debug)]
pub struct LatticeTrajectory {
    pub d: usize,
    pub depth: usize,
    pub states: BTreeMap<MultiIndex, CVec>,
    pub inputs: BTreeMap<MultiIndex, CVec>,
    pub outputs: BTreeMap<MultiIndex, CVec>,
}

impl LatticeTrajectory {
    /// Largest entrywise difference over states, inputs and outputs.
    pub fn max_difference(&self, other: &LatticeTrajectory) -> f64 {
        fn diff(a: &BTreeMap<MultiIndex, CVec>, b: &BTreeMap<MultiIndex, CVec>) -> f64 {
            let mut worst: f64 = 0.0;
            for (n, x) in a {
                match b.get(n) {
                    Some(y) if y.len() == x.len() => {
                        worst = worst.max((x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
                    }
                    _ => return f64::INFINITY,
                }
            }
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            worst
        }
        diff(&self.states, &other.states)
            .max(diff(&self.inputs, &other.inputs))
            .max(diff(&self.outputs, &other.outputs))
    }
}

fn check_vec(name: &str, v: &CVec, expected: usize) -> Result<(), SystemsError> {
    if v.len() != expected {
        return Err(SystemsError::Dimension(format!(
            "{name} has length {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// Runs `x(jv) = A_j x(v) + B_j u(v)`, `y(v) = C x(v) + D u(v)`, `x(∅) = x0`.
pub fn nc_simulate(
    sys: &SystemRealization,
    x0: &CVec,
    u: &InputMap,
    depth: usize,
) -> Result<NcTrajectory, SystemsError> {
    let pair = &sys.pair;
    let d = pair.d();
    check_vec("x0", x0, pair.state_dim())?;
    for (w, uw) in u {
        check_vec(&format!("u({w:?})"), uw, sys.input_dim())?;
        if w.alphabet() != d {
            return Err(SystemsError::Dimension(format!(
                "input word {w:?} is over a different alphabet"
            )));
        }
    }
    let words = enumerate_words_up_to(d, depth)?;
    let zero_u = CVec::zeros(sys.input_dim());
    let inputs: Vec<CVec> = words
        .iter()
        .map(|w| u.get(w).cloned().unwrap_or_else(|| zero_u.clone()))
        .collect();
    let mut states: Vec<CVec> = Vec::with_capacity(words.len());
    for w in &words {
        let x = match w.first() {
            None => x0.clone(),
            Some(k) => {
                let parent = left_quotient(k, w).expect("first letter strips").index();
                &pair.a[k - 1] * &states[parent] + &sys.b[k - 1] * &inputs[parent]
            }
        };
        states.push(x);
    }
    let outputs = states
        .iter()
        .zip(&inputs)
        .map(|(x, uu)| &pair.c * x + &sys.d * uu)
        .collect();
    Ok(NcTrajectory {
        d,
        depth,
        states,
        inputs,
        outputs,
    })
}

/// Runs `x(n) = sum_k A_k x(n - e_k) + B_k u(n - e_k)` with `x(0) = x0` and
/// zero boundary values off the positive orthant.
pub fn lattice_simulate(
    sys: &SystemRealization,
    x0: &CVec,
    u: &LatticeInputMap,
    depth: usize,
) -> Result<LatticeTrajectory, SystemsError> {
    let pair = &sys.pair;
    let d = pair.d();
    check_vec("x0", x0, pair.state_dim())?;
    for (n, un) in u {
        check_vec(&format!("u({n:?})"), un, sys.input_dim())?;
        if n.dim() != d {
            return Err(SystemsError::Dimension(format!(
                "input index {n:?} has the wrong length"
            )));
        }
    }
    let zero_u = CVec::zeros(sys.input_dim());
    let points = multi_indices_up_to(d, depth);
    let mut states: BTreeMap<MultiIndex, CVec> = BTreeMap::new();
    let mut inputs = BTreeMap::new();
    for n in &points {
        inputs.insert(
            n.clone(),
            u.get(n).cloned().unwrap_or_else(|| zero_u.clone()),
        );
    }
    for n in &points {
        let x = if n.total() == 0 {
            x0.clone()
        } else {
            let mut acc = CVec::zeros(pair.state_dim());
            for k in 1..=d {
                if let Some(prev) = n.minus_unit(k) {
                    acc += &pair.a[k - 1] * &states[&prev] + &sys.b[k - 1] * &inputs[&prev];
                }
            }
            acc
        };
        states.insert(n.clone(), x);
    }
    let outputs = points
        .iter()
        .map(|n| (n.clone(), &pair.c * &states[n] + &sys.d * &inputs[n]))
        .collect();
    Ok(LatticeTrajectory {
        d,
        depth,
        states,
        inputs,
        outputs,
    })
}

/// `Π`: sums each signal of a word trajectory over the fibers of the
/// abelianization map.
pub fn project_trajectory(t: &NcTrajectory) -> LatticeTrajectory {
    let mut states: BTreeMap<MultiIndex, CVec> = BTreeMap::new();
    let mut inputs: BTreeMap<MultiIndex, CVec> = BTreeMap::new();
    let mut outputs: BTreeMap<MultiIndex, CVec> = BTreeMap::new();
    for (i, w) in t.words().enumerate() {
        let n = abelianize(&w);
        for (store, value) in [
            (&mut states, &t.states[i]),
            (&mut inputs, &t.inputs[i]),
            (&mut outputs, &t.outputs[i]),
        ] {
            store
                .entry(n.clone())
                .and_modify(|acc| *acc += value)
                .or_insert_with(|| value.clone());
        }
    }
    LatticeTrajectory {
        d: t.d,
        depth: t.depth,
        states,
        inputs,
        outputs,
    }
}

/// `Π` applied to an input map: `u(n) = sum_{a(v) = n} u(v)`.
pub fn project_inputs(u: &InputMap) -> LatticeInputMap {
    let mut out: LatticeInputMap = BTreeMap::new();
    for (w, uw) in u {
        out.entry(abelianize(w))
            .and_modify(|acc| *acc += uw)
            .or_insert_with(|| uw.clone());
    }
    out
}

/// Coefficient of `z^v` in the noncommutative transfer function:
/// `D` for the empty word, `C A^w B_j` for `v = w j`.
pub fn nc_transfer_coeff(sys: &SystemRealization, v: &Word) -> CMat {
    match v.last() {
        None => sys.d.clone(),
        Some(j) => {
            let w = v.strip_last(j).expect("last letter strips");
            &sys.pair.c * tuple_power_word(&sys.pair.a, &w) * &sys.b[j - 1]
        }
    }
}

/// `I - sum_j λ_j A_j`
pub fn pencil(a: &[CMat], lambda: &[Complex64]) -> CMat {
    let mut out = identity(a[0].nrows());
    for (aj, &l) in a.iter().zip(lambda) {
        out -= aj * l;
    }
    out
}

/// `(I - Z(λ)A)^{-1}`
pub fn resolvent(a: &[CMat], lambda: &[Complex64]) -> Result<CMat, SystemsError> {
    if lambda.len() != a.len() {
        return Err(SystemsError::Dimension(format!(
            "point has {} coordinates for a {}-tuple",
            lambda.len(),
            a.len()
        )));
    }
    let p = pencil(a, lambda);
    let inv = p
        .clone()
        .lu()
        .try_inverse()
        .ok_or(SystemsError::SingularResolvent)?;
    if !inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(SystemsError::SingularResolvent);
    }
    Ok(inv)
}

/// `C (I - Z(λ)A)^{-1}`, the value at `λ` of the commutative observability
/// function of the pair.
pub fn resolvent_row(pair: &OutputPair, lambda: &[Complex64]) -> Result<CMat, SystemsError> {
    Ok(&pair.c * resolvent(&pair.a, lambda)?)
}

/// `D + C (I - Z(λ)A)^{-1} Z(λ)B`
pub fn comm_transfer_eval(
    sys: &SystemRealization,
    lambda: &[Complex64],
) -> Result<CMat, SystemsError> {
    let res = resolvent(&sys.pair.a, lambda)?;
    let mut zb = zeros(sys.pair.state_dim(), sys.input_dim());
    for (bj, &l) in sys.b.iter().zip(lambda) {
        zb += bj * l;
    }
    Ok(&sys.d + &sys.pair.c * res * zb)
}

/// Coefficients of the polynomial `det(I - sum_j λ_j A_j)`, indexed by
/// monomial exponent, recovered by interpolation on a grid of roots of unity.
pub fn resolvent_determinant_coeffs(a: &[CMat]) -> BTreeMap<MultiIndex, Complex64> {
    let d = a.len();
    let m = a[0].nrows();
    let s = m + 1; // degree in each variable is at most m
    let omega =
        |k: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / s as f64);
    let grid: Vec<Vec<usize>> = {
        let mut out = vec![vec![]];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..s).map(move |k| {
                        let mut q = p.clone();
                        q.push(k);
                        q
                    })
                })
                .collect();
        }
        out
    };
    let samples: Vec<(Vec<usize>, Complex64)> = grid
        .into_iter()
        .map(|k| {
            let lambda: Vec<Complex64> = k.iter().map(|&kj| omega(kj)).collect();
            let value = pencil(a, &lambda).determinant();
            (k, value)
        })
        .collect();
    let norm = r(1.0 / (s as f64).powi(d as i32));
    let mut out = BTreeMap::new();
    for n in multi_indices_up_to(d, m) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, value) in &samples {
            let phase: usize = k
                .iter()
                .zip(n.entries())
                .map(|(kj, nj)| kj * nj)
                .sum::<usize>()
                % s;
            acc += value * omega(phase).conj();
        }
        out.insert(n, acc * norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::fiber;
    use crate::numerics::{c, real_matrix};

    fn a_stable() -> OutputPair {
        OutputPair::new(
            real_matrix(&[&[1.0, 0.0, 0.0]]),
            vec![
                real_matrix(&[&[0.0, 2.0, 0.0], &[0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]]),
                real_matrix(&[&[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn word_powers() {
        let p = a_stable();
        assert_eq!(tuple_power_word(&p.a, &Word::empty(2)), identity(3));
        let a12 = tuple_power_word(&p.a, &Word::parse(2, "12").unwrap());
        let expected = real_matrix(&[&[2.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, -2.0]]);
        assert!((a12 - expected).norm() < 1e-15);
        let v = Word::parse(2, "121").unwrap();
        let direct = &p.a[0] * &p.a[1] * &p.a[0];
        assert!((tuple_power_word(&p.a, &v) - direct).norm() < 1e-15);
    }

    #[test]
    fn multi_powers() {
        let d = vec![real_matrix(&[&[2.0]])];
        assert_eq!(
            tuple_power_multi(&d, &MultiIndex::new(vec![3]), 1e-9).unwrap()[(0, 0)],
            r(8.0)
        );
        let a1 = real_matrix(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let a2 = real_matrix(&[&[-1.0, 0.0], &[0.0, 0.5]]);
        let p = tuple_power_multi(&[a1, a2], &MultiIndex::new(vec![1, 2]), 1e-9).unwrap();
        assert!((p[(0, 0)] - r(2.0)).norm() < 1e-15);
        assert!((p[(1, 1)] - r(0.75)).norm() < 1e-15);
        assert!(matches!(
            tuple_power_multi(&a_stable().a, &MultiIndex::zero(2), 1e-9),
            Err(SystemsError::NonCommutative { .. })
        ));
    }

    #[test]
    fn zero_dynamics_only_feedthrough() {
        let pair = OutputPair::new(real_matrix(&[&[1.0, 2.0]]), vec![zeros(2, 2); 2]).unwrap();
        let sys =
            SystemRealization::new(pair, vec![zeros(2, 1); 2], real_matrix(&[&[3.0]])).unwrap();
        let mut u = InputMap::new();
        u.insert(Word::empty(2), CVec::from_vec(vec![r(1.0)]));
        u.insert(Word::parse(2, "21").unwrap(), CVec::from_vec(vec![r(-2.0)]));
        let x0 = CVec::from_vec(vec![r(1.0), r(1.0)]);
        let t = nc_simulate(&sys, &x0, &u, 3).unwrap();
        assert_eq!(t.output(&Word::empty(2))[0], r(6.0));
        assert_eq!(t.output(&Word::parse(2, "21").unwrap())[0], r(-6.0));
        assert_eq!(t.output(&Word::parse(2, "12").unwrap())[0], r(0.0));
    }

    #[test]
    fn lattice_with_zero_a() {
        let pair = OutputPair::new(real_matrix(&[&[1.0]]), vec![zeros(1, 1); 2]).unwrap();
        let sys = SystemRealization::new(
            pair,
            vec![real_matrix(&[&[1.0]]), real_matrix(&[&[10.0]])],
            zeros(1, 1),
        )
        .unwrap();
        let mut u = LatticeInputMap::new();
        u.insert(MultiIndex::new(vec![1, 0]), CVec::from_vec(vec![r(1.0)]));
        u.insert(MultiIndex::new(vec![0, 1]), CVec::from_vec(vec![r(2.0)]));
        let t = lattice_simulate(&sys, &CVec::zeros(1), &u, 3).unwrap();
        // x(1,1) = B_1 u(0,1) + B_2 u(1,0)
        assert_eq!(t.states[&MultiIndex::new(vec![1, 1])][0], r(12.0));
        assert_eq!(t.states[&MultiIndex::new(vec![2, 0])][0], r(1.0));
    }

    #[test]
    fn a_stable_projected_output_vanishes() {
        let sys = SystemRealization::autonomous(a_stable());
        let x0 = CVec::from_vec(vec![r(1.0), r(0.0), r(0.0)]);
        let t = nc_simulate(&sys, &x0, &InputMap::new(), 2).unwrap();
        let lat = project_trajectory(&t);
        assert!(lat.outputs[&MultiIndex::new(vec![1, 1])][0].norm() < 1e-15);
        // the word outputs themselves do not vanish
        assert_eq!(t.output(&Word::parse(2, "12").unwrap())[0], r(2.0));
    }

    #[test]
    fn transfer_coefficients() {
        let pair = a_stable();
        let b = vec![
            real_matrix(&[&[1.0], &[0.0], &[1.0]]),
            real_matrix(&[&[0.0], &[1.0], &[0.0]]),
        ];
        let sys = SystemRealization::new(pair, b, real_matrix(&[&[0.5]])).unwrap();
        assert_eq!(nc_transfer_coeff(&sys, &Word::empty(2)), sys.d);
        let t1 = nc_transfer_coeff(&sys, &Word::parse(2, "1").unwrap());
        assert_eq!(t1, &sys.pair.c * &sys.b[0]);
        let lam = [c(0.0, 0.0), c(0.0, 0.0)];
        assert_eq!(comm_transfer_eval(&sys, &lam).unwrap(), sys.d);
    }

    #[test]
    fn classical_transfer() {
        let pair = OutputPair::new(real_matrix(&[&[2.0]]), vec![real_matrix(&[&[0.5]])]).unwrap();
        let sys =
            SystemRealization::new(pair, vec![real_matrix(&[&[3.0]])], real_matrix(&[&[1.0]]))
                .unwrap();
        let l = c(0.3, -0.2);
        let expected = r(1.0) + l * r(2.0) * r(3.0) / (r(1.0) - l * r(0.5));
        assert!((comm_transfer_eval(&sys, &[l]).unwrap()[(0, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn determinant_coefficients_of_diagonal_pencil() {
        // det(I - λ1 diag(1,2) - λ2 diag(3,0)) = (1 - λ1 - 3λ2)(1 - 2λ1)
        let a = vec![
            real_matrix(&[&[1.0, 0.0], &[0.0, 2.0]]),
            real_matrix(&[&[3.0, 0.0], &[0.0, 0.0]]),
        ];
        let coeffs = resolvent_determinant_coeffs(&a);
        let get = |e: &[usize]| coeffs[&MultiIndex::new(e.to_vec())];
        assert!((get(&[0, 0]) - r(1.0)).norm() < 1e-13);
        assert!((get(&[1, 0]) - r(-3.0)).norm() < 1e-13);
        assert!((get(&[0, 1]) - r(-3.0)).norm() < 1e-13);
        assert!((get(&[2, 0]) - r(2.0)).norm() < 1e-13);
        assert!((get(&[1, 1]) - r(6.0)).norm() < 1e-13);
        assert!(get(&[0, 2]).norm() < 1e-13);
    }

    #[test]
    fn fiber_sum_matches_projection_for_single_level() {
        let pair = a_stable();
        let sys = SystemRealization::autonomous(pair.clone());
        let x0 = CVec::from_vec(vec![r(0.3), r(-1.0), r(2.0)]);
        let t = nc_simulate(&sys, &x0, &InputMap::new(), 3).unwrap();
        let lat = project_trajectory(&t);
        let n = MultiIndex::new(vec![2, 1]);
        let mut direct = CVec::zeros(1);
        for w in fiber(&n) {
            direct += &pair.c * tuple_power_word(&pair.a, &w) * &x0;
        }
        assert!((&lat.outputs[&n] - direct).norm() < 1e-14);
    }
}
