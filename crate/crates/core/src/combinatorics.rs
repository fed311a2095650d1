//! Words over the alphabet `{1..d}`, multi-indices in `Z^d_+`, the
//! abelianization map and the multinomial weights.
//!
//! A word is stored in the order it is written: `letters[0]` is the leftmost
//! letter. With that convention `A^v = A_{letters[0]} * A_{letters[1]} * ...`,
//! so the word `12` stands for the product `A_1 A_2`, and appending a letter
//! on the right (`v -> vj`) multiplies on the right (`A^{vj} = A^v A_j`).

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

/// Default cap on `|n|` for exact multinomial weights.
pub const DEFAULT_WEIGHT_CAP: usize = 40;

/// Default cap on the number of words a single enumeration may produce.
pub const DEFAULT_MAX_WORDS: usize = 1 << 22;

/// Environment variable overriding [`DEFAULT_MAX_WORDS`].
pub const MAX_WORDS_ENV: &str = "MDLSYS_MAX_WORDS";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CombinatoricsError {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("letter {letter} outside alphabet 1..={d}")]
    LetterOutOfRange { letter: usize, d: usize },
    #[error("enumeration of {requested} words exceeds the cap of {cap}")]
    TooManyWords { requested: u128, cap: usize },
    #[error("total degree {degree} exceeds the weight cap {cap}")]
    WeightOverflow { degree: usize, cap: usize },
    #[error("cannot parse word {0:?}")]
    Parse(String),
}

/// Word in the free semigroup on `d` letters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    d: usize,
    letters: Vec<usize>,
}

impl Word {
    pub fn empty(d: usize) -> Self {
        Word {
            d,
            letters: Vec::new(),
        }
    }

    pub fn new(d: usize, letters: Vec<usize>) -> Result<Self, CombinatoricsError> {
        if d == 0 {
            return Err(CombinatoricsError::EmptyAlphabet);
        }
        if let Some(&letter) = letters.iter().find(|&&l| l == 0 || l > d) {
            return Err(CombinatoricsError::LetterOutOfRange { letter, d });
        }
        Ok(Word { d, letters })
    }

    /// Parses a digit string such as `"121"`; the empty string is the unit.
    /// Alphabets with more than 9 letters use dot-separated letters (`"10.3"`).
    pub fn parse(d: usize, text: &str) -> Result<Self, CombinatoricsError> {
        let text = text.trim();
        if text.is_empty() || text == "∅" {
            return Ok(Word::empty(d));
        }
        let letters: Option<Vec<usize>> = if text.contains('.') {
            text.split('.').map(|s| s.parse().ok()).collect()
        } else {
            text.chars()
                .map(|c| c.to_digit(10).map(|x| x as usize))
                .collect()
        };
        let letters = letters.ok_or_else(|| CombinatoricsError::Parse(text.to_string()))?;
        Word::new(d, letters)
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `jv`
    pub fn prepend(&self, j: usize) -> Word {
        let mut letters = Vec::with_capacity(self.letters.len() + 1);
        letters.push(j);
        letters.extend_from_slice(&self.letters);
        Word { d: self.d, letters }
    }

    /// `vj`
    pub fn append(&self, j: usize) -> Word {
        let mut letters = self.letters.clone();
        letters.push(j);
        Word { d: self.d, letters }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { d: self.d, letters }
    }

    pub fn first(&self) -> Option<usize> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().copied()
    }

    /// `v'` when `v = v' j`.
    pub fn strip_last(&self, j: usize) -> Option<Word> {
        match self.letters.last() {
            Some(&l) if l == j => Some(Word {
                d: self.d,
                letters: self.letters[..self.letters.len() - 1].to_vec(),
            }),
            _ => None,
        }
    }

    /// Position of the word in graded lexicographic order
    /// (all shorter words first, then lexicographic within a length).
    pub fn index(&self) -> usize {
        let mut rank = 0usize;
        for &l in &self.letters {
            rank = rank * self.d + (l - 1);
        }
        words_below_length(self.d, self.letters.len()) + rank
    }

    pub fn from_index(d: usize, mut index: usize) -> Word {
        let mut len = 0;
        loop {
            let count = d.pow(len as u32);
            if index < count {
                break;
            }
            index -= count;
            len += 1;
        }
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = index % d + 1;
            index /= d;
        }
        Word { d, letters }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d > 9 {
            let parts: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
            write!(f, "{}", parts.join("."))
        } else {
            for l in &self.letters {
                write!(f, "{l}")?;
            }
            Ok(())
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            write!(f, "∅")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Number of words of length strictly less than `len`.
pub fn words_below_length(d: usize, len: usize) -> usize {
    if d == 1 {
        len
    } else {
        (d.pow(len as u32) - 1) / (d - 1)
    }
}

/// Number of words of length at most `depth`.
pub fn words_up_to(d: usize, depth: usize) -> usize {
    words_below_length(d, depth + 1)
}

/// The word cap in force: `MDLSYS_MAX_WORDS` if set and valid, else the default.
pub fn max_words() -> usize {
    std::env::var(MAX_WORDS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_WORDS)
}

fn check_word_budget(d: usize, depth: usize, cap: usize) -> Result<(), CombinatoricsError> {
    let requested = (d as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(CombinatoricsError::TooManyWords { requested, cap });
    }
    Ok(())
}

/// All `d^N` words of length `N` in lexicographic order.
pub fn enumerate_words(d: usize, level: usize) -> Result<Vec<Word>, CombinatoricsError> {
    enumerate_words_capped(d, level, max_words())
}

pub fn enumerate_words_capped(
    d: usize,
    level: usize,
    cap: usize,
) -> Result<Vec<Word>, CombinatoricsError> {
    if d == 0 {
        return Err(CombinatoricsError::EmptyAlphabet);
    }
    check_word_budget(d, level, cap)?;
    let start = words_below_length(d, level);
    let count = d.pow(level as u32);
    Ok((start..start + count)
        .map(|i| Word::from_index(d, i))
        .collect())
}

/// All words of length at most `depth`, in graded lexicographic order,
/// so that `words[i].index() == i`.
pub fn enumerate_words_up_to(d: usize, depth: usize) -> Result<Vec<Word>, CombinatoricsError> {
    if d == 0 {
        return Err(CombinatoricsError::EmptyAlphabet);
    }
    let cap = max_words();
    check_word_budget(d, depth, cap)?;
    let total = words_up_to(d, depth);
    if total as u128 > 2 * cap as u128 {
        return Err(CombinatoricsError::TooManyWords {
            requested: total as u128,
            cap,
        });
    }
    Ok((0..total).map(|i| Word::from_index(d, i)).collect())
}

pub fn transpose(v: &Word) -> Word {
    let mut letters = v.letters.clone();
    letters.reverse();
    Word { d: v.d, letters }
}

/// `k^{-1} v`: the remainder `v'` when `v = k v'`, otherwise `None`.
pub fn left_quotient(k: usize, v: &Word) -> Option<Word> {
    match v.letters.first() {
        Some(&l) if l == k => Some(Word {
            d: v.d,
            letters: v.letters[1..].to_vec(),
        }),
        _ => None,
    }
}

/// Point of `Z^d_+`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<usize>,
}

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex { entries }
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex {
            entries: vec![0; d],
        }
    }

    /// `e_j`, with `j` one-based.
    pub fn unit(d: usize, j: usize) -> Self {
        let mut entries = vec![0; d];
        entries[j - 1] = 1;
        MultiIndex { entries }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// `|n|`
    pub fn total(&self) -> usize {
        self.entries.iter().sum()
    }

    /// `n_j`, one-based.
    pub fn get(&self, j: usize) -> usize {
        self.entries[j - 1]
    }

    /// `n - e_j`, or `None` off the positive orthant.
    pub fn minus_unit(&self, j: usize) -> Option<MultiIndex> {
        if self.entries[j - 1] == 0 {
            return None;
        }
        let mut entries = self.entries.clone();
        entries[j - 1] -= 1;
        Some(MultiIndex { entries })
    }

    pub fn plus_unit(&self, j: usize) -> MultiIndex {
        let mut entries = self.entries.clone();
        entries[j - 1] += 1;
        MultiIndex { entries }
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `self - other` when `other <= self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for (a, b) in self.entries.iter().zip(&other.entries) {
            entries.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex { entries })
    }

    /// The word `1^{n_1} 2^{n_2} ... d^{n_d}`, one representative of the fiber.
    pub fn canonical_word(&self) -> Word {
        let mut letters = Vec::with_capacity(self.total());
        for (j, &count) in self.entries.iter().enumerate() {
            letters.extend(std::iter::repeat_n(j + 1, count));
        }
        Word {
            d: self.entries.len(),
            letters,
        }
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.entries)
    }
}

/// All multi-indices with `|n| = total`, lexicographically decreasing
/// (so `(N,0,..)` comes first).
pub fn multi_indices_of_degree(d: usize, total: usize) -> Vec<MultiIndex> {
    fn fill(d: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == d {
            prefix.push(remaining);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            fill(d, remaining - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    fill(d, total, &mut Vec::with_capacity(d), &mut out);
    out
}

/// All multi-indices with `|n| <= max_total`, graded.
pub fn multi_indices_up_to(d: usize, max_total: usize) -> Vec<MultiIndex> {
    (0..=max_total)
        .flat_map(|t| multi_indices_of_degree(d, t))
        .collect()
}

pub fn abelianize(v: &Word) -> MultiIndex {
    let mut entries = vec![0; v.d];
    for &l in &v.letters {
        entries[l - 1] += 1;
    }
    MultiIndex { entries }
}

/// All words `v` with `abelianize(v) = n`, in lexicographic order.
pub fn fiber(n: &MultiIndex) -> Vec<Word> {
    fn go(counts: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Word>, d: usize) {
        if counts.iter().all(|&c| c == 0) {
            out.push(Word {
                d,
                letters: prefix.clone(),
            });
            return;
        }
        for j in 0..counts.len() {
            if counts[j] > 0 {
                counts[j] -= 1;
                prefix.push(j + 1);
                go(counts, prefix, out, d);
                prefix.pop();
                counts[j] += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut counts = n.entries.clone();
    go(&mut counts, &mut Vec::new(), &mut out, n.dim());
    out
}

/// `|n|!/n!` held exactly, together with its floating image.
#[derive(Clone, Debug, PartialEq)]
pub struct MultinomialWeight {
    pub exact: BigUint,
    pub value: f64,
}

impl MultinomialWeight {
    /// The Arveson weight `n!/|n|!`.
    pub fn reciprocal(&self) -> f64 {
        1.0 / self.value
    }
}

fn factorial(k: usize) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `|n|!/n!`, the size of the fiber over `n`.
pub fn multinomial_weight(n: &MultiIndex) -> Result<MultinomialWeight, CombinatoricsError> {
    multinomial_weight_capped(n, DEFAULT_WEIGHT_CAP)
}

pub fn multinomial_weight_capped(
    n: &MultiIndex,
    cap: usize,
) -> Result<MultinomialWeight, CombinatoricsError> {
    let degree = n.total();
    if degree > cap {
        return Err(CombinatoricsError::WeightOverflow { degree, cap });
    }
    let denominator = n
        .entries
        .iter()
        .fold(BigUint::one(), |acc, &k| acc * factorial(k));
    let exact = factorial(degree) / denominator;
    let value = exact.to_f64().unwrap_or(f64::INFINITY);
    Ok(MultinomialWeight { exact, value })
}

/// Incremental `|n|!/n!` in floating point, used on hot paths where the
/// exact value has already been validated: `w(n) = w(n - e_j) * |n| / n_j`.
pub(crate) fn multinomial_f64(n: &MultiIndex) -> f64 {
    let mut value = 1.0;
    let mut running = 0usize;
    for &k in &n.entries {
        for i in 1..=k {
            running += 1;
            value *= running as f64 / i as f64;
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(d: usize, s: &str) -> Word {
        Word::parse(d, s).unwrap()
    }

    #[test]
    fn enumerate_small_levels() {
        assert_eq!(enumerate_words(2, 0).unwrap(), vec![Word::empty(2)]);
        let two = enumerate_words(2, 2).unwrap();
        let shown: Vec<String> = two.iter().map(|v| v.to_string()).collect();
        assert_eq!(shown, ["11", "12", "21", "22"]);
        assert_eq!(enumerate_words(3, 2).unwrap().len(), 9);
    }

    #[test]
    fn enumeration_respects_cap() {
        let err = enumerate_words_capped(3, 5, 100).unwrap_err();
        assert_eq!(
            err,
            CombinatoricsError::TooManyWords {
                requested: 243,
                cap: 100
            }
        );
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(transpose(&w(2, "121")), w(2, "121"));
        assert_eq!(transpose(&w(2, "12")), w(2, "21"));
        assert_eq!(transpose(&Word::empty(2)), Word::empty(2));
    }

    #[test]
    fn abelianize_examples() {
        assert_eq!(abelianize(&w(2, "121")), MultiIndex::new(vec![2, 1]));
        assert_eq!(abelianize(&Word::empty(2)), MultiIndex::new(vec![0, 0]));
        assert_eq!(abelianize(&w(3, "312")), MultiIndex::new(vec![1, 1, 1]));
    }

    #[test]
    fn weights() {
        let two = multinomial_weight(&MultiIndex::new(vec![1, 1])).unwrap();
        assert_eq!(two.value, 2.0);
        let fiber_11: Vec<String> = fiber(&MultiIndex::new(vec![1, 1]))
            .iter()
            .map(|v| v.to_string())
            .collect();
        assert_eq!(fiber_11, ["12", "21"]);
        assert_eq!(multinomial_weight(&MultiIndex::zero(3)).unwrap().value, 1.0);
        // brute force: words of length 4 over {1,2} with two of each letter
        let count = enumerate_words(2, 4)
            .unwrap()
            .iter()
            .filter(|v| abelianize(v) == MultiIndex::new(vec![2, 2]))
            .count();
        assert_eq!(count, 6);
        assert_eq!(
            multinomial_weight(&MultiIndex::new(vec![2, 2]))
                .unwrap()
                .value,
            6.0
        );
    }

    #[test]
    fn weight_cap() {
        let n = MultiIndex::new(vec![30, 11]);
        assert_eq!(
            multinomial_weight(&n).unwrap_err(),
            CombinatoricsError::WeightOverflow {
                degree: 41,
                cap: 40
            }
        );
        let big = multinomial_weight_capped(&n, 60).unwrap();
        assert_eq!(big.exact.to_string(), "3159461968");
    }

    #[test]
    fn left_quotient_examples() {
        assert_eq!(left_quotient(1, &w(2, "12")), Some(w(2, "2")));
        assert_eq!(left_quotient(2, &w(2, "12")), None);
        assert_eq!(left_quotient(1, &Word::empty(2)), None);
    }

    #[test]
    fn index_roundtrip() {
        for d in 1..4 {
            for (i, v) in enumerate_words_up_to(d, 4).unwrap().iter().enumerate() {
                assert_eq!(v.index(), i);
                assert_eq!(Word::from_index(d, i), *v);
            }
        }
    }

    #[test]
    fn float_weight_matches_exact() {
        for n in multi_indices_up_to(3, 12) {
            let exact = multinomial_weight(&n).unwrap().value;
            assert!((multinomial_f64(&n) - exact).abs() <= 1e-12 * exact);
        }
    }
}
