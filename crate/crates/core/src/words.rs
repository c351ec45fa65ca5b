use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::Value;

pub const DEFAULT_NEUTRAL: char = '_';
pub const DEFAULT_MAX_EXP: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("target set has {got} positions but the word has {need} non-neutral letters")]
    TargetTooSmall { need: usize, got: usize },
    #[error("position {0} holds a non-neutral letter")]
    NotNeutral(Value),
    #[error("neutral letter {0:?} is not in the alphabet")]
    NeutralNotInAlphabet(char),
    #[error("letter {0:?} is not in the alphabet")]
    UnknownLetter(char),
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u64),
    #[error("r^{exp} overflows for r = {r}")]
    Overflow { r: u64, exp: u32 },
    #[error("cannot sample {count} positions from {available}")]
    TooManyPositions { count: usize, available: usize },
    #[error("bad word literal: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    letters: Vec<char>,
    neutral: char,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(letters: I, neutral: char) -> Result<Self, WordError> {
        let mut letters: Vec<char> = letters.into_iter().collect();
        letters.sort_unstable();
        letters.dedup();
        if !letters.contains(&neutral) {
            return Err(WordError::NeutralNotInAlphabet(neutral));
        }
        Ok(Alphabet { letters, neutral })
    }

    /// Alphabet of the given non-neutral letters plus the neutral one.
    pub fn with_neutral<I: IntoIterator<Item = char>>(letters: I, neutral: char) -> Self {
        Self::new(letters.into_iter().chain([neutral]), neutral).expect("neutral is included")
    }

    pub fn letters(&self) -> &[char] {
        &self.letters
    }

    pub fn neutral(&self) -> char {
        self.neutral
    }

    pub fn non_neutral(&self) -> impl Iterator<Item = char> + '_ {
        self.letters.iter().copied().filter(move |&c| c != self.neutral)
    }

    pub fn contains(&self, c: char) -> bool {
        self.letters.binary_search(&c).is_ok()
    }

    pub fn union(&self, extra: impl IntoIterator<Item = char>) -> Alphabet {
        Self::new(self.letters.iter().copied().chain(extra), self.neutral).expect("neutral kept")
    }
}

/// A word in `Σ* λ^ω`, stored as its non-neutral positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordModel {
    alphabet: Alphabet,
    support: BTreeMap<Value, char>,
}

impl WordModel {
    pub fn empty(alphabet: Alphabet) -> Self {
        WordModel { alphabet, support: BTreeMap::new() }
    }

    pub fn from_support<I: IntoIterator<Item = (Value, char)>>(
        alphabet: Alphabet,
        support: I,
    ) -> Result<Self, WordError> {
        let mut w = Self::empty(alphabet);
        for (i, c) in support {
            if !w.alphabet.contains(c) {
                return Err(WordError::UnknownLetter(c));
            }
            if i < 0 {
                return Err(WordError::Parse(format!("negative position {i}")));
            }
            if c != w.alphabet.neutral {
                w.support.insert(i, c);
            }
        }
        Ok(w)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn neutral(&self) -> char {
        self.alphabet.neutral
    }

    pub fn support(&self) -> &BTreeMap<Value, char> {
        &self.support
    }

    pub fn letter_at(&self, i: Value) -> char {
        self.support.get(&i).copied().unwrap_or(self.alphabet.neutral)
    }

    /// `nnp(w)` in ascending order.
    pub fn nnp(&self) -> Vec<Value> {
        self.support.keys().copied().collect()
    }

    pub fn letters(&self) -> Vec<char> {
        self.support.values().copied().collect()
    }

    pub fn max_position(&self) -> Option<Value> {
        self.support.keys().next_back().copied()
    }

    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Result<Self, WordError> {
        if let Some(&c) = self.support.values().find(|c| !alphabet.contains(**c)) {
            return Err(WordError::UnknownLetter(c));
        }
        self.alphabet = alphabet;
        Ok(self)
    }

    /// Inserts a neutral letter at `at`, shifting later letters right.
    pub fn insert_neutral(&self, at: Value) -> WordModel {
        let support = self.support.iter().map(|(&i, &c)| (if i >= at { i + 1 } else { i }, c)).collect();
        WordModel { alphabet: self.alphabet.clone(), support }
    }

    /// Deletes the neutral letter at `at`, shifting later letters left.
    pub fn delete_neutral(&self, at: Value) -> Result<WordModel, WordError> {
        if self.support.contains_key(&at) {
            return Err(WordError::NotNeutral(at));
        }
        let support = self.support.iter().map(|(&i, &c)| (if i > at { i - 1 } else { i }, c)).collect();
        Ok(WordModel { alphabet: self.alphabet.clone(), support })
    }

    /// Dense rendering up to `len` positions, neutral shown as `.`.
    pub fn dense(&self, len: usize) -> String {
        (0..len as Value)
            .map(|i| match self.support.get(&i) {
                Some(&c) => c,
                None => '.',
            })
            .collect()
    }
}

impl fmt::Display for WordModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "neutral={}; w={{", self.alphabet.neutral)?;
        for (k, (i, c)) in self.support.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}:{c}")?;
        }
        f.write_str("}")
    }
}

/// Parses `neutral=_; w={5:a,25:b}` or the dense form `..a.b` (dot is neutral).
pub fn parse_word(text: &str) -> Result<WordModel, WordError> {
    let text = text.trim();
    let bad = |m: &str| WordError::Parse(format!("{m}: {text}"));
    if let Some(rest) = text.strip_prefix("neutral=") {
        let mut chars = rest.chars();
        let neutral = chars.next().ok_or_else(|| bad("missing neutral letter"))?;
        let rest = chars.as_str().trim_start();
        let rest = rest.strip_prefix(';').ok_or_else(|| bad("expected `;`"))?.trim();
        let body = rest
            .strip_prefix("w=")
            .and_then(|r| r.trim().strip_prefix('{'))
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| bad("expected w={...}"))?;
        let mut support = Vec::new();
        for entry in body.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (pos, letter) = entry.split_once(':').ok_or_else(|| bad("expected pos:letter"))?;
            let pos: Value = pos.trim().parse().map_err(|_| bad("bad position"))?;
            let mut lc = letter.trim().chars();
            let c = lc.next().ok_or_else(|| bad("missing letter"))?;
            if lc.next().is_some() {
                return Err(bad("letters are single characters"));
            }
            support.push((pos, c));
        }
        let alphabet = Alphabet::with_neutral(support.iter().map(|p| p.1), neutral);
        return WordModel::from_support(alphabet, support);
    }
    let support: Vec<(Value, char)> =
        text.chars().enumerate().filter(|(_, c)| *c != '.').map(|(i, c)| (i as Value, c)).collect();
    let alphabet = Alphabet::with_neutral(support.iter().map(|p| p.1), DEFAULT_NEUTRAL);
    WordModel::from_support(alphabet, support)
}

/// `D_r = {r^i : 0 < i <= max_exp}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDr {
    pub r: u64,
    pub max_exp: u32,
}

impl DomainDr {
    pub fn new(r: u64, max_exp: u32) -> Result<Self, WordError> {
        if r < 2 {
            return Err(WordError::InvalidBase(r));
        }
        let d = DomainDr { r, max_exp };
        d.power(max_exp)?;
        Ok(d)
    }

    pub fn with_default_exp(r: u64) -> Result<Self, WordError> {
        Self::new(r, DEFAULT_MAX_EXP)
    }

    pub fn power(&self, exp: u32) -> Result<Value, WordError> {
        (self.r as Value).checked_pow(exp).ok_or(WordError::Overflow { r: self.r, exp })
    }

    pub fn points(&self) -> Vec<Value> {
        (1..=self.max_exp).map(|e| self.power(e).expect("checked in new")).collect()
    }

    pub fn contains(&self, x: Value) -> bool {
        self.points().contains(&x)
    }
}

/// A word with `count` letters drawn uniformly from the non-neutral letters,
/// placed at distinct random points of `d`.
pub fn sample_word(d: &DomainDr, alphabet: &Alphabet, count: usize, seed: u64) -> Result<WordModel, WordError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_word_with(d, alphabet, count, &mut rng)
}

pub fn sample_word_with<R: Rng>(
    d: &DomainDr,
    alphabet: &Alphabet,
    count: usize,
    rng: &mut R,
) -> Result<WordModel, WordError> {
    let points = d.points();
    if count > points.len() {
        return Err(WordError::TooManyPositions { count, available: points.len() });
    }
    let letters: Vec<char> = alphabet.non_neutral().collect();
    if letters.is_empty() {
        return Ok(WordModel::empty(alphabet.clone()));
    }
    let mut picks = index::sample(rng, points.len(), count).into_vec();
    picks.sort_unstable();
    let support = picks.into_iter().map(|k| (points[k], letters[rng.gen_range(0..letters.len())]));
    WordModel::from_support(alphabet.clone(), support.collect::<Vec<_>>())
}

/// Moves the `i`-th non-neutral letter to the `i`-th smallest target position.
pub fn embed_order_preserving(w: &WordModel, target: &[Value]) -> Result<WordModel, WordError> {
    if target.len() < w.support.len() {
        return Err(WordError::TargetTooSmall { need: w.support.len(), got: target.len() });
    }
    let mut target = target.to_vec();
    target.sort_unstable();
    let support = target.into_iter().zip(w.support.values().copied());
    WordModel::from_support(w.alphabet.clone(), support.collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::with_neutral(['a', 'b'], '_')
    }

    fn word(support: &[(Value, char)]) -> WordModel {
        WordModel::from_support(ab(), support.to_vec()).unwrap()
    }

    #[test]
    fn letter_lookup() {
        let w = word(&[(5, 'a')]);
        assert_eq!(w.letter_at(5), 'a');
        assert_eq!(w.letter_at(6), '_');
        assert_eq!(WordModel::empty(ab()).letter_at(0), '_');
    }

    #[test]
    fn insert_and_delete_neutral() {
        let w = word(&[(5, 'a'), (7, 'b')]);
        let v = w.insert_neutral(6);
        assert_eq!(v, word(&[(5, 'a'), (8, 'b')]));
        assert_eq!(v.delete_neutral(6).unwrap(), w);
        assert_eq!(word(&[(0, 'a')]).insert_neutral(0), word(&[(1, 'a')]));
        assert_eq!(w.delete_neutral(5), Err(WordError::NotNeutral(5)));
    }

    #[test]
    fn sampling_is_deterministic_and_in_domain() {
        let d = DomainDr::new(5, 6).unwrap();
        let w = sample_word(&d, &ab(), 3, 11).unwrap();
        assert_eq!(w.nnp().len(), 3);
        assert!(w.nnp().iter().all(|&p| d.contains(p)));
        assert_eq!(w, sample_word(&d, &ab(), 3, 11).unwrap());
        assert!(sample_word(&d, &ab(), 0, 1).unwrap().support().is_empty());
    }

    #[test]
    fn embedding() {
        let w = word(&[(0, 'a'), (1, 'b')]);
        assert_eq!(embed_order_preserving(&w, &[25, 5]).unwrap(), word(&[(5, 'a'), (25, 'b')]));
        assert_eq!(embed_order_preserving(&word(&[(2, 'a')]), &[625]).unwrap(), word(&[(625, 'a')]));
        assert!(embed_order_preserving(&WordModel::empty(ab()), &[3]).unwrap().support().is_empty());
        assert!(matches!(embed_order_preserving(&w, &[1]), Err(WordError::TargetTooSmall { .. })));
    }

    #[test]
    fn literals() {
        let w = parse_word("neutral=_; w={5:a,25:b}").unwrap();
        assert_eq!(w.nnp(), vec![5, 25]);
        assert_eq!(w.letter_at(25), 'b');
        assert_eq!(parse_word(&w.to_string()).unwrap(), w);
        let d = parse_word("..a.b").unwrap();
        assert_eq!(d.nnp(), vec![2, 4]);
        assert_eq!(d.dense(5), "..a.b");
    }

    #[test]
    fn domain_rejects_small_base_and_overflow() {
        assert!(DomainDr::new(1, 3).is_err());
        assert!(DomainDr::new(10, 40).is_err());
        assert_eq!(DomainDr::new(4, 40).unwrap().points().len(), 40);
    }
}
