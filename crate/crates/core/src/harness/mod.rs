//! Differential testing of formula pairs, neutral-letter invariance, and
//! property suites for the lemmas behind the collapse.

mod corpus;
mod suites;

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::semantics::{eval_omega, Assignment, OmegaPolicy, OmegaVerdict, SemanticsError};
use crate::syntax::{is_active_domain, Formula, Value, Var};
use crate::words::{sample_word_with, Alphabet, DomainDr, WordError, WordModel};

pub use corpus::{generate_corpus, CorpusEntry};
pub use suites::{lemma_suite, SuiteConfig, SUITES};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("formula is not active-domain")]
    NotActiveDomain,
    #[error("cannot set up instance: {0}")]
    Setup(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Word(#[from] WordError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub word: String,
    pub assignment: BTreeMap<String, Value>,
    pub lhs: String,
    pub rhs: String,
}

/// Outcome of a batch of comparisons.
///
/// `total = agreements + counterexamples.len() + nonconvergent`; samples whose
/// precondition fails are counted in `skipped` only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EquivReport {
    pub total: usize,
    pub agreements: usize,
    pub counterexamples: Vec<Counterexample>,
    pub nonconvergent: usize,
    pub skipped: usize,
}

impl EquivReport {
    pub fn agree(&mut self) {
        self.total += 1;
        self.agreements += 1;
    }

    pub fn disagree(&mut self, c: Counterexample) {
        self.total += 1;
        self.counterexamples.push(c);
    }

    pub fn nonconvergent(&mut self) {
        self.total += 1;
        self.nonconvergent += 1;
    }

    /// Records a comparison of two verdicts.
    pub fn compare(&mut self, w: &WordModel, a: &Assignment, lhs: OmegaVerdict, rhs: OmegaVerdict) {
        if lhs == OmegaVerdict::NonConvergent || rhs == OmegaVerdict::NonConvergent {
            self.nonconvergent();
        } else if lhs == rhs {
            self.agree();
        } else {
            self.disagree(Counterexample::new(w, a, verdict_name(lhs), verdict_name(rhs)));
        }
    }

    pub fn merge(&mut self, other: EquivReport) {
        self.total += other.total;
        self.agreements += other.agreements;
        self.counterexamples.extend(other.counterexamples);
        self.nonconvergent += other.nonconvergent;
        self.skipped += other.skipped;
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.agreements + self.counterexamples.len() + self.nonconvergent
    }

    /// No counterexamples and no undecided samples.
    pub fn is_clean(&self) -> bool {
        self.counterexamples.is_empty() && self.nonconvergent == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "total={} agree={} counterexamples={} nonconvergent={} skipped={}",
            self.total,
            self.agreements,
            self.counterexamples.len(),
            self.nonconvergent,
            self.skipped
        )
    }
}

impl Counterexample {
    pub fn new(w: &WordModel, a: &Assignment, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Counterexample {
            word: w.to_string(),
            assignment: a.iter().map(|(v, &x)| (v.name().to_string(), x)).collect(),
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }
}

fn verdict_name(v: OmegaVerdict) -> &'static str {
    match v {
        OmegaVerdict::True => "true",
        OmegaVerdict::False => "false",
        OmegaVerdict::NonConvergent => "nonconvergent",
    }
}

/// Where samples come from: words with non-neutral positions in `D_r`.
#[derive(Clone, Debug, Serialize)]
pub struct SamplerConfig {
    pub r: Vec<u64>,
    pub max_exp: u32,
    /// Largest support of a random word.
    pub max_support: usize,
    /// Supports up to this size are enumerated before random sampling.
    pub exhaustive_support: usize,
    /// Samples per base.
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { r: vec![4], max_exp: 5, max_support: 4, exhaustive_support: 3, samples: 100, seed: 0 }
    }
}

/// Words for one base: every support of size up to `exhaustive_support` with
/// every letter choice, then random words, `limit` in total.
pub fn sample_words(d: &DomainDr, alphabet: &Alphabet, cfg: &SamplerConfig, limit: usize, rng: &mut ChaCha8Rng) -> Result<Vec<WordModel>, HarnessError> {
    let points = d.points();
    let letters: Vec<char> = alphabet.non_neutral().collect();
    let mut out = Vec::new();
    'enumerate: for size in 0..=cfg.exhaustive_support.min(points.len()) {
        for support in points.iter().copied().combinations(size) {
            let choices: Vec<Vec<char>> = if letters.is_empty() {
                vec![vec![]]
            } else {
                support.iter().map(|_| letters.iter().copied()).multi_cartesian_product().collect()
            };
            for word in choices {
                if out.len() >= limit {
                    break 'enumerate;
                }
                if word.len() == support.len() {
                    out.push(WordModel::from_support(alphabet.clone(), support.iter().copied().zip(word))?);
                }
            }
        }
    }
    if letters.is_empty() {
        out.truncate(1);
        return Ok(out);
    }
    while out.len() < limit {
        let count = rng.gen_range(0..=cfg.max_support.min(points.len()));
        out.push(sample_word_with(d, alphabet, count, rng)?);
    }
    Ok(out)
}

/// A random assignment of `vars` into `D_r ∪ {0}`.
pub fn sample_assignment(vars: &[Var], d: &DomainDr, rng: &mut ChaCha8Rng) -> Assignment {
    let mut pool = d.points();
    pool.push(0);
    vars.iter().map(|&v| (v, *pool.choose(rng).expect("non-empty pool"))).collect()
}

fn free_vars_of(fs: &[&Formula]) -> Vec<Var> {
    fs.iter().flat_map(|f| f.free_vars().iter().copied()).sorted().dedup().collect()
}

/// Compares `phi` and `psi` on sampled words and assignments under the
/// strict ω-semantics.
pub fn equivalence_check(phi: &Formula, psi: &Formula, alphabet: &Alphabet, cfg: &SamplerConfig) -> Result<EquivReport, HarnessError> {
    let vars = free_vars_of(&[phi, psi]);
    let policy = OmegaPolicy::strict();
    let mut report = EquivReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &r in &cfg.r {
        let d = DomainDr::new(r, cfg.max_exp)?;
        for w in sample_words(&d, alphabet, cfg, cfg.samples, &mut rng)? {
            let a = sample_assignment(&vars, &d, &mut rng);
            let lhs = eval_omega(phi, &w, &a, &policy)?;
            let rhs = eval_omega(psi, &w, &a, &policy)?;
            report.compare(&w, &a, lhs, rhs);
        }
    }
    Ok(report)
}

/// Inserts and deletes neutral letters at random and checks that the
/// verdict of the sentence `psi` never changes.
pub fn neutral_invariance_check(psi: &Formula, alphabet: &Alphabet, trials: usize, seed: u64) -> Result<EquivReport, HarnessError> {
    if !is_active_domain(psi, alphabet.neutral()) {
        return Err(HarnessError::NotActiveDomain);
    }
    let vars = psi.free_vars().to_vec();
    let policy = OmegaPolicy::strict();
    let letters: Vec<char> = alphabet.non_neutral().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivReport::default();
    let mut w = WordModel::empty(alphabet.clone());
    for trial in 0..trials {
        if trial % 20 == 0 && !letters.is_empty() {
            let len = rng.gen_range(0..=12);
            let mut support = Vec::new();
            for i in 0..len {
                if rng.gen_bool(0.5) {
                    support.push((i as Value, letters[rng.gen_range(0..letters.len())]));
                }
            }
            w = WordModel::from_support(alphabet.clone(), support)?;
        }
        let a: Assignment = {
            let nnp = w.nnp();
            vars.iter().map(|&v| (v, nnp.choose(&mut rng).copied().unwrap_or(0))).collect()
        };
        let before = eval_omega(psi, &w, &a, &policy)?;
        let end = w.max_position().unwrap_or(0) + 2;
        let insert = rng.gen_bool(0.5);
        let (next, at) = if insert {
            let at = rng.gen_range(0..=end);
            (w.insert_neutral(at), at)
        } else {
            let neutral: Vec<Value> = (0..=end).filter(|i| !w.support().contains_key(i)).collect();
            let at = neutral[rng.gen_range(0..neutral.len())];
            (w.delete_neutral(at)?, at)
        };
        let shift = |x: Value| match insert {
            true if x >= at => x + 1,
            false if x > at => x - 1,
            _ => x,
        };
        let a2: Assignment = a.iter().map(|(&v, &x)| (v, shift(x))).collect();
        let after = eval_omega(psi, &next, &a2, &policy)?;
        report.compare(&next, &a2, before, after);
        w = next;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn ab() -> Alphabet {
        Alphabet::with_neutral(['a', 'b'], '_')
    }

    #[test]
    fn formula_agrees_with_itself() {
        let phi = parse("Q{C2,g} z . < 'a'(z) & z > x >").unwrap();
        let rep = equivalence_check(&phi, &phi, &ab(), &SamplerConfig::default()).unwrap();
        assert_eq!(rep.total, 100);
        assert!(rep.is_clean() && rep.is_consistent());
    }

    #[test]
    fn parity_targets_disagree() {
        let one = parse("Q{C2,1} z . < 'a'(z) >").unwrap();
        let g = parse("Q{C2,g} z . < 'a'(z) >").unwrap();
        let rep = equivalence_check(&one, &g, &ab(), &SamplerConfig::default()).unwrap();
        assert_eq!(rep.agreements, 0);
        assert_eq!(rep.counterexamples.len(), rep.total);
    }

    #[test]
    fn exhaustive_words_come_first() {
        let d = DomainDr::new(4, 3).unwrap();
        let cfg = SamplerConfig::default();
        let words = sample_words(&d, &ab(), &cfg, 1000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // 1 + 3*2 + 3*4 + 1*8 words with at most three letters
        assert!(words[..27].iter().map(|w| w.to_string()).all_unique());
        assert!(words[27..].iter().all(|w| w.support().len() <= 3));
    }

    #[test]
    fn order_parity_is_neutral() {
        let psi = parse("Q{C2,1} x [!'_'(x)] . < 'a'(x) & Q{U1,0} y [!'_'(y)] . < y < x & 'b'(y) > >").unwrap();
        let rep = neutral_invariance_check(&psi, &ab(), 1000, 3).unwrap();
        assert!(rep.is_clean(), "{}", rep.summary());
        assert!(rep.total > 500);
    }

    #[test]
    fn plus_atoms_are_rejected() {
        let psi = parse("Q{U1,0} z . < z = x + x >").unwrap();
        assert!(matches!(neutral_invariance_check(&psi, &ab(), 10, 0), Err(HarnessError::NotActiveDomain)));
    }

    #[test]
    fn empty_word_invariance() {
        let psi = parse("Q{C2,1} x [!'_'(x)] . < 'a'(x) >").unwrap();
        let none = Alphabet::with_neutral([], '_');
        let rep = neutral_invariance_check(&psi, &none, 50, 0).unwrap();
        assert!(rep.is_clean());
    }

    #[test]
    fn reports_merge() {
        let mut a = EquivReport::default();
        a.agree();
        let mut b = EquivReport::default();
        b.nonconvergent();
        b.skipped += 2;
        a.merge(b);
        assert_eq!((a.total, a.agreements, a.nonconvergent, a.skipped), (2, 1, 1, 2));
        assert!(a.is_consistent() && !a.is_clean());
    }
}
