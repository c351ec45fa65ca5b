//! Random test formulas: depth at most two, monoids `U1`, `C2`, `C3`, `S3`,
//! at most two free variables and two moduli.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::builtin;
use crate::boundary::BoundaryError;
use crate::collapse::{collapse, CollapseError};
use crate::syntax::{parse, Formula, Var};
use crate::words::Alphabet;

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub text: String,
    #[serde(skip)]
    pub formula: Formula,
    #[serde(skip)]
    pub free: Vec<Var>,
}

const MONOIDS: [&str; 4] = ["U1", "C2", "C3", "S3"];
const FREE: [&str; 2] = ["x", "y"];

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    free: Vec<&'static str>,
    moduli: Vec<u64>,
    letters: Vec<char>,
    neutral: char,
}

impl Gen<'_> {
    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        *xs.choose(self.rng).expect("non-empty choice")
    }

    fn letter_atom(&mut self, v: &str) -> String {
        let c = self.pick(&self.letters.clone());
        format!("'{c}'({v})")
    }

    /// An atom about the pivot `v`, possibly mentioning free variables.
    fn atom(&mut self, v: &str) -> String {
        let k = self.rng.gen_range(1..=3);
        let choice = self.rng.gen_range(0..9);
        if self.free.is_empty() && (2..=6).contains(&choice) {
            return self.letter_atom(v);
        }
        let x = if self.free.is_empty() { "x" } else { self.pick(&self.free.clone()) };
        match choice {
            0 | 1 => self.letter_atom(v),
            2 => format!("{v} < {x}"),
            3 => format!("{v} > {x}"),
            4 => format!("{v} = {x} + {k}"),
            5 => format!("{v} + {v} < {x}"),
            6 => format!("{v} > {x} + {x} + {k}"),
            _ => match self.moduli.clone().choose(self.rng) {
                Some(q) => format!("{v} =mod {q} {}", self.rng.gen_range(0..*q)),
                None => self.letter_atom(v),
            },
        }
    }

    /// A quantifier over `u` nested under the pivot `v`.
    fn inner(&mut self, v: &str) -> String {
        let u = "v";
        let c = self.pick(&self.letters.clone());
        let n = self.neutral;
        match self.rng.gen_range(0..5) {
            0 => format!("Q{{U1,0}} {u} [!'{n}'({u})] . < {v} = {u} + {u} + 1 >"),
            1 => format!("Q{{U1,0}} {u} [!'{n}'({u})] . < {u} < {v} & '{c}'({u}) >"),
            2 => format!("Q{{U1,0}} {u} . < {u} > {v} & '{c}'({u}) >"),
            3 => format!("Q{{C2,g}} {u} . < {u} < {v} & '{c}'({u}) >"),
            _ => format!("Q{{U1,1}} {u} . < {u} = {v} + 1 & !'{n}'({u}) >"),
        }
    }

    fn body(&mut self, v: &str, depth: u32) -> String {
        let a = if depth > 1 && self.rng.gen_bool(0.6) { self.inner(v) } else { self.atom(v) };
        match self.rng.gen_range(0..4) {
            0 => a,
            1 => format!("!({a})"),
            2 => format!("({a}) & ({})", self.atom(v)),
            _ => format!("({a}) | ({})", self.atom(v)),
        }
    }

    fn formula(&mut self, depth: u32) -> String {
        let name = self.pick(&MONOIDS);
        let m = builtin(name).expect("builtin monoid");
        let target = m.elem_name(self.rng.gen_range(0..m.size())).to_string();
        let mut bodies: Vec<String> = (0..m.arity()).map(|_| self.body("z", depth)).collect();
        if m.arity() > 2 {
            for b in bodies.iter_mut().skip(2) {
                *b = "false".to_string();
            }
            bodies.shuffle(self.rng);
        }
        format!("Q{{{name},{target}}} z . < {} >", bodies.join(", "))
    }
}

/// Largest collapsed DAG kept in the corpus.
pub const MAX_COLLAPSED_NODES: usize = 50_000;

/// `count` formulas that collapse within the size caps, from `seed`.
pub fn generate_corpus(count: usize, seed: u64, alphabet: &Alphabet) -> Result<Vec<CorpusEntry>, CollapseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let nfree = rng.gen_range(0..=2);
        let free: Vec<&'static str> = FREE[..nfree].to_vec();
        let nmod = rng.gen_range(0..=2);
        let moduli: Vec<u64> = [2u64, 3][..nmod].to_vec();
        let depth = if out.len() % 2 == 0 { 1 } else { 2 };
        let letters: Vec<char> = alphabet.non_neutral().collect();
        let mut g = Gen { rng: &mut rng, free, moduli, letters, neutral: alphabet.neutral() };
        let text = g.formula(depth);
        let formula = parse(&text).expect("generated formulas parse");
        match collapse(&formula, alphabet) {
            Ok(res) if res.formula.dag_size() <= MAX_COLLAPSED_NODES => {}
            Ok(_) => continue,
            Err(CollapseError::Boundary(BoundaryError::SizeCap { .. })) => continue,
            Err(e) => return Err(e),
        }
        let free = formula.free_vars().to_vec();
        out.push(CorpusEntry { text, formula, free });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_within_bounds() {
        let ab = Alphabet::with_neutral(['a', 'b'], '_');
        let c1 = generate_corpus(20, 7, &ab).unwrap();
        let c2 = generate_corpus(20, 7, &ab).unwrap();
        assert_eq!(c1.iter().map(|e| &e.text).collect::<Vec<_>>(), c2.iter().map(|e| &e.text).collect::<Vec<_>>());
        for e in &c1 {
            assert!(e.formula.quantifier_depth() <= 2, "{}", e.text);
            assert!(e.free.len() <= 2);
            assert!(e.formula.moduli().len() <= 2);
        }
        assert!(c1.iter().any(|e| e.formula.quantifier_depth() == 2));
    }
}
