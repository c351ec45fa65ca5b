use super::*;
use crate::semantics::{eval_omega, Assignment, OmegaPolicy, OmegaVerdict};
use crate::syntax::parse;
use crate::words::{sample_word, DomainDr, WordModel};
use itertools::Itertools;

fn agree_on_samples(src: &str, letters: &[char], params: &[&str], words: usize, seed: u64) -> CollapseResult {
    let phi = parse(src).unwrap();
    let alphabet = Alphabet::with_neutral(letters.iter().copied(), '_');
    let res = collapse(&phi, &alphabet).unwrap();
    assert!(is_active_domain(&res.formula, '_'), "{src}");
    let d = DomainDr::new(res.threshold, 4).unwrap();
    let policy = OmegaPolicy::strict();
    for i in 0..words as u64 {
        let w = sample_word(&d, &alphabet, (i % 4) as usize, seed + i).unwrap();
        for a in assignments(&w, params) {
            let lhs = eval_omega(&phi, &w, &a, &policy).unwrap();
            let rhs = eval_omega(&res.formula, &w, &a, &policy).unwrap();
            assert_ne!(rhs, OmegaVerdict::NonConvergent);
            assert_eq!(lhs, rhs, "{src} on {:?} with {a:?}", w.support());
        }
    }
    res
}

fn assignments(w: &WordModel, params: &[&str]) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    let values: Vec<i128> = w.nnp().into_iter().chain([0, 3]).collect();
    for p in params {
        let v = Var::named(p);
        out = out.into_iter().flat_map(|a| values.iter().map(move |&x| {
            let mut a = a.clone();
            a.insert(v, x);
            a
        })).collect();
    }
    out
}

#[test]
fn parity_of_letters() {
    agree_on_samples("Q{C2,g} z . < 'a'(z) >", &['a'], &[], 12, 1);
    agree_on_samples("Q{C2,1} z . < 'a'(z) >", &['a'], &[], 12, 2);
}

#[test]
fn fixed_words() {
    let phi = parse("Q{C2,1} z . < 'a'(z) >").unwrap();
    let alphabet = Alphabet::with_neutral(['a'], '_');
    let res = collapse(&phi, &alphabet).unwrap();
    let r = res.threshold as i128;
    let policy = OmegaPolicy::strict();
    for (support, expect) in [(vec![], true), (vec![r], false), (vec![r, r * r], true)] {
        let w = WordModel::from_support(alphabet.clone(), support.iter().map(|&p| (p, 'a'))).unwrap();
        assert_eq!(eval_omega(&res.formula, &w, &Assignment::new(), &policy).unwrap().as_bool(), Some(expect));
    }
}

#[test]
fn order_and_congruence_bodies() {
    agree_on_samples("Q{C2,g} z . < z < x & z =mod 2 0 >", &['a'], &["x"], 6, 3);
    agree_on_samples("Q{C3,g} z . < 'a'(z), z = x + 1 >", &['a'], &["x"], 6, 4);
}

#[test]
fn u1_quantifiers() {
    agree_on_samples("Q{U1,0} z . < 'a'(z) >", &['a', 'b'], &[], 10, 5);
    agree_on_samples("Q{U1,1} z . < z > x & 'b'(z) >", &['a', 'b'], &["x"], 6, 6);
    agree_on_samples("Q{U1,0} z . < z = x + 2 >", &['a'], &["x"], 6, 7);
}

#[test]
fn nonabelian_order_matters() {
    agree_on_samples("Q{S3,(123)} z . < 'a'(z), 'b'(z), false, false, false >", &['a', 'b'], &[], 12, 8);
    agree_on_samples("Q{S3,(132)} z . < 'a'(z), 'b'(z), false, false, false >", &['a', 'b'], &[], 12, 9);
}

#[test]
fn nested_quantifiers() {
    agree_on_samples("Q{C2,g} x [!'_'(x)] . < Q{U1,0} z . < 'a'(z) & z > x > >", &['a', 'b'], &[], 8, 10);
}

#[test]
fn active_domain_input_is_unchanged() {
    let phi = parse("Q{C2,g} x [!'_'(x)] . < 'a'(x) >").unwrap();
    let res = collapse(&phi, &Alphabet::with_neutral(['a'], '_')).unwrap();
    assert_eq!(res.formula, phi);
    assert_eq!(res.threshold, MIN_THRESHOLD);
}

#[test]
fn tail_witness_decides_order_atoms() {
    let z = Var::named("z");
    let body = parse("z > x & z =mod 3 1").unwrap();
    assert!(tail_witness(&body, z, 3).is_true());
    let body = parse("z < x | z = 4").unwrap();
    assert!(tail_witness(&body, z, 1).is_false());
}

#[test]
fn pivot_atoms_over_bound_variables() {
    agree_on_samples("Q{C2,g} z . < Q{U1,0} y [!'_'(y)] . < z = y + y + 1 | z = y + 3 > >", &['a'], &[], 10, 11);
    agree_on_samples(
        "Q{C3,g} z . < Q{U1,0} y [!'_'(y)] . < z > y & z < y + y >, z =mod 2 1 & z < x >",
        &['a'],
        &["x"],
        5,
        12,
    );
}

fn ramsey_agrees(src: &str, letters: &[char], params: &[&str], x_len: u32) -> PipelineResult {
    let phi = parse(src).unwrap();
    let alphabet = Alphabet::with_neutral(letters.iter().copied(), '_');
    let res = pipeline(&phi, &alphabet, None, x_len, 3).unwrap();
    let psi = &res.ramsey.formula;
    assert!(is_order_only(psi), "{psi}");
    let y = &res.ramsey.y;
    let policy = OmegaPolicy::strict();
    let vars: Vec<Var> = params.iter().map(|p| Var::named(p)).collect();
    for size in 0..=3.min(y.len()) {
        for support in y.iter().copied().combinations(size) {
            for word in support.iter().map(|_| letters.iter().copied()).multi_cartesian_product() {
                let w = WordModel::from_support(alphabet.clone(), support.iter().copied().zip(word)).unwrap();
                for vals in vars.iter().map(|_| y.iter().copied()).multi_cartesian_product() {
                    let a: Assignment = vars.iter().copied().zip(vals).collect();
                    let lhs = eval_omega(&res.collapse.formula, &w, &a, &policy).unwrap();
                    let rhs = eval_omega(psi, &w, &a, &policy).unwrap();
                    assert_eq!(lhs, rhs, "{src} on {:?} with {a:?}", w.support());
                }
            }
        }
    }
    res
}

#[test]
fn pipeline_is_order_only_and_agrees() {
    ramsey_agrees("Q{C2,1} z . < 'a'(z) & z + z > z >", &['a'], &[], 8);
    ramsey_agrees("Q{C2,g} z . < z < x & z =mod 2 0 >", &['a'], &["x"], 8);
    ramsey_agrees("Q{U1,0} z . < z = x + 2 | 'b'(z) & z > x >", &['a', 'b'], &["x"], 8);
    ramsey_agrees("Q{C2,g} z . < Q{U1,0} y [!'_'(y)] . < z = y + y + 1 | z = y + 3 > >", &['a'], &[], 8);
}
