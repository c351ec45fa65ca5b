//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use adcollapse::boundary::CollapseContext;
use adcollapse::collapse::{collapse, is_order_only, pipeline, ramsey_reduce, CollapseResult, RamseyResult};
use adcollapse::harness::{equivalence_check, generate_corpus, lemma_suite, neutral_invariance_check, CorpusEntry, EquivReport, SamplerConfig, SuiteConfig};
use adcollapse::semantics::{eval_omega, Assignment, Evaluator, OmegaPolicy, OmegaVerdict};
use adcollapse::sorting_tree;
use adcollapse::syntax::{is_active_domain, parse, Formula, Kind, Value, Var};
use adcollapse::words::{embed_order_preserving, Alphabet, DomainDr, WordModel};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
const CORPUS_SIZE: usize = 60;
const SAMPLES_PER_BASE: usize = 100;
const SAMPLE_MAX_EXP: u32 = 4;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(600);
const TOTAL_PRODUCT_MIN: usize = 100;
const INTERVAL_PRODUCT_MIN: usize = 50;
const TREE_RANDOM_MIN: usize = 100;
const SUITE_INSTANCES: usize = 100;
const RAMSEY_X_LEN: u32 = 8;
const RAMSEY_SUPPORT: usize = 3;
const INVARIANCE_TRIALS: usize = 1000;
const PARITY_WORDS: usize = 200;
const PARITY_MAX_LEN: usize = 40;
const PARITY_R: u64 = 4;
const PARITY_MAX_EXP: u32 = 48;

fn report(n: u32, name: &str, ok: bool, detail: impl std::fmt::Display) -> bool {
    println!("criterion {n} ({name}): {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn alphabet() -> Alphabet {
    Alphabet::with_neutral(['a', 'b'], '_')
}

struct Collapsed {
    entry: CorpusEntry,
    result: CollapseResult,
}

struct Corpus {
    items: Vec<Collapsed>,
    elapsed: Duration,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let ab = alphabet();
        let items = generate_corpus(CORPUS_SIZE, SEED, &ab)
            .expect("corpus generates")
            .into_iter()
            .map(|entry| {
                let result = collapse(&entry.formula, &ab).expect("corpus formulas collapse");
                Collapsed { entry, result }
            })
            .collect();
        Corpus { items, elapsed: start.elapsed() }
    })
}

struct Reduced {
    source: String,
    collapsed: Formula,
    ramsey: RamseyResult,
}

fn reduced() -> &'static Vec<Result<Reduced, String>> {
    static REDUCED: OnceLock<Vec<Result<Reduced, String>>> = OnceLock::new();
    REDUCED.get_or_init(|| {
        corpus()
            .items
            .iter()
            .map(|c| {
                let x = DomainDr::new(c.result.threshold, RAMSEY_X_LEN).map_err(|e| e.to_string())?.points();
                let ramsey = ramsey_reduce(&c.result.formula, &x, RAMSEY_SUPPORT).map_err(|e| format!("{}: {e}", c.entry.text))?;
                Ok(Reduced { source: c.entry.text.clone(), collapsed: c.result.formula.clone(), ramsey })
            })
            .collect()
    })
}

fn has_plus_or_cong(f: &Formula) -> bool {
    let mut found = false;
    f.visit_unique(&mut |g| match g.kind() {
        Kind::Cong(..) => found = true,
        Kind::Cmp(_, a, b) => found |= [a, b].iter().any(|t| t.coeffs().count() > 1 || t.coeffs().any(|(_, k)| k != 1) || (!t.is_constant() && t.constant_part() != 0)),
        Kind::Letter(_, t) => found |= t.as_var().is_none(),
        _ => {}
    });
    found
}

fn collapse_soundness() -> bool {
    let start = Instant::now();
    let corpus = corpus();
    let ab = alphabet();
    let mut total = EquivReport::default();
    let mut short = Vec::new();
    for (i, c) in corpus.items.iter().enumerate() {
        let th = c.result.threshold;
        for r in [th, th + 1] {
            let cfg = SamplerConfig { r: vec![r], max_exp: SAMPLE_MAX_EXP, samples: SAMPLES_PER_BASE, seed: SEED + i as u64, ..SamplerConfig::default() };
            let rep = equivalence_check(&c.entry.formula, &c.result.formula, &ab, &cfg).expect("sampling succeeds");
            if rep.total < SAMPLES_PER_BASE {
                short.push(format!("{} at r={r}: {}", c.entry.text, rep.total));
            }
            total.merge(rep);
        }
    }
    let elapsed = start.elapsed() + corpus.elapsed;
    let depth2 = corpus.items.iter().filter(|c| c.entry.formula.quantifier_depth() == 2).count();
    let ok = corpus.items.len() >= 50
        && short.is_empty()
        && total.is_clean()
        && total.is_consistent()
        && elapsed <= SOUNDNESS_BUDGET;
    let first = total.counterexamples.first().map(|c| format!(" first: {} {:?} {} vs {}", c.word, c.assignment, c.lhs, c.rhs)).unwrap_or_default();
    report(
        1,
        "collapse soundness",
        ok,
        format!("formulas={} depth2={depth2} {} short={short:?} elapsed={elapsed:.1?}{first}", corpus.items.len(), total.summary()),
    )
}

fn suite(name: &str, instances: usize) -> EquivReport {
    lemma_suite(name, &SuiteConfig { instances, seed: SEED, ..SuiteConfig::default() }).expect("suite runs")
}

fn total_product_identity() -> bool {
    let rep = suite("total-product", 6 * SUITE_INSTANCES);
    let ok = rep.is_clean() && rep.is_consistent() && rep.total >= TOTAL_PRODUCT_MIN;
    report(2, "total product", ok, rep.summary())
}

fn interval_product_identity() -> bool {
    let rep = suite("interval-product", SUITE_INSTANCES);
    let checked = SUITE_INSTANCES - rep.skipped;
    let ok = rep.is_clean() && rep.is_consistent() && checked >= INTERVAL_PRODUCT_MIN;
    report(3, "interval product", ok, format!("instances={checked} {}", rep.summary()))
}

fn sorting_tree_order() -> bool {
    let ctx = CollapseContext::synthetic(2, 2, 1, 1, vec![]);
    let reference = sorting_tree::build(0, &[5, 25, 625], 5, &ctx, &Assignment::new()).expect("reference tree");
    let has_575 = reference.leaves().contains(&575);
    let order = suite("tree-order", TREE_RANDOM_MIN + 1);
    let sep = suite("separation", TREE_RANDOM_MIN + 1);
    let ok = has_575
        && [&order, &sep].iter().all(|r| r.is_clean() && r.is_consistent() && r.total >= TREE_RANDOM_MIN + 1);
    report(4, "sorting tree", ok, format!("leaf575={has_575} order: {} separation: {}", order.summary(), sep.summary()))
}

fn boundary_inclusion_and_periodicity() -> bool {
    let inc = suite("boundary-inclusion", SUITE_INSTANCES);
    let per = suite("interval-periodicity", SUITE_INSTANCES);
    let ok = [&inc, &per].iter().all(|r| r.is_clean() && r.is_consistent() && r.total > 0);
    report(5, "boundary inclusion and periodicity", ok, format!("inclusion: {} periodicity: {}", inc.summary(), per.summary()))
}

/// Compares `collapsed` and `psi` on every word with support in `Y` of size
/// at most `RAMSEY_SUPPORT` and every parameter tuple from `Y`.
fn ramsey_check(r: &Reduced, ab: &Alphabet) -> EquivReport {
    let letters: Vec<char> = ab.non_neutral().collect();
    let y = &r.ramsey.y;
    // Both sides are active-domain, so one evaluator per word serves every
    // assignment once the horizon floor covers all of `Y`.
    let floor = 2 * (y.iter().copied().max().unwrap_or(0) + 1);
    let policy = OmegaPolicy { h0: Some(floor), ..OmegaPolicy::strict() };
    let mut vars: Vec<Var> = r.collapsed.free_vars().to_vec();
    vars.extend(r.ramsey.formula.free_vars().iter().copied().filter(|v| !vars.contains(v)).collect::<Vec<_>>());
    let mut rep = EquivReport::default();
    for size in 0..=RAMSEY_SUPPORT.min(y.len()) {
        for support in y.iter().copied().combinations(size) {
            for word in support.iter().map(|_| letters.iter().copied()).multi_cartesian_product() {
                let w = WordModel::from_support(ab.clone(), support.iter().copied().zip(word)).expect("valid word");
                let mut left = Evaluator::omega(&w, &r.collapsed, &policy);
                let mut right = Evaluator::omega(&w, &r.ramsey.formula, &policy);
                for vals in vars.iter().map(|_| y.iter().copied()).multi_cartesian_product() {
                    let a: Assignment = vars.iter().copied().zip(vals).collect();
                    let lhs = OmegaVerdict::from_tv(left.eval(&r.collapsed, &a).expect("evaluates"));
                    let rhs = OmegaVerdict::from_tv(right.eval(&r.ramsey.formula, &a).expect("evaluates"));
                    rep.compare(&w, &a, lhs, rhs);
                }
            }
        }
    }
    rep
}

fn ramsey_reduction() -> bool {
    let ab = alphabet();
    let mut total = EquivReport::default();
    let mut errors = Vec::new();
    let mut impure = Vec::new();
    let mut sizes = Vec::new();
    for r in reduced() {
        match r {
            Err(e) => errors.push(e.clone()),
            Ok(r) => {
                if !is_order_only(&r.ramsey.formula) || has_plus_or_cong(&r.ramsey.formula) {
                    impure.push(r.source.clone());
                }
                sizes.push(r.ramsey.y.len());
                total.merge(ramsey_check(r, &ab));
            }
        }
    }
    let ok = errors.is_empty() && impure.is_empty() && total.is_clean() && total.is_consistent();
    let min_y = sizes.iter().min().copied().unwrap_or(0);
    let first = total.counterexamples.first().map(|c| format!(" first: {} {:?}", c.word, c.assignment)).unwrap_or_default();
    report(6, "ramsey reduction", ok, format!("formulas={} min|Y|={min_y} {} errors={errors:?} impure={impure:?}{first}", sizes.len(), total.summary()))
}

const PARITY: &str = "Q{C2,1} z . < '1'(z) & !(z + z < z) >";

fn parity_alphabet() -> Alphabet {
    Alphabet::with_neutral(['1'], '0')
}

fn parity_pipeline() -> adcollapse::collapse::PipelineResult {
    pipeline(&parse(PARITY).unwrap(), &parity_alphabet(), Some(PARITY_R), PARITY_MAX_EXP, PARITY_MAX_LEN).expect("parity pipeline")
}

fn neutral_letter_invariance() -> bool {
    let mut total = EquivReport::default();
    let mut checked = 0;
    let mut errors = Vec::new();
    for (i, r) in reduced().iter().enumerate() {
        let Ok(r) = r else { continue };
        match neutral_invariance_check(&r.ramsey.formula, &alphabet(), INVARIANCE_TRIALS, SEED + i as u64) {
            Ok(rep) => {
                checked += 1;
                total.merge(rep);
            }
            Err(e) => errors.push(format!("{}: {e}", r.source)),
        }
    }
    let psi = parity_pipeline().ramsey.formula;
    total.merge(neutral_invariance_check(&psi, &parity_alphabet(), INVARIANCE_TRIALS, SEED).expect("parity is active-domain"));
    checked += 1;
    let ok = errors.is_empty() && total.is_clean() && total.is_consistent() && total.total == checked * INVARIANCE_TRIALS;
    report(7, "neutral-letter invariance", ok, format!("sentences={checked} {} errors={errors:?}", total.summary()))
}

fn parity_end_to_end() -> bool {
    let phi = parse(PARITY).unwrap();
    let genuine_plus = has_plus_or_cong(&phi);
    let res = parity_pipeline();
    let psi = &res.ramsey.formula;
    let ab = parity_alphabet();
    let pure = is_order_only(psi) && !has_plus_or_cong(psi) && is_active_domain(psi, ab.neutral());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let policy = OmegaPolicy::strict();
    let mut agree = 0;
    let mut first_miss = None;
    for _ in 0..PARITY_WORDS {
        let len = rng.gen_range(0..=PARITY_MAX_LEN);
        let dense: String = (0..len).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect();
        let support: Vec<(Value, char)> = dense.chars().enumerate().filter(|p| p.1 == '1').map(|(i, c)| (i as Value, c)).collect();
        let w = WordModel::from_support(ab.clone(), support).expect("dense word");
        let embedded = embed_order_preserving(&w, &res.ramsey.y).expect("Y is large enough");
        let truth = dense.chars().filter(|&c| c == '1').count() % 2 == 0;
        let got = eval_omega(psi, &embedded, &Assignment::new(), &policy).expect("evaluates");
        if got == OmegaVerdict::from_tv(Some(truth)) {
            agree += 1;
        } else if first_miss.is_none() {
            first_miss = Some(dense);
        }
    }
    let ok = genuine_plus && pure && agree == PARITY_WORDS;
    report(
        8,
        "parity end to end",
        ok,
        format!("|Y|={} psi_size={} agree={agree}/{PARITY_WORDS} miss={first_miss:?} psi={psi}", res.ramsey.y.len(), psi.dag_size()),
    )
}

#[test]
fn acceptance() {
    let criteria: [fn() -> bool; 8] = [
        collapse_soundness,
        total_product_identity,
        interval_product_identity,
        sorting_tree_order,
        boundary_inclusion_and_periodicity,
        ramsey_reduction,
        neutral_letter_invariance,
        parity_end_to_end,
    ];
    let failed: Vec<usize> = criteria.iter().enumerate().filter(|(_, c)| !c()).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
