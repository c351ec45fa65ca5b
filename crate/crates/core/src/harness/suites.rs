//! One randomized check per lemma of the construction.

use std::sync::Arc;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{Elem, GroupTable, MonoidTable};
use crate::boundary::{boundary_points, BoundarySet, CollapseContext};
use crate::collapse::{collapse, prepare_quant};
use crate::semantics::{nk_oracle_for, Assignment, Evaluator, OmegaPolicy};
use crate::sorting_tree::{self, TreeNode};
use crate::syntax::{is_active_domain, Formula, Kind, LinearTerm, Value, Var};
use crate::words::{sample_word_with, Alphabet, DomainDr, WordModel};

use super::{generate_corpus, sample_assignment, Counterexample, EquivReport, HarnessError};

pub const SUITES: [&str; 6] =
    ["boundary-inclusion", "interval-periodicity", "interval-product", "total-product", "tree-order", "separation"];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_exp: u32,
    pub max_support: usize,
    /// Collapse inner quantifiers before checking. Without this, bodies with
    /// unguarded quantifiers are skipped by the suites that need active-domain bodies.
    pub collapse_bodies: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { instances: 100, seed: 0, max_exp: 4, max_support: 3, collapse_bodies: true }
    }
}

/// Runs the suite `name`.
pub fn lemma_suite(name: &str, cfg: &SuiteConfig) -> Result<EquivReport, HarnessError> {
    match name {
        "boundary-inclusion" => quant_suite(cfg, false, boundary_inclusion),
        "interval-periodicity" => quant_suite(cfg, false, interval_periodicity),
        "interval-product" => quant_suite(cfg, true, interval_product),
        "total-product" => quant_suite(cfg, true, total_product),
        "tree-order" => tree_suite(cfg, tree_order),
        "separation" => tree_suite(cfg, separation),
        _ => Err(HarnessError::UnknownSuite(name.to_string())),
    }
}

/// One quantifier `Q z <bodies>` on one word under one assignment.
struct Instance {
    monoid: Arc<MonoidTable>,
    z: Var,
    bodies: Vec<Formula>,
    ctx: CollapseContext,
    w: WordModel,
    a: Assignment,
    b: BoundarySet,
}

impl Instance {
    fn cex(&self, lhs: impl Into<String>, rhs: impl Into<String>) -> Counterexample {
        Counterexample::new(&self.w, &self.a, lhs, rhs)
    }

    fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::omega(&self.w, &Formula::or_any(self.bodies.iter().cloned()), &OmegaPolicy::default())
    }
}

fn alphabet() -> Alphabet {
    Alphabet::with_neutral(['a', 'b'], '_')
}

fn quant_suite(cfg: &SuiteConfig, groups_only: bool, check: fn(&Instance, &mut EquivReport) -> Result<(), HarnessError>) -> Result<EquivReport, HarnessError> {
    let ab = alphabet();
    let corpus = generate_corpus(cfg.instances.max(1), cfg.seed, &ab).map_err(|e| HarnessError::Setup(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut report = EquivReport::default();
    for entry in &corpus {
        let Kind::Quant(q) = entry.formula.kind() else { continue };
        let group = q.monoid.as_group();
        if groups_only && group.is_none() {
            report.skipped += 1;
            continue;
        }
        let mut q = q.clone();
        if cfg.collapse_bodies {
            let mut bodies = Vec::new();
            for b in &q.bodies {
                bodies.push(collapse(b, &ab).map_err(|e| HarnessError::Setup(e.to_string()))?.formula);
            }
            q.bodies = bodies;
        }
        if !q.expanded_bodies().iter().all(|b| is_active_domain(b, ab.neutral())) {
            report.skipped += 1;
            continue;
        }
        let order = group.as_ref().map_or(1, |g| g.size());
        let (ctx, bodies) = prepare_quant(&q, &ab, order, 0).map_err(|e| HarnessError::Setup(e.to_string()))?;
        let d = DomainDr::new(ctx.rphi, cfg.max_exp)?;
        let count = rng.gen_range(0..=cfg.max_support);
        let w = sample_word_with(&d, &ab, count, &mut rng)?;
        let mut a = sample_assignment(&ctx.params, &d, &mut rng);
        // Parameters may also sit on letters of the word.
        for v in &ctx.params {
            if !w.nnp().is_empty() && rng.gen_bool(0.3) {
                let nnp = w.nnp();
                a.insert(*v, nnp[rng.gen_range(0..nnp.len())]);
            }
        }
        let b = boundary_points(&w.nnp(), &a, &ctx).map_err(|e| HarnessError::Setup(e.to_string()))?;
        let inst = Instance { monoid: q.monoid.clone(), z: q.var, bodies, ctx, w, a, b };
        check(&inst, &mut report)?;
    }
    Ok(report)
}

/// Every value of a pivot term on non-neutral positions is a boundary point
/// of its offset.
fn boundary_inclusion(inst: &Instance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let nnp = inst.w.nnp();
    let tv = inst.ctx.offset_values(&inst.a).map_err(|e| HarnessError::Setup(e.to_string()))?;
    for rho in &inst.ctx.rho {
        let offset = rho.restrict(|v| inst.ctx.params.contains(&v));
        let t = inst.ctx.offsets.iter().position(|o| *o == offset).expect("every pivot term has an offset");
        let bound: Vec<Var> = rho.vars().filter(|v| !inst.ctx.params.contains(v)).collect();
        for vals in bound.iter().map(|_| nnp.iter().copied()).multi_cartesian_product() {
            let mut env = inst.a.clone();
            env.extend(bound.iter().copied().zip(vals));
            let v = rho.eval(|x| env.get(&x).copied()).expect("all variables assigned");
            if v < 0 {
                continue;
            }
            if inst.b.per_offset[t].binary_search(&v).is_ok() {
                report.agree();
            } else {
                report.disagree(inst.cex(format!("{rho} = {v}"), format!("not in B_{} (t = {})", t, tv[t])));
            }
        }
    }
    Ok(())
}

/// Positions `q` apart inside one interval carry the same value.
fn interval_periodicity(inst: &Instance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let q = inst.ctx.q as Value;
    let mut ev = inst.evaluator();
    let mut u = |i: Value| ev.u_at_with(&inst.monoid, inst.z, &inst.bodies, i, &inst.a);
    let mut gaps: Vec<(Value, Value)> = Vec::new();
    let mut lo = -1;
    for &pt in &inst.b.points {
        gaps.push((lo, pt));
        lo = pt;
    }
    gaps.push((lo, lo + 4 * q + 2));
    for (lo, hi) in gaps {
        let first: Vec<Value> = (lo + 1..hi).take(3 * q as usize).collect();
        let last: Vec<Value> = (lo + 1..hi).rev().take(3 * q as usize).collect();
        for i in first.into_iter().chain(last).unique() {
            if i + q >= hi {
                continue;
            }
            let (x, y) = (u(i)?, u(i + q)?);
            if x == y {
                report.agree();
            } else {
                report.disagree(inst.cex(format!("u({i}) = {x:?}"), format!("u({}) = {y:?}", i + q)));
            }
        }
    }
    Ok(())
}

struct Products {
    g: GroupTable,
    /// `prefix[i] = u(0) ... u(i-1)`.
    prefix: Vec<Elem>,
    tail_identity: bool,
}

fn products(inst: &Instance) -> Result<Products, HarnessError> {
    let g = inst.monoid.as_group().expect("group instance");
    let mut ev = inst.evaluator();
    let end = inst.b.max() + inst.ctx.p as Value;
    let mut prefix = vec![g.identity()];
    let mut tail_identity = true;
    for i in 0..=end + inst.ctx.p as Value {
        let x = ev.u_at_with(&inst.monoid, inst.z, &inst.bodies, i, &inst.a)?.ok_or(HarnessError::Setup("no position value".into()))?;
        if i > end {
            tail_identity &= x == g.identity();
        } else {
            prefix.push(g.mul(*prefix.last().unwrap(), x));
        }
    }
    Ok(Products { g, prefix, tail_identity })
}

impl Products {
    /// `u(from) ... u(to)`, empty when `from > to`.
    fn range(&self, from: Value, to: Value) -> Elem {
        if from > to {
            return self.g.identity();
        }
        self.g.mul(self.g.inv(self.prefix[from as usize]), self.prefix[to as usize + 1])
    }
}

/// `N_k(b) N̂_k(b')^{-1}` is the product strictly between neighbouring
/// points `b < b'` of the higher layers.
fn interval_product(inst: &Instance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let pr = products(inst)?;
    let g = &pr.g;
    let o = nk_oracle_for(&inst.bodies, inst.z, g, &inst.w, &inst.a, &inst.b, &inst.ctx)?;
    let pts = &inst.b.points;
    for k in 0..=o.levels() {
        let higher: Vec<Value> = inst.b.per_offset[k..].iter().flatten().copied().sorted().dedup().collect();
        for (i, &lo) in pts.iter().enumerate() {
            for &hi in &pts[i + 1..] {
                if higher.iter().any(|&x| lo < x && x < hi) {
                    break;
                }
                let got = g.mul(o.n(k, lo)?, g.inv(o.nhat(k, hi)?));
                let want = pr.range(lo + 1, hi - 1);
                if got == want {
                    report.agree();
                } else {
                    report.disagree(inst.cex(format!("k={k} b={lo} b'={hi}: {}", g.elem_name(got)), g.elem_name(want).to_string()));
                }
            }
        }
    }
    Ok(())
}

/// `u(0) N_{|T|}(0)` is the whole product when it is defined.
fn total_product(inst: &Instance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let pr = products(inst)?;
    if !pr.tail_identity {
        report.skipped += 1;
        return Ok(());
    }
    let g = &pr.g;
    let o = nk_oracle_for(&inst.bodies, inst.z, g, &inst.w, &inst.a, &inst.b, &inst.ctx)?;
    let got = g.mul(pr.range(0, 0), o.n(o.levels(), 0)?);
    let want = *pr.prefix.last().unwrap();
    if got == want {
        report.agree();
    } else {
        report.disagree(inst.cex(g.elem_name(got).to_string(), g.elem_name(want).to_string()));
    }
    Ok(())
}

struct TreeInstance {
    ctx: CollapseContext,
    r: Value,
    nnp: Vec<Value>,
    a: Assignment,
}

impl TreeInstance {
    fn cex(&self, lhs: impl Into<String>, rhs: impl Into<String>) -> Counterexample {
        let w = WordModel::from_support(alphabet(), self.nnp.iter().map(|&p| (p, 'a'))).expect("valid support");
        let mut c = Counterexample::new(&w, &self.a, lhs, rhs);
        c.assignment.insert("r".into(), self.r);
        c
    }

    fn trees(&self) -> Result<Vec<(usize, TreeNode)>, HarnessError> {
        (0..self.ctx.offsets.len())
            .map(|t| {
                sorting_tree::build(t, &self.nnp, self.r, &self.ctx, &self.a)
                    .map(|tree| (t, tree))
                    .map_err(|e| HarnessError::Setup(e.to_string()))
            })
            .collect()
    }
}

/// The reference instance first, then random ones with `r > 3sΔ`.
fn tree_instances(cfg: &SuiteConfig) -> Vec<TreeInstance> {
    let mut out = vec![TreeInstance {
        ctx: CollapseContext::synthetic(2, 2, 1, 1, vec![]),
        r: 5,
        nnp: vec![5, 25, 625],
        a: Assignment::new(),
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let y = Var::named("y");
    while out.len() < cfg.instances.max(1) {
        let s = rng.gen_range(1..=3);
        let delta = s as i64 * rng.gen_range(1..=2);
        let r = 3 * s as Value * delta as Value + rng.gen_range(1..=4);
        let offsets = match rng.gen_range(0..3) {
            0 => vec![],
            1 => vec![LinearTerm::var(y)],
            _ => vec![LinearTerm::var(y), LinearTerm::var(y).plus_const(rng.gen_range(-3..=3))],
        };
        let ctx = CollapseContext::synthetic(s, delta, 1, 1, offsets);
        let count = rng.gen_range(0..=cfg.max_support.min(cfg.max_exp as usize));
        let mut exps: Vec<u32> = (1..=cfg.max_exp).collect();
        exps.sort_by_key(|_| rng.gen::<u32>());
        let mut nnp: Vec<Value> = exps[..count].iter().map(|&e| r.pow(e)).collect();
        nnp.sort_unstable();
        let a = Assignment::from([(y, rng.gen_range(-2 * r..=r * r))]);
        out.push(TreeInstance { ctx, r, nnp, a });
    }
    out
}

fn tree_suite(cfg: &SuiteConfig, check: fn(&TreeInstance, &mut EquivReport) -> Result<(), HarnessError>) -> Result<EquivReport, HarnessError> {
    let mut report = EquivReport::default();
    for inst in tree_instances(cfg) {
        check(&inst, &mut report)?;
    }
    Ok(report)
}

/// Leaves ascend and their non-negative part is exactly `B_t`.
fn tree_order(inst: &TreeInstance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let b = boundary_points(&inst.nnp, &inst.a, &inst.ctx).map_err(|e| HarnessError::Setup(e.to_string()))?;
    for (t, tree) in inst.trees()? {
        let leaves = tree.leaves();
        if let Some(w) = leaves.windows(2).find(|w| w[0] >= w[1]) {
            report.disagree(inst.cex(format!("leaf {}", w[0]), format!("before leaf {}", w[1])));
        } else if tree.boundary_leaves() != b.per_offset[t] {
            report.disagree(inst.cex(format!("leaves {:?}", tree.boundary_leaves()), format!("B_{t} = {:?}", b.per_offset[t])));
        } else {
            report.agree();
        }
    }
    Ok(())
}

/// Subtrees of neighbouring siblings do not interleave, and children stay
/// within `Δ r^(c-1)` of their parent.
fn separation(inst: &TreeInstance, report: &mut EquivReport) -> Result<(), HarnessError> {
    let strict = inst.r > 3 * inst.ctx.s as Value * inst.ctx.delta as Value;
    for (_, tree) in inst.trees()? {
        match tree.sibling_separation() {
            Err((l, r)) => report.disagree(inst.cex(format!("left subtree reaches {l}"), format!("right subtree starts at {r}"))),
            Ok(()) if strict && !tree.check_all_child_bounds(inst.r, inst.ctx.delta) => {
                report.disagree(inst.cex("child outside parent range", "within Δ r^(c-1)"))
            }
            Ok(()) => report.agree(),
        }
    }
    Ok(())
}
