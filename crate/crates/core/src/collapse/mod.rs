//! Rewriting formulas over `(N,<,+)` with group and `U_1` quantifiers into
//! active-domain formulas, and from there into order-only formulas.

mod group;
mod ramsey;

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::MonoidTable;
use crate::boundary::{collapse_params, BoundaryError, CollapseContext};
use crate::syntax::{ad_guard, is_active_domain, normalize_bodies, Formula, Kind, LinearTerm, NormalizeError, Quant, Var};
use crate::words::Alphabet;

pub use group::GroupConstruction;
pub use ramsey::{is_order_only, order_type_formula, pipeline, ramsey_reduce, PipelineResult, RamseyResult};

/// Smallest base accepted for quantifier-free formulas.
pub const MIN_THRESHOLD: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollapseError {
    #[error("monoid {0} is not a group")]
    NotAGroup(String),
    #[error("monoid {0} is neither a group nor U1")]
    UnsupportedMonoid(String),
    #[error("quantifier bodies are not active-domain")]
    BodiesNotActiveDomain,
    #[error("formula is not active-domain")]
    NotActiveDomain,
    #[error("numeric atom with {0} variables is too wide for the order-type search")]
    AtomTooWide(usize),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("no homogeneous subset of size {need} found in {have} candidates")]
    RamseyExhausted { need: usize, have: usize },
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

/// One named intermediate formula.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub name: String,
    #[serde(serialize_with = "ser_formula")]
    pub formula: Formula,
}

fn ser_formula<S: serde::Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

impl TraceEntry {
    pub fn new(name: impl Into<String>, formula: Formula) -> Self {
        TraceEntry { name: name.into(), formula }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseResult {
    #[serde(serialize_with = "ser_formula")]
    pub formula: Formula,
    /// Every base `r` at or above this value is collapsing.
    pub threshold: u64,
    pub trace: Vec<TraceEntry>,
}

/// `ψ̂`: some position beyond every boundary point satisfies `body`.
///
/// Order atoms in `z` are decided by `z → ∞`; congruence atoms are resolved
/// by trying each residue of `z` modulo `q`.
pub fn tail_witness(body: &Formula, z: Var, q: u64) -> Formula {
    let order = body.map_atoms(&mut |a| match a.kind() {
        Kind::Cmp(op, l, r) => {
            let c = l.coeff(z) - r.coeff(z);
            if c == 0 {
                return None;
            }
            use crate::syntax::CmpOp::*;
            Some(Formula::boolean(match op {
                Eq => false,
                Lt => c < 0,
                Gt => c > 0,
            }))
        }
        _ => None,
    });
    let q = q.max(1);
    Formula::or_any((0..q).map(|e| {
        let at = LinearTerm::constant(e as i64);
        order.map_atoms(&mut |a| match a.kind() {
            Kind::Cong(..) if a.is_free(z) => Some(a.subst1(z, &at)),
            _ => None,
        })
    }))
}

fn quant_params(q: &Quant) -> Vec<Var> {
    let mut vs: Vec<Var> = q.guard.iter().chain(q.bodies.iter()).flat_map(|b| b.free_vars().to_vec()).collect();
    vs.retain(|&v| v != q.var);
    vs.sort();
    vs.dedup();
    vs
}

/// Normalized bodies of `q` and the constants of its elimination.
pub fn prepare_quant(q: &Quant, alphabet: &Alphabet, group_order: usize, threshold: u64) -> Result<(CollapseContext, Vec<Formula>), CollapseError> {
    let bodies = q.expanded_bodies();
    if !bodies.iter().all(|b| is_active_domain(b, alphabet.neutral())) {
        return Err(CollapseError::BodiesNotActiveDomain);
    }
    let (nb, _) = normalize_bodies(&bodies, q.var, alphabet, Some(&q.monoid))?;
    let ctx = collapse_params(&nb, q.var, &quant_params(q), group_order, threshold)?;
    Ok((ctx, nb))
}

/// Eliminates `Q{G,m} z <bodies>` whose bodies are already active-domain.
pub fn collapse_group_quant(q: &Quant, alphabet: &Alphabet, body_threshold: u64) -> Result<CollapseResult, CollapseError> {
    let g = q.monoid.as_group().ok_or_else(|| CollapseError::NotAGroup(q.monoid.name().to_string()))?;
    if g.arity() == 0 {
        return Ok(CollapseResult {
            formula: Formula::boolean(q.target == g.identity()),
            threshold: body_threshold.max(MIN_THRESHOLD),
            trace: vec![],
        });
    }
    let (ctx, nb) = prepare_quant(q, alphabet, g.size(), body_threshold)?;
    let mut gc = GroupConstruction::new(&g, q.monoid.clone(), &ctx, nb, alphabet.neutral());
    let (formula, trace) = gc.build(q.target);
    Ok(CollapseResult { formula, threshold: ctx.rphi, trace })
}

/// Eliminates `Q{U1,m} z <body>`: a witness exists iff one exists in the
/// infinite interval or within distance `q` right of a boundary point.
pub fn collapse_u1_quant(q: &Quant, alphabet: &Alphabet, body_threshold: u64) -> Result<CollapseResult, CollapseError> {
    let m = &q.monoid;
    if !m.is_u1() {
        return Err(CollapseError::UnsupportedMonoid(m.name().to_string()));
    }
    let (ctx, nb) = prepare_quant(q, alphabet, 1, body_threshold)?;
    let body = nb[0].clone();
    let z = q.var;
    let xs: Vec<Var> = (0..ctx.s).map(|_| Var::fresh("e")).collect();
    let tail = tail_witness(&body, z, ctx.q);
    let mut parts = vec![tail.clone()];
    for f in ctx.all_terms() {
        let xs = &xs[..f.arity()];
        let base = f.term(xs, &ctx);
        let mut inner = Vec::new();
        for l in 0..=ctx.q as i64 {
            let pos = base.plus_const(l);
            let nonneg = Formula::negate(Formula::lt(pos.clone(), LinearTerm::constant(0)));
            inner.push(Formula::and2(nonneg, body.subst1(z, &pos)));
        }
        parts.push(exists_decreasing(m, xs, Formula::or_any(inner), alphabet.neutral()));
    }
    let exists = Formula::or_any(parts);
    let formula = if q.target == m.identity() { Formula::negate(exists.clone()) } else { exists.clone() };
    let trace = vec![TraceEntry::new("psi_hat", tail), TraceEntry::new("exists", exists)];
    Ok(CollapseResult { formula, threshold: ctx.rphi, trace })
}

/// `∃ x_1 > x_2 > ... ` over non-neutral positions, with the `U_1` quantifier.
fn exists_decreasing(u1: &Arc<MonoidTable>, xs: &[Var], body: Formula, neutral: char) -> Formula {
    let mut f = body;
    for i in (0..xs.len()).rev() {
        let mut guard = ad_guard(neutral, xs[i]);
        if i > 0 {
            guard = Formula::and2(guard, Formula::lt(LinearTerm::var(xs[i]), LinearTerm::var(xs[i - 1])));
        }
        f = Formula::quant(u1.clone(), u1.body_element(1), xs[i], Some(guard), vec![f]);
    }
    f
}

/// Collapses every quantifier of `phi`, innermost first.
pub fn collapse(phi: &Formula, alphabet: &Alphabet) -> Result<CollapseResult, CollapseError> {
    let mut c = Driver { alphabet, memo: HashMap::new(), trace: Vec::new() };
    let (formula, threshold) = c.run(phi)?;
    Ok(CollapseResult { formula, threshold, trace: c.trace })
}

struct Driver<'a> {
    alphabet: &'a Alphabet,
    memo: HashMap<usize, (Formula, u64)>,
    trace: Vec<TraceEntry>,
}

impl Driver<'_> {
    fn run(&mut self, f: &Formula) -> Result<(Formula, u64), CollapseError> {
        if f.quantifier_depth() == 0 {
            return Ok((f.clone(), MIN_THRESHOLD));
        }
        if let Some(r) = self.memo.get(&f.node_id()) {
            return Ok(r.clone());
        }
        let out = match f.kind() {
            Kind::Not(g) => {
                let (g, t) = self.run(g)?;
                (Formula::negate(g), t)
            }
            Kind::And(gs) | Kind::Or(gs) => {
                let mut parts = Vec::new();
                let mut t = MIN_THRESHOLD;
                for g in gs {
                    let (h, th) = self.run(g)?;
                    parts.push(h);
                    t = t.max(th);
                }
                let h = if matches!(f.kind(), Kind::And(_)) { Formula::and_all(parts) } else { Formula::or_any(parts) };
                (h, t)
            }
            Kind::Quant(q) => {
                let mut t = MIN_THRESHOLD;
                let guard = match &q.guard {
                    Some(g) => {
                        let (h, th) = self.run(g)?;
                        t = t.max(th);
                        Some(h)
                    }
                    None => None,
                };
                let mut bodies = Vec::new();
                for b in &q.bodies {
                    let (h, th) = self.run(b)?;
                    t = t.max(th);
                    bodies.push(h);
                }
                let rebuilt = Formula::quant(q.monoid.clone(), q.target, q.var, guard, bodies);
                let rq = rebuilt.as_quant().expect("rebuilt quantifier").clone();
                if rq.is_ad_quant(self.alphabet.neutral()) {
                    (rebuilt, t)
                } else {
                    let r = if q.monoid.as_group().is_some() {
                        collapse_group_quant(&rq, self.alphabet, t)?
                    } else if q.monoid.is_u1() {
                        collapse_u1_quant(&rq, self.alphabet, t)?
                    } else {
                        return Err(CollapseError::UnsupportedMonoid(q.monoid.name().to_string()));
                    };
                    let var = q.var.name();
                    self.trace.extend(r.trace.into_iter().map(|e| TraceEntry::new(format!("{var}: {}", e.name), e.formula)));
                    (r.formula, r.threshold.max(t))
                }
            }
            _ => (f.clone(), MIN_THRESHOLD),
        };
        self.memo.insert(f.node_id(), out.clone());
        Ok(out)
    }
}



#[cfg(test)]
mod tests;
