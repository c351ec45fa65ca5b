use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::algebra::{Elem, MonoidTable};

use super::term::{LinearTerm, Var};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Gt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Eq => "=",
        }
    }

    pub fn holds(self, a: i128, b: i128) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Eq => a == b,
        }
    }

    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Eq,
        }
    }
}

/// A monoid quantifier `Q^target_monoid var [guard] <bodies>`.
///
/// The guard is the relativization shorthand: the quantifier means the same
/// as the one whose `i`-th body is `guard & bodies[i]`.
#[derive(Clone, Debug)]
pub struct Quant {
    pub monoid: Arc<MonoidTable>,
    pub target: Elem,
    pub var: Var,
    pub guard: Option<Formula>,
    pub bodies: Vec<Formula>,
}

impl PartialEq for Quant {
    fn eq(&self, o: &Self) -> bool {
        (Arc::ptr_eq(&self.monoid, &o.monoid) || self.monoid == o.monoid)
            && self.target == o.target
            && self.var == o.var
            && self.guard == o.guard
            && self.bodies == o.bodies
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    True,
    False,
    Letter(char, LinearTerm),
    Cmp(CmpOp, LinearTerm, LinearTerm),
    /// `Cong(q, a, b)`: `q` divides `b - a`.
    Cong(u64, LinearTerm, LinearTerm),
    Not(Formula),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Quant(Quant),
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    free: Box<[Var]>,
    size: u64,
    qdepth: u32,
}

/// Immutable, reference-counted formula. Subformulas are shared, so a
/// formula is a DAG; `size` reports the unfolded tree size.
#[derive(Clone, Debug)]
pub struct Formula(Arc<Node>);

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.kind == other.0.kind
    }
}

impl Formula {
    /// Raw constructor: no simplification.
    pub fn new(kind: Kind) -> Formula {
        let mut free = BTreeSet::new();
        let mut size: u64 = 1;
        let mut qdepth = 0;
        let mut child = |f: &Formula, free: &mut BTreeSet<Var>| {
            free.extend(f.free_vars().iter().copied());
            size = size.saturating_add(f.size());
            qdepth = qdepth.max(f.quantifier_depth());
        };
        match &kind {
            Kind::True | Kind::False => {}
            Kind::Letter(_, t) => free.extend(t.vars()),
            Kind::Cmp(_, a, b) | Kind::Cong(_, a, b) => {
                free.extend(a.vars());
                free.extend(b.vars());
            }
            Kind::Not(f) => child(f, &mut free),
            Kind::And(fs) | Kind::Or(fs) => fs.iter().for_each(|f| child(f, &mut free)),
            Kind::Quant(q) => {
                let mut inner = BTreeSet::new();
                q.guard.iter().chain(q.bodies.iter()).for_each(|f| child(f, &mut inner));
                inner.remove(&q.var);
                free.extend(inner);
                qdepth += 1;
            }
        }
        Formula(Arc::new(Node { kind, free: free.into_iter().collect(), size, qdepth }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Sorted free variables.
    pub fn free_vars(&self) -> &[Var] {
        &self.0.free
    }

    pub fn is_free(&self, v: Var) -> bool {
        self.0.free.binary_search(&v).is_ok()
    }

    /// Unfolded tree size, saturating.
    pub fn size(&self) -> u64 {
        self.0.size
    }

    pub fn quantifier_depth(&self) -> u32 {
        self.0.qdepth
    }

    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn is_shared(&self) -> bool {
        Arc::strong_count(&self.0) > 1
    }

    pub fn ptr_eq(&self, other: &Formula) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_quant(&self) -> Option<&Quant> {
        match self.kind() {
            Kind::Quant(q) => Some(q),
            _ => None,
        }
    }

    pub fn tt() -> Formula {
        Formula::new(Kind::True)
    }

    pub fn ff() -> Formula {
        Formula::new(Kind::False)
    }

    pub fn boolean(b: bool) -> Formula {
        if b {
            Self::tt()
        } else {
            Self::ff()
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self.kind(), Kind::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self.kind(), Kind::False)
    }

    pub fn letter(c: char, t: LinearTerm) -> Formula {
        Formula::new(Kind::Letter(c, t))
    }

    /// Comparison atom; folds to a constant when both sides differ by a constant.
    pub fn cmp(op: CmpOp, a: LinearTerm, b: LinearTerm) -> Formula {
        let d = a.sub(&b);
        if d.is_constant() {
            return Formula::boolean(op.holds(d.constant_part() as i128, 0));
        }
        Formula::new(Kind::Cmp(op, a, b))
    }

    pub fn lt(a: LinearTerm, b: LinearTerm) -> Formula {
        Self::cmp(CmpOp::Lt, a, b)
    }

    pub fn gt(a: LinearTerm, b: LinearTerm) -> Formula {
        Self::cmp(CmpOp::Gt, a, b)
    }

    pub fn eq(a: LinearTerm, b: LinearTerm) -> Formula {
        Self::cmp(CmpOp::Eq, a, b)
    }

    /// `q | b - a`, folded when ground or when `q == 1`.
    pub fn cong(q: u64, a: LinearTerm, b: LinearTerm) -> Formula {
        let d = b.sub(&a);
        if q == 1 {
            return Formula::tt();
        }
        if d.is_constant() {
            return Formula::boolean((d.constant_part() as i128).rem_euclid(q as i128) == 0);
        }
        Formula::new(Kind::Cong(q, a, b))
    }

    pub fn negate(f: Formula) -> Formula {
        match f.kind() {
            Kind::True => Formula::ff(),
            Kind::False => Formula::tt(),
            Kind::Not(g) => g.clone(),
            _ => Formula::new(Kind::Not(f)),
        }
    }

    pub fn and_all<I: IntoIterator<Item = Formula>>(fs: I) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f.kind() {
                Kind::True => {}
                Kind::False => return Formula::ff(),
                Kind::And(gs) => out.extend(gs.iter().cloned()),
                _ => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::tt(),
            1 => out.pop().unwrap(),
            _ => Formula::new(Kind::And(out)),
        }
    }

    pub fn or_any<I: IntoIterator<Item = Formula>>(fs: I) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f.kind() {
                Kind::False => {}
                Kind::True => return Formula::tt(),
                Kind::Or(gs) => out.extend(gs.iter().cloned()),
                _ => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::ff(),
            1 => out.pop().unwrap(),
            _ => Formula::new(Kind::Or(out)),
        }
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Self::and_all([a, b])
    }

    pub fn or2(a: Formula, b: Formula) -> Formula {
        Self::or_any([a, b])
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Self::or2(Self::negate(a), b)
    }

    pub fn quant(
        monoid: Arc<MonoidTable>,
        target: Elem,
        var: Var,
        guard: Option<Formula>,
        bodies: Vec<Formula>,
    ) -> Formula {
        debug_assert_eq!(bodies.len(), monoid.arity());
        let guard = guard.filter(|g| !g.is_true());
        // Every position contributes the identity.
        if guard.as_ref().is_some_and(Formula::is_false) || bodies.iter().all(Formula::is_false) {
            return Formula::boolean(target == monoid.identity());
        }
        Formula::new(Kind::Quant(Quant { monoid, target, var, guard, bodies }))
    }

    /// Visits every node once (DAG-aware), children before parents.
    pub fn visit_unique(&self, f: &mut impl FnMut(&Formula)) {
        let mut seen = std::collections::HashSet::new();
        self.visit_rec(&mut seen, f);
    }

    fn visit_rec(&self, seen: &mut std::collections::HashSet<usize>, f: &mut impl FnMut(&Formula)) {
        if !seen.insert(self.node_id()) {
            return;
        }
        for c in self.children() {
            c.visit_rec(seen, f);
        }
        f(self);
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self.kind() {
            Kind::Not(f) => vec![f],
            Kind::And(fs) | Kind::Or(fs) => fs.iter().collect(),
            Kind::Quant(q) => q.guard.iter().chain(q.bodies.iter()).collect(),
            _ => vec![],
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut n = 0;
        self.visit_unique(&mut |_| n += 1);
        n
    }

    /// Every monoid used by a quantifier.
    pub fn monoids(&self) -> Vec<Arc<MonoidTable>> {
        let mut out: Vec<Arc<MonoidTable>> = Vec::new();
        self.visit_unique(&mut |f| {
            if let Kind::Quant(q) = f.kind() {
                if !out.iter().any(|m| **m == *q.monoid) {
                    out.push(q.monoid.clone());
                }
            }
        });
        out
    }

    /// Every congruence modulus.
    pub fn moduli(&self) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        self.visit_unique(&mut |f| {
            if let Kind::Cong(q, ..) = f.kind() {
                out.insert(*q);
            }
        });
        out
    }

    /// Capture-avoiding simultaneous substitution of terms for variables.
    pub fn subst(&self, map: &HashMap<Var, LinearTerm>) -> Formula {
        let mut memo = HashMap::new();
        self.subst_rec(map, &mut memo)
    }

    /// `subst` over several formulas, sharing the rewritten subformulas.
    pub fn subst_all(fs: &[Formula], map: &HashMap<Var, LinearTerm>) -> Vec<Formula> {
        let mut memo = HashMap::new();
        fs.iter().map(|f| f.subst_rec(map, &mut memo)).collect()
    }

    pub fn subst1(&self, v: Var, t: &LinearTerm) -> Formula {
        self.subst(&HashMap::from([(v, t.clone())]))
    }

    fn subst_rec(&self, map: &HashMap<Var, LinearTerm>, memo: &mut HashMap<usize, Formula>) -> Formula {
        if !map.keys().any(|v| self.is_free(*v)) {
            return self.clone();
        }
        if let Some(f) = memo.get(&self.node_id()) {
            return f.clone();
        }
        let term = |t: &LinearTerm| {
            let mut out = t.clone();
            for (v, by) in map {
                if t.mentions(*v) {
                    out = out.without(*v).add(&by.scale(t.coeff(*v)));
                }
            }
            out
        };
        let out = match self.kind() {
            Kind::True | Kind::False => self.clone(),
            Kind::Letter(c, t) => Formula::letter(*c, term(t)),
            Kind::Cmp(op, a, b) => Formula::cmp(*op, term(a), term(b)),
            Kind::Cong(q, a, b) => Formula::cong(*q, term(a), term(b)),
            Kind::Not(f) => Formula::negate(f.subst_rec(map, memo)),
            Kind::And(fs) => Formula::and_all(fs.iter().map(|f| f.subst_rec(map, memo))),
            Kind::Or(fs) => Formula::or_any(fs.iter().map(|f| f.subst_rec(map, memo))),
            Kind::Quant(q) => {
                let mut inner: HashMap<Var, LinearTerm> =
                    map.iter().filter(|(v, _)| **v != q.var).map(|(v, t)| (*v, t.clone())).collect();
                let captures = inner.values().any(|t| t.mentions(q.var));
                let mut var = q.var;
                if captures {
                    var = Var::fresh(&format!("{}r", q.var.name().trim_start_matches('_')));
                    inner.insert(q.var, LinearTerm::var(var));
                }
                let mut inner_memo = HashMap::new();
                let mut go = |f: &Formula| {
                    if captures {
                        f.subst_rec(&inner, &mut inner_memo)
                    } else {
                        f.subst_rec(&inner, memo)
                    }
                };
                let guard = q.guard.as_ref().map(&mut go);
                let bodies = q.bodies.iter().map(&mut go).collect();
                Formula::quant(q.monoid.clone(), q.target, var, guard, bodies)
            }
        };
        memo.insert(self.node_id(), out.clone());
        out
    }

    /// Bottom-up rewrite of atoms, DAG-aware. `f` returns `None` to keep an
    /// atom unchanged. Quantifier binders are passed down in `bound`.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Formula) -> Option<Formula>) -> Formula {
        let mut memo = HashMap::new();
        self.map_atoms_rec(f, &mut memo)
    }

    fn map_atoms_rec(
        &self,
        f: &mut impl FnMut(&Formula) -> Option<Formula>,
        memo: &mut HashMap<usize, Formula>,
    ) -> Formula {
        if let Some(r) = memo.get(&self.node_id()) {
            return r.clone();
        }
        let out = match self.kind() {
            Kind::True | Kind::False | Kind::Letter(..) | Kind::Cmp(..) | Kind::Cong(..) => {
                f(self).unwrap_or_else(|| self.clone())
            }
            Kind::Not(g) => Formula::negate(g.map_atoms_rec(f, memo)),
            Kind::And(fs) => Formula::and_all(fs.iter().map(|g| g.map_atoms_rec(f, memo))),
            Kind::Or(fs) => Formula::or_any(fs.iter().map(|g| g.map_atoms_rec(f, memo))),
            Kind::Quant(q) => {
                let guard = q.guard.as_ref().map(|g| g.map_atoms_rec(f, memo));
                let bodies = q.bodies.iter().map(|g| g.map_atoms_rec(f, memo)).collect();
                Formula::quant(q.monoid.clone(), q.target, q.var, guard, bodies)
            }
        };
        memo.insert(self.node_id(), out.clone());
        out
    }
}

impl Quant {
    /// Bodies with the guard conjoined, i.e. the unabbreviated quantifier.
    pub fn expanded_bodies(&self) -> Vec<Formula> {
        match &self.guard {
            None => self.bodies.clone(),
            Some(g) => self.bodies.iter().map(|b| Formula::and2(g.clone(), b.clone())).collect(),
        }
    }
}

/// `Q x [guard] <a_1..a_K>` unfolded to `Q x <guard & a_1, ..., guard & a_K>`.
pub fn relativize(q: &Quant, guard: &Formula) -> Formula {
    let bodies = q.bodies.iter().map(|b| Formula::and2(guard.clone(), b.clone())).collect();
    Formula::quant(q.monoid.clone(), q.target, q.var, None, bodies)
}

/// The guard `!λ(x)`.
pub fn ad_guard(neutral: char, x: Var) -> Formula {
    Formula::negate(Formula::letter(neutral, LinearTerm::var(x)))
}

fn has_ad_conjunct(f: &Formula, neutral: char, x: Var) -> bool {
    let is_guard = |g: &Formula| match g.kind() {
        Kind::Not(inner) => matches!(inner.kind(), Kind::Letter(c, t) if *c == neutral && t.as_var() == Some(x)),
        _ => false,
    };
    match f.kind() {
        Kind::And(fs) => fs.iter().any(|g| is_guard(g) || has_ad_conjunct(g, neutral, x)),
        _ => is_guard(f),
    }
}

impl Quant {
    /// Relativized to `!λ(var)`, either through the guard or in every body.
    pub fn is_ad_quant(&self, neutral: char) -> bool {
        match &self.guard {
            Some(g) if has_ad_conjunct(g, neutral, self.var) => true,
            _ => self.bodies.iter().all(|b| has_ad_conjunct(b, neutral, self.var)),
        }
    }
}

/// True iff every quantifier in `f` ranges over non-neutral positions only.
pub fn is_active_domain(f: &Formula, neutral: char) -> bool {
    let mut ok = true;
    f.visit_unique(&mut |g| {
        if let Kind::Quant(q) = g.kind() {
            ok &= q.is_ad_quant(neutral);
        }
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn active_domain_shapes() {
        assert!(is_active_domain(&parse("x < y & 'a'(x)").unwrap(), '_'));
        assert!(!is_active_domain(&parse("Q{U1,0} x . < 'a'(x) >").unwrap(), '_'));
        assert!(is_active_domain(&parse("Q{U1,0} x [!'_'(x)] . < 'a'(x) >").unwrap(), '_'));
        assert!(is_active_domain(&parse("Q{C2,g} x . < !'_'(x) & x > 3 >").unwrap(), '_'));
        assert!(!is_active_domain(&parse("Q{U1,0} x [!'_'(y)] . < 'a'(x) >").unwrap(), '_'));
    }

    #[test]
    fn relativize_conjoins_guard() {
        let f = parse("Q{U1,0} x . < 'a'(x) >").unwrap();
        let x = Var::named("x");
        let r = relativize(f.as_quant().unwrap(), &ad_guard('_', x));
        assert_eq!(r.to_string(), "Q{U1,0} x . < !'_'(x) & 'a'(x) >");
        assert!(is_active_domain(&r, '_'));
        let t = relativize(f.as_quant().unwrap(), &Formula::tt());
        assert_eq!(t, f);
    }

    #[test]
    fn substitution_avoids_capture() {
        let f = parse("Q{U1,0} x . < x < y >").unwrap();
        let y = Var::named("y");
        let g = f.subst1(y, &LinearTerm::var(Var::named("x")).plus_const(1));
        let q = g.as_quant().unwrap();
        assert_ne!(q.var, Var::named("x"));
        assert_eq!(g.free_vars(), &[Var::named("x")]);
    }

    #[test]
    fn substitution_respects_binders() {
        let f = parse("y < 2 & Q{U1,0} y . < y < 3 >").unwrap();
        let g = f.subst1(Var::named("y"), &LinearTerm::constant(1));
        assert_eq!(g.to_string(), "Q{U1,0} y . < y < 3 >");
    }

    #[test]
    fn dag_sizes() {
        let a = parse("x < y").unwrap();
        let mut f = a.clone();
        for _ in 0..70 {
            f = Formula::new(Kind::And(vec![f.clone(), f.clone()]));
        }
        assert_eq!(f.dag_size(), 71);
        assert_eq!(f.size(), u64::MAX);
    }
}
