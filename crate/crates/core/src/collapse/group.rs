//! Elimination of a group quantifier `Q{G,m} z <φ_1..φ_K>` whose bodies are
//! active-domain and normalized in `z`.
//!
//! Every helper formula has one extra free variable `β` standing for a
//! boundary point `b`; it is instantiated by substitution.

use std::collections::HashMap;
use std::sync::Arc;

use crate::algebra::{Elem, GroupTable, MonoidTable};
use crate::boundary::{CollapseContext, ExtTerm};
use crate::syntax::{ad_guard, Formula, LinearTerm, Var};

use super::tail_witness;
use super::TraceEntry;

type TreeKey = (usize, bool, Vec<i64>);

/// The formula families of one group-quantifier elimination.
pub struct GroupConstruction<'a> {
    g: &'a GroupTable,
    monoid: Arc<MonoidTable>,
    ctx: &'a CollapseContext,
    bodies: Vec<Formula>,
    neutral: char,
    beta: Var,
    tree_vars: Vec<Vec<Var>>,
    delta_vars: Vec<Var>,
    body_at: HashMap<i64, Vec<Formula>>,
    sel: HashMap<(Elem, i64), Formula>,
    chain: HashMap<(i64, usize, Elem), Formula>,
    point: HashMap<i64, Formula>,
    nu: HashMap<(usize, bool, Elem), Formula>,
    chi: HashMap<usize, Vec<Formula>>,
    leaf: HashMap<(usize, Vec<i64>), Vec<Formula>>,
    tau: HashMap<(TreeKey, Elem), Formula>,
    side: HashMap<(TreeKey, bool, Elem), Formula>,
    tree_pi: HashMap<(TreeKey, bool, usize, Elem), Formula>,
}

impl<'a> GroupConstruction<'a> {
    pub fn new(
        g: &'a GroupTable,
        monoid: Arc<MonoidTable>,
        ctx: &'a CollapseContext,
        bodies: Vec<Formula>,
        neutral: char,
    ) -> Self {
        let levels = ctx.offsets.len();
        GroupConstruction {
            g,
            monoid,
            ctx,
            bodies,
            neutral,
            beta: Var::fresh("b"),
            tree_vars: (0..levels).map(|k| (0..ctx.s).map(|_| Var::fresh(&format!("t{}", k + 1))).collect()).collect(),
            delta_vars: (0..ctx.s).map(|_| Var::fresh("d")).collect(),
            body_at: HashMap::new(),
            sel: HashMap::new(),
            chain: HashMap::new(),
            point: HashMap::new(),
            nu: HashMap::new(),
            chi: HashMap::new(),
            leaf: HashMap::new(),
            tau: HashMap::new(),
            side: HashMap::new(),
            tree_pi: HashMap::new(),
        }
    }

    /// The free variable standing for the boundary point `b`.
    pub fn beta(&self) -> Var {
        self.beta
    }

    fn elems(&self) -> std::ops::Range<Elem> {
        self.g.elements()
    }

    fn id(&self) -> Elem {
        self.g.identity()
    }

    fn at(&self, off: i64) -> LinearTerm {
        LinearTerm::var(self.beta).plus_const(off)
    }

    fn bodies_at(&mut self, off: i64) -> Vec<Formula> {
        if let Some(b) = self.body_at.get(&off) {
            return b.clone();
        }
        let map = HashMap::from([(self.ctx.pivot, self.at(off))]);
        let out = Formula::subst_all(&self.bodies, &map);
        self.body_at.insert(off, out.clone());
        out
    }

    /// `u(β + off) = e`.
    pub(crate) fn sel(&mut self, e: Elem, off: i64) -> Formula {
        if let Some(f) = self.sel.get(&(e, off)) {
            return f.clone();
        }
        let bs = self.bodies_at(off);
        let f = match self.g.slot_of(e) {
            None => Formula::and_all(bs.iter().map(|b| Formula::negate(b.clone()))),
            Some(j) => Formula::and_all(
                bs[..j].iter().map(|b| Formula::negate(b.clone())).chain(std::iter::once(bs[j].clone())),
            ),
        };
        self.sel.insert((e, off), f.clone());
        f
    }

    /// `u(β+start) ... u(β+start+len-1) = m`.
    pub(crate) fn chain(&mut self, start: i64, len: usize, m: Elem) -> Formula {
        if len == 0 {
            return Formula::boolean(m == self.id());
        }
        if let Some(f) = self.chain.get(&(start, len, m)) {
            return f.clone();
        }
        let last = start + len as i64 - 1;
        let mut parts = Vec::new();
        for e in self.elems() {
            let prefix = self.g.mul(m, self.g.inv(e));
            let a = self.chain(start, len - 1, prefix);
            let b = self.sel(e, last);
            parts.push(Formula::and2(a, b));
        }
        let f = Formula::or_any(parts);
        self.chain.insert((start, len, m), f.clone());
        f
    }

    /// `f'(x⃗') = rhs` for some strictly decreasing tuple of non-neutral
    /// positions, counted with the group quantifier and target `m_1`.
    fn exists_tuple(&self, f: &ExtTerm, rhs: &LinearTerm) -> Formula {
        let xs = &self.delta_vars[..f.arity()];
        let mut body = Formula::eq(f.term(xs, self.ctx), rhs.clone());
        for i in (0..xs.len()).rev() {
            let mut guard = ad_guard(self.neutral, xs[i]);
            if i > 0 {
                guard = Formula::and2(guard, Formula::lt(LinearTerm::var(xs[i]), LinearTerm::var(xs[i - 1])));
            }
            let mut bodies = vec![Formula::ff(); self.monoid.arity()];
            bodies[0] = body;
            body = Formula::quant(self.monoid.clone(), self.monoid.body_element(1), xs[i], Some(guard), bodies);
        }
        body
    }

    /// `β + off ∈ B`.
    pub(crate) fn point(&mut self, off: i64) -> Formula {
        if let Some(f) = self.point.get(&off) {
            return f.clone();
        }
        let rhs = self.at(off);
        let terms = self.ctx.all_terms();
        let mut f = Formula::or_any(terms.iter().map(|t| self.exists_tuple(t, &rhs)));
        if off < 0 {
            f = Formula::and2(Formula::negate(Formula::lt(rhs, LinearTerm::constant(0))), f);
        }
        self.point.insert(off, f.clone());
        f
    }

    fn p(&self) -> i64 {
        self.ctx.p as i64
    }

    /// `IR(β) = l`.
    pub(crate) fn ir_is(&mut self, l: i64) -> Formula {
        let mut parts = vec![self.point(l + 1)];
        for j in 1..=l {
            parts.push(Formula::negate(self.point(j)));
        }
        Formula::and_all(parts)
    }

    fn ir_at_least_p(&mut self) -> Formula {
        let p = self.p();
        Formula::and_all((1..=p).map(|j| Formula::negate(self.point(j))).collect::<Vec<_>>())
    }

    fn il_below_p(&mut self) -> Formula {
        let p = self.p();
        let mut parts = Vec::new();
        for l in 1..=p {
            parts.push(self.point(-l));
            parts.push(Formula::eq(LinearTerm::var(self.beta), LinearTerm::constant(l - 1)));
        }
        Formula::or_any(parts)
    }

    fn aligned(&self, off: i64) -> Formula {
        Formula::cong(self.ctx.p, LinearTerm::constant(0), self.at(off))
    }

    fn nu0(&mut self, m: Elem) -> Formula {
        let p = self.p();
        let mut parts = Vec::new();
        for l in 0..p {
            let a = self.ir_is(l);
            let b = self.chain(1, l as usize, m);
            parts.push(Formula::and2(a, b));
        }
        let long = self.ir_at_least_p();
        let mut aligned = Vec::new();
        for r in 0..p {
            let c = self.chain(1, r as usize, m);
            aligned.push(Formula::and2(self.aligned(r), c));
        }
        parts.push(Formula::and2(long, Formula::or_any(aligned)));
        Formula::or_any(parts)
    }

    fn nuhat0(&mut self, m: Elem) -> Formula {
        let p = self.p();
        let short = self.il_below_p();
        let mut aligned = Vec::new();
        for c in 1..=p {
            let w = self.chain(-p, (p - c + 1) as usize, m);
            aligned.push(Formula::and2(self.aligned(-c), w));
        }
        Formula::or2(
            Formula::and2(short.clone(), Formula::boolean(m == self.id())),
            Formula::and2(Formula::negate(short), Formula::or_any(aligned)),
        )
    }

    /// `N_k(β) = m`, or `N̂_k(β) = m` when `hat`.
    pub(crate) fn nu(&mut self, k: usize, hat: bool, m: Elem) -> Formula {
        if let Some(f) = self.nu.get(&(k, hat, m)) {
            return f.clone();
        }
        let f = if k == 0 {
            if hat {
                self.nuhat0(m)
            } else {
                self.nu0(m)
            }
        } else {
            let mut parts = Vec::new();
            for a in self.elems() {
                let prev = self.nu(k - 1, hat, a);
                let rest = self.g.mul(self.g.inv(a), m);
                let tree = self.tau(k, hat, &[], rest);
                parts.push(Formula::and2(prev, tree));
            }
            Formula::or_any(parts)
        };
        self.nu.insert((k, hat, m), f.clone());
        f
    }

    /// `N̂_{k-1}(β)^-1 u(β) N_{k-1}(β) = m` for every `m`.
    pub(crate) fn chi(&mut self, k: usize) -> Vec<Formula> {
        if let Some(v) = self.chi.get(&k) {
            return v.clone();
        }
        let mut out = Vec::new();
        for m in self.elems() {
            let mut parts = Vec::new();
            for a in self.elems() {
                for e in self.elems() {
                    let c = self.g.mul(self.g.mul(self.g.inv(e), a), m);
                    let x = self.nu(k - 1, true, a);
                    let y = self.sel(e, 0);
                    let z = self.nu(k - 1, false, c);
                    parts.push(Formula::and_all([x, y, z]));
                }
            }
            out.push(Formula::or_any(parts));
        }
        self.chi.insert(k, out.clone());
        out
    }

    fn tree_term(&self, k: usize, coeffs: &[i64]) -> LinearTerm {
        let f = ExtTerm { coeffs: coeffs.to_vec(), offset: k - 1 };
        f.term(&self.tree_vars[k - 1], self.ctx)
    }

    /// The factor of the leaf `(f, A)` in the level-`k` tree.
    fn gamma(&mut self, k: usize, hat: bool, coeffs: &[i64], m: Elem) -> Formula {
        let key = (k, coeffs.to_vec());
        let v = self.tree_term(k, coeffs);
        if !self.leaf.contains_key(&key) {
            let chi = self.chi(k);
            let subst = Formula::subst_all(&chi, &HashMap::from([(self.beta, v.clone())]));
            self.leaf.insert(key.clone(), subst);
        }
        let beta = LinearTerm::var(self.beta);
        let trivial = if hat { Formula::lt(v, beta) } else { Formula::lt(v, beta.plus_const(1)) };
        let x = self.leaf[&key][m].clone();
        if m == self.id() {
            Formula::or2(trivial.clone(), Formula::and2(Formula::negate(trivial), x))
        } else {
            Formula::and2(Formula::negate(trivial), x)
        }
    }

    /// Product over the leaves below the node with term `coeffs` in the level-`k` tree.
    pub(crate) fn tau(&mut self, k: usize, hat: bool, coeffs: &[i64], m: Elem) -> Formula {
        let key = ((k, hat, coeffs.to_vec()), m);
        if let Some(f) = self.tau.get(&key) {
            return f.clone();
        }
        let f = if coeffs.len() == self.ctx.s {
            self.gamma(k, hat, coeffs, m)
        } else {
            let mut parts = Vec::new();
            for m1 in self.elems() {
                for m2 in self.elems() {
                    let m3 = self.g.mul(self.g.inv(self.g.mul(m1, m2)), m);
                    let left = self.side(k, hat, coeffs, false, m1);
                    let mid = self.gamma(k, hat, coeffs, m2);
                    let right = self.side(k, hat, coeffs, true, m3);
                    parts.push(Formula::and_all([left, mid, right]));
                }
            }
            Formula::or_any(parts)
        };
        self.tau.insert(key, f.clone());
        f
    }

    /// Product of the left (`positive = false`) or right children of a node.
    fn side(&mut self, k: usize, hat: bool, coeffs: &[i64], positive: bool, m: Elem) -> Formula {
        let key = ((k, hat, coeffs.to_vec()), positive, m);
        if let Some(f) = self.side.get(&key) {
            return f.clone();
        }
        let level = coeffs.len();
        let x = self.tree_vars[k - 1][level];
        let mut guard = ad_guard(self.neutral, x);
        if level > 0 {
            let prev = self.tree_vars[k - 1][level - 1];
            guard = Formula::and2(guard, Formula::lt(LinearTerm::var(x), LinearTerm::var(prev)));
        }
        let (target, bodies) = if positive {
            let bodies = (1..=self.monoid.arity())
                .map(|j| self.tree_pi(k, hat, coeffs, true, self.delta_len(), self.monoid.body_element(j)))
                .collect::<Vec<_>>();
            (m, bodies)
        } else {
            let bodies = (1..=self.monoid.arity())
                .map(|j| {
                    let e = self.g.inv(self.monoid.body_element(j));
                    self.tree_pi(k, hat, coeffs, false, self.delta_len(), e)
                })
                .collect::<Vec<_>>();
            (self.g.inv(m), bodies)
        };
        let f = Formula::quant(self.monoid.clone(), target, x, Some(guard), bodies);
        self.side.insert(key, f.clone());
        f
    }

    fn delta_len(&self) -> usize {
        self.ctx.delta as usize
    }

    /// Product of the first `len` children `(f + α x, ·)` on one side, α ascending.
    fn tree_pi(&mut self, k: usize, hat: bool, coeffs: &[i64], positive: bool, len: usize, e: Elem) -> Formula {
        if len == 0 {
            return Formula::boolean(e == self.id());
        }
        let key = ((k, hat, coeffs.to_vec()), positive, len, e);
        if let Some(f) = self.tree_pi.get(&key) {
            return f.clone();
        }
        let d = self.ctx.delta;
        let alpha = if positive { len as i64 } else { -d + len as i64 - 1 };
        let mut child = coeffs.to_vec();
        child.push(alpha);
        let mut parts = Vec::new();
        for a in self.elems() {
            let prefix = self.tree_pi(k, hat, coeffs, positive, len - 1, a);
            let last = self.tau(k, hat, &child, self.g.mul(self.g.inv(a), e));
            parts.push(Formula::and2(prefix, last));
        }
        let f = Formula::or_any(parts);
        self.tree_pi.insert(key, f.clone());
        f
    }

    fn at_term(&self, f: Formula, term: &LinearTerm) -> Formula {
        f.subst1(self.beta, term)
    }

    /// `δ^l_f`: `f(x⃗) + l` is a boundary point.
    pub fn delta(&mut self, l: i64, f: &ExtTerm, xs: &[Var]) -> Formula {
        let d = self.point(l);
        self.at_term(d, &f.term(xs, self.ctx))
    }

    /// `π^{m,l}_f`: `u(f) u(f+1) ... u(f+l) = m`.
    pub fn pi(&mut self, m: Elem, l: usize, f: &ExtTerm, xs: &[Var]) -> Formula {
        let c = self.chain(0, l + 1, m);
        self.at_term(c, &f.term(xs, self.ctx))
    }

    /// `ν^m_{k,f}` (or `ν̂` when `hat`) at an arbitrary term.
    pub fn nu_at(&mut self, k: usize, hat: bool, m: Elem, at: &LinearTerm) -> Formula {
        let n = self.nu(k, hat, m);
        self.at_term(n, at)
    }

    /// `Γ^m` of the level-`k` tree for every `m`, free in [`Self::beta`].
    pub fn tree_formulas(&mut self, k: usize, hat: bool) -> Vec<Formula> {
        self.elems().map(|m| self.tau(k, hat, &[], m)).collect()
    }

    /// The collapsed formula for target `m`, with the named families for tracing.
    pub fn build(&mut self, target: Elem) -> (Formula, Vec<TraceEntry>) {
        let levels = self.ctx.offsets.len();
        let z = self.ctx.pivot;
        let tail = Formula::and_all(
            self.bodies.clone().iter().map(|b| Formula::negate(tail_witness(b, z, self.ctx.q))).collect::<Vec<_>>(),
        );
        let mut parts = Vec::new();
        for a in self.elems() {
            let first = self.sel(a, 0);
            let rest = self.nu(levels, false, self.g.mul(self.g.inv(a), target));
            parts.push(Formula::and2(first, rest));
        }
        let main = Formula::or_any(parts).subst1(self.beta, &LinearTerm::constant(0));
        let out = Formula::and2(tail.clone(), main);

        let mut trace = vec![TraceEntry::new("psi_hat", tail)];
        trace.push(TraceEntry::new("delta^1", self.point(1)));
        let m1 = self.monoid.body_element(1);
        trace.push(TraceEntry::new(format!("pi^{{{},1}}", self.monoid.elem_name(m1)), self.chain(0, 2, m1)));
        for k in 0..=levels {
            for m in self.elems() {
                let name = self.monoid.elem_name(m).to_string();
                trace.push(TraceEntry::new(format!("nu^{name}_{k}"), self.nu(k, false, m)));
                if k < levels {
                    trace.push(TraceEntry::new(format!("nu_hat^{name}_{k}"), self.nu(k, true, m)));
                }
                if k > 0 {
                    trace.push(TraceEntry::new(format!("gamma^{name}_{k}"), self.chi(k)[m].clone()));
                    trace.push(TraceEntry::new(format!("Gamma^{name}_{k}"), self.tau(k, false, &[], m)));
                }
            }
        }
        (out, trace)
    }
}
